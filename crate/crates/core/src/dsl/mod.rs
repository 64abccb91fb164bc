//! Text formats: `.meq` equilibrium documents and `.mpl` plan documents,
//! plus canonical JSON export.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::canonical::to_canonical_json;
use crate::model::SourcingEquilibrium;

pub mod lexer;
pub mod parser;
pub mod print;

pub use parser::{
    is_keyword, parse_equilibrium, parse_equilibrium_unchecked, parse_plan, parse_plan_against,
    parse_step, resolve_plan, KEYWORDS,
};
pub use print::{print_equilibrium, print_plan};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Severity {
    Error,
    Warning,
}

/// A located message about a document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub line: usize,
    pub column: usize,
    pub severity: Severity,
    pub message: String,
    /// Text of the offending token, empty at end of input.
    pub token: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{}:{}: {sev}: {}", self.line, self.column, self.message)
    }
}

/// Canonical JSON of an equilibrium: sorted keys, reals at 12 significant
/// digits.
pub fn export_json(eq: &SourcingEquilibrium) -> String {
    to_canonical_json(eq)
}
