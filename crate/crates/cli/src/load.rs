use std::fs;
use std::path::{Path, PathBuf};

use sourcing_core::dsl::{self, Diagnostic};
use sourcing_core::plan::Plan;
use sourcing_core::transform::TransformationReport;
use sourcing_core::valuation::Benchmark;
use sourcing_core::{validate_equilibrium, SourcingEquilibrium, WeightTable};

use crate::Exit;

pub fn read(path: &Path) -> Result<String, Exit> {
    fs::read_to_string(path).map_err(|e| Exit::input(format!("{}: {e}", path.display())))
}

fn is_json(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "json")
}

pub fn diagnostics(path: &Path, diags: &[Diagnostic]) -> String {
    diags
        .iter()
        .map(|d| format!("{}:{d}", path.display()))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Parses an equilibrium without rejecting it on validation findings.
/// Findings from a DSL document come back as positioned diagnostics.
pub fn equilibrium_unchecked(path: &Path) -> Result<(SourcingEquilibrium, Vec<Diagnostic>), Exit> {
    let text = read(path)?;
    if is_json(path) {
        let eq: SourcingEquilibrium = serde_json::from_str(&text)
            .map_err(|e| Exit::input(format!("{}: {e}", path.display())))?;
        return Ok((eq, Vec::new()));
    }
    dsl::parse_equilibrium_unchecked(&text).map_err(|d| Exit::input(diagnostics(path, &d)))
}

pub fn equilibrium(path: &Path) -> Result<SourcingEquilibrium, Exit> {
    let (eq, diags) = equilibrium_unchecked(path)?;
    if !diags.is_empty() {
        return Err(Exit::input(diagnostics(path, &diags)));
    }
    let report = validate_equilibrium(&eq);
    if !report.is_valid() {
        let lines: Vec<String> = report
            .findings
            .iter()
            .map(|f| format!("{}: {} {}: {}", path.display(), f.rule, f.id, f.message))
            .collect();
        return Err(Exit::input(lines.join("\n")));
    }
    Ok(eq)
}

pub fn plan_text(path: &Path) -> Result<Plan, Exit> {
    let text = read(path)?;
    if is_json(path) {
        return serde_json::from_str(&text)
            .map_err(|e| Exit::input(format!("{}: {e}", path.display())));
    }
    dsl::parse_plan(&text).map_err(|d| Exit::input(diagnostics(path, &d)))
}

/// Loads a plan and the equilibrium it runs against: `explicit` when given,
/// otherwise the file the plan names, relative to the plan's directory.
pub fn plan_with_equilibrium(
    path: &Path,
    explicit: Option<&Path>,
) -> Result<(Plan, SourcingEquilibrium), Exit> {
    let plan = plan_text(path)?;
    let eq_path: PathBuf = match (explicit, &plan.equilibrium) {
        (Some(p), _) => p.to_path_buf(),
        (None, Some(name)) => path.parent().unwrap_or(Path::new(".")).join(name),
        (None, None) => {
            return Err(Exit::input(format!(
                "{}: plan names no equilibrium; pass --equilibrium",
                path.display()
            )))
        }
    };
    let eq = equilibrium(&eq_path)?;
    let diags = dsl::resolve_plan(&plan, &eq);
    if !diags.is_empty() {
        return Err(Exit::input(diagnostics(path, &diags)));
    }
    Ok((plan, eq))
}

pub fn history(path: &Path) -> Result<Vec<TransformationReport>, Exit> {
    let text = read(path)?;
    serde_json::from_str(&text).map_err(|e| Exit::input(format!("{}: {e}", path.display())))
}

pub fn weights(path: Option<&Path>) -> Result<WeightTable, Exit> {
    match path {
        None => Ok(WeightTable::standard()),
        Some(p) => WeightTable::from_json(&read(p)?)
            .map_err(|e| Exit::input(format!("{}: {e}", p.display()))),
    }
}

pub fn benchmark(path: Option<&Path>) -> Result<Option<Benchmark>, Exit> {
    path.map(|p| {
        Benchmark::from_json(&read(p)?).map_err(|e| Exit::input(format!("{}: {e}", p.display())))
    })
    .transpose()
}
