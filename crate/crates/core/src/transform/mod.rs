//! Steps and progressions over equilibria, the outsourcing pre- and
//! postconditions, source partitioning, reversibility, the taxonomy
//! classifier and reverse progressions.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ids::{SourceId, SubunitId, UnitId};
use crate::model::SourcingEquilibrium;
use crate::valuation::ValuationError;

mod analysis;
mod classify;
mod reverse;
mod step;

pub use analysis::{
    check_postcondition, check_precondition, invariant_portfolio_check, partition_sources,
    qualify_dimensions, reversibility, AdvantageShift, ContractChanges, EdgeRef, FinancialDelta,
    GrowthClause, OperationalChanges, PortfolioVerdict, PostcondConfig, PostconditionVerdict,
    PreconditionVerdict, QualificationReport, Reversibility, SourcePartition, TitleShift,
    WeightClause,
};
pub use classify::{analyze, classify, Classification, TransformationReport};
pub use reverse::reverse;
pub(crate) use step::apply_step_mut;
pub use step::{
    apply_progression, apply_step, apply_steps, Bindings, Progression, ProgressionFailure, Step,
    SubunitRef, TraceEntry,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TransformError {
    #[error("step `{step}` failed: {reason}")]
    StepPreconditionFailed { step: String, reason: String },
    #[error("step `{step}` cannot be inverted")]
    NotInvertible { step: String },
    #[error("a progression needs at least one step")]
    EmptyProgression,
    #[error("scope mismatch: {0}")]
    ScopeMismatch(String),
    #[error("the scope names no insourcer")]
    MissingInsourcer,
    #[error(transparent)]
    Valuation(#[from] ValuationError),
}

/// The roles of a transformation: outsourcer `A` with subunit `B`, optional
/// insourcer `X` with subunit `Y`, and the sources of `B` it is about.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransformationScope {
    pub outsourcer: UnitId,
    pub outsourcing_subunit: SubunitId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub insourcer: Option<UnitId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub insourcing_subunit: Option<SubunitId>,
    #[serde(default)]
    pub sources: BTreeSet<SourceId>,
}

impl TransformationScope {
    pub fn new(
        outsourcer: impl Into<UnitId>,
        outsourcing_subunit: impl Into<SubunitId>,
        sources: impl IntoIterator<Item = SourceId>,
    ) -> Self {
        Self {
            outsourcer: outsourcer.into(),
            outsourcing_subunit: outsourcing_subunit.into(),
            insourcer: None,
            insourcing_subunit: None,
            sources: sources.into_iter().collect(),
        }
    }

    pub fn with_insourcer(
        mut self,
        unit: impl Into<UnitId>,
        subunit: impl Into<SubunitId>,
    ) -> Self {
        self.insourcer = Some(unit.into());
        self.insourcing_subunit = Some(subunit.into());
        self
    }

    /// Checks the scope against the state before a progression: `B` belongs
    /// to `A`, `Y` to `X` (either may instead be created by `prog`), and
    /// every scope source is used by `B`.
    pub fn check(
        &self,
        before: &SourcingEquilibrium,
        prog: Option<&Progression>,
    ) -> Result<(), TransformError> {
        let created_units: BTreeSet<&UnitId> = prog.map(|p| p.created_units()).unwrap_or_default();
        let created_subunits: Vec<(&SubunitId, &UnitId)> = prog
            .map(|p| {
                p.steps
                    .iter()
                    .filter_map(|s| match s {
                        Step::CreateSubunit { subunit, unit } => Some((subunit, unit)),
                        _ => None,
                    })
                    .collect()
            })
            .unwrap_or_default();
        let belongs = |sub: &SubunitId, unit: &UnitId| {
            before.unit_of(sub) == Some(unit) || created_subunits.contains(&(sub, unit))
        };
        let exists =
            |unit: &UnitId| before.units.contains_key(unit) || created_units.contains(unit);

        if !before.units.contains_key(&self.outsourcer) {
            return Err(TransformError::ScopeMismatch(format!(
                "outsourcer {} does not exist",
                self.outsourcer
            )));
        }
        if before.unit_of(&self.outsourcing_subunit) != Some(&self.outsourcer) {
            return Err(TransformError::ScopeMismatch(format!(
                "{} is not a subunit of {}",
                self.outsourcing_subunit, self.outsourcer
            )));
        }
        match (&self.insourcer, &self.insourcing_subunit) {
            (None, None) => {}
            (Some(x), Some(y)) => {
                if !exists(x) {
                    return Err(TransformError::ScopeMismatch(format!(
                        "insourcer {x} does not exist"
                    )));
                }
                if !belongs(y, x) {
                    return Err(TransformError::ScopeMismatch(format!(
                        "{y} is not a subunit of {x}"
                    )));
                }
                if x == &self.outsourcer {
                    return Err(TransformError::ScopeMismatch(
                        "outsourcer and insourcer coincide".to_owned(),
                    ));
                }
            }
            _ => {
                return Err(TransformError::ScopeMismatch(
                    "insourcer and insourcing subunit must be given together".to_owned(),
                ))
            }
        }
        for s in &self.sources {
            match before.titles.get(s) {
                Some(t) if t.using_subunit == self.outsourcing_subunit => {}
                _ => {
                    return Err(TransformError::ScopeMismatch(format!(
                        "source {s} is not used by {}",
                        self.outsourcing_subunit
                    )))
                }
            }
        }
        Ok(())
    }
}
