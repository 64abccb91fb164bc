//! The taxonomy of sourcing transformations and the full report.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::delta::diff;
use crate::ids::{SubunitId, UnitId};
use crate::model::SourcingEquilibrium;
use crate::valuation::WeightTable;

use super::analysis::{
    check_postcondition, check_precondition, invariant_portfolio_check, partition_sources,
    qualify_dimensions, reversibility, PortfolioVerdict, PostcondConfig, PostconditionVerdict,
    PreconditionVerdict, QualificationReport, Reversibility, SourcePartition,
};
use super::{Progression, TransformError, TransformationScope};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Classification {
    UnitToUnitOutsourcing,
    GreenfieldOutsourcing,
    FullIncorporation,
    Backsourcing,
    ReverseInsourcing,
    TrivialProlongation,
    FollowUpThirdParty,
    MultipleFollowUp,
    HeterogeneousMultipleFollowUp,
    SourceServiceReconstruction,
    UnknownTransformation,
}

impl Classification {
    pub const ALL: [Classification; 11] = [
        Classification::UnitToUnitOutsourcing,
        Classification::GreenfieldOutsourcing,
        Classification::FullIncorporation,
        Classification::Backsourcing,
        Classification::ReverseInsourcing,
        Classification::TrivialProlongation,
        Classification::FollowUpThirdParty,
        Classification::MultipleFollowUp,
        Classification::HeterogeneousMultipleFollowUp,
        Classification::SourceServiceReconstruction,
        Classification::UnknownTransformation,
    ];

    /// Outsourcing for the outsourcer, and therefore insourcing for the
    /// insourcer.
    pub fn is_outsourcing(self) -> bool {
        matches!(
            self,
            Classification::UnitToUnitOutsourcing | Classification::GreenfieldOutsourcing
        )
    }
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformationReport {
    pub scope: TransformationScope,
    pub precondition: PreconditionVerdict,
    pub postcondition: PostconditionVerdict,
    pub partition: SourcePartition,
    /// Present when the scope names an insourcer.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub portfolio: Option<PortfolioVerdict>,
    pub classification: Classification,
    /// The unit for which the same transformation is an insourcing.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub insourcing_for: Option<UnitId>,
    pub reversibility: Reversibility,
    pub dimensions: QualificationReport,
}

/// Checks, partitions, classifies and qualifies a progression that took
/// `before` to `after`. `history` holds earlier reports, oldest first.
pub fn analyze(
    before: &SourcingEquilibrium,
    prog: &Progression,
    after: &SourcingEquilibrium,
    history: &[TransformationReport],
    table: &WeightTable,
    config: &PostcondConfig,
) -> Result<TransformationReport, TransformError> {
    let scope = &prog.scope;
    let table = table
        .clone()
        .with_defaults_for(before)
        .with_defaults_for(after);
    let precondition = check_precondition(before, scope);
    let postcondition = check_postcondition(before, after, scope, &table, config)?;
    let partition = partition_sources(before, after, scope);
    let portfolio = scope
        .insourcer
        .is_some()
        .then(|| invariant_portfolio_check(before, after, scope));
    let classification = classify_with(before, prog, after, history, &precondition, &postcondition);
    Ok(TransformationReport {
        scope: scope.clone(),
        precondition,
        postcondition,
        partition,
        portfolio,
        classification,
        insourcing_for: if classification.is_outsourcing() {
            scope.insourcer.clone()
        } else {
            None
        },
        reversibility: reversibility(before, after, scope),
        dimensions: qualify_dimensions(before, after, scope, &table)?,
    })
}

/// Taxonomy label only; a scope that does not fit `before` yields
/// `UnknownTransformation`.
pub fn classify(
    before: &SourcingEquilibrium,
    prog: &Progression,
    after: &SourcingEquilibrium,
    history: &[TransformationReport],
    table: &WeightTable,
    config: &PostcondConfig,
) -> Classification {
    analyze(before, prog, after, history, table, config)
        .map(|r| r.classification)
        .unwrap_or(Classification::UnknownTransformation)
}

fn classify_with(
    before: &SourcingEquilibrium,
    prog: &Progression,
    after: &SourcingEquilibrium,
    history: &[TransformationReport],
    pre: &PreconditionVerdict,
    post: &PostconditionVerdict,
) -> Classification {
    let scope = &prog.scope;
    let delta = diff(before, after);
    if delta.is_structurally_empty() {
        return Classification::UnknownTransformation;
    }
    let only_extensions = {
        let mut rest = delta.clone();
        rest.contracts.changed.clear();
        rest.logical_time = None;
        rest.is_empty()
            && delta.contracts.changed.values().all(|(old, new)| {
                let mut same = new.clone();
                same.expiry = old.expiry;
                same == *old && extends(old.expiry, new.expiry)
            })
    };
    if only_extensions {
        return Classification::TrivialProlongation;
    }
    if before.units.contains_key(&scope.outsourcer) && !after.units.contains_key(&scope.outsourcer)
    {
        return Classification::FullIncorporation;
    }
    for h in history.iter().rev() {
        let moves = history_moves(before, prog, after, h);
        if !moves.is_empty() {
            return label_moves(&moves);
        }
    }
    if pre.passed && post.weight_decrease.passed && post.insourcer_growth.passed {
        let created_units = prog.created_units();
        let created_subunits = prog.created_subunits();
        let greenfield = scope
            .insourcer
            .as_ref()
            .is_some_and(|x| created_units.contains(x))
            || scope
                .insourcing_subunit
                .as_ref()
                .is_some_and(|y| created_subunits.contains(y));
        return if greenfield {
            Classification::GreenfieldOutsourcing
        } else {
            Classification::UnitToUnitOutsourcing
        };
    }
    Classification::UnknownTransformation
}

fn extends(old: Option<u64>, new: Option<u64>) -> bool {
    match (old, new) {
        (Some(a), Some(b)) => b > a,
        (Some(_), None) => true,
        _ => false,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
enum Move {
    /// Back to the original outsourcing subunit.
    Back,
    /// To the original outsourcer, but another subunit.
    Reconstruct,
    /// To a unit created to stand in for a vanished outsourcer.
    NewUnit,
    /// To a unit other than the original parties.
    Third(UnitId),
}

/// Where the sources and services a past report moved away from its
/// outsourcer went during this progression.
fn history_moves(
    before: &SourcingEquilibrium,
    prog: &Progression,
    after: &SourcingEquilibrium,
    h: &TransformationReport,
) -> BTreeSet<Move> {
    let a0 = &h.scope.outsourcer;
    let b0 = &h.scope.outsourcing_subunit;
    let x0 = h.scope.insourcer.as_ref();
    let created = prog.created_units();
    let categorize = |sub: &SubunitId| -> Option<Move> {
        let unit = after.unit_of(sub)?;
        if unit == a0 {
            Some(if sub == b0 {
                Move::Back
            } else {
                Move::Reconstruct
            })
        } else if !before.units.contains_key(a0) && created.contains(unit) {
            Some(Move::NewUnit)
        } else if Some(unit) == x0 {
            None
        } else {
            Some(Move::Third(unit.clone()))
        }
    };

    let mut moves = BTreeSet::new();
    for s in &h.partition.properly_outsourced {
        if let (Some(t0), Some(t1)) = (before.titles.get(s), after.titles.get(s)) {
            if t0.using_subunit != t1.using_subunit {
                moves.extend(categorize(&t1.using_subunit));
            }
        }
    }
    for s in &h.partition.unsourced {
        if let (None, Some(t1)) = (before.titles.get(s), after.titles.get(s)) {
            moves.extend(categorize(&t1.using_subunit));
        }
    }
    if let Some(p) = &h.portfolio {
        for (k, e0) in &before.service_edges {
            if !p.transferred.contains(&k.0) {
                continue;
            }
            if let Some(e1) = after.service_edges.get(k) {
                if e1.provider != e0.provider {
                    moves.extend(categorize(&e1.provider));
                }
            }
        }
    }
    moves
}

fn label_moves(moves: &BTreeSet<Move>) -> Classification {
    let thirds: BTreeSet<&UnitId> = moves
        .iter()
        .filter_map(|m| match m {
            Move::Third(u) => Some(u),
            _ => None,
        })
        .collect();
    let kinds = moves
        .iter()
        .filter(|m| !matches!(m, Move::Third(_)))
        .count()
        + usize::from(!thirds.is_empty());
    if kinds > 1 {
        return Classification::HeterogeneousMultipleFollowUp;
    }
    match moves.iter().next() {
        Some(Move::Back) => Classification::Backsourcing,
        Some(Move::Reconstruct) => Classification::SourceServiceReconstruction,
        Some(Move::NewUnit) => Classification::ReverseInsourcing,
        Some(Move::Third(_)) if thirds.len() == 1 => Classification::FollowUpThirdParty,
        Some(Move::Third(_)) => Classification::MultipleFollowUp,
        None => Classification::UnknownTransformation,
    }
}
