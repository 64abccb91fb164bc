//! Checks and summaries comparing the states before and after a progression.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::ids::{ContractId, ServiceId, SourceId, SubunitId, UnitId};
use crate::model::{Consumer, ContractKind, SourcingEquilibrium};
use crate::valuation::{
    internal_sources, portfolio_weight, sustainable_advantage, WeightMode, WeightTable,
};

use super::{TransformError, TransformationScope};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreconditionVerdict {
    pub passed: bool,
    /// Scope sources the outsourcer's identity depends on.
    pub violating: Vec<SourceId>,
}

/// Passes iff no scope source is identity-critical for the outsourcer.
pub fn check_precondition(
    eq: &SourcingEquilibrium,
    scope: &TransformationScope,
) -> PreconditionVerdict {
    let violating: Vec<SourceId> = scope
        .sources
        .iter()
        .filter(|id| {
            eq.sources
                .get(*id)
                .and_then(|s| s.identity_critical_for.as_ref())
                == Some(&scope.outsourcer)
        })
        .cloned()
        .collect();
    PreconditionVerdict {
        passed: violating.is_empty(),
        violating,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PostcondConfig {
    /// Required fractional decrease of the outsourcer's scope weight.
    pub theta: f64,
    /// Compare the insourcer's weight with its own weight before (true) or
    /// with the outsourcer's original scope weight (false).
    pub growth_reading: bool,
}

impl Default for PostcondConfig {
    fn default() -> Self {
        Self {
            theta: 0.25,
            growth_reading: true,
        }
    }
}

impl PostcondConfig {
    pub fn new(theta: f64, growth_reading: bool) -> Result<Self, String> {
        if !(theta > 0.0 && theta < 1.0) {
            return Err(format!("theta {theta} outside (0, 1)"));
        }
        Ok(Self {
            theta,
            growth_reading,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightClause {
    pub passed: bool,
    pub before: f64,
    pub after: f64,
    /// `(1 - theta) * before`.
    pub bound: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FinancialDelta {
    pub outsourcer_before: f64,
    pub outsourcer_after: f64,
    pub insourcer_before: f64,
    pub insourcer_after: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthClause {
    pub passed: bool,
    pub growth_reading: bool,
    pub baseline: f64,
    pub after: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PostconditionVerdict {
    pub weight_decrease: WeightClause,
    /// Reported only; never decides the verdict.
    pub financial: FinancialDelta,
    pub insourcer_growth: GrowthClause,
    /// Share of the outsourcer's total absolute weight held through `B`
    /// before the transformation; `None` when the outsourcer holds nothing.
    pub subunit_share: Option<f64>,
}

impl PostconditionVerdict {
    pub fn passed(&self) -> bool {
        self.weight_decrease.passed && self.insourcer_growth.passed
    }
}

fn scope_mismatch_before(
    before: &SourcingEquilibrium,
    scope: &TransformationScope,
) -> Result<(), TransformError> {
    if !before.units.contains_key(&scope.outsourcer) {
        return Err(TransformError::ScopeMismatch(format!(
            "{} missing before",
            scope.outsourcer
        )));
    }
    if !before.subunits.contains_key(&scope.outsourcing_subunit) {
        return Err(TransformError::ScopeMismatch(format!(
            "{} missing before",
            scope.outsourcing_subunit
        )));
    }
    if let Some(s) = scope
        .sources
        .iter()
        .find(|s| !before.sources.contains_key(*s))
    {
        return Err(TransformError::ScopeMismatch(format!(
            "source {s} missing before"
        )));
    }
    Ok(())
}

pub fn check_postcondition(
    before: &SourcingEquilibrium,
    after: &SourcingEquilibrium,
    scope: &TransformationScope,
    table: &WeightTable,
    config: &PostcondConfig,
) -> Result<PostconditionVerdict, TransformError> {
    scope_mismatch_before(before, scope)?;
    let a = &scope.outsourcer;
    let w_before = portfolio_weight(a, &scope.sources, before, table, WeightMode::NonFinancial)?;
    let w_after = portfolio_weight(a, &scope.sources, after, table, WeightMode::NonFinancial)?;
    let bound = (1.0 - config.theta) * w_before;
    let weight_decrease = WeightClause {
        passed: w_after <= bound && w_after < w_before,
        before: w_before,
        after: w_after,
        bound,
    };

    let financial_of =
        |unit: Option<&UnitId>, eq: &SourcingEquilibrium| -> Result<f64, TransformError> {
            match unit {
                None => Ok(0.0),
                Some(u) => {
                    let ids: Vec<&SourceId> = eq.titles.keys().collect();
                    Ok(portfolio_weight(
                        u,
                        ids,
                        eq,
                        table,
                        WeightMode::FinancialOnly,
                    )?)
                }
            }
        };
    let x = scope.insourcer.as_ref();
    let financial = FinancialDelta {
        outsourcer_before: financial_of(Some(a), before)?,
        outsourcer_after: financial_of(Some(a), after)?,
        insourcer_before: financial_of(x, before)?,
        insourcer_after: financial_of(x, after)?,
    };

    let partition = partition_sources(before, after, scope);
    let widened: BTreeSet<&SourceId> = scope
        .sources
        .iter()
        .chain(partition.acquired.iter())
        .collect();
    let insourcer_growth = match x {
        None => GrowthClause {
            passed: false,
            growth_reading: config.growth_reading,
            baseline: 0.0,
            after: 0.0,
        },
        Some(x) => {
            let x_after = portfolio_weight(
                x,
                widened.iter().copied(),
                after,
                table,
                WeightMode::NonFinancial,
            )?;
            let baseline = if config.growth_reading {
                portfolio_weight(
                    x,
                    widened.iter().copied(),
                    before,
                    table,
                    WeightMode::NonFinancial,
                )?
            } else {
                w_before
            };
            GrowthClause {
                passed: x_after > baseline,
                growth_reading: config.growth_reading,
                baseline,
                after: x_after,
            }
        }
    };

    let mut held_by_b = 0.0;
    let mut held = 0.0;
    for t in before.titles.values().filter(|t| t.is_party(a)) {
        let w = table
            .signed_weight(
                a,
                t,
                before
                    .scale_for_source(&t.source)
                    .map_err(crate::valuation::ValuationError::from)?,
            )?
            .abs();
        held += w;
        if t.using_subunit == scope.outsourcing_subunit {
            held_by_b += w;
        }
    }
    Ok(PostconditionVerdict {
        weight_decrease,
        financial,
        insourcer_growth,
        subunit_share: (held > 0.0).then(|| held_by_b / held),
    })
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourcePartition {
    pub properly_outsourced: BTreeSet<SourceId>,
    pub unsourced: BTreeSet<SourceId>,
    pub acquired: BTreeSet<SourceId>,
    pub retained: BTreeSet<SourceId>,
}

impl SourcePartition {
    pub fn is_disjoint(&self) -> bool {
        let sets = [
            &self.properly_outsourced,
            &self.unsourced,
            &self.acquired,
            &self.retained,
        ];
        for (i, a) in sets.iter().enumerate() {
            for b in &sets[i + 1..] {
                if !a.is_disjoint(b) {
                    return false;
                }
            }
        }
        true
    }
}

/// Splits the scope sources by what happened to their titles, and collects
/// the sources newly titled for `B` or `Y`.
///
/// A scope source is properly outsourced when the insourcer is a party to its
/// title afterwards and the outsourcer's hold on it got strictly weaker
/// (worse rank, or no longer a party). It is unsourced when it lost its
/// title, or when neither outsourcer nor insourcer is a party any more.
pub fn partition_sources(
    before: &SourcingEquilibrium,
    after: &SourcingEquilibrium,
    scope: &TransformationScope,
) -> SourcePartition {
    let a = &scope.outsourcer;
    let x = scope.insourcer.as_ref();
    let mut p = SourcePartition::default();
    for id in &scope.sources {
        let Some(t_after) = after.titles.get(id) else {
            p.unsourced.insert(id.clone());
            continue;
        };
        let x_party = x.is_some_and(|x| t_after.is_party(x));
        let a_party = t_after.is_party(a);
        let weaker = match (before.rank_from(a, id), after.rank_from(a, id)) {
            (Ok(_), Err(_)) => true,
            (Ok(r0), Ok(r1)) => r1 > r0,
            _ => false,
        };
        if x_party && weaker {
            p.properly_outsourced.insert(id.clone());
        } else if !x_party && !a_party {
            p.unsourced.insert(id.clone());
        } else {
            p.retained.insert(id.clone());
        }
    }
    let users: BTreeSet<&SubunitId> = std::iter::once(&scope.outsourcing_subunit)
        .chain(scope.insourcing_subunit.iter())
        .collect();
    for (id, t) in &after.titles {
        if users.contains(&t.using_subunit)
            && !before.titles.contains_key(id)
            && !scope.sources.contains(id)
        {
            p.acquired.insert(id.clone());
        }
    }
    p
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Reversibility {
    Technically,
    Contractually,
    None,
}

/// `None` when the outsourcer or its subunit is gone, so there is nothing to
/// return sources to. Otherwise technically reversible, since abandoned
/// sources still exist and can be reacquired; contractually reversible when a
/// reversibility clause between outsourcer and insourcer covers every
/// transferred service.
pub fn reversibility(
    before: &SourcingEquilibrium,
    after: &SourcingEquilibrium,
    scope: &TransformationScope,
) -> Reversibility {
    if !after.units.contains_key(&scope.outsourcer)
        || after.unit_of(&scope.outsourcing_subunit) != Some(&scope.outsourcer)
    {
        return Reversibility::None;
    }
    if scope.sources.iter().any(|s| !after.sources.contains_key(s)) {
        return Reversibility::None;
    }
    let Some(x) = &scope.insourcer else {
        return Reversibility::Technically;
    };
    let transferred = invariant_portfolio_check(before, after, scope).transferred;
    let covered = after.contracts.values().any(|c| {
        c.kind == ContractKind::ReversibilityClause
            && c.between(&scope.outsourcer, x)
            && transferred.is_subset(&c.covered_services)
    });
    if covered {
        Reversibility::Contractually
    } else {
        Reversibility::Technically
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EdgeRef {
    pub service: ServiceId,
    pub consumer: Consumer,
}

impl From<&(ServiceId, Consumer)> for EdgeRef {
    fn from(k: &(ServiceId, Consumer)) -> Self {
        Self {
            service: k.0.clone(),
            consumer: k.1.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PortfolioVerdict {
    pub passed: bool,
    pub missing: Vec<EdgeRef>,
    pub extra: Vec<EdgeRef>,
    /// Services provided by `B` before and by `Y` after.
    pub transferred: BTreeSet<ServiceId>,
}

/// The services `B` and `Y` provide together, and to whom, must be the same
/// before and after.
pub fn invariant_portfolio_check(
    before: &SourcingEquilibrium,
    after: &SourcingEquilibrium,
    scope: &TransformationScope,
) -> PortfolioVerdict {
    let providers: BTreeSet<&SubunitId> = std::iter::once(&scope.outsourcing_subunit)
        .chain(scope.insourcing_subunit.iter())
        .collect();
    let provided = |eq: &SourcingEquilibrium| -> BTreeSet<EdgeRef> {
        eq.service_edges
            .iter()
            .filter(|(_, e)| providers.contains(&e.provider))
            .map(|(k, _)| EdgeRef::from(k))
            .collect()
    };
    let b0 = provided(before);
    let b1 = provided(after);
    let missing: Vec<EdgeRef> = b0.difference(&b1).cloned().collect();
    let extra: Vec<EdgeRef> = b1.difference(&b0).cloned().collect();
    let mut transferred = BTreeSet::new();
    if let Some(y) = &scope.insourcing_subunit {
        for (k, e) in &before.service_edges {
            if e.provider != scope.outsourcing_subunit {
                continue;
            }
            if after
                .service_edges
                .get(k)
                .is_some_and(|e1| &e1.provider == y)
            {
                transferred.insert(e.service.clone());
            }
        }
    }
    PortfolioVerdict {
        passed: missing.is_empty() && extra.is_empty(),
        missing,
        extra,
        transferred,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TitleShift {
    pub unit: UnitId,
    pub before: f64,
    pub after: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContractChanges {
    pub signed: Vec<ContractId>,
    pub terminated: Vec<ContractId>,
    pub amended: Vec<ContractId>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OperationalChanges {
    /// Edges whose provider changed.
    pub rerouted: Vec<EdgeRef>,
    pub added: Vec<EdgeRef>,
    pub removed: Vec<EdgeRef>,
    /// Edges whose volume changed with the provider unchanged.
    pub resized: Vec<EdgeRef>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdvantageShift {
    /// Fraction of the outsourcer's internal sources that carry all four
    /// advantage characteristics; `None` with no internal sources.
    pub before: Option<f64>,
    pub after: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualificationReport {
    pub title_shift: Vec<TitleShift>,
    pub contractual: ContractChanges,
    pub operational: OperationalChanges,
    pub competitive_advantage: AdvantageShift,
}

fn advantage_fraction(
    unit: &UnitId,
    eq: &SourcingEquilibrium,
    table: &WeightTable,
) -> Result<Option<f64>, TransformError> {
    if !eq.units.contains_key(unit) {
        return Ok(None);
    }
    let internal = internal_sources(unit, eq, table)?;
    if internal.is_empty() {
        return Ok(None);
    }
    let strong = internal
        .iter()
        .filter(|id| eq.sources.get(*id).is_some_and(sustainable_advantage))
        .count();
    Ok(Some(strong as f64 / internal.len() as f64))
}

/// Title shift over the scope and acquired sources for outsourcer and
/// insourcer, contract and service-edge changes, and the competitive
/// advantage fraction of the outsourcer.
pub fn qualify_dimensions(
    before: &SourcingEquilibrium,
    after: &SourcingEquilibrium,
    scope: &TransformationScope,
    table: &WeightTable,
) -> Result<QualificationReport, TransformError> {
    let partition = partition_sources(before, after, scope);
    let widened: BTreeSet<&SourceId> = scope
        .sources
        .iter()
        .chain(partition.acquired.iter())
        .collect();
    let mut title_shift = Vec::new();
    for unit in std::iter::once(&scope.outsourcer).chain(scope.insourcer.iter()) {
        let w0 = portfolio_weight(
            unit,
            widened.iter().copied(),
            before,
            table,
            WeightMode::All,
        )?;
        let w1 = portfolio_weight(unit, widened.iter().copied(), after, table, WeightMode::All)?;
        title_shift.push(TitleShift {
            unit: unit.clone(),
            before: w0,
            after: w1,
            delta: w1 - w0,
        });
    }

    let mut contractual = ContractChanges::default();
    for (id, c) in &before.contracts {
        match after.contracts.get(id) {
            None => contractual.terminated.push(id.clone()),
            Some(c1) if c1 != c => contractual.amended.push(id.clone()),
            Some(_) => {}
        }
    }
    contractual.signed = after
        .contracts
        .keys()
        .filter(|id| !before.contracts.contains_key(*id))
        .cloned()
        .collect();

    let mut operational = OperationalChanges::default();
    let edges0: &BTreeMap<_, _> = &before.service_edges;
    for (k, e0) in edges0 {
        match after.service_edges.get(k) {
            None => operational.removed.push(k.into()),
            Some(e1) if e1.provider != e0.provider => operational.rerouted.push(k.into()),
            Some(e1) if e1.volume != e0.volume => operational.resized.push(k.into()),
            Some(_) => {}
        }
    }
    operational.added = after
        .service_edges
        .keys()
        .filter(|k| !edges0.contains_key(*k))
        .map(EdgeRef::from)
        .collect();

    let competitive_advantage = AdvantageShift {
        before: advantage_fraction(&scope.outsourcer, before, table)?,
        after: advantage_fraction(&scope.outsourcer, after, table)?,
    };
    Ok(QualificationReport {
        title_shift,
        contractual,
        operational,
        competitive_advantage,
    })
}
