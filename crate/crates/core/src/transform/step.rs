//! Atomic steps over equilibria and their left fold into progressions.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::ids::{ContractId, ServiceId, SourceId, SubunitId, UnitId};
use crate::model::{
    Consumer, Contract, ContractKind, MoneyEdge, Source, SourcingEquilibrium, TitleRecord, Unit,
};
use crate::scale::{Polarity, Role};

use super::{TransformError, TransformationScope};

/// A subunit named together with the unit it belongs to.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SubunitRef {
    pub unit: UnitId,
    pub subunit: SubunitId,
}

impl SubunitRef {
    pub fn new(unit: impl Into<UnitId>, subunit: impl Into<SubunitId>) -> Self {
        Self {
            unit: unit.into(),
            subunit: subunit.into(),
        }
    }
}

/// Explicit role bindings for a title; unset roles are derived.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bindings {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub holder: Option<UnitId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub counterparty: Option<UnitId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub third_party: Option<UnitId>,
}

impl Bindings {
    pub fn is_empty(&self) -> bool {
        self.holder.is_none() && self.counterparty.is_none() && self.third_party.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "step", rename_all = "kebab-case")]
pub enum Step {
    /// Move the title to `to` at `level`. The receiving unit takes the side
    /// the level's polarity puts the user on; roles the new level does not
    /// mention are cleared unless bound explicitly.
    TransferTitle {
        source: SourceId,
        to: SubunitRef,
        level: u32,
        #[serde(default)]
        bindings: Bindings,
    },
    /// Change level and bindings in place, keeping the using subunit.
    ChangeTitleLevel {
        source: SourceId,
        level: u32,
        #[serde(default)]
        bindings: Bindings,
    },
    AbandonTitle {
        source: SourceId,
    },
    /// Title a new source, or an existing untitled one, for use in `into`.
    AcquireSource {
        source: Source,
        level: u32,
        #[serde(default)]
        bindings: Bindings,
        into: SubunitRef,
    },
    /// Make `to` the provider of every edge of `service`.
    MoveService {
        service: ServiceId,
        to: SubunitRef,
    },
    CreateUnit {
        unit: UnitId,
    },
    CreateSubunit {
        subunit: SubunitId,
        unit: UnitId,
    },
    DissolveSubunit {
        target: SubunitRef,
    },
    DissolveUnit {
        unit: UnitId,
    },
    /// Sign a contract; signing an existing id with the same kind and parties
    /// renews it.
    SignContract {
        contract: Contract,
    },
    TerminateContract {
        contract: ContractId,
    },
    /// Net money flow per period from `payer` to `payee`.
    FinancialTransfer {
        payer: UnitId,
        payee: UnitId,
        amount: f64,
    },
}

impl Step {
    /// Steps whose effect can be undone by another step.
    pub fn is_invertible(&self) -> bool {
        matches!(
            self,
            Step::TransferTitle { .. }
                | Step::ChangeTitleLevel { .. }
                | Step::MoveService { .. }
                | Step::SignContract { .. }
                | Step::FinancialTransfer { .. }
        )
    }

    /// Sources the step names.
    pub fn sources(&self) -> BTreeSet<&SourceId> {
        match self {
            Step::TransferTitle { source, .. }
            | Step::ChangeTitleLevel { source, .. }
            | Step::AbandonTitle { source } => BTreeSet::from([source]),
            Step::AcquireSource { source, .. } => BTreeSet::from([&source.id]),
            _ => BTreeSet::new(),
        }
    }

    /// Every entity id the step names, tagged by kind, units excluded.
    pub fn touched_entities(&self) -> BTreeSet<(char, String)> {
        let mut out = BTreeSet::new();
        let mut sub = |r: &SubunitRef| {
            out.insert(('b', r.subunit.to_string()));
        };
        match self {
            Step::TransferTitle { to, .. } => sub(to),
            Step::AcquireSource { into, .. } => sub(into),
            Step::MoveService { to, .. } => sub(to),
            Step::DissolveSubunit { target } => sub(target),
            _ => {}
        }
        for s in self.sources() {
            out.insert(('s', s.to_string()));
        }
        match self {
            Step::MoveService { service, .. } => {
                out.insert(('v', service.to_string()));
            }
            Step::CreateSubunit { subunit, .. } => {
                out.insert(('b', subunit.to_string()));
            }
            Step::SignContract { contract } => {
                out.insert(('k', contract.id.to_string()));
            }
            Step::TerminateContract { contract } => {
                out.insert(('k', contract.to_string()));
            }
            _ => {}
        }
        out
    }
}

fn fail(step: &Step, reason: impl Into<String>) -> TransformError {
    TransformError::StepPreconditionFailed {
        step: step.to_string(),
        reason: reason.into(),
    }
}

fn check_subunit_ref(eq: &SourcingEquilibrium, r: &SubunitRef) -> Result<(), String> {
    match eq.subunits.get(&r.subunit) {
        None => Err(format!("subunit {} does not exist", r.subunit)),
        Some(s) if s.unit != r.unit => Err(format!(
            "subunit {} belongs to {}, not {}",
            r.subunit, s.unit, r.unit
        )),
        Some(_) => Ok(()),
    }
}

fn title_checked(eq: &SourcingEquilibrium, title: &TitleRecord) -> Result<(), String> {
    match eq.title_problems(title).into_iter().next() {
        Some((_, msg)) => Err(msg),
        None => Ok(()),
    }
}

/// Applies one step, returning a new snapshot with the logical time advanced.
/// The input is never modified. Fails with `StepPreconditionFailed` when the
/// step names missing entities or would leave the snapshot ill formed.
pub fn apply_step(
    eq: &SourcingEquilibrium,
    step: &Step,
) -> Result<SourcingEquilibrium, TransformError> {
    let mut next = eq.clone();
    apply_in_place(&mut next, step).map_err(|reason| fail(step, reason))?;
    next.logical_time += 1;
    Ok(next)
}

/// In-place variant of `apply_step` for callers that own the snapshot and
/// discard it on failure.
pub(crate) fn apply_step_mut(
    eq: &mut SourcingEquilibrium,
    step: &Step,
) -> Result<(), TransformError> {
    apply_in_place(eq, step).map_err(|reason| fail(step, reason))?;
    eq.logical_time += 1;
    Ok(())
}

fn apply_in_place(eq: &mut SourcingEquilibrium, step: &Step) -> Result<(), String> {
    match step {
        Step::TransferTitle {
            source,
            to,
            level,
            bindings,
        } => {
            check_subunit_ref(eq, to)?;
            let current = eq
                .titles
                .get(source)
                .ok_or_else(|| format!("source {source} has no title"))?
                .clone();
            let scale = eq.scale_for_source(source).map_err(|e| e.to_string())?;
            let template = scale
                .level(*level)
                .ok_or_else(|| format!("level {level} out of range 1..{}", scale.len()))?;
            let receiver = &to.unit;
            let (outsourcer, insourcer) = match scale.polarity_of_rank(*level) {
                Polarity::Positive => {
                    let holder = bindings.holder.clone().unwrap_or_else(|| receiver.clone());
                    let insourcer = match &bindings.counterparty {
                        Some(u) => Some(u.clone()),
                        None if template.mentions(Role::Insourcer) => Some(
                            current
                                .insourcer_side
                                .clone()
                                .filter(|u| u != &holder)
                                .ok_or_else(|| {
                                    format!("level {level} needs an insourcer-side unit and {source} has none")
                                })?,
                        ),
                        None => None,
                    };
                    (holder, insourcer)
                }
                Polarity::Negative => (
                    bindings
                        .holder
                        .clone()
                        .unwrap_or_else(|| current.outsourcer_side.clone()),
                    Some(
                        bindings
                            .counterparty
                            .clone()
                            .unwrap_or_else(|| receiver.clone()),
                    ),
                ),
            };
            let third_party = match &bindings.third_party {
                Some(u) => Some(u.clone()),
                None if template.mentions(Role::ThirdParty) => {
                    Some(current.third_party.clone().ok_or_else(|| {
                        format!("level {level} needs a third-party unit and {source} has none")
                    })?)
                }
                None => None,
            };
            let title = TitleRecord {
                source: source.clone(),
                level: *level,
                outsourcer_side: outsourcer,
                insourcer_side: insourcer,
                third_party,
                using_subunit: to.subunit.clone(),
            };
            title_checked(eq, &title)?;
            eq.titles.insert(source.clone(), title);
        }
        Step::ChangeTitleLevel {
            source,
            level,
            bindings,
        } => {
            let current = eq
                .titles
                .get(source)
                .ok_or_else(|| format!("source {source} has no title"))?
                .clone();
            let scale = eq.scale_for_source(source).map_err(|e| e.to_string())?;
            let template = scale
                .level(*level)
                .ok_or_else(|| format!("level {level} out of range 1..{}", scale.len()))?;
            let outsourcer = bindings
                .holder
                .clone()
                .unwrap_or_else(|| current.outsourcer_side.clone());
            let insourcer = match &bindings.counterparty {
                Some(u) => Some(u.clone()),
                None if template.mentions(Role::Insourcer) => {
                    current.insourcer_side.clone().filter(|u| u != &outsourcer)
                }
                None => None,
            };
            let third_party = match &bindings.third_party {
                Some(u) => Some(u.clone()),
                None if template.mentions(Role::ThirdParty) => current.third_party.clone(),
                None => None,
            };
            let title = TitleRecord {
                source: source.clone(),
                level: *level,
                outsourcer_side: outsourcer,
                insourcer_side: insourcer,
                third_party,
                using_subunit: current.using_subunit.clone(),
            };
            title_checked(eq, &title)?;
            eq.titles.insert(source.clone(), title);
        }
        Step::AbandonTitle { source } => {
            if eq.titles.remove(source).is_none() {
                return Err(format!("source {source} has no title"));
            }
        }
        Step::AcquireSource {
            source,
            level,
            bindings,
            into,
        } => {
            check_subunit_ref(eq, into)?;
            if eq.titles.contains_key(&source.id) {
                return Err(format!("source {} is already titled", source.id));
            }
            let previous = eq.sources.remove(&source.id);
            if let Some((_, msg)) = eq.source_problems(source).into_iter().next() {
                if let Some(p) = previous {
                    eq.sources.insert(p.id.clone(), p);
                }
                return Err(msg);
            }
            eq.sources.insert(source.id.clone(), source.clone());
            let scale = eq.scale_of(&source.kind).ok_or("unknown scale")?;
            if !scale.contains_level(*level) {
                return Err(format!("level {level} out of range 1..{}", scale.len()));
            }
            let positive = scale.polarity_of_rank(*level) == Polarity::Positive;
            let outsourcer = match (&bindings.holder, positive) {
                (Some(u), _) => u.clone(),
                (None, true) => into.unit.clone(),
                (None, false) => {
                    return Err(format!(
                        "level {level} is on the insourcer side; name the holder of {}",
                        source.id
                    ))
                }
            };
            let insourcer = match (&bindings.counterparty, positive) {
                (Some(u), _) => Some(u.clone()),
                (None, false) => Some(into.unit.clone()),
                (None, true) => None,
            };
            let title = TitleRecord {
                source: source.id.clone(),
                level: *level,
                outsourcer_side: outsourcer,
                insourcer_side: insourcer,
                third_party: bindings.third_party.clone(),
                using_subunit: into.subunit.clone(),
            };
            title_checked(eq, &title)?;
            eq.titles.insert(source.id.clone(), title);
        }
        Step::MoveService { service, to } => {
            check_subunit_ref(eq, to)?;
            let mut found = false;
            for edge in eq.service_edges.values_mut() {
                if &edge.service == service {
                    edge.provider = to.subunit.clone();
                    found = true;
                }
            }
            if !found {
                return Err(format!("service {service} does not exist"));
            }
        }
        Step::CreateUnit { unit } => {
            eq.insert_unit(Unit::new(unit.clone()))
                .map_err(|e| e.to_string())?;
        }
        Step::CreateSubunit { subunit, unit } => {
            eq.insert_subunit(unit, subunit.clone(), "")
                .map_err(|e| e.to_string())?;
        }
        Step::DissolveSubunit { target } => {
            check_subunit_ref(eq, target)?;
            dissolve_subunit(eq, &target.subunit);
            prune_contract_coverage(eq);
        }
        Step::DissolveUnit { unit } => {
            let Some(u) = eq.units.get(unit) else {
                return Err(format!("unit {unit} does not exist"));
            };
            let own: BTreeSet<SubunitId> = u.subunits.clone();
            let entangled: Vec<&SourceId> = eq
                .titles
                .values()
                .filter(|t| !own.contains(&t.using_subunit) && t.units().any(|x| x == unit))
                .map(|t| &t.source)
                .collect();
            if !entangled.is_empty() {
                let names: Vec<String> = entangled.iter().map(|s| s.to_string()).collect();
                return Err(format!(
                    "unit {unit} still holds titles on sources used elsewhere: {}",
                    names.join(", ")
                ));
            }
            for sub in &own {
                dissolve_subunit(eq, sub);
            }
            eq.units.remove(unit);
            eq.service_edges
                .retain(|_, e| e.consumer != Consumer::Unit(unit.clone()));
            eq.money_edges
                .retain(|_, m| &m.payer != unit && &m.payee != unit);
            eq.contracts
                .retain(|_, c| &c.parties.0 != unit && &c.parties.1 != unit);
            for source in eq.sources.values_mut() {
                if source.identity_critical_for.as_ref() == Some(unit) {
                    source.identity_critical_for = None;
                }
            }
            prune_contract_coverage(eq);
        }
        Step::SignContract { contract } => {
            if let Some(existing) = eq.contracts.get(&contract.id) {
                if existing.kind != contract.kind || existing.parties != contract.parties {
                    return Err(format!(
                        "contract {} exists with another kind or other parties",
                        contract.id
                    ));
                }
            }
            if let Some((_, msg)) = eq.contract_problems(contract).into_iter().next() {
                return Err(msg);
            }
            eq.contracts.insert(contract.id.clone(), contract.clone());
        }
        Step::TerminateContract { contract } => {
            if eq.contracts.remove(contract).is_none() {
                return Err(format!("contract {contract} does not exist"));
            }
        }
        Step::FinancialTransfer {
            payer,
            payee,
            amount,
        } => {
            if !(amount.is_finite() && *amount > 0.0) {
                return Err(format!("transfer amount {amount} must be positive"));
            }
            if payer == payee {
                return Err("payer and payee are the same unit".to_owned());
            }
            for u in [payer, payee] {
                if !eq.units.contains_key(u) {
                    return Err(format!("unit {u} does not exist"));
                }
            }
            net_transfer(eq, payer, payee, *amount);
        }
    }
    Ok(())
}

/// Adds `amount` to the net flow from `payer` to `payee`, first cancelling
/// any flow in the opposite direction.
fn net_transfer(eq: &mut SourcingEquilibrium, payer: &UnitId, payee: &UnitId, amount: f64) {
    let reverse_key = (payee.clone(), payer.clone());
    let mut remaining = amount;
    if let Some(rev) = eq.money_edges.get_mut(&reverse_key) {
        if rev.amount > remaining {
            rev.amount -= remaining;
            return;
        }
        remaining -= rev.amount;
        eq.money_edges.remove(&reverse_key);
    }
    if remaining > 0.0 {
        eq.money_edges
            .entry((payer.clone(), payee.clone()))
            .or_insert_with(|| MoneyEdge {
                payer: payer.clone(),
                payee: payee.clone(),
                amount: 0.0,
            })
            .amount += remaining;
    }
}

/// Removes a subunit together with the titles it uses and the service edges
/// it provides or consumes.
fn dissolve_subunit(eq: &mut SourcingEquilibrium, subunit: &SubunitId) {
    eq.titles.retain(|_, t| &t.using_subunit != subunit);
    eq.service_edges
        .retain(|_, e| &e.provider != subunit && e.consumer != Consumer::Subunit(subunit.clone()));
    if let Some(sub) = eq.subunits.remove(subunit) {
        if let Some(u) = eq.units.get_mut(&sub.unit) {
            u.subunits.remove(subunit);
        }
    }
}

/// Drops coverage of services that no longer exist; provision contracts left
/// covering nothing are removed.
fn prune_contract_coverage(eq: &mut SourcingEquilibrium) {
    let live: BTreeSet<ServiceId> = eq.service_ids().into_iter().cloned().collect();
    for c in eq.contracts.values_mut() {
        c.covered_services.retain(|s| live.contains(s));
    }
    eq.contracts.retain(|_, c| {
        !(c.kind == ContractKind::TargetServiceProvision && c.covered_services.is_empty())
    });
}

/// A linear sequence of steps together with the roles it is declared for.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Progression {
    pub steps: Vec<Step>,
    pub scope: TransformationScope,
}

impl Progression {
    pub fn new(steps: Vec<Step>, scope: TransformationScope) -> Result<Self, TransformError> {
        if steps.is_empty() {
            return Err(TransformError::EmptyProgression);
        }
        Ok(Self { steps, scope })
    }

    /// Units created by the progression.
    pub fn created_units(&self) -> BTreeSet<&UnitId> {
        self.steps
            .iter()
            .filter_map(|s| match s {
                Step::CreateUnit { unit } => Some(unit),
                _ => None,
            })
            .collect()
    }

    pub fn created_subunits(&self) -> BTreeSet<&SubunitId> {
        self.steps
            .iter()
            .filter_map(|s| match s {
                Step::CreateSubunit { subunit, .. } => Some(subunit),
                _ => None,
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    /// 1-based position of the step in the progression.
    pub position: usize,
    pub logical_time: u64,
    pub step: String,
}

/// Where a progression stopped.
#[derive(Debug, Clone, PartialEq)]
pub struct ProgressionFailure {
    pub position: usize,
    pub error: TransformError,
    pub trace: Vec<TraceEntry>,
    /// Snapshot after the last successful step.
    pub last: SourcingEquilibrium,
}

/// Left fold of `apply_step`; stops at the first failing step.
pub fn apply_progression(
    eq: &SourcingEquilibrium,
    prog: &Progression,
) -> Result<(SourcingEquilibrium, Vec<TraceEntry>), Box<ProgressionFailure>> {
    apply_steps(eq, &prog.steps)
}

pub fn apply_steps(
    eq: &SourcingEquilibrium,
    steps: &[Step],
) -> Result<(SourcingEquilibrium, Vec<TraceEntry>), Box<ProgressionFailure>> {
    let mut current = eq.clone();
    let mut trace = Vec::with_capacity(steps.len());
    for (i, step) in steps.iter().enumerate() {
        match apply_step(&current, step) {
            Ok(next) => {
                current = next;
                trace.push(TraceEntry {
                    position: i + 1,
                    logical_time: current.logical_time,
                    step: step.to_string(),
                });
            }
            Err(error) => {
                return Err(Box::new(ProgressionFailure {
                    position: i + 1,
                    error,
                    trace,
                    last: current,
                }))
            }
        }
    }
    Ok((current, trace))
}
