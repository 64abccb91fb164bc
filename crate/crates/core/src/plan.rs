//! Multi-threaded plans of guarded steps, interleaved one step per turn.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::canonical::to_canonical_json;
use crate::ids::{ContractId, ServiceId, SourceId, SubunitId, UnitId};
use crate::model::{EntityKind, SourcingEquilibrium};
use crate::transform::{apply_step, Progression, Step, TransformError, TransformationScope};

/// Largest plan the interleaving oracle will enumerate.
pub const ORACLE_MAX_STEPS: usize = 12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlanError {
    #[error("operation not allowed in status {0}")]
    InvalidStatus(Status),
    #[error("plan has {steps} steps; the oracle handles at most {ORACLE_MAX_STEPS}")]
    TooLarge { steps: usize },
    #[error("malformed plan: {0}")]
    Malformed(String),
}

/// Built-in guard forms.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "guard", rename_all = "kebab-case")]
pub enum Guard {
    Exists { kind: EntityKind, id: String },
    TitleAtLevel { source: SourceId, level: u32 },
    ContractPresent { contract: ContractId },
}

impl Guard {
    pub fn holds(&self, eq: &SourcingEquilibrium) -> bool {
        match self {
            Guard::Exists { kind, id } => match kind {
                EntityKind::Unit => eq.units.contains_key(id.as_str()),
                EntityKind::Subunit => eq.subunits.contains_key(id.as_str()),
                EntityKind::Source => eq.sources.contains_key(id.as_str()),
                EntityKind::Title => eq.titles.contains_key(id.as_str()),
                EntityKind::Service => eq.service_ids().contains(&ServiceId::new(id.as_str())),
                EntityKind::Contract => eq.contracts.contains_key(id.as_str()),
                EntityKind::Scale => eq.scale_of(&id.clone().into()).is_some(),
                EntityKind::Money => false,
            },
            Guard::TitleAtLevel { source, level } => {
                eq.titles.get(source).is_some_and(|t| t.level == *level)
            }
            Guard::ContractPresent { contract } => eq.contracts.contains_key(contract),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GuardedStep {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub guard: Option<Guard>,
    pub step: Step,
}

impl GuardedStep {
    pub fn new(step: Step) -> Self {
        Self { guard: None, step }
    }

    pub fn when(guard: Guard, step: Step) -> Self {
        Self {
            guard: Some(guard),
            step,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Thread {
    pub name: String,
    pub steps: Vec<GuardedStep>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Plan {
    pub id: String,
    /// File name of the equilibrium the plan is written against.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub equilibrium: Option<String>,
    pub scope: TransformationScope,
    pub threads: Vec<Thread>,
}

impl Plan {
    /// Thread names are unique and no thread is empty.
    pub fn check(&self) -> Result<(), PlanError> {
        let mut seen = BTreeSet::new();
        for t in &self.threads {
            if !seen.insert(t.name.as_str()) {
                return Err(PlanError::Malformed(format!("duplicate thread {}", t.name)));
            }
            if t.steps.is_empty() {
                return Err(PlanError::Malformed(format!(
                    "thread {} has no steps",
                    t.name
                )));
            }
        }
        Ok(())
    }

    pub fn total_steps(&self) -> usize {
        self.threads.iter().map(|t| t.steps.len()).sum()
    }

    /// All steps of all threads, thread after thread.
    pub fn concatenated(&self) -> Progression {
        Progression {
            steps: self
                .threads
                .iter()
                .flat_map(|t| t.steps.iter().map(|g| g.step.clone()))
                .collect(),
            scope: self.scope.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Ahead,
    InProgress,
    Interrupted,
    Dormant,
    Completed,
    Halted,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Status::Ahead => "ahead",
            Status::InProgress => "in-progress",
            Status::Interrupted => "interrupted",
            Status::Dormant => "dormant",
            Status::Completed => "completed",
            Status::Halted => "halted",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "seed", rename_all = "kebab-case")]
pub enum Strategy {
    RoundRobin,
    SeededRandom(u64),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "kebab-case")]
pub enum Outcome {
    Applied,
    Failed { reason: String },
}

/// One scheduling turn.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TurnRecord {
    pub turn: usize,
    pub thread: String,
    /// 1-based index of the step within its thread.
    pub index: usize,
    pub step: String,
    #[serde(flatten)]
    pub outcome: Outcome,
    pub logical_time: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "kebab-case")]
pub enum HaltReport {
    StepFailed {
        thread: String,
        index: usize,
        message: String,
    },
    Deadlock {
        waiting: Vec<(String, usize)>,
    },
    InvalidPlan {
        message: String,
    },
}

impl fmt::Display for HaltReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HaltReport::StepFailed {
                thread,
                index,
                message,
            } => {
                write!(f, "thread {thread} step {index} failed: {message}")
            }
            HaltReport::Deadlock { waiting } => {
                let w: Vec<String> = waiting.iter().map(|(t, i)| format!("{t}@{i}")).collect();
                write!(f, "deadlock: no guard holds for {}", w.join(", "))
            }
            HaltReport::InvalidPlan { message } => write!(f, "invalid plan: {message}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecutionState {
    pub status: Status,
    /// Steps done per thread, in plan order.
    pub cursors: Vec<usize>,
    pub trace: Vec<TurnRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub halt: Option<HaltReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    last_thread: Option<usize>,
}

impl ExecutionState {
    pub fn new(plan: &Plan) -> Self {
        Self {
            status: Status::Ahead,
            cursors: vec![0; plan.threads.len()],
            trace: Vec::new(),
            halt: None,
            last_thread: None,
        }
    }

    /// Pauses a running plan between turns.
    pub fn interrupt(&mut self) {
        if matches!(self.status, Status::InProgress | Status::Ahead) {
            self.status = Status::Interrupted;
        }
    }

    /// Puts a plan to sleep between turns.
    pub fn make_dormant(&mut self) {
        if !self.is_final() {
            self.status = Status::Dormant;
        }
    }

    pub fn is_final(&self) -> bool {
        matches!(self.status, Status::Completed | Status::Halted)
    }

    /// The steps applied so far, in execution order.
    pub fn executed_steps(&self, plan: &Plan) -> Vec<Step> {
        self.trace
            .iter()
            .filter(|r| r.outcome == Outcome::Applied)
            .filter_map(|r| {
                plan.threads
                    .iter()
                    .find(|t| t.name == r.thread)
                    .and_then(|t| t.steps.get(r.index - 1))
                    .map(|g| g.step.clone())
            })
            .collect()
    }
}

fn ready_threads(plan: &Plan, cursors: &[usize], eq: &SourcingEquilibrium) -> Vec<usize> {
    plan.threads
        .iter()
        .enumerate()
        .filter(|(i, t)| {
            t.steps
                .get(cursors[*i])
                .is_some_and(|g| g.guard.as_ref().is_none_or(|guard| guard.holds(eq)))
        })
        .map(|(i, _)| i)
        .collect()
}

fn exhausted(plan: &Plan, cursors: &[usize]) -> bool {
    plan.threads
        .iter()
        .zip(cursors)
        .all(|(t, c)| *c >= t.steps.len())
}

/// Seeded choice among `n` ready threads at turn `turn`; each turn draws from
/// its own stream so the choice depends only on seed and turn.
fn seeded_pick(seed: u64, turn: usize, n: usize) -> usize {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(turn as u64);
    rng.random_range(0..n)
}

/// Runs exactly one scheduling turn.
pub fn step_once(
    state: &ExecutionState,
    eq: &SourcingEquilibrium,
    plan: &Plan,
    strategy: Strategy,
) -> Result<(ExecutionState, SourcingEquilibrium), PlanError> {
    if state.is_final() {
        return Err(PlanError::InvalidStatus(state.status));
    }
    plan.check()?;
    if state.cursors.len() != plan.threads.len() {
        return Err(PlanError::Malformed(
            "state does not belong to this plan".to_owned(),
        ));
    }
    let mut next = state.clone();
    if exhausted(plan, &next.cursors) {
        next.status = Status::Completed;
        return Ok((next, eq.clone()));
    }
    let ready = ready_threads(plan, &next.cursors, eq);
    if ready.is_empty() {
        next.status = Status::Halted;
        next.halt = Some(HaltReport::Deadlock {
            waiting: plan
                .threads
                .iter()
                .zip(&next.cursors)
                .filter(|(t, c)| **c < t.steps.len())
                .map(|(t, c)| (t.name.clone(), c + 1))
                .collect(),
        });
        return Ok((next, eq.clone()));
    }
    let turn = next.trace.len() + 1;
    let chosen = match strategy {
        Strategy::RoundRobin => {
            let start = next.last_thread.map_or(0, |l| l + 1);
            let n = plan.threads.len();
            (0..n)
                .map(|k| (start + k) % n)
                .find(|i| ready.contains(i))
                .expect("ready is non-empty")
        }
        Strategy::SeededRandom(seed) => ready[seeded_pick(seed, turn, ready.len())],
    };
    let thread = &plan.threads[chosen];
    let index = next.cursors[chosen];
    let step = &thread.steps[index].step;
    next.last_thread = Some(chosen);
    match apply_step(eq, step) {
        Ok(eq2) => {
            next.cursors[chosen] += 1;
            next.trace.push(TurnRecord {
                turn,
                thread: thread.name.clone(),
                index: index + 1,
                step: step.to_string(),
                outcome: Outcome::Applied,
                logical_time: eq2.logical_time,
            });
            next.status = if exhausted(plan, &next.cursors) {
                Status::Completed
            } else {
                Status::InProgress
            };
            Ok((next, eq2))
        }
        Err(err) => {
            let message = match err {
                TransformError::StepPreconditionFailed { reason, .. } => reason,
                other => other.to_string(),
            };
            next.trace.push(TurnRecord {
                turn,
                thread: thread.name.clone(),
                index: index + 1,
                step: step.to_string(),
                outcome: Outcome::Failed {
                    reason: message.clone(),
                },
                logical_time: eq.logical_time,
            });
            next.status = Status::Halted;
            next.halt = Some(HaltReport::StepFailed {
                thread: thread.name.clone(),
                index: index + 1,
                message,
            });
            Ok((next, eq.clone()))
        }
    }
}

/// Runs the plan to completion or to a halt. The returned snapshot is the
/// last consistent one.
pub fn execute(
    eq: &SourcingEquilibrium,
    plan: &Plan,
    strategy: Strategy,
) -> (ExecutionState, SourcingEquilibrium) {
    let mut state = ExecutionState::new(plan);
    if let Err(e) = plan.check() {
        state.status = Status::Halted;
        state.halt = Some(HaltReport::InvalidPlan {
            message: e.to_string(),
        });
        return (state, eq.clone());
    }
    let mut current = eq.clone();
    while !state.is_final() {
        let (s, e) =
            step_once(&state, &current, plan, strategy).expect("plan checked and state not final");
        state = s;
        current = e;
    }
    (state, current)
}

/// Final snapshots, canonically serialized, over every interleaving that
/// respects thread order and guards.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct OracleResult {
    pub completed: BTreeSet<String>,
    pub halted: BTreeSet<String>,
}

impl OracleResult {
    pub fn all(&self) -> BTreeSet<&String> {
        self.completed.iter().chain(self.halted.iter()).collect()
    }

    pub fn contains(&self, eq: &SourcingEquilibrium) -> bool {
        let s = to_canonical_json(eq);
        self.completed.contains(&s) || self.halted.contains(&s)
    }
}

pub fn interleavings_oracle(
    eq: &SourcingEquilibrium,
    plan: &Plan,
) -> Result<OracleResult, PlanError> {
    plan.check()?;
    let steps = plan.total_steps();
    if steps > ORACLE_MAX_STEPS {
        return Err(PlanError::TooLarge { steps });
    }
    let mut out = OracleResult::default();
    let mut seen: BTreeMap<Vec<usize>, BTreeSet<String>> = BTreeMap::new();
    explore(
        plan,
        vec![0; plan.threads.len()],
        eq.clone(),
        &mut seen,
        &mut out,
    );
    Ok(out)
}

fn explore(
    plan: &Plan,
    cursors: Vec<usize>,
    eq: SourcingEquilibrium,
    seen: &mut BTreeMap<Vec<usize>, BTreeSet<String>>,
    out: &mut OracleResult,
) {
    let key = to_canonical_json(&eq);
    if !seen.entry(cursors.clone()).or_default().insert(key.clone()) {
        return;
    }
    if exhausted(plan, &cursors) {
        out.completed.insert(key);
        return;
    }
    let ready = ready_threads(plan, &cursors, &eq);
    if ready.is_empty() {
        out.halted.insert(key);
        return;
    }
    for i in ready {
        let step = &plan.threads[i].steps[cursors[i]].step;
        match apply_step(&eq, step) {
            Ok(next) => {
                let mut c = cursors.clone();
                c[i] += 1;
                explore(plan, c, next, seen, out);
            }
            Err(_) => {
                out.halted.insert(key.clone());
            }
        }
    }
}

/// Units, subunits, sources and contracts a plan's threads name, per thread.
pub fn thread_footprints(plan: &Plan) -> Vec<BTreeSet<(char, String)>> {
    plan.threads
        .iter()
        .map(|t| {
            t.steps
                .iter()
                .flat_map(|g| g.step.touched_entities())
                .collect()
        })
        .collect()
}

/// The ids a step names, grouped for reference resolution.
pub(crate) fn step_references(step: &Step) -> Vec<(EntityKind, String)> {
    let mut out = Vec::new();
    let unit = |u: &UnitId| (EntityKind::Unit, u.to_string());
    let sub = |s: &SubunitId| (EntityKind::Subunit, s.to_string());
    match step {
        Step::TransferTitle { source, to, .. } => {
            out.push((EntityKind::Source, source.to_string()));
            out.push(unit(&to.unit));
            out.push(sub(&to.subunit));
        }
        Step::ChangeTitleLevel { source, .. } | Step::AbandonTitle { source } => {
            out.push((EntityKind::Source, source.to_string()));
        }
        Step::AcquireSource { into, .. } => {
            out.push(unit(&into.unit));
            out.push(sub(&into.subunit));
        }
        Step::MoveService { service, to } => {
            out.push((EntityKind::Service, service.to_string()));
            out.push(unit(&to.unit));
            out.push(sub(&to.subunit));
        }
        Step::CreateUnit { .. } => {}
        Step::CreateSubunit { unit: u, .. } => out.push(unit(u)),
        Step::DissolveSubunit { target } => {
            out.push(unit(&target.unit));
            out.push(sub(&target.subunit));
        }
        Step::DissolveUnit { unit: u } => out.push(unit(u)),
        Step::SignContract { contract } => {
            out.push(unit(&contract.parties.0));
            out.push(unit(&contract.parties.1));
        }
        Step::TerminateContract { contract } => {
            out.push((EntityKind::Contract, contract.to_string()))
        }
        Step::FinancialTransfer { payer, payee, .. } => {
            out.push(unit(payer));
            out.push(unit(payee));
        }
    }
    if let Step::TransferTitle { bindings, .. }
    | Step::ChangeTitleLevel { bindings, .. }
    | Step::AcquireSource { bindings, .. } = step
    {
        for u in [
            &bindings.holder,
            &bindings.counterparty,
            &bindings.third_party,
        ]
        .into_iter()
        .flatten()
        {
            out.push(unit(u));
        }
    }
    out
}

/// Ids a step brings into existence.
pub(crate) fn step_introductions(step: &Step) -> Vec<(EntityKind, String)> {
    match step {
        Step::CreateUnit { unit } => vec![(EntityKind::Unit, unit.to_string())],
        Step::CreateSubunit { subunit, .. } => vec![(EntityKind::Subunit, subunit.to_string())],
        Step::AcquireSource { source, .. } => vec![(EntityKind::Source, source.id.to_string())],
        Step::SignContract { contract } => vec![(EntityKind::Contract, contract.id.to_string())],
        _ => Vec::new(),
    }
}
