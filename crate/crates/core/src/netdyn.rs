//! Unit networks and long-run evolution experiments under random
//! transformation policies, with degree statistics and a power-law
//! exponent estimate.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ids::{ServiceId, SourceId, SubunitId, UnitId};
use crate::model::{
    Consumer, CostCategory, Costs, ServiceEdge, Source, SourcingEquilibrium, Subunit, TitleRecord,
    Unit,
};
use crate::scale::SourceType;
use crate::transform::{
    analyze, apply_step_mut, apply_steps, Classification, PostcondConfig, Progression, Step,
    SubunitRef, TransformError, TransformationReport, TransformationScope,
};
use crate::valuation::WeightTable;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NetError {
    #[error("no legal transformation left: {0}")]
    PolicyExhausted(String),
    #[error("steps must be at least 1")]
    NoSteps,
    #[error("checkpoint interval must be at least 1")]
    NoCheckpoint,
    #[error("invalid policy: {0}")]
    InvalidPolicy(String),
    #[error("need at least {needed} degrees >= kmin, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("kmin must be at least 1")]
    InvalidKmin,
    /// All degrees at or above kmin are equal; the exponent diverges.
    #[error("sample has no spread above kmin; not a power law")]
    NotPowerLaw,
    #[error(transparent)]
    Transform(#[from] TransformError),
}

pub type Result<T> = std::result::Result<T, NetError>;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EdgeLabel {
    Service(ServiceId),
    Money,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetEdge {
    pub from: UnitId,
    pub to: UnitId,
    pub label: EdgeLabel,
    pub volume: f64,
}

/// Units as nodes weighted by their total absolute portfolio weight;
/// inter-unit service flows and money flows as labeled edges.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct UnitNetwork {
    pub nodes: BTreeMap<UnitId, f64>,
    pub edges: Vec<NetEdge>,
}

impl UnitNetwork {
    pub fn in_degrees(&self) -> BTreeMap<&UnitId, u64> {
        let mut d: BTreeMap<&UnitId, u64> = self.nodes.keys().map(|u| (u, 0)).collect();
        for e in &self.edges {
            *d.entry(&e.to).or_default() += 1;
        }
        d
    }

    pub fn out_degrees(&self) -> BTreeMap<&UnitId, u64> {
        let mut d: BTreeMap<&UnitId, u64> = self.nodes.keys().map(|u| (u, 0)).collect();
        for e in &self.edges {
            *d.entry(&e.from).or_default() += 1;
        }
        d
    }

    /// Every endpoint is a node and no volume is negative.
    pub fn check(&self) -> std::result::Result<(), String> {
        for e in &self.edges {
            for u in [&e.from, &e.to] {
                if !self.nodes.contains_key(u) {
                    return Err(format!("edge endpoint {u} is not a node"));
                }
            }
            if e.volume.is_nan() || e.volume < 0.0 {
                return Err(format!(
                    "edge {} -> {} has volume {}",
                    e.from, e.to, e.volume
                ));
            }
        }
        Ok(())
    }
}

pub fn to_network(eq: &SourcingEquilibrium, table: &WeightTable) -> UnitNetwork {
    let mut nodes: BTreeMap<UnitId, f64> = eq.units.keys().map(|u| (u.clone(), 0.0)).collect();
    for t in eq.titles.values() {
        let Ok(scale) = eq.scale_for_source(&t.source) else {
            continue;
        };
        for u in std::iter::once(&t.outsourcer_side).chain(t.insourcer_side.iter()) {
            if let (Some(w), Ok(sw)) = (nodes.get_mut(u), table.signed_weight(u, t, scale)) {
                *w += sw.abs();
            }
        }
    }
    let mut edges = Vec::new();
    for e in eq.service_edges.values() {
        let (Some(from), Some(to)) = (eq.unit_of(&e.provider), eq.consumer_unit(&e.consumer))
        else {
            continue;
        };
        if from != to {
            edges.push(NetEdge {
                from: from.clone(),
                to: to.clone(),
                label: EdgeLabel::Service(e.service.clone()),
                volume: e.volume,
            });
        }
    }
    for m in eq.money_edges.values() {
        edges.push(NetEdge {
            from: m.payer.clone(),
            to: m.payee.clone(),
            label: EdgeLabel::Money,
            volume: m.amount,
        });
    }
    UnitNetwork { nodes, edges }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyKind {
    UniformRandom,
    /// Insourcers drawn with probability proportional to
    /// `(in_degree + 1)^exponent`.
    PreferentialAttachment(f64),
    /// Insourcers drawn among units at least as heavy as the outsourcer,
    /// the closer in weight the likelier.
    WeightAssortative,
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PolicyKind::UniformRandom => f.write_str("uniform"),
            PolicyKind::PreferentialAttachment(e) => write!(f, "preferential:{e}"),
            PolicyKind::WeightAssortative => f.write_str("assortative"),
        }
    }
}

impl FromStr for PolicyKind {
    type Err = NetError;

    /// `uniform`, `preferential:<exponent>` or `assortative`.
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(PolicyKind::UniformRandom),
            "assortative" => Ok(PolicyKind::WeightAssortative),
            _ => {
                let Some(exp) = s.strip_prefix("preferential:") else {
                    return Err(NetError::InvalidPolicy(format!(
                        "unknown policy `{s}`; expected uniform, preferential:<exponent> or assortative"
                    )));
                };
                let e: f64 = exp
                    .parse()
                    .map_err(|_| NetError::InvalidPolicy(format!("bad exponent `{exp}`")))?;
                if !(e.is_finite() && e >= 0.0) {
                    return Err(NetError::InvalidPolicy(format!(
                        "exponent {e} must be finite and >= 0"
                    )));
                }
                Ok(PolicyKind::PreferentialAttachment(e))
            }
        }
    }
}

/// Probabilities of the three synthesized transformation kinds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransformationMix {
    pub outsource: f64,
    pub greenfield: f64,
    pub follow_up: f64,
}

impl Default for TransformationMix {
    fn default() -> Self {
        Self {
            outsource: 0.8,
            greenfield: 0.05,
            follow_up: 0.15,
        }
    }
}

impl TransformationMix {
    pub fn check(&self) -> Result<()> {
        let parts = [self.outsource, self.greenfield, self.follow_up];
        if parts.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(NetError::InvalidPolicy(
                "mix probabilities must be >= 0".into(),
            ));
        }
        let sum: f64 = parts.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(NetError::InvalidPolicy(format!(
                "mix probabilities sum to {sum}, not 1"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Policy {
    pub kind: PolicyKind,
    pub mix: TransformationMix,
    pub seed: u64,
}

impl Policy {
    pub fn new(kind: PolicyKind, seed: u64) -> Self {
        Self {
            kind,
            mix: TransformationMix::default(),
            seed,
        }
    }

    pub fn with_mix(mut self, mix: TransformationMix) -> Result<Self> {
        mix.check()?;
        self.mix = mix;
        Ok(self)
    }
}

const SEED_TYPES: [SourceType; 4] = [
    SourceType::Persons,
    SourceType::ToolsAndEquipment,
    SourceType::Ipr,
    SourceType::Knowledge,
];

/// `units` units `U000`.., each with one subunit owning
/// `sources_per_unit` sources at level 1, and for every source an internal
/// service `svc_<source>` the subunit provides to its own unit.
pub fn seed_population(units: usize, sources_per_unit: usize) -> SourcingEquilibrium {
    let width = units.saturating_sub(1).to_string().len().max(3);
    let mut eq = SourcingEquilibrium::new();
    for i in 0..units {
        let uid = UnitId::new(format!("U{i:0width$}"));
        let sid = SubunitId::new(format!("{uid}_S"));
        let mut unit = Unit::new(uid.clone());
        unit.subunits.insert(sid.clone());
        eq.units.insert(uid.clone(), unit);
        eq.subunits.insert(
            sid.clone(),
            Subunit {
                id: sid.clone(),
                unit: uid.clone(),
                name: String::new(),
            },
        );
        for j in 0..sources_per_unit {
            let kind = SEED_TYPES[(i + j) % SEED_TYPES.len()].clone();
            let cat = if kind == SourceType::Persons {
                CostCategory::Personnel
            } else {
                CostCategory::CapitalOwned
            };
            let src = SourceId::new(format!("{uid}_s{j}"));
            let source = Source::new(src.clone(), kind)
                .with_costs(Costs::default().with(cat, (1 + (i + j) % 5) as f64));
            eq.sources.insert(src.clone(), source);
            eq.titles.insert(
                src.clone(),
                TitleRecord::new(src.clone(), 1, uid.clone(), sid.clone()),
            );
            let edge = ServiceEdge::new(
                format!("svc_{src}"),
                sid.clone(),
                Consumer::Unit(uid.clone()),
                1.0,
            );
            eq.service_edges.insert(edge.key(), edge);
        }
    }
    eq
}

/// Fitted power law of a degree sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub alpha: f64,
    pub kmin: u64,
    /// Kolmogorov-Smirnov distance of the fit above kmin.
    pub ks: f64,
    /// RMS residual of a straight line through the log-log CCDF above kmin.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub step: usize,
    pub nodes: usize,
    pub edges: usize,
    /// degree -> number of nodes
    pub in_degree_histogram: BTreeMap<u64, u64>,
    pub out_degree_histogram: BTreeMap<u64, u64>,
    /// Node weights in ascending order.
    pub node_weights: Vec<f64>,
    /// Shannon entropy of the node-weight shares, in nats.
    pub weight_entropy: f64,
    /// Fit of the positive in-degrees, absent when the sample is too small
    /// or degenerate.
    pub fit: Option<PowerLawFit>,
    pub classifications: BTreeMap<Classification, u64>,
}

impl Checkpoint {
    pub fn max_in_degree(&self) -> u64 {
        self.in_degree_histogram
            .keys()
            .next_back()
            .copied()
            .unwrap_or(0)
    }

    pub fn alpha(&self) -> Option<f64> {
        self.fit.map(|f| f.alpha)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolutionStats {
    pub policy: Policy,
    pub steps: usize,
    pub checkpoints: Vec<Checkpoint>,
}

impl EvolutionStats {
    pub fn last(&self) -> &Checkpoint {
        self.checkpoints
            .last()
            .expect("evolve records at least one checkpoint")
    }

    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("step,nodes,edges,max_in_degree,alpha,kmin,ks,residual,weight_entropy");
        for c in Classification::ALL {
            out.push(',');
            out.push_str(&c.to_string());
        }
        out.push('\n');
        for cp in &self.checkpoints {
            let (alpha, kmin, ks, res) = match cp.fit {
                Some(f) => (
                    f.alpha.to_string(),
                    f.kmin.to_string(),
                    f.ks.to_string(),
                    f.residual.to_string(),
                ),
                None => Default::default(),
            };
            out.push_str(&format!(
                "{},{},{},{},{alpha},{kmin},{ks},{res},{}",
                cp.step,
                cp.nodes,
                cp.edges,
                cp.max_in_degree(),
                cp.weight_entropy
            ));
            for c in Classification::ALL {
                out.push_str(&format!(
                    ",{}",
                    cp.classifications.get(&c).copied().unwrap_or(0)
                ));
            }
            out.push('\n');
        }
        out
    }
}

fn checkpoint(
    step: usize,
    eq: &SourcingEquilibrium,
    table: &WeightTable,
    counts: &BTreeMap<Classification, u64>,
) -> Checkpoint {
    let net = to_network(eq, table);
    let hist = |d: BTreeMap<&UnitId, u64>| {
        let mut h = BTreeMap::new();
        for v in d.values() {
            *h.entry(*v).or_insert(0u64) += 1;
        }
        h
    };
    let ins = net.in_degrees();
    let positive: Vec<u64> = ins.values().copied().filter(|d| *d > 0).collect();
    let mut weights: Vec<f64> = net.nodes.values().copied().collect();
    weights.sort_by(f64::total_cmp);
    let total: f64 = weights.iter().sum();
    let weight_entropy = if total > 0.0 {
        -weights
            .iter()
            .filter(|w| **w > 0.0)
            .map(|w| {
                let p = w / total;
                p * p.ln()
            })
            .sum::<f64>()
    } else {
        0.0
    };
    Checkpoint {
        step,
        nodes: net.nodes.len(),
        edges: net.edges.len(),
        in_degree_histogram: hist(ins),
        out_degree_histogram: hist(net.out_degrees()),
        node_weights: weights,
        weight_entropy,
        fit: fit_powerlaw(&positive).ok(),
        classifications: counts.clone(),
    }
}

/// The part of `eq` a transformation among `keep` can see or change: the
/// titles, sources, flows and contracts involving a unit of `keep`, and the
/// units and subunits they mention. Reports computed on the view equal those
/// computed on the whole snapshot.
fn local_view(eq: &SourcingEquilibrium, keep: &BTreeSet<UnitId>) -> SourcingEquilibrium {
    let kept_sub = |s: &SubunitId| eq.unit_of(s).is_some_and(|u| keep.contains(u));
    let mut view = SourcingEquilibrium {
        custom_scales: eq.custom_scales.clone(),
        logical_time: eq.logical_time,
        ..SourcingEquilibrium::default()
    };
    let mut units: BTreeSet<&UnitId> = keep.iter().collect();
    for (k, t) in &eq.titles {
        if t.units().any(|u| keep.contains(u)) || kept_sub(&t.using_subunit) {
            units.extend(t.units());
            units.extend(eq.unit_of(&t.using_subunit));
            view.titles.insert(k.clone(), t.clone());
            if let Some(src) = eq.sources.get(k) {
                view.sources.insert(k.clone(), src.clone());
            }
        }
    }
    for (k, e) in &eq.service_edges {
        let consumer = eq.consumer_unit(&e.consumer);
        if kept_sub(&e.provider) || consumer.is_some_and(|u| keep.contains(u)) {
            units.extend(eq.unit_of(&e.provider));
            units.extend(consumer);
            view.service_edges.insert(k.clone(), e.clone());
        }
    }
    for (k, m) in &eq.money_edges {
        if keep.contains(&m.payer) || keep.contains(&m.payee) {
            units.extend([&m.payer, &m.payee]);
            view.money_edges.insert(k.clone(), m.clone());
        }
    }
    for (k, c) in &eq.contracts {
        if keep.contains(&c.parties.0) || keep.contains(&c.parties.1) {
            units.extend([&c.parties.0, &c.parties.1]);
            view.contracts.insert(k.clone(), c.clone());
        }
    }
    for u in units {
        if let Some(unit) = eq.units.get(u) {
            for s in &unit.subunits {
                if let Some(sub) = eq.subunits.get(s) {
                    view.subunits.insert(s.clone(), sub.clone());
                }
            }
            view.units.insert(u.clone(), unit.clone());
        }
    }
    view
}

/// In-degree per unit in the derived network, without building it.
fn in_degrees(eq: &SourcingEquilibrium) -> BTreeMap<&UnitId, u64> {
    let mut out = BTreeMap::new();
    for e in eq.service_edges.values() {
        if let (Some(from), Some(to)) = (eq.unit_of(&e.provider), eq.consumer_unit(&e.consumer)) {
            if from != to {
                *out.entry(to).or_insert(0) += 1;
            }
        }
    }
    for m in eq.money_edges.values() {
        *out.entry(&m.payee).or_insert(0) += 1;
    }
    out
}

enum Event {
    Outsource,
    Greenfield,
    FollowUp,
}

struct Evolution<'a> {
    policy: &'a Policy,
    rng: ChaCha8Rng,
    eq: SourcingEquilibrium,
    table: WeightTable,
    config: PostcondConfig,
    /// Report of the last outsourcing of each source still away from home.
    outsourced: BTreeMap<SourceId, TransformationReport>,
    counts: BTreeMap<Classification, u64>,
    greenfield_serial: usize,
    /// Also analyze on the whole snapshot and insist on the same report.
    cross_check: bool,
}

impl Evolution<'_> {
    fn user_of(&self, source: &SourceId) -> Option<(UnitId, SubunitId)> {
        let t = self.eq.titles.get(source)?;
        let u = self.eq.unit_of(&t.using_subunit)?;
        Some((u.clone(), t.using_subunit.clone()))
    }

    fn pick_titled_source(&mut self) -> Result<SourceId> {
        let n = self.eq.titles.len();
        if n == 0 {
            return Err(NetError::PolicyExhausted("no titled sources left".into()));
        }
        let i = self.rng.random_range(0..n);
        Ok(self
            .eq
            .titles
            .keys()
            .nth(i)
            .expect("index in range")
            .clone())
    }

    /// Draws the receiving unit per the policy, excluding `exclude`.
    fn pick_target(&mut self, exclude: &UnitId) -> Result<UnitId> {
        let candidates: Vec<&UnitId> = self
            .eq
            .units
            .iter()
            .filter(|(id, u)| *id != exclude && !u.subunits.is_empty())
            .map(|(id, _)| id)
            .collect();
        if candidates.is_empty() {
            return Err(NetError::PolicyExhausted(
                "no unit can receive a source".into(),
            ));
        }
        let weights: Vec<f64> = match self.policy.kind {
            PolicyKind::UniformRandom => vec![1.0; candidates.len()],
            PolicyKind::PreferentialAttachment(e) => {
                let ins = in_degrees(&self.eq);
                candidates
                    .iter()
                    .map(|u| (ins.get(u).copied().unwrap_or(0) as f64 + 1.0).powf(e))
                    .collect()
            }
            PolicyKind::WeightAssortative => {
                let net = to_network(&self.eq, &self.table);
                let wa = net.nodes.get(exclude).copied().unwrap_or(0.0);
                let w: Vec<f64> = candidates
                    .iter()
                    .map(|u| {
                        let wx = net.nodes.get(*u).copied().unwrap_or(0.0);
                        if wx >= wa {
                            1.0 / (1.0 + wx - wa)
                        } else {
                            0.0
                        }
                    })
                    .collect();
                if w.iter().all(|x| *x == 0.0) {
                    vec![1.0; candidates.len()]
                } else {
                    w
                }
            }
        };
        let dist =
            WeightedIndex::new(&weights).map_err(|e| NetError::InvalidPolicy(e.to_string()))?;
        Ok(candidates[dist.sample(&mut self.rng)].clone())
    }

    fn first_subunit(&self, unit: &UnitId) -> Option<SubunitId> {
        self.eq.units.get(unit)?.subunits.iter().next().cloned()
    }

    /// Transfer of `source` into `to`, its service following it, and a fee
    /// from the service's consumer to the new provider.
    fn transfer_steps(&self, source: &SourceId, to: &SubunitRef) -> Vec<Step> {
        let mut steps = vec![Step::TransferTitle {
            source: source.clone(),
            to: to.clone(),
            level: 1,
            bindings: Default::default(),
        }];
        let service = ServiceId::new(format!("svc_{source}"));
        let consumer = self
            .eq
            .service_edges
            .values()
            .find(|e| e.service == service)
            .and_then(|e| self.eq.consumer_unit(&e.consumer).cloned());
        if let Some(consumer) = consumer {
            steps.push(Step::MoveService {
                service,
                to: to.clone(),
            });
            if consumer != to.unit {
                steps.push(Step::FinancialTransfer {
                    payer: consumer,
                    payee: to.unit.clone(),
                    amount: 1.0,
                });
            }
        }
        steps
    }

    fn step(&mut self) -> Result<()> {
        let u: f64 = self.rng.random();
        let mix = self.policy.mix;
        let mut event = if u < mix.outsource {
            Event::Outsource
        } else if u < mix.outsource + mix.greenfield {
            Event::Greenfield
        } else {
            Event::FollowUp
        };
        if matches!(event, Event::FollowUp) && self.outsourced.is_empty() {
            event = Event::Outsource;
        }

        let source = match event {
            Event::FollowUp => {
                let i = self.rng.random_range(0..self.outsourced.len());
                self.outsourced
                    .keys()
                    .nth(i)
                    .expect("index in range")
                    .clone()
            }
            _ => self.pick_titled_source()?,
        };
        let (a, b) = self.user_of(&source).ok_or_else(|| {
            NetError::PolicyExhausted(format!("source {source} has no using unit"))
        })?;

        let mut steps = Vec::new();
        let (x, y) = match event {
            Event::Greenfield => {
                self.greenfield_serial += 1;
                let x = loop {
                    let candidate = UnitId::new(format!("G{}", self.greenfield_serial));
                    if !self.eq.units.contains_key(&candidate) {
                        break candidate;
                    }
                    self.greenfield_serial += 1;
                };
                let y = SubunitId::new(format!("{x}_S"));
                steps.push(Step::CreateUnit { unit: x.clone() });
                steps.push(Step::CreateSubunit {
                    subunit: y.clone(),
                    unit: x.clone(),
                });
                (x, y)
            }
            _ => {
                let x = self.pick_target(&a)?;
                let y = self
                    .first_subunit(&x)
                    .ok_or_else(|| NetError::PolicyExhausted(format!("unit {x} has no subunit")))?;
                (x, y)
            }
        };
        steps.extend(self.transfer_steps(&source, &SubunitRef::new(x.clone(), y.clone())));

        let history: Vec<TransformationReport> =
            self.outsourced.get(&source).cloned().into_iter().collect();
        let mut keep = BTreeSet::from([a.clone(), x.clone()]);
        for step in &steps {
            if let Step::FinancialTransfer { payer, payee, .. } = step {
                keep.extend([payer.clone(), payee.clone()]);
            }
        }
        for h in &history {
            keep.insert(h.scope.outsourcer.clone());
            keep.extend(h.scope.insourcer.iter().cloned());
        }
        let before = local_view(&self.eq, &keep);
        let scope =
            TransformationScope::new(a.clone(), b, [source.clone()]).with_insourcer(x.clone(), y);
        let prog = Progression::new(steps, scope)?;
        let after = apply_steps(&before, &prog.steps).map_err(|f| f.error)?.0;
        let report = analyze(&before, &prog, &after, &history, &self.table, &self.config)?;
        if self.cross_check {
            let full_after = apply_steps(&self.eq, &prog.steps).map_err(|f| f.error)?.0;
            let full = analyze(
                &self.eq,
                &prog,
                &full_after,
                &history,
                &self.table,
                &self.config,
            )?;
            assert_eq!(
                report, full,
                "local analysis differs at {}",
                self.eq.logical_time
            );
            assert_eq!(local_view(&full_after, &keep), after);
        }
        for step in &prog.steps {
            apply_step_mut(&mut self.eq, step)?;
        }
        *self.counts.entry(report.classification).or_insert(0) += 1;
        match report.classification {
            c if c.is_outsourcing() && history.is_empty() => {
                self.outsourced.insert(source, report);
            }
            Classification::Backsourcing => {
                self.outsourced.remove(&source);
            }
            _ => {}
        }
        Ok(())
    }
}

/// Runs `steps` synthesized transformations from `eq0` and records
/// statistics every `checkpoint_every` steps and after the last one.
pub fn evolve(
    eq0: &SourcingEquilibrium,
    policy: &Policy,
    steps: usize,
    checkpoint_every: usize,
) -> Result<EvolutionStats> {
    evolve_with_state(eq0, policy, steps, checkpoint_every).map(|(stats, _)| stats)
}

/// Like [`evolve`], also returning the final equilibrium.
pub fn evolve_with_state(
    eq0: &SourcingEquilibrium,
    policy: &Policy,
    steps: usize,
    checkpoint_every: usize,
) -> Result<(EvolutionStats, SourcingEquilibrium)> {
    if steps == 0 {
        return Err(NetError::NoSteps);
    }
    if checkpoint_every == 0 {
        return Err(NetError::NoCheckpoint);
    }
    policy.mix.check()?;
    let mut run = Evolution {
        policy,
        rng: ChaCha8Rng::seed_from_u64(policy.seed),
        eq: eq0.clone(),
        table: WeightTable::standard().with_defaults_for(eq0),
        config: PostcondConfig::default(),
        outsourced: BTreeMap::new(),
        counts: BTreeMap::new(),
        greenfield_serial: 0,
        cross_check: false,
    };
    let mut checkpoints = Vec::new();
    for i in 1..=steps {
        run.step()?;
        if i % checkpoint_every == 0 || i == steps {
            checkpoints.push(checkpoint(i, &run.eq, &run.table, &run.counts));
        }
    }
    let stats = EvolutionStats {
        policy: *policy,
        steps,
        checkpoints,
    };
    Ok((stats, run.eq))
}

pub const MIN_TAIL: usize = 10;

/// Continuous maximum-likelihood exponent with the half-integer offset for
/// discrete data, over the degrees `>= kmin`.
pub fn powerlaw_alpha(degrees: &[u64], kmin: u64) -> Result<f64> {
    if kmin == 0 {
        return Err(NetError::InvalidKmin);
    }
    let tail: Vec<u64> = degrees.iter().copied().filter(|d| *d >= kmin).collect();
    if tail.len() < MIN_TAIL {
        return Err(NetError::InsufficientData {
            needed: MIN_TAIL,
            got: tail.len(),
        });
    }
    if tail.iter().all(|d| *d == tail[0]) {
        return Err(NetError::NotPowerLaw);
    }
    let x0 = kmin as f64 - 0.5;
    let s: f64 = tail.iter().map(|d| (*d as f64 / x0).ln()).sum();
    Ok(1.0 + tail.len() as f64 / s)
}

fn ks_distance(tail: &[u64], alpha: f64, kmin: u64) -> f64 {
    let n = tail.len() as f64;
    let x0 = kmin as f64 - 0.5;
    let model_cdf = |k: u64| 1.0 - ((k as f64 + 0.5) / x0).powf(1.0 - alpha);
    let mut sorted = tail.to_vec();
    sorted.sort_unstable();
    let mut worst: f64 = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let k = sorted[i];
        let mut j = i;
        while j < sorted.len() && sorted[j] == k {
            j += 1;
        }
        let below = i as f64 / n;
        let upto = j as f64 / n;
        let model_below = if k == kmin { 0.0 } else { model_cdf(k - 1) };
        worst = worst
            .max((upto - model_cdf(k)).abs())
            .max((below - model_below).abs());
        i = j;
    }
    worst
}

/// RMS residual of a least-squares line through `(ln k, ln P(D >= k))` for
/// the distinct degrees `k >= kmin`. Near zero for power laws, larger for
/// curved (e.g. geometric) tails.
pub fn loglog_residual(degrees: &[u64], kmin: u64) -> Result<f64> {
    let mut tail: Vec<u64> = degrees
        .iter()
        .copied()
        .filter(|d| *d >= kmin.max(1))
        .collect();
    if tail.len() < MIN_TAIL {
        return Err(NetError::InsufficientData {
            needed: MIN_TAIL,
            got: tail.len(),
        });
    }
    tail.sort_unstable();
    let n = tail.len() as f64;
    let mut pts = Vec::new();
    let mut i = 0;
    while i < tail.len() {
        let k = tail[i];
        pts.push(((k as f64).ln(), ((tail.len() - i) as f64 / n).ln()));
        while i < tail.len() && tail[i] == k {
            i += 1;
        }
    }
    if pts.len() < 3 {
        return Err(NetError::NotPowerLaw);
    }
    let m = pts.len() as f64;
    let (mx, my) = (
        pts.iter().map(|p| p.0).sum::<f64>() / m,
        pts.iter().map(|p| p.1).sum::<f64>() / m,
    );
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let sse: f64 = pts
        .iter()
        .map(|p| (p.1 - my - slope * (p.0 - mx)).powi(2))
        .sum();
    Ok((sse / m).sqrt())
}

/// Chooses kmin by minimizing the Kolmogorov-Smirnov distance over the
/// distinct degrees that leave at least [`MIN_TAIL`] observations.
pub fn fit_powerlaw(degrees: &[u64]) -> Result<PowerLawFit> {
    let mut distinct: Vec<u64> = degrees.iter().copied().filter(|d| *d > 0).collect();
    distinct.sort_unstable();
    distinct.dedup();
    let mut best: Option<PowerLawFit> = None;
    let mut last_err = NetError::InsufficientData {
        needed: MIN_TAIL,
        got: degrees.iter().filter(|d| **d > 0).count(),
    };
    for kmin in distinct {
        let alpha = match powerlaw_alpha(degrees, kmin) {
            Ok(a) => a,
            Err(e) => {
                last_err = e;
                continue;
            }
        };
        let tail: Vec<u64> = degrees.iter().copied().filter(|d| *d >= kmin).collect();
        let ks = ks_distance(&tail, alpha, kmin);
        if best.is_none_or(|b| ks < b.ks) {
            best = Some(PowerLawFit {
                alpha,
                kmin,
                ks,
                residual: f64::NAN,
            });
        }
    }
    let mut fit = best.ok_or(last_err)?;
    fit.residual = loglog_residual(degrees, fit.kmin).unwrap_or(f64::NAN);
    Ok(fit)
}
