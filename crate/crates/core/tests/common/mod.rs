//! Seeded generators shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeSet;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sourcing_core::model::{
    AdvantageFlags, Consumer, Contract, ContractKind, CostCategory, Costs, EntityKind, MoneyEdge,
    ServiceEdge, Source, TitleRecord, Unit,
};
use sourcing_core::plan::{Guard, GuardedStep, Plan, Thread};
use sourcing_core::scale::{Polarity, Role, TitleScale};
use sourcing_core::transform::{
    apply_step, Bindings, Progression, Step, SubunitRef, TransformationScope,
};
use sourcing_core::{
    validate_equilibrium, SourceId, SourceType, SourcingEquilibrium, SubunitId, UnitId,
};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Debug, Clone, Copy)]
pub struct EqShape {
    pub min_units: usize,
    pub max_units: usize,
    pub max_sources: usize,
    /// Custom scales, escaped names, contracts, logical time.
    pub extras: bool,
}

impl EqShape {
    pub const SMALL: EqShape = EqShape {
        min_units: 2,
        max_units: 5,
        max_sources: 12,
        extras: false,
    };
    pub const FULL: EqShape = EqShape {
        min_units: 1,
        max_units: 5,
        max_sources: 12,
        extras: true,
    };
}

const NAMES: &[&str] = &[
    "",
    "Alpha",
    "Beta Services",
    "say \"hi\"",
    "back\\slash",
    "two\nlines",
    "tab\there",
    "# not a comment",
];

fn quarter(rng: &mut ChaCha8Rng, lo: u32, hi: u32) -> f64 {
    f64::from(rng.random_range(lo..=hi)) * 0.25
}

pub fn unit_ids(eq: &SourcingEquilibrium) -> Vec<UnitId> {
    eq.units.keys().cloned().collect()
}

pub fn subunits_of(eq: &SourcingEquilibrium, unit: &UnitId) -> Vec<SubunitId> {
    eq.units[unit].subunits.iter().cloned().collect()
}

pub fn subunit_ref(eq: &SourcingEquilibrium, sub: &SubunitId) -> SubunitRef {
    SubunitRef::new(eq.subunits[sub].unit.clone(), sub.clone())
}

fn other_unit(rng: &mut ChaCha8Rng, units: &[UnitId], not: &[&UnitId]) -> Option<UnitId> {
    let pool: Vec<_> = units.iter().filter(|u| !not.contains(u)).collect();
    pool.choose(rng).map(|u| (*u).clone())
}

/// A random valid title for `source` of the given scale, or `None` when the
/// units at hand cannot fill the slots of the level drawn.
fn random_title(
    rng: &mut ChaCha8Rng,
    eq: &SourcingEquilibrium,
    source: &SourceId,
    scale: &TitleScale,
) -> Option<TitleRecord> {
    let units = unit_ids(eq);
    let level = rng.random_range(1..=scale.len());
    let template = scale.level(level)?;
    let subs: Vec<_> = eq.subunits.keys().cloned().collect();
    let user = subs.choose(rng)?.clone();
    let user_unit = eq.subunits[&user].unit.clone();
    let mut title = match scale.polarity_of_rank(level) {
        Polarity::Positive => {
            let mut t = TitleRecord::new(source.clone(), level, user_unit.clone(), user);
            if template.mentions(Role::Insourcer) || rng.random_bool(0.15) {
                t.insourcer_side = other_unit(rng, &units, &[&user_unit]);
            }
            t
        }
        Polarity::Negative => {
            let holder = other_unit(rng, &units, &[&user_unit])?;
            TitleRecord::new(source.clone(), level, holder, user).with_insourcer(user_unit)
        }
    };
    if template.mentions(Role::Insourcer) && title.insourcer_side.is_none() {
        return None;
    }
    if template.mentions(Role::ThirdParty) {
        let mut taken = vec![&title.outsourcer_side];
        taken.extend(title.insourcer_side.as_ref());
        title.third_party = Some(other_unit(rng, &units, &taken)?);
    }
    Some(title)
}

pub fn gen_equilibrium(rng: &mut ChaCha8Rng, shape: EqShape) -> SourcingEquilibrium {
    let mut eq = SourcingEquilibrium::new();
    let extras = shape.extras;
    let n_units = rng.random_range(shape.min_units..=shape.max_units);
    for i in 0..n_units {
        let mut u = Unit::new(format!("U{i}"));
        if extras {
            u.name = NAMES.choose(rng).unwrap().to_string();
            u.mission = NAMES.choose(rng).unwrap().to_string();
        }
        eq.insert_unit(u).unwrap();
        let uid = UnitId::new(format!("U{i}"));
        for j in 0..rng.random_range(1..=3) {
            let name = if extras {
                *NAMES.choose(rng).unwrap()
            } else {
                ""
            };
            eq.insert_subunit(&uid, format!("U{i}_b{j}"), name).unwrap();
        }
    }

    let mut kinds: Vec<SourceType> = SourceType::BUILTIN.to_vec();
    if extras && rng.random_bool(0.5) {
        let n = rng.random_range(2..=7);
        let p = rng.random_range(1..n);
        eq.register_scale(TitleScale::custom("band", n, p)).unwrap();
        kinds.push(SourceType::Custom("band".into()));
    }

    let units = unit_ids(&eq);
    for i in 0..rng.random_range(0..=shape.max_sources) {
        let id = SourceId::new(format!("s{i}"));
        let kind = kinds.choose(rng).unwrap().clone();
        let mut src = Source::new(id.clone(), kind.clone());
        if rng.random_bool(0.5) {
            let mut costs = Costs::default();
            for cat in CostCategory::ALL {
                if rng.random_bool(0.3) {
                    costs = costs.with(cat, quarter(rng, 1, 400));
                }
            }
            src = src.with_costs(costs);
        }
        if rng.random_bool(0.3) {
            src = src.with_advantage(AdvantageFlags {
                valuable: rng.random(),
                rare: rng.random(),
                inimitable: rng.random(),
                non_substitutable: rng.random(),
            });
        }
        if rng.random_bool(0.1) {
            src = src.critical_for(units.choose(rng).unwrap().clone());
        }
        eq.insert_source(src).unwrap();
        if rng.random_bool(0.85) {
            let scale = eq.scale_of(&kind).unwrap().clone();
            for _ in 0..10 {
                if let Some(t) = random_title(rng, &eq, &id, &scale) {
                    eq.insert_title(t).unwrap();
                    break;
                }
            }
        }
    }

    let subs: Vec<_> = eq.subunits.keys().cloned().collect();
    for i in 0..rng.random_range(0..=4) {
        let provider = subs.choose(rng).unwrap().clone();
        let mut consumers = vec![Consumer::External];
        consumers.extend(units.iter().map(|u| Consumer::Unit(u.clone())));
        consumers.extend(subs.iter().map(|s| Consumer::Subunit(s.clone())));
        consumers.shuffle(rng);
        for c in consumers.into_iter().take(rng.random_range(1..=2)) {
            let edge =
                ServiceEdge::new(format!("svc{i}"), provider.clone(), c, quarter(rng, 1, 80));
            eq.insert_service(edge).unwrap();
        }
    }

    if units.len() >= 2 {
        for _ in 0..rng.random_range(0..=3) {
            let mut pair: Vec<_> = units.choose_multiple(rng, 2).cloned().collect();
            // one direction per pair: money flows are kept netted
            if eq
                .money_edges
                .contains_key(&(pair[0].clone(), pair[1].clone()))
                || eq
                    .money_edges
                    .contains_key(&(pair[1].clone(), pair[0].clone()))
            {
                continue;
            }
            if rng.random_bool(0.5) {
                pair.reverse();
            }
            let edge = MoneyEdge {
                payer: pair[0].clone(),
                payee: pair[1].clone(),
                amount: quarter(rng, 1, 800),
            };
            eq.insert_money(edge).unwrap();
        }
    }

    if extras && units.len() >= 2 {
        let services: Vec<_> = eq.service_ids().into_iter().cloned().collect();
        for i in 0..rng.random_range(0..=2) {
            let mut kind = *ContractKind::ALL.choose(rng).unwrap();
            if kind == ContractKind::TargetServiceProvision && services.is_empty() {
                kind = ContractKind::Other;
            }
            let pair: Vec<_> = units.choose_multiple(rng, 2).cloned().collect();
            let mut covered: BTreeSet<_> = services
                .iter()
                .filter(|_| rng.random_bool(0.5))
                .cloned()
                .collect();
            if kind == ContractKind::TargetServiceProvision && covered.is_empty() {
                covered.insert(services[0].clone());
            }
            let contract = Contract {
                id: format!("k{i}").into(),
                kind,
                parties: (pair[0].clone(), pair[1].clone()),
                covered_services: covered,
                expiry: rng.random_bool(0.5).then(|| rng.random_range(0..100)),
            };
            eq.insert_contract(contract).unwrap();
        }
        eq.logical_time = rng.random_range(0..20);
    }

    let report = validate_equilibrium(&eq);
    assert!(
        report.is_valid(),
        "generator produced an invalid equilibrium: {report:?}"
    );
    eq
}

/// A generated equilibrium with at least two units and a subunit using at
/// least one titled source.
pub fn gen_outsourcing_setting(rng: &mut ChaCha8Rng) -> (SourcingEquilibrium, TransformationScope) {
    loop {
        let eq = gen_equilibrium(rng, EqShape::SMALL);
        let users: Vec<_> = eq
            .subunits
            .keys()
            .filter(|s| eq.titles.values().any(|t| &t.using_subunit == *s))
            .cloned()
            .collect();
        let Some(b) = users.choose(rng).cloned() else {
            continue;
        };
        let a = eq.subunits[&b].unit.clone();
        let Some(x) = other_unit(rng, &unit_ids(&eq), &[&a]) else {
            continue;
        };
        let y = subunits_of(&eq, &x).choose(rng).unwrap().clone();
        let sources: BTreeSet<_> = eq
            .titles
            .values()
            .filter(|t| t.using_subunit == b)
            .map(|t| t.source.clone())
            .collect();
        let scope = TransformationScope::new(a, b, sources).with_insourcer(x, y);
        return (eq, scope);
    }
}

/// Applies `step` if it succeeds and leaves a valid snapshot.
fn try_step(eq: &SourcingEquilibrium, step: &Step) -> Option<SourcingEquilibrium> {
    let next = apply_step(eq, step).ok()?;
    validate_equilibrium(&next).is_valid().then_some(next)
}

fn single_provider(eq: &SourcingEquilibrium, service: &sourcing_core::ServiceId) -> bool {
    let providers: BTreeSet<_> = eq
        .service_edges
        .values()
        .filter(|e| &e.service == service)
        .map(|e| &e.provider)
        .collect();
    providers.len() == 1
}

/// Up to `max_steps` steps drawn from transfer, retitle, move-service and
/// pay, each kept only if it applies to the state reached so far.
pub fn gen_pure_transfer(
    rng: &mut ChaCha8Rng,
    eq: &SourcingEquilibrium,
    scope: &TransformationScope,
    max_steps: usize,
) -> Option<Progression> {
    let target = rng.random_range(1..=max_steps);
    let mut state = eq.clone();
    let mut steps = Vec::new();
    let units = unit_ids(eq);
    let subs: Vec<_> = eq.subunits.keys().cloned().collect();
    let (b, y) = (
        &scope.outsourcing_subunit,
        scope.insourcing_subunit.as_ref().unwrap(),
    );
    for _ in 0..target * 8 {
        if steps.len() == target {
            break;
        }
        let titled: Vec<_> = state.titles.keys().cloned().collect();
        let step = match rng.random_range(0..4) {
            0 if !titled.is_empty() => {
                let source = titled.choose(rng).unwrap().clone();
                let n = state.scale_for_source(&source).unwrap().len();
                let to = if rng.random_bool(0.7) {
                    [b, y].choose(rng).map(|s| (*s).clone()).unwrap()
                } else {
                    subs.choose(rng).unwrap().clone()
                };
                Step::TransferTitle {
                    source,
                    to: subunit_ref(&state, &to),
                    level: rng.random_range(1..=n),
                    bindings: Bindings::default(),
                }
            }
            1 if !titled.is_empty() => {
                let source = titled.choose(rng).unwrap().clone();
                let n = state.scale_for_source(&source).unwrap().len();
                let counterparty = rng
                    .random_bool(0.3)
                    .then(|| units.choose(rng).unwrap().clone());
                Step::ChangeTitleLevel {
                    source,
                    level: rng.random_range(1..=n),
                    bindings: Bindings {
                        counterparty,
                        ..Bindings::default()
                    },
                }
            }
            2 => {
                let services: Vec<_> = state.service_ids().into_iter().cloned().collect();
                let Some(service) = services.choose(rng).cloned() else {
                    continue;
                };
                if !single_provider(&state, &service) {
                    continue;
                }
                let to = if rng.random_bool(0.6) {
                    y.clone()
                } else {
                    subs.choose(rng).unwrap().clone()
                };
                Step::MoveService {
                    service,
                    to: subunit_ref(&state, &to),
                }
            }
            3 => {
                let pair: Vec<_> = units.choose_multiple(rng, 2).cloned().collect();
                Step::FinancialTransfer {
                    payer: pair[0].clone(),
                    payee: pair[1].clone(),
                    amount: quarter(rng, 1, 400),
                }
            }
            _ => continue,
        };
        if let Some(next) = try_step(&state, &step) {
            state = next;
            steps.push(step);
        }
    }
    Progression::new(steps, scope.clone()).ok()
}

/// An outsourcing attempt: every scope source is moved to `Y` at a level
/// negative for `A`, retitled to a lease-back, kept, or abandoned; `B`'s
/// services follow to `Y` and `X` pays `A`.
pub fn gen_outsourcing(
    rng: &mut ChaCha8Rng,
    eq: &SourcingEquilibrium,
    scope: &TransformationScope,
) -> Option<Progression> {
    let x = scope.insourcer.clone()?;
    let y = scope.insourcing_subunit.clone()?;
    let yref = SubunitRef::new(x.clone(), y.clone());
    let mut state = eq.clone();
    let mut steps = Vec::new();
    for s in &scope.sources {
        let scale = state.scale_for_source(s).unwrap().clone();
        let a_rank_level = |rank: u32| {
            // level whose rank seen from A is `rank`
            let t = &state.titles[s];
            if t.outsourcer_side == scope.outsourcer {
                rank
            } else {
                scale.mirror(rank)
            }
        };
        let roll = rng.random_range(0..10);
        let step = if roll < 6 {
            let level = rng.random_range(scale.positive_count + 1..=scale.len());
            Step::TransferTitle {
                source: s.clone(),
                to: yref.clone(),
                level,
                bindings: Bindings {
                    holder: Some(scope.outsourcer.clone()),
                    counterparty: Some(x.clone()),
                    third_party: None,
                },
            }
        } else if roll < 8 {
            let level = a_rank_level(rng.random_range(2..=scale.positive_count.max(2)));
            Step::ChangeTitleLevel {
                source: s.clone(),
                level,
                bindings: Bindings {
                    counterparty: Some(x.clone()),
                    ..Bindings::default()
                },
            }
        } else if roll < 9 {
            Step::AbandonTitle { source: s.clone() }
        } else {
            continue;
        };
        if let Some(next) = try_step(&state, &step) {
            state = next;
            steps.push(step);
        } else if let Some(fallback) = transfer_plain(&state, s, &yref, &scale) {
            state = try_step(&state, &fallback).unwrap();
            steps.push(fallback);
        }
    }
    let services: Vec<_> = state
        .service_edges
        .values()
        .filter(|e| e.provider == scope.outsourcing_subunit)
        .map(|e| e.service.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    for service in services {
        let step = Step::MoveService {
            service,
            to: yref.clone(),
        };
        if let Some(next) = try_step(&state, &step) {
            state = next;
            steps.push(step);
        }
    }
    if rng.random_bool(0.7) {
        steps.push(Step::FinancialTransfer {
            payer: x,
            payee: scope.outsourcer.clone(),
            amount: quarter(rng, 4, 400),
        });
    }
    Progression::new(steps, scope.clone()).ok()
}

/// Transfer to `Y` at the last level, with roles derived.
fn transfer_plain(
    state: &SourcingEquilibrium,
    s: &SourceId,
    yref: &SubunitRef,
    scale: &TitleScale,
) -> Option<Step> {
    let step = Step::TransferTitle {
        source: s.clone(),
        to: yref.clone(),
        level: scale.len(),
        bindings: Bindings::default(),
    };
    try_step(state, &step).map(|_| step)
}

/// Two or three threads over pairwise disjoint sources, subunits and
/// services. Every thread applies on its own from `eq`.
pub fn gen_disjoint_plan(
    rng: &mut ChaCha8Rng,
    eq: &SourcingEquilibrium,
    scope: &TransformationScope,
) -> Option<Plan> {
    let n_threads = rng.random_range(2..=3);
    let mut subs: Vec<_> = eq.subunits.keys().cloned().collect();
    let mut sources: Vec<_> = eq.titles.keys().cloned().collect();
    let mut services: Vec<_> = eq.service_ids().into_iter().cloned().collect();
    if subs.len() < n_threads || sources.len() < n_threads {
        return None;
    }
    subs.shuffle(rng);
    sources.shuffle(rng);
    services.shuffle(rng);
    fn deal<T: Clone>(v: &[T], t: usize, n: usize) -> Vec<T> {
        v.iter().skip(t).step_by(n).cloned().collect()
    }

    let mut threads = Vec::new();
    for t in 0..n_threads {
        let my_subs: Vec<SubunitId> = deal(&subs, t, n_threads);
        let my_sources: Vec<SourceId> = deal(&sources, t, n_threads);
        let my_services: Vec<sourcing_core::ServiceId> = deal(&services, t, n_threads);
        let mut state = eq.clone();
        let mut steps = Vec::new();
        let want = rng.random_range(1..=3);
        for _ in 0..want * 10 {
            if steps.len() == want {
                break;
            }
            let step = match rng.random_range(0..3) {
                0 => {
                    let source = my_sources.choose(rng).unwrap().clone();
                    let n = state.scale_for_source(&source).unwrap().len();
                    Step::TransferTitle {
                        source,
                        to: subunit_ref(&state, my_subs.choose(rng).unwrap()),
                        level: rng.random_range(1..=n),
                        bindings: Bindings::default(),
                    }
                }
                1 => {
                    let source = my_sources.choose(rng).unwrap().clone();
                    let n = state.scale_for_source(&source).unwrap().len();
                    Step::ChangeTitleLevel {
                        source,
                        level: rng.random_range(1..=n),
                        bindings: Bindings::default(),
                    }
                }
                _ => {
                    let Some(service) = my_services.choose(rng).cloned() else {
                        continue;
                    };
                    Step::MoveService {
                        service,
                        to: subunit_ref(&state, my_subs.choose(rng).unwrap()),
                    }
                }
            };
            if let Some(next) = try_step(&state, &step) {
                let guard = rng.random_bool(0.2).then(|| Guard::Exists {
                    kind: EntityKind::Source,
                    id: step
                        .sources()
                        .into_iter()
                        .next()
                        .map_or_else(|| my_sources[0].to_string(), |s| s.to_string()),
                });
                state = next;
                steps.push(GuardedStep { guard, step });
            }
        }
        if steps.is_empty() {
            return None;
        }
        threads.push(Thread {
            name: format!("t{t}"),
            steps,
        });
    }
    Some(Plan {
        id: "disjoint".into(),
        equilibrium: None,
        scope: scope.clone(),
        threads,
    })
}

/// Two threads retitling the same source to two different levels.
pub fn gen_conflicting_plan(rng: &mut ChaCha8Rng) -> (SourcingEquilibrium, Plan) {
    loop {
        let (eq, scope) = gen_outsourcing_setting(rng);
        let titled: Vec<_> = eq.titles.keys().cloned().collect();
        let source = titled.choose(rng).unwrap().clone();
        let n = eq.scale_for_source(&source).unwrap().len();
        let mut options: Vec<Step> = (1..=n)
            .map(|level| Step::ChangeTitleLevel {
                source: source.clone(),
                level,
                bindings: Bindings::default(),
            })
            .filter(|s| {
                apply_step(&eq, s)
                    .is_ok_and(|e| e.titles != eq.titles && validate_equilibrium(&e).is_valid())
            })
            .collect();
        options.shuffle(rng);
        if options.len() < 2 {
            continue;
        }
        // each retitle must also apply after the other
        let (first, second) = (options[0].clone(), options[1].clone());
        let ab = apply_step(&eq, &first)
            .ok()
            .and_then(|e| apply_step(&e, &second).ok());
        let ba = apply_step(&eq, &second)
            .ok()
            .and_then(|e| apply_step(&e, &first).ok());
        if ab.is_none() || ba.is_none() {
            continue;
        }
        let plan = Plan {
            id: "conflict".into(),
            equilibrium: None,
            scope,
            threads: vec![
                Thread {
                    name: "left".into(),
                    steps: vec![GuardedStep::new(first)],
                },
                Thread {
                    name: "right".into(),
                    steps: vec![GuardedStep::new(second)],
                },
            ],
        };
        return (eq, plan);
    }
}

fn ident(rng: &mut ChaCha8Rng, prefix: &str) -> String {
    format!("{prefix}{}", rng.random_range(0..40))
}

fn maybe_unit(rng: &mut ChaCha8Rng) -> Option<UnitId> {
    rng.random_bool(0.3).then(|| UnitId::new(ident(rng, "U")))
}

fn random_bindings(rng: &mut ChaCha8Rng) -> Bindings {
    Bindings {
        holder: maybe_unit(rng),
        counterparty: maybe_unit(rng),
        third_party: maybe_unit(rng),
    }
}

fn random_sref(rng: &mut ChaCha8Rng) -> SubunitRef {
    SubunitRef::new(ident(rng, "U"), ident(rng, "b"))
}

fn random_real(rng: &mut ChaCha8Rng) -> f64 {
    match rng.random_range(0..3) {
        0 => f64::from(rng.random_range(1..1000)),
        1 => quarter(rng, 1, 4000),
        _ => f64::from(rng.random_range(1..100_000)) / 1000.0,
    }
}

/// Any step kind with syntactically valid ids. Only parsing is exercised, so
/// the names need not resolve.
pub fn gen_any_step(rng: &mut ChaCha8Rng) -> Step {
    match rng.random_range(0..12) {
        0 => Step::TransferTitle {
            source: ident(rng, "s").into(),
            to: random_sref(rng),
            level: rng.random_range(1..=6),
            bindings: random_bindings(rng),
        },
        1 => Step::ChangeTitleLevel {
            source: ident(rng, "s").into(),
            level: rng.random_range(1..=6),
            bindings: random_bindings(rng),
        },
        2 => Step::AbandonTitle {
            source: ident(rng, "s").into(),
        },
        3 => {
            let custom = rng.random_bool(0.3);
            let kind = if custom {
                SourceType::Custom("band".into())
            } else {
                SourceType::BUILTIN.choose(rng).unwrap().clone()
            };
            let mut source = Source::new(ident(rng, "n"), kind);
            if rng.random_bool(0.4) {
                source = source.with_costs(
                    Costs::default().with(CostCategory::OperationalCosts, random_real(rng)),
                );
            }
            if rng.random_bool(0.3) {
                source = source.with_advantage(AdvantageFlags::ALL);
            }
            if rng.random_bool(0.3) {
                source = source.critical_for(ident(rng, "U"));
            }
            Step::AcquireSource {
                source,
                level: rng.random_range(1..=6),
                bindings: random_bindings(rng),
                into: random_sref(rng),
            }
        }
        4 => Step::MoveService {
            service: ident(rng, "svc").into(),
            to: random_sref(rng),
        },
        5 => Step::CreateUnit {
            unit: ident(rng, "G").into(),
        },
        6 => Step::CreateSubunit {
            subunit: ident(rng, "g").into(),
            unit: ident(rng, "U").into(),
        },
        7 => Step::DissolveSubunit {
            target: random_sref(rng),
        },
        8 => Step::DissolveUnit {
            unit: ident(rng, "U").into(),
        },
        9 => {
            let kind = *ContractKind::ALL.choose(rng).unwrap();
            let covered: BTreeSet<_> = (0..rng
                .random_range(usize::from(kind == ContractKind::TargetServiceProvision)..=3))
                .map(|_| ident(rng, "svc").into())
                .collect();
            Step::SignContract {
                contract: Contract {
                    id: ident(rng, "k").into(),
                    kind,
                    parties: (ident(rng, "U").into(), ident(rng, "V").into()),
                    covered_services: covered,
                    expiry: rng.random_bool(0.5).then(|| rng.random_range(0..500)),
                },
            }
        }
        10 => Step::TerminateContract {
            contract: ident(rng, "k").into(),
        },
        _ => Step::FinancialTransfer {
            payer: ident(rng, "U").into(),
            payee: ident(rng, "V").into(),
            amount: random_real(rng),
        },
    }
}

fn gen_guard(rng: &mut ChaCha8Rng) -> Guard {
    match rng.random_range(0..3) {
        0 => {
            let (kind, prefix) = *[
                (EntityKind::Unit, "U"),
                (EntityKind::Subunit, "b"),
                (EntityKind::Source, "s"),
                (EntityKind::Title, "s"),
                (EntityKind::Service, "svc"),
                (EntityKind::Contract, "k"),
            ]
            .choose(rng)
            .unwrap();
            Guard::Exists {
                kind,
                id: ident(rng, prefix),
            }
        }
        1 => Guard::TitleAtLevel {
            source: ident(rng, "s").into(),
            level: rng.random_range(1..=8),
        },
        _ => Guard::ContractPresent {
            contract: ident(rng, "k").into(),
        },
    }
}

/// A plan exercising every step kind and guard form.
pub fn gen_plan(rng: &mut ChaCha8Rng) -> Plan {
    let mut scope = TransformationScope::new(
        ident(rng, "U"),
        ident(rng, "b"),
        (0..rng.random_range(0..4)).map(|_| SourceId::new(ident(rng, "s"))),
    );
    if rng.random_bool(0.7) {
        scope = scope.with_insourcer(ident(rng, "V"), ident(rng, "y"));
    }
    let threads = (0..rng.random_range(1..=3))
        .map(|t| Thread {
            name: format!("th{t}"),
            steps: (0..rng.random_range(1..=5))
                .map(|_| GuardedStep {
                    guard: rng.random_bool(0.3).then(|| gen_guard(rng)),
                    step: gen_any_step(rng),
                })
                .collect(),
        })
        .collect();
    Plan {
        id: ident(rng, "plan_"),
        equilibrium: rng
            .random_bool(0.5)
            .then(|| format!("{}.meq", ident(rng, "eq"))),
        scope,
        threads,
    }
}
