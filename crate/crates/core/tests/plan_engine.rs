mod common;

use proptest::prelude::*;

use common::*;
use sourcing_core::canonical::to_canonical_json;
use sourcing_core::fixtures::{scn1_after, scn1_before, scn1_plan, scn1_scope};
use sourcing_core::model::EntityKind;
use sourcing_core::plan::{
    execute, interleavings_oracle, step_once, ExecutionState, Guard, GuardedStep, HaltReport,
    Outcome, Plan, PlanError, Status, Strategy, Thread, ORACLE_MAX_STEPS,
};
use sourcing_core::transform::{Bindings, Step, SubunitRef};
use sourcing_core::validate_equilibrium;

fn thread(name: &str, steps: Vec<GuardedStep>) -> Thread {
    Thread {
        name: name.into(),
        steps,
    }
}

fn plan(threads: Vec<Thread>) -> Plan {
    Plan {
        id: "p".into(),
        equilibrium: None,
        scope: scn1_scope(),
        threads,
    }
}

fn pay(amount: f64) -> GuardedStep {
    GuardedStep::new(Step::FinancialTransfer {
        payer: "X".into(),
        payee: "A".into(),
        amount,
    })
}

fn retitle(source: &str, level: u32) -> GuardedStep {
    GuardedStep::new(Step::ChangeTitleLevel {
        source: source.into(),
        level,
        bindings: Bindings::default(),
    })
}

fn never() -> Guard {
    Guard::Exists {
        kind: EntityKind::Unit,
        id: "nobody".into(),
    }
}

#[test]
fn single_thread_is_the_progression() {
    let (state, eq) = execute(&scn1_before(), &scn1_plan(), Strategy::RoundRobin);
    assert_eq!(state.status, Status::Completed);
    assert_eq!(state.trace.len(), 5);
    assert_eq!(to_canonical_json(&eq), to_canonical_json(&scn1_after()));
}

#[test]
fn disjoint_two_by_two_is_confluent() {
    let p = plan(vec![
        thread("a", vec![retitle("p1", 2), retitle("p1", 1)]),
        thread("b", vec![retitle("h1", 1), pay(5.0)]),
    ]);
    let oracle = interleavings_oracle(&scn1_before(), &p).unwrap();
    assert_eq!(oracle.completed.len(), 1);
    assert!(oracle.halted.is_empty());
    let (_, rr) = execute(&scn1_before(), &p, Strategy::RoundRobin);
    assert!(oracle.contains(&rr));
    for seed in 0..20 {
        let (s, e) = execute(&scn1_before(), &p, Strategy::SeededRandom(seed));
        assert_eq!(s.status, Status::Completed);
        assert_eq!(e, rr);
    }
}

#[test]
fn conflicting_retitles_give_two_outcomes() {
    let p = plan(vec![
        thread("a", vec![retitle("p1", 2)]),
        thread("b", vec![retitle("p1", 1)]),
    ]);
    let oracle = interleavings_oracle(&scn1_before(), &p).unwrap();
    assert_eq!(oracle.completed.len(), 2);
}

#[test]
fn single_thread_oracle_is_a_singleton() {
    let oracle = interleavings_oracle(&scn1_before(), &scn1_plan()).unwrap();
    assert_eq!(oracle.all().len(), 1);
    assert!(oracle.contains(&scn1_after()));
}

#[test]
fn oracle_refuses_large_plans() {
    let steps: Vec<GuardedStep> = (0..=ORACLE_MAX_STEPS)
        .map(|i| pay(1.0 + i as f64))
        .collect();
    assert_eq!(
        interleavings_oracle(&scn1_before(), &plan(vec![thread("t", steps)])),
        Err(PlanError::TooLarge {
            steps: ORACLE_MAX_STEPS + 1
        })
    );
}

#[test]
fn guard_that_never_holds_deadlocks_mid_thread() {
    let p = plan(vec![
        thread(
            "a",
            vec![pay(1.0), GuardedStep::when(never(), retitle("p1", 2).step)],
        ),
        thread(
            "b",
            vec![
                retitle("h1", 1),
                GuardedStep::when(never(), retitle("h1", 1).step),
            ],
        ),
    ]);
    let (state, eq) = execute(&scn1_before(), &p, Strategy::RoundRobin);
    assert_eq!(state.status, Status::Halted);
    assert_eq!(state.cursors, vec![1, 1]);
    assert_eq!(
        state.halt,
        Some(HaltReport::Deadlock {
            waiting: vec![("a".into(), 2), ("b".into(), 2)]
        })
    );
    assert!(validate_equilibrium(&eq).is_valid());
}

#[test]
fn guard_released_by_another_thread() {
    let make = Step::CreateUnit { unit: "N".into() };
    let waits = GuardedStep::when(
        Guard::Exists {
            kind: EntityKind::Unit,
            id: "N".into(),
        },
        Step::CreateSubunit {
            subunit: "M".into(),
            unit: "N".into(),
        },
    );
    let p = plan(vec![
        thread("w", vec![waits]),
        thread("m", vec![GuardedStep::new(make)]),
    ]);
    let (state, eq) = execute(&scn1_before(), &p, Strategy::RoundRobin);
    assert_eq!(state.status, Status::Completed);
    assert_eq!(state.trace[0].thread, "m");
    assert!(eq.subunits.contains_key("M"));
}

#[test]
fn failing_step_halts_on_the_last_consistent_snapshot() {
    let p = plan(vec![thread(
        "t",
        vec![
            pay(1.0),
            GuardedStep::new(Step::TransferTitle {
                source: "p1".into(),
                to: SubunitRef::new("X", "nowhere"),
                level: 8,
                bindings: Bindings::default(),
            }),
            pay(2.0),
        ],
    )]);
    let (state, eq) = execute(&scn1_before(), &p, Strategy::RoundRobin);
    assert_eq!(state.status, Status::Halted);
    assert!(matches!(
        state.halt,
        Some(HaltReport::StepFailed { index: 2, .. })
    ));
    assert!(matches!(state.trace[1].outcome, Outcome::Failed { .. }));
    assert_eq!(eq.logical_time, 1);
    assert!(validate_equilibrium(&eq).is_valid());
}

#[test]
fn malformed_plan_halts_immediately() {
    let p = plan(vec![thread("t", vec![]), thread("t", vec![pay(1.0)])]);
    let (state, eq) = execute(&scn1_before(), &p, Strategy::RoundRobin);
    assert_eq!(state.status, Status::Halted);
    assert!(matches!(state.halt, Some(HaltReport::InvalidPlan { .. })));
    assert_eq!(eq, scn1_before());
}

#[test]
fn step_once_lifecycle() {
    let p = scn1_plan();
    let start = ExecutionState::new(&p);
    assert_eq!(start.status, Status::Ahead);
    let (s1, _) = step_once(&start, &scn1_before(), &p, Strategy::RoundRobin).unwrap();
    assert_eq!(s1.status, Status::InProgress);
    assert_eq!(s1.trace.len(), 1);

    let mut paused = s1.clone();
    paused.interrupt();
    assert_eq!(paused.status, Status::Interrupted);
    paused.make_dormant();
    assert_eq!(paused.status, Status::Dormant);

    let (done, _) = execute(&scn1_before(), &p, Strategy::RoundRobin);
    assert_eq!(
        step_once(&done, &scn1_after(), &p, Strategy::RoundRobin),
        Err(PlanError::InvalidStatus(Status::Completed))
    );
}

fn drive(
    eq: &sourcing_core::SourcingEquilibrium,
    p: &Plan,
    strategy: Strategy,
) -> (ExecutionState, sourcing_core::SourcingEquilibrium) {
    let mut state = ExecutionState::new(p);
    let mut eq = eq.clone();
    let mut turns = 0;
    while !state.is_final() {
        if turns % 3 == 2 {
            // a pause between turns changes nothing
            state.make_dormant();
        }
        let (s, e) = step_once(&state, &eq, p, strategy).unwrap();
        state = s;
        eq = e;
        turns += 1;
    }
    (state, eq)
}

#[test]
fn stepping_equals_executing() {
    let mut rng = rng(21);
    for i in 0..60 {
        let (eq, scope) = gen_outsourcing_setting(&mut rng);
        let Some(p) = gen_disjoint_plan(&mut rng, &eq, &scope) else {
            continue;
        };
        for strategy in [Strategy::RoundRobin, Strategy::SeededRandom(i)] {
            let (s1, e1) = execute(&eq, &p, strategy);
            let (s2, e2) = drive(&eq, &p, strategy);
            assert_eq!(s1.trace, s2.trace);
            assert_eq!(s1.status, s2.status);
            assert_eq!(e1, e2);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn seeded_runs_are_reproducible(seed in any::<u64>(), s in any::<u64>()) {
        let mut rng = rng(seed);
        let eq = gen_equilibrium(&mut rng, EqShape::SMALL);
        let p = gen_plan(&mut rng);
        let a = execute(&eq, &p, Strategy::SeededRandom(s));
        let b = execute(&eq, &p, Strategy::SeededRandom(s));
        prop_assert_eq!(serde_json::to_string(&a.0).unwrap(), serde_json::to_string(&b.0).unwrap());
        prop_assert_eq!(to_canonical_json(&a.1), to_canonical_json(&b.1));
    }

    #[test]
    fn halts_leave_a_valid_snapshot(seed in any::<u64>()) {
        let mut rng = rng(seed);
        let eq = gen_equilibrium(&mut rng, EqShape::SMALL);
        let p = gen_plan(&mut rng);
        let (state, after) = execute(&eq, &p, Strategy::RoundRobin);
        prop_assert!(state.is_final());
        prop_assert!(validate_equilibrium(&after).is_valid());
        for (t, c) in p.threads.iter().zip(&state.cursors) {
            prop_assert!(*c <= t.steps.len());
        }
        prop_assert_eq!(state.status == Status::Completed, p.threads.iter().zip(&state.cursors).all(|(t, c)| *c == t.steps.len()) && p.check().is_ok());
    }

    #[test]
    fn engine_lands_inside_the_oracle(seed in any::<u64>(), s in any::<u64>()) {
        let mut rng = rng(seed);
        let eq = gen_equilibrium(&mut rng, EqShape::SMALL);
        let p = gen_plan(&mut rng);
        if let Ok(oracle) = interleavings_oracle(&eq, &p) {
            for strategy in [Strategy::RoundRobin, Strategy::SeededRandom(s)] {
                let (_, after) = execute(&eq, &p, strategy);
                prop_assert!(oracle.contains(&after));
            }
        }
    }
}
