mod common;

use proptest::prelude::*;
use rand::Rng;
use rand_distr::{Distribution, Geometric, Zeta};

use common::*;
use sourcing_core::fixtures::{scn1_after, scn1_before};
use sourcing_core::model::{Consumer, ServiceEdge};
use sourcing_core::netdyn::{
    evolve, evolve_with_state, fit_powerlaw, loglog_residual, powerlaw_alpha, seed_population,
    to_network, EdgeLabel, NetError, Policy, PolicyKind, TransformationMix,
};
use sourcing_core::transform::apply_progression;
use sourcing_core::{validate_equilibrium, SourcingEquilibrium, UnitId, WeightTable};

fn table() -> WeightTable {
    WeightTable::standard()
}

#[test]
fn one_unit_with_internal_services_has_no_edges() {
    let mut eq = SourcingEquilibrium::new();
    eq.insert_unit(sourcing_core::model::Unit::new("A"))
        .unwrap();
    eq.insert_subunit(&"A".into(), "B", "").unwrap();
    eq.insert_subunit(&"A".into(), "C", "").unwrap();
    eq.insert_service(ServiceEdge::new(
        "s",
        "B",
        Consumer::Subunit("C".into()),
        3.0,
    ))
    .unwrap();
    eq.insert_service(ServiceEdge::new("s", "B", Consumer::Unit("A".into()), 1.0))
        .unwrap();
    let net = to_network(&eq, &table());
    assert_eq!(net.nodes.len(), 1);
    assert!(net.edges.is_empty());
}

#[test]
fn scn1_after_network() {
    let net = to_network(&scn1_after(), &table());
    assert_eq!(
        net.nodes.keys().map(|u| u.as_str()).collect::<Vec<_>>(),
        vec!["A", "C", "X"]
    );
    let edges: Vec<_> = net
        .edges
        .iter()
        .map(|e| (e.from.as_str(), e.to.as_str(), e.label.clone(), e.volume))
        .collect();
    assert_eq!(
        edges,
        vec![
            ("X", "A", EdgeLabel::Service("svc_desktop".into()), 10.0),
            ("X", "A", EdgeLabel::Money, 100.0),
        ]
    );
    // p1 at 8 is -7 for A and +7 for X; h1 leased back at 3 is +1 and -1
    assert_eq!(net.nodes[&UnitId::new("A")], 8.0);
    assert_eq!(net.nodes[&UnitId::new("X")], 8.0);
    assert_eq!(net, to_network(&scn1_after(), &table()));
    net.check().unwrap();
    assert!(to_network(&scn1_before(), &table()).edges.is_empty());
}

#[test]
fn evolve_step_bounds() {
    let eq = seed_population(2, 2);
    let policy = Policy::new(PolicyKind::UniformRandom, 1);
    assert_eq!(evolve(&eq, &policy, 0, 1), Err(NetError::NoSteps));
    assert_eq!(evolve(&eq, &policy, 1, 0), Err(NetError::NoCheckpoint));
    let stats = evolve(&eq, &policy, 1, 1).unwrap();
    assert_eq!(stats.checkpoints.len(), 1);
    assert_eq!(stats.last().classifications.values().sum::<u64>(), 1);
}

#[test]
fn nothing_to_transfer_exhausts_the_policy() {
    let mut eq = seed_population(3, 1);
    eq.titles.clear();
    let policy = Policy::new(PolicyKind::UniformRandom, 1);
    assert!(matches!(
        evolve(&eq, &policy, 5, 5),
        Err(NetError::PolicyExhausted(_))
    ));
}

#[test]
fn mix_must_sum_to_one() {
    let bad = TransformationMix {
        outsource: 0.5,
        greenfield: 0.2,
        follow_up: 0.2,
    };
    assert!(Policy::new(PolicyKind::UniformRandom, 0)
        .with_mix(bad)
        .is_err());
    assert_eq!(
        "preferential:1.5".parse::<PolicyKind>().unwrap(),
        PolicyKind::PreferentialAttachment(1.5)
    );
    assert!("preferential:-1".parse::<PolicyKind>().is_err());
    assert!("zipf".parse::<PolicyKind>().is_err());
}

#[test]
fn evolution_is_reproducible_and_consistent() {
    let eq = seed_population(30, 3);
    for kind in [
        PolicyKind::UniformRandom,
        PolicyKind::PreferentialAttachment(1.0),
        PolicyKind::WeightAssortative,
    ] {
        let policy = Policy::new(kind, 9);
        let (a, end) = evolve_with_state(&eq, &policy, 120, 40).unwrap();
        let b = evolve(&eq, &policy, 120, 40).unwrap();
        assert_eq!(a, b);
        assert!(validate_equilibrium(&end).is_valid());
        assert_eq!(
            a.checkpoints.iter().map(|c| c.step).collect::<Vec<_>>(),
            vec![40, 80, 120]
        );
        for cp in &a.checkpoints {
            assert_eq!(
                cp.in_degree_histogram.values().sum::<u64>() as usize,
                cp.nodes
            );
            assert_eq!(
                cp.out_degree_histogram.values().sum::<u64>() as usize,
                cp.nodes
            );
            let weighted: u64 = cp.in_degree_histogram.iter().map(|(k, n)| k * n).sum();
            assert_eq!(weighted as usize, cp.edges);
            assert_eq!(cp.node_weights.len(), cp.nodes);
            assert_eq!(cp.classifications.values().sum::<u64>() as usize, cp.step);
        }
        // greenfield events add units; nothing removes them
        let net = to_network(&end, &table());
        assert!(net.nodes.len() >= 30);
        net.check().unwrap();
    }
}

#[test]
fn csv_has_one_row_per_checkpoint() {
    let stats = evolve(
        &seed_population(10, 2),
        &Policy::new(PolicyKind::UniformRandom, 3),
        30,
        10,
    )
    .unwrap();
    let csv = stats.to_csv();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 4);
    let width = lines[0].split(',').count();
    assert!(lines.iter().all(|l| l.split(',').count() == width));
}

#[test]
fn alpha_by_hand() {
    // kmin 2: ten 2s and ten 4s, x0 = 1.5
    let mut d = vec![2u64; 10];
    d.extend([4u64; 10]);
    let s = 10.0 * (2.0f64 / 1.5).ln() + 10.0 * (4.0f64 / 1.5).ln();
    assert!((powerlaw_alpha(&d, 2).unwrap() - (1.0 + 20.0 / s)).abs() < 1e-12);
    assert_eq!(powerlaw_alpha(&[5; 30], 5), Err(NetError::NotPowerLaw));
}

fn zeta_sample(alpha: f64, n: usize, seed: u64) -> Vec<u64> {
    let z = Zeta::new(alpha).unwrap();
    let mut rng = rng(seed);
    (0..n).map(|_| z.sample(&mut rng) as u64).collect()
}

#[test]
fn geometric_tails_fit_worse_than_power_laws() {
    let power = zeta_sample(2.5, 10_000, 7);
    let geo = Geometric::new(0.3).unwrap();
    let mut r = rng(8);
    let curved: Vec<u64> = (0..10_000).map(|_| geo.sample(&mut r) + 1).collect();
    let rp = loglog_residual(&power, 1).unwrap();
    let rg = loglog_residual(&curved, 1).unwrap();
    assert!(rg > 2.0 * rp, "power {rp}, geometric {rg}");
    let fit = fit_powerlaw(&power).unwrap();
    assert!(fit.kmin >= 1 && fit.alpha > 1.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn pure_transfers_conserve_service_volume(seed in any::<u64>()) {
        let mut rng = rng(seed);
        let (eq, scope) = gen_outsourcing_setting(&mut rng);
        if let Some(prog) = gen_pure_transfer(&mut rng, &eq, &scope, 6) {
            let (after, _) = apply_progression(&eq, &prog).unwrap();
            let volume = |e: &SourcingEquilibrium| e.service_edges.values().map(|x| x.volume).sum::<f64>();
            prop_assert_eq!(volume(&eq), volume(&after));
            prop_assert_eq!(
                to_network(&eq, &table()).nodes.len(),
                to_network(&after, &table()).nodes.len()
            );
        }
    }

    #[test]
    fn networks_are_well_formed(seed in any::<u64>()) {
        let eq = gen_equilibrium(&mut rng(seed), EqShape::FULL);
        let t = table().with_defaults_for(&eq);
        let net = to_network(&eq, &t);
        prop_assert!(net.check().is_ok());
        prop_assert_eq!(net.nodes.len(), eq.units.len());
        prop_assert!(net.edges.len() <= eq.service_edges.len() + eq.money_edges.len());
    }

    #[test]
    fn alpha_is_above_one(seed in any::<u64>(), kmin in 1u64..4) {
        let mut rng = rng(seed);
        let d: Vec<u64> = (0..50).map(|_| rng.random_range(1..40)).collect();
        match powerlaw_alpha(&d, kmin) {
            Ok(a) => prop_assert!(a > 1.0),
            Err(NetError::InsufficientData { .. }) | Err(NetError::NotPowerLaw) => {}
            Err(e) => prop_assert!(false, "{e}"),
        }
    }
}
