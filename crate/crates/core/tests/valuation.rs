mod common;

use proptest::prelude::*;

use common::*;
use sourcing_core::fixtures::{scn1_after, scn1_before};
use sourcing_core::model::{AdvantageFlags, Consumer, CostCategory, ServiceEdge, Source};
use sourcing_core::scale::{builtin_scales, personnel_scale, tools_scale};
use sourcing_core::valuation::{
    cost_estimate, degree_internal_abs, degree_internal_rel, is_internal, portfolio_weight,
    service_provision_degrees, sustainable_advantage, Benchmark, BenchmarkEntry, ValuationError,
    WeightMode,
};
use sourcing_core::{SourceId, SourceType, SourcingEquilibrium, TitleRecord, UnitId, WeightTable};

fn table() -> WeightTable {
    WeightTable::standard()
}

fn u(s: &str) -> UnitId {
    UnitId::new(s)
}

#[test]
fn default_table_enumerated() {
    // w(r) = n + 1 - 2r, written out per scale size
    let personnel = [7.0, 5.0, 3.0, 1.0, -1.0, -3.0, -5.0, -7.0];
    let six = [5.0, 3.0, 1.0, -1.0, -3.0, -5.0];
    let t = table();
    for (r, w) in personnel.iter().enumerate() {
        assert_eq!(t.weight(personnel_scale(), r as u32 + 1).unwrap(), *w);
    }
    for scale in builtin_scales().into_iter().skip(1) {
        for (r, w) in six.iter().enumerate() {
            assert_eq!(t.weight(scale, r as u32 + 1).unwrap(), *w);
        }
    }
}

#[test]
fn signed_weight_examples() {
    let t = table();
    let title = |level| TitleRecord::new("s", level, "A", "B").with_insourcer("X");
    assert_eq!(
        t.signed_weight(&u("A"), &title(1), personnel_scale())
            .unwrap(),
        7.0
    );
    assert_eq!(
        t.signed_weight(&u("A"), &title(8), personnel_scale())
            .unwrap(),
        -7.0
    );
    assert_eq!(
        t.signed_weight(&u("X"), &title(8), personnel_scale())
            .unwrap(),
        7.0
    );
    assert_eq!(
        t.signed_weight(&u("A"), &title(3), tools_scale()).unwrap(),
        1.0
    );
}

#[test]
fn zero_sum_on_builtin_scales() {
    let t = table();
    for scale in builtin_scales() {
        for level in 1..=scale.len() {
            let title = TitleRecord::new("s", level, "A", "B").with_insourcer("X");
            let sum = t.signed_weight(&u("A"), &title, scale).unwrap()
                + t.signed_weight(&u("X"), &title, scale).unwrap();
            assert_eq!(sum, 0.0);
        }
    }
}

#[test]
fn empty_scope_weighs_nothing() {
    let none: [SourceId; 0] = [];
    assert_eq!(
        portfolio_weight(&u("A"), &none, &scn1_before(), &table(), WeightMode::All).unwrap(),
        0.0
    );
}

#[test]
fn financial_sources_leave_non_financial_weight() {
    let mut eq = scn1_before();
    eq.insert_source(Source::new("cash", SourceType::Finance))
        .unwrap();
    eq.insert_title(TitleRecord::new("cash", 1, "A", "B"))
        .unwrap();
    let all: Vec<SourceId> = eq.sources.keys().cloned().collect();
    let w = |mode| portfolio_weight(&u("A"), &all, &eq, &table(), mode).unwrap();
    assert_eq!(w(WeightMode::All), 20.0);
    assert_eq!(w(WeightMode::NonFinancial), 15.0);
    assert_eq!(w(WeightMode::FinancialOnly), 5.0);
}

#[test]
fn cost_of_an_idle_subunit_is_zero() {
    let c = cost_estimate(&"Ops".into(), &scn1_before()).unwrap();
    assert_eq!(c.total, 0.0);
    assert!(c.costs.iter().all(|(_, v)| v == 0.0));
    assert!(matches!(
        cost_estimate(&"nope".into(), &scn1_before()),
        Err(ValuationError::UnknownSubunit(_))
    ));
}

#[test]
fn scn1_costs_by_category() {
    let before = cost_estimate(&"B".into(), &scn1_before()).unwrap();
    // flat oracle: 50 + (20 + 5) + 10
    assert_eq!(before.total, 50.0 + 20.0 + 5.0 + 10.0);
    assert_eq!(before.costs.get(CostCategory::Personnel), 50.0);
    assert_eq!(before.costs.get(CostCategory::CapitalOwned), 20.0);
    assert_eq!(before.costs.get(CostCategory::LeaseRentLicense), 10.0);

    // after: p1 and l1 are gone from B, h1 is leased back
    let after = cost_estimate(&"B".into(), &scn1_after()).unwrap();
    assert_eq!(after.costs.get(CostCategory::CapitalOwned), 0.0);
    assert_eq!(after.costs.get(CostCategory::Personnel), 0.0);
    assert_eq!(after.costs.get(CostCategory::LeaseRentLicense), 20.0);
    assert_eq!(after.costs.get(CostCategory::OperationalCosts), 5.0);
    assert_eq!(after.total, 25.0);
}

#[test]
fn is_internal_examples() {
    let t = table();
    assert!(is_internal(&"p1".into(), &u("A"), &scn1_before(), &t).unwrap());
    assert!(!is_internal(&"p1".into(), &u("A"), &scn1_after(), &t).unwrap());
    // h1 after: no other unit consumes what B provides
    assert!(is_internal(&"h1".into(), &u("A"), &scn1_after(), &t).unwrap());
    assert!(matches!(
        is_internal(&"l1".into(), &u("A"), &scn1_after(), &t),
        Err(ValuationError::Untitled(_))
    ));
}

#[test]
fn heavier_consumer_makes_a_source_external() {
    // p1 at personnel level 4: A rank 4 (+1), X rank 5 (-1); then X consumes B's service
    let mut eq = scn1_before();
    let mut title = eq.titles["p1"].clone();
    title.level = 4;
    title.insourcer_side = Some(u("X"));
    eq.titles.insert("p1".into(), title.clone());
    eq.insert_service(ServiceEdge::new("svc_x", "B", Consumer::Unit(u("X")), 1.0))
        .unwrap();
    assert!(is_internal(&"p1".into(), &u("A"), &eq, &table()).unwrap());
    // at level 3 with C's title weight unknown to X, A still holds more
    title.level = 2;
    eq.titles.insert("p1".into(), title);
    assert!(is_internal(&"p1".into(), &u("A"), &eq, &table()).unwrap());
    // a table where X's side outweighs A's at the same title
    let mut skewed = table();
    let ws = skewed.scales.get_mut("personnel").unwrap();
    ws.insert(2, 0.5);
    ws.insert(7, -0.25);
    assert!(is_internal(&"p1".into(), &u("A"), &eq, &skewed).unwrap());
}

#[test]
fn degree_examples() {
    let t = table();
    assert_eq!(
        degree_internal_abs(&u("A"), &SourceType::Persons, &scn1_before(), &t).unwrap(),
        1.0
    );
    assert_eq!(
        degree_internal_abs(&u("A"), &SourceType::Persons, &scn1_after(), &t).unwrap(),
        0.0
    );
    assert!(matches!(
        degree_internal_abs(&u("A"), &SourceType::Vehicles, &scn1_before(), &t),
        Err(ValuationError::NoSourcesOfType { .. })
    ));
}

fn bench(external: f64) -> Benchmark {
    Benchmark {
        entries: vec![BenchmarkEntry {
            source_type: SourceType::Persons,
            segment: "all".into(),
            external,
        }],
    }
}

/// Persons at levels chosen so that A's internal share by weight is the
/// requested fraction.
fn persons_with_levels(levels: &[u32]) -> SourcingEquilibrium {
    let mut eq = scn1_before();
    for (i, l) in levels.iter().enumerate() {
        let id = format!("q{i}");
        eq.insert_source(Source::new(id.as_str(), SourceType::Persons))
            .unwrap();
        let title = if *l <= 4 {
            TitleRecord::new(id.as_str(), *l, "A", "B").with_insourcer("X")
        } else {
            TitleRecord::new(id.as_str(), *l, "A", "Y").with_insourcer("X")
        };
        let title = if [3, 6].contains(l) {
            title.with_third_party("C")
        } else {
            title
        };
        eq.insert_title(title).unwrap();
    }
    eq.titles.remove("p1");
    eq
}

#[test]
fn relative_degree_examples() {
    let t = table();
    let a = u("A");
    let p = SourceType::Persons;
    let all_internal = scn1_before();
    assert_eq!(
        degree_internal_rel(&a, &p, &all_internal, &t, &bench(0.0), "all").unwrap(),
        1.0
    );

    // q0 level 1 (+7 internal), q1 level 8 (-7 external): abs 0.5
    let half = persons_with_levels(&[1, 8]);
    assert_eq!(degree_internal_abs(&a, &p, &half, &t).unwrap(), 0.5);
    assert_eq!(
        degree_internal_rel(&a, &p, &half, &t, &bench(0.5), "all").unwrap(),
        1.0
    );

    // q0 level 4 (+1 internal), q1 level 6 (-3 external): abs 0.25
    let quarter = persons_with_levels(&[4, 6]);
    assert_eq!(degree_internal_abs(&a, &p, &quarter, &t).unwrap(), 0.25);
    assert_eq!(
        degree_internal_rel(&a, &p, &quarter, &t, &bench(0.5), "all").unwrap(),
        0.5
    );

    assert!(matches!(
        degree_internal_rel(&a, &p, &half, &t, &bench(0.5), "retail"),
        Err(ValuationError::MissingBenchmark { .. })
    ));
}

#[test]
fn service_degree_examples() {
    let a = u("A");
    let d = service_provision_degrees(&a, &scn1_before()).unwrap();
    assert_eq!(
        (d.internal_volume, d.external_volume, d.degree_internal),
        (10.0, 0.0, 1.0)
    );

    let mut eq = scn1_before();
    eq.insert_service(ServiceEdge::new(
        "svc_desktop",
        "B",
        Consumer::External,
        10.0,
    ))
    .unwrap();
    assert_eq!(
        service_provision_degrees(&a, &eq).unwrap().degree_internal,
        0.5
    );

    let after = scn1_after();
    let dx = service_provision_degrees(&u("X"), &after).unwrap();
    assert_eq!((dx.internal_volume, dx.external_volume), (0.0, 10.0));
    assert!(matches!(
        service_provision_degrees(&a, &after),
        Err(ValuationError::NoServices(_))
    ));
}

#[test]
fn advantage_needs_all_four_flags() {
    let all = Source::new("s", SourceType::Knowledge).with_advantage(AdvantageFlags::ALL);
    assert!(sustainable_advantage(&all));
    for i in 0..4 {
        let mut f = AdvantageFlags::ALL;
        match i {
            0 => f.valuable = false,
            1 => f.rare = false,
            2 => f.inimitable = false,
            _ => f.non_substitutable = false,
        }
        assert!(!sustainable_advantage(
            &Source::new("s", SourceType::Knowledge).with_advantage(f)
        ));
    }
    assert!(!sustainable_advantage(&Source::new(
        "s",
        SourceType::Knowledge
    )));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cost_total_is_the_flat_sum(seed in any::<u64>()) {
        let eq = gen_equilibrium(&mut rng(seed), EqShape::FULL);
        for sub in eq.subunits.keys() {
            let c = cost_estimate(sub, &eq).unwrap();
            let flat: f64 = eq
                .titles
                .values()
                .filter(|t| &t.using_subunit == sub)
                .map(|t| eq.sources[&t.source].costs.total())
                .sum();
            prop_assert!((c.total - flat).abs() < 1e-9);
            prop_assert!((c.costs.total() - c.total).abs() < 1e-9);
        }
    }

    #[test]
    fn degrees_stay_in_unit_interval(seed in any::<u64>()) {
        let eq = gen_equilibrium(&mut rng(seed), EqShape::FULL);
        let t = table().with_defaults_for(&eq);
        for unit in eq.units.keys() {
            for kind in SourceType::BUILTIN {
                match degree_internal_abs(unit, &kind, &eq, &t) {
                    Ok(d) => prop_assert!((0.0..=1.0).contains(&d)),
                    Err(ValuationError::NoSourcesOfType { .. }) => {}
                    Err(e) => prop_assert!(false, "{e}"),
                }
            }
        }
    }

    #[test]
    fn lowering_a_level_never_lowers_the_weight(seed in any::<u64>()) {
        let eq = gen_equilibrium(&mut rng(seed), EqShape::FULL);
        let t = table().with_defaults_for(&eq);
        for title in eq.titles.values() {
            let scale = eq.scale_for_source(&title.source).unwrap();
            let a = &title.outsourcer_side;
            for level in 2..=scale.len() {
                let mut hi = title.clone();
                hi.level = level;
                let mut lo = title.clone();
                lo.level = level - 1;
                prop_assert!(t.signed_weight(a, &lo, scale).unwrap() >= t.signed_weight(a, &hi, scale).unwrap());
            }
        }
    }

    #[test]
    fn scaling_the_table_scales_the_portfolio(seed in any::<u64>(), factor in 0.01f64..100.0) {
        let eq = gen_equilibrium(&mut rng(seed), EqShape::FULL);
        let t = table().with_defaults_for(&eq);
        let all: Vec<SourceId> = eq.sources.keys().cloned().collect();
        for unit in eq.units.keys() {
            let w = portfolio_weight(unit, &all, &eq, &t, WeightMode::All).unwrap();
            let ws = portfolio_weight(unit, &all, &eq, &t.scaled(factor), WeightMode::All).unwrap();
            prop_assert!((ws - factor * w).abs() < 1e-9 * (1.0 + ws.abs()));
            for s in eq.titles.keys() {
                prop_assert_eq!(
                    is_internal(s, unit, &eq, &t).unwrap(),
                    is_internal(s, unit, &eq, &t.scaled(factor)).unwrap()
                );
            }
        }
    }
}
