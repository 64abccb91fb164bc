mod common;

use std::path::PathBuf;

use proptest::prelude::*;
use serde_json::Value;

use common::*;
use sourcing_core::canonical::to_canonical_json;
use sourcing_core::dsl::{
    export_json, parse_equilibrium, parse_plan, parse_plan_against, print_equilibrium, print_plan,
};
use sourcing_core::fixtures::{
    museum_before, museum_plan, scn1_after, scn1_before, scn1_plan, scn1_progression, MUSEUM_MEQ,
    MUSEUM_MPL, SCN1_MEQ, SCN1_MPL,
};
use sourcing_core::netdyn::{evolve, seed_population, Policy, PolicyKind};
use sourcing_core::plan::{execute, Strategy};
use sourcing_core::transform::{analyze, PostcondConfig};
use sourcing_core::{SourcingEquilibrium, WeightTable};

fn schema(name: &str) -> jsonschema::Validator {
    let path: PathBuf = [env!("CARGO_MANIFEST_DIR"), "..", "..", "schema", name]
        .iter()
        .collect();
    let text = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    let value: Value = serde_json::from_str(&text).unwrap();
    jsonschema::validator_for(&value).unwrap()
}

fn assert_valid(v: &jsonschema::Validator, text: &str) {
    let instance: Value = serde_json::from_str(text).unwrap();
    let errors: Vec<String> = v
        .iter_errors(&instance)
        .map(|e| format!("{} at {}", e, e.instance_path))
        .collect();
    assert!(errors.is_empty(), "{errors:#?}\n{text}");
}

#[test]
fn minimal_document() {
    let eq = parse_equilibrium("unit A { subunit B { } }").unwrap();
    assert_eq!(
        (eq.units.len(), eq.subunits.len(), eq.sources.len()),
        (1, 1, 0)
    );
}

#[test]
fn level_nine_is_out_of_range() {
    let text = "unit A {\n  subunit B {\n    source p1: persons level 9\n  }\n}\n";
    let d = parse_equilibrium(text).unwrap_err();
    assert_eq!(d[0].message, "level 9 out of range 1..8");
    assert_eq!(d[0].line, 3);
}

#[test]
fn documents_match_the_programmatic_fixtures() {
    assert_eq!(parse_equilibrium(SCN1_MEQ).unwrap(), scn1_before());
    assert_eq!(parse_plan(SCN1_MPL).unwrap(), scn1_plan());
    assert_eq!(
        parse_plan_against(SCN1_MPL, &scn1_before()).unwrap(),
        scn1_plan()
    );
    assert_eq!(parse_equilibrium(MUSEUM_MEQ).unwrap(), museum_before());
    assert_eq!(parse_plan(MUSEUM_MPL).unwrap(), museum_plan());
}

#[test]
fn plan_against_the_wrong_equilibrium_is_diagnosed() {
    let d = parse_plan_against(SCN1_MPL, &museum_before()).unwrap_err();
    assert!(!d.is_empty());
}

#[test]
fn printing_reaches_a_fixed_point() {
    let once = print_equilibrium(&parse_equilibrium(SCN1_MEQ).unwrap());
    let twice = print_equilibrium(&parse_equilibrium(&once).unwrap());
    assert_eq!(once, twice);
    assert_eq!(parse_equilibrium(&once).unwrap(), scn1_before());
    let p = print_plan(&scn1_plan());
    assert_eq!(parse_plan(&p).unwrap(), scn1_plan());
}

#[test]
fn empty_equilibrium_prints_and_exports_minimally() {
    let empty = SourcingEquilibrium::new();
    let text = print_equilibrium(&empty);
    assert_eq!(parse_equilibrium(&text).unwrap(), empty);
    let json = export_json(&empty);
    let v: Value = serde_json::from_str(&json).unwrap();
    for key in ["units", "subunits", "sources", "titles", "contracts"] {
        assert_eq!(v[key], serde_json::json!({}), "{key}");
    }
    assert_eq!(v["service_edges"], serde_json::json!([]));
    assert_eq!(v["logical_time"], 0);
    assert_valid(&schema("equilibrium.schema.json"), &json);
}

#[test]
fn export_is_byte_stable() {
    assert_eq!(export_json(&scn1_after()), export_json(&scn1_after()));
    let reparsed: SourcingEquilibrium = serde_json::from_str(&export_json(&scn1_after())).unwrap();
    assert_eq!(export_json(&reparsed), export_json(&scn1_after()));
}

#[test]
fn reals_carry_twelve_significant_digits() {
    let mut eq = scn1_before();
    eq.service_edges
        .values_mut()
        .for_each(|e| e.volume = 1.0 / 3.0);
    let json = export_json(&eq);
    assert!(json.contains("0.333333333333"), "{json}");
    assert!(!json.contains("0.3333333333333"));
}

#[test]
fn reports_traces_and_stats_match_their_schemas() {
    let r = analyze(
        &scn1_before(),
        &scn1_progression(),
        &scn1_after(),
        &[],
        &WeightTable::standard(),
        &PostcondConfig::default(),
    )
    .unwrap();
    assert_valid(&schema("report.schema.json"), &to_canonical_json(&r));

    let trace = schema("trace.schema.json");
    let (state, _) = execute(&scn1_before(), &scn1_plan(), Strategy::RoundRobin);
    for turn in &state.trace {
        assert_valid(&trace, &to_canonical_json(turn));
    }

    let stats = evolve(
        &seed_population(20, 2),
        &Policy::new(PolicyKind::PreferentialAttachment(1.0), 2),
        40,
        20,
    )
    .unwrap();
    assert_valid(&schema("stats.schema.json"), &to_canonical_json(&stats));
}

#[test]
fn schema_rejects_a_broken_equilibrium() {
    let mut v: Value = serde_json::from_str(&export_json(&scn1_before())).unwrap();
    v["titles"]["p1"]["level"] = serde_json::json!(0);
    assert!(!schema("equilibrium.schema.json").is_valid(&v));
}

#[test]
fn diagnostics_point_inside_the_offending_lexeme() {
    let docs = [
        "unit A { subunit B { source p1: persons level 9 } }",
        "unit A { subunit B { source p1: gadgets level 1 } }",
        "unit A { subunit B { } }\nservice s from A.Q to external volume 1",
        "unit A { subunit B { } }\nmoney from A to Z amount 3",
        "unit A {\n  subunit B { source p1: persons level 1 cost personnel=-4 }\n}",
        "unit A { subunit B { } } }",
        "unit 9A { }",
    ];
    for doc in docs {
        let diags = parse_equilibrium(doc).unwrap_err();
        let lines: Vec<&str> = doc.lines().collect();
        for d in diags {
            if d.token.is_empty() {
                continue;
            }
            let line = lines[d.line - 1];
            let at: String = line
                .chars()
                .skip(d.column - 1)
                .take(d.token.chars().count())
                .collect();
            assert_eq!(at, d.token, "{doc:?}: {d}");
        }
    }
}

#[test]
fn generated_equilibria_round_trip() {
    let mut rng = rng(41);
    let mut texts = std::collections::BTreeSet::new();
    for _ in 0..500 {
        let eq = gen_equilibrium(&mut rng, EqShape::FULL);
        let text = print_equilibrium(&eq);
        let back = parse_equilibrium(&text).unwrap_or_else(|d| panic!("{d:?}\n{text}"));
        assert_eq!(back, eq);
        texts.insert((text, to_canonical_json(&eq)));
    }
    // distinct values print distinctly
    let by_json: std::collections::BTreeSet<_> = texts.iter().map(|(_, j)| j).collect();
    let by_text: std::collections::BTreeSet<_> = texts.iter().map(|(t, _)| t).collect();
    assert_eq!(by_json.len(), by_text.len());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn generated_plans_round_trip(seed in any::<u64>()) {
        let p = gen_plan(&mut rng(seed));
        let text = print_plan(&p);
        prop_assert_eq!(parse_plan(&text).unwrap(), p);
    }

    #[test]
    fn exports_match_the_schema(seed in any::<u64>()) {
        let eq = gen_equilibrium(&mut rng(seed), EqShape::FULL);
        let instance: Value = serde_json::from_str(&export_json(&eq)).unwrap();
        prop_assert!(schema("equilibrium.schema.json").is_valid(&instance));
    }
}
