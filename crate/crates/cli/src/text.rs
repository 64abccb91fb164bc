//! Human-readable renderings.

use std::fmt::Write;

use sourcing_core::canonical::round_sig12;
use sourcing_core::model::Consumer;
use sourcing_core::plan::{ExecutionState, Outcome};
use sourcing_core::transform::{EdgeRef, TransformationReport};
use sourcing_core::valuation::{CostBreakdown, ServiceDegrees};
use sourcing_core::{CostCategory, SourceType, UnitId};

pub struct DegreeRow {
    pub kind: SourceType,
    pub abs: Option<f64>,
    /// Outer `None` when no benchmark was given.
    pub rel: Option<Option<f64>>,
}

fn num(x: f64) -> String {
    format!("{}", round_sig12(x))
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "n/a".to_owned(), num)
}

fn list<T: ToString>(items: impl IntoIterator<Item = T>) -> String {
    let v: Vec<String> = items.into_iter().map(|i| i.to_string()).collect();
    if v.is_empty() {
        "-".to_owned()
    } else {
        v.join(", ")
    }
}

fn edge(e: &EdgeRef) -> String {
    let to = match &e.consumer {
        Consumer::Unit(u) => u.to_string(),
        Consumer::Subunit(s) => s.to_string(),
        Consumer::External => "external".to_owned(),
    };
    format!("{}->{to}", e.service)
}

fn table(rows: &[Vec<String>]) -> String {
    let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..cols)
        .map(|c| {
            rows.iter()
                .filter_map(|r| r.get(c))
                .map(|s| s.chars().count())
                .max()
                .unwrap_or(0)
        })
        .collect();
    let mut out = String::new();
    for r in rows {
        let cells: Vec<String> = r
            .iter()
            .zip(&widths)
            .map(|(s, w)| format!("{s:<w$}"))
            .collect();
        out.push_str(cells.join("  ").trim_end());
        out.push('\n');
    }
    out
}

pub fn report(r: &TransformationReport) -> String {
    let s = &r.scope;
    let post = &r.postcondition;
    let mut rows = vec![
        vec!["classification".into(), r.classification.to_string()],
        vec![
            "outsourcer".into(),
            format!("{}.{}", s.outsourcer, s.outsourcing_subunit),
        ],
    ];
    if let Some(x) = &s.insourcer {
        let y = s
            .insourcing_subunit
            .as_ref()
            .map(|y| format!(".{y}"))
            .unwrap_or_default();
        rows.push(vec!["insourcer".into(), format!("{x}{y}")]);
    }
    if let Some(u) = &r.insourcing_for {
        rows.push(vec!["insourcing for".into(), u.to_string()]);
    }
    rows.push(vec!["scope sources".into(), list(&s.sources)]);
    rows.push(vec![
        "precondition".into(),
        if r.precondition.passed {
            "pass".into()
        } else {
            format!("fail ({})", list(&r.precondition.violating))
        },
    ]);
    let w = &post.weight_decrease;
    rows.push(vec![
        "weight decrease".into(),
        format!(
            "{} ({} -> {}, bound {})",
            pass(w.passed),
            num(w.before),
            num(w.after),
            num(w.bound)
        ),
    ]);
    let g = &post.insourcer_growth;
    rows.push(vec![
        "insourcer growth".into(),
        format!(
            "{} ({} -> {})",
            pass(g.passed),
            num(g.baseline),
            num(g.after)
        ),
    ]);
    let f = &post.financial;
    rows.push(vec![
        "financial".into(),
        format!(
            "outsourcer {} -> {}, insourcer {} -> {}",
            num(f.outsourcer_before),
            num(f.outsourcer_after),
            num(f.insourcer_before),
            num(f.insourcer_after)
        ),
    ]);
    rows.push(vec!["subunit share".into(), opt(post.subunit_share)]);
    let p = &r.partition;
    rows.push(vec![
        "properly outsourced".into(),
        list(&p.properly_outsourced),
    ]);
    rows.push(vec!["unsourced".into(), list(&p.unsourced)]);
    rows.push(vec!["acquired".into(), list(&p.acquired)]);
    rows.push(vec!["retained".into(), list(&p.retained)]);
    if let Some(pf) = &r.portfolio {
        rows.push(vec![
            "portfolio".into(),
            format!(
                "{} (transferred {}; missing {}; extra {})",
                pass(pf.passed),
                list(&pf.transferred),
                list(pf.missing.iter().map(edge)),
                list(pf.extra.iter().map(edge))
            ),
        ]);
    }
    rows.push(vec![
        "reversibility".into(),
        format!("{:?}", r.reversibility),
    ]);
    let d = &r.dimensions;
    for t in &d.title_shift {
        rows.push(vec![
            format!("title weight {}", t.unit),
            format!(
                "{} -> {} ({:+})",
                num(t.before),
                num(t.after),
                round_sig12(t.delta)
            ),
        ]);
    }
    let c = &d.contractual;
    rows.push(vec![
        "contracts".into(),
        format!(
            "signed {}; terminated {}; amended {}",
            list(&c.signed),
            list(&c.terminated),
            list(&c.amended)
        ),
    ]);
    let o = &d.operational;
    rows.push(vec![
        "service edges".into(),
        format!(
            "rerouted {}; added {}; removed {}; resized {}",
            list(o.rerouted.iter().map(edge)),
            list(o.added.iter().map(edge)),
            list(o.removed.iter().map(edge)),
            list(o.resized.iter().map(edge))
        ),
    ]);
    let a = &d.competitive_advantage;
    rows.push(vec![
        "advantage fraction".into(),
        format!("{} -> {}", opt(a.before), opt(a.after)),
    ]);
    table(&rows)
}

fn pass(b: bool) -> &'static str {
    if b {
        "pass"
    } else {
        "fail"
    }
}

pub fn metrics(
    unit: &UnitId,
    costs: &[(String, CostBreakdown)],
    degrees: &[DegreeRow],
    services: Option<&ServiceDegrees>,
) -> String {
    let mut out = format!("unit {unit}\n\ncosts\n");
    let mut header = vec!["subunit".to_owned()];
    header.extend(CostCategory::ALL.iter().map(|c| c.keyword().to_owned()));
    header.push("total".into());
    let mut rows = vec![header];
    for (sub, c) in costs {
        let mut row = vec![sub.clone()];
        row.extend(CostCategory::ALL.iter().map(|cat| num(c.costs.get(*cat))));
        row.push(num(c.total));
        rows.push(row);
    }
    out.push_str(&table(&rows));

    out.push_str("\ninternal degree\n");
    let with_rel = degrees.iter().any(|d| d.rel.is_some());
    let mut header = vec!["type".to_owned(), "abs".to_owned()];
    if with_rel {
        header.push("rel".into());
    }
    let mut rows = vec![header];
    for d in degrees {
        let mut row = vec![d.kind.to_string(), opt(d.abs)];
        if let Some(rel) = d.rel {
            row.push(opt(rel));
        }
        rows.push(row);
    }
    out.push_str(&table(&rows));

    out.push_str("\nservice provision\n");
    let row = match services {
        Some(s) => vec![
            num(s.internal_volume),
            num(s.external_volume),
            num(s.degree_internal),
        ],
        None => vec!["n/a".into(); 3],
    };
    out.push_str(&table(&[
        vec!["internal".into(), "external".into(), "degree".into()],
        row,
    ]));
    out
}

pub fn trace(state: &ExecutionState) -> String {
    let mut out = String::new();
    for t in &state.trace {
        let outcome = match &t.outcome {
            Outcome::Applied => "applied".to_owned(),
            Outcome::Failed { reason } => format!("failed: {reason}"),
        };
        let _ = writeln!(
            out,
            "{:>3}  {}#{}  t={}  {}  {}",
            t.turn, t.thread, t.index, t.logical_time, t.step, outcome
        );
    }
    let _ = write!(out, "{}", state.status);
    if let Some(h) = &state.halt {
        let _ = write!(out, ": {h}");
    }
    out.push('\n');
    out
}
