//! Printers producing documents the parser reads back to the same value.

use std::fmt::{self, Write};

use crate::ids::UnitId;
use crate::model::{
    AdvantageFlags, Consumer, Contract, Costs, Source, SourcingEquilibrium, TitleRecord,
};
use crate::plan::{Guard, Plan};
use crate::scale::Polarity;
use crate::transform::{Bindings, Step};

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

fn flags(f: &AdvantageFlags) -> String {
    let mut names = Vec::new();
    for (on, n) in [
        (f.valuable, "v"),
        (f.rare, "r"),
        (f.inimitable, "i"),
        (f.non_substitutable, "n"),
    ] {
        if on {
            names.push(n);
        }
    }
    names.join(",")
}

/// ` critical U flags .. cost ..`, each part only when set.
fn source_tail(out: &mut String, src: &Source) {
    if let Some(u) = &src.identity_critical_for {
        let _ = write!(out, " critical {u}");
    }
    if src.advantage.any() {
        let _ = write!(out, " flags {}", flags(&src.advantage));
    }
    cost_tail(out, &src.costs);
}

fn cost_tail(out: &mut String, costs: &Costs) {
    let set: Vec<_> = costs.iter().filter(|(_, v)| *v != 0.0).collect();
    if set.is_empty() {
        return;
    }
    out.push_str(" cost");
    for (cat, v) in set {
        let _ = write!(out, " {}={v}", cat.keyword());
    }
}

fn bindings_tail(out: &mut String, b: &Bindings) {
    if let Some(u) = &b.holder {
        let _ = write!(out, " holder {u}");
    }
    if let Some(u) = &b.counterparty {
        let _ = write!(out, " counterparty {u}");
    }
    if let Some(u) = &b.third_party {
        let _ = write!(out, " third-party {u}");
    }
}

fn contract_spec(c: &Contract) -> String {
    let mut s = format!(
        "{} kind {} between {},{}",
        c.id,
        c.kind.keyword(),
        c.parties.0,
        c.parties.1
    );
    if !c.covered_services.is_empty() {
        let list: Vec<_> = c.covered_services.iter().map(|s| s.as_str()).collect();
        let _ = write!(s, " covers {}", list.join(","));
    }
    if let Some(e) = c.expiry {
        let _ = write!(s, " expires {e}");
    }
    s
}

/// Title options relative to the enclosing unit, mirroring the parser's
/// defaults.
fn title_bindings(title: &TitleRecord, polarity: Polarity, unit: &UnitId) -> Bindings {
    match polarity {
        Polarity::Positive => Bindings {
            holder: (&title.outsourcer_side != unit).then(|| title.outsourcer_side.clone()),
            counterparty: title.insourcer_side.clone(),
            third_party: title.third_party.clone(),
        },
        Polarity::Negative => Bindings {
            holder: Some(title.outsourcer_side.clone()),
            counterparty: title.insourcer_side.clone().filter(|x| x != unit),
            third_party: title.third_party.clone(),
        },
    }
}

pub fn print_equilibrium(eq: &SourcingEquilibrium) -> String {
    let mut out = String::new();
    for scale in eq.custom_scales.values() {
        let _ = writeln!(
            out,
            "scale {} levels {} positive {}",
            scale.id,
            scale.len(),
            scale.positive_count
        );
    }
    if eq.logical_time != 0 {
        let _ = writeln!(out, "time {}", eq.logical_time);
    }
    if !out.is_empty() {
        out.push('\n');
    }

    for unit in eq.units.values() {
        let _ = write!(out, "unit {}", unit.id);
        if !unit.name.is_empty() {
            let _ = write!(out, " name: {}", quote(&unit.name));
        }
        if !unit.mission.is_empty() {
            let _ = write!(out, " identity: {}", quote(&unit.mission));
        }
        out.push_str(" {\n");
        for sid in &unit.subunits {
            let _ = write!(out, "  subunit {sid}");
            if let Some(name) = eq
                .subunits
                .get(sid)
                .map(|s| &s.name)
                .filter(|n| !n.is_empty())
            {
                let _ = write!(out, " name: {}", quote(name));
            }
            out.push_str(" {\n");
            for title in eq.titles.values().filter(|t| &t.using_subunit == sid) {
                let Some(src) = eq.sources.get(&title.source) else {
                    continue;
                };
                let _ = write!(
                    out,
                    "    source {}: {} level {}",
                    src.id, src.kind, title.level
                );
                let polarity = eq
                    .scale_of(&src.kind)
                    .filter(|s| s.contains_level(title.level))
                    .map_or(Polarity::Positive, |s| s.polarity_of_rank(title.level));
                bindings_tail(&mut out, &title_bindings(title, polarity, &unit.id));
                source_tail(&mut out, src);
                out.push('\n');
            }
            out.push_str("  }\n");
        }
        out.push_str("}\n\n");
    }

    let untitled: Vec<_> = eq
        .sources
        .values()
        .filter(|s| !eq.titles.contains_key(&s.id))
        .collect();
    for src in &untitled {
        let _ = write!(out, "source {}: {}", src.id, src.kind);
        source_tail(&mut out, src);
        out.push('\n');
    }
    if !untitled.is_empty() {
        out.push('\n');
    }

    let mut flows = false;
    for e in eq.service_edges.values() {
        let from = eq
            .unit_of(&e.provider)
            .map_or_else(String::new, |u| u.to_string());
        let to = match &e.consumer {
            Consumer::External => "external".to_owned(),
            Consumer::Unit(u) => u.to_string(),
            Consumer::Subunit(s) => match eq.unit_of(s) {
                Some(u) => format!("{u}.{s}"),
                None => s.to_string(),
            },
        };
        let _ = writeln!(
            out,
            "service {} from {from}.{} to {to} volume {}",
            e.service, e.provider, e.volume
        );
        flows = true;
    }
    for m in eq.money_edges.values() {
        let _ = writeln!(
            out,
            "money from {} to {} amount {}",
            m.payer, m.payee, m.amount
        );
        flows = true;
    }
    for c in eq.contracts.values() {
        let _ = writeln!(out, "contract {}", contract_spec(c));
        flows = true;
    }
    if !flows && out.ends_with("\n\n") {
        out.pop();
    }
    out
}

pub fn print_plan(plan: &Plan) -> String {
    let mut out = format!("plan {}", plan.id);
    if let Some(f) = &plan.equilibrium {
        let _ = write!(out, " equilibrium {}", quote(f));
    }
    let s = &plan.scope;
    let _ = write!(
        out,
        " scope(A={}, B={}",
        s.outsourcer, s.outsourcing_subunit
    );
    if let (Some(x), Some(y)) = (&s.insourcer, &s.insourcing_subunit) {
        let _ = write!(out, ", X={x}, Y={y}");
    }
    let list: Vec<_> = s.sources.iter().map(|s| s.as_str()).collect();
    let _ = writeln!(out, ", sources={}) {{", list.join(","));
    for t in &plan.threads {
        let _ = writeln!(out, "  thread {} {{", t.name);
        for g in &t.steps {
            out.push_str("    ");
            if let Some(guard) = &g.guard {
                let _ = write!(out, "when {guard} ");
            }
            let _ = writeln!(out, "{};", g.step);
        }
        out.push_str("  }\n");
    }
    out.push_str("}\n");
    out
}

impl fmt::Display for Guard {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Guard::Exists { kind, id } => write!(f, "exists {kind} {id}"),
            Guard::TitleAtLevel { source, level } => write!(f, "title-at {source} level {level}"),
            Guard::ContractPresent { contract } => write!(f, "contract-present {contract}"),
        }
    }
}

impl fmt::Display for Step {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut out = String::new();
        match self {
            Step::TransferTitle {
                source,
                to,
                level,
                bindings,
            } => {
                let _ = write!(
                    out,
                    "transfer {source} to {}.{} level {level}",
                    to.unit, to.subunit
                );
                bindings_tail(&mut out, bindings);
            }
            Step::ChangeTitleLevel {
                source,
                level,
                bindings,
            } => {
                let _ = write!(out, "retitle {source} level {level}");
                bindings_tail(&mut out, bindings);
            }
            Step::AbandonTitle { source } => {
                let _ = write!(out, "abandon {source}");
            }
            Step::AcquireSource {
                source,
                level,
                bindings,
                into,
            } => {
                let _ = write!(out, "acquire {}: {} level {level}", source.id, source.kind);
                bindings_tail(&mut out, bindings);
                source_tail(&mut out, source);
                let _ = write!(out, " in {}.{}", into.unit, into.subunit);
            }
            Step::MoveService { service, to } => {
                let _ = write!(out, "move-service {service} to {}.{}", to.unit, to.subunit);
            }
            Step::CreateUnit { unit } => {
                let _ = write!(out, "create-unit {unit}");
            }
            Step::CreateSubunit { subunit, unit } => {
                let _ = write!(out, "create-subunit {subunit} in {unit}");
            }
            Step::DissolveSubunit { target } => {
                let _ = write!(out, "dissolve-subunit {}.{}", target.unit, target.subunit);
            }
            Step::DissolveUnit { unit } => {
                let _ = write!(out, "dissolve-unit {unit}");
            }
            Step::SignContract { contract } => {
                let _ = write!(out, "sign {}", contract_spec(contract));
            }
            Step::TerminateContract { contract } => {
                let _ = write!(out, "terminate {contract}");
            }
            Step::FinancialTransfer {
                payer,
                payee,
                amount,
            } => {
                let _ = write!(out, "pay {payer} to {payee} amount {amount}");
            }
        }
        f.write_str(&out)
    }
}
