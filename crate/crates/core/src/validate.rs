//! Structural well-formedness of an equilibrium, reported as findings.

use serde::{Deserialize, Serialize};

use crate::model::{EntityKind, SourcingEquilibrium};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Finding {
    pub kind: EntityKind,
    pub id: String,
    pub rule: String,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub findings: Vec<Finding>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.findings.is_empty()
    }

    fn push(&mut self, kind: EntityKind, id: impl ToString, problems: Vec<(&'static str, String)>) {
        let id = id.to_string();
        self.findings
            .extend(problems.into_iter().map(|(rule, message)| Finding {
                kind,
                id: id.clone(),
                rule: rule.to_owned(),
                message,
            }));
    }
}

/// Checks every invariant of the equilibrium types. Zero findings iff the
/// snapshot is well formed.
pub fn validate_equilibrium(eq: &SourcingEquilibrium) -> ValidationReport {
    let mut report = ValidationReport::default();

    for (id, scale) in &eq.custom_scales {
        let mut problems = Vec::new();
        if let Err(msg) = scale.check() {
            problems.push(("scale-shape", msg));
        }
        if &scale.id != id {
            problems.push((
                "key-mismatch",
                format!("scale stored under {id} has id {}", scale.id),
            ));
        }
        report.push(EntityKind::Scale, id, problems);
    }

    for (id, unit) in &eq.units {
        let mut problems = Vec::new();
        if &unit.id != id {
            problems.push((
                "key-mismatch",
                format!("unit stored under {id} has id {}", unit.id),
            ));
        }
        for sub in &unit.subunits {
            match eq.subunits.get(sub) {
                None => problems.push((
                    "dangling-reference",
                    format!("unit {id} lists missing subunit {sub}"),
                )),
                Some(s) if &s.unit != id => problems.push((
                    "parent-mismatch",
                    format!("unit {id} lists subunit {sub} whose parent is {}", s.unit),
                )),
                Some(_) => {}
            }
        }
        report.push(EntityKind::Unit, id, problems);
    }

    for (id, sub) in &eq.subunits {
        let mut problems = Vec::new();
        if &sub.id != id {
            problems.push((
                "key-mismatch",
                format!("subunit stored under {id} has id {}", sub.id),
            ));
        }
        match eq.units.get(&sub.unit) {
            None => problems.push((
                "dangling-reference",
                format!("subunit {id} has missing parent {}", sub.unit),
            )),
            Some(u) if !u.subunits.contains(id) => problems.push((
                "parent-mismatch",
                format!("subunit {id} is not listed by its parent {}", sub.unit),
            )),
            Some(_) => {}
        }
        report.push(EntityKind::Subunit, id, problems);
    }

    for (id, source) in &eq.sources {
        let mut problems = eq.source_problems(source);
        if &source.id != id {
            problems.push((
                "key-mismatch",
                format!("source stored under {id} has id {}", source.id),
            ));
        }
        report.push(EntityKind::Source, id, problems);
    }

    for (id, title) in &eq.titles {
        let mut problems = eq.title_problems(title);
        if &title.source != id {
            problems.push((
                "key-mismatch",
                format!("title stored under {id} is for {}", title.source),
            ));
        }
        report.push(EntityKind::Title, id, problems);
    }

    for (key, edge) in &eq.service_edges {
        let mut problems = eq.service_problems(edge);
        if key != &edge.key() {
            problems.push((
                "key-mismatch",
                format!("service edge {} stored under another key", edge.service),
            ));
        }
        report.push(EntityKind::Service, &edge.service, problems);
    }

    for (key, edge) in &eq.money_edges {
        let mut problems = eq.money_problems(edge);
        if key != &edge.key() {
            problems.push((
                "key-mismatch",
                "money edge stored under another key".to_owned(),
            ));
        }
        report.push(
            EntityKind::Money,
            format!("{}->{}", edge.payer, edge.payee),
            problems,
        );
    }

    for (id, contract) in &eq.contracts {
        let mut problems = eq.contract_problems(contract);
        if &contract.id != id {
            problems.push((
                "key-mismatch",
                format!("contract stored under {id} has id {}", contract.id),
            ));
        }
        report.push(EntityKind::Contract, id, problems);
    }

    report
}
