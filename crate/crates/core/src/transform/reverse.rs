//! Step-wise inverse of a progression.

use crate::model::{SourcingEquilibrium, TitleRecord};

use super::step::{apply_step, Bindings, Progression, Step, SubunitRef};
use super::{TransformError, TransformationScope};

/// The progression undoing `prog` when applied to the state `prog` produced
/// from `before`: inverse steps in reverse order, with outsourcer and
/// insourcer roles swapped. Retitles carry explicit bindings only where the
/// derived roles would not restore the previous title exactly.
pub fn reverse(
    prog: &Progression,
    before: &SourcingEquilibrium,
) -> Result<Progression, TransformError> {
    if let Some(step) = prog.steps.iter().find(|s| !s.is_invertible()) {
        return Err(TransformError::NotInvertible {
            step: step.to_string(),
        });
    }
    let (Some(x), Some(y)) = (&prog.scope.insourcer, &prog.scope.insourcing_subunit) else {
        return Err(TransformError::MissingInsourcer);
    };

    let mut states = Vec::with_capacity(prog.steps.len() + 1);
    states.push(before.clone());
    for step in &prog.steps {
        let next = apply_step(states.last().expect("non-empty"), step)?;
        states.push(next);
    }

    let mut inverse = Vec::new();
    for (i, step) in prog.steps.iter().enumerate().rev() {
        let prior = &states[i];
        let current = &states[i + 1];
        let mut undo = invert(step, prior, current)?;
        inverse.append(&mut undo);
    }

    let after = states.last().expect("non-empty");
    let scope = TransformationScope {
        outsourcer: x.clone(),
        outsourcing_subunit: y.clone(),
        insourcer: Some(prog.scope.outsourcer.clone()),
        insourcing_subunit: Some(prog.scope.outsourcing_subunit.clone()),
        sources: prog
            .scope
            .sources
            .iter()
            .filter(|s| after.titles.get(*s).is_some_and(|t| &t.using_subunit == y))
            .cloned()
            .collect(),
    };
    Progression::new(inverse, scope)
}

fn invert(
    step: &Step,
    prior: &SourcingEquilibrium,
    current: &SourcingEquilibrium,
) -> Result<Vec<Step>, TransformError> {
    let not_invertible = || TransformError::NotInvertible {
        step: step.to_string(),
    };
    match step {
        Step::TransferTitle { source, .. } => {
            let old = prior.titles.get(source).ok_or_else(not_invertible)?;
            let to = subunit_ref(prior, old).ok_or_else(not_invertible)?;
            let make = |bindings| Step::TransferTitle {
                source: source.clone(),
                to: to.clone(),
                level: old.level,
                bindings,
            };
            restoring(old, current, make)
                .map(|s| vec![s])
                .ok_or_else(not_invertible)
        }
        Step::ChangeTitleLevel { source, .. } => {
            let old = prior.titles.get(source).ok_or_else(not_invertible)?;
            let cur = current.titles.get(source).ok_or_else(not_invertible)?;
            if cur.using_subunit != old.using_subunit {
                return Err(not_invertible());
            }
            let make = |bindings| Step::ChangeTitleLevel {
                source: source.clone(),
                level: old.level,
                bindings,
            };
            restoring(old, current, make)
                .map(|s| vec![s])
                .ok_or_else(not_invertible)
        }
        Step::MoveService { service, .. } => {
            let mut providers = prior
                .service_edges
                .values()
                .filter(|e| &e.service == service)
                .map(|e| &e.provider);
            let first = providers.next().ok_or_else(not_invertible)?;
            if providers.any(|p| p != first) {
                return Err(not_invertible());
            }
            let unit = prior.unit_of(first).ok_or_else(not_invertible)?;
            Ok(vec![Step::MoveService {
                service: service.clone(),
                to: SubunitRef::new(unit.clone(), first.clone()),
            }])
        }
        Step::SignContract { contract } => Ok(vec![match prior.contracts.get(&contract.id) {
            Some(old) => Step::SignContract {
                contract: old.clone(),
            },
            None => Step::TerminateContract {
                contract: contract.id.clone(),
            },
        }]),
        Step::FinancialTransfer {
            payer,
            payee,
            amount,
        } => Ok(vec![Step::FinancialTransfer {
            payer: payee.clone(),
            payee: payer.clone(),
            amount: *amount,
        }]),
        _ => Err(not_invertible()),
    }
}

fn subunit_ref(eq: &SourcingEquilibrium, title: &TitleRecord) -> Option<SubunitRef> {
    eq.unit_of(&title.using_subunit)
        .map(|u| SubunitRef::new(u.clone(), title.using_subunit.clone()))
}

/// The step built by `make` that turns `current`'s title back into `old`,
/// preferring derived roles over explicit bindings.
fn restoring(
    old: &TitleRecord,
    current: &SourcingEquilibrium,
    make: impl Fn(Bindings) -> Step,
) -> Option<Step> {
    let plain = make(Bindings::default());
    if apply_step(current, &plain)
        .ok()
        .and_then(|eq| eq.titles.get(&old.source).cloned())
        .as_ref()
        == Some(old)
    {
        return Some(plain);
    }
    let bound = make(Bindings {
        holder: Some(old.outsourcer_side.clone()),
        counterparty: old.insourcer_side.clone(),
        third_party: old.third_party.clone(),
    });
    let restored = apply_step(current, &bound).ok()?;
    (restored.titles.get(&old.source) == Some(old)).then_some(bound)
}
