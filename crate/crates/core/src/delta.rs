//! Structural diff between two equilibria and its application.

use std::collections::BTreeMap;

use crate::ids::{ContractId, SourceId, SubunitId, UnitId};
use crate::model::{
    Contract, EdgeKey, MoneyEdge, MoneyKey, ServiceEdge, Source, SourcingEquilibrium, Subunit,
    TitleRecord, Unit,
};
use crate::scale::TitleScale;

/// Added, removed and changed entries of one keyed collection. Removed and
/// changed entries keep their old values so the delta can be inspected.
#[derive(Debug, Clone, PartialEq)]
pub struct MapDelta<K: Ord, V> {
    pub added: BTreeMap<K, V>,
    pub removed: BTreeMap<K, V>,
    pub changed: BTreeMap<K, (V, V)>,
}

impl<K: Ord, V> Default for MapDelta<K, V> {
    fn default() -> Self {
        Self {
            added: BTreeMap::new(),
            removed: BTreeMap::new(),
            changed: BTreeMap::new(),
        }
    }
}

impl<K: Ord + Clone, V: Clone + PartialEq> MapDelta<K, V> {
    pub fn between(before: &BTreeMap<K, V>, after: &BTreeMap<K, V>) -> Self {
        let mut d = Self::default();
        for (k, old) in before {
            match after.get(k) {
                None => {
                    d.removed.insert(k.clone(), old.clone());
                }
                Some(new) if new != old => {
                    d.changed.insert(k.clone(), (old.clone(), new.clone()));
                }
                Some(_) => {}
            }
        }
        for (k, new) in after {
            if !before.contains_key(k) {
                d.added.insert(k.clone(), new.clone());
            }
        }
        d
    }

    pub fn is_empty(&self) -> bool {
        self.added.is_empty() && self.removed.is_empty() && self.changed.is_empty()
    }

    pub fn len(&self) -> usize {
        self.added.len() + self.removed.len() + self.changed.len()
    }

    pub fn apply(&self, target: &mut BTreeMap<K, V>) {
        for k in self.removed.keys() {
            target.remove(k);
        }
        for (k, (_, new)) in &self.changed {
            target.insert(k.clone(), new.clone());
        }
        for (k, v) in &self.added {
            target.insert(k.clone(), v.clone());
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EquilibriumDelta {
    pub units: MapDelta<UnitId, Unit>,
    pub subunits: MapDelta<SubunitId, Subunit>,
    pub sources: MapDelta<SourceId, Source>,
    pub titles: MapDelta<SourceId, TitleRecord>,
    pub service_edges: MapDelta<EdgeKey, ServiceEdge>,
    pub money_edges: MapDelta<MoneyKey, MoneyEdge>,
    pub contracts: MapDelta<ContractId, Contract>,
    pub custom_scales: MapDelta<String, TitleScale>,
    /// `(before, after)` when the logical time differs.
    pub logical_time: Option<(u64, u64)>,
}

impl EquilibriumDelta {
    pub fn is_empty(&self) -> bool {
        self.units.is_empty()
            && self.subunits.is_empty()
            && self.sources.is_empty()
            && self.titles.is_empty()
            && self.service_edges.is_empty()
            && self.money_edges.is_empty()
            && self.contracts.is_empty()
            && self.custom_scales.is_empty()
            && self.logical_time.is_none()
    }

    /// Empty apart from logical time.
    pub fn is_structurally_empty(&self) -> bool {
        Self {
            logical_time: None,
            ..self.clone()
        }
        .is_empty()
    }

    /// Returns `before` with the delta applied.
    pub fn apply_to(&self, before: &SourcingEquilibrium) -> SourcingEquilibrium {
        let mut eq = before.clone();
        self.units.apply(&mut eq.units);
        self.subunits.apply(&mut eq.subunits);
        self.sources.apply(&mut eq.sources);
        self.titles.apply(&mut eq.titles);
        self.service_edges.apply(&mut eq.service_edges);
        self.money_edges.apply(&mut eq.money_edges);
        self.contracts.apply(&mut eq.contracts);
        self.custom_scales.apply(&mut eq.custom_scales);
        if let Some((_, t)) = self.logical_time {
            eq.logical_time = t;
        }
        eq
    }
}

pub fn diff(before: &SourcingEquilibrium, after: &SourcingEquilibrium) -> EquilibriumDelta {
    EquilibriumDelta {
        units: MapDelta::between(&before.units, &after.units),
        subunits: MapDelta::between(&before.subunits, &after.subunits),
        sources: MapDelta::between(&before.sources, &after.sources),
        titles: MapDelta::between(&before.titles, &after.titles),
        service_edges: MapDelta::between(&before.service_edges, &after.service_edges),
        money_edges: MapDelta::between(&before.money_edges, &after.money_edges),
        contracts: MapDelta::between(&before.contracts, &after.contracts),
        custom_scales: MapDelta::between(&before.custom_scales, &after.custom_scales),
        logical_time: (before.logical_time != after.logical_time)
            .then_some((before.logical_time, after.logical_time)),
    }
}
