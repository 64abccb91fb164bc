//! Units, subunits, sources, titles, service and money flows, contracts, and
//! the immutable equilibrium snapshot that holds them.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ids::{ContractId, ServiceId, SourceId, SubunitId, UnitId};
use crate::scale::{builtin_scale, Polarity, Role, SourceType, TitleScale};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error(
        "unit {perspective} is neither outsourcer nor insourcer side of the title on {source_id}"
    )]
    PerspectiveNotParty {
        perspective: UnitId,
        source_id: SourceId,
    },
    #[error("no scale registered for source type {0}")]
    UnknownScale(String),
    #[error("{kind} {id} already exists")]
    Duplicate { kind: EntityKind, id: String },
    #[error("{kind} {id} does not exist")]
    Missing { kind: EntityKind, id: String },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EntityKind {
    Unit,
    Subunit,
    Source,
    Title,
    Service,
    Money,
    Contract,
    Scale,
}

impl fmt::Display for EntityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            EntityKind::Unit => "unit",
            EntityKind::Subunit => "subunit",
            EntityKind::Source => "source",
            EntityKind::Title => "title",
            EntityKind::Service => "service",
            EntityKind::Money => "money",
            EntityKind::Contract => "contract",
            EntityKind::Scale => "scale",
        };
        f.write_str(s)
    }
}

/// The four characteristics of a resource that together give a sustainable
/// competitive advantage.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdvantageFlags {
    pub valuable: bool,
    pub rare: bool,
    pub inimitable: bool,
    pub non_substitutable: bool,
}

impl AdvantageFlags {
    pub const ALL: AdvantageFlags = AdvantageFlags {
        valuable: true,
        rare: true,
        inimitable: true,
        non_substitutable: true,
    };

    pub fn all(&self) -> bool {
        self.valuable && self.rare && self.inimitable && self.non_substitutable
    }

    pub fn any(&self) -> bool {
        self.valuable || self.rare || self.inimitable || self.non_substitutable
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CostCategory {
    CapitalOwned,
    OperationalCosts,
    LeaseRentLicense,
    Personnel,
    Insurance,
    ManagementOverhead,
    PriorObligations,
}

impl CostCategory {
    pub const ALL: [CostCategory; 7] = [
        CostCategory::CapitalOwned,
        CostCategory::OperationalCosts,
        CostCategory::LeaseRentLicense,
        CostCategory::Personnel,
        CostCategory::Insurance,
        CostCategory::ManagementOverhead,
        CostCategory::PriorObligations,
    ];

    /// Short keyword used in documents (`cost capital=20`).
    pub fn keyword(self) -> &'static str {
        match self {
            CostCategory::CapitalOwned => "capital",
            CostCategory::OperationalCosts => "operational",
            CostCategory::LeaseRentLicense => "lease",
            CostCategory::Personnel => "personnel",
            CostCategory::Insurance => "insurance",
            CostCategory::ManagementOverhead => "management",
            CostCategory::PriorObligations => "obligations",
        }
    }

    pub fn from_keyword(word: &str) -> Option<CostCategory> {
        CostCategory::ALL.into_iter().find(|c| c.keyword() == word)
    }
}

/// One non-negative amount per period for each cost category.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct Costs {
    pub capital_owned: f64,
    pub operational_costs: f64,
    pub lease_rent_license: f64,
    pub personnel: f64,
    pub insurance: f64,
    pub management_overhead: f64,
    pub prior_obligations: f64,
}

impl Costs {
    pub fn get(&self, cat: CostCategory) -> f64 {
        match cat {
            CostCategory::CapitalOwned => self.capital_owned,
            CostCategory::OperationalCosts => self.operational_costs,
            CostCategory::LeaseRentLicense => self.lease_rent_license,
            CostCategory::Personnel => self.personnel,
            CostCategory::Insurance => self.insurance,
            CostCategory::ManagementOverhead => self.management_overhead,
            CostCategory::PriorObligations => self.prior_obligations,
        }
    }

    pub fn slot(&mut self, cat: CostCategory) -> &mut f64 {
        match cat {
            CostCategory::CapitalOwned => &mut self.capital_owned,
            CostCategory::OperationalCosts => &mut self.operational_costs,
            CostCategory::LeaseRentLicense => &mut self.lease_rent_license,
            CostCategory::Personnel => &mut self.personnel,
            CostCategory::Insurance => &mut self.insurance,
            CostCategory::ManagementOverhead => &mut self.management_overhead,
            CostCategory::PriorObligations => &mut self.prior_obligations,
        }
    }

    pub fn with(mut self, cat: CostCategory, amount: f64) -> Self {
        *self.slot(cat) = amount;
        self
    }

    pub fn total(&self) -> f64 {
        CostCategory::ALL.iter().map(|c| self.get(*c)).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (CostCategory, f64)> + '_ {
        CostCategory::ALL.into_iter().map(|c| (c, self.get(c)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Source {
    pub id: SourceId,
    #[serde(rename = "type")]
    pub kind: SourceType,
    /// The unit whose identity cannot be decoupled from this source.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub identity_critical_for: Option<UnitId>,
    #[serde(default)]
    pub advantage: AdvantageFlags,
    #[serde(default)]
    pub costs: Costs,
}

impl Source {
    pub fn new(id: impl Into<SourceId>, kind: SourceType) -> Self {
        Self {
            id: id.into(),
            kind,
            identity_critical_for: None,
            advantage: AdvantageFlags::default(),
            costs: Costs::default(),
        }
    }

    pub fn with_costs(mut self, costs: Costs) -> Self {
        self.costs = costs;
        self
    }

    pub fn critical_for(mut self, unit: impl Into<UnitId>) -> Self {
        self.identity_critical_for = Some(unit.into());
        self
    }

    pub fn with_advantage(mut self, flags: AdvantageFlags) -> Self {
        self.advantage = flags;
        self
    }
}

/// The single titled relation a source currently has.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TitleRecord {
    pub source: SourceId,
    pub level: u32,
    /// Unit in the `A` slot. Always bound: it is the reference perspective.
    pub outsourcer_side: UnitId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub insourcer_side: Option<UnitId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub third_party: Option<UnitId>,
    pub using_subunit: SubunitId,
}

impl TitleRecord {
    pub fn new(
        source: impl Into<SourceId>,
        level: u32,
        outsourcer_side: impl Into<UnitId>,
        using_subunit: impl Into<SubunitId>,
    ) -> Self {
        Self {
            source: source.into(),
            level,
            outsourcer_side: outsourcer_side.into(),
            insourcer_side: None,
            third_party: None,
            using_subunit: using_subunit.into(),
        }
    }

    pub fn with_insourcer(mut self, unit: impl Into<UnitId>) -> Self {
        self.insourcer_side = Some(unit.into());
        self
    }

    pub fn with_third_party(mut self, unit: impl Into<UnitId>) -> Self {
        self.third_party = Some(unit.into());
        self
    }

    /// True if `unit` fills the outsourcer or insourcer slot.
    pub fn is_party(&self, unit: &UnitId) -> bool {
        &self.outsourcer_side == unit || self.insourcer_side.as_ref() == Some(unit)
    }

    /// Rank of the title seen from `perspective`: the level itself for the
    /// outsourcer side, its mirror for the insourcer side.
    pub fn rank_from(&self, perspective: &UnitId, scale: &TitleScale) -> Result<u32, ModelError> {
        if &self.outsourcer_side == perspective {
            Ok(self.level)
        } else if self.insourcer_side.as_ref() == Some(perspective) {
            Ok(scale.mirror(self.level))
        } else {
            Err(ModelError::PerspectiveNotParty {
                perspective: perspective.clone(),
                source_id: self.source.clone(),
            })
        }
    }

    pub fn polarity(
        &self,
        perspective: &UnitId,
        scale: &TitleScale,
    ) -> Result<Polarity, ModelError> {
        self.rank_from(perspective, scale)
            .map(|r| scale.polarity_of_rank(r))
    }

    /// Every unit referenced by the title.
    pub fn units(&self) -> impl Iterator<Item = &UnitId> {
        std::iter::once(&self.outsourcer_side)
            .chain(self.insourcer_side.iter())
            .chain(self.third_party.iter())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Unit {
    pub id: UnitId,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub name: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub mission: String,
    #[serde(default)]
    pub subunits: BTreeSet<SubunitId>,
}

impl Unit {
    pub fn new(id: impl Into<UnitId>) -> Self {
        Self {
            id: id.into(),
            name: String::new(),
            mission: String::new(),
            subunits: BTreeSet::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Subunit {
    pub id: SubunitId,
    pub unit: UnitId,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Consumer {
    Unit(UnitId),
    Subunit(SubunitId),
    External,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServiceEdge {
    pub service: ServiceId,
    pub provider: SubunitId,
    pub consumer: Consumer,
    pub volume: f64,
}

impl ServiceEdge {
    pub fn new(
        service: impl Into<ServiceId>,
        provider: impl Into<SubunitId>,
        consumer: Consumer,
        volume: f64,
    ) -> Self {
        Self {
            service: service.into(),
            provider: provider.into(),
            consumer,
            volume,
        }
    }

    pub fn key(&self) -> EdgeKey {
        (self.service.clone(), self.consumer.clone())
    }
}

pub type EdgeKey = (ServiceId, Consumer);
pub type MoneyKey = (UnitId, UnitId);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MoneyEdge {
    pub payer: UnitId,
    pub payee: UnitId,
    pub amount: f64,
}

impl MoneyEdge {
    pub fn key(&self) -> MoneyKey {
        (self.payer.clone(), self.payee.clone())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ContractKind {
    TargetServiceProvision,
    ReversibilityClause,
    Other,
}

impl ContractKind {
    pub const ALL: [ContractKind; 3] = [
        ContractKind::TargetServiceProvision,
        ContractKind::ReversibilityClause,
        ContractKind::Other,
    ];

    pub fn keyword(self) -> &'static str {
        match self {
            ContractKind::TargetServiceProvision => "target-service-provision",
            ContractKind::ReversibilityClause => "reversibility-clause",
            ContractKind::Other => "other",
        }
    }

    pub fn from_keyword(word: &str) -> Option<ContractKind> {
        ContractKind::ALL.into_iter().find(|k| k.keyword() == word)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Contract {
    pub id: ContractId,
    pub kind: ContractKind,
    pub parties: (UnitId, UnitId),
    #[serde(default)]
    pub covered_services: BTreeSet<ServiceId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expiry: Option<u64>,
}

impl Contract {
    pub fn between(&self, a: &UnitId, b: &UnitId) -> bool {
        (&self.parties.0 == a && &self.parties.1 == b)
            || (&self.parties.0 == b && &self.parties.1 == a)
    }
}

mod edge_list {
    //! Keyed edge maps serialize as arrays sorted by key.
    use std::collections::BTreeMap;

    use serde::de::DeserializeOwned;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub trait Keyed {
        type Key: Ord;
        fn edge_key(&self) -> Self::Key;
    }

    impl Keyed for super::ServiceEdge {
        type Key = super::EdgeKey;
        fn edge_key(&self) -> Self::Key {
            self.key()
        }
    }

    impl Keyed for super::MoneyEdge {
        type Key = super::MoneyKey;
        fn edge_key(&self) -> Self::Key {
            self.key()
        }
    }

    pub fn serialize<K, V: Serialize, S: Serializer>(
        map: &BTreeMap<K, V>,
        s: S,
    ) -> Result<S::Ok, S::Error> {
        s.collect_seq(map.values())
    }

    pub fn deserialize<'de, V, D>(d: D) -> Result<BTreeMap<V::Key, V>, D::Error>
    where
        V: Keyed + DeserializeOwned,
        D: Deserializer<'de>,
    {
        let items = Vec::<V>::deserialize(d)?;
        let mut map = BTreeMap::new();
        for item in items {
            let key = item.edge_key();
            if map.insert(key, item).is_some() {
                return Err(serde::de::Error::custom("duplicate edge key"));
            }
        }
        Ok(map)
    }
}

/// A fixed assignment of titled sources to the parts of units, together with
/// the service and money flows and contracts between them.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SourcingEquilibrium {
    #[serde(default)]
    pub units: BTreeMap<UnitId, Unit>,
    #[serde(default)]
    pub subunits: BTreeMap<SubunitId, Subunit>,
    #[serde(default)]
    pub sources: BTreeMap<SourceId, Source>,
    #[serde(default)]
    pub titles: BTreeMap<SourceId, TitleRecord>,
    #[serde(default, with = "edge_list")]
    pub service_edges: BTreeMap<EdgeKey, ServiceEdge>,
    #[serde(default, with = "edge_list")]
    pub money_edges: BTreeMap<MoneyKey, MoneyEdge>,
    #[serde(default)]
    pub contracts: BTreeMap<ContractId, Contract>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub custom_scales: BTreeMap<String, TitleScale>,
    #[serde(default)]
    pub logical_time: u64,
}

impl SourcingEquilibrium {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn scale_of(&self, kind: &SourceType) -> Option<&TitleScale> {
        match kind {
            SourceType::Custom(name) => self.custom_scales.get(name),
            other => builtin_scale(other.scale_id()),
        }
    }

    pub fn scale_for_source(&self, source: &SourceId) -> Result<&TitleScale, ModelError> {
        let src = self
            .sources
            .get(source)
            .ok_or_else(|| ModelError::Missing {
                kind: EntityKind::Source,
                id: source.to_string(),
            })?;
        self.scale_of(&src.kind)
            .ok_or_else(|| ModelError::UnknownScale(src.kind.to_string()))
    }

    pub fn unit_of(&self, subunit: &SubunitId) -> Option<&UnitId> {
        self.subunits.get(subunit).map(|s| &s.unit)
    }

    /// Unit a consumer belongs to; `None` for external clients.
    pub fn consumer_unit<'a>(&'a self, consumer: &'a Consumer) -> Option<&'a UnitId> {
        match consumer {
            Consumer::Unit(u) => Some(u),
            Consumer::Subunit(s) => self.unit_of(s),
            Consumer::External => None,
        }
    }

    pub fn titles_used_by<'a>(
        &'a self,
        subunit: &'a SubunitId,
    ) -> impl Iterator<Item = &'a TitleRecord> + 'a {
        self.titles
            .values()
            .filter(move |t| &t.using_subunit == subunit)
    }

    pub fn rank_from(&self, perspective: &UnitId, source: &SourceId) -> Result<u32, ModelError> {
        let title = self.title(source)?;
        title.rank_from(perspective, self.scale_for_source(source)?)
    }

    pub fn polarity(
        &self,
        perspective: &UnitId,
        source: &SourceId,
    ) -> Result<Polarity, ModelError> {
        let title = self.title(source)?;
        title.polarity(perspective, self.scale_for_source(source)?)
    }

    pub fn title(&self, source: &SourceId) -> Result<&TitleRecord, ModelError> {
        self.titles.get(source).ok_or_else(|| ModelError::Missing {
            kind: EntityKind::Title,
            id: source.to_string(),
        })
    }

    // --- checked constructors -------------------------------------------

    pub fn register_scale(&mut self, scale: TitleScale) -> Result<(), ModelError> {
        scale.check().map_err(ModelError::Invalid)?;
        if builtin_scale(&scale.id).is_some()
            || SourceType::builtin_from_keyword(&scale.id).is_some()
            || self.custom_scales.contains_key(&scale.id)
        {
            return Err(ModelError::Duplicate {
                kind: EntityKind::Scale,
                id: scale.id,
            });
        }
        self.custom_scales.insert(scale.id.clone(), scale);
        Ok(())
    }

    pub fn insert_unit(&mut self, unit: Unit) -> Result<(), ModelError> {
        if self.units.contains_key(&unit.id) {
            return Err(dup(EntityKind::Unit, &unit.id));
        }
        if !unit.subunits.is_empty() {
            return Err(ModelError::Invalid(
                "insert subunits with insert_subunit".to_owned(),
            ));
        }
        self.units.insert(unit.id.clone(), unit);
        Ok(())
    }

    pub fn insert_subunit(
        &mut self,
        unit: &UnitId,
        id: impl Into<SubunitId>,
        name: impl Into<String>,
    ) -> Result<(), ModelError> {
        let id = id.into();
        if self.subunits.contains_key(&id) {
            return Err(dup(EntityKind::Subunit, &id));
        }
        let parent = self
            .units
            .get_mut(unit)
            .ok_or_else(|| missing(EntityKind::Unit, unit))?;
        parent.subunits.insert(id.clone());
        self.subunits.insert(
            id.clone(),
            Subunit {
                id,
                unit: unit.clone(),
                name: name.into(),
            },
        );
        Ok(())
    }

    pub fn insert_source(&mut self, source: Source) -> Result<(), ModelError> {
        if self.sources.contains_key(&source.id) {
            return Err(dup(EntityKind::Source, &source.id));
        }
        let problems = self.source_problems(&source);
        if let Some((_, msg)) = problems.into_iter().next() {
            return Err(ModelError::Invalid(msg));
        }
        self.sources.insert(source.id.clone(), source);
        Ok(())
    }

    pub fn insert_title(&mut self, title: TitleRecord) -> Result<(), ModelError> {
        if self.titles.contains_key(&title.source) {
            return Err(dup(EntityKind::Title, &title.source));
        }
        if let Some((_, msg)) = self.title_problems(&title).into_iter().next() {
            return Err(ModelError::Invalid(msg));
        }
        self.titles.insert(title.source.clone(), title);
        Ok(())
    }

    pub fn insert_service(&mut self, edge: ServiceEdge) -> Result<(), ModelError> {
        let key = edge.key();
        if self.service_edges.contains_key(&key) {
            return Err(ModelError::Duplicate {
                kind: EntityKind::Service,
                id: format!("{} -> {:?}", edge.service, edge.consumer),
            });
        }
        if let Some((_, msg)) = self.service_problems(&edge).into_iter().next() {
            return Err(ModelError::Invalid(msg));
        }
        self.service_edges.insert(key, edge);
        Ok(())
    }

    pub fn insert_money(&mut self, edge: MoneyEdge) -> Result<(), ModelError> {
        let key = edge.key();
        if self.money_edges.contains_key(&key) {
            return Err(ModelError::Duplicate {
                kind: EntityKind::Money,
                id: format!("{} -> {}", edge.payer, edge.payee),
            });
        }
        if let Some((_, msg)) = self.money_problems(&edge).into_iter().next() {
            return Err(ModelError::Invalid(msg));
        }
        self.money_edges.insert(key, edge);
        Ok(())
    }

    pub fn insert_contract(&mut self, contract: Contract) -> Result<(), ModelError> {
        if self.contracts.contains_key(&contract.id) {
            return Err(dup(EntityKind::Contract, &contract.id));
        }
        if let Some((_, msg)) = self.contract_problems(&contract).into_iter().next() {
            return Err(ModelError::Invalid(msg));
        }
        self.contracts.insert(contract.id.clone(), contract);
        Ok(())
    }

    // --- per-entity rule checks, shared with validation and steps ---------

    pub(crate) fn source_problems(&self, source: &Source) -> Vec<(&'static str, String)> {
        let mut out = Vec::new();
        if self.scale_of(&source.kind).is_none() {
            out.push((
                "unknown-scale",
                format!(
                    "source {} has type {} with no registered scale",
                    source.id, source.kind
                ),
            ));
        }
        if let Some(u) = &source.identity_critical_for {
            if !self.units.contains_key(u) {
                out.push((
                    "dangling-reference",
                    format!(
                        "source {} is identity-critical for missing unit {u}",
                        source.id
                    ),
                ));
            }
        }
        for (cat, amount) in source.costs.iter() {
            if !(amount.is_finite() && amount >= 0.0) {
                out.push((
                    "cost-range",
                    format!("source {} has {} cost {amount}", source.id, cat.keyword()),
                ));
            }
        }
        out
    }

    pub(crate) fn title_problems(&self, title: &TitleRecord) -> Vec<(&'static str, String)> {
        let mut out = Vec::new();
        let id = &title.source;
        let Some(source) = self.sources.get(id) else {
            out.push((
                "dangling-reference",
                format!("title refers to missing source {id}"),
            ));
            return out;
        };
        let Some(scale) = self.scale_of(&source.kind) else {
            out.push((
                "unknown-scale",
                format!("no scale for type {} of {id}", source.kind),
            ));
            return out;
        };
        let Some(template) = scale.level(title.level) else {
            out.push((
                "level-range",
                format!(
                    "title on {id}: level {} out of range 1..{}",
                    title.level,
                    scale.len()
                ),
            ));
            return out;
        };
        for unit in title.units() {
            if !self.units.contains_key(unit) {
                out.push((
                    "dangling-reference",
                    format!("title on {id} refers to missing unit {unit}"),
                ));
            }
        }
        if template.mentions(Role::Insourcer) && title.insourcer_side.is_none() {
            out.push((
                "unfilled-slot",
                format!(
                    "title on {id} at level {} needs an insourcer-side unit",
                    title.level
                ),
            ));
        }
        match (template.mentions(Role::ThirdParty), &title.third_party) {
            (true, None) => out.push((
                "unfilled-slot",
                format!(
                    "title on {id} at level {} needs a third-party unit",
                    title.level
                ),
            )),
            (false, Some(c)) => out.push((
                "extra-slot",
                format!(
                    "title on {id} at level {} does not mention a third party, got {c}",
                    title.level
                ),
            )),
            _ => {}
        }
        let a = &title.outsourcer_side;
        if title.insourcer_side.as_ref() == Some(a) {
            out.push((
                "distinct-parties",
                format!("title on {id}: {a} fills both sides"),
            ));
        }
        if let Some(c) = &title.third_party {
            if title.is_party(c) {
                out.push((
                    "distinct-parties",
                    format!("title on {id}: third party {c} is also a side"),
                ));
            }
        }
        match self.subunits.get(&title.using_subunit) {
            None => out.push((
                "dangling-reference",
                format!(
                    "title on {id} refers to missing subunit {}",
                    title.using_subunit
                ),
            )),
            Some(sub) => {
                let user_side = match scale.polarity_of_rank(title.level) {
                    Polarity::Positive => Some(a),
                    Polarity::Negative => title.insourcer_side.as_ref(),
                };
                if user_side != Some(&sub.unit) {
                    out.push((
                        "user-side",
                        format!(
                            "title on {id} at level {} is used by {} of {}, which is not the unit holding that side",
                            title.level, sub.id, sub.unit
                        ),
                    ));
                }
            }
        }
        out
    }

    pub(crate) fn service_problems(&self, edge: &ServiceEdge) -> Vec<(&'static str, String)> {
        let mut out = Vec::new();
        if !self.subunits.contains_key(&edge.provider) {
            out.push((
                "dangling-reference",
                format!(
                    "service {} provided by missing subunit {}",
                    edge.service, edge.provider
                ),
            ));
        }
        let consumer_ok = match &edge.consumer {
            Consumer::Unit(u) => self.units.contains_key(u),
            Consumer::Subunit(s) => self.subunits.contains_key(s),
            Consumer::External => true,
        };
        if !consumer_ok {
            out.push((
                "dangling-reference",
                format!("service {} consumed by a missing entity", edge.service),
            ));
        }
        if !(edge.volume.is_finite() && edge.volume >= 0.0) {
            out.push((
                "volume-range",
                format!("service {} has volume {}", edge.service, edge.volume),
            ));
        }
        out
    }

    pub(crate) fn money_problems(&self, edge: &MoneyEdge) -> Vec<(&'static str, String)> {
        let mut out = Vec::new();
        if edge.payer == edge.payee {
            out.push((
                "distinct-parties",
                format!("money edge from {} to itself", edge.payer),
            ));
        }
        for u in [&edge.payer, &edge.payee] {
            if !self.units.contains_key(u) {
                out.push((
                    "dangling-reference",
                    format!("money edge refers to missing unit {u}"),
                ));
            }
        }
        if !(edge.amount.is_finite() && edge.amount >= 0.0) {
            out.push((
                "amount-range",
                format!(
                    "money edge {} -> {} has amount {}",
                    edge.payer, edge.payee, edge.amount
                ),
            ));
        }
        out
    }

    pub(crate) fn contract_problems(&self, c: &Contract) -> Vec<(&'static str, String)> {
        let mut out = Vec::new();
        if c.parties.0 == c.parties.1 {
            out.push((
                "distinct-parties",
                format!("contract {} has identical parties", c.id),
            ));
        }
        for u in [&c.parties.0, &c.parties.1] {
            if !self.units.contains_key(u) {
                out.push((
                    "dangling-reference",
                    format!("contract {} refers to missing unit {u}", c.id),
                ));
            }
        }
        if c.kind == ContractKind::TargetServiceProvision && c.covered_services.is_empty() {
            out.push((
                "contract-coverage",
                format!(
                    "target service provision contract {} covers no service",
                    c.id
                ),
            ));
        }
        for s in &c.covered_services {
            if !self.service_edges.keys().any(|(svc, _)| svc == s) {
                out.push((
                    "dangling-reference",
                    format!("contract {} covers unknown service {s}", c.id),
                ));
            }
        }
        out
    }

    /// Every service id that currently has at least one edge.
    pub fn service_ids(&self) -> BTreeSet<&ServiceId> {
        self.service_edges.keys().map(|(s, _)| s).collect()
    }
}

fn dup(kind: EntityKind, id: &impl fmt::Display) -> ModelError {
    ModelError::Duplicate {
        kind,
        id: id.to_string(),
    }
}

fn missing(kind: EntityKind, id: &impl fmt::Display) -> ModelError {
    ModelError::Missing {
        kind,
        id: id.to_string(),
    }
}
