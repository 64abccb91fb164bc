//! Weighted title arithmetic, cost estimation, internal/external source and
//! service degrees, and the sustainable competitive advantage predicate.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ids::{SourceId, SubunitId, UnitId};
use crate::model::{CostCategory, Costs, ModelError, Source, SourcingEquilibrium, TitleRecord};
use crate::scale::{builtin_scales, Polarity, SourceType, Tenure, TitleScale};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ValuationError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("weight table has no entry for scale {0}")]
    UnknownScale(String),
    #[error("weight table has no weight for rank {rank} of scale {scale}")]
    MissingWeight { scale: String, rank: u32 },
    #[error("unknown unit {0}")]
    UnknownUnit(UnitId),
    #[error("unknown subunit {0}")]
    UnknownSubunit(SubunitId),
    #[error("source {0} has no title")]
    Untitled(SourceId),
    #[error("unit {unit} is not party to any titled source of type {source_type}")]
    NoSourcesOfType {
        unit: UnitId,
        source_type: SourceType,
    },
    #[error("no benchmark for type {source_type} in segment {segment}")]
    MissingBenchmark {
        source_type: SourceType,
        segment: String,
    },
    #[error("benchmark for type {0} expects every source to be external")]
    DegenerateBenchmark(SourceType),
    #[error("unit {0} provides no services")]
    NoServices(UnitId),
    #[error("invalid weight table: {0}")]
    InvalidTable(String),
    #[error("invalid benchmark: {0}")]
    InvalidBenchmark(String),
}

pub type Result<T, E = ValuationError> = std::result::Result<T, E>;

/// Signed weight per rank, per scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightTable {
    pub scales: BTreeMap<String, BTreeMap<u32, f64>>,
}

impl Default for WeightTable {
    fn default() -> Self {
        Self::standard()
    }
}

impl WeightTable {
    /// `w(r) = n + 1 - 2r` for an `n`-level scale.
    pub fn default_weights(scale: &TitleScale) -> BTreeMap<u32, f64> {
        let n = scale.len() as f64;
        (1..=scale.len())
            .map(|r| (r, n + 1.0 - 2.0 * r as f64))
            .collect()
    }

    /// Default weights for the four built-in scales.
    pub fn standard() -> Self {
        Self {
            scales: builtin_scales()
                .into_iter()
                .map(|s| (s.id.clone(), Self::default_weights(s)))
                .collect(),
        }
    }

    /// Adds default weights for custom scales of `eq` that have no entry yet.
    pub fn with_defaults_for(mut self, eq: &SourcingEquilibrium) -> Self {
        for scale in eq.custom_scales.values() {
            self.scales
                .entry(scale.id.clone())
                .or_insert_with(|| Self::default_weights(scale));
        }
        self
    }

    /// Parses a table file and lays it over the standard table. Each entry
    /// that names a built-in scale is checked against it.
    pub fn from_json(text: &str) -> Result<Self> {
        let file: WeightTable =
            serde_json::from_str(text).map_err(|e| ValuationError::InvalidTable(e.to_string()))?;
        let mut table = Self::standard();
        for (id, weights) in file.scales {
            table.scales.insert(id, weights);
        }
        for scale in builtin_scales() {
            table.check(scale)?;
        }
        Ok(table)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            scales: self
                .scales
                .iter()
                .map(|(id, ws)| {
                    (
                        id.clone(),
                        ws.iter().map(|(r, w)| (*r, w * factor)).collect(),
                    )
                })
                .collect(),
        }
    }

    /// Every rank has a weight, weights strictly decrease, and each sign
    /// matches the polarity of its rank.
    pub fn check(&self, scale: &TitleScale) -> Result<()> {
        let ws = self
            .scales
            .get(&scale.id)
            .ok_or_else(|| ValuationError::UnknownScale(scale.id.clone()))?;
        let mut prev = f64::INFINITY;
        for rank in 1..=scale.len() {
            let w = *ws.get(&rank).ok_or_else(|| ValuationError::MissingWeight {
                scale: scale.id.clone(),
                rank,
            })?;
            if !w.is_finite() || w >= prev {
                return Err(ValuationError::InvalidTable(format!(
                    "scale {}: weights must strictly decrease (rank {rank})",
                    scale.id
                )));
            }
            let sign_ok = match scale.polarity_of_rank(rank) {
                Polarity::Positive => w > 0.0,
                Polarity::Negative => w < 0.0,
            };
            if !sign_ok {
                return Err(ValuationError::InvalidTable(format!(
                    "scale {}: weight {w} at rank {rank} has the wrong sign",
                    scale.id
                )));
            }
            prev = w;
        }
        if ws.len() as u32 != scale.len() {
            return Err(ValuationError::InvalidTable(format!(
                "scale {}: {} weights for {} levels",
                scale.id,
                ws.len(),
                scale.len()
            )));
        }
        Ok(())
    }

    pub fn weight(&self, scale: &TitleScale, rank: u32) -> Result<f64> {
        self.scales
            .get(&scale.id)
            .ok_or_else(|| ValuationError::UnknownScale(scale.id.clone()))?
            .get(&rank)
            .copied()
            .ok_or_else(|| ValuationError::MissingWeight {
                scale: scale.id.clone(),
                rank,
            })
    }

    /// Weight of `title` for `perspective`: the table entry at its rank.
    pub fn signed_weight(
        &self,
        perspective: &UnitId,
        title: &TitleRecord,
        scale: &TitleScale,
    ) -> Result<f64> {
        let rank = title.rank_from(perspective, scale)?;
        self.weight(scale, rank)
    }
}

/// Signed weight of the title on `source` for `perspective`.
pub fn signed_weight(
    perspective: &UnitId,
    source: &SourceId,
    eq: &SourcingEquilibrium,
    table: &WeightTable,
) -> Result<f64> {
    let title = eq
        .titles
        .get(source)
        .ok_or_else(|| ValuationError::Untitled(source.clone()))?;
    table.signed_weight(perspective, title, eq.scale_for_source(source)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightMode {
    All,
    NonFinancial,
    FinancialOnly,
}

impl WeightMode {
    fn admits(self, kind: &SourceType) -> bool {
        match self {
            WeightMode::All => true,
            WeightMode::NonFinancial => !kind.is_financial(),
            WeightMode::FinancialOnly => kind.is_financial(),
        }
    }
}

/// Sum of `perspective`'s signed weights over `scope`. Sources that are
/// missing, untitled, filtered out by `mode`, or where the perspective is not
/// a party contribute nothing.
pub fn portfolio_weight<'a>(
    perspective: &UnitId,
    scope: impl IntoIterator<Item = &'a SourceId>,
    eq: &SourcingEquilibrium,
    table: &WeightTable,
    mode: WeightMode,
) -> Result<f64> {
    let mut total = 0.0;
    for id in scope {
        let (Some(source), Some(title)) = (eq.sources.get(id), eq.titles.get(id)) else {
            continue;
        };
        if !mode.admits(&source.kind) || !title.is_party(perspective) {
            continue;
        }
        let scale = eq
            .scale_of(&source.kind)
            .ok_or_else(|| ModelError::UnknownScale(source.kind.to_string()))?;
        total += table.signed_weight(perspective, title, scale)?;
    }
    Ok(total)
}

/// Sources of every kind where `unit` is outsourcer or insourcer side.
pub fn party_sources<'a>(
    unit: &'a UnitId,
    eq: &'a SourcingEquilibrium,
) -> impl Iterator<Item = &'a SourceId> + 'a {
    eq.titles
        .values()
        .filter(move |t| t.is_party(unit))
        .map(|t| &t.source)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    #[serde(flatten)]
    pub costs: Costs,
    pub total: f64,
}

/// Costs of the sources a subunit currently uses. The acquisition part of a
/// profile (capital, lease, personnel amounts) is routed by the tenure of the
/// current title level; the other categories are copied as they are.
pub fn cost_estimate(subunit: &SubunitId, eq: &SourcingEquilibrium) -> Result<CostBreakdown> {
    if !eq.subunits.contains_key(subunit) {
        return Err(ValuationError::UnknownSubunit(subunit.clone()));
    }
    let mut costs = Costs::default();
    for title in eq.titles_used_by(subunit) {
        let Some(source) = eq.sources.get(&title.source) else {
            continue;
        };
        let scale = eq.scale_for_source(&title.source)?;
        let tenure = scale
            .level(title.level)
            .map(|l| l.tenure)
            .unwrap_or(Tenure::Owned);
        let p = &source.costs;
        let acquisition = p.capital_owned + p.lease_rent_license + p.personnel;
        let routed = match tenure {
            Tenure::Owned => CostCategory::CapitalOwned,
            Tenure::Leased => CostCategory::LeaseRentLicense,
            Tenure::Employed | Tenure::Contracted => CostCategory::Personnel,
        };
        *costs.slot(routed) += acquisition;
        for cat in [
            CostCategory::OperationalCosts,
            CostCategory::Insurance,
            CostCategory::ManagementOverhead,
            CostCategory::PriorObligations,
        ] {
            *costs.slot(cat) += p.get(cat);
        }
    }
    Ok(CostBreakdown {
        total: costs.total(),
        costs,
    })
}

/// Whether `source` is internal for `perspective`: the perspective holds a
/// positive title on it and no other unit consuming the services of the
/// source's using subunit holds a heavier title. Ties resolve internal.
pub fn is_internal(
    source: &SourceId,
    perspective: &UnitId,
    eq: &SourcingEquilibrium,
    table: &WeightTable,
) -> Result<bool> {
    let title = eq
        .titles
        .get(source)
        .ok_or_else(|| ValuationError::Untitled(source.clone()))?;
    if !title.is_party(perspective) {
        return Ok(false);
    }
    let scale = eq.scale_for_source(source)?;
    if title.polarity(perspective, scale)? != Polarity::Positive {
        return Ok(false);
    }
    let own = table.signed_weight(perspective, title, scale)?;
    for edge in eq.service_edges.values() {
        if edge.provider != title.using_subunit {
            continue;
        }
        let Some(other) = eq.consumer_unit(&edge.consumer) else {
            continue;
        };
        if other == perspective {
            continue;
        }
        let theirs = if title.is_party(other) {
            table.signed_weight(other, title, scale)?
        } else {
            0.0
        };
        if theirs > own {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Fraction, by absolute title weight, of `unit`'s titled sources of type
/// `kind` that are internal to it.
pub fn degree_internal_abs(
    unit: &UnitId,
    kind: &SourceType,
    eq: &SourcingEquilibrium,
    table: &WeightTable,
) -> Result<f64> {
    let mut internal = 0.0;
    let mut total = 0.0;
    let mut seen = false;
    for title in eq.titles.values().filter(|t| t.is_party(unit)) {
        let Some(source) = eq.sources.get(&title.source) else {
            continue;
        };
        if &source.kind != kind {
            continue;
        }
        seen = true;
        let scale = eq.scale_for_source(&title.source)?;
        let w = table.signed_weight(unit, title, scale)?.abs();
        total += w;
        if is_internal(&title.source, unit, eq, table)? {
            internal += w;
        }
    }
    if !seen || total == 0.0 {
        return Err(ValuationError::NoSourcesOfType {
            unit: unit.clone(),
            source_type: kind.clone(),
        });
    }
    Ok(internal / total)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkEntry {
    #[serde(rename = "type")]
    pub source_type: SourceType,
    pub segment: String,
    /// Expected proportion of external sources, in `[0, 1]`.
    pub external: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Benchmark {
    pub entries: Vec<BenchmarkEntry>,
}

impl Benchmark {
    pub fn from_json(text: &str) -> Result<Self> {
        let b: Benchmark = serde_json::from_str(text)
            .map_err(|e| ValuationError::InvalidBenchmark(e.to_string()))?;
        if let Some(bad) = b
            .entries
            .iter()
            .find(|e| !(0.0..=1.0).contains(&e.external))
        {
            return Err(ValuationError::InvalidBenchmark(format!(
                "proportion {} for {} outside [0, 1]",
                bad.external, bad.source_type
            )));
        }
        Ok(b)
    }

    pub fn external_proportion(&self, kind: &SourceType, segment: &str) -> Option<f64> {
        self.entries
            .iter()
            .find(|e| &e.source_type == kind && e.segment == segment)
            .map(|e| e.external)
    }
}

/// Absolute degree relative to the benchmark's internal norm; values above 1
/// mean more internal than the norm.
pub fn degree_internal_rel(
    unit: &UnitId,
    kind: &SourceType,
    eq: &SourcingEquilibrium,
    table: &WeightTable,
    benchmark: &Benchmark,
    segment: &str,
) -> Result<f64> {
    let external = benchmark
        .external_proportion(kind, segment)
        .ok_or_else(|| ValuationError::MissingBenchmark {
            source_type: kind.clone(),
            segment: segment.to_owned(),
        })?;
    let abs = degree_internal_abs(unit, kind, eq, table)?;
    if external >= 1.0 {
        return Err(ValuationError::DegenerateBenchmark(kind.clone()));
    }
    Ok(abs / (1.0 - external))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ServiceVolumes {
    pub internal_volume: f64,
    pub external_volume: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ServiceDegrees {
    pub internal_volume: f64,
    pub external_volume: f64,
    pub degree_internal: f64,
}

/// Volumes of services provided by `unit`'s subunits, split by whether the
/// consumer is inside the unit.
pub fn service_volumes(unit: &UnitId, eq: &SourcingEquilibrium) -> Result<ServiceVolumes> {
    if !eq.units.contains_key(unit) {
        return Err(ValuationError::UnknownUnit(unit.clone()));
    }
    let mut v = ServiceVolumes::default();
    for edge in eq.service_edges.values() {
        if eq.unit_of(&edge.provider) != Some(unit) {
            continue;
        }
        if eq.consumer_unit(&edge.consumer) == Some(unit) {
            v.internal_volume += edge.volume;
        } else {
            v.external_volume += edge.volume;
        }
    }
    Ok(v)
}

pub fn service_provision_degrees(
    unit: &UnitId,
    eq: &SourcingEquilibrium,
) -> Result<ServiceDegrees> {
    let v = service_volumes(unit, eq)?;
    let total = v.internal_volume + v.external_volume;
    if total <= 0.0 {
        return Err(ValuationError::NoServices(unit.clone()));
    }
    Ok(ServiceDegrees {
        internal_volume: v.internal_volume,
        external_volume: v.external_volume,
        degree_internal: v.internal_volume / total,
    })
}

/// Valuable, rare, inimitable and non-substitutable all at once.
pub fn sustainable_advantage(source: &Source) -> bool {
    source.advantage.all()
}

/// Sources internal to `unit`.
pub fn internal_sources(
    unit: &UnitId,
    eq: &SourcingEquilibrium,
    table: &WeightTable,
) -> Result<Vec<SourceId>> {
    let mut out = Vec::new();
    for id in party_sources(unit, eq) {
        if is_internal(id, unit, eq, table)? {
            out.push(id.clone());
        }
    }
    Ok(out)
}
