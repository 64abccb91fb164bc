//! Sourcing equilibria of organizational units, the transformations
//! between them (outsourcing, insourcing and their follow-ups), concurrent
//! transformation plans, network evolution experiments, and a text format
//! for all of it.

pub mod canonical;
pub mod delta;
pub mod dsl;
pub mod fixtures;
pub mod ids;
pub mod model;
pub mod netdyn;
pub mod plan;
pub mod scale;
pub mod transform;
pub mod validate;
pub mod valuation;

pub use ids::{ContractId, ServiceId, SourceId, SubunitId, UnitId};
pub use model::{
    AdvantageFlags, Consumer, Contract, ContractKind, CostCategory, Costs, EntityKind, ModelError,
    MoneyEdge, ServiceEdge, Source, SourcingEquilibrium, Subunit, TitleRecord, Unit,
};
pub use scale::{Polarity, SourceType, TitleScale};
pub use transform::{Classification, Progression, Step, TransformationScope};
pub use validate::{validate_equilibrium, ValidationReport};
pub use valuation::WeightTable;
