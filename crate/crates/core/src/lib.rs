//! Knowledge-graph embedding with a relation-specific linear head over an
//! MLP of entity pairs, trained with logical-rule penalties.
//!
//! The crate is split into the graph/rule data layer ([`kg`]), the scoring
//! network ([`model`]), rule groundings and penalties ([`rules`]), the
//! training loop ([`trainer`]) and link-prediction evaluation ([`eval`]).

pub mod error;
pub mod eval;
pub mod kg;
pub mod model;
pub mod rules;
pub mod trainer;

pub use error::{Error, Result};
pub use kg::{EntityId, KnowledgeGraph, RelationId, Rule, RuleKind, Split, Triple};
pub use model::{ActivationPlan, Architecture, ModelParameters};
pub use trainer::{train, TrainingConfig, TrainingTrace};
