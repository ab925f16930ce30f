//! Local mappings, event structures and the structural validators.

mod mapping;
mod model;
mod structure;
mod validate;

use thiserror::Error;

pub use mapping::{
    decode_into, encode, Counterexample, LocalMapping, MapTable, SiteTemplate, MAX_TABLE_ENTRIES,
};
pub use model::{Attachment, GeometrySpec, GrowthModel, Parameter};
pub use structure::{
    check_boundedness, independent_construction, rates_from_events, Bounds, CouplingError,
    EventCoupling, EventStructure, Transition, TransitionRateSet,
};
pub use validate::{validate_growth_model, GrowthVerdict, DEFAULT_BUDGET};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EventError {
    #[error("expected a local configuration of {expected} sites, got {got}")]
    ArityMismatch { expected: usize, got: usize },
    #[error("type index {0} out of range")]
    TypeOutOfRange(usize),
    #[error("table for {n_types} types on {arity} sites exceeds the entry cap")]
    TableTooLarge { n_types: usize, arity: usize },
    #[error("table has {got} entries, expected {expected}")]
    TableShape { expected: usize, got: usize },
    #[error("mapping {label:?} has invalid rate {rate}")]
    InvalidRate { label: String, rate: f64 },
    #[error("site template is empty")]
    EmptyTemplate,
    #[error("site {0} repeated in template")]
    RepeatedSite(String),
    #[error("mappings {0:?} and {1:?} are identical")]
    DuplicateMapping(String, String),
    #[error("mapping {label:?} is over {got} types, expected {expected}")]
    TypeCountMismatch {
        label: String,
        expected: usize,
        got: usize,
    },
    #[error("mixed site template kinds: {0}")]
    MixedTemplates(String),
    #[error("bound exceeded: {0}")]
    BoundExceeded(String),
    #[error("mapping {label:?} is not additive: {witness}")]
    NotAdditive {
        label: String,
        witness: Counterexample,
    },
    #[error("unknown parameter {0:?}")]
    UnknownParameter(String),
    #[error("parameter {name:?}: {detail}")]
    BadParameter { name: String, detail: String },
}
