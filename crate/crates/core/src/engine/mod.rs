//! Finite-volume simulation: event maps, forward and dual evolution,
//! percolation, and Monte Carlo estimators.

mod events;
mod evolve;
mod montecarlo;
mod percolation;
mod system;

pub use events::*;
pub use evolve::*;
pub use montecarlo::*;
pub use percolation::*;
pub use system::*;

use thiserror::Error;

use crate::duality::DualityError;
use crate::eventmodel::EventError;
use crate::pcclass::PcError;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("geometry: {0}")]
    Geometry(String),
    #[error(transparent)]
    Event(#[from] EventError),
    #[error(transparent)]
    Duality(#[from] DualityError),
    #[error(transparent)]
    Pc(#[from] PcError),
    #[error("precondition failed: {0}")]
    PreconditionFailed(String),
    #[error("{0}")]
    BadArgument(String),
}
