//! Dynamically evolving entity embeddings for temporal
//! knowledge graphs, driven by a relation-modulated Rayleigh point process.
//!
//! - [`tkg`]: event streams, I/O, splits, evaluation slides, simulation
//! - [`model`]: parameters, evolving state, closed-form process quantities
//! - [`train`]: likelihood, exact window gradients, Adam, global BPTT
//! - [`eval`]: link ranking and time prediction

pub mod error;
pub mod eval;
pub mod model;
pub mod tkg;
pub mod train;

pub use error::{Error, Result};
pub use model::{Dims, DynamicState, ModelParams, Numerics};
pub use tkg::{EventLog, EventRecord};
