//! Discrete signature operators on flat tori carrying rough metrics.
//!
//! Forms live on the periodic cubical lattice `(Z/N)^n` with spacing
//! `h = 1/N`; metrics are sampled SPD fields with a floor and a declared
//! integrability exponent.

pub mod dec;
pub mod error;
pub mod functions;
pub mod grid;
pub mod metric;
pub mod spectral;

pub use error::{Error, Result};
pub use grid::PeriodicGrid;
