//! Discrete exterior calculus on the periodic lattice.
//!
//! Cochains are collocated: every component of a form lives at its lattice
//! site, and the coboundary uses forward differences. Metric-dependent
//! operations (mass matrices, Hodge star, the involution `τ`) act
//! site by site.

pub mod commutator;
pub mod exterior;
pub mod form;
pub mod hodge;
pub mod mass;

pub use commutator::{commutator, commutator_bound_check, CommutatorReport};
pub use exterior::{coboundary, wedge_integral};
pub use form::{mult_operator, FormField};
pub use hodge::{duality_phase, hodge_star, tau, tau_phase, StarPerturbation};
pub use mass::{compound_matrix, mass_matrix, MassMatrix};
