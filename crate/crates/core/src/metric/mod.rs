//! Rough Riemannian metrics on the lattice and their exponent ledgers.

pub mod builders;
mod field;
pub mod ledger;
pub mod spd;

pub use builders::{
    conformal_singular_metric, flat_metric, interpolate_metrics, metric_from_transitions,
    random_rough_metric, scaled_metric, MetricBuilder, MetricRegistry, MetricSpec, TransitionData,
    TransitionField,
};
pub use field::{MetricField, DEFAULT_FLOOR, FLOOR_TOLERANCE};
pub use ledger::{
    exponents_lp_derivable, exponents_quasiconformal, interpolate_exponents, n_of_g, ExponentLedger,
};
pub use spd::geometric_mean;
