//! Exchangeable-bootstrap inference: weight schemes, replicated pipelines,
//! uniform confidence bands, and KS-type tests.

mod bands;
mod bootstrap;
mod weights;

pub use bands::{bootstrap_scale, ks_test, pointwise_critical_values, uniform_band, KsReport, NullHypothesis, UniformBand};
pub use bootstrap::{bootstrap_curves, DrawMatrix, MAX_FAILED_SHARE};
pub use weights::{gen_weights, BootstrapPlan, Scheme, WildLaw, DEFAULT_REPLICATIONS};
