//! Counterfactual marginal distributions built from regression models.
//!
//! A conditional model (quantile regression, location regression,
//! distribution regression, or the shared-slope duration variant) is fitted
//! on one group and integrated against the empirical covariate distribution
//! of another group. The resulting step distributions feed quantile,
//! distribution, Lorenz, Gini and moment functionals, exchangeable-bootstrap
//! uniform bands, KS-type tests, and sequential decompositions of a total
//! distributional change.
//!
//! The crate is `no_std` (with `alloc`) unless the `std` feature is enabled;
//! the default `parallel` feature runs independent per-grid-point fits and
//! bootstrap replications on rayon. Results are bit-identical with or
//! without it.
#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod counterfactual;
pub mod data;
pub mod decomposition;
pub mod distribution;
mod error;
pub mod estimators;
pub mod inference;
pub mod linalg;
pub mod math;
mod parallel;

pub use counterfactual::{CounterfactualSpec, CovariateTransform, Marginal};
pub use data::{EvaluationGrids, Group, GroupSample, GroupedDataset, Observation};
pub use distribution::{FunctionalCurve, FunctionalKind, StepDistribution};
pub use error::{Error, Result};
pub use estimators::{ConditionalDistributionModel, ConditionalQuantileModel, GridFlag};
pub use inference::{BootstrapPlan, Scheme, UniformBand};
pub use math::Link;
