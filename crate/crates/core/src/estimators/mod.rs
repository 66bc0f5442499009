//! Conditional quantile and conditional distribution models.
//!
//! Quantile models (location shift, linear quantile regression) store
//! coefficient curves over a u-grid; distribution models (distribution
//! regression, the shared-slope duration variant, models derived from a
//! quantile model, and the minimum-wage construction) produce F(y | x) on a
//! y-grid. All models are evaluated at raw covariate vectors; the intercept
//! is implicit.

mod binary;
mod distreg;
mod location;
mod quantreg;

use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::data::{cell_measures, validate_increasing, GroupSample};
use crate::decomposition::{MinWagePolicy, MinWageStrategy};
use crate::math::Link;
use crate::{Error, Result};

pub(crate) use binary::fit_binary;
pub use distreg::{fit_distribution_regression, fit_duration_dr};
pub use location::fit_location_model;
pub use quantreg::{check_loss, fit_quantile_regression};

/// Coefficient norm beyond which a binary fit is declared separated.
pub const SEPARATION_CAP: f64 = 30.0;
/// Probability clamp applied to separated grid points.
pub const PROBABILITY_CLAMP: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuantileModelKind {
    Location,
    QuantileRegression,
}

/// Model choice for a conditional distribution of the outcome.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Estimator {
    Location,
    #[serde(rename = "qr")]
    QuantileRegression,
    #[serde(rename = "dr")]
    DistributionRegression {
        #[serde(default)]
        link: Link,
    },
    DurationDr {
        #[serde(default)]
        link: Link,
        y0: f64,
    },
}

impl Estimator {
    /// Fits the estimator and returns F(y | x) on `y_grid`. Quantile models
    /// are fitted on `u_grid` and inverted; every result is rearranged.
    pub fn fit_cdf(&self, sample: &GroupSample, u_grid: &[f64], y_grid: &[f64]) -> Result<ConditionalDistributionModel> {
        let model = match *self {
            Estimator::Location => qf_to_cdf(&fit_location_model(sample, u_grid)?, y_grid)?,
            Estimator::QuantileRegression => qf_to_cdf(&fit_quantile_regression(sample, u_grid)?, y_grid)?,
            Estimator::DistributionRegression { link } => fit_distribution_regression(sample, y_grid, link)?,
            Estimator::DurationDr { link, y0 } => fit_duration_dr(sample, y_grid, link, y0)?,
        };
        Ok(rearrange(&model))
    }

    pub fn fit_quantiles(&self, sample: &GroupSample, u_grid: &[f64]) -> Option<Result<ConditionalQuantileModel>> {
        match self {
            Estimator::Location => Some(fit_location_model(sample, u_grid)),
            Estimator::QuantileRegression => Some(fit_quantile_regression(sample, u_grid)),
            _ => None,
        }
    }
}

/// Q(u | x) on a u-grid.
///
/// Row k of `coefficients` is `[alpha(u_k), beta...]` for the location kind
/// (Q = x'beta + alpha(u), beta shared across rows) and `beta(u_k)` for
/// quantile regression (Q = x'beta(u)). `beta` starts with the intercept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionalQuantileModel {
    pub kind: QuantileModelKind,
    pub u_grid: Vec<f64>,
    pub coefficients: Vec<Vec<f64>>,
    /// Per-covariate (min, max) of the estimation sample.
    pub support: Vec<(f64, f64)>,
}

impl ConditionalQuantileModel {
    pub fn covariate_dim(&self) -> usize {
        self.support.len()
    }

    /// Design coefficients (intercept first) at grid index `k`.
    pub fn beta(&self, k: usize) -> &[f64] {
        match self.kind {
            QuantileModelKind::Location => &self.coefficients[k][1..],
            QuantileModelKind::QuantileRegression => &self.coefficients[k],
        }
    }

    pub fn quantile_at(&self, k: usize, x: &[f64]) -> f64 {
        let row = &self.coefficients[k];
        match self.kind {
            QuantileModelKind::Location => row[0] + index(&row[1..], x),
            QuantileModelKind::QuantileRegression => index(row, x),
        }
    }

    /// Q(u_k | x) for every grid index k.
    pub fn quantiles(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.covariate_dim(), x)?;
        Ok((0..self.u_grid.len()).map(|k| self.quantile_at(k, x)).collect())
    }

    /// Adds `shift` to Q(u | x) for every u and x.
    pub fn shifted(&self, shift: f64) -> Self {
        let mut out = self.clone();
        for row in &mut out.coefficients {
            row[0] += shift;
        }
        out
    }
}

/// Linear index b_0 + sum_j b_j x_j.
#[inline]
pub(crate) fn index(beta: &[f64], x: &[f64]) -> f64 {
    beta[0] + beta[1..].iter().zip(x).map(|(b, v)| b * v).sum::<f64>()
}

fn check_dim(expected: usize, x: &[f64]) -> Result<()> {
    if x.len() != expected {
        return Err(Error::DimensionMismatch { expected, found: x.len() });
    }
    Ok(())
}

/// Status of a fitted threshold in a distribution model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridFlag {
    Ok,
    /// No positive-weight outcome at or below the threshold: F = 0.
    DegenerateZero,
    /// Every positive-weight outcome at or below the threshold: F = 1.
    DegenerateOne,
    /// Coefficients hit the separation cap; probabilities are clamped.
    Separated,
    /// Duration model: no root for alpha(y) inside the search bracket.
    BracketFailure,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DistributionRepr {
    /// F(y | x) = link(x'beta(y)), one coefficient row per threshold.
    DistributionRegression { coefficients: Vec<Vec<f64>> },
    /// F(y | x) = link(alpha(y) + x'beta) with alpha(anchor) = 0.
    DurationDr { anchor: f64, slope: Vec<f64>, shifts: Vec<f64> },
    /// F(y | x) = measure of {u : Q(u | x) <= y} under the u-grid cells.
    DerivedFromQuantiles { source: ConditionalQuantileModel },
    /// Recent-year wage structure under the base-year minimum wage.
    MinWage {
        policy: MinWagePolicy,
        /// Index of the grid point used as the minimum wage (largest y <= m_old).
        threshold_index: usize,
        threshold_on_grid: bool,
        recent: Box<ConditionalDistributionModel>,
        base: Box<ConditionalDistributionModel>,
    },
}

/// F(y | x) on a y-grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionalDistributionModel {
    pub y_grid: Vec<f64>,
    pub link: Link,
    #[serde(flatten)]
    pub repr: DistributionRepr,
    pub flags: Vec<GridFlag>,
    pub support: Vec<(f64, f64)>,
    /// Sort F(. | x) over the grid at evaluation time.
    pub rearranged: bool,
}

impl ConditionalDistributionModel {
    pub fn covariate_dim(&self) -> usize {
        self.support.len()
    }

    pub fn kind_name(&self) -> &'static str {
        match self.repr {
            DistributionRepr::DistributionRegression { .. } => "distribution_regression",
            DistributionRepr::DurationDr { .. } => "duration_dr",
            DistributionRepr::DerivedFromQuantiles { .. } => "derived_from_quantiles",
            DistributionRepr::MinWage { .. } => "min_wage",
        }
    }

    /// F(y_k | x) for every grid point.
    pub fn evaluate(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.y_grid.len()];
        self.evaluate_into(x, &mut out)?;
        Ok(out)
    }

    pub fn evaluate_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        check_dim(self.covariate_dim(), x)?;
        debug_assert_eq!(out.len(), self.y_grid.len());
        match &self.repr {
            DistributionRepr::DistributionRegression { coefficients } => {
                for ((o, beta), flag) in out.iter_mut().zip(coefficients).zip(&self.flags) {
                    *o = flagged_probability(self.link, *flag, index(beta, x));
                }
            }
            DistributionRepr::DurationDr { slope, shifts, .. } => {
                let eta = index(slope, x);
                for ((o, alpha), flag) in out.iter_mut().zip(shifts).zip(&self.flags) {
                    *o = flagged_probability(self.link, *flag, alpha + eta);
                }
            }
            DistributionRepr::DerivedFromQuantiles { source } => {
                quantiles_to_cdf(source, x, &self.y_grid, out);
            }
            DistributionRepr::MinWage { policy, threshold_index, recent, base, .. } => {
                recent.evaluate_into(x, out)?;
                let t = *threshold_index;
                if t > 0 {
                    match policy.strategy {
                        MinWageStrategy::Censoring => out[..t].fill(0.0),
                        MinWageStrategy::RatioScaling => {
                            let below = base.evaluate(x)?;
                            if below[t] == 0.0 {
                                return Err(Error::ZeroDenominator { observation: 0 });
                            }
                            let ratio = out[t] / below[t];
                            for (o, b) in out[..t].iter_mut().zip(&below[..t]) {
                                *o = b * ratio;
                            }
                        }
                    }
                }
            }
        }
        if self.rearranged {
            rearrange_values(out);
        }
        Ok(())
    }
}

fn flagged_probability(link: Link, flag: GridFlag, eta: f64) -> f64 {
    match flag {
        GridFlag::DegenerateZero => 0.0,
        GridFlag::DegenerateOne => 1.0,
        GridFlag::Separated => link.cdf(eta).clamp(PROBABILITY_CLAMP, 1.0 - PROBABILITY_CLAMP),
        GridFlag::Ok | GridFlag::BracketFailure => link.cdf(eta),
    }
}

fn quantiles_to_cdf(source: &ConditionalQuantileModel, x: &[f64], y_grid: &[f64], out: &mut [f64]) {
    let cells = cell_measures(&source.u_grid);
    let mut pairs: Vec<(f64, f64)> =
        (0..cells.len()).map(|k| (source.quantile_at(k, x), cells[k])).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut acc = 0.0;
    let mut j = 0;
    for (o, &y) in out.iter_mut().zip(y_grid) {
        while j < pairs.len() && pairs[j].0 <= y {
            acc += pairs[j].1;
            j += 1;
        }
        *o = if j == pairs.len() { 1.0 } else { acc.min(1.0) };
    }
}

/// Converts a quantile model to a distribution model on `y_grid`:
/// F(y | x) is the u-cell measure of {u : Q(u | x) <= y}.
pub fn qf_to_cdf(model: &ConditionalQuantileModel, y_grid: &[f64]) -> Result<ConditionalDistributionModel> {
    validate_increasing(y_grid, "y_grid")?;
    Ok(ConditionalDistributionModel {
        y_grid: y_grid.to_vec(),
        link: Link::default(),
        flags: vec![GridFlag::Ok; y_grid.len()],
        support: model.support.clone(),
        repr: DistributionRepr::DerivedFromQuantiles { source: model.clone() },
        rearranged: false,
    })
}

/// Monotone rearrangement applied lazily: evaluations of the returned model
/// are sorted over the y-grid.
pub fn rearrange(model: &ConditionalDistributionModel) -> ConditionalDistributionModel {
    ConditionalDistributionModel { rearranged: true, ..model.clone() }
}

/// Sorts a vector of CDF values into nondecreasing order (the monotone
/// rearrangement on a grid).
pub fn rearrange_values(values: &mut [f64]) {
    values.sort_by(f64::total_cmp);
}
