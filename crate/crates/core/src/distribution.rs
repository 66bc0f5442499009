//! Marginal step distributions and the functionals computed from them.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::data::validate_increasing;
use crate::{Error, Result};

/// A right-continuous CDF on a finite grid: F(y) = cdf[k] for
/// y_grid[k] <= y < y_grid[k + 1], and 0 below the grid.
///
/// Any mass missing at the top (cdf[last] < 1) is treated as sitting on the
/// last grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepDistribution {
    y_grid: Vec<f64>,
    cdf: Vec<f64>,
}

impl StepDistribution {
    pub fn new(y_grid: Vec<f64>, cdf: Vec<f64>) -> Result<Self> {
        validate_increasing(&y_grid, "y_grid")?;
        if cdf.len() != y_grid.len() {
            return Err(Error::DimensionMismatch { expected: y_grid.len(), found: cdf.len() });
        }
        if cdf.iter().any(|v| !(0.0..=1.0).contains(v)) || cdf.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::InvalidArgument("CDF values must be nondecreasing in [0, 1]".into()));
        }
        Ok(Self { y_grid, cdf })
    }

    /// Builds a distribution from raw estimates: values are clamped to
    /// [0, 1] and rearranged into nondecreasing order.
    pub fn from_estimates(y_grid: Vec<f64>, mut values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| v.is_nan()) {
            return Err(Error::InvalidArgument("NaN in CDF estimates".into()));
        }
        for v in &mut values {
            *v = v.clamp(0.0, 1.0);
        }
        crate::estimators::rearrange_values(&mut values);
        Self::new(y_grid, values)
    }

    /// Weighted empirical CDF of a sample evaluated on `y_grid`.
    pub fn empirical(outcomes: &[f64], weights: &[f64], y_grid: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        let mut pairs: Vec<(f64, f64)> = outcomes.iter().copied().zip(weights.iter().copied()).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut cdf = Vec::with_capacity(y_grid.len());
        let (mut acc, mut j) = (0.0, 0);
        for &y in &y_grid {
            while j < pairs.len() && pairs[j].0 <= y {
                acc += pairs[j].1;
                j += 1;
            }
            cdf.push(if j == pairs.len() { 1.0 } else { (acc / total).min(1.0) });
        }
        Self::from_estimates(y_grid, cdf)
    }

    pub fn y_grid(&self) -> &[f64] {
        &self.y_grid
    }

    pub fn cdf_values(&self) -> &[f64] {
        &self.cdf
    }

    /// F(y) under the step convention.
    pub fn cdf_at(&self, y: f64) -> f64 {
        match self.y_grid.partition_point(|&g| g <= y) {
            0 => 0.0,
            k => self.cdf[k - 1],
        }
    }

    /// (support point, probability) pairs, including the top-up mass on the
    /// last grid point.
    pub fn atoms(&self) -> Vec<(f64, f64)> {
        let mut prev = 0.0;
        let last = self.cdf.len() - 1;
        self.y_grid
            .iter()
            .zip(&self.cdf)
            .enumerate()
            .map(|(k, (&y, &f))| {
                let mass = if k == last { 1.0 - prev } else { f - prev };
                prev = f;
                (y, mass)
            })
            .collect()
    }

    /// Left inverse inf{y : F(y) >= u} over the grid, together with an
    /// underflow flag set when no grid point reaches u (the largest grid
    /// point is returned then).
    pub fn quantile_with_flag(&self, u: f64) -> Result<(f64, bool)> {
        if !(u > 0.0 && u < 1.0) {
            return Err(Error::Domain(format!("quantile index {u} outside (0, 1)")));
        }
        let k = self.cdf.partition_point(|&f| f < u);
        if k == self.cdf.len() {
            Ok((self.y_grid[k - 1], true))
        } else {
            Ok((self.y_grid[k], false))
        }
    }

    pub fn quantile(&self, u: f64) -> Result<f64> {
        self.quantile_with_flag(u).map(|(q, _)| q)
    }

    pub fn quantile_curve(&self, u_grid: &[f64]) -> Result<FunctionalCurve> {
        let values = u_grid.iter().map(|&u| self.quantile(u)).collect::<Result<Vec<_>>>()?;
        FunctionalCurve::new("quantile", u_grid.to_vec(), values)
    }

    pub fn cdf_curve(&self, y_grid: &[f64]) -> Result<FunctionalCurve> {
        FunctionalCurve::new("cdf", y_grid.to_vec(), y_grid.iter().map(|&y| self.cdf_at(y)).collect())
    }

    pub fn mean(&self) -> f64 {
        self.atoms().iter().map(|(y, p)| y * p).sum()
    }

    /// E[Y^2] - E[Y]^2.
    pub fn variance(&self) -> f64 {
        let atoms = self.atoms();
        let m: f64 = atoms.iter().map(|(y, p)| y * p).sum();
        let m2: f64 = atoms.iter().map(|(y, p)| y * y * p).sum();
        m2 - m * m
    }

    fn nonnegative_mean(&self) -> Result<f64> {
        if self.atoms().iter().any(|&(y, p)| p > 0.0 && y < 0.0) {
            return Err(Error::Domain("Lorenz curve needs nonnegative outcomes".into()));
        }
        let mu = self.mean();
        if !(mu > 0.0) {
            return Err(Error::Domain("Lorenz curve needs a positive mean".into()));
        }
        Ok(mu)
    }

    /// Share of the total outcome held at or below level `y`.
    pub fn lorenz(&self, y: f64) -> Result<f64> {
        let mu = self.nonnegative_mean()?;
        let partial: f64 = self.atoms().iter().filter(|(t, _)| *t <= y).map(|(t, p)| t * p).sum();
        Ok(partial / mu)
    }

    /// Lorenz curve in the probability index,
    /// L(p) = (1 / mean) * integral_0^p Q(s) ds, on `p_grid` within [0, 1].
    /// Piecewise linear and convex in p.
    pub fn lorenz_curve(&self, p_grid: &[f64]) -> Result<FunctionalCurve> {
        let mu = self.nonnegative_mean()?;
        let atoms: Vec<(f64, f64)> = self.atoms().into_iter().filter(|a| a.1 > 0.0).collect();
        let mut values = Vec::with_capacity(p_grid.len());
        for &p in p_grid {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Domain(format!("Lorenz index {p} outside [0, 1]")));
            }
            let (mut cum_p, mut cum_t) = (0.0, 0.0);
            for &(t, mass) in &atoms {
                if cum_p + mass >= p {
                    cum_t += t * (p - cum_p);
                    break;
                }
                cum_p += mass;
                cum_t += t * mass;
            }
            values.push((cum_t / mu).min(1.0));
        }
        FunctionalCurve::new("lorenz", p_grid.to_vec(), values)
    }

    /// Gini coefficient 1 - 2 * integral_0^1 L(p) dp, integrated exactly by
    /// the trapezoid rule over the atoms' cumulative probabilities.
    pub fn gini(&self) -> Result<f64> {
        let mu = self.nonnegative_mean()?;
        let mut area = 0.0;
        let mut lower = 0.0;
        for (t, p) in self.atoms() {
            let upper = lower + t * p / mu;
            area += 0.5 * p * (lower + upper);
            lower = upper;
        }
        Ok((1.0 - 2.0 * area).clamp(0.0, 1.0))
    }
}

/// A curve (or a scalar, stored as a one-point curve) produced by a
/// functional of one or more distributions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionalCurve {
    pub label: String,
    pub index_grid: Vec<f64>,
    pub values: Vec<f64>,
}

impl FunctionalCurve {
    pub fn new(label: &str, index_grid: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if index_grid.len() != values.len() {
            return Err(Error::DimensionMismatch { expected: index_grid.len(), found: values.len() });
        }
        Ok(Self { label: label.to_string(), index_grid, values })
    }

    pub fn scalar(label: &str, value: f64) -> Self {
        Self { label: label.to_string(), index_grid: vec![0.0], values: vec![value] }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Pointwise `self - other` on a shared grid.
    pub fn minus(&self, other: &FunctionalCurve, label: &str) -> Result<FunctionalCurve> {
        if self.index_grid != other.index_grid {
            return Err(Error::GridMismatch(format!("cannot difference `{}` and `{}`", self.label, other.label)));
        }
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect();
        FunctionalCurve::new(label, self.index_grid.clone(), values)
    }
}

/// Functionals applied to marginal distributions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FunctionalKind {
    Cdf,
    Quantile,
    Lorenz,
    Gini,
    Mean,
    Variance,
    /// Q(upper) - Q(lower), e.g. the 90-10 spread.
    QuantileSpread { upper: f64, lower: f64 },
}

impl FunctionalKind {
    pub fn name(&self) -> String {
        match self {
            FunctionalKind::Cdf => "cdf".into(),
            FunctionalKind::Quantile => "quantile".into(),
            FunctionalKind::Lorenz => "lorenz".into(),
            FunctionalKind::Gini => "gini".into(),
            FunctionalKind::Mean => "mean".into(),
            FunctionalKind::Variance => "variance".into(),
            FunctionalKind::QuantileSpread { upper, lower } => {
                format!("spread_{}_{}", libm::round(upper * 100.0), libm::round(lower * 100.0))
            }
        }
    }

    pub fn is_scalar(&self) -> bool {
        !matches!(self, FunctionalKind::Cdf | FunctionalKind::Quantile | FunctionalKind::Lorenz)
    }

    /// Evaluates the functional: CDFs on `y_grid`, quantile and Lorenz
    /// curves on `u_grid`, scalars as one-point curves.
    pub fn apply(&self, dist: &StepDistribution, u_grid: &[f64], y_grid: &[f64]) -> Result<FunctionalCurve> {
        let name = self.name();
        match *self {
            FunctionalKind::Cdf => dist.cdf_curve(y_grid),
            FunctionalKind::Quantile => dist.quantile_curve(u_grid),
            FunctionalKind::Lorenz => dist.lorenz_curve(u_grid),
            FunctionalKind::Gini => Ok(FunctionalCurve::scalar(&name, dist.gini()?)),
            FunctionalKind::Mean => Ok(FunctionalCurve::scalar(&name, dist.mean())),
            FunctionalKind::Variance => Ok(FunctionalCurve::scalar(&name, dist.variance())),
            FunctionalKind::QuantileSpread { upper, lower } => {
                Ok(FunctionalCurve::scalar(&name, dist.quantile(upper)? - dist.quantile(lower)?))
            }
        }
    }
}
