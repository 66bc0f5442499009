//! Counterfactual marginal distributions: a conditional model of one group
//! integrated against the empirical covariate distribution of another.

use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::data::{cell_measures, Group, GroupSample, GroupedDataset};
use crate::distribution::{FunctionalCurve, StepDistribution};
use crate::estimators::{ConditionalDistributionModel, ConditionalQuantileModel};
use crate::parallel::map_indexed;
use crate::{Error, Result};

/// A map g applied to every covariate vector before the conditional model
/// is evaluated (the X_1 = g(X_0) counterfactual).
pub trait CovariateMap: Sync {
    fn apply(&self, x: &[f64]) -> Vec<f64>;
}

impl<F> CovariateMap for F
where
    F: Fn(&[f64]) -> Vec<f64> + Sync,
{
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        self(x)
    }
}

/// Affine change of one covariate: x_c -> scale * x_c + shift.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnTransform {
    pub column: usize,
    #[serde(default = "one")]
    pub scale: f64,
    #[serde(default)]
    pub shift: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CovariateTransform {
    pub columns: Vec<ColumnTransform>,
}

impl CovariateMap for CovariateTransform {
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut out = x.to_vec();
        for c in &self.columns {
            if let Some(v) = out.get_mut(c.column) {
                *v = c.scale * *v + c.shift;
            }
        }
        out
    }
}

/// F^k_{Y_j}: conditional model of group j, covariates of group k, and an
/// optional covariate transform.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterfactualSpec {
    pub conditional_group: Group,
    pub covariate_group: Group,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transform: Option<CovariateTransform>,
}

impl CounterfactualSpec {
    pub fn new(conditional_group: Group, covariate_group: Group) -> Self {
        Self { conditional_group, covariate_group, transform: None }
    }
}

/// A counterfactual marginal CDF with its extrapolation diagnostic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Marginal {
    pub distribution: StepDistribution,
    /// Positive-weight covariate points outside the model's estimation
    /// bounding box.
    pub outside_support: usize,
    pub evaluated: usize,
}

impl Marginal {
    pub fn outside_support_fraction(&self) -> f64 {
        if self.evaluated == 0 {
            0.0
        } else {
            self.outside_support as f64 / self.evaluated as f64
        }
    }
}

const CHUNK: usize = 256;

/// F(y) = sum_i w_i F(y | g(x_i)) over the covariate sample, rearranged.
///
/// Conditional evaluations may run in parallel; the weighted sum is always
/// accumulated in sample order.
pub fn marginal_cdf(
    model: &ConditionalDistributionModel,
    sample: &GroupSample,
    transform: Option<&dyn CovariateMap>,
) -> Result<Marginal> {
    let m = model.y_grid.len();
    let active: Vec<usize> = (0..sample.len()).filter(|&i| sample.weight(i) > 0.0).collect();
    let mut total = vec![0.0; m];
    let mut mass = 0.0;
    let mut outside = 0;
    for chunk in active.chunks(CHUNK) {
        let evaluated = map_indexed(chunk.len(), |j| -> Result<(Vec<f64>, bool)> {
            let i = chunk[j];
            let x = match transform {
                Some(g) => g.apply(sample.covariates(i)),
                None => sample.covariates(i).to_vec(),
            };
            let out_of_box = x.iter().zip(&model.support).any(|(v, (lo, hi))| v < lo || v > hi);
            let values = model.evaluate(&x).map_err(|e| match e {
                Error::ZeroDenominator { .. } => Error::ZeroDenominator { observation: i },
                other => other,
            })?;
            Ok((values, out_of_box))
        });
        for (j, result) in evaluated.into_iter().enumerate() {
            let (values, out_of_box) = result?;
            let w = sample.weight(chunk[j]);
            for (t, v) in total.iter_mut().zip(&values) {
                *t += w * v;
            }
            mass += w;
            outside += usize::from(out_of_box);
        }
    }
    Ok(Marginal {
        distribution: StepDistribution::from_estimates(model.y_grid.clone(), normalize_mass(total, mass))?,
        outside_support: outside,
        evaluated: active.len(),
    })
}

/// Divides accumulated sums by the accumulated weight so that rows of ones
/// sum to exactly one.
pub(crate) fn normalize_mass(mut total: Vec<f64>, mass: f64) -> Vec<f64> {
    for t in &mut total {
        *t /= mass;
    }
    total
}

/// Marginal for `spec`, picking the conditional model of
/// `spec.conditional_group` from `models` (indexed by group).
pub fn counterfactual_cdf(
    models: [&ConditionalDistributionModel; 2],
    dataset: &GroupedDataset,
    spec: &CounterfactualSpec,
) -> Result<Marginal> {
    let model = models[spec.conditional_group.index()];
    let sample = dataset.group(spec.covariate_group);
    match &spec.transform {
        Some(t) => {
            let probe = t.apply(&vec![0.0; sample.covariate_dim()]);
            if probe.len() != model.covariate_dim() {
                return Err(Error::DimensionMismatch { expected: model.covariate_dim(), found: probe.len() });
            }
            marginal_cdf(model, sample, Some(t))
        }
        None => marginal_cdf(model, sample, None),
    }
}

/// QE(u) = Q_counterfactual(u) - Q_reference(u).
pub fn quantile_effect(
    reference: &StepDistribution,
    counterfactual: &StepDistribution,
    u_grid: &[f64],
) -> Result<FunctionalCurve> {
    counterfactual.quantile_curve(u_grid)?.minus(&reference.quantile_curve(u_grid)?, "qe")
}

/// DE(y) = F_counterfactual(y) - F_reference(y).
pub fn distribution_effect(
    reference: &StepDistribution,
    counterfactual: &StepDistribution,
    y_grid: &[f64],
) -> Result<FunctionalCurve> {
    counterfactual.cdf_curve(y_grid)?.minus(&reference.cdf_curve(y_grid)?, "de")
}

/// Source of the treated quantile function in [`effect_distribution`].
pub enum EffectSource<'a> {
    /// Q_1(u | x) from a second quantile model.
    Model(&'a ConditionalQuantileModel),
    /// Q_0(u | g(x)).
    Transform(&'a dyn CovariateMap),
}

/// 401 points centred on the midpoint of the observed effects and spanning
/// [min - range, max + range]; a zero range widens to max(|c|, 1) so the
/// constant effect c is the exact centre point.
pub fn default_delta_grid(min: f64, max: f64) -> Vec<f64> {
    let center = 0.5 * (min + max);
    let range = max - min;
    let half = if range > 0.0 { 1.5 * range } else { center.abs().max(1.0) };
    (0..401).map(|i| center + half * (i as f64 - 200.0) / 200.0).collect()
}

/// Distribution of individual effects under rank preservation,
/// F_Delta(delta) = sum_i w_i sum_k cell_k 1{Q_Delta(u_k | x_i) <= delta},
/// with Q_Delta(u | x) = Q_1(u | x) - Q_0(u | x) over the sample's covariates.
///
/// Meaningful only when ranks are preserved between the two regimes; the
/// assumption itself is not testable from the marginals.
pub fn effect_distribution(
    model0: &ConditionalQuantileModel,
    source: EffectSource<'_>,
    sample: &GroupSample,
    delta_grid: Option<&[f64]>,
) -> Result<StepDistribution> {
    if let EffectSource::Model(model1) = &source {
        if model1.u_grid != model0.u_grid {
            return Err(Error::GridMismatch("effect distribution needs a shared u_grid".into()));
        }
    }
    let cells = cell_measures(&model0.u_grid);
    let k = cells.len();
    let effects = |x: &[f64]| -> Result<Vec<f64>> {
        let base = model0.quantiles(x)?;
        let treated = match &source {
            EffectSource::Model(model1) => model1.quantiles(x)?,
            EffectSource::Transform(g) => model0.quantiles(&g.apply(x))?,
        };
        Ok(treated.iter().zip(&base).map(|(a, b)| a - b).collect())
    };
    let active: Vec<usize> = (0..sample.len()).filter(|&i| sample.weight(i) > 0.0).collect();

    let grid = match delta_grid {
        Some(g) => {
            crate::data::validate_increasing(g, "delta_grid")?;
            g.to_vec()
        }
        None => {
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for &i in &active {
                for d in effects(sample.covariates(i))? {
                    lo = lo.min(d);
                    hi = hi.max(d);
                }
            }
            default_delta_grid(lo, hi)
        }
    };

    let mut total = vec![0.0; grid.len()];
    let mut mass = 0.0;
    for &i in &active {
        let mut pairs: Vec<(f64, f64)> = effects(sample.covariates(i))?.into_iter().zip(cells.iter().copied()).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let w = sample.weight(i);
        let (mut acc, mut j) = (0.0, 0);
        for (t, &delta) in total.iter_mut().zip(&grid) {
            while j < k && pairs[j].0 <= delta {
                acc += pairs[j].1;
                j += 1;
            }
            *t += w * if j == k { 1.0 } else { acc };
        }
        mass += w;
    }
    StepDistribution::from_estimates(grid, normalize_mass(total, mass))
}
