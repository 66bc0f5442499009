//! Sequential decomposition of a change in the outcome distribution between a
//! base group (0) and a recent group (1) into minimum-wage, unionization,
//! composition and price effects.
//!
//! Every counterfactual is F(y) = sum_z w_z [p(z) F(y | 1, z) + (1 - p(z)) F(y | 0, z)]
//! for some conditional model F(. | u, z), union propensity p and covariate
//! sample z. Components are consecutive differences of a functional along a
//! chain of such distributions, so they add up to the total change.

use alloc::boxed::Box;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::counterfactual::normalize_mass;
use crate::data::{cell_measures, Group, GroupSample, GroupedDataset};
use crate::distribution::{FunctionalCurve, FunctionalKind, StepDistribution};
use crate::estimators::{
    fit_binary, index, ConditionalDistributionModel, ConditionalQuantileModel, DistributionRepr, Estimator,
    QuantileModelKind,
};
use crate::inference::{bootstrap_curves, uniform_band, BootstrapPlan, DrawMatrix, UniformBand};
use crate::linalg::{weighted_gram, Cholesky};
use crate::math::{exp, Link, SQRT_2PI};
use crate::parallel::map_indexed;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MinWageStrategy {
    /// Below the minimum, F_old rescaled to meet F_new at the minimum.
    RatioScaling,
    /// No mass below the minimum.
    Censoring,
}

/// `m_old` is the minimum wage imposed on the recent-year structure;
/// `m_new` is the minimum observed with it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinWagePolicy {
    pub strategy: MinWageStrategy,
    pub m_old: f64,
    pub m_new: f64,
}

impl MinWagePolicy {
    /// The same policy with the roles of the two minima exchanged.
    pub fn swapped(&self) -> Self {
        Self { strategy: self.strategy, m_old: self.m_new, m_new: self.m_old }
    }
}

/// Recent-year conditional distribution under the base-year minimum wage.
///
/// Below `m_old`: ratio scaling gives F_old(y|x) F_new(m|x) / F_old(m|x) and
/// censoring gives 0; at and above it the result is F_new(y|x). `m` is the
/// largest grid point at or below `m_old`.
pub fn minwage_counterfactual_cdf(
    model_new: &ConditionalDistributionModel,
    model_old: &ConditionalDistributionModel,
    policy: &MinWagePolicy,
) -> Result<ConditionalDistributionModel> {
    if model_new.y_grid.len() != model_old.y_grid.len()
        || model_new
            .y_grid
            .iter()
            .zip(&model_old.y_grid)
            .any(|(a, b)| (a - b).abs() > 1e-12 * a.abs().max(1.0))
    {
        return Err(Error::GridMismatch("minimum-wage models must share a y_grid".into()));
    }
    if model_new.covariate_dim() != model_old.covariate_dim() {
        return Err(Error::DimensionMismatch { expected: model_new.covariate_dim(), found: model_old.covariate_dim() });
    }
    if !policy.m_old.is_finite() || !policy.m_new.is_finite() {
        return Err(Error::InvalidArgument("minimum-wage levels must be finite".into()));
    }
    let grid = &model_new.y_grid;
    let below = grid.partition_point(|&y| y <= policy.m_old);
    let threshold_index = below.saturating_sub(1);
    let threshold_on_grid = below > 0 && grid[threshold_index] == policy.m_old;
    if !threshold_on_grid {
        log::warn!(
            "minimum wage {} is not on the y grid; using grid point {}",
            policy.m_old,
            grid[threshold_index]
        );
    }
    Ok(ConditionalDistributionModel {
        y_grid: grid.clone(),
        link: model_new.link,
        repr: DistributionRepr::MinWage {
            policy: *policy,
            threshold_index,
            threshold_on_grid,
            recent: Box::new(model_new.clone()),
            base: Box::new(model_old.clone()),
        },
        flags: model_new.flags.clone(),
        support: model_new.support.clone(),
        rearranged: true,
    })
}

/// Ratio-branch denominators F_old(m | x) over a covariate sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DenominatorReport {
    pub minimum: f64,
    /// Observations with a denominator below 1e-6.
    pub small: usize,
}

pub fn ratio_denominators(model: &ConditionalDistributionModel, sample: &GroupSample) -> Result<DenominatorReport> {
    let DistributionRepr::MinWage { threshold_index, base, .. } = &model.repr else {
        return Err(Error::InvalidArgument("not a minimum-wage model".into()));
    };
    let values = map_indexed(sample.len(), |i| base.evaluate(sample.covariates(i)).map(|f| f[*threshold_index]));
    let mut report = DenominatorReport { minimum: f64::INFINITY, small: 0 };
    for v in values {
        let v = v?;
        report.minimum = report.minimum.min(v);
        report.small += usize::from(v < 1e-6);
    }
    Ok(report)
}

/// Probability of union membership given the remaining covariates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum UnionPropensity {
    /// link(c_0 + sum_j c_j x[columns[j - 1]]).
    Logit { coefficients: Vec<f64>, columns: Vec<usize>, separated: bool },
    /// The observed indicator itself.
    Observed,
}

impl UnionPropensity {
    pub fn probability(&self, x: &[f64], union_index: usize) -> f64 {
        match self {
            UnionPropensity::Logit { coefficients, columns, .. } => {
                let z: Vec<f64> = columns.iter().map(|&c| x[c]).collect();
                let p = Link::Logit.cdf(index(coefficients, &z));
                p.clamp(crate::estimators::PROBABILITY_CLAMP, 1.0 - crate::estimators::PROBABILITY_CLAMP)
            }
            UnionPropensity::Observed => x[union_index],
        }
    }
}

fn check_union_column(sample: &GroupSample, union_index: usize) -> Result<()> {
    if union_index >= sample.covariate_dim() {
        return Err(Error::DimensionMismatch { expected: sample.covariate_dim(), found: union_index + 1 });
    }
    if let Some(i) = (0..sample.len()).find(|&i| {
        let u = sample.covariates(i)[union_index];
        u != 0.0 && u != 1.0
    }) {
        return Err(Error::Validation(format!("union indicator of observation {i} is not 0 or 1")));
    }
    Ok(())
}

/// Weighted logit of the union indicator on `columns` (all other covariates
/// when `None`), with the separation policy of distribution regression.
pub fn fit_union_logit(sample: &GroupSample, union_index: usize, columns: Option<&[usize]>) -> Result<UnionPropensity> {
    check_union_column(sample, union_index)?;
    let columns: Vec<usize> = match columns {
        Some(c) => {
            if let Some(&bad) = c.iter().find(|&&j| j >= sample.covariate_dim() || j == union_index) {
                return Err(Error::InvalidArgument(format!("invalid union logit column {bad}")));
            }
            c.to_vec()
        }
        None => (0..sample.covariate_dim()).filter(|&j| j != union_index).collect(),
    };
    let d = columns.len() + 1;
    let mut rows = Vec::with_capacity(sample.len() * d);
    for i in 0..sample.len() {
        rows.push(1.0);
        rows.extend(columns.iter().map(|&c| sample.covariates(i)[c]));
    }
    let weights: Vec<f64> = sample.weights().collect();
    let gram = weighted_gram(rows.chunks(d).zip(weights.iter().copied()), d);
    Cholesky::new(&gram, d).map_err(|column| Error::RankDeficient {
        column: if column == 0 { 0 } else { columns[column - 1] + 1 },
    })?;
    let hits: Vec<bool> = (0..sample.len()).map(|i| sample.covariates(i)[union_index] == 1.0).collect();
    let fit = fit_binary(&rows, d, &weights, &hits, Link::Logit);
    let separated = fit.flag != crate::estimators::GridFlag::Ok;
    if separated {
        log::warn!("union logit flagged as {:?}", fit.flag);
    }
    let coefficients = match fit.flag {
        crate::estimators::GridFlag::DegenerateZero => {
            let mut c = vec![0.0; d];
            c[0] = -crate::estimators::SEPARATION_CAP;
            c
        }
        crate::estimators::GridFlag::DegenerateOne => {
            let mut c = vec![0.0; d];
            c[0] = crate::estimators::SEPARATION_CAP;
            c
        }
        _ => fit.coefficients,
    };
    Ok(UnionPropensity::Logit { coefficients, columns, separated })
}

/// The union-mixed conditional CDF p(z) F(y | 1, z) + (1 - p(z)) F(y | 0, z)
/// at one covariate vector (its own union entry is ignored).
pub fn union_mixture_at(
    model: &ConditionalDistributionModel,
    propensity: &UnionPropensity,
    x: &[f64],
    union_index: usize,
) -> Result<Vec<f64>> {
    let p = propensity.probability(x, union_index);
    let mut z = x.to_vec();
    let branch = |z: &mut Vec<f64>, u: f64| {
        z[union_index] = u;
        model.evaluate(z)
    };
    if p == 1.0 {
        return branch(&mut z, 1.0);
    }
    if p == 0.0 {
        return branch(&mut z, 0.0);
    }
    let f1 = branch(&mut z, 1.0)?;
    let f0 = branch(&mut z, 0.0)?;
    Ok(f1.iter().zip(&f0).map(|(a, b)| p * a + (1.0 - p) * b).collect())
}

const CHUNK: usize = 256;

/// Marginal CDF of `model` with union status drawn from `propensity` and the
/// remaining covariates from `covariate_sample`.
pub fn union_reweighted_cdf(
    model: &ConditionalDistributionModel,
    propensity: &UnionPropensity,
    covariate_sample: &GroupSample,
    union_index: usize,
) -> Result<StepDistribution> {
    if union_index >= model.covariate_dim() || covariate_sample.covariate_dim() != model.covariate_dim() {
        return Err(Error::DimensionMismatch { expected: model.covariate_dim(), found: covariate_sample.covariate_dim() });
    }
    let active: Vec<usize> = (0..covariate_sample.len()).filter(|&i| covariate_sample.weight(i) > 0.0).collect();
    let mut total = vec![0.0; model.y_grid.len()];
    let mut mass = 0.0;
    for chunk in active.chunks(CHUNK) {
        let values = map_indexed(chunk.len(), |j| {
            let i = chunk[j];
            union_mixture_at(model, propensity, covariate_sample.covariates(i), union_index).map_err(|e| match e {
                Error::ZeroDenominator { .. } => Error::ZeroDenominator { observation: i },
                other => other,
            })
        });
        for (j, v) in values.into_iter().enumerate() {
            let w = covariate_sample.weight(chunk[j]);
            for (t, f) in total.iter_mut().zip(v?) {
                *t += w * f;
            }
            mass += w;
        }
    }
    StepDistribution::from_estimates(model.y_grid.clone(), normalize_mass(total, mass))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecompositionOrder {
    /// Minimum wage, unionization, composition, price.
    #[default]
    Forward,
    /// Price, composition, unionization, minimum wage.
    Reverse,
}

impl DecompositionOrder {
    pub fn component_names(&self) -> [&'static str; 4] {
        match self {
            DecompositionOrder::Forward => ["minimum_wage", "unionization", "composition", "price"],
            DecompositionOrder::Reverse => ["price", "composition", "unionization", "minimum_wage"],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionConfig {
    pub estimator: Estimator,
    pub policy: MinWagePolicy,
    /// Covariate column holding the 0/1 union indicator.
    pub union_index: usize,
    #[serde(default)]
    pub union_logit_columns: Option<Vec<usize>>,
    pub functionals: Vec<FunctionalKind>,
    #[serde(default)]
    pub order: DecompositionOrder,
    /// Estimation grid of quantile models.
    pub u_grid: Vec<f64>,
    pub y_grid: Vec<f64>,
    /// Index grid of quantile and Lorenz functionals.
    pub functional_u_grid: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub name: String,
    pub curve: FunctionalCurve,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub band: Option<UniformBand>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionReport {
    pub functional: String,
    pub total: FunctionalCurve,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub total_band: Option<UniformBand>,
    pub components: Vec<Component>,
    pub order: DecompositionOrder,
}

impl DecompositionReport {
    /// Largest |sum of components - total| over the grid.
    pub fn telescoping_error(&self) -> f64 {
        (0..self.total.len())
            .map(|t| {
                let sum: f64 = self.components.iter().map(|c| c.curve.values[t]).sum();
                (sum - self.total.values[t]).abs()
            })
            .fold(0.0, f64::max)
    }
}

/// The five distributions of the decomposition, from the observed recent
/// distribution to the observed base distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionChain {
    pub order: DecompositionOrder,
    pub distributions: Vec<StepDistribution>,
    /// Ratio-branch denominators over both covariate samples (ratio
    /// strategy only).
    pub denominators: Option<DenominatorReport>,
}

/// Builds the chain.
///
/// Forward: F[Y1 m1 U1 Z1], F[Y1 m0 U1 Z1], F[Y1 m0 U0 Z1], F[Y1 m0 U0 Z0],
/// F[Y0 m0 U0 Z0]. Reverse: F[Y1 m1 U1 Z1], F[Y0 m1 U1 Z1], F[Y0 m1 U1 Z0],
/// F[Y0 m1 U0 Z0], F[Y0 m0 U0 Z0], where Y0 m1 is the base-year structure
/// under the recent minimum. The two endpoints are model-based and shared by
/// both orders.
pub fn decomposition_chain(dataset: &GroupedDataset, config: &DecompositionConfig) -> Result<DecompositionChain> {
    let base = dataset.group(Group::Zero);
    let recent = dataset.group(Group::One);
    let ui = config.union_index;
    let columns = config.union_logit_columns.as_deref();
    let model_base = config.estimator.fit_cdf(base, &config.u_grid, &config.y_grid)?;
    let model_recent = config.estimator.fit_cdf(recent, &config.u_grid, &config.y_grid)?;
    let p_base = fit_union_logit(base, ui, columns)?;
    let p_recent = fit_union_logit(recent, ui, columns)?;
    let mix = |m: &ConditionalDistributionModel, p: &UnionPropensity, z: &GroupSample| union_reweighted_cdf(m, p, z, ui);

    let first = mix(&model_recent, &p_recent, recent)?;
    let last = mix(&model_base, &p_base, base)?;
    let cf = match config.order {
        DecompositionOrder::Forward => minwage_counterfactual_cdf(&model_recent, &model_base, &config.policy)?,
        DecompositionOrder::Reverse => minwage_counterfactual_cdf(&model_base, &model_recent, &config.policy.swapped())?,
    };
    let denominators = match config.policy.strategy {
        MinWageStrategy::RatioScaling => {
            let a = ratio_denominators(&cf, recent)?;
            let b = ratio_denominators(&cf, base)?;
            Some(DenominatorReport { minimum: a.minimum.min(b.minimum), small: a.small + b.small })
        }
        MinWageStrategy::Censoring => None,
    };
    let distributions = match config.order {
        DecompositionOrder::Forward => {
            vec![first, mix(&cf, &p_recent, recent)?, mix(&cf, &p_base, recent)?, mix(&cf, &p_base, base)?, last]
        }
        DecompositionOrder::Reverse => {
            vec![first, mix(&cf, &p_recent, recent)?, mix(&cf, &p_recent, base)?, mix(&cf, &p_base, base)?, last]
        }
    };
    Ok(DecompositionChain { order: config.order, distributions, denominators })
}

fn report_from_chain(chain: &DecompositionChain, kind: &FunctionalKind, config: &DecompositionConfig) -> Result<DecompositionReport> {
    let values = chain
        .distributions
        .iter()
        .map(|d| kind.apply(d, &config.functional_u_grid, &config.y_grid))
        .collect::<Result<Vec<_>>>()?;
    let names = chain.order.component_names();
    let components = (0..4)
        .map(|i| {
            Ok(Component { name: names[i].to_string(), curve: values[i].minus(&values[i + 1], names[i])?, band: None })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DecompositionReport {
        functional: kind.name(),
        total: values[0].minus(&values[4], "total")?,
        total_band: None,
        components,
        order: chain.order,
    })
}

/// Reports for every configured functional plus chain diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decomposition {
    pub reports: Vec<DecompositionReport>,
    pub denominators: Option<DenominatorReport>,
}

pub fn decompose_full(dataset: &GroupedDataset, config: &DecompositionConfig) -> Result<Decomposition> {
    if config.functionals.is_empty() {
        return Err(Error::InvalidArgument("no functionals requested".into()));
    }
    let chain = decomposition_chain(dataset, config)?;
    let reports = config.functionals.iter().map(|k| report_from_chain(&chain, k, config)).collect::<Result<_>>()?;
    Ok(Decomposition { reports, denominators: chain.denominators })
}

/// One report per configured functional.
pub fn decompose(dataset: &GroupedDataset, config: &DecompositionConfig) -> Result<Vec<DecompositionReport>> {
    decompose_full(dataset, config).map(|d| d.reports)
}

/// Flattened totals and components of every report, in report order.
pub fn flatten_reports(reports: &[DecompositionReport]) -> Vec<f64> {
    let mut out = Vec::new();
    for r in reports {
        out.extend_from_slice(&r.total.values);
        for c in &r.components {
            out.extend_from_slice(&c.curve.values);
        }
    }
    out
}

/// `decompose_full` plus uniform bands for the total and every component;
/// each bootstrap replication re-runs the whole pipeline on reweighted data.
/// Also returns the draws, laid out as [`flatten_reports`].
pub fn decompose_with_bands(
    dataset: &GroupedDataset,
    config: &DecompositionConfig,
    plan: &BootstrapPlan,
    level: f64,
) -> Result<(Decomposition, DrawMatrix)> {
    let mut result = decompose_full(dataset, config)?;
    let draws = bootstrap_curves(dataset, plan, |d| decompose(d, config).map(|r| flatten_reports(&r)))?;
    let mut offset = 0;
    let mut band_for = |curve: &FunctionalCurve| -> Result<UniformBand> {
        let len = curve.len();
        let slice: Vec<Vec<f64>> = draws.rows.iter().map(|r| r[offset..offset + len].to_vec()).collect();
        offset += len;
        uniform_band(curve, &slice, level)
    };
    for r in &mut result.reports {
        r.total_band = Some(band_for(&r.total)?);
        for c in &mut r.components {
            c.band = Some(band_for(&c.curve)?);
        }
    }
    Ok((result, draws))
}

/// Forward minus reverse estimate of each named component, per functional.
pub fn order_sensitivity(dataset: &GroupedDataset, config: &DecompositionConfig) -> Result<Vec<(String, Vec<FunctionalCurve>)>> {
    let run = |order| decompose(dataset, &DecompositionConfig { order, ..config.clone() });
    let forward = run(DecompositionOrder::Forward)?;
    let reverse = run(DecompositionOrder::Reverse)?;
    forward
        .iter()
        .zip(&reverse)
        .map(|(f, r)| {
            let diffs = f
                .components
                .iter()
                .map(|c| {
                    let other = r.components.iter().find(|o| o.name == c.name).expect("same component names");
                    c.curve.minus(&other.curve, &c.name)
                })
                .collect::<Result<Vec<_>>>()?;
            Ok((f.functional.clone(), diffs))
        })
        .collect()
}

/// Var[Y] = E[b(U)]' Var[X] E[b(U)] + tr(E[XX'] Var[b(U)]) for a linear
/// quantile model; expectations over U use the u-grid cell measures.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarianceChannels {
    pub between: f64,
    pub within: f64,
}

pub fn variance_channels(model: &ConditionalQuantileModel, covariate_sample: &GroupSample) -> Result<VarianceChannels> {
    if model.kind != QuantileModelKind::QuantileRegression {
        return Err(Error::InvalidArgument("variance channels need a quantile regression model".into()));
    }
    if covariate_sample.covariate_dim() != model.covariate_dim() {
        return Err(Error::DimensionMismatch { expected: model.covariate_dim(), found: covariate_sample.covariate_dim() });
    }
    let d = covariate_sample.design_dim();
    let cells = cell_measures(&model.u_grid);
    let mut b_mean = vec![0.0; d];
    for (row, c) in model.coefficients.iter().zip(&cells) {
        for (m, b) in b_mean.iter_mut().zip(row) {
            *m += c * b;
        }
    }
    let mut v_beta = vec![0.0; d * d];
    for (row, c) in model.coefficients.iter().zip(&cells) {
        for j in 0..d {
            for k in 0..d {
                v_beta[j * d + k] += c * (row[j] - b_mean[j]) * (row[k] - b_mean[k]);
            }
        }
    }
    let m_x = weighted_gram((0..covariate_sample.len()).map(|i| (covariate_sample.design_row(i), covariate_sample.weight(i))), d);
    let x_mean: Vec<f64> = (0..d).map(|j| m_x[j]).collect();
    let mut between = 0.0;
    let mut within = 0.0;
    for j in 0..d {
        for k in 0..d {
            let s_x = m_x[j * d + k] - x_mean[j] * x_mean[k];
            between += b_mean[j] * s_x * b_mean[k];
            within += m_x[j * d + k] * v_beta[k * d + j];
        }
    }
    Ok(VarianceChannels { between, within })
}

/// Kernel bandwidth of display smoothing in the probability index.
pub const DISPLAY_BANDWIDTH: f64 = 0.015;

/// Nadaraya-Watson smoothing of a curve over its index grid with a Gaussian
/// kernel. For display only.
pub fn smooth_curve(curve: &FunctionalCurve, bandwidth: f64) -> Result<FunctionalCurve> {
    if !(bandwidth > 0.0) {
        return Err(Error::InvalidArgument("bandwidth must be positive".into()));
    }
    let grid = &curve.index_grid;
    let values = grid
        .iter()
        .map(|&u| {
            let (mut num, mut den) = (0.0, 0.0);
            for (&v, &y) in grid.iter().zip(&curve.values) {
                let z = (u - v) / bandwidth;
                let k = exp(-0.5 * z * z) / SQRT_2PI;
                num += k * y;
                den += k;
            }
            num / den
        })
        .collect();
    FunctionalCurve::new(&curve.label, grid.clone(), values)
}
