//! Subcommand implementations.

use std::path::{Path, PathBuf};

use cfdist_core::counterfactual::{marginal_cdf, CovariateMap, CovariateTransform};
use cfdist_core::data::default_y_grid;
use cfdist_core::decomposition::{
    decompose_full, decompose_with_bands, flatten_reports, smooth_curve, DecompositionConfig, DecompositionReport,
    DenominatorReport, DISPLAY_BANDWIDTH,
};
use cfdist_core::estimators::{ConditionalDistributionModel, Estimator, GridFlag};
use cfdist_core::inference::{bootstrap_curves, ks_test, uniform_band, DrawMatrix, KsReport, NullHypothesis};
use cfdist_core::{FunctionalCurve, FunctionalKind, Group, GroupSample, GroupedDataset, UniformBand};
use serde::Serialize;

use crate::config::{CounterfactualConfig, LoadedConfig, RunConfig};
use crate::error::{CliError, CliResult};
use crate::io::load_csv;
use crate::output::{curves_csv, draws_csv, write_json, CurveRows, Metadata};

/// Command-line values that take precedence over the config document.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
}

/// Everything a subcommand needs: validated config, data, grids, metadata.
pub struct Context {
    pub config: RunConfig,
    pub dataset: GroupedDataset,
    pub metadata: Metadata,
    pub output_dir: PathBuf,
    pub u_grid: Vec<f64>,
    pub functional_u_grid: Vec<f64>,
    pub y_grid: Vec<f64>,
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

impl Context {
    pub fn prepare(loaded: &LoadedConfig, overrides: &Overrides) -> CliResult<Self> {
        let mut config = loaded.config.clone();
        if overrides.seed.is_some() {
            config.seed = overrides.seed;
        }
        config.validate()?;
        let output_dir = match &overrides.output_dir {
            Some(dir) => dir.clone(),
            None => resolve(&loaded.base_dir, &config.output_dir),
        };
        let dataset = load_csv(&resolve(&loaded.base_dir, &config.input), &config.columns)?;
        let mut y_grid = default_y_grid(&dataset, config.grids.y_points)?;
        if let Estimator::DurationDr { y0, .. } = config.estimator {
            y_grid = with_grid_points(y_grid, &[y0]);
        }
        Ok(Self {
            metadata: Metadata::new(&loaded.bytes, config.seed),
            u_grid: config.u_grid()?,
            functional_u_grid: config.functional_u_grid()?,
            config,
            dataset,
            output_dir,
            y_grid,
        })
    }

    fn path(&self, suffix: &str) -> CliResult<PathBuf> {
        std::fs::create_dir_all(&self.output_dir)?;
        Ok(self.output_dir.join(format!("{}.{suffix}", self.config.name)))
    }
}

#[derive(Serialize)]
struct FitDiagnostics {
    group: Group,
    estimator: Estimator,
    observations: usize,
    degenerate_grid_points: Vec<f64>,
    separated_grid_points: Vec<f64>,
    bracket_failures: Vec<f64>,
    /// Positive-weight observations of the other group outside the
    /// estimation bounding box.
    other_group_outside_support: usize,
    other_group_outside_support_fraction: f64,
}

fn outside_box(support: &[(f64, f64)], sample: &GroupSample) -> (usize, f64) {
    let active: Vec<usize> = (0..sample.len()).filter(|&i| sample.weight(i) > 0.0).collect();
    let outside = active
        .iter()
        .filter(|&&i| sample.covariates(i).iter().zip(support).any(|(v, (lo, hi))| v < lo || v > hi))
        .count();
    let fraction = if active.is_empty() { 0.0 } else { outside as f64 / active.len() as f64 };
    (outside, fraction)
}

fn grid_points_with(model: &ConditionalDistributionModel, pred: impl Fn(GridFlag) -> bool) -> Vec<f64> {
    model.y_grid.iter().zip(&model.flags).filter(|(_, &f)| pred(f)).map(|(&y, _)| y).collect()
}

/// Fits the configured estimator on one group; writes the model and its
/// fit diagnostics.
pub fn cmd_fit(ctx: &Context) -> CliResult<Vec<PathBuf>> {
    let group = ctx.config.fit_group.unwrap_or(Group::Zero);
    let other = if group == Group::Zero { Group::One } else { Group::Zero };
    let sample = ctx.dataset.group(group);
    let estimator = ctx.config.estimator;
    let model_path = ctx.path("model.json")?;
    let (support, flags_model) = match estimator.fit_quantiles(sample, &ctx.u_grid) {
        Some(model) => {
            let model = model?;
            write_json(&model_path, &ctx.metadata, &model)?;
            (model.support.clone(), None)
        }
        None => {
            let model = estimator.fit_cdf(sample, &ctx.u_grid, &ctx.y_grid)?;
            write_json(&model_path, &ctx.metadata, &model)?;
            (model.support.clone(), Some(model))
        }
    };
    let (outside, fraction) = outside_box(&support, ctx.dataset.group(other));
    let pick = |pred: fn(GridFlag) -> bool| flags_model.as_ref().map(|m| grid_points_with(m, pred)).unwrap_or_default();
    let diagnostics = FitDiagnostics {
        group,
        estimator,
        observations: sample.len(),
        degenerate_grid_points: pick(|f| matches!(f, GridFlag::DegenerateZero | GridFlag::DegenerateOne)),
        separated_grid_points: pick(|f| f == GridFlag::Separated),
        bracket_failures: pick(|f| f == GridFlag::BracketFailure),
        other_group_outside_support: outside,
        other_group_outside_support_fraction: fraction,
    };
    let report_path = ctx.path("fit.report.json")?;
    write_json(&report_path, &ctx.metadata, &diagnostics)?;
    Ok(vec![model_path, report_path])
}

/// Curves of one counterfactual: for each functional, the counterfactual,
/// the reference and their difference.
struct CounterfactualCurves {
    curves: Vec<(String, FunctionalCurve)>,
    outside_support_fraction: f64,
}

fn default_functionals(config: &RunConfig) -> Vec<FunctionalKind> {
    if config.functionals.is_empty() {
        vec![FunctionalKind::Quantile, FunctionalKind::Cdf]
    } else {
        config.functionals.clone()
    }
}

fn evaluate_counterfactuals(
    dataset: &GroupedDataset,
    config: &RunConfig,
    u_grid: &[f64],
    functional_u_grid: &[f64],
    y_grid: &[f64],
) -> cfdist_core::Result<Vec<CounterfactualCurves>> {
    let needed = |g: Group| {
        config.counterfactuals.iter().any(|c| {
            c.conditional_group == g || c.reference.as_ref().map_or(false, |r| r.conditional_group == g)
        })
    };
    let mut models: [Option<ConditionalDistributionModel>; 2] = [None, None];
    for g in Group::BOTH {
        if needed(g) {
            models[g.index()] = Some(config.estimator.fit_cdf(dataset.group(g), u_grid, y_grid)?);
        }
    }
    let marginal = |cond: Group, cov: Group, transform: Option<&CovariateTransform>| {
        let model = models[cond.index()].as_ref().expect("model fitted for every referenced group");
        marginal_cdf(model, dataset.group(cov), transform.map(|t| t as &dyn CovariateMap))
    };
    let functionals = default_functionals(config);
    config
        .counterfactuals
        .iter()
        .map(|cf: &CounterfactualConfig| {
            let target = marginal(cf.conditional_group, cf.covariate_group, cf.transform.as_ref())?;
            let reference = match &cf.reference {
                Some(r) => marginal(r.conditional_group, r.covariate_group, r.transform.as_ref())?,
                None => marginal(cf.conditional_group, cf.conditional_group, None)?,
            };
            let mut curves = Vec::new();
            for kind in &functionals {
                let a = kind.apply(&target.distribution, functional_u_grid, y_grid)?;
                let b = kind.apply(&reference.distribution, functional_u_grid, y_grid)?;
                let effect = a.minus(&b, "effect")?;
                let name = kind.name();
                curves.push((format!("{}/{name}/counterfactual", cf.name), a));
                curves.push((format!("{}/{name}/reference", cf.name), b));
                curves.push((format!("{}/{name}/effect", cf.name), effect));
            }
            Ok(CounterfactualCurves { curves, outside_support_fraction: target.outside_support_fraction() })
        })
        .collect()
}

fn flatten_curves(sets: &[CounterfactualCurves]) -> Vec<f64> {
    sets.iter().flat_map(|s| s.curves.iter().flat_map(|(_, c)| c.values.iter().copied())).collect()
}

fn split_draws(draws: &DrawMatrix, lengths: &[usize]) -> Vec<Vec<Vec<f64>>> {
    let mut offset = 0;
    lengths
        .iter()
        .map(|&len| {
            let part = draws.rows.iter().map(|r| r[offset..offset + len].to_vec()).collect();
            offset += len;
            part
        })
        .collect()
}

#[derive(Serialize)]
struct CurveSummary {
    label: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    critical_value: Option<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    tests: Vec<KsReport>,
}

#[derive(Serialize)]
struct CounterfactualSummary {
    name: String,
    outside_support_fraction: f64,
    curves: Vec<CurveSummary>,
}

#[derive(Serialize)]
struct CounterfactualReport {
    replications: Option<usize>,
    failed_replications: Vec<usize>,
    level: Option<f64>,
    counterfactuals: Vec<CounterfactualSummary>,
}

struct CounterfactualRun {
    sets: Vec<CounterfactualCurves>,
    bands: Option<(Vec<UniformBand>, DrawMatrix, f64)>,
}

fn run_counterfactuals(ctx: &Context, require_bootstrap: bool) -> CliResult<CounterfactualRun> {
    let config = &ctx.config;
    if config.counterfactuals.is_empty() {
        return Err(CliError::Config("counterfactuals: at least one counterfactual is required".into()));
    }
    let eval = |ds: &GroupedDataset| evaluate_counterfactuals(ds, config, &ctx.u_grid, &ctx.functional_u_grid, &ctx.y_grid);
    let sets = eval(&ctx.dataset)?;
    let plan = config.bootstrap_plan()?;
    if plan.is_none() && require_bootstrap {
        return Err(CliError::Config("bootstrap: required by this subcommand".into()));
    }
    let bands = match plan {
        Some((plan, level)) => {
            let draws = bootstrap_curves(&ctx.dataset, &plan, |ds| eval(ds).map(|s| flatten_curves(&s)))?;
            let lengths: Vec<usize> = sets.iter().flat_map(|s| s.curves.iter().map(|(_, c)| c.len())).collect();
            let parts = split_draws(&draws, &lengths);
            let curves = sets.iter().flat_map(|s| s.curves.iter().map(|(_, c)| c));
            let bands = curves.zip(&parts).map(|(c, d)| uniform_band(c, d, level)).collect::<Result<Vec<_>, _>>()?;
            Some((bands, draws, level))
        }
        None => None,
    };
    Ok(CounterfactualRun { sets, bands })
}

/// Counterfactual distributions, their functionals, effects, bands and
/// KS-type tests.
pub fn cmd_counterfactual(ctx: &Context) -> CliResult<Vec<PathBuf>> {
    let run = run_counterfactuals(ctx, false)?;
    let all: Vec<&(String, FunctionalCurve)> = run.sets.iter().flat_map(|s| s.curves.iter()).collect();
    let bands = run.bands.as_ref().map(|(b, _, _)| b);
    let blocks: Vec<CurveRows<'_>> = all
        .iter()
        .enumerate()
        .map(|(k, (label, curve))| CurveRows { label: label.clone(), curve, band: bands.map(|b| &b[k]) })
        .collect();
    let curves_path = ctx.path("curves.csv")?;
    std::fs::write(&curves_path, curves_csv(&ctx.metadata, &blocks))?;

    let lengths: Vec<usize> = all.iter().map(|(_, c)| c.len()).collect();
    let parts = run.bands.as_ref().map(|(_, draws, _)| split_draws(draws, &lengths));
    let mut k = 0;
    let mut counterfactuals = Vec::new();
    for (cf, set) in ctx.config.counterfactuals.iter().zip(&run.sets) {
        let mut curves = Vec::new();
        for (label, curve) in &set.curves {
            let (critical_value, tests) = match (&run.bands, &parts) {
                (Some((bands, _, _)), Some(parts)) => {
                    let tests = if label.ends_with("/effect") {
                        let part = &parts[k];
                        [NullHypothesis::NoEffect, NullHypothesis::ConstantEffect, NullHypothesis::PositiveEffect]
                            .into_iter()
                            .map(|null| ks_test(curve, part, null))
                            .collect::<Result<Vec<_>, _>>()?
                    } else {
                        Vec::new()
                    };
                    (Some(bands[k].critical_value), tests)
                }
                _ => (None, Vec::new()),
            };
            curves.push(CurveSummary { label: label.clone(), critical_value, tests });
            k += 1;
        }
        counterfactuals.push(CounterfactualSummary {
            name: cf.name.clone(),
            outside_support_fraction: set.outside_support_fraction,
            curves,
        });
    }
    let report = CounterfactualReport {
        replications: run.bands.as_ref().map(|(_, d, _)| d.rows.len()),
        failed_replications: run.bands.as_ref().map(|(_, d, _)| d.failed.clone()).unwrap_or_default(),
        level: run.bands.as_ref().map(|(_, _, l)| *l),
        counterfactuals,
    };
    let report_path = ctx.path("report.json")?;
    write_json(&report_path, &ctx.metadata, &report)?;
    Ok(vec![curves_path, report_path])
}

/// Adds the points strictly inside the grid's range that are not already on it.
fn with_grid_points(mut grid: Vec<f64>, points: &[f64]) -> Vec<f64> {
    let (lo, hi) = (grid[0], grid[grid.len() - 1]);
    for &p in points {
        if p > lo && p < hi && !grid.contains(&p) {
            grid.push(p);
        }
    }
    grid.sort_by(f64::total_cmp);
    grid
}

fn decomposition_config(ctx: &Context) -> CliResult<DecompositionConfig> {
    let config = &ctx.config;
    let block =
        config.decomposition.as_ref().ok_or_else(|| CliError::Config("decomposition: block is missing".into()))?;
    let union_index =
        config.union_index().ok_or_else(|| CliError::Config("columns.union: required for decomposition".into()))?;
    let union_logit_columns = block.union_logit_columns.as_ref().map(|names| {
        names.iter().filter_map(|n| config.columns.covariates.iter().position(|c| c == n)).collect()
    });
    // Both minimum wages become grid points so the threshold is exact.
    let y_grid = with_grid_points(ctx.y_grid.clone(), &[block.policy.m_old, block.policy.m_new]);
    Ok(DecompositionConfig {
        estimator: config.estimator,
        policy: block.policy,
        union_index,
        union_logit_columns,
        functionals: block.functionals.clone(),
        order: block.order,
        u_grid: ctx.u_grid.clone(),
        y_grid,
        functional_u_grid: ctx.functional_u_grid.clone(),
    })
}

#[derive(Serialize)]
struct DecompositionOutput<'a> {
    order: [&'static str; 4],
    replications: Option<usize>,
    failed_replications: Vec<usize>,
    denominators: Option<DenominatorReport>,
    telescoping_error: Vec<(String, f64)>,
    reports: &'a [DecompositionReport],
}

struct DecompositionRun {
    reports: Vec<DecompositionReport>,
    denominators: Option<DenominatorReport>,
    draws: Option<DrawMatrix>,
}

fn run_decomposition(ctx: &Context) -> CliResult<DecompositionRun> {
    let dconfig = decomposition_config(ctx)?;
    Ok(match ctx.config.bootstrap_plan()? {
        Some((plan, level)) => {
            let (result, draws) = decompose_with_bands(&ctx.dataset, &dconfig, &plan, level)?;
            DecompositionRun { reports: result.reports, denominators: result.denominators, draws: Some(draws) }
        }
        None => {
            let result = decompose_full(&ctx.dataset, &dconfig)?;
            DecompositionRun { reports: result.reports, denominators: result.denominators, draws: None }
        }
    })
}

fn decomposition_blocks(reports: &[DecompositionReport]) -> Vec<CurveRows<'_>> {
    let mut blocks = Vec::new();
    for r in reports {
        blocks.push(CurveRows { label: format!("{}/total", r.functional), curve: &r.total, band: r.total_band.as_ref() });
        for c in &r.components {
            blocks.push(CurveRows { label: format!("{}/{}", r.functional, c.name), curve: &c.curve, band: c.band.as_ref() });
        }
    }
    blocks
}

/// Four-way decomposition with optional bands; optionally writes smoothed
/// quantile and Lorenz curves for display.
pub fn cmd_decompose(ctx: &Context) -> CliResult<Vec<PathBuf>> {
    let run = run_decomposition(ctx)?;
    let order = ctx.config.decomposition.as_ref().map(|d| d.order).unwrap_or_default();
    let output = DecompositionOutput {
        order: order.component_names(),
        replications: run.draws.as_ref().map(|d| d.rows.len()),
        failed_replications: run.draws.as_ref().map(|d| d.failed.clone()).unwrap_or_default(),
        denominators: run.denominators,
        telescoping_error: run.reports.iter().map(|r| (r.functional.clone(), r.telescoping_error())).collect(),
        reports: &run.reports,
    };
    let report_path = ctx.path("decomposition.report.json")?;
    write_json(&report_path, &ctx.metadata, &output)?;
    let curves_path = ctx.path("decomposition.curves.csv")?;
    std::fs::write(&curves_path, curves_csv(&ctx.metadata, &decomposition_blocks(&run.reports)))?;
    let mut paths = vec![report_path, curves_path];

    if ctx.config.decomposition.as_ref().is_some_and(|d| d.smooth) {
        let mut smoothed: Vec<(String, FunctionalCurve)> = Vec::new();
        for (r, kind) in run.reports.iter().zip(&decomposition_config(ctx)?.functionals) {
            if matches!(kind, FunctionalKind::Quantile | FunctionalKind::Lorenz) {
                smoothed.push((format!("{}/total", r.functional), smooth_curve(&r.total, DISPLAY_BANDWIDTH)?));
                for c in &r.components {
                    smoothed.push((format!("{}/{}", r.functional, c.name), smooth_curve(&c.curve, DISPLAY_BANDWIDTH)?));
                }
            }
        }
        let blocks: Vec<CurveRows<'_>> =
            smoothed.iter().map(|(label, curve)| CurveRows { label: label.clone(), curve, band: None }).collect();
        let path = ctx.path("decomposition.smoothed.curves.csv")?;
        std::fs::write(&path, curves_csv(&ctx.metadata, &blocks))?;
        paths.push(path);
    }
    Ok(paths)
}

/// Dumps the bootstrap draw matrix of the counterfactual curves (or of the
/// decomposition when no counterfactuals are configured).
pub fn cmd_bands_audit(ctx: &Context) -> CliResult<Vec<PathBuf>> {
    if ctx.config.bootstrap.is_none() {
        return Err(CliError::Config("bootstrap: required by bands-audit".into()));
    }
    let bytes = if !ctx.config.counterfactuals.is_empty() {
        let run = run_counterfactuals(ctx, true)?;
        let (_, draws, _) = run.bands.expect("bootstrap configured");
        let labels: Vec<(String, &FunctionalCurve)> =
            run.sets.iter().flat_map(|s| s.curves.iter().map(|(l, c)| (l.clone(), c))).collect();
        draws_csv(&ctx.metadata, &labels, &draws.replications, &draws.rows)
    } else {
        let run = run_decomposition(ctx)?;
        let draws = run.draws.expect("bootstrap configured");
        debug_assert_eq!(flatten_reports(&run.reports).len(), draws.rows.first().map_or(0, Vec::len));
        let labels: Vec<(String, &FunctionalCurve)> =
            decomposition_blocks(&run.reports).into_iter().map(|b| (b.label, b.curve)).collect();
        draws_csv(&ctx.metadata, &labels, &draws.replications, &draws.rows)
    };
    let path = ctx.path("draws.csv")?;
    std::fs::write(&path, bytes)?;
    Ok(vec![path])
}
