//! The single JSON document that drives a run.

use std::path::{Path, PathBuf};

use cfdist_core::counterfactual::CovariateTransform;
use cfdist_core::data::{default_u_grid, u_grid_range};
use cfdist_core::decomposition::{DecompositionOrder, MinWagePolicy};
use cfdist_core::estimators::Estimator;
use cfdist_core::inference::{BootstrapPlan, Scheme, DEFAULT_REPLICATIONS};
use cfdist_core::{FunctionalKind, Group};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::io::ColumnRoles;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridRange {
    pub min: f64,
    pub max: f64,
    pub step: f64,
}

impl GridRange {
    pub fn build(&self, field: &str) -> CliResult<Vec<f64>> {
        u_grid_range(self.min, self.max, self.step).map_err(|e| CliError::Config(format!("{field}: {e}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    /// Quantile-model grid; 0.02, 0.021, ..., 0.98 when absent.
    #[serde(default)]
    pub u: Option<GridRange>,
    /// Number of outcome grid points.
    #[serde(default = "default_y_points")]
    pub y_points: usize,
    /// Index grid of quantile and Lorenz curves; the model grid when absent.
    #[serde(default)]
    pub functional_u: Option<GridRange>,
}

fn default_y_points() -> usize {
    100
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { u: None, y_points: default_y_points(), functional_u: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupSpec {
    pub conditional_group: Group,
    pub covariate_group: Group,
    #[serde(default)]
    pub transform: Option<CovariateTransform>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CounterfactualConfig {
    pub name: String,
    pub conditional_group: Group,
    pub covariate_group: Group,
    #[serde(default)]
    pub transform: Option<CovariateTransform>,
    /// Distribution the effects are measured against; defaults to the
    /// conditional group with its own covariates.
    #[serde(default)]
    pub reference: Option<GroupSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BootstrapConfig {
    pub scheme: Scheme,
    #[serde(default = "default_replications")]
    pub replications: usize,
    #[serde(default = "default_level")]
    pub level: f64,
}

fn default_replications() -> usize {
    DEFAULT_REPLICATIONS
}

fn default_level() -> f64 {
    0.9
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecompositionBlock {
    pub policy: MinWagePolicy,
    #[serde(default)]
    pub order: DecompositionOrder,
    pub functionals: Vec<FunctionalKind>,
    /// Covariates entering the union logit; all non-union covariates when absent.
    #[serde(default)]
    pub union_logit_columns: Option<Vec<String>>,
    /// Also write kernel-smoothed quantile curves for display.
    #[serde(default)]
    pub smooth: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Input CSV, relative to the config file's directory.
    pub input: PathBuf,
    pub columns: ColumnRoles,
    pub estimator: Estimator,
    #[serde(default)]
    pub grids: GridConfig,
    /// Group the `fit` subcommand estimates on.
    #[serde(default)]
    pub fit_group: Option<Group>,
    #[serde(default)]
    pub counterfactuals: Vec<CounterfactualConfig>,
    #[serde(default)]
    pub functionals: Vec<FunctionalKind>,
    #[serde(default)]
    pub bootstrap: Option<BootstrapConfig>,
    #[serde(default)]
    pub decomposition: Option<DecompositionBlock>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Prefix of every output file name.
    #[serde(default = "default_name")]
    pub name: String,
    #[serde(default)]
    pub seed: Option<u64>,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_name() -> String {
    "cfdist".into()
}

/// A parsed config together with the bytes it came from.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: RunConfig,
    pub bytes: Vec<u8>,
    pub base_dir: PathBuf,
}

pub fn parse_config(bytes: &[u8]) -> CliResult<RunConfig> {
    let mut de = serde_json::Deserializer::from_slice(bytes);
    let config: RunConfig = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        CliError::Config(format!("{path}: {}", e.into_inner()))
    })?;
    config.validate()?;
    Ok(config)
}

pub fn load_config(path: &Path) -> CliResult<LoadedConfig> {
    let bytes =
        std::fs::read(path).map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
    let config = parse_config(&bytes)?;
    let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok(LoadedConfig { config, bytes, base_dir })
}

impl RunConfig {
    pub fn validate(&self) -> CliResult<()> {
        let cols = &self.columns;
        if let Some(union) = &cols.union {
            if !cols.covariates.contains(union) {
                return Err(CliError::Config(format!("columns.union: `{union}` must also be a covariate")));
            }
        }
        if self.grids.y_points < 2 {
            return Err(CliError::Config("grids.y_points: need at least 2 points".into()));
        }
        if let Some(b) = &self.bootstrap {
            if self.seed.is_none() {
                return Err(CliError::Config("seed: required when bootstrap is configured".into()));
            }
            if b.replications < 20 {
                return Err(CliError::Config("bootstrap.replications: uniform bands need at least 20".into()));
            }
            if !(b.level > 0.5 && b.level < 1.0) {
                return Err(CliError::Config("bootstrap.level: must lie in (0.5, 1)".into()));
            }
        }
        for (k, cf) in self.counterfactuals.iter().enumerate() {
            if let Some(t) = &cf.transform {
                if let Some(c) = t.columns.iter().find(|c| c.column >= cols.covariates.len()) {
                    return Err(CliError::Config(format!(
                        "counterfactuals[{k}].transform: column {} out of range",
                        c.column
                    )));
                }
            }
        }
        if let Some(d) = &self.decomposition {
            if cols.union.is_none() {
                return Err(CliError::Config("columns.union: required for decomposition".into()));
            }
            if d.functionals.is_empty() {
                return Err(CliError::Config("decomposition.functionals: empty".into()));
            }
            if let Some(names) = &d.union_logit_columns {
                if let Some(bad) = names.iter().find(|n| !cols.covariates.contains(n) || Some(*n) == cols.union.as_ref()) {
                    return Err(CliError::Config(format!(
                        "decomposition.union_logit_columns: `{bad}` is not a non-union covariate"
                    )));
                }
            }
        }
        self.u_grid()?;
        self.functional_u_grid()?;
        Ok(())
    }

    pub fn u_grid(&self) -> CliResult<Vec<f64>> {
        match &self.grids.u {
            Some(r) => r.build("grids.u"),
            None => Ok(default_u_grid()),
        }
    }

    pub fn functional_u_grid(&self) -> CliResult<Vec<f64>> {
        match &self.grids.functional_u {
            Some(r) => r.build("grids.functional_u"),
            None => self.u_grid(),
        }
    }

    pub fn union_index(&self) -> Option<usize> {
        let union = self.columns.union.as_ref()?;
        self.columns.covariates.iter().position(|c| c == union)
    }

    pub fn bootstrap_plan(&self) -> CliResult<Option<(BootstrapPlan, f64)>> {
        match (&self.bootstrap, self.seed) {
            (Some(b), Some(seed)) => Ok(Some((BootstrapPlan::new(b.scheme, b.replications, seed)?, b.level))),
            (Some(_), None) => Err(CliError::Config("seed: required when bootstrap is configured".into())),
            _ => Ok(None),
        }
    }
}
