//! Weighted two-group samples, evaluation grids, and design rows.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// One of the two groups (populations) being compared.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Group {
    Zero,
    One,
}

impl Group {
    pub const BOTH: [Group; 2] = [Group::Zero, Group::One];

    pub fn index(self) -> usize {
        match self {
            Group::Zero => 0,
            Group::One => 1,
        }
    }
}

impl TryFrom<u8> for Group {
    type Error = String;
    fn try_from(v: u8) -> core::result::Result<Self, String> {
        match v {
            0 => Ok(Group::Zero),
            1 => Ok(Group::One),
            other => Err(format!("group must be 0 or 1, got {other}")),
        }
    }
}

impl From<Group> for u8 {
    fn from(g: Group) -> u8 {
        g.index() as u8
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub outcome: f64,
    pub covariates: Vec<f64>,
    pub weight: f64,
}

impl Observation {
    pub fn new(outcome: f64, covariates: Vec<f64>, weight: f64) -> Self {
        Self { outcome, covariates, weight }
    }
}

/// The observations of one group with weights normalized to sum to one, and
/// a cached design matrix (intercept followed by the covariates).
#[derive(Debug, Clone, PartialEq)]
pub struct GroupSample {
    observations: Vec<Observation>,
    design: Vec<f64>,
    dim: usize,
}

impl GroupSample {
    pub fn new(mut observations: Vec<Observation>) -> Result<Self> {
        if observations.is_empty() {
            return Err(Error::Validation("group has no observations".into()));
        }
        let p = observations[0].covariates.len();
        let mut total = 0.0;
        for (i, obs) in observations.iter().enumerate() {
            if obs.covariates.len() != p {
                return Err(Error::DimensionMismatch { expected: p, found: obs.covariates.len() });
            }
            if !obs.outcome.is_finite() || obs.covariates.iter().any(|v| !v.is_finite()) {
                return Err(Error::Validation(format!("non-finite value in observation {i}")));
            }
            if !(obs.weight >= 0.0) || !obs.weight.is_finite() {
                return Err(Error::Validation(format!("negative or non-finite weight in observation {i}")));
            }
            total += obs.weight;
        }
        if !(total > 0.0) {
            return Err(Error::Validation("group has no observation with positive weight".into()));
        }
        // Already-normalized input is left untouched so that re-ingesting a
        // written dataset is bit-identical.
        if (total - 1.0).abs() > observations.len() as f64 * f64::EPSILON {
            for obs in &mut observations {
                obs.weight /= total;
            }
        }
        let dim = p + 1;
        let mut design = Vec::with_capacity(observations.len() * dim);
        for obs in &observations {
            design.push(1.0);
            design.extend_from_slice(&obs.covariates);
        }
        Ok(Self { observations, design, dim })
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn observations(&self) -> &[Observation] {
        &self.observations
    }

    /// Number of covariates p (excluding the intercept).
    pub fn covariate_dim(&self) -> usize {
        self.dim - 1
    }

    /// Width of a design row, p + 1.
    pub fn design_dim(&self) -> usize {
        self.dim
    }

    pub fn design_row(&self, i: usize) -> &[f64] {
        &self.design[i * self.dim..(i + 1) * self.dim]
    }

    pub fn covariates(&self, i: usize) -> &[f64] {
        &self.observations[i].covariates
    }

    pub fn outcome(&self, i: usize) -> f64 {
        self.observations[i].outcome
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.observations[i].weight
    }

    pub fn weights(&self) -> impl Iterator<Item = f64> + '_ {
        self.observations.iter().map(|o| o.weight)
    }

    /// Per-covariate (min, max) over observations with positive weight.
    pub fn bounding_box(&self) -> Vec<(f64, f64)> {
        let p = self.covariate_dim();
        let mut bounds = alloc::vec![(f64::INFINITY, f64::NEG_INFINITY); p];
        for obs in self.observations.iter().filter(|o| o.weight > 0.0) {
            for (b, &v) in bounds.iter_mut().zip(&obs.covariates) {
                b.0 = b.0.min(v);
                b.1 = b.1.max(v);
            }
        }
        bounds
    }

    /// Copy with weights multiplied by `multipliers` and renormalized.
    pub fn reweighted(&self, multipliers: &[f64]) -> Result<Self> {
        if multipliers.len() != self.len() {
            return Err(Error::DimensionMismatch { expected: self.len(), found: multipliers.len() });
        }
        let observations = self
            .observations
            .iter()
            .zip(multipliers)
            .map(|(o, &e)| Observation { weight: o.weight * e, ..o.clone() })
            .collect();
        Self::new(observations)
    }
}

/// Weighted observations split into groups 0 and 1.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupedDataset {
    groups: [GroupSample; 2],
    covariate_names: Vec<String>,
    labels: [String; 2],
}

impl GroupedDataset {
    pub fn new(
        group0: Vec<Observation>,
        group1: Vec<Observation>,
        covariate_names: Vec<String>,
    ) -> Result<Self> {
        Self::from_samples(
            GroupSample::new(group0)?,
            GroupSample::new(group1)?,
            covariate_names,
            ["0".to_string(), "1".to_string()],
        )
    }

    pub fn from_samples(
        group0: GroupSample,
        group1: GroupSample,
        covariate_names: Vec<String>,
        labels: [String; 2],
    ) -> Result<Self> {
        let p = group0.covariate_dim();
        if group1.covariate_dim() != p {
            return Err(Error::DimensionMismatch { expected: p, found: group1.covariate_dim() });
        }
        if covariate_names.len() != p {
            return Err(Error::Schema(format!(
                "{} covariate names for {} covariates",
                covariate_names.len(),
                p
            )));
        }
        Ok(Self { groups: [group0, group1], covariate_names, labels })
    }

    pub fn group(&self, g: Group) -> &GroupSample {
        &self.groups[g.index()]
    }

    pub fn covariate_names(&self) -> &[String] {
        &self.covariate_names
    }

    pub fn labels(&self) -> &[String; 2] {
        &self.labels
    }

    pub fn covariate_dim(&self) -> usize {
        self.groups[0].covariate_dim()
    }

    /// Name of design column `column` (0 is the intercept).
    pub fn design_column_name(&self, column: usize) -> &str {
        if column == 0 {
            "(intercept)"
        } else {
            self.covariate_names.get(column - 1).map(String::as_str).unwrap_or("?")
        }
    }

    pub fn reweighted(&self, multipliers: [&[f64]; 2]) -> Result<Self> {
        Ok(Self {
            groups: [
                self.groups[0].reweighted(multipliers[0])?,
                self.groups[1].reweighted(multipliers[1])?,
            ],
            covariate_names: self.covariate_names.clone(),
            labels: self.labels.clone(),
        })
    }

    /// Outcomes of both groups with positive weight.
    pub fn pooled_outcomes(&self) -> Vec<f64> {
        self.groups
            .iter()
            .flat_map(|g| g.observations().iter().filter(|o| o.weight > 0.0).map(|o| o.outcome))
            .collect()
    }
}

/// Probability and outcome grids on which curves are evaluated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationGrids {
    pub u_grid: Vec<f64>,
    pub y_grid: Vec<f64>,
}

impl EvaluationGrids {
    pub fn new(u_grid: Vec<f64>, y_grid: Vec<f64>) -> Result<Self> {
        validate_u_grid(&u_grid)?;
        validate_increasing(&y_grid, "y_grid")?;
        Ok(Self { u_grid, y_grid })
    }
}

pub(crate) fn validate_increasing(grid: &[f64], what: &str) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument(format!("{what} is empty")));
    }
    if grid.iter().any(|v| !v.is_finite()) || grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidArgument(format!("{what} must be finite and strictly increasing")));
    }
    Ok(())
}

pub(crate) fn validate_u_grid(u_grid: &[f64]) -> Result<()> {
    validate_increasing(u_grid, "u_grid")?;
    if !(u_grid[0] > 0.0 && u_grid[u_grid.len() - 1] < 1.0) {
        return Err(Error::InvalidArgument("u_grid must lie strictly inside (0, 1)".into()));
    }
    Ok(())
}

/// Equispaced probability grid `lo, lo + step, ..., hi`, computed from
/// integer multiples of `step` so grid points do not drift.
pub fn u_grid_range(lo: f64, hi: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !(lo <= hi) {
        return Err(Error::InvalidArgument("u grid needs step > 0 and lo <= hi".into()));
    }
    let count = libm::round((hi - lo) / step) as usize;
    let grid: Vec<f64> = (0..=count).map(|i| lo + i as f64 * step).collect();
    validate_u_grid(&grid)?;
    Ok(grid)
}

/// {0.02, 0.021, ..., 0.98}.
pub fn default_u_grid() -> Vec<f64> {
    (20..=980).map(|k| k as f64 / 1000.0).collect()
}

/// Probability mass attached to each u-grid point: the cell between the
/// midpoints to its neighbours, with the first cell extended down to 0 and
/// the last up to 1. The masses sum to one.
pub fn cell_measures(u_grid: &[f64]) -> Vec<f64> {
    let k = u_grid.len();
    (0..k)
        .map(|i| {
            let lo = if i == 0 { 0.0 } else { 0.5 * (u_grid[i - 1] + u_grid[i]) };
            let hi = if i + 1 == k { 1.0 } else { 0.5 * (u_grid[i] + u_grid[i + 1]) };
            hi - lo
        })
        .collect()
}

/// Outcome grid: the distinct pooled outcomes when there are at most
/// `n_points` of them, otherwise pooled empirical quantiles at `n_points`
/// equispaced probabilities from 0 to 1 (duplicates dropped).
pub fn default_y_grid(dataset: &GroupedDataset, n_points: usize) -> Result<Vec<f64>> {
    if n_points < 2 {
        return Err(Error::InvalidArgument("y grid needs at least 2 points".into()));
    }
    let mut pooled = dataset.pooled_outcomes();
    pooled.sort_by(f64::total_cmp);
    let mut distinct = pooled.clone();
    distinct.dedup();
    if distinct.len() < 2 {
        return Err(Error::Degenerate("outcome takes a single value".into()));
    }
    if distinct.len() <= n_points {
        return Ok(distinct);
    }
    let n = pooled.len();
    let mut grid: Vec<f64> = (0..n_points)
        .map(|k| {
            let p = k as f64 / (n_points - 1) as f64;
            let rank = libm::ceil(p * n as f64 - 1e-9) as usize;
            pooled[rank.clamp(1, n) - 1]
        })
        .collect();
    grid.dedup();
    Ok(grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn obs(y: f64, w: f64) -> Observation {
        Observation::new(y, vec![], w)
    }

    #[test]
    fn weights_are_normalized_preserving_ratios() {
        let g = GroupSample::new(vec![obs(1.0, 3.0), obs(2.0, 1.0)]).unwrap();
        assert_eq!(g.weights().collect::<Vec<_>>(), vec![0.75, 0.25]);
    }

    #[test]
    fn rejects_negative_weight_and_empty_groups() {
        assert!(matches!(GroupSample::new(vec![obs(1.0, -1.0)]), Err(Error::Validation(_))));
        assert!(GroupSample::new(vec![]).is_err());
        assert!(GroupSample::new(vec![obs(1.0, 0.0)]).is_err());
    }

    #[test]
    fn rejects_ragged_covariates() {
        let r = GroupSample::new(vec![
            Observation::new(1.0, vec![1.0], 1.0),
            Observation::new(1.0, vec![1.0, 2.0], 1.0),
        ]);
        assert!(matches!(r, Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn default_u_grid_matches_published_grid() {
        let g = default_u_grid();
        assert_eq!(g.len(), 961);
        assert_eq!(g[0], 0.02);
        assert_eq!(g[1], 0.021);
        assert_eq!(*g.last().unwrap(), 0.98);
    }

    #[test]
    fn cell_measures_sum_to_one() {
        let m = cell_measures(&default_u_grid());
        assert!((m.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(cell_measures(&[0.5]), vec![1.0]);
    }

    #[test]
    fn y_grid_examples() {
        let ds = |ys: &[f64]| {
            GroupedDataset::new(
                ys.iter().map(|&y| obs(y, 1.0)).collect(),
                ys.iter().map(|&y| obs(y, 1.0)).collect(),
                vec![],
            )
            .unwrap()
        };
        assert_eq!(default_y_grid(&ds(&[1.0, 2.0, 3.0]), 10).unwrap(), vec![1.0, 2.0, 3.0]);
        let hundred: Vec<f64> = (1..=100).map(f64::from).collect();
        assert_eq!(
            default_y_grid(&ds(&hundred), 5).unwrap(),
            vec![1.0, 25.0, 50.0, 75.0, 100.0]
        );
        assert!(matches!(default_y_grid(&ds(&[4.0, 4.0]), 5), Err(Error::Degenerate(_))));
    }
}
