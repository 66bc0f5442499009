use alloc::vec::Vec;

use super::{index, ConditionalQuantileModel, QuantileModelKind};
use crate::data::{validate_u_grid, GroupSample};
use crate::linalg::{weighted_gram, Cholesky};
use crate::{Error, Result};

/// Weighted least squares for the slope plus weighted residual quantiles
/// for the location curve: Q(u | x) = x'beta + alpha(u).
///
/// alpha(u) is the left-inverse weighted quantile of the residuals, so it is
/// nondecreasing in u by construction.
pub fn fit_location_model(sample: &GroupSample, u_grid: &[f64]) -> Result<ConditionalQuantileModel> {
    validate_u_grid(u_grid)?;
    let d = sample.design_dim();
    let rows = (0..sample.len()).map(|i| (sample.design_row(i), sample.weight(i)));
    let gram = weighted_gram(rows, d);
    let chol = Cholesky::new(&gram, d).map_err(|column| Error::RankDeficient { column })?;
    let mut rhs = alloc::vec![0.0; d];
    for i in 0..sample.len() {
        let wy = sample.weight(i) * sample.outcome(i);
        for (r, x) in rhs.iter_mut().zip(sample.design_row(i)) {
            *r += wy * x;
        }
    }
    let beta = chol.solve(&rhs);

    let mut residuals: Vec<(f64, f64)> = (0..sample.len())
        .filter(|&i| sample.weight(i) > 0.0)
        .map(|i| (sample.outcome(i) - index(&beta, sample.covariates(i)), sample.weight(i)))
        .collect();
    residuals.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total: f64 = residuals.iter().map(|r| r.1).sum();

    let mut coefficients = Vec::with_capacity(u_grid.len());
    let mut cum = 0.0;
    let mut j = 0;
    for &u in u_grid {
        let target = u * total - 1e-12;
        while j + 1 < residuals.len() && cum + residuals[j].1 < target {
            cum += residuals[j].1;
            j += 1;
        }
        let mut row = Vec::with_capacity(d + 1);
        row.push(residuals[j].0);
        row.extend_from_slice(&beta);
        coefficients.push(row);
    }
    Ok(ConditionalQuantileModel {
        kind: QuantileModelKind::Location,
        u_grid: u_grid.to_vec(),
        coefficients,
        support: sample.bounding_box(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Observation;
    use alloc::vec;

    #[test]
    fn exact_linear_data_has_zero_location_curve() {
        let obs = (0..6).map(|i| Observation::new(2.0 * i as f64, vec![i as f64], 1.0)).collect();
        let model = fit_location_model(&GroupSample::new(obs).unwrap(), &[0.1, 0.5, 0.9]).unwrap();
        for row in &model.coefficients {
            assert!(row[0].abs() < 1e-12);
            assert!(row[1].abs() < 1e-12);
            assert!((row[2] - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn intercept_only_median() {
        let obs = [1.0, 2.0, 3.0].iter().map(|&y| Observation::new(y, vec![], 1.0)).collect();
        let model = fit_location_model(&GroupSample::new(obs).unwrap(), &[0.5]).unwrap();
        assert!((model.coefficients[0][1] - 2.0).abs() < 1e-15);
        assert!(model.coefficients[0][0].abs() < 1e-15);
        assert!((model.quantile_at(0, &[]) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn left_inverse_at_mass_boundary() {
        // residuals {-1, 1} with equal weight: the 0.5 quantile is -1
        let obs = [0.0, 2.0].iter().map(|&y| Observation::new(y, vec![], 1.0)).collect();
        let model = fit_location_model(&GroupSample::new(obs).unwrap(), &[0.5, 0.51]).unwrap();
        assert_eq!(model.coefficients[0][0], -1.0);
        assert_eq!(model.coefficients[1][0], 1.0);
    }

    #[test]
    fn rank_deficiency_names_column() {
        let obs = (0..5).map(|i| Observation::new(i as f64, vec![i as f64, 2.0 * i as f64], 1.0)).collect();
        let err = fit_location_model(&GroupSample::new(obs).unwrap(), &[0.5]).unwrap_err();
        assert_eq!(err, Error::RankDeficient { column: 2 });
    }
}
