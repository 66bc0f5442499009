//! Distribution regression: one binary-response fit of 1{Y <= y} per
//! threshold, and the duration variant with a shared slope.

use alloc::vec::Vec;

use super::{fit_binary, index, ConditionalDistributionModel, DistributionRepr, GridFlag, SEPARATION_CAP};
use crate::data::{validate_increasing, GroupSample};
use crate::linalg::{weighted_gram, Cholesky};
use crate::math::Link;
use crate::parallel::map_indexed;
use crate::{Error, Result};

fn check_rank(sample: &GroupSample) -> Result<()> {
    let d = sample.design_dim();
    let gram = weighted_gram((0..sample.len()).map(|i| (sample.design_row(i), sample.weight(i))), d);
    Cholesky::new(&gram, d).map(|_| ()).map_err(|column| Error::RankDeficient { column })
}

struct Design {
    rows: Vec<f64>,
    weights: Vec<f64>,
    outcomes: Vec<f64>,
    d: usize,
}

impl Design {
    fn new(sample: &GroupSample) -> Self {
        let d = sample.design_dim();
        let mut rows = Vec::with_capacity(sample.len() * d);
        for i in 0..sample.len() {
            rows.extend_from_slice(sample.design_row(i));
        }
        Self {
            rows,
            weights: sample.weights().collect(),
            outcomes: sample.observations().iter().map(|o| o.outcome).collect(),
            d,
        }
    }

    fn hits(&self, y: f64) -> Vec<bool> {
        self.outcomes.iter().map(|&v| v <= y).collect()
    }
}

/// F(y | x) = link(x'beta(y)) with beta(y) the weighted binary MLE of
/// 1{Y <= y} at each grid point.
pub fn fit_distribution_regression(
    sample: &GroupSample,
    y_grid: &[f64],
    link: Link,
) -> Result<ConditionalDistributionModel> {
    validate_increasing(y_grid, "y_grid")?;
    check_rank(sample)?;
    let design = Design::new(sample);
    let fits = map_indexed(y_grid.len(), |k| {
        fit_binary(&design.rows, design.d, &design.weights, &design.hits(y_grid[k]), link)
    });
    let (coefficients, flags) = fits.into_iter().map(|f| (f.coefficients, f.flag)).unzip();
    Ok(ConditionalDistributionModel {
        y_grid: y_grid.to_vec(),
        link,
        repr: DistributionRepr::DistributionRegression { coefficients },
        flags,
        support: sample.bounding_box(),
        rearranged: false,
    })
}

/// F(y | x) = link(alpha(y) + x'beta) with alpha(y0) = 0.
///
/// beta (intercept included) is the binary MLE at the anchor y0; each
/// alpha(y) then solves the one-dimensional score equation with beta held
/// fixed, a monotone root because the log-likelihood is concave in alpha.
pub fn fit_duration_dr(
    sample: &GroupSample,
    y_grid: &[f64],
    link: Link,
    y0: f64,
) -> Result<ConditionalDistributionModel> {
    validate_increasing(y_grid, "y_grid")?;
    check_rank(sample)?;
    let tol = 1e-12 * y0.abs().max(1.0);
    let anchor = y_grid.iter().position(|&y| (y - y0).abs() <= tol).ok_or(Error::Anchor { y0 })?;
    let design = Design::new(sample);
    let base = fit_binary(&design.rows, design.d, &design.weights, &design.hits(y_grid[anchor]), link);
    if base.flag != GridFlag::Ok {
        return Err(Error::Anchor { y0 });
    }
    let slope = base.coefficients;
    let eta: Vec<f64> = (0..sample.len()).map(|i| index(&slope, sample.covariates(i))).collect();
    let limit = SEPARATION_CAP + eta.iter().fold(0.0f64, |m, e| m.max(e.abs())) + 20.0;

    let solved = map_indexed(y_grid.len(), |k| {
        if k == anchor {
            return (0.0, GridFlag::Ok);
        }
        let hits = design.hits(y_grid[k]);
        let any_hit = design.weights.iter().zip(&hits).any(|(&w, &h)| w > 0.0 && h);
        let any_miss = design.weights.iter().zip(&hits).any(|(&w, &h)| w > 0.0 && !h);
        if !any_hit {
            return (-SEPARATION_CAP, GridFlag::DegenerateZero);
        }
        if !any_miss {
            return (SEPARATION_CAP, GridFlag::DegenerateOne);
        }
        let score = |alpha: f64| -> (f64, f64) {
            let mut g = 0.0;
            let mut h = 0.0;
            for ((&w, &e), &hit) in design.weights.iter().zip(&eta).zip(&hits) {
                if w > 0.0 {
                    let (_, gi, hi) = link.loglik_terms(alpha + e, hit);
                    g += w * gi;
                    h += w * hi;
                }
            }
            (g, h)
        };
        match solve_decreasing(score, limit) {
            Some(alpha) => (alpha, GridFlag::Ok),
            None => {
                let side = if score(0.0).0 > 0.0 { limit } else { -limit };
                (side, GridFlag::BracketFailure)
            }
        }
    });
    let (shifts, flags) = solved.into_iter().unzip();
    Ok(ConditionalDistributionModel {
        y_grid: y_grid.to_vec(),
        link,
        repr: DistributionRepr::DurationDr { anchor: y_grid[anchor], slope, shifts },
        flags,
        support: sample.bounding_box(),
        rearranged: false,
    })
}

/// Root of a decreasing function on [-limit, limit] by Newton steps
/// safeguarded with bisection. `f` returns (value, derivative).
fn solve_decreasing<F: Fn(f64) -> (f64, f64)>(f: F, limit: f64) -> Option<f64> {
    let (g0, _) = f(0.0);
    if g0 == 0.0 {
        return Some(0.0);
    }
    // bracket [lo, hi] with f(lo) > 0 > f(hi)
    let (mut lo, mut hi) = if g0 > 0.0 { (0.0, 1.0) } else { (-1.0, 0.0) };
    loop {
        if g0 > 0.0 {
            if f(hi).0 < 0.0 {
                break;
            }
            lo = hi;
            hi *= 2.0;
            if hi > limit {
                return None;
            }
        } else {
            if f(lo).0 > 0.0 {
                break;
            }
            hi = lo;
            lo *= 2.0;
            if lo < -limit {
                return None;
            }
        }
    }
    let mut a = 0.5 * (lo + hi);
    for _ in 0..200 {
        let (g, h) = f(a);
        if g == 0.0 || (hi - lo) <= 1e-15 * (1.0 + a.abs()) {
            return Some(a);
        }
        if g > 0.0 {
            lo = a;
        } else {
            hi = a;
        }
        let newton = a - g / h;
        a = if h < 0.0 && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if g.abs() <= 1e-15 {
            return Some(a);
        }
    }
    Some(a)
}
