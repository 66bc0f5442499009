use alloc::vec;
use alloc::vec::Vec;

use super::{GridFlag, SEPARATION_CAP};
use crate::linalg::{dot, Cholesky};
use crate::math::{ln, normal_quantile, sqrt, Link};

const MAX_NEWTON: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct BinaryFit {
    pub coefficients: Vec<f64>,
    pub flag: GridFlag,
}

/// Weighted binary-response maximum likelihood,
/// max sum_i w_i [h_i ln link(x_i'b) + (1 - h_i) ln(1 - link(x_i'b))],
/// by damped Newton. `rows` is a flat n x d design with the intercept first.
///
/// Thresholds where every positive-weight hit indicator is equal return a
/// degenerate flag; iterates whose norm exceeds the separation cap are
/// rescaled onto it and flagged.
pub(crate) fn fit_binary(rows: &[f64], d: usize, weights: &[f64], hits: &[bool], link: Link) -> BinaryFit {
    let n = weights.len();
    let total: f64 = weights.iter().sum();
    let share: f64 = weights.iter().zip(hits).filter(|(_, &h)| h).map(|(w, _)| w).sum();
    let any_hit = weights.iter().zip(hits).any(|(&w, &h)| w > 0.0 && h);
    let any_miss = weights.iter().zip(hits).any(|(&w, &h)| w > 0.0 && !h);
    if !any_hit {
        return BinaryFit { coefficients: vec![0.0; d], flag: GridFlag::DegenerateZero };
    }
    if !any_miss {
        return BinaryFit { coefficients: vec![0.0; d], flag: GridFlag::DegenerateOne };
    }
    let p = share / total;
    let mut beta = vec![0.0; d];
    beta[0] = match link {
        Link::Logit => ln(p / (1.0 - p)),
        Link::Probit => normal_quantile(p),
    };

    let row = |i: usize| &rows[i * d..(i + 1) * d];
    let loglik = |b: &[f64]| -> f64 {
        (0..n)
            .filter(|&i| weights[i] > 0.0)
            .map(|i| weights[i] * link.loglik_terms(dot(row(i), b), hits[i]).0)
            .sum()
    };

    let mut current = loglik(&beta);
    for _ in 0..MAX_NEWTON {
        let mut grad = vec![0.0; d];
        let mut neg_hess = vec![0.0; d * d];
        for i in (0..n).filter(|&i| weights[i] > 0.0) {
            let x = row(i);
            let (_, g, h) = link.loglik_terms(dot(x, &beta), hits[i]);
            let (wg, wh) = (weights[i] * g, -weights[i] * h);
            for a in 0..d {
                grad[a] += wg * x[a];
                for c in 0..=a {
                    neg_hess[a * d + c] += wh * x[a] * x[c];
                }
            }
        }
        if grad.iter().all(|g| g.abs() <= 1e-13) {
            break;
        }
        for a in 0..d {
            for c in 0..a {
                neg_hess[c * d + a] = neg_hess[a * d + c];
            }
        }
        let step = match Cholesky::new(&neg_hess, d) {
            Ok(chol) => chol.solve(&grad),
            // Flat curvature: the likelihood keeps increasing toward a
            // separating direction.
            Err(_) => return separated(beta),
        };
        let mut t = 1.0;
        let mut accepted = None;
        while t > 1e-10 {
            let trial: Vec<f64> = beta.iter().zip(&step).map(|(b, s)| b + t * s).collect();
            let value = loglik(&trial);
            if value >= current - 1e-14 * current.abs() {
                accepted = Some((trial, value));
                break;
            }
            t *= 0.5;
        }
        let Some((next, value)) = accepted else { break };
        let moved = step.iter().map(|s| (t * s).abs()).fold(0.0, f64::max);
        beta = next;
        current = value;
        if sqrt(dot(&beta, &beta)) > SEPARATION_CAP {
            return separated(beta);
        }
        if moved <= 1e-15 * (1.0 + beta.iter().map(|b| b.abs()).fold(0.0, f64::max)) {
            break;
        }
    }
    // A perfect fit means the data are (quasi-)separated and the optimum
    // lies at infinity along the current direction.
    let perfect = (0..n).filter(|&i| weights[i] > 0.0).all(|i| {
        let p = link.cdf(dot(row(i), &beta));
        (if hits[i] { 1.0 - p } else { p }) < SEPARATED_RESIDUAL
    });
    if perfect {
        return separated(beta);
    }
    BinaryFit { coefficients: beta, flag: GridFlag::Ok }
}

const SEPARATED_RESIDUAL: f64 = 1e-6;

/// Rescales the iterate onto the separation cap.
fn separated(mut beta: Vec<f64>) -> BinaryFit {
    let norm = sqrt(dot(&beta, &beta));
    if norm > 0.0 {
        beta.iter_mut().for_each(|b| *b *= SEPARATION_CAP / norm);
    }
    BinaryFit { coefficients: beta, flag: GridFlag::Separated }
}
