//! Linear quantile regression by a primal-dual interior point method.
//!
//! For each u the dual of the check-loss linear program,
//!
//!   max y'a  s.t.  X'a = (1 - u) X'1,  0 <= a <= 1,
//!
//! is solved by the Frisch-Newton predictor-corrector iteration; beta(u) is
//! the negated multiplier of the equality constraints. The interior solution
//! is then moved to the best nearby basic solution (an exact fit through d
//! observations) when that does not increase the objective.

use alloc::vec;
use alloc::vec::Vec;

use super::{ConditionalQuantileModel, QuantileModelKind};
use crate::data::{validate_u_grid, GroupSample};
use crate::linalg::{dot, solve_square, weighted_gram, Cholesky};
use crate::parallel::map_indexed;
use crate::{Error, Result};

const MAX_ITERATIONS: usize = 200;
const GAP_TOLERANCE: f64 = 1e-9;
const STEP_FRACTION: f64 = 0.9995;

/// Weighted check loss sum_i w_i rho_u(y_i - x_i'beta), rho_u(v) = v (u - 1{v < 0}).
pub fn check_loss(sample: &GroupSample, beta: &[f64], u: f64) -> f64 {
    (0..sample.len())
        .map(|i| {
            let v = sample.outcome(i) - dot(sample.design_row(i), beta);
            sample.weight(i) * v * (u - if v < 0.0 { 1.0 } else { 0.0 })
        })
        .sum()
}

/// Fits beta(u) = argmin sum_i w_i rho_u(y_i - x_i'beta) independently at
/// every grid point.
pub fn fit_quantile_regression(sample: &GroupSample, u_grid: &[f64]) -> Result<ConditionalQuantileModel> {
    validate_u_grid(u_grid)?;
    let d = sample.design_dim();
    let gram = weighted_gram((0..sample.len()).map(|i| (sample.design_row(i), sample.weight(i))), d);
    Cholesky::new(&gram, d).map_err(|column| Error::RankDeficient { column })?;

    let problem = ScaledProblem::new(sample);
    let fits = map_indexed(u_grid.len(), |k| problem.solve(u_grid[k]));
    let coefficients = fits.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(ConditionalQuantileModel {
        kind: QuantileModelKind::QuantileRegression,
        u_grid: u_grid.to_vec(),
        coefficients,
        support: sample.bounding_box(),
    })
}

/// Rows with positive weight, multiplied through by their weight (rescaled
/// to average one). rho_u is positively homogeneous, so the weighted problem
/// becomes an unweighted one on these rows.
struct ScaledProblem {
    x: Vec<f64>,
    y: Vec<f64>,
    n: usize,
    d: usize,
}

impl ScaledProblem {
    fn new(sample: &GroupSample) -> Self {
        let d = sample.design_dim();
        let active: Vec<usize> = (0..sample.len()).filter(|&i| sample.weight(i) > 0.0).collect();
        let n = active.len();
        let total: f64 = active.iter().map(|&i| sample.weight(i)).sum();
        let mut x = Vec::with_capacity(n * d);
        let mut y = Vec::with_capacity(n);
        for &i in &active {
            let s = sample.weight(i) * n as f64 / total;
            x.extend(sample.design_row(i).iter().map(|v| v * s));
            y.push(sample.outcome(i) * s);
        }
        Self { x, y, n, d }
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.d..(i + 1) * self.d]
    }

    fn objective(&self, beta: &[f64], u: f64) -> f64 {
        (0..self.n)
            .map(|i| {
                let v = self.y[i] - dot(self.row(i), beta);
                v * (u - if v < 0.0 { 1.0 } else { 0.0 })
            })
            .sum()
    }

    /// Solves (sum_i q_i x_i x_i') dy = sum_i q_i r_i x_i.
    fn normal_solve(&self, q: &[f64], r: &[f64]) -> Vec<f64> {
        let d = self.d;
        let m = weighted_gram((0..self.n).map(|i| (self.row(i), q[i])), d);
        let mut rhs = vec![0.0; d];
        for i in 0..self.n {
            let qr = q[i] * r[i];
            for (acc, xv) in rhs.iter_mut().zip(self.row(i)) {
                *acc += qr * xv;
            }
        }
        match Cholesky::new(&m, d) {
            Ok(chol) => chol.solve(&rhs),
            Err(_) => {
                let trace: f64 = (0..d).map(|j| m[j * d + j]).sum();
                let mut ridged = m;
                for j in 0..d {
                    ridged[j * d + j] += 1e-12 * trace.max(1e-300);
                }
                Cholesky::new(&ridged, d).map(|c| c.solve(&rhs)).unwrap_or_else(|_| vec![0.0; d])
            }
        }
    }

    fn solve(&self, u: f64) -> Result<Vec<f64>> {
        let (n, d) = (self.n, self.d);
        let c: Vec<f64> = self.y.iter().map(|v| -v).collect();
        let mut x = vec![1.0 - u; n];
        let mut s = vec![u; n];
        let mut b = vec![0.0; d];
        for i in 0..n {
            for (bj, xv) in b.iter_mut().zip(self.row(i)) {
                *bj += (1.0 - u) * xv;
            }
        }
        // Least-squares start for the dual multipliers: X y = c.
        let mut y = self.normal_solve(&vec![1.0; n], &c);
        // Dual slacks with z - w = c - X y, both kept strictly positive.
        let resid: Vec<f64> = (0..n).map(|i| c[i] - dot(self.row(i), &y)).collect();
        let offset = 1e-3 * (1.0 + resid.iter().map(|r| r.abs()).sum::<f64>() / n as f64);
        let z: Vec<f64> = resid.iter().map(|r| r.max(0.0) + offset).collect();
        let w: Vec<f64> = resid.iter().map(|r| (-r).max(0.0) + offset).collect();
        let (mut z, mut w) = (z, w);
        let gap = |x: &[f64], y: &[f64], w: &[f64]| dot(&c, x) - dot(y, &b) + w.iter().sum::<f64>();
        let scale = |x: &[f64], y: &[f64]| 1.0 + dot(&c, x).abs() + dot(y, &b).abs();

        let mut q = vec![0.0; n];
        let mut r = vec![0.0; n];
        let mut dx = vec![0.0; n];
        let mut dz = vec![0.0; n];
        let mut dw = vec![0.0; n];
        let mut iterations = 0;
        while gap(&x, &y, &w) > GAP_TOLERANCE * scale(&x, &y) {
            if iterations == MAX_ITERATIONS {
                return Err(Error::SolverFailure { u, iterations });
            }
            iterations += 1;
            // affine-scaling predictor
            for i in 0..n {
                q[i] = 1.0 / (z[i] / x[i] + w[i] / s[i]);
                r[i] = z[i] - w[i];
            }
            let mut dy = self.normal_solve(&q, &r);
            for i in 0..n {
                dx[i] = q[i] * (dot(self.row(i), &dy) - r[i]);
                dz[i] = -z[i] * (dx[i] / x[i] + 1.0);
                dw[i] = -w[i] * (-dx[i] / s[i] + 1.0);
            }
            let (mut fp, mut fd) = step_lengths(&x, &s, &z, &w, &dx, &dz, &dw);
            if fp.min(fd) < 1.0 {
                // Mehrotra-style corrector with centering parameter from the
                // predicted complementarity.
                let mut mu = dot(&z, &x) + dot(&w, &s);
                let mut g = 0.0;
                for i in 0..n {
                    g += (z[i] + fd * dz[i]) * (x[i] + fp * dx[i])
                        + (w[i] + fd * dw[i]) * (s[i] - fp * dx[i]);
                }
                let ratio = g / mu;
                mu = mu * ratio * ratio * ratio / (2.0 * n as f64);
                let mut rhs = vec![0.0; n];
                let mut xi = vec![0.0; n];
                let mut dxdz = vec![0.0; n];
                let mut dsdw = vec![0.0; n];
                for i in 0..n {
                    dxdz[i] = dx[i] * dz[i];
                    dsdw[i] = -dx[i] * dw[i];
                    xi[i] = mu * (1.0 / x[i] - 1.0 / s[i]);
                    rhs[i] = r[i] + dxdz[i] - dsdw[i] - xi[i];
                }
                dy = self.normal_solve(&q, &rhs);
                for i in 0..n {
                    dx[i] = q[i] * (dot(self.row(i), &dy) + xi[i] - r[i] - dxdz[i] + dsdw[i]);
                    let ds = -dx[i];
                    dz[i] = mu / x[i] - z[i] - z[i] * dx[i] / x[i] - dxdz[i];
                    dw[i] = mu / s[i] - w[i] - w[i] * ds / s[i] - dsdw[i];
                }
                (fp, fd) = step_lengths(&x, &s, &z, &w, &dx, &dz, &dw);
            }
            let next_y: Vec<f64> = y.iter().zip(&dy).map(|(yj, dyj)| yj + fd * dyj).collect();
            if next_y.iter().any(|v| !v.is_finite()) {
                // Slacks underflowed on a degenerate face; the last iterate
                // is handed to the vertex search.
                break;
            }
            for i in 0..n {
                x[i] += fp * dx[i];
                s[i] -= fp * dx[i];
                z[i] += fd * dz[i];
                w[i] += fd * dw[i];
            }
            y = next_y;
        }
        let beta: Vec<f64> = y.iter().map(|v| -v).collect();
        Ok(self.polish(beta, u))
    }

    /// Best basic solution through d rows among the d + POLISH_EXTRA rows
    /// (d rows for wide designs) with the smallest absolute residuals at
    /// `beta`; kept only if it does not increase the objective.
    fn polish(&self, beta: Vec<f64>, u: f64) -> Vec<f64> {
        let d = self.d;
        let mut order: Vec<(f64, usize)> =
            (0..self.n).map(|i| ((self.y[i] - dot(self.row(i), &beta)).abs(), i)).collect();
        order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let extra = if d <= 4 { POLISH_EXTRA } else { 0 };
        let pool: Vec<usize> = order.iter().take(d + extra).map(|&(_, i)| i).collect();
        let before = self.objective(&beta, u);
        let tolerance = 1e-13 * before.abs();
        let mut best = (before, beta);
        let mut at_vertex = false;
        if pool.len() < d {
            return best.1;
        }
        let mut pick: Vec<usize> = (0..d).collect();
        loop {
            let a: Vec<f64> = pick.iter().flat_map(|&k| self.row(pool[k]).iter().copied()).collect();
            let rhs: Vec<f64> = pick.iter().map(|&k| self.y[pool[k]]).collect();
            if let Some(vertex) = solve_square(a, rhs, d) {
                let value = self.objective(&vertex, u);
                if value < best.0 || (!at_vertex && value <= best.0 + tolerance) {
                    best = (value, vertex);
                    at_vertex = true;
                }
            }
            if !next_combination(&mut pick, pool.len()) {
                break;
            }
        }
        best.1
    }
}

const POLISH_EXTRA: usize = 3;

/// Advances `pick` to the next increasing d-subset of 0..n.
fn next_combination(pick: &mut [usize], n: usize) -> bool {
    let d = pick.len();
    for k in (0..d).rev() {
        if pick[k] < n - d + k {
            pick[k] += 1;
            for j in k + 1..d {
                pick[j] = pick[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

fn max_step(v: &[f64], dv: &[f64], sign: f64) -> f64 {
    v.iter()
        .zip(dv)
        .filter(|(_, &d)| sign * d < 0.0)
        .map(|(&x, &d)| -x / (sign * d))
        .fold(f64::INFINITY, f64::min)
}

fn step_lengths(x: &[f64], s: &[f64], z: &[f64], w: &[f64], dx: &[f64], dz: &[f64], dw: &[f64]) -> (f64, f64) {
    let fp = max_step(x, dx, 1.0).min(max_step(s, dx, -1.0));
    let fd = max_step(w, dw, 1.0).min(max_step(z, dz, 1.0));
    ((STEP_FRACTION * fp).min(1.0), (STEP_FRACTION * fd).min(1.0))
}
