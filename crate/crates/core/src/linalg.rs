//! Small dense linear algebra for d x d systems (d = covariates + 1).
//!
//! Matrices are row-major `Vec<f64>` of length d * d.

use alloc::vec;
use alloc::vec::Vec;

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Cholesky factor of a symmetric positive definite matrix, lower triangle.
#[derive(Debug, Clone)]
pub struct Cholesky {
    dim: usize,
    lower: Vec<f64>,
}

impl Cholesky {
    /// Factorizes `a`. On failure returns the first column whose pivot is not
    /// positive relative to its diagonal, i.e. the column that is (nearly) a
    /// linear combination of the preceding ones.
    pub fn new(a: &[f64], dim: usize) -> Result<Self, usize> {
        debug_assert_eq!(a.len(), dim * dim);
        let mut lower = vec![0.0; dim * dim];
        for j in 0..dim {
            let mut diag = a[j * dim + j];
            for k in 0..j {
                diag -= lower[j * dim + k] * lower[j * dim + k];
            }
            let scale = a[j * dim + j].abs();
            if !(diag > 1e-11 * scale) || scale == 0.0 {
                return Err(j);
            }
            let pivot = libm::sqrt(diag);
            lower[j * dim + j] = pivot;
            for i in (j + 1)..dim {
                let mut s = a[i * dim + j];
                for k in 0..j {
                    s -= lower[i * dim + k] * lower[j * dim + k];
                }
                lower[i * dim + j] = s / pivot;
            }
        }
        Ok(Self { dim, lower })
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let d = self.dim;
        let mut z = rhs.to_vec();
        for i in 0..d {
            let mut s = z[i];
            for k in 0..i {
                s -= self.lower[i * d + k] * z[k];
            }
            z[i] = s / self.lower[i * d + i];
        }
        for i in (0..d).rev() {
            let mut s = z[i];
            for k in (i + 1)..d {
                s -= self.lower[k * d + i] * z[k];
            }
            z[i] = s / self.lower[i * d + i];
        }
        z
    }
}

/// Weighted Gram matrix sum_i w_i x_i x_i' over rows of width `dim`.
pub fn weighted_gram<'a, I>(rows: I, dim: usize) -> Vec<f64>
where
    I: IntoIterator<Item = (&'a [f64], f64)>,
{
    let mut g = vec![0.0; dim * dim];
    for (x, w) in rows {
        for i in 0..dim {
            let wx = w * x[i];
            for j in 0..=i {
                g[i * dim + j] += wx * x[j];
            }
        }
    }
    for i in 0..dim {
        for j in 0..i {
            g[j * dim + i] = g[i * dim + j];
        }
    }
    g
}

/// Solves a general square system by Gaussian elimination with partial
/// pivoting. Returns `None` when a pivot vanishes.
pub fn solve_square(mut a: Vec<f64>, mut b: Vec<f64>, dim: usize) -> Option<Vec<f64>> {
    let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return None;
    }
    for col in 0..dim {
        let pivot_row = (col..dim)
            .max_by(|&r, &s| a[r * dim + col].abs().total_cmp(&a[s * dim + col].abs()))
            .unwrap_or(col);
        if a[pivot_row * dim + col].abs() <= 1e-13 * scale {
            return None;
        }
        if pivot_row != col {
            for k in 0..dim {
                a.swap(col * dim + k, pivot_row * dim + k);
            }
            b.swap(col, pivot_row);
        }
        let p = a[col * dim + col];
        for r in (col + 1)..dim {
            let f = a[r * dim + col] / p;
            if f != 0.0 {
                for k in col..dim {
                    a[r * dim + k] -= f * a[col * dim + k];
                }
                b[r] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; dim];
    for r in (0..dim).rev() {
        let mut s = b[r];
        for k in (r + 1)..dim {
            s -= a[r * dim + k] * x[k];
        }
        x[r] = s / a[r * dim + r];
    }
    Some(x)
}
