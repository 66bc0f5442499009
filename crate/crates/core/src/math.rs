//! Scalar math shared by the estimators: link functions, the standard
//! normal distribution, and empirical quantiles.

use serde::{Deserialize, Serialize};

pub const SQRT_2PI: f64 = 2.506_628_274_631_000_7;
/// Interquartile range of the standard normal, 2 * Phi^{-1}(0.75).
pub const NORMAL_IQR: f64 = 1.348_979_500_392_163_5;

#[inline]
pub fn exp(x: f64) -> f64 {
    libm::exp(x)
}
#[inline]
pub fn ln(x: f64) -> f64 {
    libm::log(x)
}
#[inline]
pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

/// ln(1 + e^x) without overflow.
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + libm::log1p(libm::exp(-x))
    } else {
        libm::log1p(libm::exp(x))
    }
}

pub fn normal_pdf(z: f64) -> f64 {
    libm::exp(-0.5 * z * z) / SQRT_2PI
}

/// Standard normal CDF through the complementary error function.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z * core::f64::consts::FRAC_1_SQRT_2)
}

/// phi(z) / Phi(z), stable in the far left tail.
fn inverse_mills(z: f64) -> f64 {
    if z > -30.0 {
        normal_pdf(z) / normal_cdf(z)
    } else {
        let t = -z;
        let t2 = t * t;
        t / (1.0 - 1.0 / t2 + 3.0 / (t2 * t2) - 15.0 / (t2 * t2 * t2))
    }
}

fn ln_normal_cdf(z: f64) -> f64 {
    if z > -30.0 {
        libm::log(normal_cdf(z))
    } else {
        let t2 = z * z;
        -0.5 * t2 - libm::log(-z) - libm::log(SQRT_2PI)
            + libm::log(1.0 - 1.0 / t2 + 3.0 / (t2 * t2) - 15.0 / (t2 * t2 * t2))
    }
}

/// Inverse of the standard normal CDF (Acklam's rational approximation with
/// one Halley refinement step).
pub fn normal_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_69e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] = [
        7.784_695_709_041_462e-3,
        3.224_671_290_700_398e-1,
        2.445_134_137_142_996,
        3.754_408_661_907_416,
    ];
    let low = 0.024_25;
    let x = if p < low {
        let q = libm::sqrt(-2.0 * libm::log(p));
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - low {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = libm::sqrt(-2.0 * libm::log(1.0 - p));
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };
    let e = normal_cdf(x) - p;
    let u = e * SQRT_2PI * libm::exp(0.5 * x * x);
    x - u / (1.0 + 0.5 * x * u)
}

/// Link function of a binary-response model, P(Y <= y | x) = link(index).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Link {
    #[default]
    Logit,
    Probit,
}

impl Link {
    pub fn cdf(self, eta: f64) -> f64 {
        match self {
            Link::Logit => {
                if eta >= 0.0 {
                    1.0 / (1.0 + libm::exp(-eta))
                } else {
                    let e = libm::exp(eta);
                    e / (1.0 + e)
                }
            }
            Link::Probit => normal_cdf(eta),
        }
    }

    /// Log-likelihood of a binary outcome `hit` at index `eta`, with its first
    /// and second derivatives in `eta`.
    pub fn loglik_terms(self, eta: f64, hit: bool) -> (f64, f64, f64) {
        match self {
            Link::Logit => {
                let p = self.cdf(eta);
                let h = -p * (1.0 - p);
                if hit {
                    (-softplus(-eta), 1.0 - p, h)
                } else {
                    (-softplus(eta), -p, h)
                }
            }
            Link::Probit => {
                if hit {
                    let m = inverse_mills(eta);
                    (ln_normal_cdf(eta), m, -m * (eta + m))
                } else {
                    let m = inverse_mills(-eta);
                    (ln_normal_cdf(-eta), -m, -m * (m - eta))
                }
            }
        }
    }
}

/// Sample quantile with linear interpolation between order statistics
/// (Hyndman-Fan type 7). `sorted` must be ascending and nonempty.
pub fn interpolated_quantile(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p;
    let lo = libm::floor(h) as usize;
    if lo + 1 >= n {
        return sorted[n - 1];
    }
    let frac = h - lo as f64;
    sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
}

/// Left-inverse sample quantile: the ceil(p * n)-th order statistic.
pub fn order_statistic_quantile(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let k = libm::ceil(p * n as f64 - 1e-12) as usize;
    sorted[k.clamp(1, n) - 1]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normal_cdf_reference_values() {
        assert!((normal_cdf(0.0) - 0.5).abs() < 1e-16);
        assert!((normal_cdf(1.959_963_984_540_054) - 0.975).abs() < 1e-15);
        assert!((normal_cdf(-3.0) - 1.349_898_031_630_094_6e-3).abs() < 1e-17);
    }

    #[test]
    fn normal_quantile_inverts_cdf() {
        for &p in &[1e-8, 0.01, 0.02, 0.3, 0.5, 0.75, 0.98, 1.0 - 1e-9] {
            let z = normal_quantile(p);
            assert!((normal_cdf(z) - p).abs() < 1e-14 * p.max(1e-3), "p = {p}");
        }
        assert!((normal_quantile(0.75) * 2.0 - NORMAL_IQR).abs() < 1e-14);
    }

    #[test]
    fn loglik_derivatives_match_finite_differences() {
        for link in [Link::Logit, Link::Probit] {
            for &eta in &[-4.0, -0.7, 0.0, 1.3, 5.0] {
                for hit in [true, false] {
                    let (_, g, h) = link.loglik_terms(eta, hit);
                    let step = 1e-5;
                    let (lp, gp, _) = link.loglik_terms(eta + step, hit);
                    let (lm, gm, _) = link.loglik_terms(eta - step, hit);
                    assert!(((lp - lm) / (2.0 * step) - g).abs() < 1e-7);
                    assert!(((gp - gm) / (2.0 * step) - h).abs() < 1e-7);
                }
            }
        }
    }

    #[test]
    fn probit_tail_is_finite() {
        let (ll, g, h) = Link::Probit.loglik_terms(-40.0, true);
        assert!(ll.is_finite() && g.is_finite() && h.is_finite());
        assert!((g - 40.0).abs() < 0.1);
    }

    #[test]
    fn quantile_conventions() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(interpolated_quantile(&v, 0.5), 2.5);
        assert_eq!(order_statistic_quantile(&v, 0.5), 2.0);
        assert_eq!(order_statistic_quantile(&v, 0.51), 3.0);
        assert_eq!(order_statistic_quantile(&v, 1.0), 4.0);
    }
}
