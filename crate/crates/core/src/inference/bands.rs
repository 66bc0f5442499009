use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::distribution::FunctionalCurve;
use crate::math::{interpolated_quantile, order_statistic_quantile, NORMAL_IQR};
use crate::{Error, Result};

/// Simultaneous band estimate +/- critical_value * pointwise_se.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniformBand {
    pub estimate: FunctionalCurve,
    pub lower: FunctionalCurve,
    pub upper: FunctionalCurve,
    pub level: f64,
    pub critical_value: f64,
    pub pointwise_se: FunctionalCurve,
}

fn check_draws(estimate: &FunctionalCurve, draws: &[Vec<f64>]) -> Result<()> {
    if draws.is_empty() {
        return Err(Error::InvalidArgument("no bootstrap draws".into()));
    }
    if let Some(row) = draws.iter().find(|r| r.len() != estimate.len()) {
        return Err(Error::DimensionMismatch { expected: estimate.len(), found: row.len() });
    }
    Ok(())
}

/// Robust pointwise scale: bootstrap interquartile range divided by the
/// standard normal IQR, floored at machine epsilon times the range spanned by
/// the estimate and the draws. All zeros when that range is zero.
pub fn bootstrap_scale(estimate: &FunctionalCurve, draws: &[Vec<f64>]) -> Result<Vec<f64>> {
    check_draws(estimate, draws)?;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in estimate.values.iter().chain(draws.iter().flatten()) {
        lo = lo.min(*v);
        hi = hi.max(*v);
    }
    let floor = f64::EPSILON * (hi - lo);
    let mut column = Vec::with_capacity(draws.len());
    let mut scales = Vec::with_capacity(estimate.len());
    for t in 0..estimate.len() {
        column.clear();
        column.extend(draws.iter().map(|r| r[t]));
        column.sort_by(f64::total_cmp);
        let iqr = interpolated_quantile(&column, 0.75) - interpolated_quantile(&column, 0.25);
        let s = (iqr / NORMAL_IQR).max(floor);
        if !s.is_finite() {
            return Err(Error::DegenerateBand);
        }
        scales.push(s);
    }
    Ok(scales)
}

fn studentize(v: f64, s: f64) -> f64 {
    if s > 0.0 {
        v / s
    } else if v == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

fn sup_statistics<F: Fn(usize, &[f64]) -> f64>(draws: &[Vec<f64>], per_point: F) -> Vec<f64> {
    let mut sups: Vec<f64> = draws.iter().map(|row| (0..row.len()).map(|t| per_point(t, row)).fold(0.0, f64::max)).collect();
    sups.sort_by(f64::total_cmp);
    sups
}

fn check_level(level: f64) -> Result<()> {
    if !(level > 0.5 && level < 1.0) {
        return Err(Error::InvalidArgument("band level must lie in (0.5, 1)".into()));
    }
    Ok(())
}

/// Uniform band from the level-quantile of the bootstrap distribution of
/// sup_t |draw_b(t) - estimate(t)| / scale(t).
pub fn uniform_band(estimate: &FunctionalCurve, draws: &[Vec<f64>], level: f64) -> Result<UniformBand> {
    check_level(level)?;
    if draws.len() < 20 {
        return Err(Error::InvalidArgument("uniform bands need at least 20 bootstrap draws".into()));
    }
    let scales = bootstrap_scale(estimate, draws)?;
    let sups = sup_statistics(draws, |t, row| studentize((row[t] - estimate.values[t]).abs(), scales[t]));
    let critical = order_statistic_quantile(&sups, level);
    if !critical.is_finite() {
        return Err(Error::DegenerateBand);
    }
    let shifted = |sign: f64, label: &str| {
        let values = estimate.values.iter().zip(&scales).map(|(e, s)| e + sign * critical * s).collect();
        FunctionalCurve::new(label, estimate.index_grid.clone(), values)
    };
    Ok(UniformBand {
        lower: shifted(-1.0, "lower")?,
        upper: shifted(1.0, "upper")?,
        pointwise_se: FunctionalCurve::new("se", estimate.index_grid.clone(), scales)?,
        estimate: estimate.clone(),
        level,
        critical_value: critical,
    })
}

/// Per-point percentile-t critical values (the sup over a single point).
pub fn pointwise_critical_values(estimate: &FunctionalCurve, draws: &[Vec<f64>], level: f64) -> Result<Vec<f64>> {
    check_level(level)?;
    let scales = bootstrap_scale(estimate, draws)?;
    Ok((0..estimate.len())
        .map(|t| {
            let mut v: Vec<f64> =
                draws.iter().map(|r| studentize((r[t] - estimate.values[t]).abs(), scales[t])).collect();
            v.sort_by(f64::total_cmp);
            order_statistic_quantile(&v, level)
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NullHypothesis {
    NoEffect,
    ConstantEffect,
    PositiveEffect,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KsReport {
    pub null: NullHypothesis,
    pub statistic: f64,
    pub p_value: f64,
}

/// KS-type test of an effect curve against `null`; the p-value is the share
/// of centred bootstrap sup statistics at least as large as the observed one.
pub fn ks_test(estimate: &FunctionalCurve, draws: &[Vec<f64>], null: NullHypothesis) -> Result<KsReport> {
    let scales = bootstrap_scale(estimate, draws)?;
    let est = &estimate.values;
    let grid_mean = |v: &mut dyn Iterator<Item = f64>| {
        let (s, c) = v.fold((0.0, 0usize), |(s, c), x| (s + x, c + 1));
        s / c as f64
    };
    let (statistic, sups) = match null {
        NullHypothesis::NoEffect => (
            est.iter().zip(&scales).map(|(e, s)| studentize(e.abs(), *s)).fold(0.0, f64::max),
            sup_statistics(draws, |t, row| studentize((row[t] - est[t]).abs(), scales[t])),
        ),
        NullHypothesis::ConstantEffect => {
            let m = grid_mean(&mut est.iter().copied());
            let stat = est.iter().zip(&scales).map(|(e, s)| studentize((e - m).abs(), *s)).fold(0.0, f64::max);
            let centred: Vec<Vec<f64>> = draws
                .iter()
                .map(|row| {
                    let dev: Vec<f64> = row.iter().zip(est).map(|(r, e)| r - e).collect();
                    let dm = grid_mean(&mut dev.iter().copied());
                    dev.into_iter().map(|d| d - dm).collect()
                })
                .collect();
            (stat, sup_statistics(&centred, |t, row| studentize(row[t].abs(), scales[t])))
        }
        NullHypothesis::PositiveEffect => (
            est.iter().zip(&scales).map(|(e, s)| studentize((-e).max(0.0), *s)).fold(0.0, f64::max),
            sup_statistics(draws, |t, row| studentize((est[t] - row[t]).max(0.0), scales[t])),
        ),
    };
    let exceed = sups.iter().filter(|&&s| s >= statistic).count();
    Ok(KsReport { null, statistic, p_value: exceed as f64 / sups.len() as f64 })
}
