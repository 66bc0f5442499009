use cfdist_core::counterfactual::{counterfactual_cdf, distribution_effect, quantile_effect};
use cfdist_core::data::{default_u_grid, u_grid_range, Observation};
use cfdist_core::decomposition::{
    fit_union_logit, minwage_counterfactual_cdf, union_mixture_at, MinWagePolicy, MinWageStrategy,
};
use cfdist_core::estimators::{rearrange_values, Estimator};
use cfdist_core::inference::{gen_weights, uniform_band, BootstrapPlan, Scheme, WildLaw};
use cfdist_core::{
    CounterfactualSpec, FunctionalCurve, Group, GroupSample, GroupedDataset, Link, StepDistribution,
};
use proptest::prelude::*;

fn sorted_bits(v: &[f64]) -> Vec<u64> {
    let mut b: Vec<u64> = v.iter().map(|x| x.to_bits()).collect();
    b.sort_unstable();
    b
}

fn step_distribution() -> impl Strategy<Value = StepDistribution> {
    prop::collection::vec((0.0f64..10.0, 0.01f64..1.0), 1..12).prop_map(|atoms| {
        let mut ys: Vec<f64> = atoms.iter().map(|a| (a.0 * 100.0).round() / 100.0).collect();
        ys.sort_by(f64::total_cmp);
        ys.dedup();
        let total: f64 = atoms.iter().take(ys.len()).map(|a| a.1).sum();
        let mut acc = 0.0;
        let cdf: Vec<f64> = atoms
            .iter()
            .take(ys.len())
            .enumerate()
            .map(|(k, a)| {
                acc += a.1 / total;
                if k + 1 == ys.len() { 1.0 } else { acc.min(1.0) }
            })
            .collect();
        StepDistribution::new(ys, cdf).unwrap()
    })
}

proptest! {
    #[test]
    fn rearrangement_is_idempotent_and_preserves_values(v in prop::collection::vec(-1e3f64..1e3, 0..50)) {
        let mut once = v.clone();
        rearrange_values(&mut once);
        prop_assert!(once.windows(2).all(|w| w[0] <= w[1]));
        prop_assert_eq!(sorted_bits(&once), sorted_bits(&v));
        let mut twice = once.clone();
        rearrange_values(&mut twice);
        prop_assert_eq!(twice, once);
    }

    #[test]
    fn quantile_and_cdf_form_a_galois_connection(d in step_distribution(), u in 0.001f64..0.999) {
        let q = d.quantile(u).unwrap();
        prop_assert!(d.cdf_at(q) >= u);
        for &y in d.y_grid() {
            prop_assert_eq!(d.cdf_at(y) >= u, q <= y);
        }
    }

    #[test]
    fn lorenz_curve_is_convex_and_below_the_diagonal(d in step_distribution()) {
        prop_assume!(d.mean() > 0.0);
        let grid: Vec<f64> = (0..=40).map(|k| k as f64 / 40.0).collect();
        let l = d.lorenz_curve(&grid).unwrap().values;
        prop_assert!(l[0].abs() < 1e-12);
        prop_assert!((l[40] - 1.0).abs() < 1e-9);
        for k in 0..=40 {
            prop_assert!(l[k] <= grid[k] + 1e-12);
        }
        for k in 1..40 {
            prop_assert!(l[k] - l[k - 1] <= l[k + 1] - l[k] + 1e-9);
        }
        let g = d.gini().unwrap();
        prop_assert!((0.0..=1.0).contains(&g));
    }

    #[test]
    fn band_contains_estimate_and_grows_with_level(
        seed in 0u64..1000,
        len in 1usize..8,
    ) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let est = FunctionalCurve::new("e", (0..len).map(|i| i as f64).collect(), (0..len).map(|_| rng.random()).collect()).unwrap();
        let draws: Vec<Vec<f64>> = (0..60).map(|_| est.values.iter().map(|v| v + rng.random_range(-1.0..1.0)).collect()).collect();
        let narrow = uniform_band(&est, &draws, 0.8).unwrap();
        let wide = uniform_band(&est, &draws, 0.95).unwrap();
        for t in 0..len {
            prop_assert!(narrow.lower.values[t] <= est.values[t] && est.values[t] <= narrow.upper.values[t]);
            prop_assert!(wide.lower.values[t] <= narrow.lower.values[t]);
            prop_assert!(wide.upper.values[t] >= narrow.upper.values[t]);
        }
    }
}

fn plan(scheme: Scheme) -> BootstrapPlan {
    BootstrapPlan::new(scheme, 500, 2024).unwrap()
}

#[test]
fn bootstrap_weights_have_unit_mean_and_variance() {
    let n = 2000;
    for scheme in [Scheme::Multinomial, Scheme::Bayesian, Scheme::Wild { law: WildLaw::Exponential }, Scheme::Wild { law: WildLaw::Poisson }] {
        let p = plan(scheme);
        let (mut mean, mut var) = (0.0, 0.0);
        for b in 0..p.replications {
            let w = gen_weights(&p, n, b, Group::Zero).unwrap();
            let m = w.iter().sum::<f64>() / n as f64;
            mean += m;
            var += w.iter().map(|e| (e - m).powi(2)).sum::<f64>() / n as f64;
        }
        mean /= p.replications as f64;
        var /= p.replications as f64;
        assert!((mean - 1.0).abs() < 0.02, "{scheme:?}: mean {mean}");
        assert!((var - 1.0).abs() < 0.15, "{scheme:?}: variance {var}");
    }
}

#[test]
fn subsample_and_k_of_n_weights_follow_their_laws() {
    let n = 2000;
    let k = 500;
    let value = n as f64 / ((n - k) as f64).sqrt() / (k as f64).sqrt();
    let p = plan(Scheme::Subsample { k });
    for b in 0..20 {
        let w = gen_weights(&p, n, b, Group::One).unwrap();
        assert_eq!(w.iter().filter(|&&e| e != 0.0).count(), k);
        assert!(w.iter().all(|&e| e == 0.0 || (e - value).abs() <= 1e-12 * value));
    }
    let p = plan(Scheme::KOfN { k });
    for b in 0..20 {
        let w = gen_weights(&p, n, b, Group::Zero).unwrap();
        let mean = w.iter().sum::<f64>() / n as f64;
        assert!((mean * mean - k as f64 / n as f64).abs() < 1e-12);
    }
}

fn two_group_dataset(seed: u64, n: usize) -> GroupedDataset {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut group = |shift: f64| -> Vec<Observation> {
        (0..n)
            .map(|_| {
                let x: f64 = rng.random_range(0.0..2.0);
                let union = if rng.random::<f64>() < 0.3 + 0.1 * x { 1.0 } else { 0.0 };
                let e: f64 = rand_distr::Distribution::sample(&rand_distr::StandardNormal, &mut rng);
                let y = 1.5 + (0.3 + shift) * x + 0.15 * union + 0.4 * e;
                Observation::new(y, vec![x, union], rng.random_range(0.5..1.5))
            })
            .collect()
    };
    let g0 = group(0.0);
    let g1 = group(0.1);
    GroupedDataset::new(g0, g1, vec!["x".into(), "union".into()]).unwrap()
}

#[test]
fn identity_counterfactual_has_exactly_zero_effects() {
    let ds = two_group_dataset(3, 150);
    let y_grid = cfdist_core::data::default_y_grid(&ds, 60).unwrap();
    let u_grid = u_grid_range(0.05, 0.95, 0.05).unwrap();
    let estimators = [
        Estimator::Location,
        Estimator::QuantileRegression,
        Estimator::DistributionRegression { link: Link::Logit },
        Estimator::DistributionRegression { link: Link::Probit },
        Estimator::DurationDr { link: Link::Logit, y0: y_grid[30] },
    ];
    for est in estimators {
        let m0 = est.fit_cdf(ds.group(Group::Zero), &u_grid, &y_grid).unwrap();
        let m1 = est.fit_cdf(ds.group(Group::One), &u_grid, &y_grid).unwrap();
        let spec = CounterfactualSpec::new(Group::Zero, Group::Zero);
        let a = counterfactual_cdf([&m0, &m1], &ds, &spec).unwrap().distribution;
        let b = counterfactual_cdf([&m0, &m1], &ds, &spec).unwrap().distribution;
        let qe = quantile_effect(&a, &b, &default_u_grid()).unwrap();
        let de = distribution_effect(&a, &b, &y_grid).unwrap();
        assert!(qe.values.iter().chain(&de.values).all(|&v| v == 0.0), "{est:?}");
    }
}

#[test]
fn minimum_wage_counterfactual_is_monotone_and_continuous() {
    let ds = two_group_dataset(4, 200);
    let y_grid = cfdist_core::data::default_y_grid(&ds, 40).unwrap();
    let est = Estimator::DistributionRegression { link: Link::Logit };
    let old = est.fit_cdf(ds.group(Group::Zero), &[0.5], &y_grid).unwrap();
    let new = est.fit_cdf(ds.group(Group::One), &[0.5], &y_grid).unwrap();
    let m = y_grid[12];
    let policy = MinWagePolicy { strategy: MinWageStrategy::RatioScaling, m_old: m, m_new: y_grid[8] };
    let cf = minwage_counterfactual_cdf(&new, &old, &policy).unwrap();
    let censored =
        minwage_counterfactual_cdf(&new, &old, &MinWagePolicy { strategy: MinWageStrategy::Censoring, ..policy })
            .unwrap();
    let sample: &GroupSample = ds.group(Group::One);
    for i in 0..sample.len() {
        let x = sample.covariates(i);
        let f = cf.evaluate(x).unwrap();
        assert!(f.windows(2).all(|w| w[0] <= w[1]));
        assert_eq!(f[12], new.evaluate(x).unwrap()[12]);
        let c = censored.evaluate(x).unwrap();
        assert!(c[..12].iter().all(|&v| v == 0.0));
    }
}

#[test]
fn union_mixture_lies_between_its_branches() {
    let ds = two_group_dataset(5, 200);
    let y_grid = cfdist_core::data::default_y_grid(&ds, 30).unwrap();
    let model = Estimator::DistributionRegression { link: Link::Logit }
        .fit_cdf(ds.group(Group::One), &[0.5], &y_grid)
        .unwrap();
    let p = fit_union_logit(ds.group(Group::Zero), 1, None).unwrap();
    let sample = ds.group(Group::One);
    for i in 0..sample.len() {
        let x = sample.covariates(i);
        let mix = union_mixture_at(&model, &p, x, 1).unwrap();
        let f1 = model.evaluate(&[x[0], 1.0]).unwrap();
        let f0 = model.evaluate(&[x[0], 0.0]).unwrap();
        for k in 0..y_grid.len() {
            let (lo, hi) = (f0[k].min(f1[k]), f0[k].max(f1[k]));
            assert!(mix[k] >= lo - 1e-15 && mix[k] <= hi + 1e-15);
        }
    }
}
