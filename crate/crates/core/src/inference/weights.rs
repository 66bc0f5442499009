use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::Group;
use crate::math::{exp, ln, sqrt};
use crate::{Error, Result};

pub const DEFAULT_REPLICATIONS: usize = 100;

/// Law of the i.i.d. wild-bootstrap multipliers (nonnegative, mean 1,
/// variance 1 unless `Constant`).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WildLaw {
    #[default]
    Exponential,
    Poisson,
    /// Every weight equal to one (zero variance); a test hook.
    Constant,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Scheme {
    /// Multinomial(n, 1/n) counts: the empirical bootstrap.
    Multinomial,
    /// Unit exponentials divided by their mean.
    Bayesian,
    Wild {
        #[serde(default)]
        law: WildLaw,
    },
    /// sqrt(n / k) times Multinomial(k, 1/n) counts.
    KOfN { k: usize },
    /// n / sqrt((n - k) k) on k positions drawn without replacement, 0 elsewhere.
    Subsample { k: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BootstrapPlan {
    pub scheme: Scheme,
    pub replications: usize,
    pub master_seed: u64,
}

impl BootstrapPlan {
    pub fn new(scheme: Scheme, replications: usize, master_seed: u64) -> Result<Self> {
        if replications == 0 {
            return Err(Error::InvalidArgument("bootstrap needs at least one replication".into()));
        }
        Ok(Self { scheme, replications, master_seed })
    }

    pub fn validate_for(&self, n: usize) -> Result<()> {
        if n < 2 {
            return Err(Error::InvalidArgument("bootstrap needs n >= 2".into()));
        }
        match self.scheme {
            Scheme::KOfN { k } | Scheme::Subsample { k } if k == 0 || k >= n => {
                Err(Error::InvalidArgument(format!("resample size k = {k} must satisfy 1 <= k < n = {n}")))
            }
            _ => Ok(()),
        }
    }

    fn rng(&self, replication: usize, group: Group) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(2 * replication as u64 + group.index() as u64);
        rng
    }
}

fn unit_exponential<R: Rng>(rng: &mut R) -> f64 {
    -ln(1.0 - rng.random::<f64>())
}

fn poisson_one<R: Rng>(rng: &mut R) -> f64 {
    let limit = exp(-1.0);
    let mut product = rng.random::<f64>();
    let mut count = 0.0;
    while product > limit {
        product *= rng.random::<f64>();
        count += 1.0;
    }
    count
}

fn multinomial_counts<R: Rng>(rng: &mut R, n: usize, draws: usize) -> Vec<f64> {
    let mut counts = vec![0.0; n];
    for _ in 0..draws {
        counts[rng.random_range(0..n)] += 1.0;
    }
    counts
}

/// Exchangeable weights for one group in one replication. The stream is a
/// pure function of (master seed, replication, group).
pub fn gen_weights(plan: &BootstrapPlan, n: usize, replication: usize, group: Group) -> Result<Vec<f64>> {
    plan.validate_for(n)?;
    if replication >= plan.replications {
        return Err(Error::InvalidArgument(format!(
            "replication {replication} out of range for B = {}",
            plan.replications
        )));
    }
    let mut rng = plan.rng(replication, group);
    let weights = match plan.scheme {
        Scheme::Multinomial => multinomial_counts(&mut rng, n, n),
        Scheme::Bayesian => {
            let draws: Vec<f64> = (0..n).map(|_| unit_exponential(&mut rng)).collect();
            let mean = draws.iter().sum::<f64>() / n as f64;
            draws.into_iter().map(|d| d / mean).collect()
        }
        Scheme::Wild { law } => match law {
            WildLaw::Exponential => (0..n).map(|_| unit_exponential(&mut rng)).collect(),
            WildLaw::Poisson => (0..n).map(|_| poisson_one(&mut rng)).collect(),
            WildLaw::Constant => vec![1.0; n],
        },
        Scheme::KOfN { k } => {
            let scale = sqrt(n as f64 / k as f64);
            multinomial_counts(&mut rng, n, k).into_iter().map(|c| scale * c).collect()
        }
        Scheme::Subsample { k } => {
            let value = n as f64 / (sqrt((n - k) as f64) * sqrt(k as f64));
            let mut w = vec![0.0; n];
            for i in rand::seq::index::sample(&mut rng, n, k) {
                w[i] = value;
            }
            w
        }
    };
    Ok(weights)
}
