use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::weights::{gen_weights, BootstrapPlan};
use crate::data::{Group, GroupedDataset};
use crate::parallel::map_indexed;
use crate::{Error, Result};

/// Largest share of failed replications tolerated before the call errors.
pub const MAX_FAILED_SHARE: f64 = 0.10;

/// Bootstrap draws of a curve-valued statistic, one row per successful
/// replication in replication order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrawMatrix {
    pub rows: Vec<Vec<f64>>,
    pub replications: Vec<usize>,
    pub failed: Vec<usize>,
}

/// Recomputes `statistic` on B reweighted copies of `dataset`.
///
/// In replication b every observation weight of group g is multiplied by
/// the exchangeable weight e_i^(b, g) and renormalized within the group, so
/// outcomes and covariates are resampled jointly. Replications run
/// independently; failures are dropped up to [`MAX_FAILED_SHARE`].
pub fn bootstrap_curves<F>(dataset: &GroupedDataset, plan: &BootstrapPlan, statistic: F) -> Result<DrawMatrix>
where
    F: Fn(&GroupedDataset) -> Result<Vec<f64>> + Sync,
{
    for g in Group::BOTH {
        plan.validate_for(dataset.group(g).len())?;
    }
    let results = map_indexed(plan.replications, |b| -> Result<Vec<f64>> {
        let e0 = gen_weights(plan, dataset.group(Group::Zero).len(), b, Group::Zero)?;
        let e1 = gen_weights(plan, dataset.group(Group::One).len(), b, Group::One)?;
        let resampled = dataset.reweighted([&e0, &e1])?;
        statistic(&resampled)
    });
    let mut draws = DrawMatrix { rows: Vec::new(), replications: Vec::new(), failed: Vec::new() };
    for (b, result) in results.into_iter().enumerate() {
        match result {
            Ok(row) if draws.rows.first().map_or(true, |first| first.len() == row.len()) => {
                draws.rows.push(row);
                draws.replications.push(b);
            }
            Ok(_) => return Err(Error::InvalidArgument("statistic returned rows of different lengths".into())),
            Err(e) => {
                log::warn!("bootstrap replication {b} failed: {e}");
                draws.failed.push(b);
            }
        }
    }
    if draws.failed.len() as f64 > MAX_FAILED_SHARE * plan.replications as f64 {
        return Err(Error::ReplicationBudget { failed: draws.failed.len(), total: plan.replications });
    }
    Ok(draws)
}
