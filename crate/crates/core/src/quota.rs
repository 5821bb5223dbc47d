//! Relevance-proportional exposure quotas and the anchor-point search.

use crate::data::{GroupMap, RelevanceMatrix};
use crate::error::{Error, Result};
use crate::exposure::{total_exposure, ExposureModel};

/// Relative slack for comparisons between accumulated and target exposure.
/// Sums of examination probabilities taken in different orders drift by a
/// few ulps; the slack keeps exact ties (e.g. integer exposures at eta = 0)
/// from being missed.
pub(crate) const EXPOSURE_TOL: f64 = 1e-12;

/// Minimum exposure owed to each group for a fraction `alpha` of `E_total`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuotaTable {
    pub alpha: f64,
    pub e_total: f64,
    pub per_group: Vec<f64>,
}

impl QuotaTable {
    pub fn quota(&self, group: usize) -> f64 {
        self.per_group[group]
    }

    pub fn total(&self) -> f64 {
        self.per_group.iter().sum()
    }
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidAlpha(alpha));
    }
    Ok(())
}

/// Splits `alpha * total` in proportion to `weights`.
fn proportional_share(weights: &[f64], alpha: f64, total: f64) -> Result<Vec<f64>> {
    let sum: f64 = weights.iter().sum();
    if sum <= 0.0 {
        return Err(Error::ZeroRelevance);
    }
    Ok(weights.iter().map(|&w| w * alpha * total / sum).collect())
}

/// Group quotas `R(G) * alpha * E_total / sum R(G')`, with `R(G)` the summed
/// average relevance of the group's items.
pub fn compute_quotas(
    rel: &RelevanceMatrix,
    groups: &GroupMap,
    model: &ExposureModel,
    alpha: f64,
) -> Result<QuotaTable> {
    check_alpha(alpha)?;
    let e_total = total_exposure(model, rel.n_consumers());
    let group_rel = groups.aggregate(&rel.average_relevance());
    Ok(QuotaTable {
        alpha,
        e_total,
        per_group: proportional_share(&group_rel, alpha, e_total)?,
    })
}

/// Item quotas `R(d) * alpha * E_total / sum R(d')`.
pub fn item_quotas(rel: &RelevanceMatrix, model: &ExposureModel, alpha: f64) -> Result<Vec<f64>> {
    check_alpha(alpha)?;
    let e_total = total_exposure(model, rel.n_consumers());
    proportional_share(&rel.average_relevance(), alpha, e_total)
}

/// Slot where vertical allocation starts: a 1-based position in the consumer
/// order and a 1-based rank.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct AnchorPoint {
    pub consumer: usize,
    pub rank: usize,
}

/// Slots in backwards vertical order: `(m, k), (m-1, k), ..., (1, k), (m, k-1), ...`.
pub fn backward_walk(m: usize, k: usize) -> impl Iterator<Item = (usize, usize)> {
    (1..=k)
        .rev()
        .flat_map(move |r| (1..=m).rev().map(move |c| (c, r)))
}

/// Walks slots backwards from `(m, k)` and stops at the first slot where the
/// accumulated examination probability reaches `alpha * E_total`.
pub fn find_anchor(model: &ExposureModel, m: usize, alpha: f64) -> Result<AnchorPoint> {
    check_alpha(alpha)?;
    if alpha == 0.0 {
        return Err(Error::ZeroAlpha);
    }
    if m == 0 {
        return Err(Error::EmptyMatrix);
    }
    let e_total = total_exposure(model, m);
    let target = alpha * e_total;
    let tol = EXPOSURE_TOL * e_total;
    let mut exposure = 0.0;
    for (consumer, rank) in backward_walk(m, model.k()) {
        exposure += model.prob(rank);
        if exposure >= target - tol {
            return Ok(AnchorPoint { consumer, rank });
        }
    }
    // Only reachable through rounding when alpha = 1.
    Ok(AnchorPoint {
        consumer: 1,
        rank: 1,
    })
}

/// Exposure of all slots at or after `anchor` in forward vertical order:
/// every consumer at ranks below the anchor rank plus consumers
/// `anchor.consumer..=m` at the anchor rank.
pub fn exposure_from_anchor(model: &ExposureModel, m: usize, anchor: AnchorPoint) -> f64 {
    let below: f64 = model.probs()[anchor.rank..].iter().sum::<f64>() * m as f64;
    let at_rank = (m + 1 - anchor.consumer) as f64 * model.prob(anchor.rank);
    below + at_rank
}
