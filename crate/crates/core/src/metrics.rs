//! Consumer-side NDCG and provider-side amortized fairness.
//!
//! DCG uses linear gain `R(d, u)` and the examination probability `p_j` as
//! the rank discount, so the relevance metric and the exposure accounting
//! share one position model. Fairness is `1 - JSD(E || R)` with base-2
//! logarithms, over the full slate length.

use std::collections::BTreeMap;

use crate::data::{GroupMap, RelevanceMatrix};
use crate::error::{Error, Result};
use crate::exposure::{accumulate, ExposureLedger, ExposureModel};
use crate::slate::SlateSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FairnessLevel {
    Individual,
    Group,
}

/// Two-sided evaluation of one slate set.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub ndcg_at: BTreeMap<usize, f64>,
    pub fairness_individual: f64,
    pub fairness_group: f64,
}

/// DCG of the first `cutoff` items of `items` for one consumer.
fn dcg(
    rel: &RelevanceMatrix,
    model: &ExposureModel,
    consumer: usize,
    items: &[usize],
    cutoff: usize,
) -> f64 {
    items
        .iter()
        .take(cutoff)
        .zip(model.probs())
        .map(|(&d, &p)| rel.score(consumer, d) * p)
        .sum()
}

/// DCG of the best possible list: the consumer's `cutoff` most relevant items
/// over the whole catalogue, in descending order.
fn ideal_dcg(rel: &RelevanceMatrix, model: &ExposureModel, consumer: usize, cutoff: usize) -> f64 {
    let mut row = rel.row(consumer).to_vec();
    let cutoff = cutoff.min(row.len());
    if cutoff < row.len() {
        row.select_nth_unstable_by(cutoff, |a, b| b.total_cmp(a));
        row.truncate(cutoff);
    }
    row.sort_by(|a, b| b.total_cmp(a));
    row.iter().zip(model.probs()).map(|(r, p)| r * p).sum()
}

fn check_cutoff(cutoff: usize, k: usize) -> Result<()> {
    if cutoff == 0 || cutoff > k {
        return Err(Error::CutoffOutOfRange { cutoff, k });
    }
    Ok(())
}

/// Per-consumer NDCG@`cutoff`; consumers whose ideal DCG is zero score 1.
pub fn ndcg_per_consumer(
    slates: &SlateSet,
    rel: &RelevanceMatrix,
    model: &ExposureModel,
    cutoff: usize,
) -> Result<Vec<f64>> {
    check_cutoff(cutoff, model.k())?;
    Ok(slates
        .slates
        .iter()
        .map(|s| {
            let ideal = ideal_dcg(rel, model, s.consumer, cutoff);
            if ideal > 0.0 {
                dcg(rel, model, s.consumer, &s.item_vec(), cutoff) / ideal
            } else {
                1.0
            }
        })
        .collect())
}

/// Macro-averaged NDCG@`cutoff` over all slates.
pub fn ndcg(
    slates: &SlateSet,
    rel: &RelevanceMatrix,
    model: &ExposureModel,
    cutoff: usize,
) -> Result<f64> {
    let per = ndcg_per_consumer(slates, rel, model, cutoff)?;
    if per.is_empty() {
        return Ok(1.0);
    }
    Ok(per.iter().sum::<f64>() / per.len() as f64)
}

fn normalized(v: &[f64]) -> Option<Vec<f64>> {
    let total: f64 = v.iter().sum();
    (total > 0.0).then(|| v.iter().map(|x| x / total).collect())
}

/// Base-2 Jensen-Shannon divergence between two non-negative vectors, each
/// normalized to sum to one first. Returns `None` if either sums to zero.
pub fn jensen_shannon(p: &[f64], q: &[f64]) -> Option<f64> {
    assert_eq!(p.len(), q.len(), "distributions must have equal support");
    let (p, q) = (normalized(p)?, normalized(q)?);
    // 0 * log 0 = 0
    let term = |x: f64, mid: f64| if x > 0.0 { x * (x / mid).log2() } else { 0.0 };
    let mut js = 0.0;
    for (&a, &b) in p.iter().zip(&q) {
        let mid = 0.5 * (a + b);
        // Adding the pair first keeps the result exactly symmetric.
        js += 0.5 * (term(a, mid) + term(b, mid));
    }
    Some(js.clamp(0.0, 1.0))
}

/// `1 - JSD(E || R)` at item or group level.
pub fn jsd_fairness(
    ledger: &ExposureLedger,
    rel: &RelevanceMatrix,
    groups: &GroupMap,
    level: FairnessLevel,
) -> Result<f64> {
    let avg = rel.average_relevance();
    let (exposure, relevance) = match level {
        FairnessLevel::Individual => (ledger.per_item.clone(), avg),
        FairnessLevel::Group => (ledger.per_group.clone(), groups.aggregate(&avg)),
    };
    if exposure.iter().sum::<f64>() <= 0.0 {
        return Err(Error::ZeroExposure);
    }
    if relevance.iter().sum::<f64>() <= 0.0 {
        return Err(Error::ZeroRelevance);
    }
    let js = jensen_shannon(&exposure, &relevance).expect("both sums checked positive");
    Ok(1.0 - js)
}

/// NDCG at every cutoff plus both fairness levels from a single ledger.
pub fn evaluate(
    slates: &SlateSet,
    rel: &RelevanceMatrix,
    groups: &GroupMap,
    model: &ExposureModel,
    cutoffs: &[usize],
) -> Result<EvalReport> {
    let mut ndcg_at = BTreeMap::new();
    for &c in cutoffs {
        ndcg_at.insert(c, ndcg(slates, rel, model, c)?);
    }
    let ledger = accumulate(slates, model, groups)?;
    Ok(EvalReport {
        ndcg_at,
        fairness_individual: jsd_fairness(&ledger, rel, groups, FairnessLevel::Individual)?,
        fairness_group: jsd_fairness(&ledger, rel, groups, FairnessLevel::Group)?,
    })
}

/// Gini coefficient of a non-negative vector; 0 for all-equal values.
pub fn gini(values: &[f64]) -> f64 {
    let n = values.len();
    let total: f64 = values.iter().sum();
    if n == 0 || total <= 0.0 {
        return 0.0;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let weighted: f64 = sorted
        .iter()
        .enumerate()
        .map(|(i, v)| (2.0 * (i as f64 + 1.0) - n as f64 - 1.0) * v)
        .sum();
    weighted / (n as f64 * total)
}
