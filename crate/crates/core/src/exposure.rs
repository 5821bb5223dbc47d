//! Position-based examination model and exposure accounting.

use crate::data::GroupMap;
use crate::error::{Error, Result};
use crate::slate::SlateSet;

/// Position-based examination probabilities `p_j = (1 / log2(1 + j))^eta`
/// for 1-based ranks `j = 1..=k`, shared by every consumer.
#[derive(Debug, Clone, PartialEq)]
pub struct ExposureModel {
    eta: f64,
    probs: Vec<f64>,
}

impl ExposureModel {
    pub fn pbm(eta: f64, k: usize) -> Result<Self> {
        if !eta.is_finite() || eta < 0.0 {
            return Err(Error::InvalidEta(eta));
        }
        if k == 0 {
            return Err(Error::ZeroSlateLength);
        }
        let probs = (1..=k)
            .map(|j| (1.0 / (1.0 + j as f64).log2()).powf(eta))
            .collect();
        Ok(Self { eta, probs })
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn k(&self) -> usize {
        self.probs.len()
    }

    /// Examination probability at a 1-based rank.
    #[inline]
    pub fn prob(&self, rank: usize) -> f64 {
        self.probs[rank - 1]
    }

    /// Probabilities indexed from rank 1 at position 0.
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Probability of the last rank, the smallest one.
    pub fn last_prob(&self) -> f64 {
        self.probs[self.probs.len() - 1]
    }

    /// Exposure carried by one full slate.
    pub fn slate_exposure(&self) -> f64 {
        self.probs.iter().sum()
    }
}

/// `E_total` for `m` slates of length `k`.
pub fn total_exposure(model: &ExposureModel, m: usize) -> f64 {
    m as f64 * model.slate_exposure()
}

/// Accumulated exposure `E(d)` per item and `E(G)` per group.
#[derive(Debug, Clone, PartialEq)]
pub struct ExposureLedger {
    pub per_item: Vec<f64>,
    pub per_group: Vec<f64>,
}

impl ExposureLedger {
    pub fn zeros(n_items: usize, n_groups: usize) -> Self {
        Self {
            per_item: vec![0.0; n_items],
            per_group: vec![0.0; n_groups],
        }
    }

    pub fn item_total(&self) -> f64 {
        self.per_item.iter().sum()
    }

    pub fn group_total(&self) -> f64 {
        self.per_group.iter().sum()
    }

    /// Element-wise sum of two ledgers over the same items and groups.
    pub fn merge(mut self, other: &ExposureLedger) -> Self {
        for (a, b) in self.per_item.iter_mut().zip(&other.per_item) {
            *a += b;
        }
        for (a, b) in self.per_group.iter_mut().zip(&other.per_group) {
            *a += b;
        }
        self
    }
}

/// Sums the examination probability of every slot into item and group totals.
pub fn accumulate(
    slates: &SlateSet,
    model: &ExposureModel,
    groups: &GroupMap,
) -> Result<ExposureLedger> {
    let n = groups.n_items();
    let mut ledger = ExposureLedger::zeros(n, groups.n_groups());
    for slate in &slates.slates {
        if slate.slots.len() > model.k() {
            return Err(Error::InvalidSlate {
                consumer: format!("#{}", slate.consumer),
                reason: format!(
                    "length {} exceeds model length {}",
                    slate.slots.len(),
                    model.k()
                ),
            });
        }
        for (r, p) in slate.slots.iter().enumerate() {
            if p.item >= n {
                return Err(Error::UnknownItem(format!("#{}", p.item)));
            }
            let e = model.probs[r];
            ledger.per_item[p.item] += e;
            ledger.per_group[groups.group_of(p.item)] += e;
        }
    }
    Ok(ledger)
}
