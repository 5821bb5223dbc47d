//! Vertical quota-constrained slate allocation.
//!
//! Three phases:
//!
//! 1. **Allocation.** Starting at the anchor point, slots are visited one rank
//!    at a time across all consumers. Each slot takes the consumer's most
//!    relevant unplaced item whose group still has at least the slot's
//!    examination probability left in its quota. If no such item exists the
//!    quota is ignored for that slot.
//! 2. **Appending.** Every slot still empty gets the consumer's most relevant
//!    unplaced item, unconstrained.
//! 3. **Re-sorting.** Each slate is sorted by the consumer's relevance.
//!
//! Ties in relevance are broken by ascending item id throughout.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::{identity_groups, GroupMap, RelevanceMatrix};
use crate::error::{Error, Result};
use crate::exposure::{total_exposure, ExposureModel};
use crate::quota::{
    check_alpha, compute_quotas, find_anchor, AnchorPoint, QuotaTable, EXPOSURE_TOL,
};
pub use crate::slate::{AllocationReport, Phase, Placement, Slate, SlateSet};

/// Order in which consumers are visited.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ConsumerOrder {
    /// Matrix row order.
    Dataset,
    /// Seeded uniform shuffle of the rows.
    Shuffled(u64),
    /// An explicit permutation of consumer indices.
    Explicit(Vec<usize>),
}

impl ConsumerOrder {
    pub fn resolve(&self, m: usize) -> Result<Vec<usize>> {
        match self {
            ConsumerOrder::Dataset => Ok((0..m).collect()),
            ConsumerOrder::Shuffled(seed) => {
                let mut order: Vec<usize> = (0..m).collect();
                order.shuffle(&mut ChaCha8Rng::seed_from_u64(*seed));
                Ok(order)
            }
            ConsumerOrder::Explicit(order) => {
                let mut seen = vec![false; m];
                let is_perm = order.len() == m
                    && order
                        .iter()
                        .all(|&c| c < m && !std::mem::replace(&mut seen[c], true));
                if !is_perm {
                    return Err(Error::Config(format!(
                        "consumer order must be a permutation of 0..{m}"
                    )));
                }
                Ok(order.clone())
            }
        }
    }
}

pub(crate) fn check_slate_length(rel: &RelevanceMatrix, k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::ZeroSlateLength);
    }
    if rel.n_items() < k {
        return Err(Error::TooFewItems {
            n: rel.n_items(),
            k,
        });
    }
    Ok(())
}

/// Mutable state of one allocation run.
struct AllocationState<'a> {
    rel: &'a RelevanceMatrix,
    groups: &'a GroupMap,
    /// `m * n` flags: item already placed for the consumer. Complement of `F(u)`.
    taken: Vec<bool>,
    /// `Ẽ(G)`.
    allocated: Vec<f64>,
    quotas: QuotaTable,
    /// `m * k` board indexed by consumer (matrix index) and 0-based rank.
    board: Vec<Option<(usize, Phase)>>,
    fallback_count: usize,
}

impl<'a> AllocationState<'a> {
    fn new(rel: &'a RelevanceMatrix, groups: &'a GroupMap, quotas: QuotaTable, k: usize) -> Self {
        let (m, n) = (rel.n_consumers(), rel.n_items());
        Self {
            rel,
            groups,
            taken: vec![false; m * n],
            allocated: vec![0.0; groups.n_groups()],
            quotas,
            board: vec![None; m * k],
            fallback_count: 0,
        }
    }

    fn feasible(&self, consumer: usize) -> impl Iterator<Item = usize> + '_ {
        let n = self.rel.n_items();
        let row = &self.taken[consumer * n..(consumer + 1) * n];
        row.iter().enumerate().filter(|(_, &t)| !t).map(|(d, _)| d)
    }

    fn best<I: Iterator<Item = usize>>(&self, consumer: usize, items: I) -> Option<usize> {
        items.min_by(|&a, &b| self.rel.cmp_preference(consumer, a, b))
    }

    fn place(&mut self, consumer: usize, rank: usize, k: usize, item: usize, phase: Phase) {
        let n = self.rel.n_items();
        self.taken[consumer * n + item] = true;
        self.board[consumer * k + rank - 1] = Some((item, phase));
    }

    /// Fills slot `(consumer, rank)` from the quota-eligible candidates, or
    /// from the whole feasible set when none is eligible.
    fn allocate_slot(&mut self, consumer: usize, rank: usize, k: usize, p: f64, tol: f64) {
        let eligible: Vec<bool> = self
            .quotas
            .per_group
            .iter()
            .zip(&self.allocated)
            .map(|(q, e)| q - e >= p - tol)
            .collect();
        let groups = self.groups;
        let choice = self
            .best(
                consumer,
                self.feasible(consumer)
                    .filter(|&d| eligible[groups.group_of(d)]),
            )
            .or_else(|| {
                self.fallback_count += 1;
                self.best(consumer, self.feasible(consumer))
            })
            .expect("n >= k leaves a feasible item for every slot");
        self.allocated[groups.group_of(choice)] += p;
        self.place(consumer, rank, k, choice, Phase::Allocation);
    }

    /// Fills the empty slots of one consumer with its most relevant
    /// unplaced items, top rank first.
    fn append(&mut self, consumer: usize, k: usize) {
        let empty: Vec<usize> = (1..=k)
            .filter(|r| self.board[consumer * k + r - 1].is_none())
            .collect();
        if empty.is_empty() {
            return;
        }
        let rel = self.rel;
        let mut pool: Vec<usize> = self.feasible(consumer).collect();
        let cmp = |a: &usize, b: &usize| rel.cmp_preference(consumer, *a, *b);
        if empty.len() < pool.len() {
            pool.select_nth_unstable_by(empty.len() - 1, cmp);
            pool.truncate(empty.len());
        }
        pool.sort_by(cmp);
        for (rank, item) in empty.into_iter().zip(pool) {
            self.place(consumer, rank, k, item, Phase::Appending);
        }
    }

    fn to_slate(&self, consumer: usize, k: usize) -> Slate {
        let mut slots: Vec<Placement> = (0..k)
            .map(|r| {
                let (item, phase) = self.board[consumer * k + r].expect("every slot filled");
                Placement {
                    item,
                    phase,
                    placed_rank: r + 1,
                }
            })
            .collect();
        slots.sort_by(|a, b| self.rel.cmp_preference(consumer, a.item, b.item));
        Slate { consumer, slots }
    }
}

/// Runs the allocator with a seeded shuffle of the consumers.
pub fn allocate(
    rel: &RelevanceMatrix,
    groups: &GroupMap,
    model: &ExposureModel,
    alpha: f64,
    seed: u64,
) -> Result<SlateSet> {
    allocate_with_order(rel, groups, model, alpha, &ConsumerOrder::Shuffled(seed))
}

/// Individual mode: every item is its own group.
pub fn allocate_individual(
    rel: &RelevanceMatrix,
    model: &ExposureModel,
    alpha: f64,
    seed: u64,
) -> Result<SlateSet> {
    allocate(rel, &identity_groups(rel), model, alpha, seed)
}

pub fn allocate_with_order(
    rel: &RelevanceMatrix,
    groups: &GroupMap,
    model: &ExposureModel,
    alpha: f64,
    order: &ConsumerOrder,
) -> Result<SlateSet> {
    let k = model.k();
    check_slate_length(rel, k)?;
    check_alpha(alpha)?;
    if groups.n_items() != rel.n_items() {
        return Err(Error::Config(format!(
            "group map covers {} items, relevance matrix has {}",
            groups.n_items(),
            rel.n_items()
        )));
    }
    let m = rel.n_consumers();
    let order = order.resolve(m)?;

    let quotas = if alpha > 0.0 {
        compute_quotas(rel, groups, model, alpha)?
    } else {
        QuotaTable {
            alpha,
            e_total: total_exposure(model, m),
            per_group: vec![0.0; groups.n_groups()],
        }
    };
    let tol = EXPOSURE_TOL * quotas.e_total;
    let mut state = AllocationState::new(rel, groups, quotas, k);

    let anchor: Option<AnchorPoint> = if alpha > 0.0 {
        Some(find_anchor(model, m, alpha)?)
    } else {
        None
    };
    if let Some(anchor) = anchor {
        for rank in anchor.rank..=k {
            let first = if rank == anchor.rank {
                anchor.consumer
            } else {
                1
            };
            let p = model.prob(rank);
            for pos in first..=m {
                state.allocate_slot(order[pos - 1], rank, k, p, tol);
            }
        }
    }

    for &consumer in &order {
        state.append(consumer, k);
    }

    let slates = (0..m).map(|c| state.to_slate(c, k)).collect();
    let mut set = SlateSet::new(k, order, slates);
    set.allocation = Some(AllocationReport {
        anchor,
        allocated_exposure: state.allocated.clone(),
        fallback_count: state.fallback_count,
        quotas: state.quotas,
    });
    Ok(set)
}
