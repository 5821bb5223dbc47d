//! Reference allocators and an exhaustive oracle for tiny instances.

use std::cmp::Ordering;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::{identity_groups, GroupMap, RelevanceMatrix};
use crate::error::{Error, Result};
use crate::exposure::{accumulate, ExposureLedger, ExposureModel};
use crate::metrics::FairnessLevel;
use crate::quota::{compute_quotas, QuotaTable};
use crate::slate::SlateSet;
use crate::verfair::{check_slate_length, ConsumerOrder};

/// The `k` smallest items of `pool` under `cmp`, sorted.
fn top_by<F>(mut pool: Vec<usize>, k: usize, mut cmp: F) -> Vec<usize>
where
    F: FnMut(&usize, &usize) -> Ordering,
{
    if k < pool.len() {
        pool.select_nth_unstable_by(k - 1, &mut cmp);
        pool.truncate(k);
    }
    pool.sort_by(cmp);
    pool
}

/// Each consumer's `k` most relevant items, descending, ties by item id.
pub fn top_k(rel: &RelevanceMatrix, model: &ExposureModel) -> Result<SlateSet> {
    let k = model.k();
    check_slate_length(rel, k)?;
    let m = rel.n_consumers();
    let lists = (0..m)
        .map(|c| {
            top_by((0..rel.n_items()).collect(), k, |&a, &b| {
                rel.cmp_preference(c, a, b)
            })
        })
        .collect();
    Ok(SlateSet::from_item_lists(k, (0..m).collect(), lists))
}

/// `k` items sampled uniformly without replacement per consumer, in random order.
pub fn random_k(rel: &RelevanceMatrix, k: usize, seed: u64) -> Result<SlateSet> {
    check_slate_length(rel, k)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = rel.n_consumers();
    let lists = (0..m)
        .map(|_| rand::seq::index::sample(&mut rng, rel.n_items(), k).into_vec())
        .collect();
    Ok(SlateSet::from_item_lists(k, (0..m).collect(), lists))
}

/// Gives every consumer the `k` items whose groups are furthest below their
/// full-exposure quota `Quota(G | 1)`, largest deficit at rank 1, updating the
/// ledger after each slate. Ties go to the smaller item id.
pub fn pr_k(
    rel: &RelevanceMatrix,
    groups: &GroupMap,
    model: &ExposureModel,
    order: &ConsumerOrder,
) -> Result<SlateSet> {
    let k = model.k();
    check_slate_length(rel, k)?;
    let quotas = compute_quotas(rel, groups, model, 1.0)?;
    let order = order.resolve(rel.n_consumers())?;
    let mut exposure = vec![0.0; groups.n_groups()];
    let mut lists = vec![Vec::new(); rel.n_consumers()];
    // Deficits are compared on a grid so that quotas equal up to rounding tie.
    let unit = 1e-9 * quotas.e_total;

    for &c in &order {
        let deficit: Vec<i64> = quotas
            .per_group
            .iter()
            .zip(&exposure)
            .map(|(q, e)| ((q - e) / unit).round() as i64)
            .collect();
        let slate = top_by((0..rel.n_items()).collect(), k, |&a, &b| {
            deficit[groups.group_of(b)]
                .cmp(&deficit[groups.group_of(a)])
                .then_with(|| rel.cmp_items_by_id(a, b))
        });
        for (&d, &p) in slate.iter().zip(model.probs()) {
            exposure[groups.group_of(d)] += p;
        }
        lists[c] = slate;
    }
    Ok(SlateSet::from_item_lists(k, order, lists))
}

/// Running state of the proportional controller.
#[derive(Debug, Clone, PartialEq)]
pub struct ControllerState {
    pub lambda: f64,
    /// Exposure received so far per group.
    pub exposure: Vec<f64>,
    /// Personal relevance accumulated so far per group, current consumer included.
    pub relevance: Vec<f64>,
}

impl ControllerState {
    pub fn new(lambda: f64, n_groups: usize) -> Result<Self> {
        if !lambda.is_finite() || lambda < 0.0 {
            return Err(Error::InvalidLambda(lambda));
        }
        Ok(Self {
            lambda,
            exposure: vec![0.0; n_groups],
            relevance: vec![0.0; n_groups],
        })
    }

    /// Per-group error `max(0, max_G' E(G')/R(G') - E(G)/R(G))`; groups with
    /// no accumulated relevance get 0 and do not set the maximum.
    pub fn errors(&self) -> Vec<f64> {
        let ratios: Vec<Option<f64>> = self
            .exposure
            .iter()
            .zip(&self.relevance)
            .map(|(&e, &r)| (r > 0.0).then(|| e / r))
            .collect();
        let max = ratios
            .iter()
            .flatten()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        ratios
            .iter()
            .map(|r| r.map_or(0.0, |r| (max - r).max(0.0)))
            .collect()
    }
}

/// Horizontal allocator that boosts under-exposed items with a proportional
/// controller: score `R(d, u) + lambda * err(G(d))`, top-`k` by score, ties
/// by item id.
pub fn fairco(
    rel: &RelevanceMatrix,
    groups: &GroupMap,
    model: &ExposureModel,
    lambda: f64,
    level: FairnessLevel,
    order: &ConsumerOrder,
) -> Result<SlateSet> {
    let k = model.k();
    check_slate_length(rel, k)?;
    let identity;
    let groups = match level {
        FairnessLevel::Individual => {
            identity = identity_groups(rel);
            &identity
        }
        FairnessLevel::Group => groups,
    };
    let order = order.resolve(rel.n_consumers())?;
    let mut state = ControllerState::new(lambda, groups.n_groups())?;
    let mut lists = vec![Vec::new(); rel.n_consumers()];

    for &c in &order {
        for (d, &r) in rel.row(c).iter().enumerate() {
            state.relevance[groups.group_of(d)] += r;
        }
        let err = state.errors();
        let score: Vec<f64> = rel
            .row(c)
            .iter()
            .enumerate()
            .map(|(d, &r)| r + lambda * err[groups.group_of(d)])
            .collect();
        let slate = top_by((0..rel.n_items()).collect(), k, |&a, &b| {
            score[b]
                .total_cmp(&score[a])
                .then_with(|| rel.cmp_items_by_id(a, b))
        });
        for (&d, &p) in slate.iter().zip(model.probs()) {
            state.exposure[groups.group_of(d)] += p;
        }
        lists[c] = slate;
    }
    Ok(SlateSet::from_item_lists(k, order, lists))
}

/// True when every group's exposure is within `p_k` of its quota.
pub fn quota_feasible(ledger: &ExposureLedger, quotas: &QuotaTable, model: &ExposureModel) -> bool {
    let tol = 1e-9 * quotas.e_total.max(1.0);
    ledger
        .per_group
        .iter()
        .zip(&quotas.per_group)
        .all(|(&e, &q)| e >= q - model.last_prob() - tol)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleOutcome {
    /// Best mean NDCG@k over feasible assignments; 0 when none is feasible.
    pub best_ndcg: f64,
    pub feasible: bool,
}

pub const ORACLE_MAX_CONSUMERS: usize = 4;
pub const ORACLE_MAX_ITEMS: usize = 6;
pub const ORACLE_MAX_K: usize = 3;

struct Candidate {
    ndcg: f64,
    group_exposure: Vec<f64>,
}

fn permutations(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn extend(n: usize, k: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if prefix.len() == k {
            out.push(prefix.clone());
            return;
        }
        for d in 0..n {
            if !prefix.contains(&d) {
                prefix.push(d);
                extend(n, k, prefix, out);
                prefix.pop();
            }
        }
    }
    let mut out = Vec::new();
    extend(n, k, &mut Vec::with_capacity(k), &mut out);
    out
}

/// Exhaustively searches every assignment of ordered `k`-slates to consumers
/// for the best mean NDCG@k among those passing [`quota_feasible`].
pub fn oracle_exact(
    rel: &RelevanceMatrix,
    groups: &GroupMap,
    model: &ExposureModel,
    alpha: f64,
) -> Result<OracleOutcome> {
    let (m, n, k) = (rel.n_consumers(), rel.n_items(), model.k());
    if m > ORACLE_MAX_CONSUMERS || n > ORACLE_MAX_ITEMS || k > ORACLE_MAX_K {
        return Err(Error::InstanceTooLarge { m, n, k });
    }
    check_slate_length(rel, k)?;
    let quotas = compute_quotas(rel, groups, model, alpha)?;
    let perms = permutations(n, k);

    // Candidates per consumer, best NDCG first so the bound prunes early.
    let candidates: Vec<Vec<Candidate>> = (0..m)
        .map(|c| {
            let ideal: f64 = {
                let mut row = rel.row(c).to_vec();
                row.sort_by(|a, b| b.total_cmp(a));
                row.iter().zip(model.probs()).map(|(r, p)| r * p).sum()
            };
            let mut cands: Vec<Candidate> = perms
                .iter()
                .map(|perm| {
                    let dcg: f64 = perm
                        .iter()
                        .zip(model.probs())
                        .map(|(&d, p)| rel.score(c, d) * p)
                        .sum();
                    let mut group_exposure = vec![0.0; groups.n_groups()];
                    for (&d, &p) in perm.iter().zip(model.probs()) {
                        group_exposure[groups.group_of(d)] += p;
                    }
                    Candidate {
                        ndcg: if ideal > 0.0 { dcg / ideal } else { 1.0 },
                        group_exposure,
                    }
                })
                .collect();
            cands.sort_by(|a, b| b.ndcg.total_cmp(&a.ndcg));
            cands
        })
        .collect();

    // Most exposure one consumer can give each group.
    let max_gain: Vec<f64> = (0..groups.n_groups())
        .map(|g| {
            let size = groups.members(g).count().min(k);
            model.probs()[..size].iter().sum()
        })
        .collect();

    struct Search<'a> {
        candidates: &'a [Vec<Candidate>],
        quotas: &'a QuotaTable,
        max_gain: &'a [f64],
        slack: f64,
        best: Option<f64>,
    }

    impl Search<'_> {
        fn run(&mut self, c: usize, exposure: &mut Vec<f64>, ndcg_sum: f64) {
            let m = self.candidates.len();
            if c == m {
                let ok = exposure
                    .iter()
                    .zip(&self.quotas.per_group)
                    .all(|(&e, &q)| e >= q - self.slack);
                if ok && self.best.is_none_or(|b| ndcg_sum > b) {
                    self.best = Some(ndcg_sum);
                }
                return;
            }
            let remaining = (m - c) as f64;
            let reachable = exposure
                .iter()
                .zip(&self.quotas.per_group)
                .zip(self.max_gain)
                .all(|((&e, &q), &g)| e + g * remaining >= q - self.slack);
            if !reachable {
                return;
            }
            for cand in &self.candidates[c] {
                if let Some(b) = self.best {
                    if ndcg_sum + cand.ndcg + (remaining - 1.0) <= b {
                        // Later candidates are no better.
                        break;
                    }
                }
                for (e, g) in exposure.iter_mut().zip(&cand.group_exposure) {
                    *e += g;
                }
                self.run(c + 1, exposure, ndcg_sum + cand.ndcg);
                for (e, g) in exposure.iter_mut().zip(&cand.group_exposure) {
                    *e -= g;
                }
            }
        }
    }

    let mut search = Search {
        candidates: &candidates,
        quotas: &quotas,
        max_gain: &max_gain,
        slack: model.last_prob() + 1e-9 * quotas.e_total.max(1.0),
        best: None,
    };
    search.run(0, &mut vec![0.0; groups.n_groups()], 0.0);

    Ok(match search.best {
        Some(sum) => OracleOutcome {
            best_ndcg: sum / m as f64,
            feasible: true,
        },
        None => OracleOutcome {
            best_ndcg: 0.0,
            feasible: false,
        },
    })
}

/// Checks `slates` against the oracle's feasibility criterion at `alpha`.
pub fn slates_quota_feasible(
    slates: &SlateSet,
    rel: &RelevanceMatrix,
    groups: &GroupMap,
    model: &ExposureModel,
    alpha: f64,
) -> Result<bool> {
    let quotas = compute_quotas(rel, groups, model, alpha)?;
    let ledger = accumulate(slates, model, groups)?;
    Ok(quota_feasible(&ledger, &quotas, model))
}
