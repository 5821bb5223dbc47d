//! Independent reference computations shared by the integration tests. Nothing
//! here calls into the code paths it is used to check.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use verfair::{RelevanceMatrix, SlateSet};

pub const VERTICAL_EXAMPLE: &str =
    "consumer_id,A,B,C\n1,0.90,0.70,0.60\n2,0.55,0.70,0.90\n3,0.65,0.70,0.60\n";
pub const ANCHOR_EXAMPLE: &str =
    "consumer_id,A,B,C\n1,0.90,0.80,0.70\n2,0.90,0.60,0.80\n3,0.60,1.00,0.90\n";

pub fn matrix(csv: &str) -> RelevanceMatrix {
    RelevanceMatrix::from_reader(csv.as_bytes()).unwrap()
}

pub fn pbm(eta: f64, k: usize) -> Vec<f64> {
    (1..=k)
        .map(|j| (1.0 / ((1 + j) as f64).log2()).powf(eta))
        .collect()
}

pub fn slate_ids(rel: &RelevanceMatrix, set: &SlateSet) -> Vec<Vec<String>> {
    set.slates
        .iter()
        .map(|s| s.items().map(|d| rel.item_ids()[d].clone()).collect())
        .collect()
}

pub fn lists(set: &[&[usize]]) -> SlateSet {
    SlateSet::from_item_lists(
        set[0].len(),
        (0..set.len()).collect(),
        set.iter().map(|s| s.to_vec()).collect(),
    )
}

/// All ordered `k`-subsets of `0..n`.
pub fn k_permutations(n: usize, k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for prefix in k_permutations(n, k - 1) {
        for d in 0..n {
            if !prefix.contains(&d) {
                let mut p = prefix.clone();
                p.push(d);
                out.push(p);
            }
        }
    }
    out
}

fn dcg_of(rel: &RelevanceMatrix, probs: &[f64], c: usize, items: &[usize]) -> f64 {
    items
        .iter()
        .zip(probs)
        .map(|(&d, p)| rel.score(c, d) * p)
        .sum()
}

/// One consumer's NDCG@cutoff with the ideal found by enumerating every
/// ordered list of `cutoff` items.
pub fn brute_ndcg_one(
    rel: &RelevanceMatrix,
    probs: &[f64],
    c: usize,
    slate: &[usize],
    cutoff: usize,
) -> f64 {
    let ideal = k_permutations(rel.n_items(), cutoff)
        .iter()
        .map(|perm| dcg_of(rel, probs, c, perm))
        .fold(f64::NEG_INFINITY, f64::max);
    let dcg = dcg_of(rel, probs, c, &slate[..cutoff]);
    if ideal > 0.0 {
        dcg / ideal
    } else {
        1.0
    }
}

/// Macro-averaged NDCG@cutoff over `slates`, consumer `c` owning `slates[c]`.
pub fn brute_ndcg(
    rel: &RelevanceMatrix,
    probs: &[f64],
    slates: &[Vec<usize>],
    cutoff: usize,
) -> f64 {
    let total: f64 = slates
        .iter()
        .enumerate()
        .map(|(c, s)| brute_ndcg_one(rel, probs, c, s, cutoff))
        .sum();
    total / slates.len() as f64
}

/// `H(M) - (H(P) + H(Q)) / 2` in bits, an algebraically separate route to the
/// Jensen-Shannon divergence.
pub fn jsd_entropy_form(p: &[f64], q: &[f64]) -> f64 {
    let norm = |v: &[f64]| {
        let s: f64 = v.iter().sum();
        v.iter().map(|x| x / s).collect::<Vec<_>>()
    };
    let (p, q) = (norm(p), norm(q));
    let h = |v: &[f64]| {
        -v.iter()
            .filter(|&&x| x > 0.0)
            .map(|x| x * x.log2())
            .sum::<f64>()
    };
    let mid: Vec<f64> = p.iter().zip(&q).map(|(a, b)| 0.5 * (a + b)).collect();
    h(&mid) - 0.5 * (h(&p) + h(&q))
}

/// Random non-negative vector with some exact zeros.
pub fn random_distribution(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..len)
        .map(|_| {
            if rng.random_bool(0.15) {
                0.0
            } else {
                rng.random::<f64>()
            }
        })
        .collect();
    if v.iter().all(|&x| x == 0.0) {
        v[0] = 1.0;
    }
    v
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random matrix with ids that sort in index order. Scores are multiples of
/// 1/64, so short sums of them are exact in f64 regardless of order.
pub fn random_matrix(rng: &mut ChaCha8Rng, m: usize, n: usize) -> RelevanceMatrix {
    let consumers = (0..m).map(|c| format!("u{c:03}")).collect();
    let items = (0..n).map(|d| format!("i{d:03}")).collect();
    let scores = (0..m * n)
        .map(|_| rng.random_range(0..=64) as f64 / 64.0)
        .collect();
    RelevanceMatrix::from_flat(consumers, items, scores).unwrap()
}

/// Quota-constrained greedy that fills one consumer's full slate before moving
/// to the next (horizontal order), then re-sorts. Individual quotas with
/// `alpha = 1`, eta = 0 exposure (every slot worth 1). Reference for the
/// vertical-vs-horizontal comparison.
pub fn horizontal_greedy_eta0(rel: &RelevanceMatrix, k: usize) -> Vec<Vec<usize>> {
    let (m, n) = (rel.n_consumers(), rel.n_items());
    let avg: Vec<f64> = (0..n)
        .map(|d| (0..m).map(|c| rel.score(c, d)).sum::<f64>() / m as f64)
        .collect();
    let total: f64 = avg.iter().sum();
    let e_total = (m * k) as f64;
    let mut remaining: Vec<f64> = avg.iter().map(|r| r * e_total / total).collect();
    let better = |c: usize, a: usize, b: usize| {
        rel.score(c, a) > rel.score(c, b) || (rel.score(c, a) == rel.score(c, b) && a < b)
    };
    let mut out = Vec::new();
    for c in 0..m {
        let mut slate: Vec<usize> = Vec::new();
        for _ in 0..k {
            let pick = |eligible: &dyn Fn(usize) -> bool| {
                (0..n).filter(|d| !slate.contains(d) && eligible(*d)).fold(
                    None,
                    |best: Option<usize>, d| match best {
                        Some(b) if !better(c, d, b) => Some(b),
                        _ => Some(d),
                    },
                )
            };
            let d = pick(&|d| remaining[d] >= 1.0 - 1e-9)
                .or_else(|| pick(&|_| true))
                .unwrap();
            remaining[d] -= 1.0;
            slate.push(d);
        }
        slate.sort_by(|&a, &b| {
            if better(c, a, b) {
                std::cmp::Ordering::Less
            } else {
                std::cmp::Ordering::Greater
            }
        });
        out.push(slate);
    }
    out
}

/// Straight-line restatement of the vertical allocator for cross-checking:
/// quotas, backward anchor walk, quota-eligible argmax per slot with fallback,
/// greedy completion, then a per-consumer relevance sort. `order` lists
/// consumer indices in processing order. Item ids must sort in index order.
pub fn reference_vertical(
    rel: &RelevanceMatrix,
    item_group: &[usize],
    probs: &[f64],
    alpha: f64,
    order: &[usize],
) -> Vec<Vec<usize>> {
    let (m, n, k) = (rel.n_consumers(), rel.n_items(), probs.len());
    let n_groups = item_group.iter().max().map_or(0, |g| g + 1);
    let e_total = m as f64 * probs.iter().sum::<f64>();
    let tol = 1e-12 * e_total;
    let mut group_rel = vec![0.0; n_groups];
    for d in 0..n {
        group_rel[item_group[d]] += (0..m).map(|c| rel.score(c, d)).sum::<f64>() / m as f64;
    }
    let rel_sum: f64 = group_rel.iter().sum();
    let quota: Vec<f64> = group_rel
        .iter()
        .map(|r| r * alpha * e_total / rel_sum)
        .collect();

    let mut board = vec![vec![None::<usize>; k]; m];
    if alpha > 0.0 {
        let mut acc = 0.0;
        let mut anchor = (0, 0);
        'walk: for r in (0..k).rev() {
            for pos in (0..m).rev() {
                acc += probs[r];
                if acc >= alpha * e_total - tol {
                    anchor = (pos, r);
                    break 'walk;
                }
            }
        }
        let mut slots: Vec<(usize, usize)> = (anchor.0..m).map(|pos| (pos, anchor.1)).collect();
        for r in anchor.1 + 1..k {
            slots.extend((0..m).map(|pos| (pos, r)));
        }
        let mut allocated = vec![0.0; n_groups];
        for (pos, r) in slots {
            let c = order[pos];
            let free: Vec<usize> = (0..n).filter(|d| !board[pos].contains(&Some(*d))).collect();
            let eligible: Vec<usize> = free
                .iter()
                .copied()
                .filter(|&d| quota[item_group[d]] - allocated[item_group[d]] >= probs[r] - tol)
                .collect();
            let pool = if eligible.is_empty() {
                &free
            } else {
                &eligible
            };
            let best = *pool
                .iter()
                .reduce(|a, b| {
                    if rel.score(c, *b) > rel.score(c, *a) {
                        b
                    } else {
                        a
                    }
                })
                .unwrap();
            board[pos][r] = Some(best);
            allocated[item_group[best]] += probs[r];
        }
    }
    let mut out = vec![Vec::new(); m];
    for (pos, row) in board.into_iter().enumerate() {
        let c = order[pos];
        let mut items: Vec<usize> = row.iter().flatten().copied().collect();
        let mut rest: Vec<usize> = (0..n).filter(|d| !items.contains(d)).collect();
        rest.sort_by(|&a, &b| rel.score(c, b).total_cmp(&rel.score(c, a)).then(a.cmp(&b)));
        items.extend(rest.into_iter().take(k - items.len()));
        items.sort_by(|&a, &b| rel.score(c, b).total_cmp(&rel.score(c, a)).then(a.cmp(&b)));
        out[c] = items;
    }
    out
}
