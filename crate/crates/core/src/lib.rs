//! Fair-exposure slate allocation.
//!
//! Builds `k`-item ranked lists for `m` consumers so that, summed over all
//! lists, each item (or item group) receives examination exposure at least in
//! proportion to its average relevance, while keeping each consumer's list as
//! relevant as possible at the top ranks. Quotas are met by allocating one
//! rank at a time across consumers, starting from an anchor slot chosen so
//! that re-sorting can only promote quota-carrying items.
//!
//! Also provided: Top-k, Random-k, PR-k and FairCo reference allocators, an
//! exhaustive oracle for tiny instances, NDCG and JSD-based fairness metrics,
//! and a sweep/benchmark harness.

pub mod baselines;
pub mod data;
pub mod error;
pub mod exposure;
pub mod harness;
pub mod metrics;
pub mod quota;
pub mod slate;
pub mod verfair;

pub use data::{
    identity_groups, load_groups, load_relevance, synth_relevance, GroupMap, RelevanceMatrix,
    ScoreDistribution,
};
pub use error::{Error, Result};
pub use exposure::{accumulate, total_exposure, ExposureLedger, ExposureModel};
pub use metrics::{evaluate, jsd_fairness, ndcg, EvalReport, FairnessLevel};
pub use quota::{compute_quotas, find_anchor, AnchorPoint, QuotaTable};
pub use slate::{Phase, Placement, Slate, SlateSet};
pub use verfair::{allocate, allocate_individual, allocate_with_order, ConsumerOrder};
