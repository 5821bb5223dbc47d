//! Single runs, tradeoff sweeps, timing benchmarks and distribution dumps.

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rayon::prelude::*;

use crate::baselines::{fairco, pr_k, random_k, top_k};
use crate::data::{identity_groups, GroupMap, RelevanceMatrix};
use crate::error::{Error, Result};
use crate::exposure::{accumulate, ExposureModel};
use crate::metrics::{evaluate, EvalReport, FairnessLevel};
use crate::quota::item_quotas;
use crate::slate::{RunHeader, SlateSet};
use crate::verfair::{allocate_with_order, ConsumerOrder};

/// Largest FairCo gain used in sweeps.
pub const MAX_LAMBDA: f64 = 1000.0;

/// NDCG cutoffs reported in metrics rows.
pub const REPORT_CUTOFFS: [usize; 3] = [1, 3, 10];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    TopK,
    RandomK,
    PrK,
    PrKGroup,
    FairCoInd,
    FairCoGroup,
    VerFairInd,
    VerFairGroup,
}

/// Which tradeoff parameter a method takes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKind {
    Alpha,
    Lambda,
}

impl Method {
    pub const ALL: [Method; 8] = [
        Method::TopK,
        Method::RandomK,
        Method::PrK,
        Method::PrKGroup,
        Method::FairCoInd,
        Method::FairCoGroup,
        Method::VerFairInd,
        Method::VerFairGroup,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::TopK => "top-k",
            Method::RandomK => "random-k",
            Method::PrK => "pr-k",
            Method::PrKGroup => "pr-k-group",
            Method::FairCoInd => "fairco-ind",
            Method::FairCoGroup => "fairco-group",
            Method::VerFairInd => "verfair-ind",
            Method::VerFairGroup => "verfair-group",
        }
    }

    pub fn param_kind(self) -> Option<ParamKind> {
        match self {
            Method::VerFairInd | Method::VerFairGroup => Some(ParamKind::Alpha),
            Method::FairCoInd | Method::FairCoGroup => Some(ParamKind::Lambda),
            _ => None,
        }
    }

    fn check_param(self, value: f64) -> Result<()> {
        match self.param_kind() {
            Some(ParamKind::Alpha) if !(0.0..=1.0).contains(&value) => {
                Err(Error::InvalidAlpha(value))
            }
            Some(ParamKind::Lambda) if !value.is_finite() || value < 0.0 => {
                Err(Error::InvalidLambda(value))
            }
            _ => Ok(()),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "fairco" {
            return Ok(Method::FairCoInd);
        }
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::UnknownMethod(s.to_owned()))
    }
}

/// A method with its tradeoff parameter, if it has one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MethodSpec {
    pub method: Method,
    pub param: Option<f64>,
}

impl MethodSpec {
    /// Resolves `--alpha` / `--lambda` style flags. VerFair defaults to
    /// alpha = 1 and FairCo to lambda = 0; passing the other method family's
    /// parameter is an error.
    pub fn from_flags(method: Method, alpha: Option<f64>, lambda: Option<f64>) -> Result<Self> {
        let incompatible =
            |flag: &str| Error::Config(format!("`{flag}` does not apply to method {method}"));
        let param = match method.param_kind() {
            Some(ParamKind::Alpha) => {
                if lambda.is_some() {
                    return Err(incompatible("lambda"));
                }
                Some(alpha.unwrap_or(1.0))
            }
            Some(ParamKind::Lambda) => {
                if alpha.is_some() {
                    return Err(incompatible("alpha"));
                }
                Some(lambda.unwrap_or(0.0))
            }
            None => {
                if alpha.is_some() {
                    return Err(incompatible("alpha"));
                }
                if lambda.is_some() {
                    return Err(incompatible("lambda"));
                }
                None
            }
        };
        if let Some(v) = param {
            method.check_param(v)?;
        }
        Ok(Self { method, param })
    }
}

/// Consumer processing order for the sequential allocators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OrderPolicy {
    /// Seeded shuffle for VerFair, dataset order for PR-k and FairCo.
    #[default]
    Default,
    Dataset,
    Shuffled,
}

impl OrderPolicy {
    pub const ALL: [OrderPolicy; 3] = [
        OrderPolicy::Default,
        OrderPolicy::Dataset,
        OrderPolicy::Shuffled,
    ];

    pub fn name(self) -> &'static str {
        match self {
            OrderPolicy::Default => "default",
            OrderPolicy::Dataset => "dataset",
            OrderPolicy::Shuffled => "shuffled",
        }
    }

    fn resolve(self, method: Method, seed: u64) -> ConsumerOrder {
        let shuffled = match self {
            OrderPolicy::Default => matches!(method, Method::VerFairInd | Method::VerFairGroup),
            OrderPolicy::Dataset => false,
            OrderPolicy::Shuffled => true,
        };
        if shuffled {
            ConsumerOrder::Shuffled(seed)
        } else {
            ConsumerOrder::Dataset
        }
    }
}

impl fmt::Display for OrderPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for OrderPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|o| o.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown consumer order `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub spec: MethodSpec,
    pub eta: f64,
    pub k: usize,
    pub cutoffs: Vec<usize>,
    pub seed: u64,
    pub order: OrderPolicy,
}

impl RunConfig {
    pub fn new(spec: MethodSpec, eta: f64, k: usize, seed: u64) -> Self {
        Self {
            spec,
            eta,
            k,
            cutoffs: REPORT_CUTOFFS.iter().copied().filter(|&c| c <= k).collect(),
            seed,
            order: OrderPolicy::Default,
        }
    }

    pub fn header(&self) -> RunHeader {
        let (alpha, lambda) = match self.spec.method.param_kind() {
            Some(ParamKind::Alpha) => (self.spec.param, None),
            Some(ParamKind::Lambda) => (None, self.spec.param),
            None => (None, None),
        };
        RunHeader {
            method: self.spec.method.name().to_owned(),
            alpha,
            lambda,
            eta: self.eta,
            k: self.k,
            seed: Some(self.seed),
            order: Some(self.order.name().to_owned()),
        }
    }
}

/// Produces slates for one method, timing only the allocation itself.
pub fn generate(
    spec: MethodSpec,
    rel: &RelevanceMatrix,
    groups: &GroupMap,
    model: &ExposureModel,
    seed: u64,
    order: OrderPolicy,
) -> Result<(SlateSet, Duration)> {
    let order = order.resolve(spec.method, seed);
    let param = |default: f64| spec.param.unwrap_or(default);
    let start = Instant::now();
    let slates = match spec.method {
        Method::TopK => top_k(rel, model)?,
        Method::RandomK => random_k(rel, model.k(), seed)?,
        Method::PrK => pr_k(rel, &identity_groups(rel), model, &order)?,
        Method::PrKGroup => pr_k(rel, groups, model, &order)?,
        Method::FairCoInd => fairco(
            rel,
            groups,
            model,
            param(0.0),
            FairnessLevel::Individual,
            &order,
        )?,
        Method::FairCoGroup => {
            fairco(rel, groups, model, param(0.0), FairnessLevel::Group, &order)?
        }
        Method::VerFairInd => {
            allocate_with_order(rel, &identity_groups(rel), model, param(1.0), &order)?
        }
        Method::VerFairGroup => allocate_with_order(rel, groups, model, param(1.0), &order)?,
    };
    Ok((slates, start.elapsed()))
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub header: RunHeader,
    pub slates: SlateSet,
    pub report: EvalReport,
    pub elapsed: Duration,
}

impl RunOutput {
    pub fn record(&self, config: &RunConfig, n_consumers: usize) -> TradeoffRecord {
        TradeoffRecord {
            method: config.spec.method,
            param: config.spec.param,
            eta: config.eta,
            k: config.k,
            ndcg_at_1: self.report.ndcg_at.get(&1).copied(),
            ndcg_at_3: self.report.ndcg_at.get(&3).copied(),
            ndcg_at_10: self.report.ndcg_at.get(&10).copied(),
            fairness_individual: self.report.fairness_individual,
            fairness_group: self.report.fairness_group,
            wall_ms_per_1k: per_thousand_ms(self.elapsed, n_consumers),
        }
    }
}

fn per_thousand_ms(elapsed: Duration, slates: usize) -> f64 {
    // Clamp so a sub-resolution timing still reports positive time.
    (elapsed.as_secs_f64() * 1e3 * 1000.0 / slates.max(1) as f64).max(1e-9)
}

/// Generates slates, checks their structural invariants, and evaluates them.
pub fn run(config: &RunConfig, rel: &RelevanceMatrix, groups: &GroupMap) -> Result<RunOutput> {
    let model = ExposureModel::pbm(config.eta, config.k)?;
    let (slates, elapsed) = generate(config.spec, rel, groups, &model, config.seed, config.order)?;

    slates
        .validate(rel)
        .map_err(|e| Error::Invariant(format!("allocator produced invalid slates: {e}")))?;
    let ledger = accumulate(&slates, &model, groups)?;
    let expected = slates.len() as f64 * model.slate_exposure();
    let tol = 1e-9 * expected.max(1.0);
    if (ledger.item_total() - expected).abs() > tol || (ledger.group_total() - expected).abs() > tol
    {
        return Err(Error::Invariant(format!(
            "exposure not conserved: items {} groups {} expected {expected}",
            ledger.item_total(),
            ledger.group_total()
        )));
    }

    let report = evaluate(&slates, rel, groups, &model, &config.cutoffs)?;
    Ok(RunOutput {
        header: config.header(),
        slates,
        report,
        elapsed,
    })
}

/// One point of a tradeoff curve.
#[derive(Debug, Clone, PartialEq)]
pub struct TradeoffRecord {
    pub method: Method,
    pub param: Option<f64>,
    pub eta: f64,
    pub k: usize,
    pub ndcg_at_1: Option<f64>,
    pub ndcg_at_3: Option<f64>,
    pub ndcg_at_10: Option<f64>,
    pub fairness_individual: f64,
    pub fairness_group: f64,
    pub wall_ms_per_1k: f64,
}

pub const METRICS_HEADER: [&str; 10] = [
    "method",
    "param",
    "eta",
    "k",
    "ndcg@1",
    "ndcg@3",
    "ndcg@10",
    "fairness_ind",
    "fairness_group",
    "wall_ms_per_1k",
];

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes records under [`METRICS_HEADER`]; cutoffs beyond `k` and missing
/// parameters are left empty.
pub fn write_records<W: Write>(writer: W, records: &[TradeoffRecord]) -> Result<()> {
    let mut csv = csv::Writer::from_writer(writer);
    csv.write_record(METRICS_HEADER)?;
    for r in records {
        csv.write_record([
            r.method.name().to_owned(),
            opt(r.param),
            r.eta.to_string(),
            r.k.to_string(),
            opt(r.ndcg_at_1),
            opt(r.ndcg_at_3),
            opt(r.ndcg_at_10),
            r.fairness_individual.to_string(),
            r.fairness_group.to_string(),
            r.wall_ms_per_1k.to_string(),
        ])?;
    }
    csv.flush().map_err(|e| Error::io("<writer>", e))?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub method: Method,
    pub grid: Vec<f64>,
    pub eta: f64,
    pub k: usize,
    pub seed: u64,
    pub order: OrderPolicy,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.grid.is_empty() {
            return Err(Error::Config("sweep grid is empty".into()));
        }
        if self.method.param_kind().is_none() {
            return Err(Error::Config(format!(
                "method {} has no tradeoff parameter",
                self.method
            )));
        }
        for &v in &self.grid {
            self.method.check_param(v)?;
        }
        Ok(())
    }
}

/// Runs every grid point (in parallel) and returns records ordered by
/// parameter value.
pub fn sweep(
    config: &SweepConfig,
    rel: &RelevanceMatrix,
    groups: &GroupMap,
) -> Result<Vec<TradeoffRecord>> {
    config.validate()?;
    let mut records = config
        .grid
        .par_iter()
        .map(|&value| {
            let mut run_cfg = RunConfig::new(
                MethodSpec {
                    method: config.method,
                    param: Some(value),
                },
                config.eta,
                config.k,
                config.seed,
            );
            run_cfg.order = config.order;
            run(&run_cfg, rel, groups).map(|out| out.record(&run_cfg, rel.n_consumers()))
        })
        .collect::<Result<Vec<_>>>()?;
    records.sort_by(|a, b| a.param.unwrap_or(0.0).total_cmp(&b.param.unwrap_or(0.0)));
    Ok(records)
}

pub const MIN_BENCH_REPEAT: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub methods: Vec<MethodSpec>,
    pub eta: f64,
    pub k: usize,
    pub seed: u64,
    pub repeat: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchResult {
    pub spec: MethodSpec,
    /// Median over warm runs of allocation wall time per 1000 slates.
    pub median_ms_per_1k: f64,
    pub runs_ms_per_1k: Vec<f64>,
}

/// Times allocation only (no loading or evaluation). Each method gets one
/// untimed warm-up run followed by `repeat` timed runs.
pub fn bench(
    config: &BenchConfig,
    rel: &RelevanceMatrix,
    groups: &GroupMap,
) -> Result<Vec<BenchResult>> {
    if config.repeat < MIN_BENCH_REPEAT {
        return Err(Error::Config(format!(
            "repeat must be at least {MIN_BENCH_REPEAT}, got {}",
            config.repeat
        )));
    }
    let model = ExposureModel::pbm(config.eta, config.k)?;
    config
        .methods
        .iter()
        .map(|&spec| {
            generate(spec, rel, groups, &model, config.seed, OrderPolicy::Default)?;
            let mut runs = (0..config.repeat)
                .map(|_| {
                    generate(spec, rel, groups, &model, config.seed, OrderPolicy::Default)
                        .map(|(_, t)| per_thousand_ms(t, rel.n_consumers()))
                })
                .collect::<Result<Vec<_>>>()?;
            let mut sorted = runs.clone();
            sorted.sort_by(f64::total_cmp);
            let mid = sorted.len() / 2;
            let median = if sorted.len() % 2 == 1 {
                sorted[mid]
            } else {
                0.5 * (sorted[mid - 1] + sorted[mid])
            };
            runs.shrink_to_fit();
            Ok(BenchResult {
                spec,
                median_ms_per_1k: median,
                runs_ms_per_1k: runs,
            })
        })
        .collect()
}

pub fn write_bench<W: Write>(writer: W, results: &[BenchResult]) -> Result<()> {
    let mut csv = csv::Writer::from_writer(writer);
    csv.write_record(["method", "param", "median_ms_per_1k", "runs"])?;
    for r in results {
        let runs: Vec<String> = r.runs_ms_per_1k.iter().map(|v| v.to_string()).collect();
        csv.write_record([
            r.spec.method.name().to_owned(),
            opt(r.spec.param),
            r.median_ms_per_1k.to_string(),
            runs.join(" "),
        ])?;
    }
    csv.flush().map_err(|e| Error::io("<writer>", e))?;
    Ok(())
}

/// Per-item relevance, received exposure and quota.
#[derive(Debug, Clone, PartialEq)]
pub struct DistributionRow {
    pub item_id: String,
    pub avg_relevance: f64,
    pub exposure: f64,
    pub quota_at_alpha: f64,
}

/// One row per item; empty when `slates` is empty.
pub fn dump_distributions(
    slates: &SlateSet,
    rel: &RelevanceMatrix,
    groups: &GroupMap,
    model: &ExposureModel,
    alpha: f64,
) -> Result<Vec<DistributionRow>> {
    if slates.is_empty() {
        return Ok(Vec::new());
    }
    let ledger = accumulate(slates, model, groups)?;
    let quotas = item_quotas(rel, model, alpha)?;
    let avg = rel.average_relevance();
    Ok(rel
        .item_ids()
        .iter()
        .enumerate()
        .map(|(d, id)| DistributionRow {
            item_id: id.clone(),
            avg_relevance: avg[d],
            exposure: ledger.per_item[d],
            quota_at_alpha: quotas[d],
        })
        .collect())
}

pub fn write_distributions<W: Write>(writer: W, rows: &[DistributionRow]) -> Result<()> {
    let mut csv = csv::Writer::from_writer(writer);
    csv.write_record(["item_id", "avg_relevance", "exposure", "quota_at_alpha"])?;
    for r in rows {
        csv.write_record([
            r.item_id.clone(),
            r.avg_relevance.to_string(),
            r.exposure.to_string(),
            r.quota_at_alpha.to_string(),
        ])?;
    }
    csv.flush().map_err(|e| Error::io("<writer>", e))?;
    Ok(())
}
