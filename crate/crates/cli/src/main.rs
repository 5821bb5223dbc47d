use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use verfair::data::synth_groups;
use verfair::harness::{
    bench, dump_distributions, run, sweep, write_bench, write_distributions, write_records,
    BenchConfig, Method, MethodSpec, OrderPolicy, RunConfig, SweepConfig,
};
use verfair::slate::{read_slates, write_slates};
use verfair::{
    identity_groups, load_groups, load_relevance, synth_relevance, ExposureModel, GroupMap,
    RelevanceMatrix, ScoreDistribution,
};

const EXIT_INVALID_INPUT: u8 = 2;
const EXIT_INVARIANT: u8 = 3;

#[derive(Parser)]
#[command(
    name = "verfair",
    version,
    about = "Fair-exposure slate allocation: runs, sweeps, benchmarks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Allocate slates with one method and evaluate them.
    Run(RunArgs),
    /// Evaluate one method over a grid of its tradeoff parameter.
    Sweep(SweepArgs),
    /// Time slate generation for several methods.
    Bench(BenchArgs),
    /// Write a synthetic relevance matrix (and optionally a group map).
    Gen(GenArgs),
    /// Per-item relevance, exposure and quota for an existing slate dump.
    Dump(DumpArgs),
}

#[derive(Args)]
struct InputArgs {
    /// Relevance matrix CSV.
    #[arg(long)]
    relevance: PathBuf,
    /// Item-to-group CSV; every item is its own group when omitted.
    #[arg(long)]
    groups: Option<PathBuf>,
}

impl InputArgs {
    fn load(&self) -> Result<(RelevanceMatrix, GroupMap)> {
        let rel = load_relevance(&self.relevance)?;
        let groups = match &self.groups {
            Some(path) => load_groups(path, &rel)?,
            None => identity_groups(&rel),
        };
        Ok((rel, groups))
    }
}

#[derive(Args)]
struct ModelArgs {
    /// Position-bias severity.
    #[arg(long, default_value_t = 1.0)]
    eta: f64,
    /// Slate length.
    #[arg(long)]
    k: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Consumer order: default (shuffled for verfair, file order for
    /// baselines), dataset, or shuffled.
    #[arg(long, default_value = "default")]
    order: OrderPolicy,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    method: Method,
    /// Quota share for verfair methods (default 1).
    #[arg(long)]
    alpha: Option<f64>,
    /// Controller gain for fairco methods (default 0).
    #[arg(long)]
    lambda: Option<f64>,
    /// Slate dump destination.
    #[arg(long)]
    out: PathBuf,
    /// Metrics CSV destination; stdout when omitted.
    #[arg(long)]
    metrics: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    method: Method,
    /// Comma-separated parameter values.
    #[arg(long, value_delimiter = ',', required = true)]
    grid: Vec<f64>,
    /// Metrics CSV destination; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Comma-separated method names.
    #[arg(long, value_delimiter = ',', required = true)]
    methods: Vec<Method>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    eta: f64,
    #[arg(long)]
    k: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Timed runs per method, after one warm-up.
    #[arg(long, default_value_t = 5)]
    repeat: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    consumers: usize,
    #[arg(long)]
    items: usize,
    /// `uniform` or `beta:A,B`.
    #[arg(long, default_value = "uniform", value_parser = parse_distribution)]
    dist: ScoreDistribution,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Relevance CSV destination.
    #[arg(long)]
    out: PathBuf,
    /// Also assign items to this many groups.
    #[arg(long, requires = "groups_out")]
    n_groups: Option<usize>,
    /// Group CSV destination.
    #[arg(long, requires = "n_groups")]
    groups_out: Option<PathBuf>,
}

#[derive(Args)]
struct DumpArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Slate dump written by `run`.
    #[arg(long)]
    slates: PathBuf,
    /// Quota share for the quota column; defaults to the run's alpha, else 1.
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_distribution(s: &str) -> std::result::Result<ScoreDistribution, String> {
    if s == "uniform" {
        return Ok(ScoreDistribution::Uniform);
    }
    let params = s
        .strip_prefix("beta:")
        .ok_or_else(|| format!("expected `uniform` or `beta:A,B`, got `{s}`"))?;
    let (a, b) = params
        .split_once(',')
        .ok_or_else(|| format!("expected `beta:A,B`, got `{s}`"))?;
    let num = |v: &str| {
        v.trim()
            .parse::<f64>()
            .map_err(|e| format!("bad beta parameter `{v}`: {e}"))
    };
    Ok(ScoreDistribution::Beta {
        a: num(a)?,
        b: num(b)?,
    })
}

/// Writes to `path`, or stdout when `None`.
fn with_output<F>(path: Option<&Path>, write: F) -> Result<()>
where
    F: FnOnce(&mut dyn Write) -> Result<()>,
{
    match path {
        Some(path) => {
            let file =
                File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
            let mut out = BufWriter::new(file);
            write(&mut out)?;
            out.flush()
                .with_context(|| format!("cannot write {}", path.display()))?;
        }
        None => {
            let stdout = io::stdout();
            let mut out = stdout.lock();
            write(&mut out)?;
            out.flush()?;
        }
    }
    Ok(())
}

fn cmd_run(args: RunArgs) -> Result<()> {
    let (rel, groups) = args.input.load()?;
    let spec = MethodSpec::from_flags(args.method, args.alpha, args.lambda)?;
    let mut config = RunConfig::new(spec, args.model.eta, args.model.k, args.model.seed);
    config.order = args.model.order;
    let output = run(&config, &rel, &groups)?;
    with_output(Some(&args.out), |w| {
        Ok(write_slates(w, &output.header, &output.slates, &rel)?)
    })?;
    let record = output.record(&config, rel.n_consumers());
    with_output(args.metrics.as_deref(), |w| {
        Ok(write_records(w, &[record])?)
    })
}

fn cmd_sweep(args: SweepArgs) -> Result<()> {
    let (rel, groups) = args.input.load()?;
    let config = SweepConfig {
        method: args.method,
        grid: args.grid,
        eta: args.model.eta,
        k: args.model.k,
        seed: args.model.seed,
        order: args.model.order,
    };
    let records = sweep(&config, &rel, &groups)?;
    with_output(args.out.as_deref(), |w| Ok(write_records(w, &records)?))
}

fn cmd_bench(args: BenchArgs) -> Result<()> {
    let (rel, groups) = args.input.load()?;
    let methods = args
        .methods
        .iter()
        .map(|&method| {
            // Shared flags apply only to the methods that take them.
            let (alpha, lambda) = match method.param_kind() {
                Some(verfair::harness::ParamKind::Alpha) => (args.alpha, None),
                Some(verfair::harness::ParamKind::Lambda) => (None, args.lambda),
                None => (None, None),
            };
            MethodSpec::from_flags(method, alpha, lambda)
        })
        .collect::<verfair::Result<Vec<_>>>()?;
    let config = BenchConfig {
        methods,
        eta: args.eta,
        k: args.k,
        seed: args.seed,
        repeat: args.repeat,
    };
    let results = bench(&config, &rel, &groups)?;
    with_output(args.out.as_deref(), |w| Ok(write_bench(w, &results)?))
}

fn cmd_gen(args: GenArgs) -> Result<()> {
    let rel = synth_relevance(args.consumers, args.items, args.dist, args.seed)?;
    rel.save(&args.out)?;
    if let (Some(n_groups), Some(path)) = (args.n_groups, &args.groups_out) {
        synth_groups(&rel, n_groups, args.seed)?.save(path, &rel)?;
    }
    Ok(())
}

fn cmd_dump(args: DumpArgs) -> Result<()> {
    let (rel, groups) = args.input.load()?;
    let file = File::open(&args.slates)
        .with_context(|| format!("cannot open {}", args.slates.display()))?;
    let (header, slates) = read_slates(file, &rel)?;
    let alpha = args.alpha.or(header.alpha).unwrap_or(1.0);
    let model = ExposureModel::pbm(header.eta, header.k)?;
    let rows = dump_distributions(&slates, &rel, &groups, &model, alpha)?;
    with_output(args.out.as_deref(), |w| Ok(write_distributions(w, &rows)?))
}

fn exit_code(err: &anyhow::Error) -> u8 {
    let invariant = err
        .chain()
        .filter_map(|e| e.downcast_ref::<verfair::Error>())
        .any(verfair::Error::is_invariant_violation);
    if invariant {
        EXIT_INVARIANT
    } else {
        EXIT_INVALID_INPUT
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Bench(args) => cmd_bench(args),
        Command::Gen(args) => cmd_gen(args),
        Command::Dump(args) => cmd_dump(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
