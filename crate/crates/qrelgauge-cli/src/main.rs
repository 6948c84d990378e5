//! `qrelgauge` — retrieval evaluation and annotation-stability analyses
//! over standard run/qrels files.
//!
//! Exit codes: 0 success, 2 input or configuration error, 3 numerical
//! failure.

mod commands;
mod inputs;

use std::fmt;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use qrelgauge::io::{emit_csv, emit_json, FloatPrecision};
use qrelgauge::metrics::MetricSpec;
use qrelgauge::model::Strictness;
use qrelgauge::rankstats::{default_buckets, validate_buckets, PairBucket};
use qrelgauge::rng::entropy_seed;
use qrelgauge::selection::{
    default_fractions, EvidenceCount, QualitySpec, SelectionPolicy, StudyOptions, SynthConfig,
    SystemBasedFallback,
};

use commands::CommandOutput;

#[derive(Debug)]
pub struct CliError {
    message: String,
    numerical: bool,
}

impl CliError {
    pub fn input(message: String) -> Self {
        Self {
            message,
            numerical: false,
        }
    }

    fn exit_code(&self) -> i32 {
        if self.numerical {
            3
        } else {
            2
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<qrelgauge::Error> for CliError {
    fn from(e: qrelgauge::Error) -> Self {
        let numerical = matches!(
            e,
            qrelgauge::Error::Numerical(_) | qrelgauge::Error::DegenerateFit(_)
        );
        Self {
            message: e.to_string(),
            numerical,
        }
    }
}

#[derive(Parser)]
#[command(
    name = "qrelgauge",
    version,
    about = "Evaluate retrieval runs and measure ranking stability under partial annotation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Score every system with retrieval metrics
    Evaluate(EvaluateArgs),
    /// Compare the system ranking under two judgment sets
    RankCompare(RankCompareArgs),
    /// Single-relevant selection-bias study
    SimulateSelection(SimulateSelectionArgs),
    /// Ranking stability as annotated fractions grow
    SimulateIncremental(SimulateIncrementalArgs),
    /// Pool coverage, subset expectations, and extrapolation
    Pooling(PoolingArgs),
    /// Generate a synthetic dataset with known system ordering
    Synth(SynthArgs),
}

#[derive(Args)]
struct InputArgs {
    /// Run file in the 6-column format (repeatable)
    #[arg(long = "run", value_name = "FILE")]
    runs: Vec<PathBuf>,
    /// Directory whose files are all loaded as runs (sorted by name)
    #[arg(long, value_name = "DIR")]
    runs_dir: Option<PathBuf>,
    /// Judgments in the 4-column qrels format
    #[arg(long, value_name = "FILE")]
    qrels: Option<PathBuf>,
    /// Judgments from a JSONL dataset (query_id / query / evidence)
    #[arg(long, value_name = "FILE")]
    dmerit: Option<PathBuf>,
    /// Skip malformed lines and evaluate query intersections instead of
    /// failing (QRELGAUGE_STRICT=1 overrides)
    #[arg(long)]
    lenient: bool,
}

impl InputArgs {
    fn strictness(&self) -> Strictness {
        if std::env::var("QRELGAUGE_STRICT").is_ok_and(|v| v == "1") {
            Strictness::Strict
        } else if self.lenient {
            Strictness::Lenient
        } else {
            Strictness::Strict
        }
    }
}

#[derive(Args)]
struct OutputArgs {
    /// Directory for report files
    #[arg(long, value_name = "DIR", default_value = "qrelgauge_out")]
    out_dir: PathBuf,
    /// Which report files to write
    #[arg(long, value_enum, default_value_t = Format::Both)]
    format: Format,
    /// Emit numbers at full precision instead of 6 significant digits
    #[arg(long)]
    full_precision: bool,
    /// Worker threads (results are identical for any value)
    #[arg(long, value_name = "N")]
    jobs: Option<usize>,
}

impl OutputArgs {
    fn precision(&self) -> FloatPrecision {
        if self.full_precision {
            FloatPrecision::Full
        } else {
            FloatPrecision::Significant6
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
    Both,
}

#[derive(Args)]
struct EvaluateArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    output: OutputArgs,
    /// Comma-separated metric list, e.g. recall@20,ndcg@20,r_precision
    #[arg(long, default_value = "recall@20")]
    metrics: String,
    /// Expand to recall/ndcg/map at each of these cutoffs plus
    /// r_precision, e.g. --grid-k 5,20,50,100
    #[arg(long, value_name = "KS")]
    grid_k: Option<String>,
}

#[derive(Args)]
struct RankCompareArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    output: OutputArgs,
    /// Candidate judgments compared against the reference --qrels
    #[arg(long, value_name = "FILE")]
    alt_qrels: PathBuf,
    #[arg(long, default_value = "recall@20")]
    metric: String,
    /// p-value buckets as min:max pairs, or `none`
    #[arg(long, default_value = "0:0.01,0.01:0.05,0.05:1")]
    buckets: String,
}

#[derive(Args)]
struct SimulateSelectionArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    output: OutputArgs,
    /// Document metadata TSV (docid, popularity, length); required by the
    /// most_popular / longest / shortest policies
    #[arg(long, value_name = "FILE")]
    meta: Option<PathBuf>,
    #[arg(long, default_value = "recall@20")]
    metric: String,
    /// Comma-separated policies; `system_based` expands to every system
    #[arg(long, default_value = "random,most_popular,longest,shortest,system_based")]
    policies: String,
    /// Trials for the random policy
    #[arg(long, default_value_t = 1000)]
    trials: u32,
    /// Seed for all randomized steps (auto-chosen and reported if absent)
    #[arg(long)]
    seed: Option<u64>,
    /// p-value buckets as min:max pairs, or `none`
    #[arg(long, default_value = "0:0.01,0.01:0.05,0.05:1")]
    buckets: String,
    /// When the selector retrieves no relevant doc for a query
    #[arg(long, value_enum, default_value_t = FallbackArg::LexSmallest)]
    fallback: FallbackArg,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FallbackArg {
    /// Keep the query, annotate the lexicographically smallest relevant doc
    LexSmallest,
    /// Drop the query from that selector's judgment set
    SkipQuery,
}

impl From<FallbackArg> for SystemBasedFallback {
    fn from(value: FallbackArg) -> Self {
        match value {
            FallbackArg::LexSmallest => SystemBasedFallback::LexSmallest,
            FallbackArg::SkipQuery => SystemBasedFallback::SkipQuery,
        }
    }
}

#[derive(Args)]
struct SimulateIncrementalArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    output: OutputArgs,
    #[arg(long, default_value = "recall@20")]
    metric: String,
    /// Ascending annotation fractions in (0, 1]
    #[arg(long, default_value = "0.01,0.02,0.05,0.1,0.2,0.5,1.0")]
    fractions: String,
    #[arg(long, default_value = "0:0.01,0.01:0.05,0.05:1")]
    buckets: String,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct PoolingArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    output: OutputArgs,
    /// Pool depth (top-k per system)
    #[arg(long, default_value_t = 10)]
    k: usize,
    /// Extrapolate the coverage curve to this many systems
    #[arg(long, default_value_t = 100)]
    extrapolate_to: usize,
    /// Also report a Monte Carlo estimate at this subset size
    #[arg(long, value_name = "T")]
    mc_t: Option<usize>,
    #[arg(long, default_value_t = 10_000)]
    mc_samples: u64,
    #[arg(long)]
    seed: Option<u64>,
    /// Pool annotations; enables the depth sweep
    #[arg(long, value_name = "FILE")]
    pool_qrels: Option<PathBuf>,
    /// Depths for the sweep, e.g. 1-20 or 5,10,20
    #[arg(long, default_value = "1-20")]
    depths: String,
    #[arg(long, default_value_t = 100)]
    extrapolate_depth_to: usize,
}

#[derive(Args)]
struct SynthArgs {
    #[command(flatten)]
    output: OutputArgs,
    #[arg(long, default_value_t = 12)]
    systems: usize,
    #[arg(long, default_value_t = 200)]
    queries: usize,
    #[arg(long, default_value_t = 5)]
    evidence_min: usize,
    #[arg(long, default_value_t = 20)]
    evidence_max: usize,
    #[arg(long, default_value_t = 10_000)]
    corpus_size: usize,
    /// Candidate documents scored per query
    #[arg(long, default_value_t = 200)]
    pool_size: usize,
    /// Ranked-list length per system
    #[arg(long, default_value_t = 100)]
    run_depth: usize,
    #[arg(long, default_value_t = 0.3)]
    quality_min: f64,
    #[arg(long, default_value_t = 0.9)]
    quality_max: f64,
    /// Explicit comma-separated qualities (overrides min/max)
    #[arg(long)]
    qualities: Option<String>,
    /// Score noise standard deviation
    #[arg(long, default_value_t = 0.02)]
    noise: f64,
    #[arg(long)]
    seed: Option<u64>,
}

fn parse_metric(text: &str) -> Result<MetricSpec, CliError> {
    text.parse::<MetricSpec>().map_err(CliError::from)
}

fn parse_metrics(text: &str) -> Result<Vec<MetricSpec>, CliError> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(parse_metric)
        .collect()
}

fn parse_buckets(text: &str) -> Result<Vec<PairBucket>, CliError> {
    if text.trim() == "none" || text.trim().is_empty() {
        return Ok(Vec::new());
    }
    let buckets: Vec<PairBucket> = text
        .split(',')
        .map(|part| {
            let (lo, hi) = part
                .split_once(':')
                .ok_or_else(|| CliError::input(format!("bucket `{part}` is not min:max")))?;
            let lo: f64 = lo
                .trim()
                .parse()
                .map_err(|_| CliError::input(format!("invalid bucket bound `{lo}`")))?;
            let hi: f64 = hi
                .trim()
                .parse()
                .map_err(|_| CliError::input(format!("invalid bucket bound `{hi}`")))?;
            PairBucket::new(lo, hi).map_err(CliError::from)
        })
        .collect::<Result<_, _>>()?;
    validate_buckets(&buckets)?;
    Ok(buckets)
}

fn parse_fractions(text: &str) -> Result<Vec<f64>, CliError> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>()
                .map_err(|_| CliError::input(format!("invalid fraction `{s}`")))
        })
        .collect()
}

fn parse_depths(text: &str) -> Result<Vec<usize>, CliError> {
    let text = text.trim();
    if let Some((lo, hi)) = text.split_once('-') {
        let lo: usize = lo
            .trim()
            .parse()
            .map_err(|_| CliError::input(format!("invalid depth `{lo}`")))?;
        let hi: usize = hi
            .trim()
            .parse()
            .map_err(|_| CliError::input(format!("invalid depth `{hi}`")))?;
        if lo > hi {
            return Err(CliError::input(format!("empty depth range {lo}-{hi}")));
        }
        return Ok((lo..=hi).collect());
    }
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<usize>()
                .map_err(|_| CliError::input(format!("invalid depth `{s}`")))
        })
        .collect()
}

/// Picks the study seed: explicit, or fresh entropy reported on stderr
/// so the run can be replayed.
fn resolve_seed(seed: Option<u64>) -> u64 {
    match seed {
        Some(s) => s,
        None => {
            let s = entropy_seed();
            eprintln!("note: no --seed given; using auto-chosen seed {s} (recorded in the report)");
            s
        }
    }
}

fn write_output(
    output: CommandOutput,
    slug: &str,
    args: &OutputArgs,
) -> Result<(), CliError> {
    let dir = &args.out_dir;
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::input(format!("cannot create {}: {e}", dir.display())))?;
    for (rel_path, contents) in &output.raw_files {
        let path = dir.join(rel_path);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)
                .map_err(|e| CliError::input(format!("cannot create {}: {e}", parent.display())))?;
        }
        std::fs::write(&path, contents)
            .map_err(|e| CliError::input(format!("cannot write {}: {e}", path.display())))?;
    }
    let precision = args.precision();
    if matches!(args.format, Format::Json | Format::Both) {
        let path = dir.join(format!("{slug}.json"));
        std::fs::write(&path, emit_json(&output.report, precision)?)
            .map_err(|e| CliError::input(format!("cannot write {}: {e}", path.display())))?;
    }
    if matches!(args.format, Format::Csv | Format::Both) {
        for table in &output.report.tables {
            let path = dir.join(format!("{slug}_{}.csv", table.name));
            std::fs::write(&path, emit_csv(table, precision)?)
                .map_err(|e| CliError::input(format!("cannot write {}: {e}", path.display())))?;
        }
    }
    for line in &output.summary {
        println!("{line}");
    }
    Ok(())
}

fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::Evaluate(args) => {
            let mode = args.input.strictness();
            let mut specs = parse_metrics(&args.metrics)?;
            if let Some(grid) = &args.grid_k {
                specs = grid_specs(grid)?;
            }
            if specs.is_empty() {
                return Err(CliError::input("no metrics requested".into()));
            }
            let runset = inputs::load_runs(&args.input.runs, args.input.runs_dir.as_deref(), mode)?;
            let qrels = inputs::load_relevance(
                args.input.qrels.as_deref(),
                args.input.dmerit.as_deref(),
                mode,
            )?;
            let out = commands::evaluate_cmd(&runset, &qrels, &specs, mode)?;
            write_output(out, "evaluate", &args.output)
        }
        Command::RankCompare(args) => {
            let mode = args.input.strictness();
            let spec = parse_metric(&args.metric)?;
            let buckets = parse_buckets(&args.buckets)?;
            let runset = inputs::load_runs(&args.input.runs, args.input.runs_dir.as_deref(), mode)?;
            let reference = inputs::load_relevance(
                args.input.qrels.as_deref(),
                args.input.dmerit.as_deref(),
                mode,
            )?;
            let candidate = inputs::load_qrels_file(&args.alt_qrels, mode)?;
            let out =
                commands::rank_compare_cmd(&runset, &reference, &candidate, spec, &buckets, mode)?;
            write_output(out, "rank_compare", &args.output)
        }
        Command::SimulateSelection(args) => {
            let mode = args.input.strictness();
            let spec = parse_metric(&args.metric)?;
            let buckets = parse_buckets(&args.buckets)?;
            let seed = resolve_seed(args.seed);
            let runset = inputs::load_runs(&args.input.runs, args.input.runs_dir.as_deref(), mode)?;
            let qrels = inputs::load_relevance(
                args.input.qrels.as_deref(),
                args.input.dmerit.as_deref(),
                mode,
            )?;
            let meta = args
                .meta
                .as_deref()
                .map(|p| inputs::load_meta(p, mode))
                .transpose()?;
            let policies = expand_policies(&args.policies, &runset, args.trials, seed)?;
            let opts = StudyOptions {
                fallback: args.fallback.into(),
                strictness: mode,
            };
            let out = commands::simulate_selection_cmd(
                &runset,
                &qrels,
                meta.as_ref(),
                &policies,
                spec,
                &buckets,
                &opts,
                seed,
                args.trials,
            )?;
            write_output(out, "simulate_selection", &args.output)
        }
        Command::SimulateIncremental(args) => {
            let mode = args.input.strictness();
            let spec = parse_metric(&args.metric)?;
            let buckets = {
                let parsed = parse_buckets(&args.buckets)?;
                if parsed.is_empty() {
                    default_buckets()
                } else {
                    parsed
                }
            };
            let fractions = parse_fractions(&args.fractions).or_else(|_| {
                Ok::<_, CliError>(default_fractions())
            })?;
            let seed = resolve_seed(args.seed);
            let runset = inputs::load_runs(&args.input.runs, args.input.runs_dir.as_deref(), mode)?;
            let qrels = inputs::load_relevance(
                args.input.qrels.as_deref(),
                args.input.dmerit.as_deref(),
                mode,
            )?;
            let opts = StudyOptions {
                fallback: SystemBasedFallback::LexSmallest,
                strictness: mode,
            };
            let out = commands::simulate_incremental_cmd(
                &runset, &qrels, &fractions, &buckets, spec, seed, &opts,
            )?;
            write_output(out, "simulate_incremental", &args.output)
        }
        Command::Pooling(args) => {
            let mode = args.input.strictness();
            let seed = if args.mc_t.is_some() {
                resolve_seed(args.seed)
            } else {
                args.seed.unwrap_or(0)
            };
            let runset = inputs::load_runs(&args.input.runs, args.input.runs_dir.as_deref(), mode)?;
            let qrels = inputs::load_relevance(
                args.input.qrels.as_deref(),
                args.input.dmerit.as_deref(),
                mode,
            )?;
            let depth_qrels = args
                .pool_qrels
                .as_deref()
                .map(|p| inputs::load_qrels_file(p, mode))
                .transpose()?;
            let pooling_args = commands::PoolingArgs {
                k: args.k,
                extrapolate_to: args.extrapolate_to,
                mc_t: args.mc_t,
                mc_samples: args.mc_samples,
                seed,
                depth_qrels,
                depths: parse_depths(&args.depths)?,
                extrapolate_depth_to: args.extrapolate_depth_to,
            };
            let out = commands::pooling_cmd(&runset, &qrels, &pooling_args, mode)?;
            write_output(out, "pooling", &args.output)
        }
        Command::Synth(args) => {
            let seed = resolve_seed(args.seed);
            let quality = match &args.qualities {
                Some(text) => QualitySpec::Explicit(
                    text.split(',')
                        .map(str::trim)
                        .filter(|s| !s.is_empty())
                        .map(|s| {
                            s.parse::<f64>()
                                .map_err(|_| CliError::input(format!("invalid quality `{s}`")))
                        })
                        .collect::<Result<_, _>>()?,
                ),
                None => QualitySpec::Evenly {
                    min: args.quality_min,
                    max: args.quality_max,
                },
            };
            let config = SynthConfig {
                n_systems: args.systems,
                n_queries: args.queries,
                evidence: EvidenceCount::Uniform {
                    min: args.evidence_min,
                    max: args.evidence_max,
                },
                corpus_size: args.corpus_size,
                pool_size: args.pool_size,
                run_depth: args.run_depth,
                quality,
                noise: args.noise,
                seed,
            };
            let out = commands::synth_cmd(&config)?;
            write_output(out, "synth", &args.output)
        }
    }
}

fn grid_specs(grid: &str) -> Result<Vec<MetricSpec>, CliError> {
    let ks: Vec<usize> = grid
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<usize>()
                .map_err(|_| CliError::input(format!("invalid cutoff `{s}`")))
        })
        .collect::<Result<_, _>>()?;
    if ks.is_empty() {
        return Err(CliError::input("empty --grid-k".into()));
    }
    let mut specs = Vec::new();
    for &k in &ks {
        specs.push(MetricSpec::Recall { k });
    }
    for &k in &ks {
        specs.push(MetricSpec::Ndcg { k });
    }
    for &k in &ks {
        specs.push(MetricSpec::Map { k });
    }
    specs.push(MetricSpec::RPrecision);
    Ok(specs)
}

fn expand_policies(
    text: &str,
    runset: &qrelgauge::model::RunSet,
    trials: u32,
    seed: u64,
) -> Result<Vec<SelectionPolicy>, CliError> {
    let mut policies = Vec::new();
    for name in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        match name {
            "random" => policies.push(SelectionPolicy::Random { trials, seed }),
            "most_popular" => policies.push(SelectionPolicy::MostPopular),
            "longest" => policies.push(SelectionPolicy::Longest),
            "shortest" => policies.push(SelectionPolicy::Shortest),
            "system_based" => {
                for system in runset.system_ids() {
                    policies.push(SelectionPolicy::SystemBased {
                        selector: system.to_string(),
                    });
                }
            }
            other => {
                if let Some(selector) = other.strip_prefix("system_based:") {
                    policies.push(SelectionPolicy::SystemBased {
                        selector: selector.to_string(),
                    });
                } else {
                    return Err(CliError::input(format!("unknown policy `{other}`")));
                }
            }
        }
    }
    if policies.is_empty() {
        return Err(CliError::input("no policies requested".into()));
    }
    Ok(policies)
}

fn main() {
    let cli = Cli::parse();
    let jobs = match &cli.command {
        Command::Evaluate(a) => a.output.jobs,
        Command::RankCompare(a) => a.output.jobs,
        Command::SimulateSelection(a) => a.output.jobs,
        Command::SimulateIncremental(a) => a.output.jobs,
        Command::Pooling(a) => a.output.jobs,
        Command::Synth(a) => a.output.jobs,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build();
    let result = match pool {
        Ok(pool) => pool.install(|| dispatch(cli.command)),
        Err(e) => Err(CliError::input(format!("cannot build thread pool: {e}"))),
    };
    if let Err(e) = result {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
