//! The `lbf` command line: build, query and evaluate standard and learned
//! Bloom filters, and run the seeded experiments.
//!
//! Every random component draws from `derive_seed(--seed, NAME)` with these
//! names: `dataset`, `backup`, `standard`, `train`, `eval`, `sweep`,
//! `concentration`. Reports never contain timestamps, so a command rerun with
//! the same configuration reproduces its output byte for byte.

pub mod config;
pub mod repro;
pub mod specs;

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use lbf_core::eval::{
    check_disjoint, concentration_experiment, evaluate_learned, evaluate_learned_on, evaluate_standard,
    evaluate_standard_on, exact_alpha, BackupFpr, EvalReport,
};
use lbf_core::model::TrainConfig;
use lbf_core::workload::io::{read_int_keys_text, read_keys_file};
use lbf_core::{
    build_learned, derive_seed, expected_fpp, key_to_int, params_for_target, threshold_sweep, AnyScorer, BackupSizing,
    BloomFilter, Error, FilterParams, LearnedBloomFilter, QueryDistribution, RangeExample, Result, SweepPoint,
};
use serde::Serialize;
use serde_json::Value;

use crate::specs::{parse_distribution, parse_scorer};

pub const CLI_SCHEMA: &str = "lbf-cli/1";

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    /// Invalid parameters, including command-line usage errors.
    pub const PARAMETER: i32 = 2;
    pub const IO: i32 = 3;
    /// Bad query workloads, such as queries overlapping the stored keys.
    pub const WORKLOAD: i32 = 4;
    pub const TRAINING: i32 = 5;
    /// Malformed input files.
    pub const FORMAT: i32 = 6;
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Parameter(_) | Error::OracleUnavailable(_) => exit::PARAMETER,
        Error::Io(_) => exit::IO,
        Error::Workload(_) => exit::WORKLOAD,
        Error::Training { .. } => exit::TRAINING,
        Error::Format(_) => exit::FORMAT,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Debug, Clone, Parser, Serialize)]
#[command(name = "lbf", version, about = "Standard and learned Bloom filter experiments")]
pub struct Cli {
    /// Top-level seed.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Output path: the filter file for `build`, the report otherwise
    /// (default stdout).
    #[arg(long, global = true)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t)]
    pub format: Format,
    /// File of `flag = value` lines. Flags given on the command line win.
    #[arg(long, global = true)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Build a standard or learned filter and write it to --out.
    Build(BuildArgs),
    /// Answer membership queries against a filter file.
    Query(QueryArgs),
    /// Measure a filter's false positive rate on a query set or distribution.
    Eval(EvalArgs),
    /// Tabulate size and false positive rate over a threshold grid.
    Sweep(SweepArgs),
    /// Compare test-set and query-set rates against the concentration bound.
    Concentration(ConcentrationArgs),
    /// Run the range example end to end and report derived values next to
    /// the reference values.
    ReproExample(ReproArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Build(_) => "build",
            Command::Query(_) => "query",
            Command::Eval(_) => "eval",
            Command::Sweep(_) => "sweep",
            Command::Concentration(_) => "concentration",
            Command::ReproExample(_) => "repro-example",
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DatasetArgs {
    /// Key file: decimal integers one per line, or LBK1 binary.
    #[arg(long, conflicts_with = "range_example")]
    pub keys: Option<PathBuf>,
    /// Use the generated range example: 500 keys in [1000, 2000], 500 keys
    /// elsewhere in [0, 1000000), an interval scorer and threshold 0.4.
    #[arg(long)]
    pub range_example: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ScorerArgs {
    /// `interval:LO-HI[,LO-HI]:INSIDE:OUTSIDE`, `constant:V`, `file:PATH` or
    /// `logistic:FEATURE_MAP`.
    #[arg(long)]
    pub scorer: Option<String>,
    /// Negative training keys for a logistic scorer.
    #[arg(long)]
    pub negatives: Option<PathBuf>,
    #[arg(long, default_value_t = 500)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0.5)]
    pub lr: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct BackupArgs {
    /// Target false positive probability of the backup filter
    /// (range example default 0.0002).
    #[arg(long, conflicts_with = "backup_bits")]
    pub backup_fpp: Option<f64>,
    #[arg(long, requires = "backup_hashes")]
    pub backup_bits: Option<u64>,
    #[arg(long, requires = "backup_bits")]
    pub backup_hashes: Option<u32>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct BuildArgs {
    #[command(flatten)]
    pub dataset: DatasetArgs,
    /// Build a standard filter even when a scorer is available.
    #[arg(long, conflicts_with = "scorer")]
    pub standard: bool,
    /// Target false positive probability of a standard filter.
    #[arg(long, conflicts_with = "bits")]
    pub fpp: Option<f64>,
    #[arg(long, requires = "hashes")]
    pub bits: Option<u64>,
    #[arg(long, requires = "bits")]
    pub hashes: Option<u32>,
    #[command(flatten)]
    pub scorer: ScorerArgs,
    #[arg(long)]
    pub tau: Option<f64>,
    #[command(flatten)]
    pub backup: BackupArgs,
    /// Report the above-threshold fraction on this distribution.
    #[arg(long)]
    pub dist: Option<String>,
    #[arg(long, default_value_t = 100_000)]
    pub samples: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct QueryArgs {
    #[arg(long)]
    pub filter: PathBuf,
    /// File of keys to query, in either key file format.
    #[arg(long)]
    pub keys: Option<PathBuf>,
    /// Integer keys to query.
    pub values: Vec<u64>,
}

/// A filter file, or the range example built in process.
#[derive(Debug, Clone, Args, Serialize)]
pub struct FilterSource {
    #[arg(long, conflicts_with = "range_example")]
    pub filter: Option<PathBuf>,
    /// Stored keys, used to keep queries disjoint from them.
    #[arg(long, conflicts_with = "range_example")]
    pub keys: Option<PathBuf>,
    /// Build the range example learned filter instead of loading one.
    #[arg(long)]
    pub range_example: bool,
    #[command(flatten)]
    pub backup: BackupArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum BackupFprArg {
    /// Fill ratio of the built backup to the power k.
    #[default]
    Measured,
    /// Closed-form expectation for the backup's size and key count.
    Expected,
}

impl From<BackupFprArg> for BackupFpr {
    fn from(a: BackupFprArg) -> Self {
        match a {
            BackupFprArg::Measured => BackupFpr::Measured,
            BackupFprArg::Expected => BackupFpr::Expected,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EvalArgs {
    #[command(flatten)]
    pub source: FilterSource,
    /// Text file of integer queries.
    #[arg(long, conflicts_with = "dist")]
    pub queries: Option<PathBuf>,
    /// `uniform:LO:HI`, `fixed:A,B`, `mixture:W@SPEC|W@SPEC` or `file:PATH`.
    #[arg(long)]
    pub dist: Option<String>,
    #[arg(long, default_value_t = 1_000_000)]
    pub samples: usize,
    #[arg(long, value_enum, default_value_t)]
    pub backup_fpr: BackupFprArg,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SweepArgs {
    #[command(flatten)]
    pub dataset: DatasetArgs,
    #[command(flatten)]
    pub scorer: ScorerArgs,
    /// Comma-separated thresholds in [0, 1].
    #[arg(long, value_delimiter = ',', required = true)]
    pub taus: Vec<f64>,
    #[arg(long)]
    pub dist: Option<String>,
    #[arg(long, default_value_t = 100_000)]
    pub samples: usize,
    #[command(flatten)]
    pub backup: BackupArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ConcentrationArgs {
    #[command(flatten)]
    pub source: FilterSource,
    #[arg(long)]
    pub dist: Option<String>,
    #[arg(long, default_value_t = 10_000)]
    pub t_size: usize,
    #[arg(long, default_value_t = 10_000)]
    pub q_size: usize,
    #[arg(long, default_value_t = 0.05)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 1000)]
    pub trials: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ReproArgs {
    /// Queries per evaluation.
    #[arg(long, default_value_t = 1_000_000)]
    pub samples: usize,
}

/// What a command produced: report text for `--out` or stdout, and for
/// `build` the filter bytes (the report then goes to stdout).
#[derive(Debug, Clone, PartialEq)]
pub struct Output {
    pub report: String,
    pub filter: Option<Vec<u8>>,
}

#[derive(Serialize)]
struct Envelope<'a, T> {
    schema: &'static str,
    command: &'static str,
    config: &'a Cli,
    result: T,
}

/// Renders a report with its configuration as pretty JSON, or as
/// `field,value` rows with dotted field paths.
pub fn render<T: Serialize>(cli: &Cli, result: T) -> Result<String> {
    let envelope = Envelope {
        schema: CLI_SCHEMA,
        command: cli.command.name(),
        config: cli,
        result,
    };
    match cli.format {
        Format::Json => {
            let mut text = serde_json::to_string_pretty(&envelope).map_err(|e| Error::Format(e.to_string()))?;
            text.push('\n');
            Ok(text)
        }
        Format::Csv => {
            let value = serde_json::to_value(&envelope).map_err(|e| Error::Format(e.to_string()))?;
            let mut rows = Vec::new();
            flatten("", &value, &mut rows);
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["field", "value"]).map_err(csv_err)?;
            for (field, value) in rows {
                w.write_record([field, value]).map_err(csv_err)?;
            }
            finish_csv(w)
        }
    }
}

fn flatten(prefix: &str, value: &Value, rows: &mut Vec<(String, String)>) {
    let join = |key: &str| {
        if prefix.is_empty() {
            key.to_string()
        } else {
            format!("{prefix}.{key}")
        }
    };
    match value {
        Value::Object(map) => {
            for (k, v) in map {
                flatten(&join(k), v, rows);
            }
        }
        Value::Array(items) => {
            for (i, v) in items.iter().enumerate() {
                flatten(&join(&i.to_string()), v, rows);
            }
        }
        Value::Null => rows.push((prefix.to_string(), String::new())),
        Value::String(s) => rows.push((prefix.to_string(), s.clone())),
        other => rows.push((prefix.to_string(), other.to_string())),
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Format(e.to_string())
}

fn finish_csv(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::Format(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Format(e.to_string()))
}

/// Runs the parsed command.
pub fn run(cli: &Cli) -> Result<Output> {
    match &cli.command {
        Command::Build(args) => cmd_build(cli, args),
        Command::Query(args) => report(cmd_query(cli, args)?),
        Command::Eval(args) => report(cmd_eval(cli, args)?),
        Command::Sweep(args) => report(cmd_sweep(cli, args)?),
        Command::Concentration(args) => report(cmd_concentration(cli, args)?),
        Command::ReproExample(args) => report(render(cli, repro::repro_example(cli.seed, args.samples)?)?),
    }
}

fn report(text: String) -> Result<Output> {
    Ok(Output {
        report: text,
        filter: None,
    })
}

/// Runs the command and writes its outputs.
pub fn execute(cli: &Cli) -> Result<()> {
    let out = run(cli)?;
    match (&out.filter, &cli.out) {
        (Some(bytes), Some(path)) => {
            fs::write(path, bytes)?;
            print!("{}", out.report);
        }
        (Some(_), None) => return Err(Error::Parameter("build needs --out for the filter file".into())),
        (None, Some(path)) => fs::write(path, &out.report)?,
        (None, None) => print!("{}", out.report),
    }
    Ok(())
}

/// Keys of a dataset, with the integer ones collected for exclusion.
struct Dataset {
    keys: Vec<Vec<u8>>,
    int_keys: HashSet<u64>,
    example: Option<RangeExample>,
}

impl Dataset {
    fn load(path: &Path) -> Result<Self> {
        let keys = read_keys_file(path)?;
        let int_keys = keys.iter().filter_map(|k| key_to_int(k)).collect();
        Ok(Self {
            keys,
            int_keys,
            example: None,
        })
    }

    fn range_example(seed: u64) -> Self {
        let ex = RangeExample::generate(derive_seed(seed, "dataset"));
        let ints = ex.keys();
        Self {
            keys: ints.iter().map(|&k| lbf_core::int_key(k).to_vec()).collect(),
            int_keys: ints.into_iter().collect(),
            example: Some(ex),
        }
    }

    fn resolve(keys: Option<&Path>, range_example: bool, seed: u64) -> Result<Self> {
        match (keys, range_example) {
            (Some(path), _) => Self::load(path),
            (None, true) => Ok(Self::range_example(seed)),
            (None, false) => Err(Error::Parameter("need --keys or --range-example".into())),
        }
    }

    /// `spec` over the universe minus the keys. The range example defaults
    /// to uniform queries over its whole universe.
    fn distribution(&self, spec: Option<&str>) -> Result<QueryDistribution> {
        let kind = match (spec, &self.example) {
            (Some(spec), _) => parse_distribution(spec)?,
            (None, Some(ex)) => return Ok(ex.full_range_queries()),
            (None, None) => return Err(Error::Parameter("need --dist".into())),
        };
        Ok(QueryDistribution::new(kind)?.excluding(self.int_keys.iter().copied()))
    }
}

fn sizing(args: &BackupArgs, example: bool) -> Result<BackupSizing> {
    match (args.backup_fpp, args.backup_bits, args.backup_hashes) {
        (Some(eps), _, _) => Ok(BackupSizing::TargetFpp(eps)),
        (None, Some(m), Some(k)) => Ok(BackupSizing::Params(FilterParams::new(m, k)?)),
        _ if example => Ok(BackupSizing::TargetFpp(repro::BACKUP_TARGET_FPP)),
        _ => Err(Error::Parameter(
            "need --backup-fpp or --backup-bits with --backup-hashes".into(),
        )),
    }
}

fn scorer(args: &ScorerArgs, ds: &Dataset, seed: u64) -> Result<AnyScorer> {
    match (&args.scorer, &ds.example) {
        (Some(spec), _) => {
            let negatives = args.negatives.as_deref().map(read_keys_file).transpose()?;
            let mut train = TrainConfig::new(args.epochs, args.lr);
            train.seed = derive_seed(seed, "train");
            parse_scorer(spec)?.resolve(&ds.keys, negatives.as_deref(), &train)
        }
        (None, Some(_)) => Ok(RangeExample::scorer().into()),
        (None, None) => Err(Error::Parameter("need --scorer".into())),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BuildSummary {
    pub kind: &'static str,
    pub key_count: u64,
    pub m: u64,
    pub k: u32,
    pub expected_fpp: f64,
    pub scorer_kind: Option<&'static str>,
    pub scorer_bits: u64,
    pub tau: Option<f64>,
    pub backup_keys: Option<u64>,
    pub total_bits: u64,
    pub bits_per_key: f64,
    pub alpha_exact: Option<f64>,
    pub alpha_sampled: Option<f64>,
    pub bytes: u64,
}

fn cmd_build(cli: &Cli, args: &BuildArgs) -> Result<Output> {
    let ds = Dataset::resolve(args.dataset.keys.as_deref(), args.dataset.range_example, cli.seed)?;
    let n = ds.keys.len() as u64;
    let learned = !args.standard && (args.scorer.scorer.is_some() || ds.example.is_some());
    let (summary, bytes) = if learned {
        let scorer = scorer(&args.scorer, &ds, cli.seed)?;
        let tau = match (args.tau, &ds.example) {
            (Some(t), _) => t,
            (None, Some(_)) => RangeExample::TAU,
            (None, None) => return Err(Error::Parameter("learned filters need --tau".into())),
        };
        let sizing = sizing(&args.backup, ds.example.is_some())?;
        let lbf = build_learned(&ds.keys, scorer, tau, sizing, derive_seed(cli.seed, "backup"))?;
        let (alpha_exact, alpha_sampled) = match &args.dist {
            Some(spec) => {
                let dist = ds.distribution(Some(spec))?;
                let exact = match exact_alpha(lbf.scorer(), tau, &dist) {
                    Ok(a) => Some(a.value),
                    Err(Error::OracleUnavailable(_)) => None,
                    Err(e) => return Err(e),
                };
                let queries = dist.sample(args.samples, derive_seed(cli.seed, "eval"))?;
                let above = queries
                    .iter()
                    .filter(|&&y| lbf.above_threshold(&lbf_core::int_key(y)))
                    .count();
                (exact, Some(above as f64 / queries.len() as f64))
            }
            None => (None, None),
        };
        let bytes = lbf.to_bytes();
        let backup = lbf.backup();
        let summary = BuildSummary {
            kind: "learned",
            key_count: n,
            m: backup.m(),
            k: backup.k(),
            expected_fpp: lbf.expected_backup_fpp(),
            scorer_kind: Some(lbf.scorer().kind()),
            scorer_bits: lbf_core::Scorer::size_bits(lbf.scorer()),
            tau: Some(tau),
            backup_keys: Some(lbf.backup_keys()),
            total_bits: lbf.size_bits(),
            bits_per_key: lbf.size_bits() as f64 / n as f64,
            alpha_exact,
            alpha_sampled,
            bytes: bytes.len() as u64,
        };
        (summary, bytes)
    } else {
        let params = match (args.fpp, args.bits, args.hashes) {
            (Some(eps), _, _) => params_for_target(n.max(1), eps)?,
            (None, Some(m), Some(k)) => FilterParams::new(m, k)?,
            _ => return Err(Error::Parameter("need --fpp or --bits with --hashes".into())),
        };
        let mut filter = BloomFilter::with_params(&params, derive_seed(cli.seed, "standard"))?;
        for key in &ds.keys {
            filter.insert(key);
        }
        let bytes = filter.to_bytes();
        let summary = BuildSummary {
            kind: "standard",
            key_count: n,
            m: filter.m(),
            k: filter.k(),
            expected_fpp: expected_fpp(n, filter.m(), filter.k())?,
            scorer_kind: None,
            scorer_bits: 0,
            tau: None,
            backup_keys: None,
            total_bits: filter.m(),
            bits_per_key: filter.m() as f64 / n.max(1) as f64,
            alpha_exact: None,
            alpha_sampled: None,
            bytes: bytes.len() as u64,
        };
        (summary, bytes)
    };
    Ok(Output {
        report: render(cli, summary)?,
        filter: Some(bytes),
    })
}

/// A filter file of either kind.
#[derive(Debug, Clone)]
pub enum LoadedFilter {
    Standard(BloomFilter),
    Learned(LearnedBloomFilter),
}

impl LoadedFilter {
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        match bytes.get(..4) {
            Some(b"LBF1") => Ok(LoadedFilter::Standard(BloomFilter::from_bytes(bytes)?)),
            Some(b"LLB1") => Ok(LoadedFilter::Learned(LearnedBloomFilter::from_bytes(bytes)?)),
            _ => Err(Error::Format("not a filter file".into())),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }

    pub fn contains(&self, key: &[u8]) -> bool {
        match self {
            LoadedFilter::Standard(f) => f.contains(key),
            LoadedFilter::Learned(f) => f.contains(key),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            LoadedFilter::Standard(_) => "standard",
            LoadedFilter::Learned(_) => "learned",
        }
    }
}

impl lbf_core::MembershipFilter for LoadedFilter {
    fn contains(&self, key: &[u8]) -> bool {
        LoadedFilter::contains(self, key)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct QueryAnswer {
    /// Decimal for 8-byte integer keys, hex otherwise.
    pub key: String,
    pub positive: bool,
}

fn display_key(key: &[u8]) -> String {
    match key_to_int(key) {
        Some(v) => v.to_string(),
        None => key.iter().map(|b| format!("{b:02x}")).collect(),
    }
}

fn cmd_query(cli: &Cli, args: &QueryArgs) -> Result<String> {
    let filter = LoadedFilter::load(&args.filter)?;
    let mut keys: Vec<Vec<u8>> = args.values.iter().map(|&v| lbf_core::int_key(v).to_vec()).collect();
    if let Some(path) = &args.keys {
        keys.extend(read_keys_file(path)?);
    }
    let answers: Vec<QueryAnswer> = keys
        .iter()
        .map(|k| QueryAnswer {
            key: display_key(k),
            positive: filter.contains(k),
        })
        .collect();
    match cli.format {
        Format::Json => render(cli, answers),
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            for a in &answers {
                w.serialize(a).map_err(csv_err)?;
            }
            if answers.is_empty() {
                w.write_record(["key", "positive"]).map_err(csv_err)?;
            }
            finish_csv(w)
        }
    }
}

/// The filter to evaluate and the dataset whose keys queries must avoid.
fn filter_and_keys(source: &FilterSource, seed: u64) -> Result<(LoadedFilter, Dataset)> {
    if source.range_example {
        let ds = Dataset::range_example(seed);
        let lbf = build_learned(
            &ds.keys,
            RangeExample::scorer().into(),
            RangeExample::TAU,
            sizing(&source.backup, true)?,
            derive_seed(seed, "backup"),
        )?;
        return Ok((LoadedFilter::Learned(lbf), ds));
    }
    let path = source
        .filter
        .as_deref()
        .ok_or_else(|| Error::Parameter("need --filter or --range-example".into()))?;
    let keys = source
        .keys
        .as_deref()
        .ok_or_else(|| Error::Parameter("need --keys so queries can avoid the stored keys".into()))?;
    let filter = LoadedFilter::load(path)?;
    Ok((filter, Dataset::load(keys)?))
}

#[derive(Debug, Clone, Serialize)]
pub struct EvalResult {
    pub filter_kind: &'static str,
    #[serde(flatten)]
    pub report: EvalReport,
}

fn cmd_eval(cli: &Cli, args: &EvalArgs) -> Result<String> {
    let (filter, ds) = filter_and_keys(&args.source, cli.seed)?;
    let seed = derive_seed(cli.seed, "eval");
    let report = match &args.queries {
        Some(path) => {
            let queries = read_int_keys_text(fs::File::open(path)?)?;
            check_disjoint(&queries, &ds.int_keys)?;
            match &filter {
                LoadedFilter::Standard(f) => evaluate_standard_on(f, &queries, seed)?,
                LoadedFilter::Learned(f) => evaluate_learned_on(f, &queries, args.backup_fpr.into(), seed)?,
            }
        }
        None => {
            let dist = ds.distribution(args.dist.as_deref())?;
            match &filter {
                LoadedFilter::Standard(f) => evaluate_standard(f, &dist, args.samples, seed)?,
                LoadedFilter::Learned(f) => evaluate_learned(f, &dist, args.samples, args.backup_fpr.into(), seed)?,
            }
        }
    };
    render(
        cli,
        EvalResult {
            filter_kind: filter.kind(),
            report,
        },
    )
}

/// Sorts the grid, sweeps it and checks that the above-threshold fraction
/// never rises and the backup never shrinks along it.
pub fn sweep_points(
    keys: &[Vec<u8>],
    scorer: &AnyScorer,
    taus: &[f64],
    dist: &QueryDistribution,
    samples: usize,
    sizing: BackupSizing,
    seed: u64,
) -> Result<Vec<SweepPoint>> {
    let mut grid = taus.to_vec();
    grid.sort_by(f64::total_cmp);
    let points = threshold_sweep(keys, scorer, &grid, dist, samples, sizing, seed)?;
    for w in points.windows(2) {
        if w[1].alpha_estimate > w[0].alpha_estimate || w[1].backup_keys < w[0].backup_keys {
            return Err(Error::Workload(format!(
                "sweep not monotone between tau {} and {}",
                w[0].tau, w[1].tau
            )));
        }
    }
    Ok(points)
}

fn cmd_sweep(cli: &Cli, args: &SweepArgs) -> Result<String> {
    let ds = Dataset::resolve(args.dataset.keys.as_deref(), args.dataset.range_example, cli.seed)?;
    let scorer = scorer(&args.scorer, &ds, cli.seed)?;
    let dist = ds.distribution(args.dist.as_deref())?;
    let points = sweep_points(
        &ds.keys,
        &scorer,
        &args.taus,
        &dist,
        args.samples,
        sizing(&args.backup, ds.example.is_some())?,
        derive_seed(cli.seed, "sweep"),
    )?;
    match cli.format {
        Format::Json => render(cli, points),
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            for p in &points {
                w.serialize(p).map_err(csv_err)?;
            }
            finish_csv(w)
        }
    }
}

fn cmd_concentration(cli: &Cli, args: &ConcentrationArgs) -> Result<String> {
    let (filter, ds) = filter_and_keys(&args.source, cli.seed)?;
    let dist = ds.distribution(args.dist.as_deref())?;
    let report = concentration_experiment(
        &filter,
        &dist,
        args.t_size,
        args.q_size,
        args.epsilon,
        args.trials,
        derive_seed(cli.seed, "concentration"),
    )?;
    render(cli, report)
}
