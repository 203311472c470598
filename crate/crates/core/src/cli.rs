//! Command-line front end. Every stage reads and writes files in one output
//! directory, so the distance matrix is computed once and reused by the
//! clustering, sweep and report stages:
//!
//! | stage       | reads                                   | writes                                   |
//! |-------------|-----------------------------------------|------------------------------------------|
//! | `synth`     |                                         | `synthetic.csv`, `synthetic_labels.json` |
//! | `ingest`    | `--input` or `synthetic.csv`            | `dataset.json`, `exclusions.json`        |
//! | `distances` | `dataset.json`                          | `distances.csv`                          |
//! | `cluster`   | `dataset.json`, `distances.csv` (AHC)   | `model.json`                             |
//! | `metrics`   | `dataset.json`, `model.json`            | `validation.json`, `validation.csv`      |
//! | `sweep`     | `dataset.json`, `distances.csv` (AHC)   | `sweep.json`, `sweep.csv`                |
//! | `report`    | `dataset.json`, `model.json`            | `report.json`, `report.csv`, `report.svg`|
//!
//! `run` performs the stages in one process and writes the same files.
//!
//! Failures print one JSON object on stderr. A missing upstream file exits
//! with code 2; invalid flags or configuration, and any other failure, exit
//! with code 1.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::clustering::{self, ClusterModel, Linkage, Method};
use crate::dtw::{self, DistanceMatrix, DtwOptions};
use crate::error::Error;
use crate::ingest::{self, CsvSchema, Dataset, Exclusion};
use crate::metrics::{self, SweepOptions};
use crate::report::{self, ReportOptions, Representative};
use crate::synth::{self, SynthConfig};
use crate::util;

pub const SYNTH_CSV: &str = "synthetic.csv";
pub const SYNTH_LABELS: &str = "synthetic_labels.json";
pub const DATASET: &str = "dataset.json";
pub const EXCLUSIONS: &str = "exclusions.json";
pub const ROW_ERRORS: &str = "row_errors.json";
pub const DISTANCES: &str = "distances.csv";
pub const MODEL: &str = "model.json";
pub const VALIDATION_JSON: &str = "validation.json";
pub const VALIDATION_CSV: &str = "validation.csv";

#[derive(Debug, Parser)]
#[command(name = "repday", version, about = "Representative-day selection with multivariate DTW clustering")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Generate a seeded synthetic dataset with labeled outlier days.
    Synth(Flags),
    /// Parse hourly CSV into normalized day profiles.
    Ingest(Flags),
    /// Compute the pairwise DTW distance matrix.
    Distances(Flags),
    /// Cluster days with AHC or K-Means.
    Cluster(Flags),
    /// Score the current clustering.
    Metrics(Flags),
    /// Score every method over a range of K.
    Sweep(Flags),
    /// Render representative days and monthly histograms.
    Report(Flags),
    /// Run every stage in one process.
    Run(Flags),
}

impl Command {
    fn flags(&self) -> &Flags {
        match self {
            Command::Synth(f)
            | Command::Ingest(f)
            | Command::Distances(f)
            | Command::Cluster(f)
            | Command::Metrics(f)
            | Command::Sweep(f)
            | Command::Report(f)
            | Command::Run(f) => f,
        }
    }
}

/// Flags shared by every subcommand. Each one can also be given in the
/// `--config` file under the same name without the leading dashes.
#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// Key-value config file (`key = value`, `#` comments).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Seed for synthetic data and K-Means [default: 42].
    #[arg(long)]
    pub seed: Option<u64>,
    /// kmeans, ahc-complete, ahc-average or ahc; a comma list or `all` for sweep.
    #[arg(long)]
    pub method: Option<String>,
    /// Number of clusters [default: 14].
    #[arg(long)]
    pub k: Option<usize>,
    /// Cluster counts for the sweep, e.g. `2..20` (inclusive).
    #[arg(long = "k-range")]
    pub k_range: Option<String>,
    /// AHC linkage: complete or average.
    #[arg(long)]
    pub linkage: Option<String>,
    /// Output directory [default: out].
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Sakoe-Chiba band half-width in hours.
    #[arg(long)]
    pub window: Option<usize>,
    /// Per-variable DTW weights, e.g. `1,0.5`.
    #[arg(long)]
    pub weights: Option<String>,
    /// Hourly CSV to ingest [default: <out>/synthetic.csv].
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// K-Means restarts [default: 10].
    #[arg(long)]
    pub restarts: Option<usize>,
    /// Synthetic days [default: 730].
    #[arg(long)]
    pub days: Option<usize>,
    /// Add a wind variable to the synthetic data.
    #[arg(long)]
    pub wind: bool,
    /// Per-variable daily outlier probability for synthetic data [default: 0.01].
    #[arg(long = "outlier-probability")]
    pub outlier_probability: Option<f64>,
    /// Timestamp column name [default: timestamp].
    #[arg(long = "timestamp-column")]
    pub timestamp_column: Option<String>,
    /// Value columns to read, comma separated [default: all].
    #[arg(long)]
    pub columns: Option<String>,
    /// Keep raw units instead of min-max normalizing.
    #[arg(long = "no-normalize")]
    pub no_normalize: bool,
    /// Report representative: centroid or medoid [default: centroid].
    #[arg(long)]
    pub representative: Option<String>,
    /// Report profiles in normalized units.
    #[arg(long = "normalized-units")]
    pub normalized_units: bool,
}

/// Fully resolved settings for one invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub out: PathBuf,
    pub input: Option<PathBuf>,
    pub schema: CsvSchema,
    pub normalize: bool,
    pub dtw: DtwOptions,
    pub methods: Vec<Method>,
    /// Whether `--method`/`--linkage` was given explicitly.
    pub method_given: bool,
    pub k: usize,
    pub k_range: Option<(usize, usize)>,
    pub seed: u64,
    pub restarts: usize,
    pub days: usize,
    pub wind: bool,
    pub outlier_probability: Option<f64>,
    pub representative: Representative,
    pub denormalize: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            out: PathBuf::from("out"),
            input: None,
            schema: CsvSchema::default(),
            normalize: true,
            dtw: DtwOptions::default(),
            methods: vec![Method::AhcAverage],
            method_given: false,
            k: 14,
            k_range: None,
            seed: 42,
            restarts: 10,
            days: 730,
            wind: false,
            outlier_probability: None,
            representative: Representative::Centroid,
            denormalize: true,
        }
    }
}

#[derive(Debug)]
pub enum CliError {
    /// An upstream artifact is missing.
    Missing(PathBuf),
    /// Bad flags or configuration.
    Config(String),
    /// The pipeline itself failed.
    Failed(Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Missing(_) => 2,
            CliError::Config(_) | CliError::Failed(_) => 1,
        }
    }

    pub fn to_json(&self) -> String {
        let value = match self {
            CliError::Missing(path) => json!({
                "error": "missing-input",
                "file": path.display().to_string(),
                "message": self.to_string(),
            }),
            CliError::Config(_) => json!({"error": "invalid-config", "message": self.to_string()}),
            CliError::Failed(_) => json!({"error": "failed", "message": self.to_string()}),
        };
        value.to_string()
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Missing(p) => write!(f, "missing input file {}", p.display()),
            CliError::Config(m) => f.write_str(m),
            CliError::Failed(e) => write!(f, "{e}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Argument(m) => CliError::Config(m),
            other => CliError::Failed(other),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

const CONFIG_KEYS: &[&str] = &[
    "seed",
    "method",
    "k",
    "k-range",
    "linkage",
    "out",
    "window",
    "weights",
    "input",
    "restarts",
    "days",
    "wind",
    "outlier-probability",
    "timestamp-column",
    "columns",
    "no-normalize",
    "representative",
    "normalized-units",
];

/// Parses `key = value` lines. Blank lines and `#` comments are ignored;
/// unknown or repeated keys are errors.
pub fn parse_config(text: &str) -> CliResult<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| config_err(format!("config line {}: expected key = value", n + 1)))?;
        let key = key.trim().replace('_', "-");
        if !CONFIG_KEYS.contains(&key.as_str()) {
            return Err(config_err(format!("config line {}: unknown key '{key}'", n + 1)));
        }
        if map.insert(key.clone(), value.trim().to_string()).is_some() {
            return Err(config_err(format!("config line {}: '{key}' given twice", n + 1)));
        }
    }
    Ok(map)
}

fn parse_value<T: std::str::FromStr>(key: &str, s: &str) -> CliResult<T> {
    s.trim()
        .parse()
        .map_err(|_| config_err(format!("{key}: cannot parse '{s}'")))
}

fn parse_bool(key: &str, s: &str) -> CliResult<bool> {
    match s.trim() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(config_err(format!("{key}: expected true or false, got '{s}'"))),
    }
}

/// Parses `a..b` (inclusive); `a..=b` is accepted too.
pub fn parse_k_range(s: &str) -> CliResult<(usize, usize)> {
    let (a, b) = s
        .split_once("..")
        .ok_or_else(|| config_err(format!("k-range: expected a..b, got '{s}'")))?;
    let b = b.strip_prefix('=').unwrap_or(b);
    let lo: usize = parse_value("k-range", a)?;
    let hi: usize = parse_value("k-range", b)?;
    if lo > hi {
        return Err(config_err(format!("k-range: {lo} > {hi}")));
    }
    Ok((lo, hi))
}

fn parse_weights(s: &str) -> CliResult<Vec<f64>> {
    s.split(',')
        .map(|w| parse_value::<f64>("weights", w))
        .collect()
}

fn parse_methods(method: Option<&str>, linkage: Option<&str>) -> CliResult<Option<Vec<Method>>> {
    let linkage = linkage.map(|l| l.trim().parse::<Linkage>()).transpose()?;
    let Some(spec) = method else {
        return Ok(linkage.map(|l| vec![Method::from_linkage(l)]));
    };
    let mut methods = Vec::new();
    for name in spec.split(',').map(str::trim) {
        match name {
            "all" => methods.extend(Method::ALL),
            "ahc" => methods.push(Method::from_linkage(linkage.unwrap_or(Linkage::Average))),
            other => {
                let m: Method = other.parse()?;
                if let (Some(l), Some(ml)) = (linkage, m.linkage()) {
                    if l != ml {
                        return Err(config_err(format!("method {m} conflicts with --linkage")));
                    }
                }
                methods.push(m);
            }
        }
    }
    let mut seen = Vec::new();
    methods.retain(|m| {
        let fresh = !seen.contains(m);
        seen.push(*m);
        fresh
    });
    if methods.is_empty() {
        return Err(config_err("no method given"));
    }
    Ok(Some(methods))
}

impl RunConfig {
    /// Merges command-line flags over the config file over defaults.
    pub fn resolve(flags: &Flags) -> CliResult<Self> {
        let file = match &flags.config {
            Some(path) => {
                if !path.exists() {
                    return Err(config_err(format!("config file {} not found", path.display())));
                }
                let bytes = util::read_file(path)?;
                let text = String::from_utf8(bytes)
                    .map_err(|_| config_err(format!("{} is not UTF-8", path.display())))?;
                parse_config(&text)?
            }
            None => BTreeMap::new(),
        };
        let get = |key: &str| file.get(key).map(String::as_str);
        let mut cfg = RunConfig::default();

        if let Some(v) = flags.out.clone().or_else(|| get("out").map(PathBuf::from)) {
            cfg.out = v;
        }
        cfg.input = flags.input.clone().or_else(|| get("input").map(PathBuf::from));
        if let Some(v) = flags.seed {
            cfg.seed = v;
        } else if let Some(s) = get("seed") {
            cfg.seed = parse_value("seed", s)?;
        }
        if let Some(v) = flags.k {
            cfg.k = v;
        } else if let Some(s) = get("k") {
            cfg.k = parse_value("k", s)?;
        }
        if let Some(s) = flags.k_range.as_deref().or(get("k-range")) {
            cfg.k_range = Some(parse_k_range(s)?);
        }
        if let Some(v) = flags.restarts {
            cfg.restarts = v;
        } else if let Some(s) = get("restarts") {
            cfg.restarts = parse_value("restarts", s)?;
        }
        if cfg.restarts == 0 {
            return Err(config_err("restarts must be at least 1"));
        }
        if let Some(v) = flags.days {
            cfg.days = v;
        } else if let Some(s) = get("days") {
            cfg.days = parse_value("days", s)?;
        }
        if let Some(v) = flags.window {
            cfg.dtw.window = Some(v);
        } else if let Some(s) = get("window") {
            cfg.dtw.window = Some(parse_value("window", s)?);
        }
        if let Some(s) = flags.weights.as_deref().or(get("weights")) {
            cfg.dtw.weights = Some(parse_weights(s)?);
        }
        let method = flags.method.as_deref().or(get("method"));
        let linkage = flags.linkage.as_deref().or(get("linkage"));
        if let Some(methods) = parse_methods(method, linkage)? {
            cfg.methods = methods;
            cfg.method_given = true;
        }
        cfg.wind = flags.wind || get("wind").map(|s| parse_bool("wind", s)).transpose()?.unwrap_or(false);
        if let Some(v) = flags.outlier_probability {
            cfg.outlier_probability = Some(v);
        } else if let Some(s) = get("outlier-probability") {
            cfg.outlier_probability = Some(parse_value("outlier-probability", s)?);
        }
        if let Some(s) = flags.timestamp_column.as_deref().or(get("timestamp-column")) {
            cfg.schema.timestamp_column = s.trim().to_string();
        }
        if let Some(s) = flags.columns.as_deref().or(get("columns")) {
            cfg.schema.value_columns = s.split(',').map(|c| c.trim().to_string()).collect();
        }
        let no_normalize = flags.no_normalize
            || get("no-normalize").map(|s| parse_bool("no-normalize", s)).transpose()?.unwrap_or(false);
        cfg.normalize = !no_normalize;
        if let Some(s) = flags.representative.as_deref().or(get("representative")) {
            cfg.representative = s.parse()?;
        }
        let normalized_units = flags.normalized_units
            || get("normalized-units")
                .map(|s| parse_bool("normalized-units", s))
                .transpose()?
                .unwrap_or(false);
        cfg.denormalize = !normalized_units;
        Ok(cfg)
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn single_method(&self) -> CliResult<Method> {
        match self.methods.as_slice() {
            [m] => Ok(*m),
            _ => Err(config_err("exactly one method is needed here")),
        }
    }

    fn check_k(&self, k: usize, n: usize) -> CliResult<()> {
        if k < 2 || k + 1 > n {
            return Err(config_err(format!(
                "K = {k} outside 2..={} for {n} days",
                n.saturating_sub(1)
            )));
        }
        Ok(())
    }

    fn synth_config(&self) -> CliResult<SynthConfig> {
        let mut cfg = SynthConfig::new(self.seed, self.days);
        if self.wind {
            cfg = cfg.with_wind();
        }
        if let Some(p) = self.outlier_probability {
            for v in &mut cfg.variables {
                v.outlier_probability = p;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn require(path: PathBuf) -> CliResult<PathBuf> {
    if path.is_file() {
        Ok(path)
    } else {
        Err(CliError::Missing(path))
    }
}

fn load_dataset(cfg: &RunConfig) -> CliResult<Dataset> {
    Ok(Dataset::load(&require(cfg.path(DATASET))?)?)
}

fn load_distances(cfg: &RunConfig, ds: &Dataset) -> CliResult<DistanceMatrix> {
    let dm = DistanceMatrix::load(&require(cfg.path(DISTANCES))?)?;
    dm.check_matches(ds)?;
    Ok(dm)
}

fn load_model(cfg: &RunConfig, ds: &Dataset) -> CliResult<ClusterModel> {
    Ok(ClusterModel::load(&require(cfg.path(MODEL))?, ds)?)
}

fn announce(path: &Path) {
    println!("wrote {}", path.display());
}

fn write(cfg: &RunConfig, name: &str, contents: impl AsRef<[u8]>) -> CliResult<()> {
    let path = cfg.path(name);
    util::write_file(&path, contents)?;
    announce(&path);
    Ok(())
}

// Stage bodies shared by the single-stage commands and `run`.

fn synth_stage(cfg: &RunConfig) -> CliResult<String> {
    let out = synth::generate(&cfg.synth_config()?)?;
    let csv = synth::to_csv(&out.dataset);
    write(cfg, SYNTH_CSV, &csv)?;
    write(cfg, SYNTH_LABELS, out.truth.to_json()?)?;
    Ok(csv)
}

fn ingest_stage(cfg: &RunConfig, csv: &[u8]) -> CliResult<Dataset> {
    let parsed = ingest::parse_csv(csv, &cfg.schema)?;
    let (ds, exclusions) = ingest::build_days(&parsed.records, &parsed.variable_names)?;
    let ds = if cfg.normalize { ingest::normalize(&ds)? } else { ds };
    write(cfg, DATASET, ds.to_json()?)?;
    write(cfg, EXCLUSIONS, exclusions_json(&exclusions)?)?;
    if !parsed.row_errors.is_empty() {
        let errors: Vec<_> = parsed
            .row_errors
            .iter()
            .map(|e| json!({"line": e.line, "message": e.message}))
            .collect();
        write(cfg, ROW_ERRORS, serde_json::to_string_pretty(&errors).map_err(Error::from)?)?;
        eprintln!("{} unparseable rows, see {}", errors.len(), cfg.path(ROW_ERRORS).display());
    }
    Ok(ds)
}

fn exclusions_json(exclusions: &[Exclusion]) -> CliResult<String> {
    Ok(serde_json::to_string_pretty(exclusions).map_err(Error::from)?)
}

fn distances_stage(cfg: &RunConfig, ds: &Dataset) -> CliResult<DistanceMatrix> {
    cfg.dtw.validate(ds.n_vars())?;
    let dm = dtw::distance_matrix(ds, &cfg.dtw)?;
    write(cfg, DISTANCES, dm.to_csv())?;
    Ok(dm)
}

fn cluster_stage(cfg: &RunConfig, ds: &Dataset, dm: Option<&DistanceMatrix>) -> CliResult<ClusterModel> {
    let method = cfg.single_method()?;
    cfg.check_k(cfg.k, ds.len())?;
    let model = match method.linkage() {
        Some(linkage) => {
            let dm = dm.ok_or_else(|| CliError::Missing(cfg.path(DISTANCES)))?;
            clustering::cut(&clustering::ahc(dm, linkage)?, cfg.k, ds)?
        }
        None => clustering::kmeans(ds, cfg.k, cfg.seed, cfg.restarts)?,
    };
    write(cfg, MODEL, model.to_json(ds)?)?;
    Ok(model)
}

fn metrics_stage(cfg: &RunConfig, ds: &Dataset, model: &ClusterModel) -> CliResult<()> {
    cfg.dtw.validate(ds.n_vars())?;
    let v = metrics::validate(ds, model, &cfg.dtw)?;
    write(cfg, VALIDATION_JSON, v.to_json()?)?;
    write(cfg, VALIDATION_CSV, v.to_csv())
}

fn sweep_methods(cfg: &RunConfig) -> Vec<Method> {
    if cfg.method_given {
        cfg.methods.clone()
    } else {
        Method::ALL.to_vec()
    }
}

fn sweep_stage(cfg: &RunConfig, ds: &Dataset, dm: Option<&DistanceMatrix>) -> CliResult<()> {
    let (lo, hi) = cfg
        .k_range
        .ok_or_else(|| config_err("sweep needs --k-range a..b"))?;
    cfg.check_k(lo, ds.len())?;
    cfg.check_k(hi, ds.len())?;
    cfg.dtw.validate(ds.n_vars())?;
    let opts = SweepOptions {
        dtw: cfg.dtw.clone(),
        seed: cfg.seed,
        restarts: cfg.restarts,
    };
    let (sweep, _) = metrics::sweep(ds, dm, &sweep_methods(cfg), lo..=hi, &opts)?;
    sweep.save(&cfg.out)?;
    announce(&cfg.path("sweep.json"));
    announce(&cfg.path("sweep.csv"));
    Ok(())
}

fn report_stage(
    cfg: &RunConfig,
    ds: &Dataset,
    model: &ClusterModel,
    dm: Option<&DistanceMatrix>,
) -> CliResult<()> {
    let opts = ReportOptions {
        representative: cfg.representative,
        denormalize: cfg.denormalize,
    };
    let dm = match (cfg.representative, dm) {
        (Representative::Medoid, None) => return Err(CliError::Missing(cfg.path(DISTANCES))),
        (_, dm) => dm,
    };
    let r = report::build_report(model, ds, dm, &opts)?;
    r.save(&cfg.out)?;
    for name in ["report.json", "report.csv", "report.svg"] {
        announce(&cfg.path(name));
    }
    Ok(())
}

pub fn cmd_synth(cfg: &RunConfig) -> CliResult<()> {
    synth_stage(cfg).map(|_| ())
}

pub fn cmd_ingest(cfg: &RunConfig) -> CliResult<()> {
    let input = require(cfg.input.clone().unwrap_or_else(|| cfg.path(SYNTH_CSV)))?;
    let bytes = util::read_file(&input)?;
    ingest_stage(cfg, &bytes).map(|_| ())
}

pub fn cmd_distances(cfg: &RunConfig) -> CliResult<()> {
    let ds = load_dataset(cfg)?;
    distances_stage(cfg, &ds).map(|_| ())
}

pub fn cmd_cluster(cfg: &RunConfig) -> CliResult<()> {
    let ds = load_dataset(cfg)?;
    let method = cfg.single_method()?;
    let dm = match method.linkage() {
        Some(_) => Some(load_distances(cfg, &ds)?),
        None => None,
    };
    cluster_stage(cfg, &ds, dm.as_ref()).map(|_| ())
}

pub fn cmd_metrics(cfg: &RunConfig) -> CliResult<()> {
    let ds = load_dataset(cfg)?;
    let model = load_model(cfg, &ds)?;
    metrics_stage(cfg, &ds, &model)
}

pub fn cmd_sweep(cfg: &RunConfig) -> CliResult<()> {
    let ds = load_dataset(cfg)?;
    let dm = if sweep_methods(cfg).iter().any(|m| m.linkage().is_some()) {
        Some(load_distances(cfg, &ds)?)
    } else {
        None
    };
    sweep_stage(cfg, &ds, dm.as_ref())
}

pub fn cmd_report(cfg: &RunConfig) -> CliResult<()> {
    let ds = load_dataset(cfg)?;
    let model = load_model(cfg, &ds)?;
    let dm = match cfg.representative {
        Representative::Medoid => Some(load_distances(cfg, &ds)?),
        Representative::Centroid => None,
    };
    report_stage(cfg, &ds, &model, dm.as_ref())
}

/// Every stage in one process: synth (unless `--input` is given), ingest,
/// distances, cluster, metrics, report, and the sweep when `--k-range` is set.
pub fn cmd_run(cfg: &RunConfig) -> CliResult<()> {
    let csv = match &cfg.input {
        Some(path) => util::read_file(&require(path.clone())?)?,
        None => synth_stage(cfg)?.into_bytes(),
    };
    let ds = ingest_stage(cfg, &csv)?;
    let dm = distances_stage(cfg, &ds)?;
    let model = cluster_stage(cfg, &ds, Some(&dm))?;
    metrics_stage(cfg, &ds, &model)?;
    if cfg.k_range.is_some() {
        sweep_stage(cfg, &ds, Some(&dm))?;
    }
    report_stage(cfg, &ds, &model, Some(&dm))
}

pub fn execute(command: &Command) -> CliResult<()> {
    let cfg = RunConfig::resolve(command.flags())?;
    match command {
        Command::Synth(_) => cmd_synth(&cfg),
        Command::Ingest(_) => cmd_ingest(&cfg),
        Command::Distances(_) => cmd_distances(&cfg),
        Command::Cluster(_) => cmd_cluster(&cfg),
        Command::Metrics(_) => cmd_metrics(&cfg),
        Command::Sweep(_) => cmd_sweep(&cfg),
        Command::Report(_) => cmd_report(&cfg),
        Command::Run(_) => cmd_run(&cfg),
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help / --version
            let _ = e.print();
            return 0;
        }
        Err(e) => {
            let err = CliError::Config(e.render().to_string().trim().to_string());
            eprintln!("{}", err.to_json());
            return err.exit_code();
        }
    };
    match execute(&cli.command) {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("{}", err.to_json());
            err.exit_code()
        }
    }
}
