//! λ sweeps over fairness modes and seeds, Pareto fronts and result files.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::data::{DataError, Encoder, FairDataset, FairnessMode, RawTable, SchemaSpec};
use crate::trainer::{fit, TrainConfig, TrainError};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid sweep configuration: {0}")]
    Config(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("toml: {0}")]
    Toml(#[from] toml::de::Error),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Data(#[from] DataError),
}

pub type Result<T> = std::result::Result<T, HarnessError>;

/// A fairness mode to sweep, or the λ=0 baseline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum SweepMode {
    Fair(FairnessMode),
    Unfair,
}

impl SweepMode {
    /// Fairness gap the mode targets; the baseline is scored on ΔCF.
    pub fn metric(self) -> Metric {
        match self {
            SweepMode::Fair(FairnessMode::Dp) => Metric::DeltaDp,
            SweepMode::Fair(FairnessMode::Eo) => Metric::DeltaEo,
            _ => Metric::DeltaCf,
        }
    }
}

impl fmt::Display for SweepMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SweepMode::Fair(m) => write!(f, "{m}"),
            SweepMode::Unfair => f.write_str("unfair"),
        }
    }
}

impl FromStr for SweepMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("unfair") {
            return Ok(SweepMode::Unfair);
        }
        s.parse::<FairnessMode>().map(SweepMode::Fair).map_err(|e| e.to_string())
    }
}

impl TryFrom<String> for SweepMode {
    type Error = String;

    fn try_from(s: String) -> std::result::Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<SweepMode> for String {
    fn from(m: SweepMode) -> Self {
        m.to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Metric {
    DeltaDp,
    DeltaEo,
    DeltaCf,
}

impl Metric {
    pub fn of(self, r: &RunResult) -> f64 {
        match self {
            Metric::DeltaDp => r.delta_dp,
            Metric::DeltaEo => r.delta_eo,
            Metric::DeltaCf => r.delta_cf,
        }
    }
}

/// Data files a sweep reads; resolved by the caller.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetRef {
    pub schema: PathBuf,
    pub train: PathBuf,
    /// Canonical test file; when absent `test_fraction` of `train` is held out.
    #[serde(default)]
    pub test: Option<PathBuf>,
    /// Schema overrides for the test file (e.g. a different `skip_rows`).
    #[serde(default)]
    pub test_skip_rows: Option<usize>,
    #[serde(default = "default_test_fraction")]
    pub test_fraction: f64,
    #[serde(default = "default_validation_fraction")]
    pub validation_fraction: f64,
    #[serde(default)]
    pub split_seed: u64,
}

fn default_test_fraction() -> f64 {
    0.2
}

fn default_validation_fraction() -> f64 {
    0.2
}

/// Ten geometrically spaced values from 0.1 to 20.
pub fn default_lambdas() -> Vec<f64> {
    geometric_grid(0.1, 20.0, 10)
}

pub fn geometric_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|i| {
                if i == n - 1 {
                    hi
                } else {
                    lo * (hi / lo).powf(i as f64 / (n - 1) as f64)
                }
            })
            .collect(),
    }
}

fn default_seeds() -> Vec<u64> {
    (0..5).collect()
}

fn default_modes() -> Vec<SweepMode> {
    vec![
        SweepMode::Unfair,
        SweepMode::Fair(FairnessMode::Dp),
        SweepMode::Fair(FairnessMode::Eo),
        SweepMode::Fair(FairnessMode::Cf),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default)]
    pub dataset: Option<DatasetRef>,
    #[serde(default = "default_modes")]
    pub modes: Vec<SweepMode>,
    #[serde(default = "default_lambdas")]
    pub lambdas: Vec<f64>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    /// Training settings shared by every run; `mode`, `lambda` and `seed`
    /// are overridden per run.
    #[serde(default)]
    pub base: TrainConfig,
    /// Worker threads; defaults to the available parallelism.
    #[serde(default)]
    pub workers: Option<usize>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            dataset: None,
            modes: default_modes(),
            lambdas: default_lambdas(),
            seeds: default_seeds(),
            base: TrainConfig::default(),
            workers: None,
        }
    }
}

impl SweepConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| HarnessError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(HarnessError::Config("at least one seed is required".into()));
        }
        if self.modes.is_empty() {
            return Err(HarnessError::Config("at least one mode is required".into()));
        }
        if let Some(l) = self.lambdas.iter().find(|l| !(l.is_finite() && **l >= 0.0)) {
            return Err(HarnessError::Config(format!("lambda {l} must be finite and >= 0")));
        }
        if self.workers == Some(0) {
            return Err(HarnessError::Config("workers must be positive".into()));
        }
        self.base.validate()?;
        Ok(())
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serialises");
        hex::encode(Sha256::digest(json.as_bytes()))
    }

    /// λ values actually run for a mode; the baseline only runs λ=0.
    pub fn lambdas_for(&self, mode: SweepMode) -> Vec<f64> {
        match mode {
            SweepMode::Unfair => vec![0.0],
            SweepMode::Fair(_) => self.lambdas.clone(),
        }
    }
}

/// Train/validation/test parts shared by every run of a sweep.
#[derive(Debug, Clone)]
pub struct SweepData {
    pub train: FairDataset,
    pub val: FairDataset,
    pub test: FairDataset,
}

impl SweepData {
    /// Loads the files named by `dataset`, resolving relative paths against
    /// `base_dir`. The encoding is fitted on the training file.
    pub fn load(dataset: &DatasetRef, base_dir: &Path) -> Result<(Self, Encoder)> {
        let resolve = |p: &Path| if p.is_absolute() { p.to_path_buf() } else { base_dir.join(p) };
        let schema = SchemaSpec::from_file(resolve(&dataset.schema))?;
        let train_raw = RawTable::read(resolve(&dataset.train), &schema)?;
        let encoder = Encoder::fit(&train_raw, &schema)?;
        let full = encoder.encode(&train_raw)?;
        let (fit_part, test) = match &dataset.test {
            Some(test_path) => {
                let mut test_schema = schema.clone();
                if let Some(skip) = dataset.test_skip_rows {
                    test_schema.skip_rows = skip;
                }
                let test_raw = RawTable::read(resolve(test_path), &test_schema)?;
                (full, encoder.encode(&test_raw)?)
            }
            None => {
                let mut parts = full.split(&[1.0 - dataset.test_fraction, dataset.test_fraction], dataset.split_seed)?;
                let test = parts.pop().expect("two parts");
                (parts.pop().expect("two parts"), test)
            }
        };
        let (train, val) = fit_part.train_validation_split(dataset.validation_fraction, dataset.split_seed)?;
        Ok((Self { train, val, test }, encoder))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub seed: u64,
    pub accuracy: f64,
    pub delta_dp: f64,
    pub delta_eo: f64,
    pub delta_cf: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub lambda: f64,
    pub mean_accuracy: f64,
    /// Mean of the mode's own gap.
    pub mean_delta: f64,
    pub mean_delta_dp: f64,
    pub mean_delta_eo: f64,
    pub mean_delta_cf: f64,
    /// Successful runs, ordered by seed.
    pub runs: Vec<RunResult>,
    /// Seeds whose run diverged or failed.
    pub failed_seeds: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradeoffCurve {
    pub mode: SweepMode,
    pub metric: Metric,
    /// Ordered by λ as configured.
    pub points: Vec<SweepPoint>,
    /// Indices into `points`, sorted by gap ascending.
    pub pareto: Vec<usize>,
    /// λ values where every seed failed.
    pub dropped_lambdas: Vec<f64>,
}

impl TradeoffCurve {
    pub fn pareto_points(&self) -> impl Iterator<Item = &SweepPoint> {
        self.pareto.iter().map(|&i| &self.points[i])
    }
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    sum / n as f64
}

/// Averages runs in seed order so the result does not depend on the order
/// runs completed in.
pub fn aggregate(lambda: f64, metric: Metric, mut runs: Vec<RunResult>, mut failed: Vec<u64>) -> Option<SweepPoint> {
    runs.sort_by_key(|r| r.seed);
    failed.sort_unstable();
    if runs.is_empty() {
        return None;
    }
    Some(SweepPoint {
        lambda,
        mean_accuracy: mean(runs.iter().map(|r| r.accuracy)),
        mean_delta: mean(runs.iter().map(|r| metric.of(r))),
        mean_delta_dp: mean(runs.iter().map(|r| r.delta_dp)),
        mean_delta_eo: mean(runs.iter().map(|r| r.delta_eo)),
        mean_delta_cf: mean(runs.iter().map(|r| r.delta_cf)),
        runs,
        failed_seeds: failed,
    })
}

/// True when `a` weakly dominates `b` with one strict inequality under
/// (accuracy ↑, gap ↓).
pub fn dominates(a: (f64, f64), b: (f64, f64)) -> bool {
    a.0 >= b.0 && a.1 <= b.1 && (a.0 > b.0 || a.1 < b.1)
}

/// Nondominated `(accuracy, gap)` points, sorted by gap ascending. Exact
/// duplicates keep only the earliest index.
pub fn pareto_front(points: &[(f64, f64)]) -> Vec<usize> {
    let mut front: Vec<usize> = (0..points.len())
        .filter(|&i| {
            points.iter().enumerate().all(|(j, &p)| {
                if dominates(p, points[i]) {
                    return false;
                }
                // identical point with a smaller index wins
                !(j < i && p == points[i])
            })
        })
        .collect();
    front.sort_by(|&a, &b| {
        points[a]
            .1
            .total_cmp(&points[b].1)
            .then(points[b].0.total_cmp(&points[a].0))
            .then(a.cmp(&b))
    });
    front
}

#[derive(Debug, Clone)]
struct Task {
    mode: SweepMode,
    lambda: f64,
    seed: u64,
}

fn run_one(data: &SweepData, base: &TrainConfig, task: &Task) -> std::result::Result<RunResult, TrainError> {
    let config = TrainConfig {
        mode: match task.mode {
            SweepMode::Fair(m) => m,
            SweepMode::Unfair => base.mode,
        },
        lambda: task.lambda,
        seed: task.seed,
        ..base.clone()
    };
    let outcome = fit(&data.train, &data.val, &data.test, &config)?;
    let report = outcome.trace.test.expect("fit evaluates the test set");
    Ok(RunResult {
        seed: task.seed,
        accuracy: report.accuracy,
        delta_dp: report.delta_dp,
        delta_eo: report.delta_eo,
        delta_cf: report.delta_cf,
    })
}

/// Trains every (mode, λ, seed) combination on a bounded worker pool and
/// aggregates per-λ means over successful seeds.
pub fn run_sweep(data: &SweepData, config: &SweepConfig) -> Result<Vec<TradeoffCurve>> {
    config.validate()?;
    let mut tasks = Vec::new();
    for &mode in &config.modes {
        for lambda in config.lambdas_for(mode) {
            for &seed in &config.seeds {
                tasks.push(Task { mode, lambda, seed });
            }
        }
    }
    let workers = config.workers.unwrap_or_else(|| {
        std::thread::available_parallelism().map_or(1, usize::from)
    });
    info!("sweep: {} runs on {workers} workers", tasks.len());
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| HarnessError::Config(format!("worker pool: {e}")))?;
    let results: Vec<std::result::Result<RunResult, TrainError>> =
        pool.install(|| tasks.par_iter().map(|t| run_one(data, &config.base, t)).collect());

    let mut curves = Vec::new();
    let mut results = tasks.iter().zip(results);
    for &mode in &config.modes {
        let metric = mode.metric();
        let mut points = Vec::new();
        let mut dropped = Vec::new();
        for lambda in config.lambdas_for(mode) {
            let mut runs = Vec::new();
            let mut failed = Vec::new();
            for _ in &config.seeds {
                let (task, result) = results.next().expect("one result per task");
                match result {
                    Ok(r) => runs.push(r),
                    Err(e) => {
                        warn!("{mode} lambda={lambda} seed={}: {e}; excluded from means", task.seed);
                        failed.push(task.seed);
                    }
                }
            }
            match aggregate(lambda, metric, runs, failed) {
                Some(p) => points.push(p),
                None => {
                    warn!("{mode} lambda={lambda}: every seed failed; point dropped");
                    dropped.push(lambda);
                }
            }
        }
        let coords: Vec<(f64, f64)> = points.iter().map(|p| (p.mean_accuracy, p.mean_delta)).collect();
        curves.push(TradeoffCurve {
            mode,
            metric,
            pareto: if coords.is_empty() { Vec::new() } else { pareto_front(&coords) },
            points,
            dropped_lambdas: dropped,
        });
    }
    Ok(curves)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config_hash: String,
    pub seeds: Vec<u64>,
    pub lambdas: Vec<f64>,
    pub modes: Vec<SweepMode>,
    pub package: String,
    pub version: String,
    pub files: Vec<String>,
    /// Requested (mode, λ) points with no successful seed.
    pub dropped: Vec<(SweepMode, f64)>,
    pub config: SweepConfig,
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// `lambda,seed,accuracy,delta_dp,delta_eo,delta_cf`, one row per successful run.
pub fn raw_csv(curve: &TradeoffCurve) -> String {
    let mut out = String::from("lambda,seed,accuracy,delta_dp,delta_eo,delta_cf\n");
    for p in &curve.points {
        for r in &p.runs {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                p.lambda, r.seed, r.accuracy, r.delta_dp, r.delta_eo, r.delta_cf
            ));
        }
    }
    out
}

fn point_row(p: &SweepPoint) -> String {
    format!(
        "{},{},{},{},{},{},{},{}\n",
        p.lambda,
        p.runs.len(),
        p.failed_seeds.len(),
        p.mean_accuracy,
        p.mean_delta,
        p.mean_delta_dp,
        p.mean_delta_eo,
        p.mean_delta_cf
    )
}

const POINT_HEADER: &str =
    "lambda,successes,failures,mean_accuracy,mean_delta,mean_delta_dp,mean_delta_eo,mean_delta_cf\n";

/// Per-λ means in configured λ order.
pub fn aggregated_csv(curve: &TradeoffCurve) -> String {
    let mut out = String::from(POINT_HEADER);
    curve.points.iter().for_each(|p| out.push_str(&point_row(p)));
    out
}

/// Pareto points sorted by gap ascending.
pub fn pareto_csv(curve: &TradeoffCurve) -> String {
    let mut out = String::from(POINT_HEADER);
    curve.pareto_points().for_each(|p| out.push_str(&point_row(p)));
    out
}

/// Writes `<mode>_raw.csv`, `<mode>_aggregated.csv`, `<mode>_pareto.csv` per
/// curve and `manifest.json`.
pub fn emit_results(curves: &[TradeoffCurve], config: &SweepConfig, out_dir: impl AsRef<Path>) -> Result<Manifest> {
    let out_dir = out_dir.as_ref();
    fs::create_dir_all(out_dir).map_err(|source| HarnessError::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;
    if curves.is_empty() {
        warn!("no curves to write; emitting manifest only");
    }
    let mut files = Vec::new();
    for curve in curves {
        for (suffix, body) in [
            ("raw", raw_csv(curve)),
            ("aggregated", aggregated_csv(curve)),
            ("pareto", pareto_csv(curve)),
        ] {
            let name = format!("{}_{suffix}.csv", curve.mode);
            write(&out_dir.join(&name), &body)?;
            files.push(name);
        }
    }
    let manifest = Manifest {
        config_hash: config.hash(),
        seeds: config.seeds.clone(),
        lambdas: config.lambdas.clone(),
        modes: config.modes.clone(),
        package: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        files,
        dropped: curves
            .iter()
            .flat_map(|c| c.dropped_lambdas.iter().map(move |&l| (c.mode, l)))
            .collect(),
        config: config.clone(),
    };
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serialises");
    write(&out_dir.join("manifest.json"), &json)?;
    Ok(manifest)
}
