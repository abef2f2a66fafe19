//! `dcfr`: audit predictions, train fair representations, verify the
//! theory suite and run λ sweeps.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;

use dcfr::data::{FairDataset, FairnessMode, RawTable, SchemaSpec};
use dcfr::harness::{emit_results, run_sweep, DatasetRef, SweepConfig, SweepData};
use dcfr::metrics::MetricsReport;
use dcfr::regularizer::Surrogate;
use dcfr::theory::{run_suite, SuiteConfig};
use dcfr::trainer::{fit, predict, Checkpoint, TrainConfig, TrainError};

#[derive(Parser)]
#[command(name = "dcfr", version, about = "Conditional fairness regularization toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Score hard predictions (or a checkpoint) against a labelled CSV.
    Audit(AuditArgs),
    /// Train one model and write checkpoint, trace and test metrics.
    Train(TrainArgs),
    /// Run the randomized theorem checks.
    VerifyTheory(VerifyArgs),
    /// Run a λ sweep described by a TOML file.
    Sweep(SweepArgs),
}

#[derive(Args)]
struct AuditArgs {
    /// Schema TOML describing column roles.
    #[arg(long)]
    schema: PathBuf,
    /// Labelled CSV file.
    #[arg(long)]
    data: PathBuf,
    /// CSV of 0/1 predictions aligned with the retained rows of `--data`;
    /// uses the `pred` column if present, otherwise the first column.
    #[arg(long, conflicts_with = "checkpoint", required_unless_present = "checkpoint")]
    predictions: Option<PathBuf>,
    /// Checkpoint whose predictions are audited instead.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Override the schema's `skip_rows` for this file.
    #[arg(long)]
    skip_rows: Option<usize>,
    /// MetricsReport JSON destination; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-stratum CSV destination.
    #[arg(long)]
    strata_out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Dp,
    Eo,
    Cf,
    LaftrCf,
    Unfair,
}

#[derive(Clone, Copy, ValueEnum)]
enum SurrogateArg {
    L1,
    L2,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    schema: PathBuf,
    #[arg(long)]
    train: PathBuf,
    /// Held-out test CSV; when omitted `--test-fraction` of `--train` is used.
    #[arg(long)]
    test: Option<PathBuf>,
    #[arg(long)]
    test_skip_rows: Option<usize>,
    #[arg(long, default_value_t = 0.2)]
    test_fraction: f64,
    #[arg(long, default_value_t = 0.2)]
    validation_fraction: f64,
    #[arg(long, default_value_t = 0)]
    split_seed: u64,
    /// Starting hyper-parameters (adult, compas or dutch).
    #[arg(long, default_value = "adult")]
    preset: String,
    #[arg(long, value_enum, default_value = "cf")]
    mode: ModeArg,
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    adv_steps: Option<usize>,
    #[arg(long)]
    pred_hidden_units: Option<usize>,
    #[arg(long)]
    adv_hidden_units: Option<usize>,
    #[arg(long)]
    early_stop_patience: Option<usize>,
    #[arg(long)]
    finetune_epochs: Option<usize>,
    #[arg(long, value_enum)]
    surrogate: Option<SurrogateArg>,
    /// Sweep the whole training set each epoch instead of one random batch.
    #[arg(long)]
    full_pass: bool,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    lr: Option<f64>,
    /// Directory receiving checkpoint.json, trace.csv, metrics.json and strata.csv.
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Random joint distributions per structural check.
    #[arg(long)]
    joints: Option<usize>,
    /// Random test functions per bound check.
    #[arg(long)]
    trials: Option<usize>,
    /// Sample size of the weight estimator check.
    #[arg(long)]
    samples: Option<usize>,
}

#[derive(Args)]
struct SweepArgs {
    /// Sweep TOML; relative dataset paths resolve against its directory.
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
    /// Override the configured worker count.
    #[arg(long)]
    workers: Option<usize>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Audit(a) => audit(a),
        Command::Train(a) => train(a),
        Command::VerifyTheory(a) => verify_theory(a),
        Command::Sweep(a) => sweep(a),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn read_predictions(path: &Path) -> Result<Vec<u8>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("reading {}", path.display()))?;
    let mut records = reader.records();
    let mut column = 0;
    let mut out = Vec::new();
    let parse = |field: &str, line: usize| -> Result<u8> {
        match field {
            "0" | "0.0" => Ok(0),
            "1" | "1.0" => Ok(1),
            other => bail!("{}:{line}: prediction '{other}' is not 0 or 1", path.display()),
        }
    };
    if let Some(first) = records.next() {
        let first = first?;
        match first.iter().position(|h| h == "pred") {
            Some(i) => column = i,
            None if first.get(0).is_some_and(|v| v.parse::<f64>().is_ok()) => {
                out.push(parse(&first[0], 1)?)
            }
            None => {}
        }
    }
    for (line, record) in records.enumerate() {
        let record = record?;
        let field = record
            .get(column)
            .with_context(|| format!("{}:{}: missing column {column}", path.display(), line + 2))?;
        out.push(parse(field, line + 2)?);
    }
    Ok(out)
}

fn audit(args: AuditArgs) -> Result<ExitCode> {
    let mut schema = SchemaSpec::from_file(&args.schema)?;
    if let Some(skip) = args.skip_rows {
        schema.skip_rows = skip;
    }
    let raw = RawTable::read(&args.data, &schema)?;
    let (data, pred): (FairDataset, Vec<u8>) = match (&args.predictions, &args.checkpoint) {
        (Some(p), _) => {
            let data = dcfr::data::Encoder::fit(&raw, &schema)?.encode(&raw)?;
            (data, read_predictions(p)?)
        }
        (None, Some(c)) => {
            let checkpoint = Checkpoint::load(c)?;
            let encoder = checkpoint
                .encoder
                .context("checkpoint carries no encoder; it cannot score CSV files")?;
            let data = encoder.encode(&raw)?;
            let pred = predict(&checkpoint.bundle, &data)?.pred;
            (data, pred)
        }
        (None, None) => bail!("either --predictions or --checkpoint is required"),
    };
    if pred.len() != data.len() {
        bail!(
            "{} predictions for {} retained rows ({} rows dropped for missing values)",
            pred.len(),
            data.len(),
            raw.dropped_rows
        );
    }
    info!(
        "audit: {} rows, {} strata, P(S=1)={:.4}",
        data.len(),
        data.strata.len(),
        data.group_count(1) as f64 / data.len() as f64
    );
    let report = MetricsReport::evaluate(&pred, &data)?;
    let json = serde_json::to_string_pretty(&report)?;
    match &args.out {
        Some(path) => write_file(path, &json)?,
        None => println!("{json}"),
    }
    if let Some(path) = &args.strata_out {
        write_file(path, &report.per_stratum_csv())?;
    }
    Ok(ExitCode::SUCCESS)
}

fn train_config(args: &TrainArgs) -> Result<TrainConfig> {
    let mut c = TrainConfig::preset(&args.preset)
        .with_context(|| format!("unknown preset '{}'", args.preset))?;
    let (mode, lambda) = match args.mode {
        ModeArg::Dp => (FairnessMode::Dp, args.lambda),
        ModeArg::Eo => (FairnessMode::Eo, args.lambda),
        ModeArg::Cf => (FairnessMode::Cf, args.lambda),
        ModeArg::LaftrCf => (FairnessMode::LaftrCf, args.lambda),
        ModeArg::Unfair => (FairnessMode::Cf, 0.0),
    };
    c.mode = mode;
    c.lambda = lambda;
    c.seed = args.seed;
    c.full_pass |= args.full_pass;
    c.finetune_epochs = args.finetune_epochs.or(c.finetune_epochs);
    let overrides = [
        (&mut c.epochs, args.epochs),
        (&mut c.batch_size, args.batch_size),
        (&mut c.adv_steps, args.adv_steps),
        (&mut c.pred_hidden_units, args.pred_hidden_units),
        (&mut c.adv_hidden_units, args.adv_hidden_units),
        (&mut c.early_stop_patience, args.early_stop_patience),
    ];
    for (field, value) in overrides {
        if let Some(v) = value {
            *field = v;
        }
    }
    if let Some(s) = args.surrogate {
        c.surrogate = match s {
            SurrogateArg::L1 => Surrogate::L1,
            SurrogateArg::L2 => Surrogate::L2,
        };
    }
    for (field, value) in [
        (&mut c.optimizer.rho, args.rho),
        (&mut c.optimizer.epsilon, args.epsilon),
        (&mut c.optimizer.lr, args.lr),
    ] {
        if let Some(v) = value {
            *field = v;
        }
    }
    c.validate()?;
    Ok(c)
}

fn train(args: TrainArgs) -> Result<ExitCode> {
    let config = train_config(&args)?;
    let dataset = DatasetRef {
        schema: args.schema.clone(),
        train: args.train.clone(),
        test: args.test.clone(),
        test_skip_rows: args.test_skip_rows,
        test_fraction: args.test_fraction,
        validation_fraction: args.validation_fraction,
        split_seed: args.split_seed,
    };
    let (data, encoder) = SweepData::load(&dataset, Path::new("."))?;
    info!(
        "train: {} train / {} validation / {} test rows, {} features",
        data.train.len(),
        data.val.len(),
        data.test.len(),
        data.train.n_features()
    );
    fs::create_dir_all(&args.out_dir).with_context(|| format!("creating {}", args.out_dir.display()))?;
    let outcome = match fit(&data.train, &data.val, &data.test, &config) {
        Ok(o) => o,
        Err(e) => {
            if let TrainError::Diverged { trace, .. } = &e {
                write_file(&args.out_dir.join("trace.csv"), &trace.to_csv())?;
            }
            return Err(e.into());
        }
    };
    let report = outcome.trace.test.clone().expect("fit evaluates the test set");
    Checkpoint::new(config, outcome.bundle, Some(encoder)).save(args.out_dir.join("checkpoint.json"))?;
    write_file(&args.out_dir.join("trace.csv"), &outcome.trace.to_csv())?;
    write_file(&args.out_dir.join("metrics.json"), &serde_json::to_string_pretty(&report)?)?;
    write_file(&args.out_dir.join("strata.csv"), &report.per_stratum_csv())?;
    println!(
        "accuracy {:.4}  delta_dp {:.4}  delta_eo {:.4}  delta_cf {:.4}",
        report.accuracy, report.delta_dp, report.delta_eo, report.delta_cf
    );
    Ok(ExitCode::SUCCESS)
}

fn verify_theory(args: VerifyArgs) -> Result<ExitCode> {
    let defaults = SuiteConfig::default();
    let config = SuiteConfig {
        seed: args.seed,
        joints: args.joints.unwrap_or(defaults.joints),
        trials: args.trials.unwrap_or(defaults.trials),
        samples: args.samples.unwrap_or(defaults.samples),
    };
    let checks = run_suite(&config);
    for c in &checks {
        println!(
            "{} {} ({} cases): {}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.cases,
            c.detail
        );
    }
    Ok(if checks.iter().all(|c| c.passed) {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}

fn sweep(args: SweepArgs) -> Result<ExitCode> {
    let mut config = SweepConfig::from_file(&args.config)?;
    if args.workers.is_some() {
        config.workers = args.workers;
    }
    let dataset = config
        .dataset
        .clone()
        .context("sweep config needs a [dataset] table")?;
    let base_dir = args.config.parent().unwrap_or(Path::new("."));
    let (data, _) = SweepData::load(&dataset, base_dir)?;
    let curves = run_sweep(&data, &config)?;
    let manifest = emit_results(&curves, &config, &args.out_dir)?;
    for curve in &curves {
        for p in &curve.points {
            println!(
                "{:<8} lambda {:<10} acc {:.4}  {:?} {:.4}  ({} ok, {} failed)",
                curve.mode.to_string(),
                p.lambda,
                p.mean_accuracy,
                curve.metric,
                p.mean_delta,
                p.runs.len(),
                p.failed_seeds.len()
            );
        }
    }
    if manifest.dropped.is_empty() {
        Ok(ExitCode::SUCCESS)
    } else {
        for (mode, lambda) in &manifest.dropped {
            eprintln!("no successful seed for {mode} at lambda {lambda}");
        }
        Ok(ExitCode::FAILURE)
    }
}
