//! Two-step adversarial training.
//!
//! Step I alternates, for every sampled mini-batch, one Adadelta update of the
//! encoder `g` and head `k` (adversary frozen) with `adv_steps` updates of the
//! adversary `h` (encoder and head frozen). Step II freezes `g` and `h` and
//! fine-tunes `k` with early stopping on validation accuracy.

use std::path::Path;

use log::{debug, warn};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{compute_weights, AdversaryInput, Encoder, FairDataset, FairnessMode, WeightScheme};
use crate::metrics::{self, MetricError, MetricsReport};
use crate::nn::{
    self, cross_entropy, cross_entropy_grad, Activation, AdadeltaConfig, AdadeltaState, DenseNet,
    Matrix, NnError,
};
use crate::regularizer::{AdversaryBatch, RegularizerError, Surrogate};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("training diverged at epoch {epoch} (lambda={lambda}, seed={seed}): {what}")]
    Diverged {
        epoch: usize,
        lambda: f64,
        seed: u64,
        what: String,
        trace: Box<TrainTrace>,
    },
    #[error("empty {0} set")]
    EmptyData(&'static str),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Regularizer(#[from] RegularizerError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

pub type Result<T> = std::result::Result<T, TrainError>;

fn default_patience() -> usize {
    20
}

/// Hyper-parameters of one training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub mode: FairnessMode,
    pub lambda: f64,
    /// Step I iterations; each draws one random mini-batch unless `full_pass`.
    pub epochs: usize,
    pub batch_size: usize,
    pub adv_steps: usize,
    pub pred_hidden_units: usize,
    pub adv_hidden_units: usize,
    pub seed: u64,
    #[serde(default = "default_patience")]
    pub early_stop_patience: usize,
    /// Step II epoch cap; defaults to `epochs`.
    #[serde(default)]
    pub finetune_epochs: Option<usize>,
    #[serde(default)]
    pub surrogate: Surrogate,
    /// Process the whole training set in shuffled mini-batches per epoch.
    #[serde(default)]
    pub full_pass: bool,
    #[serde(default)]
    pub optimizer: AdadeltaConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self::adult()
    }
}

impl TrainConfig {
    pub fn adult() -> Self {
        Self {
            mode: FairnessMode::Cf,
            lambda: 1.0,
            epochs: 400,
            batch_size: 512,
            adv_steps: 10,
            pred_hidden_units: 60,
            adv_hidden_units: 50,
            seed: 0,
            early_stop_patience: 20,
            finetune_epochs: None,
            surrogate: Surrogate::L2,
            full_pass: false,
            optimizer: AdadeltaConfig::default(),
        }
    }

    pub fn compas() -> Self {
        Self {
            batch_size: 256,
            adv_steps: 5,
            pred_hidden_units: 8,
            adv_hidden_units: 8,
            ..Self::adult()
        }
    }

    pub fn dutch() -> Self {
        Self {
            adv_steps: 5,
            pred_hidden_units: 35,
            adv_hidden_units: 20,
            ..Self::adult()
        }
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name.to_ascii_lowercase().as_str() {
            "adult" => Some(Self::adult()),
            "compas" => Some(Self::compas()),
            "dutch" => Some(Self::dutch()),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("epochs", self.epochs),
            ("batch_size", self.batch_size),
            ("pred_hidden_units", self.pred_hidden_units),
            ("adv_hidden_units", self.adv_hidden_units),
            ("early_stop_patience", self.early_stop_patience),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(TrainError::Config(format!("{name} must be positive")));
            }
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(TrainError::Config(format!(
                "lambda must be finite and >= 0, got {}",
                self.lambda
            )));
        }
        Ok(())
    }

    fn finetune_epochs(&self) -> usize {
        self.finetune_epochs.unwrap_or(self.epochs)
    }
}

/// Encoder, head and adversary with their optimizer states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelBundle {
    /// `g`: `[X, S] → Z` (one ReLU layer).
    pub encoder: DenseNet,
    /// `k`: `Z → P(Y=1)` (logistic).
    pub head: DenseNet,
    /// `h`: `Z ⊕ extra → P(S=1)` (one ReLU layer, logistic output).
    pub adversary: DenseNet,
    pub adversary_input: AdversaryInput,
    pub encoder_opt: AdadeltaState,
    pub head_opt: AdadeltaState,
    pub adversary_opt: AdadeltaState,
}

impl ModelBundle {
    /// Glorot-initialised networks; draws encoder, head then adversary weights.
    pub fn init<R: Rng + ?Sized>(
        n_features: usize,
        adversary_input: AdversaryInput,
        config: &TrainConfig,
        rng: &mut R,
    ) -> Result<Self> {
        let z = config.pred_hidden_units;
        let encoder = DenseNet::glorot(&[n_features + 1, z], &[Activation::Relu], rng)?;
        let head = DenseNet::glorot(&[z, 1], &[Activation::Sigmoid], rng)?;
        let adversary = DenseNet::glorot(
            &[z + adversary_input.extra_dims(), config.adv_hidden_units, 1],
            &[Activation::Relu, Activation::Sigmoid],
            rng,
        )?;
        Ok(Self::from_networks(
            encoder,
            head,
            adversary,
            adversary_input,
            config.optimizer,
        ))
    }

    pub fn from_networks(
        encoder: DenseNet,
        head: DenseNet,
        adversary: DenseNet,
        adversary_input: AdversaryInput,
        optimizer: AdadeltaConfig,
    ) -> Self {
        Self {
            encoder_opt: AdadeltaState::new(&encoder, optimizer),
            head_opt: AdadeltaState::new(&head, optimizer),
            adversary_opt: AdadeltaState::new(&adversary, optimizer),
            encoder,
            head,
            adversary,
            adversary_input,
        }
    }

    pub fn n_features(&self) -> usize {
        self.encoder.input_dim() - 1
    }

    pub fn representation_dim(&self) -> usize {
        self.encoder.output_dim()
    }

    /// Representation `Z = g(X, S)` for the given rows.
    pub fn represent(&self, data: &FairDataset, rows: &[usize]) -> Result<Matrix> {
        Ok(self.encoder.predict(&encoder_input(data, rows)?)?)
    }
}

/// `[X | S]` for the given rows.
fn encoder_input(data: &FairDataset, rows: &[usize]) -> Result<Matrix> {
    let s: Vec<f64> = rows.iter().map(|&i| f64::from(data.s[i])).collect();
    Ok(data.x.select_rows(rows).hstack(&Matrix::column(&s))?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub pred_loss: f64,
    /// Weighted adversary error after its updates on the batch.
    pub adversary_error: f64,
    /// Batch estimate of the adversarial objective (including C).
    pub q_value: f64,
    pub val_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinetuneRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainTrace {
    pub epochs: Vec<EpochRecord>,
    pub finetune: Vec<FinetuneRecord>,
    /// Step II epoch whose head was kept (0 = the head Step I produced).
    pub finetune_best_epoch: usize,
    pub test: Option<MetricsReport>,
}

impl TrainTrace {
    /// One row per Step I epoch followed by one per Step II epoch.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("phase,epoch,pred_loss,adversary_error,q_value,val_accuracy\n");
        for r in &self.epochs {
            out.push_str(&format!(
                "adversarial,{},{},{},{},{}\n",
                r.epoch, r.pred_loss, r.adversary_error, r.q_value, r.val_accuracy
            ));
        }
        for r in &self.finetune {
            out.push_str(&format!(
                "finetune,{},{},,,{}\n",
                r.epoch, r.train_loss, r.val_accuracy
            ));
        }
        out
    }
}

/// Hard and soft predictions.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub prob: Vec<f64>,
    pub pred: Vec<u8>,
}

/// `prob = k(g(X, S))`, `pred = prob >= 0.5`.
pub fn predict(bundle: &ModelBundle, data: &FairDataset) -> Result<Prediction> {
    if data.n_features() != bundle.n_features() {
        return Err(NnError::DimensionMismatch {
            context: "predict features",
            expected: bundle.n_features(),
            found: data.n_features(),
        }
        .into());
    }
    let rows: Vec<usize> = (0..data.len()).collect();
    let z = bundle.represent(data, &rows)?;
    let prob = bundle.head.predict(&z)?.into_vec();
    let pred = prob.iter().map(|&p| u8::from(p >= 0.5)).collect();
    Ok(Prediction { prob, pred })
}

fn accuracy_of(head: &DenseNet, z: &Matrix, y: &[u8]) -> Result<f64> {
    let prob = head.predict(z)?;
    let pred: Vec<u8> = prob.as_slice().iter().map(|&p| u8::from(p >= 0.5)).collect();
    Ok(metrics::accuracy(&pred, y)?)
}

/// Snapshot handed to a Step I observer after every mini-batch.
pub struct StepEvent<'a> {
    pub epoch: usize,
    pub batch: &'a [usize],
    pub bundle: &'a ModelBundle,
    /// Phase that just finished.
    pub phase: StepPhase,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepPhase {
    /// After the encoder/head update.
    Predictor,
    /// After the adversary updates.
    Adversary,
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn batches<R: Rng>(n: usize, config: &TrainConfig, rng: &mut R) -> Vec<Vec<usize>> {
    if config.full_pass {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(rng);
        order.chunks(config.batch_size).map(<[usize]>::to_vec).collect()
    } else {
        vec![(0..config.batch_size).map(|_| rng.random_range(0..n)).collect()]
    }
}

fn diverged(what: String, epoch: usize, config: &TrainConfig, trace: &TrainTrace) -> TrainError {
    TrainError::Diverged {
        epoch,
        lambda: config.lambda,
        seed: config.seed,
        what,
        trace: Box::new(trace.clone()),
    }
}

fn check_finite(
    value: f64,
    what: &str,
    epoch: usize,
    config: &TrainConfig,
    trace: &TrainTrace,
) -> Result<()> {
    if value.is_finite() {
        return Ok(());
    }
    Err(diverged(format!("{what} = {value}"), epoch, config, trace))
}

/// Step I with the weights computed for `config.mode` on `train`.
pub fn train_step1(
    train: &FairDataset,
    val: &FairDataset,
    config: &TrainConfig,
) -> Result<(ModelBundle, TrainTrace)> {
    let scheme = compute_weights(train, config.mode);
    train_step1_observed(train, val, &scheme, config, |_| {})
}

/// Step I with explicit weights and a per-batch observer.
pub fn train_step1_observed<F>(
    train: &FairDataset,
    val: &FairDataset,
    scheme: &WeightScheme,
    config: &TrainConfig,
    mut observer: F,
) -> Result<(ModelBundle, TrainTrace)>
where
    F: FnMut(&StepEvent<'_>),
{
    config.validate()?;
    if train.is_empty() {
        return Err(TrainError::EmptyData("training"));
    }
    if scheme.weights.len() != train.len() {
        return Err(TrainError::Config(format!(
            "{} weights for {} training rows",
            scheme.weights.len(),
            train.len()
        )));
    }
    let mut rng = rng_for(config.seed, 0);
    let mut bundle =
        ModelBundle::init(train.n_features(), scheme.adversary_input, config, &mut rng)?;
    let mut trace = TrainTrace::default();
    let n = train.len();
    let val_rows: Vec<usize> = (0..val.len()).collect();
    let val_input = encoder_input(val, &val_rows)?;

    for epoch in 1..=config.epochs {
        let mut record = EpochRecord {
            epoch,
            pred_loss: 0.0,
            adversary_error: 0.0,
            q_value: 0.0,
            val_accuracy: f64::NAN,
        };
        let epoch_batches = batches(n, config, &mut rng);
        let n_batches = epoch_batches.len() as f64;
        for batch in &epoch_batches {
            let stats =
                match adversarial_batch(&mut bundle, train, scheme, config, batch, &mut observer, epoch) {
                    Err(TrainError::Regularizer(RegularizerError::OutOfRange(v))) if v.is_nan() => {
                        return Err(diverged(format!("adversary output = {v}"), epoch, config, &trace));
                    }
                    other => other?,
                };
            if !stats.finite_gradients {
                check_finite(f64::NAN, "gradient", epoch, config, &trace)?;
            }
            record.pred_loss += stats.pred_loss / n_batches;
            record.q_value += stats.q_value / n_batches;
            record.adversary_error += stats.adversary_error / n_batches;
        }
        check_finite(record.pred_loss, "prediction loss", epoch, config, &trace)?;
        check_finite(record.q_value, "adversarial objective", epoch, config, &trace)?;
        if !val.is_empty() {
            let z = bundle.encoder.predict(&val_input)?;
            record.val_accuracy = accuracy_of(&bundle.head, &z, &val.y)?;
        }
        if epoch % 50 == 0 {
            debug!(
                "epoch {epoch}: loss {:.4} q {:.5} adv {:.5} val {:.4}",
                record.pred_loss, record.q_value, record.adversary_error, record.val_accuracy
            );
        }
        trace.epochs.push(record);
    }
    bundle.encoder.clear_cache();
    bundle.head.clear_cache();
    bundle.adversary.clear_cache();
    Ok((bundle, trace))
}

struct BatchStats {
    pred_loss: f64,
    q_value: f64,
    adversary_error: f64,
    finite_gradients: bool,
}

/// One encoder/head update followed by the adversary updates on `batch`.
fn adversarial_batch<F>(
    bundle: &mut ModelBundle,
    train: &FairDataset,
    scheme: &WeightScheme,
    config: &TrainConfig,
    batch: &[usize],
    observer: &mut F,
    epoch: usize,
) -> Result<BatchStats>
where
    F: FnMut(&StepEvent<'_>),
{
    let b = batch.len();
    // weights scaled so the batch sum estimates the full-data sum
    let scale = train.len() as f64 / b as f64;
    let w: Vec<f64> = batch.iter().map(|&i| scheme.weights[i] * scale).collect();
    let s: Vec<u8> = batch.iter().map(|&i| train.s[i]).collect();
    let y: Vec<u8> = batch.iter().map(|&i| train.y[i]).collect();
    let x = encoder_input(train, batch)?;
    let extra = scheme.adversary_input.features(train, batch);

    // encoder and head step, adversary frozen
    let z = bundle.encoder.forward(&x)?;
    let prob = bundle.head.forward(&z)?;
    let pred_loss = cross_entropy(prob.as_slice(), &y);
    let head_back = bundle.head.backward(&Matrix::column(&cross_entropy_grad(prob.as_slice(), &y)))?;
    let mut dz = head_back.input_grad;

    let adv_in = z.hstack(&extra)?;
    let h = bundle.adversary.forward(&adv_in)?;
    let adv_batch = AdversaryBatch::new(h.as_slice(), &s, &w, scheme.constant)?;
    let q_value = adv_batch.q(config.surrogate);
    if config.lambda != 0.0 {
        let dh = adv_batch.fairness_penalty_grad(config.lambda, config.surrogate);
        let adv_back = bundle.adversary.backward(&Matrix::column(&dh))?;
        let dz_adv = adv_back.input_grad.leading_columns(z.cols());
        for (a, b) in dz.as_mut_slice().iter_mut().zip(dz_adv.as_slice()) {
            *a += b;
        }
    }
    let enc_back = bundle.encoder.backward(&dz)?;
    let mut finite_gradients = enc_back.gradients.is_finite() && head_back.gradients.is_finite();
    bundle.head_opt.step(&mut bundle.head, &head_back.gradients)?;
    bundle.encoder_opt.step(&mut bundle.encoder, &enc_back.gradients)?;
    observer(&StepEvent {
        epoch,
        batch,
        bundle,
        phase: StepPhase::Predictor,
    });

    // adversary steps, encoder and head frozen
    let z = bundle.encoder.predict(&x)?;
    let adv_in = z.hstack(&extra)?;
    let total_w: f64 = w.iter().sum();
    let mut adversary_error = 0.0;
    for _ in 0..config.adv_steps {
        let h = bundle.adversary.forward(&adv_in)?;
        let adv_batch = AdversaryBatch::new(h.as_slice(), &s, &w, scheme.constant)?;
        adversary_error = adv_batch.adversary_loss(config.surrogate);
        if total_w <= 0.0 {
            break;
        }
        // normalised by the batch weight mass so the adversary's step size does
        // not depend on the mode's weight scale
        let grad: Vec<f64> = adv_batch
            .adversary_loss_grad(config.surrogate)
            .into_iter()
            .map(|g| g / total_w)
            .collect();
        let back = bundle.adversary.backward(&Matrix::column(&grad))?;
        finite_gradients &= back.gradients.is_finite();
        bundle.adversary_opt.step(&mut bundle.adversary, &back.gradients)?;
    }
    if config.adv_steps > 0 {
        let h = bundle.adversary.predict(&adv_in)?;
        adversary_error = AdversaryBatch::new(h.as_slice(), &s, &w, scheme.constant)?
            .adversary_loss(config.surrogate);
    }
    observer(&StepEvent {
        epoch,
        batch,
        bundle,
        phase: StepPhase::Adversary,
    });
    Ok(BatchStats {
        pred_loss,
        q_value,
        adversary_error,
        finite_gradients,
    })
}

/// Step II: head-only fine-tuning with early stopping on validation accuracy.
pub fn train_step2(
    mut bundle: ModelBundle,
    train: &FairDataset,
    val: &FairDataset,
    config: &TrainConfig,
) -> Result<(ModelBundle, Vec<FinetuneRecord>, usize)> {
    config.validate()?;
    if val.is_empty() {
        return Err(TrainError::EmptyData("validation"));
    }
    if train.is_empty() {
        return Err(TrainError::EmptyData("training"));
    }
    let mut rng = rng_for(config.seed, 1);
    let train_rows: Vec<usize> = (0..train.len()).collect();
    let val_rows: Vec<usize> = (0..val.len()).collect();
    let z_train = bundle.represent(train, &train_rows)?;
    let z_val = bundle.represent(val, &val_rows)?;

    let mut best_acc = accuracy_of(&bundle.head, &z_val, &val.y)?;
    let mut best_head = bundle.head.clone();
    let mut best_epoch = 0;
    let mut stale = 0;
    let mut records = Vec::new();
    for epoch in 1..=config.finetune_epochs() {
        let mut loss = 0.0;
        let epoch_batches = batches(train.len(), config, &mut rng);
        for batch in &epoch_batches {
            let z = z_train.select_rows(batch);
            let y: Vec<u8> = batch.iter().map(|&i| train.y[i]).collect();
            let prob = bundle.head.forward(&z)?;
            loss += cross_entropy(prob.as_slice(), &y) / epoch_batches.len() as f64;
            let back = bundle.head.backward(&Matrix::column(&cross_entropy_grad(prob.as_slice(), &y)))?;
            bundle.head_opt.step(&mut bundle.head, &back.gradients)?;
        }
        if !loss.is_finite() {
            return Err(TrainError::Diverged {
                epoch,
                lambda: config.lambda,
                seed: config.seed,
                what: format!("fine-tuning loss = {loss}"),
                trace: Box::default(),
            });
        }
        let acc = accuracy_of(&bundle.head, &z_val, &val.y)?;
        records.push(FinetuneRecord {
            epoch,
            train_loss: loss,
            val_accuracy: acc,
        });
        if acc > best_acc {
            best_acc = acc;
            best_head = bundle.head.clone();
            best_epoch = epoch;
            stale = 0;
        } else {
            stale += 1;
            if stale >= config.early_stop_patience {
                break;
            }
        }
    }
    bundle.head = best_head;
    bundle.head.clear_cache();
    Ok((bundle, records, best_epoch))
}

/// Result of a complete run.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub bundle: ModelBundle,
    pub trace: TrainTrace,
}

/// Step I, Step II, then metrics on `test`.
pub fn fit(
    train: &FairDataset,
    val: &FairDataset,
    test: &FairDataset,
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    let (bundle, mut trace) = train_step1(train, val, config)?;
    let (bundle, finetune, best) = train_step2(bundle, train, val, config)?;
    trace.finetune = finetune;
    trace.finetune_best_epoch = best;
    let prediction = predict(&bundle, test)?;
    let report = MetricsReport::evaluate(&prediction.pred, test)?;
    trace.test = Some(report);
    if train.strata.len() > 1 && test.unseen_stratum_rows() > 0 {
        warn!(
            "{} test rows fall in strata unseen during training",
            test.unseen_stratum_rows()
        );
    }
    Ok(TrainOutcome { bundle, trace })
}

const CHECKPOINT_FORMAT: &str = "dcfr-checkpoint";
const CHECKPOINT_VERSION: u32 = 1;

/// Versioned JSON checkpoint of a trained bundle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub config: TrainConfig,
    pub bundle: ModelBundle,
    /// Encoding needed to score new CSV files, when trained from CSV.
    pub encoder: Option<Encoder>,
}

impl Checkpoint {
    pub fn new(config: TrainConfig, bundle: ModelBundle, encoder: Option<Encoder>) -> Self {
        Self {
            format: CHECKPOINT_FORMAT.to_string(),
            version: CHECKPOINT_VERSION,
            config,
            bundle,
            encoder,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string(self).map_err(|e| TrainError::Checkpoint(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| TrainError::Checkpoint(e.to_string()))?;
        let format = value.get("format").and_then(|v| v.as_str());
        let version = value.get("version").and_then(|v| v.as_u64());
        if format != Some(CHECKPOINT_FORMAT) {
            return Err(TrainError::Checkpoint(format!(
                "not a {CHECKPOINT_FORMAT} file (format tag {format:?})"
            )));
        }
        if version != Some(u64::from(CHECKPOINT_VERSION)) {
            return Err(TrainError::Checkpoint(format!(
                "unsupported checkpoint version {version:?}"
            )));
        }
        serde_json::from_value(value).map_err(|e| TrainError::Checkpoint(e.to_string()))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path.as_ref(), self.to_json()?)
            .map_err(|e| TrainError::Checkpoint(format!("{}: {e}", path.as_ref().display())))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| TrainError::Checkpoint(format!("{}: {e}", path.as_ref().display())))?;
        Self::from_json(&text)
    }
}

/// Order-sensitive digest of every network parameter; used by freeze checks.
pub fn parameter_checksum(net: &DenseNet) -> u64 {
    net.flat_parameters()
        .iter()
        .fold(0xcbf2_9ce4_8422_2325u64, |acc, v| {
            (acc ^ v.to_bits()).wrapping_mul(0x0100_0000_01b3)
        })
}

// Re-exported so callers can build zero-initialised heads in tests and tools.
pub use nn::Dense;
