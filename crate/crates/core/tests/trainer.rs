use dcfr::data::{compute_weights, AdversaryInput, FairDataset, FairnessMode};
use dcfr::nn::{cross_entropy, Activation, AdadeltaConfig, Dense, DenseNet, Matrix};
use dcfr::synthetic::{admission, leaky_sensitive, AdmissionParams};
use dcfr::trainer::{
    fit, predict, train_step1, train_step1_observed, train_step2, ModelBundle, StepPhase, TrainConfig,
};

fn small_config(mode: FairnessMode, lambda: f64, seed: u64, epochs: usize) -> TrainConfig {
    TrainConfig {
        mode,
        lambda,
        seed,
        epochs,
        ..TrainConfig::compas()
    }
}

#[test]
fn large_lambda_beats_unfair_on_admission_for_every_seed() {
    for seed in 0..5 {
        let data = admission(&AdmissionParams::default(), 5000, 100 + seed);
        let parts = data.split(&[0.4, 0.2, 0.4], seed).unwrap();
        let (train, val, test) = (&parts[0], &parts[1], &parts[2]);
        let unfair = fit(train, val, test, &small_config(FairnessMode::Cf, 0.0, seed, 2000)).unwrap();
        let fair = fit(train, val, test, &small_config(FairnessMode::Cf, 10.0, seed, 2000)).unwrap();
        let (u, f) = (
            unfair.trace.test.unwrap().delta_cf,
            fair.trace.test.unwrap().delta_cf,
        );
        assert!(f < u, "seed {seed}: fair {f} vs unfair {u}");
    }
}

fn adversary_accuracy(bundle: &ModelBundle, data: &FairDataset) -> f64 {
    let rows: Vec<usize> = (0..data.len()).collect();
    let z = bundle.represent(data, &rows).unwrap();
    let prob = bundle.adversary.predict(&z).unwrap();
    let hits = prob
        .as_slice()
        .iter()
        .zip(&data.s)
        .filter(|(&p, &s)| u8::from(p >= 0.5) == s)
        .count();
    hits as f64 / data.len() as f64
}

#[test]
fn adversary_loses_track_of_a_copied_sensitive_column() {
    let p_s = 0.3;
    let train = leaky_sensitive(3000, p_s, 1);
    let val = leaky_sensitive(500, p_s, 2);
    let held = leaky_sensitive(2000, p_s, 3);
    let config = small_config(FairnessMode::Dp, 10.0, 0, 1500);
    let scheme = compute_weights(&train, FairnessMode::Dp);
    let mut history = Vec::new();
    train_step1_observed(&train, &val, &scheme, &config, |e| {
        if e.phase == StepPhase::Adversary && e.epoch % 10 == 0 {
            history.push(adversary_accuracy(e.bundle, &held));
        }
    })
    .unwrap();
    let early = history[..15].iter().cloned().fold(0.0, f64::max);
    let tail = &history[history.len() - 15..];
    let late = tail.iter().sum::<f64>() / tail.len() as f64;
    let majority = 1.0 - p_s;
    assert!(early > 0.95, "early adversary accuracy {early}");
    assert!(late < majority + 0.05, "late adversary accuracy {late}, majority {majority}");
}

/// Dataset whose single feature has sign equal to `y`, or opposite when `flip`.
fn signed(n: usize, flip: bool) -> FairDataset {
    let y: Vec<u8> = (0..n).map(|i| (i % 2) as u8).collect();
    let s: Vec<u8> = (0..n).map(|i| ((i / 2) % 2) as u8).collect();
    let x: Vec<f64> = (0..n)
        .map(|i| {
            let magnitude = 0.5 + (i % 7) as f64 / 7.0;
            let positive = (y[i] == 1) != flip;
            if positive { magnitude } else { -magnitude }
        })
        .collect();
    FairDataset::from_parts(s, y, vec![0; n], Matrix::from_vec(n, 1, x).unwrap()).unwrap()
}

/// Encoder mapping `[x, s]` to `[relu(x), relu(-x)]` and a zero head.
fn separable_bundle() -> ModelBundle {
    let mut layer = Dense::zeros(2, 2, Activation::Relu);
    layer.weights = vec![1.0, 0.0, -1.0, 0.0];
    let encoder = DenseNet::new(vec![layer]).unwrap();
    let head = DenseNet::new(vec![Dense::zeros(2, 1, Activation::Sigmoid)]).unwrap();
    let adversary = DenseNet::new(vec![
        Dense::zeros(2, 2, Activation::Relu),
        Dense::zeros(2, 1, Activation::Sigmoid),
    ])
    .unwrap();
    ModelBundle::from_networks(encoder, head, adversary, AdversaryInput::Representation, AdadeltaConfig::default())
}

fn finetune_config() -> TrainConfig {
    TrainConfig {
        epochs: 2000,
        batch_size: 64,
        early_stop_patience: 20,
        ..small_config(FairnessMode::Cf, 0.0, 0, 2000)
    }
}

#[test]
fn separable_head_reaches_full_accuracy_then_stops() {
    let train = signed(200, false);
    let val = signed(100, false);
    let config = finetune_config();
    let (bundle, records, best) = train_step2(separable_bundle(), &train, &val, &config).unwrap();
    assert!(best > 0);
    assert_eq!(records[best - 1].val_accuracy, 1.0);
    assert_eq!(records.len(), best + config.early_stop_patience);
    let pred = predict(&bundle, &val).unwrap().pred;
    assert_eq!(pred, val.y);
}

#[test]
fn validation_that_never_improves_keeps_the_initial_head() {
    let train = signed(200, false);
    let val = signed(100, true);
    let config = finetune_config();
    let start = separable_bundle();
    let (bundle, records, best) = train_step2(start.clone(), &train, &val, &config).unwrap();
    assert_eq!(best, 0);
    assert_eq!(records.len(), config.early_stop_patience);
    // the zero head predicts 1 everywhere, i.e. half of the balanced validation set
    assert!(records.iter().all(|r| r.val_accuracy < 0.5));
    assert_eq!(bundle.head, start.head);
}

fn train_cross_entropy(bundle: &ModelBundle, data: &FairDataset) -> f64 {
    cross_entropy(&predict(bundle, data).unwrap().prob, &data.y)
}

#[test]
fn finetuning_cannot_beat_converged_joint_training() {
    for seed in 0..5 {
        let data = admission(&AdmissionParams::default(), 1500, 40 + seed);
        let (train, val) = data.train_validation_split(0.2, seed).unwrap();
        let config = TrainConfig {
            batch_size: 1200,
            ..small_config(FairnessMode::Cf, 0.0, seed, 4000)
        };
        let (bundle, _) = train_step1(&train, &val, &config).unwrap();
        let before = train_cross_entropy(&bundle, &train);
        let (tuned, records, _) = train_step2(bundle, &train, &val, &config).unwrap();
        let after = train_cross_entropy(&tuned, &train);
        let lowest = records.iter().map(|r| r.train_loss).fold(f64::INFINITY, f64::min);
        assert!(after > before - 0.01, "seed {seed}: {before} -> {after}");
        assert!(lowest > before - 0.05, "seed {seed}: {before} -> batch low {lowest}");
    }
}
