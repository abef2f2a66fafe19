use std::fmt;
use std::str::FromStr;

use log::warn;
use serde::{Deserialize, Serialize};

use super::FairDataset;
use crate::nn::Matrix;

/// Fairness target of the adversary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FairnessMode {
    /// Demographic parity: condition on nothing.
    Dp,
    /// Equalized odds: condition on the outcome.
    Eo,
    /// Conditional fairness: condition on the fair-variable stratum.
    Cf,
    /// LAFTR-style weighting `1 / |D(F=f, S=s)|` conditioned on strata.
    LaftrCf,
}

impl FairnessMode {
    pub const ALL: [FairnessMode; 4] = [
        FairnessMode::Dp,
        FairnessMode::Eo,
        FairnessMode::Cf,
        FairnessMode::LaftrCf,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FairnessMode::Dp => "dp",
            FairnessMode::Eo => "eo",
            FairnessMode::Cf => "cf",
            FairnessMode::LaftrCf => "laftr-cf",
        }
    }
}

impl fmt::Display for FairnessMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FairnessMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "dp" => Ok(FairnessMode::Dp),
            "eo" => Ok(FairnessMode::Eo),
            "cf" => Ok(FairnessMode::Cf),
            "laftr-cf" | "laftr_cf" => Ok(FairnessMode::LaftrCf),
            other => Err(format!("unknown fairness mode '{other}'")),
        }
    }
}

/// What the adversary sees besides the representation Z.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AdversaryInput {
    /// Z only.
    Representation,
    /// Z ⊕ onehot(Y).
    WithOutcome,
    /// Z ⊕ onehot(F) over the given number of training strata.
    WithStratum(usize),
}

impl AdversaryInput {
    pub fn extra_dims(self) -> usize {
        match self {
            AdversaryInput::Representation => 0,
            AdversaryInput::WithOutcome => 2,
            AdversaryInput::WithStratum(k) => k,
        }
    }

    /// Extra adversary columns for the given rows. Strata outside the training
    /// vocabulary encode as all-zero.
    pub fn features(self, data: &FairDataset, rows: &[usize]) -> Matrix {
        let width = self.extra_dims();
        let mut out = Matrix::zeros(rows.len(), width);
        for (r, &i) in rows.iter().enumerate() {
            match self {
                AdversaryInput::Representation => {}
                AdversaryInput::WithOutcome => out.set(r, data.y[i] as usize, 1.0),
                AdversaryInput::WithStratum(k) => {
                    if data.f_id[i] < k {
                        out.set(r, data.f_id[i], 1.0);
                    }
                }
            }
        }
        out
    }
}

/// Per-sample adversary weights for one fairness mode, plus the constant C.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightScheme {
    pub mode: FairnessMode,
    pub weights: Vec<f64>,
    pub adversary_input: AdversaryInput,
    /// Parameter-free offset of Q; equals the S=1 weight mass.
    pub constant: f64,
}

impl WeightScheme {
    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// Counts `|D(S=s, G=g)|` for a conditioning variable G with `levels` values.
fn cell_counts(s: &[u8], g: &[usize], levels: usize) -> Vec<[usize; 2]> {
    let mut counts = vec![[0usize; 2]; levels];
    for (&si, &gi) in s.iter().zip(g) {
        counts[gi][si as usize] += 1;
    }
    counts
}

/// `w_i = |D(S=1-S_i, G=G_i)| / (N·|D(G=G_i)|)`, zero in single-group cells.
fn conditional_weights(s: &[u8], g: &[usize], levels: usize) -> Vec<f64> {
    let n = s.len() as f64;
    let counts = cell_counts(s, g, levels);
    s.iter()
        .zip(g)
        .map(|(&si, &gi)| {
            let cell = counts[gi];
            let other = cell[1 - si as usize] as f64;
            other / (n * (cell[0] + cell[1]) as f64)
        })
        .collect()
}

fn warn_incomplete(mode: FairnessMode, counts: &[[usize; 2]], what: &str) {
    let incomplete: Vec<usize> = counts
        .iter()
        .enumerate()
        .filter(|(_, c)| (c[0] == 0) != (c[1] == 0))
        .map(|(i, _)| i)
        .collect();
    if !incomplete.is_empty() {
        warn!(
            "{mode}: {what} {incomplete:?} contain only one sensitive group; their rows get weight 0"
        );
    }
}

/// Number of conditioning levels for CF: the training stratum vocabulary.
fn stratum_levels(train: &FairDataset) -> usize {
    train.strata.len()
}

/// Per-sample adversary weights estimated from training counts.
pub fn compute_weights(train: &FairDataset, mode: FairnessMode) -> WeightScheme {
    let s = &train.s;
    let (weights, adversary_input) = match mode {
        FairnessMode::Cf => {
            let levels = stratum_levels(train);
            warn_incomplete(mode, &cell_counts(s, &train.f_id, levels), "strata");
            // a single stratum carries no information, so the adversary input reduces to Z
            let known = train.strata.known();
            let input = if known > 1 {
                AdversaryInput::WithStratum(known)
            } else {
                AdversaryInput::Representation
            };
            (conditional_weights(s, &train.f_id, levels), input)
        }
        FairnessMode::Eo => {
            let g: Vec<usize> = train.y.iter().map(|&y| y as usize).collect();
            warn_incomplete(mode, &cell_counts(s, &g, 2), "outcome classes");
            (conditional_weights(s, &g, 2), AdversaryInput::WithOutcome)
        }
        FairnessMode::Dp => {
            let n1 = train.group_count(1);
            let n0 = train.len() - n1;
            let weights = if n0 == 0 || n1 == 0 {
                warn!("dp: only one sensitive group present; all weights are 0");
                vec![0.0; train.len()]
            } else {
                s.iter()
                    .map(|&si| 1.0 / if si == 1 { n1 } else { n0 } as f64)
                    .collect()
            };
            (weights, AdversaryInput::Representation)
        }
        FairnessMode::LaftrCf => {
            let counts = cell_counts(s, &train.f_id, stratum_levels(train));
            warn_incomplete(mode, &counts, "strata");
            let weights = s
                .iter()
                .zip(&train.f_id)
                .map(|(&si, &fi)| {
                    let cell = counts[fi];
                    if cell[0] == 0 || cell[1] == 0 {
                        0.0
                    } else {
                        1.0 / cell[si as usize] as f64
                    }
                })
                .collect();
            (weights, AdversaryInput::Representation)
        }
    };
    WeightScheme {
        mode,
        weights,
        adversary_input,
        constant: constant_c(train, mode),
    }
}

/// Empirical constant C of the weighted-L1 form of Q, on the same scale as the
/// mode's weights.
///
/// CF: `(1/N) Σ_i 1(S_i=1)·|D(S=0,F=F_i)| / |D(F=F_i)|`; EO conditions on Y
/// instead. DP uses the scaled weights `1/|D(S=s)|`, giving `a·p(1-p) = 1`
/// when both groups are present. LAFTR-CF gives the number of strata holding
/// both groups.
pub fn constant_c(train: &FairDataset, mode: FairnessMode) -> f64 {
    let n = train.len() as f64;
    let conditional = |g: &[usize], levels: usize| -> f64 {
        let counts = cell_counts(&train.s, g, levels);
        train
            .s
            .iter()
            .zip(g)
            .filter(|(&si, _)| si == 1)
            .map(|(_, &gi)| counts[gi][0] as f64 / (counts[gi][0] + counts[gi][1]) as f64)
            .sum::<f64>()
            / n
    };
    match mode {
        FairnessMode::Cf => conditional(&train.f_id, stratum_levels(train)),
        FairnessMode::Eo => {
            let g: Vec<usize> = train.y.iter().map(|&y| y as usize).collect();
            conditional(&g, 2)
        }
        FairnessMode::Dp => {
            if train.group_count(0) > 0 && train.group_count(1) > 0 {
                1.0
            } else {
                0.0
            }
        }
        FairnessMode::LaftrCf => {
            let counts = cell_counts(&train.s, &train.f_id, stratum_levels(train));
            counts.iter().filter(|c| c[0] > 0 && c[1] > 0).count() as f64
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Matrix;
    use proptest::prelude::*;

    fn dataset(s: Vec<u8>, y: Vec<u8>, f: Vec<usize>) -> FairDataset {
        let n = s.len();
        FairDataset::from_parts(s, y, f, Matrix::zeros(n, 1)).unwrap()
    }

    #[test]
    fn balanced_cf_weights() {
        let d = dataset(vec![0, 1, 0, 1], vec![0, 0, 1, 1], vec![0, 0, 1, 1]);
        let w = compute_weights(&d, FairnessMode::Cf);
        assert!(w.weights.iter().all(|&v| (v - 0.125).abs() < 1e-15));
        assert_eq!(w.adversary_input, AdversaryInput::WithStratum(2));
        assert!((constant_c(&d, FairnessMode::Cf) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn dp_weights_by_group_size() {
        let d = dataset(vec![0, 0, 0, 1], vec![0; 4], vec![0; 4]);
        let w = compute_weights(&d, FairnessMode::Dp);
        let third = 1.0 / 3.0;
        assert_eq!(w.weights, vec![third, third, third, 1.0]);
        assert_eq!(w.adversary_input, AdversaryInput::Representation);
    }

    #[test]
    fn single_group_stratum_gets_zero_weight() {
        let d = dataset(vec![1, 1, 0, 1], vec![0; 4], vec![0, 0, 1, 1]);
        for mode in [FairnessMode::Cf, FairnessMode::LaftrCf] {
            let w = compute_weights(&d, mode);
            assert_eq!(&w.weights[..2], &[0.0, 0.0], "{mode}");
            assert!(w.weights[2] > 0.0 && w.weights[3] > 0.0);
        }
    }

    #[test]
    fn constant_edge_cases() {
        let all_zero = dataset(vec![0; 5], vec![1, 0, 1, 0, 1], vec![0, 1, 0, 1, 0]);
        assert_eq!(constant_c(&all_zero, FairnessMode::Cf), 0.0);
        assert_eq!(constant_c(&all_zero, FairnessMode::Dp), 0.0);
        // constant F: C = p(1-p) with p = P(S=1) = 3/8
        let s = vec![1, 1, 1, 0, 0, 0, 0, 0];
        let d = dataset(s, vec![0; 8], vec![0; 8]);
        let p = 3.0 / 8.0;
        assert!((constant_c(&d, FairnessMode::Cf) - p * (1.0 - p)).abs() < 1e-15);
        assert_eq!(constant_c(&d, FairnessMode::Dp), 1.0);
    }

    #[test]
    fn eo_adds_outcome_input() {
        let d = dataset(vec![0, 1, 0, 1], vec![0, 0, 1, 1], vec![0; 4]);
        let w = compute_weights(&d, FairnessMode::Eo);
        assert_eq!(w.adversary_input.extra_dims(), 2);
        let feats = w.adversary_input.features(&d, &[0, 3]);
        assert_eq!(feats.as_slice(), &[1.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn laftr_constant_counts_complete_strata() {
        let d = dataset(vec![0, 1, 0, 1, 1], vec![0; 5], vec![0, 0, 1, 1, 2]);
        assert_eq!(constant_c(&d, FairnessMode::LaftrCf), 2.0);
        let w = compute_weights(&d, FairnessMode::LaftrCf);
        let mass1: f64 = w.weights.iter().zip(&d.s).filter(|(_, &s)| s == 1).map(|(w, _)| w).sum();
        assert!((mass1 - w.constant).abs() < 1e-12);
    }

    #[test]
    fn mode_parsing() {
        for m in FairnessMode::ALL {
            assert_eq!(m.as_str().parse::<FairnessMode>().unwrap(), m);
        }
        assert!("xx".parse::<FairnessMode>().is_err());
    }

    fn rows() -> impl Strategy<Value = Vec<(u8, u8, usize)>> {
        prop::collection::vec((0u8..2, 0u8..2, 0usize..4), 4..60)
    }

    fn complete(d: &FairDataset) -> bool {
        (0..d.strata.len()).all(|f| d.strata.total(f) == 0 || d.strata.is_complete(f))
    }

    proptest! {
        #[test]
        fn cf_group_masses_balance(r in rows()) {
            let d = dataset(
                r.iter().map(|t| t.0).collect(),
                r.iter().map(|t| t.1).collect(),
                r.iter().map(|t| t.2).collect(),
            );
            prop_assume!(complete(&d));
            let w = compute_weights(&d, FairnessMode::Cf);
            let (mut m0, mut m1) = (0.0, 0.0);
            for (wi, &si) in w.weights.iter().zip(&d.s) {
                if si == 1 { m1 += wi } else { m0 += wi }
            }
            prop_assert!((m1 - m0).abs() < 1e-12);
            prop_assert!((m1 - w.constant).abs() < 1e-12);
        }

        #[test]
        fn constant_f_reduces_to_scaled_dp(r in rows()) {
            let d = dataset(
                r.iter().map(|t| t.0).collect(),
                r.iter().map(|t| t.1).collect(),
                vec![0; r.len()],
            );
            let (n0, n1) = (d.group_count(0) as f64, d.group_count(1) as f64);
            prop_assume!(n0 > 0.0 && n1 > 0.0);
            let n = d.len() as f64;
            let a = n * n / (n0 * n1);
            let cf = compute_weights(&d, FairnessMode::Cf);
            let dp = compute_weights(&d, FairnessMode::Dp);
            for (c, p) in cf.weights.iter().zip(&dp.weights) {
                prop_assert!((a * c - p).abs() < 1e-12);
            }
            prop_assert!((a * cf.constant - dp.constant).abs() < 1e-12);
        }

        #[test]
        fn f_equal_y_reduces_to_eo(r in rows()) {
            let y: Vec<u8> = r.iter().map(|t| t.1).collect();
            let d = dataset(
                r.iter().map(|t| t.0).collect(),
                y.clone(),
                y.iter().map(|&v| v as usize).collect(),
            );
            let cf = compute_weights(&d, FairnessMode::Cf);
            let eo = compute_weights(&d, FairnessMode::Eo);
            prop_assert_eq!(cf.weights, eo.weights);
        }

        #[test]
        fn weights_are_finite_and_nonnegative(r in rows(), mode in 0usize..4) {
            let d = dataset(
                r.iter().map(|t| t.0).collect(),
                r.iter().map(|t| t.1).collect(),
                r.iter().map(|t| t.2).collect(),
            );
            let w = compute_weights(&d, FairnessMode::ALL[mode]);
            prop_assert!(w.weights.iter().all(|v| v.is_finite() && *v >= 0.0));
        }
    }
}
