//! Tabular fairness datasets: schema, CSV ingestion, strata, splits and
//! per-sample adversary weights.

mod encode;
mod schema;
mod weights;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::nn::Matrix;

pub use encode::{load_csv, load_train_test, ColumnEncoding, Encoder, RawTable};
pub use schema::{RowFilter, SchemaSpec};
pub use weights::{compute_weights, constant_c, AdversaryInput, FairnessMode, WeightScheme};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error in {path}: {message}")]
    Csv { path: String, message: String },
    #[error("schema error: {0}")]
    Schema(String),
    #[error("unknown column '{0}'")]
    UnknownColumn(String),
    #[error("column '{column}' must be binary but has values {values:?}")]
    NonBinary { column: String, values: Vec<String> },
    #[error("no usable rows in {0}")]
    Empty(String),
    #[error("split fractions must be nonnegative and sum to 1, got {0:?}")]
    InvalidFractions(Vec<f64>),
    #[error("split part {index} is empty")]
    EmptySplit { index: usize },
    #[error("length mismatch: {0}")]
    LengthMismatch(String),
}

pub type Result<T> = std::result::Result<T, DataError>;

/// Per-stratum counts `|D(S=s, F=f)|`.
///
/// Strata `0..known` come from the training vocabulary; any later ids were
/// first seen outside training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratumTable {
    labels: Vec<String>,
    known: usize,
    counts: Vec<[usize; 2]>,
}

impl StratumTable {
    pub fn from_assignments(
        labels: Vec<String>,
        known: usize,
        s: &[u8],
        f_id: &[usize],
    ) -> Self {
        let mut counts = vec![[0usize; 2]; labels.len()];
        for (&si, &fi) in s.iter().zip(f_id) {
            counts[fi][si as usize] += 1;
        }
        Self {
            labels,
            known: known.min(counts.len()),
            counts,
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Number of strata present in the training vocabulary.
    pub fn known(&self) -> usize {
        self.known
    }

    pub fn is_known(&self, f: usize) -> bool {
        f < self.known
    }

    pub fn label(&self, f: usize) -> &str {
        &self.labels[f]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// `|D(S=s, F=f)|`
    pub fn count(&self, f: usize, s: u8) -> usize {
        self.counts[f][s as usize]
    }

    /// `|D(F=f)|`
    pub fn total(&self, f: usize) -> usize {
        self.counts[f][0] + self.counts[f][1]
    }

    /// Both sensitive groups present in stratum `f`.
    pub fn is_complete(&self, f: usize) -> bool {
        self.counts[f][0] > 0 && self.counts[f][1] > 0
    }
}

/// Encoded dataset with binary sensitive attribute and outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FairDataset {
    pub s: Vec<u8>,
    pub y: Vec<u8>,
    /// Stratum index of each row's fair-variable value.
    pub f_id: Vec<usize>,
    /// Encoded features `X = (F, O)`, one row per sample.
    pub x: Matrix,
    pub strata: StratumTable,
    pub feature_names: Vec<String>,
    /// Rows dropped at load time because of missing values.
    pub dropped_rows: usize,
}

impl FairDataset {
    /// Builds a dataset from already encoded parts. Stratum labels default to
    /// the stringified ids, all treated as known.
    pub fn from_parts(s: Vec<u8>, y: Vec<u8>, f_id: Vec<usize>, x: Matrix) -> Result<Self> {
        let n_strata = f_id.iter().max().map_or(0, |m| m + 1);
        let labels = (0..n_strata).map(|f| f.to_string()).collect();
        Self::with_strata(s, y, f_id, x, labels, n_strata)
    }

    pub fn with_strata(
        s: Vec<u8>,
        y: Vec<u8>,
        f_id: Vec<usize>,
        x: Matrix,
        labels: Vec<String>,
        known: usize,
    ) -> Result<Self> {
        let n = s.len();
        if y.len() != n || f_id.len() != n || x.rows() != n {
            return Err(DataError::LengthMismatch(format!(
                "s={}, y={}, f={}, x={}",
                n,
                y.len(),
                f_id.len(),
                x.rows()
            )));
        }
        if let Some(bad) = s.iter().chain(&y).find(|&&v| v > 1) {
            return Err(DataError::NonBinary {
                column: "s/y".into(),
                values: vec![bad.to_string()],
            });
        }
        if let Some(&bad) = f_id.iter().find(|&&f| f >= labels.len()) {
            return Err(DataError::LengthMismatch(format!(
                "stratum id {bad} outside {} labels",
                labels.len()
            )));
        }
        let feature_names = (0..x.cols()).map(|j| format!("x{j}")).collect();
        let strata = StratumTable::from_assignments(labels, known, &s, &f_id);
        Ok(Self {
            s,
            y,
            f_id,
            x,
            strata,
            feature_names,
            dropped_rows: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.x.cols()
    }

    /// `|D(S=s)|`
    pub fn group_count(&self, s: u8) -> usize {
        self.s.iter().filter(|&&v| v == s).count()
    }

    /// Rows whose stratum is outside the training vocabulary.
    pub fn unseen_stratum_rows(&self) -> usize {
        self.f_id
            .iter()
            .filter(|&&f| !self.strata.is_known(f))
            .count()
    }

    /// Row subset sharing this dataset's stratum vocabulary.
    pub fn subset(&self, indices: &[usize]) -> Self {
        let s: Vec<u8> = indices.iter().map(|&i| self.s[i]).collect();
        let f_id: Vec<usize> = indices.iter().map(|&i| self.f_id[i]).collect();
        let strata = StratumTable::from_assignments(
            self.strata.labels.clone(),
            self.strata.known,
            &s,
            &f_id,
        );
        Self {
            y: indices.iter().map(|&i| self.y[i]).collect(),
            x: self.x.select_rows(indices),
            s,
            f_id,
            strata,
            feature_names: self.feature_names.clone(),
            dropped_rows: 0,
        }
    }

    /// Same rows with every stratum id replaced.
    pub fn with_fair_ids(&self, f_id: Vec<usize>, labels: Vec<String>) -> Result<Self> {
        let known = labels.len();
        let mut out = Self::with_strata(
            self.s.clone(),
            self.y.clone(),
            f_id,
            self.x.clone(),
            labels,
            known,
        )?;
        out.feature_names = self.feature_names.clone();
        Ok(out)
    }

    /// Seeded partition into parts of the given fractions. Part sizes are
    /// rounded, the last part takes the remainder; rows inside a part keep
    /// their original order.
    pub fn split(&self, fractions: &[f64], seed: u64) -> Result<Vec<FairDataset>> {
        let sum: f64 = fractions.iter().sum();
        if fractions.is_empty() || fractions.iter().any(|&f| f < 0.0) || (sum - 1.0).abs() > 1e-9
        {
            return Err(DataError::InvalidFractions(fractions.to_vec()));
        }
        let n = self.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));

        let mut sizes: Vec<usize> = fractions[..fractions.len() - 1]
            .iter()
            .map(|f| (f * n as f64).round() as usize)
            .collect();
        let used: usize = sizes.iter().sum();
        sizes.push(n.saturating_sub(used));

        let mut parts = Vec::with_capacity(sizes.len());
        let mut start = 0;
        for (index, size) in sizes.into_iter().enumerate() {
            if size == 0 {
                return Err(DataError::EmptySplit { index });
            }
            let end = (start + size).min(n);
            let mut idx = order[start..end].to_vec();
            idx.sort_unstable();
            parts.push(self.subset(&idx));
            start = end;
        }
        Ok(parts)
    }

    /// Splits off a validation set, returning `(train, validation)`.
    pub fn train_validation_split(
        &self,
        validation_fraction: f64,
        seed: u64,
    ) -> Result<(FairDataset, FairDataset)> {
        let mut parts = self.split(&[1.0 - validation_fraction, validation_fraction], seed)?;
        let val = parts.pop().expect("two parts");
        let train = parts.pop().expect("two parts");
        Ok((train, val))
    }
}
