//! Batch evaluation of the adversarial objective.
//!
//! For adversary outputs `h_i ∈ [0,1]`, sensitive labels `S_i` and weights
//! `w_i`, the weighted-L1 objective is `Q = C - Σ w_i |h_i - S_i|` and its
//! squared surrogate is `Q' = C - Σ w_i (h_i - S_i)²`. The adversary maximises
//! Q' (minimises the weighted squared error); the encoder and predictor add
//! `λ·Q'` to their loss.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RegularizerError {
    #[error("batch length mismatch: h={h}, s={s}, w={w}")]
    LengthMismatch { h: usize, s: usize, w: usize },
    #[error("adversary output {0} outside [0, 1]")]
    OutOfRange(f64),
    #[error("negative or non-finite weight {0}")]
    BadWeight(f64),
}

/// Which residual the adversarial objective uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Surrogate {
    L1,
    #[default]
    L2,
}

#[derive(Debug, Clone, Copy)]
pub struct AdversaryBatch<'a> {
    h_out: &'a [f64],
    s: &'a [u8],
    weights: &'a [f64],
    constant: f64,
}

impl<'a> AdversaryBatch<'a> {
    pub fn new(
        h_out: &'a [f64],
        s: &'a [u8],
        weights: &'a [f64],
        constant: f64,
    ) -> Result<Self, RegularizerError> {
        if h_out.len() != s.len() || h_out.len() != weights.len() {
            return Err(RegularizerError::LengthMismatch {
                h: h_out.len(),
                s: s.len(),
                w: weights.len(),
            });
        }
        if let Some(&h) = h_out.iter().find(|h| !(0.0..=1.0).contains(*h)) {
            return Err(RegularizerError::OutOfRange(h));
        }
        if let Some(&w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
            return Err(RegularizerError::BadWeight(w));
        }
        Ok(Self {
            h_out,
            s,
            weights,
            constant,
        })
    }

    pub fn len(&self) -> usize {
        self.h_out.len()
    }

    pub fn is_empty(&self) -> bool {
        self.h_out.is_empty()
    }

    pub fn constant(&self) -> f64 {
        self.constant
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    fn residuals(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.h_out
            .iter()
            .zip(self.s)
            .zip(self.weights)
            .map(|((&h, &s), &w)| (w, h - f64::from(s)))
    }

    fn weighted_error(&self, surrogate: Surrogate) -> f64 {
        match surrogate {
            Surrogate::L1 => self.residuals().map(|(w, r)| w * r.abs()).sum(),
            Surrogate::L2 => self.residuals().map(|(w, r)| w * r * r).sum(),
        }
    }

    /// `Q = C - Σ w_i |h_i - S_i|`
    pub fn q_l1(&self) -> f64 {
        self.constant - self.weighted_error(Surrogate::L1)
    }

    /// `Q' = C - Σ w_i (h_i - S_i)²`
    pub fn q_l2(&self) -> f64 {
        self.constant - self.weighted_error(Surrogate::L2)
    }

    pub fn q(&self, surrogate: Surrogate) -> f64 {
        self.constant - self.weighted_error(surrogate)
    }

    /// What the adversary minimises: the weighted residual error.
    pub fn adversary_loss(&self, surrogate: Surrogate) -> f64 {
        self.weighted_error(surrogate)
    }

    /// d(adversary_loss)/dh_i. The L1 subgradient at a zero residual is 0.
    pub fn adversary_loss_grad(&self, surrogate: Surrogate) -> Vec<f64> {
        self.residuals()
            .map(|(w, r)| match surrogate {
                Surrogate::L1 => w * r.signum() * f64::from(u8::from(r != 0.0)),
                Surrogate::L2 => 2.0 * w * r,
            })
            .collect()
    }

    /// `λ·Q` added to the encoder and predictor loss.
    pub fn fairness_penalty(&self, lambda: f64, surrogate: Surrogate) -> f64 {
        if lambda == 0.0 {
            return 0.0;
        }
        lambda * self.q(surrogate)
    }

    /// d(fairness_penalty)/dh_i; C does not contribute.
    pub fn fairness_penalty_grad(&self, lambda: f64, surrogate: Surrogate) -> Vec<f64> {
        self.adversary_loss_grad(surrogate)
            .into_iter()
            .map(|g| -lambda * g)
            .collect()
    }
}
