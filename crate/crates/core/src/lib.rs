//! Conditional fairness through adversarial representation learning.
//!
//! The crate trains an encoder/predictor pair against an adversary whose
//! weighted objective vanishes exactly when the representation is
//! independent of the sensitive attribute given the fair variables, and
//! provides the metrics, exact finite-space checks and λ-sweep tooling
//! around it.

pub mod data;
pub mod nn;
pub mod metrics;
pub mod regularizer;
pub mod synthetic;
pub mod trainer;
pub mod theory;
pub mod harness;
