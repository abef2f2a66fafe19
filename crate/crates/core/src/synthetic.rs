//! Synthetic generators with known fairness structure.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::FairDataset;
use crate::nn::{sigmoid, Matrix};

/// College-admission toy: gender `S` influences the department `D` applied
/// to and, directly, the admission `Y`; `D` and the qualification `Q` also
/// drive `Y`. `D` is the fair variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmissionParams {
    /// `P(S=1)`.
    pub p_s: f64,
    /// `P(D=1 | S=0)` and `P(D=1 | S=1)`.
    pub p_dept: [f64; 2],
    pub intercept: f64,
    pub coef_q: f64,
    pub coef_dept: f64,
    /// Direct (unfair) effect of S on the admission logit.
    pub coef_s: f64,
}

impl Default for AdmissionParams {
    fn default() -> Self {
        Self {
            p_s: 0.5,
            p_dept: [0.75, 0.25],
            intercept: 0.5,
            coef_q: 2.0,
            coef_dept: -2.5,
            coef_s: 1.5,
        }
    }
}

/// `n` draws with features `[Q, onehot(D)]` and strata `F = D`.
pub fn admission(params: &AdmissionParams, n: usize, seed: u64) -> FairDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    let mut f_id = Vec::with_capacity(n);
    let mut x = Vec::with_capacity(n * 3);
    for _ in 0..n {
        let si = u8::from(rng.random_bool(params.p_s));
        let d = usize::from(rng.random_bool(params.p_dept[si as usize]));
        let q: f64 = StandardNormal.sample(&mut rng);
        let logit = params.intercept
            + params.coef_q * q
            + params.coef_dept * d as f64
            + params.coef_s * f64::from(si);
        let yi = u8::from(rng.random_bool(sigmoid(logit)));
        s.push(si);
        y.push(yi);
        f_id.push(d);
        x.extend([q, f64::from(u8::from(d == 0)), f64::from(u8::from(d == 1))]);
    }
    let x = Matrix::from_vec(n, 3, x).expect("three columns per row");
    let mut data = FairDataset::with_strata(
        s,
        y,
        f_id,
        x,
        vec!["dept0".into(), "dept1".into()],
        2,
    )
    .expect("consistent lengths");
    data.feature_names = vec!["qualification".into(), "dept=0".into(), "dept=1".into()];
    data
}

/// Data whose last feature column is an exact copy of S; the outcome depends
/// on the first feature and S. One stratum.
pub fn leaky_sensitive(n: usize, p_s: f64, seed: u64) -> FairDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    let mut x = Vec::with_capacity(n * 2);
    for _ in 0..n {
        let si = u8::from(rng.random_bool(p_s));
        let o: f64 = StandardNormal.sample(&mut rng);
        let yi = u8::from(rng.random_bool(sigmoid(1.5 * o + 1.5 * f64::from(si) - 0.75)));
        s.push(si);
        y.push(yi);
        x.extend([o, f64::from(si)]);
    }
    let x = Matrix::from_vec(n, 2, x).expect("two columns per row");
    FairDataset::from_parts(s, y, vec![0; n], x).expect("consistent lengths")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn admission_is_reproducible_and_shaped() {
        let a = admission(&AdmissionParams::default(), 200, 7);
        let b = admission(&AdmissionParams::default(), 200, 7);
        assert_eq!(a, b);
        assert_eq!(a.n_features(), 3);
        assert_eq!(a.strata.len(), 2);
        for i in 0..a.len() {
            assert_eq!(a.x.get(i, 1 + a.f_id[i]), 1.0);
        }
    }

    #[test]
    fn admission_department_depends_on_gender() {
        let d = admission(&AdmissionParams::default(), 20_000, 1);
        let rate = |s: u8| {
            let rows: Vec<usize> = (0..d.len()).filter(|&i| d.s[i] == s).collect();
            rows.iter().filter(|&&i| d.f_id[i] == 1).count() as f64 / rows.len() as f64
        };
        assert!((rate(0) - 0.75).abs() < 0.02);
        assert!((rate(1) - 0.25).abs() < 0.02);
    }

    #[test]
    fn leaky_column_copies_s() {
        let d = leaky_sensitive(100, 0.3, 2);
        assert!((0..100).all(|i| d.x.get(i, 1) == f64::from(d.s[i])));
    }
}
