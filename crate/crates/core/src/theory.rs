//! Exact checks of the adversarial characterisation on finite probability
//! spaces.
//!
//! For a joint `p(z, f, s)` and a test function `h(z, f) ∈ [0, 1]`,
//!
//! `Q(h)  = C - Σ p(z,f,s)·P(S=1-s|f)·|h(z,f) - s|`
//! `Q'(h) = C - Σ p(z,f,s)·P(S=1-s|f)·(h(z,f) - s)²`
//!
//! with `C = Σ_f p(f)·P(S=0|f)·P(S=1|f)`. `Q` vanishes for every `h` exactly
//! when `Z ⊥ S | F`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::data::{compute_weights, FairDataset, FairnessMode};
use crate::nn::Matrix;

/// Tolerance for exact finite-sum paths.
pub const EXACT_TOL: f64 = 1e-10;
/// Tolerance for sampling paths.
pub const SAMPLING_TOL: f64 = 0.02;

pub const MAX_Z: usize = 4;
pub const MAX_F: usize = 3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum JointError {
    #[error("support sizes must be 1..={MAX_Z} for Z and 1..={MAX_F} for F, got {0}x{1}")]
    Support(usize, usize),
    #[error("expected {expected} probabilities, got {found}")]
    Shape { expected: usize, found: usize },
    #[error("negative or non-finite probability {0}")]
    Negative(f64),
    #[error("probabilities sum to {0}, not 1")]
    NotNormalised(f64),
}

/// Joint distribution of `Z`, `F` and binary `S` on a finite support.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FiniteJoint {
    nz: usize,
    nf: usize,
    /// Indexed `[(z * nf + f) * 2 + s]`.
    p: Vec<f64>,
}

impl FiniteJoint {
    pub fn new(nz: usize, nf: usize, p: Vec<f64>) -> Result<Self, JointError> {
        if !(1..=MAX_Z).contains(&nz) || !(1..=MAX_F).contains(&nf) {
            return Err(JointError::Support(nz, nf));
        }
        if p.len() != nz * nf * 2 {
            return Err(JointError::Shape {
                expected: nz * nf * 2,
                found: p.len(),
            });
        }
        if let Some(&bad) = p.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(JointError::Negative(bad));
        }
        let total: f64 = p.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(JointError::NotNormalised(total));
        }
        Ok(Self { nz, nf, p })
    }

    /// Builds from an unnormalised nonnegative table.
    pub fn from_weights(nz: usize, nf: usize, mut w: Vec<f64>) -> Result<Self, JointError> {
        let total: f64 = w.iter().sum();
        if total > 0.0 {
            w.iter_mut().for_each(|v| *v /= total);
        }
        Self::new(nz, nf, w)
    }

    /// `p(f)·p(z|f)·p(s|f)`: conditionally independent by construction.
    pub fn conditionally_independent(
        p_f: &[f64],
        p_z_given_f: &[Vec<f64>],
        p_s1_given_f: &[f64],
    ) -> Result<Self, JointError> {
        let nf = p_f.len();
        let nz = p_z_given_f.first().map_or(0, Vec::len);
        let mut w = vec![0.0; nz * nf * 2];
        for f in 0..nf {
            for z in 0..nz {
                for s in 0..2 {
                    let ps = if s == 1 { p_s1_given_f[f] } else { 1.0 - p_s1_given_f[f] };
                    w[(z * nf + f) * 2 + s] = p_f[f] * p_z_given_f[f][z] * ps;
                }
            }
        }
        Self::from_weights(nz, nf, w)
    }

    /// Uniform-random table; `sparsity` is the chance each cell is zeroed.
    pub fn random<R: Rng + ?Sized>(nz: usize, nf: usize, sparsity: f64, rng: &mut R) -> Self {
        loop {
            let w: Vec<f64> = (0..nz * nf * 2)
                .map(|_| {
                    if rng.random_bool(sparsity) {
                        0.0
                    } else {
                        rng.random::<f64>()
                    }
                })
                .collect();
            if w.iter().any(|&v| v > 0.0) {
                return Self::from_weights(nz, nf, w).expect("valid random table");
            }
        }
    }

    /// Random joint satisfying `Z ⊥ S | F`.
    pub fn random_independent<R: Rng + ?Sized>(nz: usize, nf: usize, rng: &mut R) -> Self {
        let p_f: Vec<f64> = (0..nf).map(|_| rng.random::<f64>() + 0.05).collect();
        let p_z: Vec<Vec<f64>> = (0..nf)
            .map(|_| (0..nz).map(|_| rng.random::<f64>()).collect())
            .collect();
        let p_z: Vec<Vec<f64>> = p_z
            .into_iter()
            .map(|row| {
                let t: f64 = row.iter().sum();
                row.into_iter().map(|v| v / t).collect()
            })
            .collect();
        let p_s: Vec<f64> = (0..nf).map(|_| rng.random::<f64>()).collect();
        Self::conditionally_independent(&p_f, &p_z, &p_s).expect("valid independent table")
    }

    pub fn nz(&self) -> usize {
        self.nz
    }

    pub fn nf(&self) -> usize {
        self.nf
    }

    pub fn prob(&self, z: usize, f: usize, s: usize) -> f64 {
        self.p[(z * self.nf + f) * 2 + s]
    }

    pub fn p_f(&self, f: usize) -> f64 {
        (0..self.nz).map(|z| self.prob(z, f, 0) + self.prob(z, f, 1)).sum()
    }

    pub fn p_fs(&self, f: usize, s: usize) -> f64 {
        (0..self.nz).map(|z| self.prob(z, f, s)).sum()
    }

    /// `P(S=s | F=f)`, 0 when `p(f) = 0`.
    pub fn p_s_given_f(&self, s: usize, f: usize) -> f64 {
        let pf = self.p_f(f);
        if pf > 0.0 {
            self.p_fs(f, s) / pf
        } else {
            0.0
        }
    }

    pub fn constant(&self) -> f64 {
        (0..self.nf)
            .map(|f| self.p_f(f) * self.p_s_given_f(0, f) * self.p_s_given_f(1, f))
            .sum()
    }

    fn weighted_error(&self, h: &TestFunction, square: bool) -> f64 {
        let mut total = 0.0;
        for z in 0..self.nz {
            for f in 0..self.nf {
                for s in 0..2 {
                    let r = (h.value(z, f) - s as f64).abs();
                    let r = if square { r * r } else { r };
                    total += self.prob(z, f, s) * self.p_s_given_f(1 - s, f) * r;
                }
            }
        }
        total
    }

    pub fn q(&self, h: &TestFunction) -> f64 {
        self.constant() - self.weighted_error(h, false)
    }

    pub fn q_l2(&self, h: &TestFunction) -> f64 {
        self.constant() - self.weighted_error(h, true)
    }

    /// Draws `(z, f, s)` triples.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<(usize, usize, u8)> {
        let mut cdf = Vec::with_capacity(self.p.len());
        let mut acc = 0.0;
        for &v in &self.p {
            acc += v;
            cdf.push(acc);
        }
        (0..n)
            .map(|_| {
                let u = rng.random::<f64>() * acc;
                let cell = cdf.partition_point(|&c| c <= u).min(self.p.len() - 1);
                let s = cell % 2;
                let zf = cell / 2;
                (zf / self.nf, zf % self.nf, s as u8)
            })
            .collect()
    }
}

/// `h(z, f) ∈ [0, 1]` tabulated on the support.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestFunction {
    nf: usize,
    values: Vec<f64>,
}

impl TestFunction {
    pub fn constant(joint: &FiniteJoint, v: f64) -> Self {
        Self {
            nf: joint.nf,
            values: vec![v; joint.nz * joint.nf],
        }
    }

    pub fn indicator(joint: &FiniteJoint, z: usize, f: usize) -> Self {
        let mut h = Self::constant(joint, 0.0);
        h.values[z * joint.nf + f] = 1.0;
        h
    }

    pub fn random<R: Rng + ?Sized>(joint: &FiniteJoint, rng: &mut R) -> Self {
        Self {
            nf: joint.nf,
            values: (0..joint.nz * joint.nf).map(|_| rng.random::<f64>()).collect(),
        }
    }

    pub fn random_binary<R: Rng + ?Sized>(joint: &FiniteJoint, rng: &mut R) -> Self {
        Self {
            nf: joint.nf,
            values: (0..joint.nz * joint.nf)
                .map(|_| f64::from(u8::from(rng.random_bool(0.5))))
                .collect(),
        }
    }

    pub fn value(&self, z: usize, f: usize) -> f64 {
        self.values[z * self.nf + f]
    }

    pub fn complement(&self) -> Self {
        Self {
            nf: self.nf,
            values: self.values.iter().map(|v| 1.0 - v).collect(),
        }
    }
}

/// `p(z, s | f) = p(z | f)·p(s | f)` on every cell with `p(f) > 0`.
pub fn is_cond_independent(joint: &FiniteJoint) -> bool {
    for f in 0..joint.nf {
        let pf = joint.p_f(f);
        if pf <= 0.0 {
            continue;
        }
        for z in 0..joint.nz {
            let pz = (joint.prob(z, f, 0) + joint.prob(z, f, 1)) / pf;
            for s in 0..2 {
                let lhs = joint.prob(z, f, s) / pf;
                let rhs = pz * joint.p_fs(f, s) / pf;
                if (lhs - rhs).abs() > EXACT_TOL {
                    return false;
                }
            }
        }
    }
    true
}

/// Indicator `𝕀(Z=z, F=f)` with a nonzero objective.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Witness {
    pub z: usize,
    pub f: usize,
    pub q: f64,
}

/// Evaluates `Q` on every indicator of the support; `Ok` when all vanish,
/// otherwise the indicator with the largest `|Q|`.
pub fn q_exhaustive_zero(joint: &FiniteJoint) -> Result<(), Witness> {
    let mut worst: Option<Witness> = None;
    for z in 0..joint.nz {
        for f in 0..joint.nf {
            let q = joint.q(&TestFunction::indicator(joint, z, f));
            if q.abs() > EXACT_TOL && worst.is_none_or(|w| q.abs() > w.q.abs()) {
                worst = Some(Witness { z, f, q });
            }
        }
    }
    worst.map_or(Ok(()), Err)
}

/// `Q(h) + Q(1-h) = 0` for `trials` random test functions.
pub fn sup_symmetry_check<R: Rng + ?Sized>(joint: &FiniteJoint, trials: usize, rng: &mut R) -> bool {
    (0..trials).all(|_| {
        let h = TestFunction::random(joint, rng);
        (joint.q(&h) + joint.q(&h.complement())).abs() <= EXACT_TOL
    })
}

/// `Q'(h) >= Q(h)` for `trials` random test functions.
pub fn l2_dominates_l1<R: Rng + ?Sized>(joint: &FiniteJoint, trials: usize, rng: &mut R) -> bool {
    (0..trials).all(|_| {
        let h = TestFunction::random(joint, rng);
        joint.q_l2(&h) >= joint.q(&h) - 1e-12
    })
}

/// Discrete admission toy: `S → D`, qualification `Q` independent of S, and
/// the decision `Ŷ = decide(Q, D)` (or `decide(Q, D, S)` when it looks at S).
/// Returns the joint of `(Z = Ŷ, F = D, S)`.
pub fn admission_joint(
    p_dept_given_s: [f64; 2],
    p_qualified: f64,
    decide: impl Fn(usize, usize, usize) -> usize,
) -> FiniteJoint {
    let mut w = vec![0.0; 2 * 2 * 2];
    for s in 0..2 {
        for d in 0..2 {
            let pd = if d == 1 { p_dept_given_s[s] } else { 1.0 - p_dept_given_s[s] };
            for q in 0..2 {
                let pq = if q == 1 { p_qualified } else { 1.0 - p_qualified };
                let z = decide(q, d, s);
                w[(z * 2 + d) * 2 + s] += 0.5 * pd * pq;
            }
        }
    }
    FiniteJoint::from_weights(2, 2, w).expect("valid admission joint")
}

/// Hand-built joints exercising boundary behaviour.
pub fn corner_joints() -> Vec<(&'static str, FiniteJoint)> {
    let uniform = FiniteJoint::from_weights(2, 2, vec![1.0; 8]).unwrap();
    let product = FiniteJoint::conditionally_independent(
        &[0.3, 0.7],
        &[vec![0.2, 0.8], vec![0.2, 0.8]],
        &[0.4, 0.4],
    )
    .unwrap();
    // Z copies S
    let copy = FiniteJoint::from_weights(2, 2, vec![0.3, 0.0, 0.2, 0.0, 0.0, 0.2, 0.0, 0.3]).unwrap();
    // S is a function of F
    let degenerate =
        FiniteJoint::from_weights(3, 2, vec![0.1, 0.0, 0.0, 0.2, 0.3, 0.0, 0.0, 0.1, 0.2, 0.0, 0.0, 0.1])
            .unwrap();
    // one F value never occurs
    let empty_f = FiniteJoint::conditionally_independent(
        &[0.5, 0.0, 0.5],
        &[vec![0.5, 0.5], vec![0.5, 0.5], vec![0.1, 0.9]],
        &[0.3, 0.5, 0.6],
    )
    .unwrap();
    let point = FiniteJoint::from_weights(1, 1, vec![0.0, 1.0]).unwrap();
    let fair_decision = admission_joint([0.75, 0.25], 0.6, |q, _, _| usize::from(q == 1));
    let dept_decision = admission_joint([0.75, 0.25], 0.6, |q, d, _| usize::from(q == 1 && d == 0));
    let biased_decision = admission_joint([0.75, 0.25], 0.6, |q, _, s| usize::from(q == 1 || s == 1));
    vec![
        ("uniform", uniform),
        ("product", product),
        ("z-copies-s", copy),
        ("s-determined-by-f", degenerate),
        ("unobserved-f", empty_f),
        ("point-mass", point),
        ("admission-qualification", fair_decision),
        ("admission-qualification-and-dept", dept_decision),
        ("admission-uses-gender", biased_decision),
    ]
}

/// Largest absolute gap between the empirical CF weights `N·w_i` and the
/// exact `P(S=1-s | F=f)` on `n` samples from `joint`.
pub fn weight_estimator_error(joint: &FiniteJoint, n: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = joint.sample(n, &mut rng);
    let s: Vec<u8> = samples.iter().map(|t| t.2).collect();
    let f_id: Vec<usize> = samples.iter().map(|t| t.1).collect();
    let labels = (0..joint.nf).map(|f| f.to_string()).collect();
    let data = FairDataset::with_strata(
        s.clone(),
        vec![0; n],
        f_id.clone(),
        Matrix::zeros(n, 0),
        labels,
        joint.nf,
    )
    .expect("consistent sample");
    let scheme = compute_weights(&data, FairnessMode::Cf);
    scheme
        .weights
        .iter()
        .zip(s.iter().zip(&f_id))
        .map(|(&w, (&si, &fi))| (w * n as f64 - joint.p_s_given_f(1 - si as usize, fi)).abs())
        .fold(0.0, f64::max)
}

/// Outcome of one group of checks.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TheoremCheck {
    pub name: &'static str,
    pub passed: bool,
    pub cases: usize,
    pub detail: String,
}

/// Size of the randomized suite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuiteConfig {
    pub seed: u64,
    pub joints: usize,
    pub trials: usize,
    pub samples: usize,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            joints: 1000,
            trials: 1000,
            samples: 100_000,
        }
    }
}

fn random_joint<R: Rng + ?Sized>(rng: &mut R) -> FiniteJoint {
    let nz = rng.random_range(1..=MAX_Z);
    let nf = rng.random_range(1..=MAX_F);
    match rng.random_range(0..3) {
        0 => FiniteJoint::random_independent(nz, nf, rng),
        1 => FiniteJoint::random(nz, nf, 0.0, rng),
        _ => FiniteJoint::random(nz, nf, 0.3, rng),
    }
}

/// Runs every check and reports one entry per property.
pub fn run_suite(config: &SuiteConfig) -> Vec<TheoremCheck> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut out = Vec::new();

    // characterisation: CI ⇔ Q vanishes on every indicator
    let corners = corner_joints();
    let mut disagreements = Vec::new();
    let mut independent = 0;
    for i in 0..config.joints {
        let j = random_joint(&mut rng);
        let ci = is_cond_independent(&j);
        independent += usize::from(ci);
        if ci != q_exhaustive_zero(&j).is_ok() {
            disagreements.push(format!("random #{i}"));
        }
    }
    for (name, j) in &corners {
        if is_cond_independent(j) != q_exhaustive_zero(j).is_ok() {
            disagreements.push((*name).to_string());
        }
    }
    out.push(TheoremCheck {
        name: "characterisation",
        passed: disagreements.is_empty(),
        cases: config.joints + corners.len(),
        detail: if disagreements.is_empty() {
            format!("{independent} random joints independent, all agree")
        } else {
            format!("disagreement on {}", disagreements.join(", "))
        },
    });

    // antisymmetry Q(h) + Q(1-h) = 0
    let per_joint = config.trials.div_ceil(config.joints.max(1)).max(1);
    let mut ok = true;
    let mut checked = 0;
    while checked < config.trials {
        let j = random_joint(&mut rng);
        let n = per_joint.min(config.trials - checked);
        ok &= sup_symmetry_check(&j, n, &mut rng);
        checked += n;
    }
    out.push(TheoremCheck {
        name: "antisymmetry",
        passed: ok,
        cases: checked,
        detail: format!("|Q(h) + Q(1-h)| <= {EXACT_TOL}"),
    });

    // surrogate bound Q' >= Q
    let mut ok = true;
    for _ in 0..config.trials {
        let j = random_joint(&mut rng);
        ok &= l2_dominates_l1(&j, 1, &mut rng);
    }
    out.push(TheoremCheck {
        name: "surrogate-bound",
        passed: ok,
        cases: config.trials,
        detail: "Q'(h) >= Q(h)".into(),
    });

    // empirical weights converge to the exact conditionals
    let j = FiniteJoint::random(MAX_Z, MAX_F, 0.0, &mut rng);
    let err = weight_estimator_error(&j, config.samples, config.seed);
    out.push(TheoremCheck {
        name: "weight-estimator",
        passed: err < SAMPLING_TOL,
        cases: config.samples,
        detail: format!("max |N·w - P(S=1-s|F)| = {err:.5}"),
    });
    out
}
