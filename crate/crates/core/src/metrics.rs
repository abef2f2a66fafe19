//! Accuracy and the group-fairness gaps ΔDP, ΔEO and ΔCF.

use log::warn;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{FairDataset, StratumTable};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("metric undefined: {0}")]
    Undefined(String),
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
}

pub type Result<T> = std::result::Result<T, MetricError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratumGap {
    pub stratum: usize,
    pub label: String,
    /// `|P(Ŷ=1|S=1,F=f) - P(Ŷ=1|S=0,F=f)|`, 0 for strata that are not counted.
    pub gap: f64,
    /// `P̂(F=f)` on the evaluated rows.
    pub weight: f64,
    /// False when the stratum lacks a sensitive group or was unseen in training.
    pub counted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub delta_dp: f64,
    pub delta_eo: f64,
    pub delta_cf: f64,
    pub per_stratum: Vec<StratumGap>,
}

impl MetricsReport {
    /// Computes every metric of hard predictions on `data`.
    pub fn evaluate(pred: &[u8], data: &FairDataset) -> Result<Self> {
        let (delta_cf, per_stratum) = delta_cf(pred, &data.s, &data.f_id, &data.strata)?;
        Ok(Self {
            accuracy: accuracy(pred, &data.y)?,
            delta_dp: delta_dp(pred, &data.s)?,
            delta_eo: delta_eo(pred, &data.s, &data.y)?,
            delta_cf,
            per_stratum,
        })
    }

    /// Per-stratum rows as CSV with a header line.
    pub fn per_stratum_csv(&self) -> String {
        let mut out = String::from("stratum,label,gap,weight,counted\n");
        for g in &self.per_stratum {
            let label = if g.label.contains([',', '"']) {
                format!("\"{}\"", g.label.replace('"', "\"\""))
            } else {
                g.label.clone()
            };
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                g.stratum, label, g.gap, g.weight, g.counted
            ));
        }
        out
    }
}

fn check_len(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(MetricError::LengthMismatch(a, b));
    }
    Ok(())
}

/// Positive-prediction counts and totals per sensitive group for rows passing `keep`.
fn group_rates(pred: &[u8], s: &[u8], keep: impl Fn(usize) -> bool) -> ([usize; 2], [usize; 2]) {
    let mut pos = [0usize; 2];
    let mut tot = [0usize; 2];
    for (i, (&p, &si)) in pred.iter().zip(s).enumerate() {
        if keep(i) {
            tot[si as usize] += 1;
            pos[si as usize] += p as usize;
        }
    }
    (pos, tot)
}

fn rate_gap(pos: [usize; 2], tot: [usize; 2]) -> f64 {
    (pos[1] as f64 / tot[1] as f64 - pos[0] as f64 / tot[0] as f64).abs()
}

pub fn accuracy(pred: &[u8], y: &[u8]) -> Result<f64> {
    check_len(pred.len(), y.len())?;
    if pred.is_empty() {
        return Err(MetricError::Undefined("accuracy of zero rows".into()));
    }
    let hits = pred.iter().zip(y).filter(|(p, t)| p == t).count();
    Ok(hits as f64 / pred.len() as f64)
}

/// `|P(Ŷ=1|S=1) - P(Ŷ=1|S=0)|`
pub fn delta_dp(pred: &[u8], s: &[u8]) -> Result<f64> {
    check_len(pred.len(), s.len())?;
    let (pos, tot) = group_rates(pred, s, |_| true);
    if tot[0] == 0 || tot[1] == 0 {
        return Err(MetricError::Undefined(
            "demographic parity needs both sensitive groups".into(),
        ));
    }
    Ok(rate_gap(pos, tot))
}

/// `P(Y=0)·|FPR₁ - FPR₀| + P(Y=1)·|TPR₁ - TPR₀|`
pub fn delta_eo(pred: &[u8], s: &[u8], y: &[u8]) -> Result<f64> {
    check_len(pred.len(), s.len())?;
    check_len(pred.len(), y.len())?;
    let n = pred.len() as f64;
    let mut total = 0.0;
    for class in [0u8, 1] {
        let (pos, tot) = group_rates(pred, s, |i| y[i] == class);
        if tot[0] == 0 || tot[1] == 0 {
            return Err(MetricError::Undefined(format!(
                "equalized odds needs both sensitive groups with Y={class}"
            )));
        }
        let p_class = (tot[0] + tot[1]) as f64 / n;
        total += p_class * rate_gap(pos, tot);
    }
    Ok(total)
}

/// `Σ_f |P(Ŷ=1|S=1,F=f) - P(Ŷ=1|S=0,F=f)|·P(F=f)`.
///
/// Strata missing a sensitive group, or not present in `strata`'s training
/// vocabulary, contribute 0 and are reported with `counted = false`.
pub fn delta_cf(
    pred: &[u8],
    s: &[u8],
    f_id: &[usize],
    strata: &StratumTable,
) -> Result<(f64, Vec<StratumGap>)> {
    check_len(pred.len(), s.len())?;
    check_len(pred.len(), f_id.len())?;
    if pred.is_empty() {
        return Err(MetricError::Undefined("ΔCF of zero rows".into()));
    }
    let levels = f_id
        .iter()
        .max()
        .map_or(0, |m| m + 1)
        .max(strata.len());
    let mut pos = vec![[0usize; 2]; levels];
    let mut tot = vec![[0usize; 2]; levels];
    for ((&p, &si), &f) in pred.iter().zip(s).zip(f_id) {
        tot[f][si as usize] += 1;
        pos[f][si as usize] += p as usize;
    }
    let n = pred.len() as f64;
    let mut value = 0.0;
    let mut per_stratum = Vec::new();
    let mut skipped = Vec::new();
    for f in 0..levels {
        let count = tot[f][0] + tot[f][1];
        if count == 0 {
            continue;
        }
        let weight = count as f64 / n;
        let counted = tot[f][0] > 0 && tot[f][1] > 0 && (f < strata.known() || strata.is_empty());
        let gap = if counted { rate_gap(pos[f], tot[f]) } else { 0.0 };
        if !counted {
            skipped.push(f);
        }
        value += gap * weight;
        per_stratum.push(StratumGap {
            stratum: f,
            label: if f < strata.len() {
                strata.label(f).to_string()
            } else {
                f.to_string()
            },
            gap,
            weight,
            counted,
        });
    }
    if !skipped.is_empty() {
        warn!("ΔCF: strata {skipped:?} lack a sensitive group or were unseen in training; contributing 0");
    }
    Ok((value, per_stratum))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(f_id: &[usize], s: &[u8]) -> StratumTable {
        let k = f_id.iter().max().map_or(0, |m| m + 1);
        StratumTable::from_assignments((0..k).map(|i| i.to_string()).collect(), k, s, f_id)
    }

    #[test]
    fn dp_examples() {
        let s = [1, 1, 0, 0];
        assert_eq!(delta_dp(&[1, 0, 1, 0], &s).unwrap(), 0.0);
        assert_eq!(delta_dp(&s, &s).unwrap(), 1.0);
        let s10: Vec<u8> = (0..20).map(|i| u8::from(i < 10)).collect();
        let pred: Vec<u8> = (0..20)
            .map(|i| u8::from(if i < 10 { i < 7 } else { i < 14 }))
            .collect();
        assert!((delta_dp(&pred, &s10).unwrap() - 0.3).abs() < 1e-12);
        assert!(delta_dp(&[1, 0], &[1, 1]).is_err());
    }

    #[test]
    fn eo_examples() {
        // balanced 8 rows: S and Y independent
        let s = [0, 0, 0, 0, 1, 1, 1, 1];
        let y = [0, 0, 1, 1, 0, 0, 1, 1];
        assert_eq!(delta_eo(&y, &s, &y).unwrap(), 0.0);
        assert_eq!(delta_eo(&s, &s, &y).unwrap(), 1.0);
        // TPR 1 vs 0.5, FPR 0 vs 0, P(Y=1)=0.5 → 0.25
        let pred = [0, 0, 1, 0, 0, 0, 1, 1];
        assert!((delta_eo(&pred, &s, &y).unwrap() - 0.25).abs() < 1e-15);
        assert!(delta_eo(&pred, &s, &[0; 8]).is_err());
    }

    #[test]
    fn cf_single_stratum_equals_dp() {
        let s = [0, 1, 0, 1, 1, 0];
        let pred = [1, 1, 0, 1, 0, 0];
        let f = [0; 6];
        let (cf, per) = delta_cf(&pred, &s, &f, &table(&f, &s)).unwrap();
        assert_eq!(cf, delta_dp(&pred, &s).unwrap());
        assert_eq!(per.len(), 1);
    }

    #[test]
    fn cf_zero_for_stratum_only_predictions() {
        let f = [0, 0, 1, 1, 2, 2, 2];
        let s = [0, 1, 0, 1, 1, 0, 0];
        let pred: Vec<u8> = f.iter().map(|&v| u8::from(v == 1)).collect();
        let (cf, _) = delta_cf(&pred, &s, &f, &table(&f, &s)).unwrap();
        assert_eq!(cf, 0.0);
    }

    #[test]
    fn cf_skips_incomplete_and_unseen_strata() {
        let s = [0, 1, 1, 1, 0, 1];
        let f = [0, 0, 1, 1, 2, 2];
        let pred = [0, 1, 1, 0, 0, 1];
        // stratum 1 lacks S=0; stratum 2 is unseen in training (known = 2)
        let tbl = StratumTable::from_assignments(
            vec!["a".into(), "b".into(), "c".into()],
            2,
            &s,
            &f,
        );
        let (cf, per) = delta_cf(&pred, &s, &f, &tbl).unwrap();
        assert!((cf - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(per.iter().filter(|g| g.counted).count(), 1);
        let sum: f64 = per.iter().map(|g| g.gap * g.weight).sum();
        assert!((sum - cf).abs() < 1e-12);
    }

    #[test]
    fn accuracy_examples() {
        let y = [1, 0, 1, 1];
        assert_eq!(accuracy(&y, &y).unwrap(), 1.0);
        let flipped: Vec<u8> = y.iter().map(|v| 1 - v).collect();
        assert_eq!(accuracy(&flipped, &y).unwrap(), 0.0);
        assert!(accuracy(&[], &[]).is_err());
        assert!(accuracy(&[1], &[1, 0]).is_err());
    }

    #[test]
    fn per_stratum_csv_has_header_and_rows() {
        let s = [0, 1, 0, 1];
        let f = [0, 0, 1, 1];
        let y = [0, 1, 1, 0];
        let data = crate::data::FairDataset::from_parts(
            s.to_vec(),
            y.to_vec(),
            f.to_vec(),
            crate::nn::Matrix::zeros(4, 1),
        )
        .unwrap();
        let report = MetricsReport::evaluate(&[0, 1, 1, 1], &data).unwrap();
        let csv = report.per_stratum_csv();
        assert_eq!(csv.lines().count(), 3);
        assert!(csv.starts_with("stratum,label,gap,weight,counted"));
        assert!((report.delta_cf - 0.5).abs() < 1e-15);
    }
}
