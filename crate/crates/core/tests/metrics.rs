use std::path::PathBuf;

use dcfr::data::{load_train_test, FairDataset, SchemaSpec};
use dcfr::metrics::{accuracy, delta_cf, delta_dp, delta_eo, MetricsReport};
use dcfr::nn::Matrix;
use proptest::prelude::*;

fn dataset(s: Vec<u8>, y: Vec<u8>, f: Vec<usize>) -> FairDataset {
    let n = s.len();
    let levels = f.iter().max().map_or(1, |m| m + 1);
    let labels = (0..levels).map(|i| format!("f{i}")).collect();
    FairDataset::with_strata(s, y, f, Matrix::zeros(n, 1), labels, levels).unwrap()
}

/// Direct `Σ_f |P(Ŷ=1|S=1,F=f) − P(Ŷ=1|S=0,F=f)|·P(F=f)` over strata holding both groups.
fn cf_oracle(pred: &[u8], s: &[u8], f: &[usize]) -> f64 {
    let n = pred.len() as f64;
    let levels = f.iter().max().map_or(0, |m| m + 1);
    (0..levels)
        .map(|level| {
            let rate = |group: u8| {
                let rows: Vec<usize> = (0..pred.len()).filter(|&i| f[i] == level && s[i] == group).collect();
                (!rows.is_empty()).then(|| rows.iter().filter(|&&i| pred[i] == 1).count() as f64 / rows.len() as f64)
            };
            match (rate(1), rate(0)) {
                (Some(a), Some(b)) => (a - b).abs() * f.iter().filter(|&&v| v == level).count() as f64 / n,
                _ => 0.0,
            }
        })
        .sum()
}

fn table() -> impl Strategy<Value = Vec<(u8, u8, usize, u8)>> {
    prop::collection::vec((0u8..2, 0u8..2, 0usize..4, 0u8..2), 8..80)
}

fn unzip(rows: &[(u8, u8, usize, u8)]) -> (Vec<u8>, Vec<u8>, Vec<usize>, Vec<u8>) {
    (
        rows.iter().map(|r| r.0).collect(),
        rows.iter().map(|r| r.1).collect(),
        rows.iter().map(|r| r.2).collect(),
        rows.iter().map(|r| r.3).collect(),
    )
}

proptest! {
    #[test]
    fn cf_matches_direct_computation(rows in table()) {
        let (s, y, f, pred) = unzip(&rows);
        let data = dataset(s.clone(), y, f.clone());
        let (value, gaps) = delta_cf(&pred, &s, &f, &data.strata).unwrap();
        prop_assert!((value - cf_oracle(&pred, &s, &f)).abs() < 1e-12);
        let recombined: f64 = gaps.iter().map(|g| g.gap * g.weight).sum();
        prop_assert!((value - recombined).abs() < 1e-12);
        prop_assert!(gaps.iter().all(|g| (0.0..=1.0).contains(&g.gap)));
    }

    #[test]
    fn fair_variable_equal_to_outcome_gives_eo(rows in table()) {
        let (s, y, _, pred) = unzip(&rows);
        let cells = |a: u8, b: u8| s.iter().zip(&y).filter(|(&si, &yi)| si == a && yi == b).count();
        prop_assume!(cells(0, 0) > 0 && cells(0, 1) > 0 && cells(1, 0) > 0 && cells(1, 1) > 0);
        let f: Vec<usize> = y.iter().map(|&v| v as usize).collect();
        let data = dataset(s.clone(), y.clone(), f.clone());
        let (cf, _) = delta_cf(&pred, &s, &f, &data.strata).unwrap();
        prop_assert!((cf - delta_eo(&pred, &s, &y).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn metrics_ignore_row_order_and_stratum_labels(rows in table(), shift in 1usize..4) {
        let (s, y, f, pred) = unzip(&rows);
        prop_assume!(s.contains(&0) && s.contains(&1));
        let report = MetricsReport::evaluate(&pred, &dataset(s.clone(), y.clone(), f.clone()));
        let mut reversed = rows.clone();
        reversed.reverse();
        let (rs, ry, rf, rp) = unzip(&reversed);
        let relabeled: Vec<usize> = rf.iter().map(|&v| (v + shift) % 4).collect();
        let other = MetricsReport::evaluate(&rp, &dataset(rs, ry, relabeled));
        match (report, other) {
            (Ok(a), Ok(b)) => {
                prop_assert!((a.accuracy - b.accuracy).abs() < 1e-12);
                prop_assert!((a.delta_dp - b.delta_dp).abs() < 1e-12);
                prop_assert!((a.delta_eo - b.delta_eo).abs() < 1e-12);
                prop_assert!((a.delta_cf - b.delta_cf).abs() < 1e-12);
            }
            (a, b) => prop_assert_eq!(a.is_err(), b.is_err()),
        }
    }

    #[test]
    fn single_stratum_cf_equals_dp(rows in table()) {
        let (s, y, _, pred) = unzip(&rows);
        prop_assume!(s.contains(&0) && s.contains(&1));
        let f = vec![0; s.len()];
        let data = dataset(s.clone(), y, f.clone());
        let (cf, _) = delta_cf(&pred, &s, &f, &data.strata).unwrap();
        prop_assert!((cf - delta_dp(&pred, &s).unwrap()).abs() < 1e-12);
    }
}

#[test]
fn zero_cf_exactly_when_every_stratum_has_equal_rates() {
    // 8 rows: strata of sizes 4 and 4, each with two rows per group
    let s = vec![0, 0, 1, 1, 0, 0, 1, 1];
    let f = vec![0, 0, 0, 0, 1, 1, 1, 1];
    let data = dataset(s.clone(), vec![0; 8], f.clone());
    for bits in 0u32..256 {
        let pred: Vec<u8> = (0..8).map(|i| ((bits >> i) & 1) as u8).collect();
        let (value, _) = delta_cf(&pred, &s, &f, &data.strata).unwrap();
        let equal = (0..2).all(|level| {
            let count = |g: u8| (0..8).filter(|&i| f[i] == level && s[i] == g && pred[i] == 1).count();
            count(0) == count(1)
        });
        assert_eq!(value == 0.0, equal, "prediction bits {bits:08b}");
    }
}

fn adult_dir() -> PathBuf {
    std::env::var_os("DCFR_ADULT_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/adult"))
}

#[test]
fn adult_majority_class_accuracy() {
    let dir = adult_dir();
    let (train_path, test_path) = (dir.join("adult.data"), dir.join("adult.test"));
    if !train_path.exists() || !test_path.exists() {
        eprintln!("adult files not found under {}; skipping", dir.display());
        return;
    }
    let schema_path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../schemas/adult.toml");
    let schema = SchemaSpec::from_file(schema_path).unwrap();
    let mut test_schema = schema.clone();
    test_schema.skip_rows = 1;
    let (train, _, encoder) = load_train_test(&train_path, &train_path, &schema).unwrap();
    let test = encoder
        .encode(&dcfr::data::RawTable::read(&test_path, &test_schema).unwrap())
        .unwrap();
    let p_train = train.y.iter().filter(|&&v| v == 1).count() as f64 / train.len() as f64;
    let majority = u8::from(p_train >= 0.5);
    let acc = accuracy(&vec![majority; test.len()], &test.y).unwrap();
    assert!((acc - 0.752).abs() < 0.005, "majority accuracy {acc}");
}
