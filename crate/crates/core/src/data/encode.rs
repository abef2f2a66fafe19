use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use log::warn;
use serde::{Deserialize, Serialize};

use super::{DataError, FairDataset, Result, SchemaSpec, StratumTable};
use crate::nn::Matrix;

/// Schema columns of a CSV file after filtering and missing-value removal.
#[derive(Debug, Clone)]
pub struct RawTable {
    pub source: String,
    pub sensitive: Vec<String>,
    pub outcome: Vec<String>,
    /// Joined fair-column values, one stratum key per row.
    pub stratum_keys: Vec<String>,
    /// `(column name, values)` in encoding order.
    pub features: Vec<(String, Vec<String>)>,
    pub dropped_rows: usize,
}

const STRATUM_SEPARATOR: &str = "|";

impl RawTable {
    pub fn read(path: impl AsRef<Path>, schema: &SchemaSpec) -> Result<Self> {
        let path = path.as_ref();
        let source = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|e| DataError::Io {
            path: source.clone(),
            source: e,
        })?;
        Self::parse(&text, &source, schema)
    }

    pub fn parse(text: &str, source: &str, schema: &SchemaSpec) -> Result<Self> {
        let body: String = text
            .lines()
            .skip(schema.skip_rows)
            .collect::<Vec<_>>()
            .join("\n");
        let csv_err = |e: csv::Error| DataError::Csv {
            path: source.to_string(),
            message: e.to_string(),
        };
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(schema.column_names.is_none())
            .trim(csv::Trim::All)
            .flexible(true)
            .from_reader(body.as_bytes());
        let header: Vec<String> = match &schema.column_names {
            Some(names) => names.clone(),
            None => reader
                .headers()
                .map_err(csv_err)?
                .iter()
                .map(str::to_string)
                .collect(),
        };
        if header.is_empty() {
            return Err(DataError::Empty(source.to_string()));
        }
        // first occurrence wins for duplicated header names
        let mut index: HashMap<&str, usize> = HashMap::new();
        for (i, name) in header.iter().enumerate() {
            index.entry(name.as_str()).or_insert(i);
        }
        let lookup = |name: &str| {
            index
                .get(name)
                .copied()
                .ok_or_else(|| DataError::UnknownColumn(name.to_string()))
        };
        let s_col = lookup(&schema.sensitive_column)?;
        let y_col = lookup(&schema.outcome_column)?;
        let fair_cols = schema
            .fair_columns
            .iter()
            .map(|c| lookup(c))
            .collect::<Result<Vec<_>>>()?;
        let feature_names = schema.feature_columns(&header);
        let feature_cols = feature_names
            .iter()
            .map(|c| lookup(c))
            .collect::<Result<Vec<_>>>()?;
        let filters = schema
            .filters
            .iter()
            .map(|f| Ok((lookup(&f.column)?, &f.keep)))
            .collect::<Result<Vec<_>>>()?;
        for name in &schema.ignore_columns {
            lookup(name)?;
        }

        let mut table = RawTable {
            source: source.to_string(),
            sensitive: Vec::new(),
            outcome: Vec::new(),
            stratum_keys: Vec::new(),
            features: feature_names.into_iter().map(|n| (n, Vec::new())).collect(),
            dropped_rows: 0,
        };
        let used: Vec<usize> = [s_col, y_col]
            .into_iter()
            .chain(fair_cols.iter().copied())
            .chain(feature_cols.iter().copied())
            .collect();
        for record in reader.records() {
            let record = record.map_err(csv_err)?;
            if record.len() == 1 && record.get(0).is_some_and(str::is_empty) {
                continue;
            }
            let field = |i: usize| record.get(i).unwrap_or("");
            if filters
                .iter()
                .any(|(col, keep)| !keep.iter().any(|k| k == field(*col)))
            {
                continue;
            }
            if used
                .iter()
                .any(|&c| field(c).is_empty() || field(c) == schema.missing_token)
            {
                table.dropped_rows += 1;
                continue;
            }
            table.sensitive.push(field(s_col).to_string());
            table.outcome.push(field(y_col).to_string());
            let key: Vec<&str> = fair_cols.iter().map(|&c| field(c)).collect();
            table.stratum_keys.push(key.join(STRATUM_SEPARATOR));
            for ((_, values), &c) in table.features.iter_mut().zip(&feature_cols) {
                values.push(field(c).to_string());
            }
        }
        if table.sensitive.is_empty() {
            return Err(DataError::Empty(source.to_string()));
        }
        if table.dropped_rows > 0 {
            warn!(
                "{}: dropped {} rows with missing values",
                source, table.dropped_rows
            );
        }
        Ok(table)
    }

    pub fn len(&self) -> usize {
        self.sensitive.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sensitive.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ColumnEncoding {
    Numeric { name: String, mean: f64, std: f64 },
    Categorical { name: String, vocabulary: Vec<String> },
}

impl ColumnEncoding {
    pub fn name(&self) -> &str {
        match self {
            ColumnEncoding::Numeric { name, .. } | ColumnEncoding::Categorical { name, .. } => name,
        }
    }

    pub fn width(&self) -> usize {
        match self {
            ColumnEncoding::Numeric { .. } => 1,
            ColumnEncoding::Categorical { vocabulary, .. } => vocabulary.len(),
        }
    }
}

/// Encoding fitted on a training table: one-hot vocabularies, numeric
/// standardization statistics and the stratum vocabulary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Encoder {
    pub schema: SchemaSpec,
    pub columns: Vec<ColumnEncoding>,
    pub strata: Vec<String>,
}

fn distinct(values: &[String]) -> Vec<String> {
    values
        .iter()
        .cloned()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect()
}

fn check_binary(column: &str, values: &[String]) -> Result<()> {
    let d = distinct(values);
    if d.len() > 2 {
        return Err(DataError::NonBinary {
            column: column.to_string(),
            values: d,
        });
    }
    Ok(())
}

impl Encoder {
    pub fn fit(raw: &RawTable, schema: &SchemaSpec) -> Result<Self> {
        check_binary(&schema.sensitive_column, &raw.sensitive)?;
        check_binary(&schema.outcome_column, &raw.outcome)?;
        let columns = raw
            .features
            .iter()
            .map(|(name, values)| {
                let forced = schema.fair_columns.contains(name)
                    || schema.categorical_columns.contains(name);
                let parsed: Option<Vec<f64>> = if forced {
                    None
                } else {
                    values.iter().map(|v| v.parse::<f64>().ok()).collect()
                };
                match parsed {
                    Some(nums) => {
                        let n = nums.len() as f64;
                        let mean = nums.iter().sum::<f64>() / n;
                        let var = nums.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
                        let std = if var > 0.0 { var.sqrt() } else { 1.0 };
                        ColumnEncoding::Numeric {
                            name: name.clone(),
                            mean,
                            std,
                        }
                    }
                    None => ColumnEncoding::Categorical {
                        name: name.clone(),
                        vocabulary: distinct(values),
                    },
                }
            })
            .collect();
        Ok(Self {
            schema: schema.clone(),
            columns,
            strata: distinct(&raw.stratum_keys),
        })
    }

    pub fn width(&self) -> usize {
        self.columns.iter().map(ColumnEncoding::width).sum()
    }

    pub fn feature_names(&self) -> Vec<String> {
        let mut out = Vec::with_capacity(self.width());
        for col in &self.columns {
            match col {
                ColumnEncoding::Numeric { name, .. } => out.push(name.clone()),
                ColumnEncoding::Categorical { name, vocabulary } => {
                    out.extend(vocabulary.iter().map(|v| format!("{name}={v}")))
                }
            }
        }
        out
    }

    pub fn encode(&self, raw: &RawTable) -> Result<FairDataset> {
        check_binary(&self.schema.sensitive_column, &raw.sensitive)?;
        check_binary(&self.schema.outcome_column, &raw.outcome)?;
        if raw.features.len() != self.columns.len() {
            return Err(DataError::Schema(format!(
                "{}: {} feature columns, encoder expects {}",
                raw.source,
                raw.features.len(),
                self.columns.len()
            )));
        }
        let n = raw.len();
        let s: Vec<u8> = raw
            .sensitive
            .iter()
            .map(|v| u8::from(self.schema.privileged_group_labels.contains(v)))
            .collect();
        let y: Vec<u8> = raw
            .outcome
            .iter()
            .map(|v| u8::from(self.schema.positive_outcome_labels.contains(v)))
            .collect();

        let mut labels = self.strata.clone();
        let known = labels.len();
        let mut lookup: HashMap<String, usize> = labels
            .iter()
            .enumerate()
            .map(|(i, l)| (l.clone(), i))
            .collect();
        let mut f_id = Vec::with_capacity(n);
        for key in &raw.stratum_keys {
            let next = labels.len();
            let id = *lookup.entry(key.clone()).or_insert_with(|| {
                labels.push(key.clone());
                next
            });
            f_id.push(id);
        }
        if labels.len() > known {
            warn!(
                "{}: {} stratum value(s) not present in training data: {:?}",
                raw.source,
                labels.len() - known,
                &labels[known..]
            );
        }

        let width = self.width();
        let mut x = Matrix::zeros(n, width);
        let mut offset = 0;
        let mut unseen = 0usize;
        for (col, (_, values)) in self.columns.iter().zip(&raw.features) {
            match col {
                ColumnEncoding::Numeric { name, mean, std } => {
                    for (i, v) in values.iter().enumerate() {
                        let value: f64 = v.parse().map_err(|_| {
                            DataError::Schema(format!(
                                "{}: non-numeric value '{v}' in numeric column '{name}'",
                                raw.source
                            ))
                        })?;
                        x.set(i, offset, (value - mean) / std);
                    }
                }
                ColumnEncoding::Categorical { vocabulary, .. } => {
                    for (i, v) in values.iter().enumerate() {
                        match vocabulary.binary_search(v) {
                            Ok(k) => x.set(i, offset + k, 1.0),
                            Err(_) => unseen += 1,
                        }
                    }
                }
            }
            offset += col.width();
        }
        if unseen > 0 {
            warn!(
                "{}: {unseen} categorical value(s) outside the training vocabulary encoded as all-zero",
                raw.source
            );
        }

        let strata = StratumTable::from_assignments(labels, known, &s, &f_id);
        Ok(FairDataset {
            s,
            y,
            f_id,
            x,
            strata,
            feature_names: self.feature_names(),
            dropped_rows: raw.dropped_rows,
        })
    }

    /// Recovers the categorical label of `column` from an encoded row.
    pub fn decode_categorical(&self, row: &[f64], column: &str) -> Option<String> {
        let mut offset = 0;
        for col in &self.columns {
            if let ColumnEncoding::Categorical { name, vocabulary } = col {
                if name == column {
                    let slice = &row[offset..offset + vocabulary.len()];
                    return slice
                        .iter()
                        .position(|&v| v == 1.0)
                        .map(|k| vocabulary[k].clone());
                }
            }
            offset += col.width();
        }
        None
    }
}

/// Loads one CSV file, fitting the encoding on the file itself.
pub fn load_csv(path: impl AsRef<Path>, schema: &SchemaSpec) -> Result<FairDataset> {
    let raw = RawTable::read(path, schema)?;
    Encoder::fit(&raw, schema)?.encode(&raw)
}

/// Loads a train/test pair, fitting the encoding on the training file only.
pub fn load_train_test(
    train_path: impl AsRef<Path>,
    test_path: impl AsRef<Path>,
    schema: &SchemaSpec,
) -> Result<(FairDataset, FairDataset, Encoder)> {
    let train_raw = RawTable::read(train_path, schema)?;
    let encoder = Encoder::fit(&train_raw, schema)?;
    let train = encoder.encode(&train_raw)?;
    let test_raw = RawTable::read(test_path, schema)?;
    let test = encoder.encode(&test_raw)?;
    Ok((train, test, encoder))
}

#[cfg(test)]
mod tests {
    use super::*;

    const TOY: &str = "age,sex,dept,income\n\
                       30,M,a,yes\n\
                       40,F,a,no\n\
                       50,M,a,no\n\
                       ?,F,a,yes\n\
                       20,F,a,yes\n";

    fn schema() -> SchemaSpec {
        SchemaSpec::new("sex", "M", &["dept"], "income", "yes")
    }

    #[test]
    fn toy_file_single_stratum() {
        let raw = RawTable::parse(TOY, "toy", &schema()).unwrap();
        assert_eq!(raw.dropped_rows, 1);
        let data = Encoder::fit(&raw, &schema()).unwrap().encode(&raw).unwrap();
        assert_eq!(data.len(), 4);
        assert_eq!(data.strata.len(), 1);
        assert_eq!(data.strata.total(0), 4);
        assert_eq!(data.s, vec![1, 0, 1, 0]);
        assert_eq!(data.y, vec![1, 0, 0, 1]);
        assert_eq!(data.dropped_rows, 1);
        // dept one-hot (width 1) then standardized age
        assert_eq!(data.n_features(), 2);
        let ages: Vec<f64> = (0..4).map(|i| data.x.get(i, 1)).collect();
        let mean: f64 = ages.iter().sum::<f64>() / 4.0;
        let var: f64 = ages.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / 4.0;
        assert!(mean.abs() < 1e-12);
        assert!((var - 1.0).abs() < 1e-12);
    }

    #[test]
    fn unknown_column_reported() {
        let mut spec = schema();
        spec.fair_columns = vec!["occupation".into()];
        let err = RawTable::parse(TOY, "toy", &spec).unwrap_err();
        assert!(matches!(err, DataError::UnknownColumn(c) if c == "occupation"));
    }

    #[test]
    fn non_binary_sensitive_rejected() {
        let text = "s,y\na,1\nb,0\nc,1\n";
        let spec = SchemaSpec::new("s", "a", &[], "y", "1");
        let raw = RawTable::parse(text, "t", &spec).unwrap();
        assert!(matches!(
            Encoder::fit(&raw, &spec),
            Err(DataError::NonBinary { .. })
        ));
    }

    #[test]
    fn empty_file_rejected() {
        let spec = SchemaSpec::new("s", "a", &[], "y", "1");
        assert!(RawTable::parse("s,y\n", "t", &spec).is_err());
        assert!(RawTable::parse("", "t", &spec).is_err());
    }

    #[test]
    fn headerless_with_skip_and_filter() {
        let text = "junk line\n1, x, keep, 1\n2, y, keep, 0\n3, x, drop, 1\n";
        let mut spec = SchemaSpec::new("s", "x", &[], "y", "1");
        spec.column_names = Some(vec!["a".into(), "s".into(), "k".into(), "y".into()]);
        spec.skip_rows = 1;
        spec.ignore_columns = vec!["k".into()];
        spec.filters = vec![super::super::RowFilter {
            column: "k".into(),
            keep: vec!["keep".into()],
        }];
        let raw = RawTable::parse(text, "t", &spec).unwrap();
        assert_eq!(raw.len(), 2);
        assert_eq!(raw.features.len(), 1);
        assert_eq!(raw.features[0].0, "a");
    }

    #[test]
    fn one_hot_round_trip_and_unseen_test_values() {
        let train = "s,f,c,y\n1,a,red,1\n0,b,blue,0\n1,b,green,1\n0,a,red,0\n";
        let test = "s,f,c,y\n1,a,blue,1\n0,z,purple,0\n";
        let spec = SchemaSpec::new("s", "1", &["f"], "y", "1");
        let raw = RawTable::parse(train, "train", &spec).unwrap();
        let enc = Encoder::fit(&raw, &spec).unwrap();
        let data = enc.encode(&raw).unwrap();
        let colors = ["red", "blue", "green", "red"];
        let depts = ["a", "b", "b", "a"];
        for i in 0..4 {
            assert_eq!(enc.decode_categorical(data.x.row(i), "c").unwrap(), colors[i]);
            assert_eq!(enc.decode_categorical(data.x.row(i), "f").unwrap(), depts[i]);
        }
        let test_raw = RawTable::parse(test, "test", &spec).unwrap();
        let t = enc.encode(&test_raw).unwrap();
        assert_eq!(t.strata.known(), 2);
        assert_eq!(t.strata.len(), 3);
        assert_eq!(t.unseen_stratum_rows(), 1);
        assert_eq!(enc.decode_categorical(t.x.row(1), "c"), None);
    }
}
