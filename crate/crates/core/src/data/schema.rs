use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::DataError;

/// Keeps only rows whose `column` value is one of `keep`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowFilter {
    pub column: String,
    pub keep: Vec<String>,
}

/// Column roles of a tabular fairness dataset.
///
/// Loaded from TOML, for example:
///
/// ```toml
/// sensitive_column = "sex"
/// privileged_group_labels = ["Male"]
/// fair_columns = ["occupation"]
/// outcome_column = "income"
/// positive_outcome_labels = [">50K", ">50K."]
/// ignore_columns = ["fnlwgt", "education-num"]
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemaSpec {
    pub sensitive_column: String,
    /// Raw values mapped to S=1. Every other value maps to S=0.
    pub privileged_group_labels: Vec<String>,
    /// Categorical fair variables; their joint value defines the stratum.
    #[serde(default)]
    pub fair_columns: Vec<String>,
    pub outcome_column: String,
    /// Raw values mapped to Y=1.
    pub positive_outcome_labels: Vec<String>,
    /// Remaining features. `None` means every column not otherwise assigned
    /// or ignored.
    #[serde(default)]
    pub other_columns: Option<Vec<String>>,
    #[serde(default)]
    pub ignore_columns: Vec<String>,
    /// Columns forced to one-hot encoding even if they parse as numbers.
    #[serde(default)]
    pub categorical_columns: Vec<String>,
    /// Column names for header-less files.
    #[serde(default)]
    pub column_names: Option<Vec<String>>,
    #[serde(default = "default_missing_token")]
    pub missing_token: String,
    /// Leading lines to discard before the header (or first record).
    #[serde(default)]
    pub skip_rows: usize,
    #[serde(default)]
    pub filters: Vec<RowFilter>,
}

fn default_missing_token() -> String {
    "?".to_string()
}

impl SchemaSpec {
    /// Minimal schema with the given roles and every other column as a feature.
    pub fn new(
        sensitive_column: &str,
        privileged: &str,
        fair_columns: &[&str],
        outcome_column: &str,
        positive: &str,
    ) -> Self {
        Self {
            sensitive_column: sensitive_column.to_string(),
            privileged_group_labels: vec![privileged.to_string()],
            fair_columns: fair_columns.iter().map(|s| s.to_string()).collect(),
            outcome_column: outcome_column.to_string(),
            positive_outcome_labels: vec![positive.to_string()],
            other_columns: None,
            ignore_columns: Vec::new(),
            categorical_columns: Vec::new(),
            column_names: None,
            missing_token: default_missing_token(),
            skip_rows: 0,
            filters: Vec::new(),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self, DataError> {
        let spec: SchemaSpec =
            toml::from_str(text).map_err(|e| DataError::Schema(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, DataError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| DataError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    /// Checks that the role sets are disjoint.
    pub fn validate(&self) -> Result<(), DataError> {
        let mut seen = HashSet::new();
        let mut roles: Vec<&str> = vec![&self.sensitive_column, &self.outcome_column];
        roles.extend(self.fair_columns.iter().map(String::as_str));
        if let Some(other) = &self.other_columns {
            roles.extend(other.iter().map(String::as_str));
        }
        for name in roles {
            if !seen.insert(name) {
                return Err(DataError::Schema(format!(
                    "column '{name}' is assigned more than one role"
                )));
            }
        }
        for name in &self.ignore_columns {
            if seen.contains(name.as_str()) {
                return Err(DataError::Schema(format!(
                    "column '{name}' is both ignored and assigned a role"
                )));
            }
        }
        if self.privileged_group_labels.is_empty() || self.positive_outcome_labels.is_empty() {
            return Err(DataError::Schema(
                "privileged_group_labels and positive_outcome_labels must be nonempty".into(),
            ));
        }
        Ok(())
    }

    /// Feature columns in encoding order: fair columns first, then the others.
    pub(crate) fn feature_columns(&self, header: &[String]) -> Vec<String> {
        let mut out = self.fair_columns.clone();
        match &self.other_columns {
            Some(other) => out.extend(other.iter().cloned()),
            None => {
                for name in header {
                    let assigned = name == &self.sensitive_column
                        || name == &self.outcome_column
                        || self.fair_columns.contains(name)
                        || self.ignore_columns.contains(name);
                    if !assigned && !out.contains(name) {
                        out.push(name.clone());
                    }
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_toml() {
        let spec = SchemaSpec::from_toml_str(
            r#"
            sensitive_column = "sex"
            privileged_group_labels = ["Male"]
            fair_columns = ["occupation"]
            outcome_column = "income"
            positive_outcome_labels = [">50K", ">50K."]
            ignore_columns = ["fnlwgt"]
            "#,
        )
        .unwrap();
        assert_eq!(spec.missing_token, "?");
        assert_eq!(spec.fair_columns, vec!["occupation"]);
        let header: Vec<String> = ["age", "sex", "occupation", "fnlwgt", "income"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        assert_eq!(spec.feature_columns(&header), vec!["occupation", "age"]);
    }

    #[test]
    fn overlapping_roles_rejected() {
        let mut spec = SchemaSpec::new("s", "1", &["s"], "y", "1");
        assert!(spec.validate().is_err());
        spec.fair_columns = vec!["f".into()];
        spec.ignore_columns = vec!["f".into()];
        assert!(spec.validate().is_err());
    }

    #[test]
    fn unknown_key_rejected() {
        let err = SchemaSpec::from_toml_str(
            r#"
            sensitive_column = "s"
            privileged_group_labels = ["1"]
            outcome_column = "y"
            positive_outcome_labels = ["1"]
            bogus = 3
            "#,
        );
        assert!(err.is_err());
    }
}
