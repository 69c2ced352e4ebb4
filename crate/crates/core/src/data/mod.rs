//! Observations, covariate schemas and dataset containers.
//!
//! Covariate values are stored uniformly as scalars: numeric columns hold the
//! measurement, ordinal and nominal columns hold the zero-based level index.

mod csv_io;
mod reformat;

use std::collections::HashSet;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::DataError;
use crate::scalar::Scalar;

pub use csv_io::{
    parse_covariate_csv, parse_long_csv, parse_ltrc_csv, read_long_csv, read_ltrc_csv, write_ltrc_csv, LongGroup,
};
pub use reformat::{make_pseudo_subjects, reformat_long_to_ltrc};

/// Reserved column names of the wide (one interval per row) format.
pub const WIDE_RESERVED: [&str; 4] = ["id", "left", "right", "event"];
/// Reserved column names of the long (one visit per row) format.
pub const LONG_RESERVED: [&str; 3] = ["id", "time", "event"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum CovariateKind {
    Numeric,
    Ordinal { levels: Vec<String> },
    Nominal { levels: Vec<String> },
}

impl CovariateKind {
    pub fn levels(&self) -> Option<&[String]> {
        match self {
            CovariateKind::Numeric => None,
            CovariateKind::Ordinal { levels } | CovariateKind::Nominal { levels } => Some(levels),
        }
    }

    pub fn is_nominal(&self) -> bool {
        matches!(self, CovariateKind::Nominal { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    #[serde(flatten)]
    pub kind: CovariateKind,
}

impl Column {
    pub fn numeric(name: &str) -> Self {
        Column {
            name: name.to_string(),
            kind: CovariateKind::Numeric,
        }
    }

    pub fn ordinal(name: &str, levels: &[&str]) -> Self {
        Column {
            name: name.to_string(),
            kind: CovariateKind::Ordinal {
                levels: levels.iter().map(|s| s.to_string()).collect(),
            },
        }
    }

    pub fn nominal(name: &str, levels: &[&str]) -> Self {
        Column {
            name: name.to_string(),
            kind: CovariateKind::Nominal {
                levels: levels.iter().map(|s| s.to_string()).collect(),
            },
        }
    }

    /// Parses one CSV cell into the stored scalar representation.
    fn parse_cell(&self, cell: &str, row: usize) -> Result<f64, DataError> {
        let cell = cell.trim();
        match &self.kind {
            CovariateKind::Numeric => {
                let v: f64 = cell.parse().map_err(|_| DataError::Parse {
                    row,
                    column: self.name.clone(),
                    value: cell.to_string(),
                })?;
                if !v.is_finite() {
                    return Err(DataError::Validation {
                        row,
                        message: format!("column '{}' is not finite", self.name),
                    });
                }
                Ok(v)
            }
            CovariateKind::Ordinal { levels } | CovariateKind::Nominal { levels } => levels
                .iter()
                .position(|l| l == cell)
                .map(|i| i as f64)
                .ok_or_else(|| {
                    DataError::Schema(format!(
                        "row {row}: unknown level '{cell}' for column '{}'",
                        self.name
                    ))
                }),
        }
    }

    /// Renders a stored value back to its CSV form.
    pub fn format_value<T: Scalar>(&self, value: T) -> String {
        match self.kind.levels() {
            None => format!("{}", value),
            Some(levels) => levels[value.as_f64() as usize].clone(),
        }
    }
}

/// Ordered covariate columns with unique names and valid level lists.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawSchema", into = "RawSchema")]
pub struct CovariateSchema {
    columns: Vec<Column>,
}

#[derive(Serialize, Deserialize)]
struct RawSchema {
    columns: Vec<Column>,
}

impl TryFrom<RawSchema> for CovariateSchema {
    type Error = DataError;
    fn try_from(raw: RawSchema) -> Result<Self, DataError> {
        CovariateSchema::new(raw.columns)
    }
}

impl From<CovariateSchema> for RawSchema {
    fn from(s: CovariateSchema) -> Self {
        RawSchema { columns: s.columns }
    }
}

impl CovariateSchema {
    pub fn new(columns: Vec<Column>) -> Result<Self, DataError> {
        let mut seen = HashSet::new();
        for col in &columns {
            if col.name.is_empty() {
                return Err(DataError::Schema("empty column name".into()));
            }
            if !seen.insert(col.name.as_str()) {
                return Err(DataError::Schema(format!("duplicate column '{}'", col.name)));
            }
            if WIDE_RESERVED.contains(&col.name.as_str()) || col.name == "time" {
                return Err(DataError::Schema(format!(
                    "column name '{}' is reserved",
                    col.name
                )));
            }
            if let Some(levels) = col.kind.levels() {
                if levels.is_empty() {
                    return Err(DataError::Schema(format!("column '{}' has no levels", col.name)));
                }
                let mut lv = HashSet::new();
                for l in levels {
                    if !lv.insert(l.as_str()) {
                        return Err(DataError::Schema(format!(
                            "column '{}' repeats level '{l}'",
                            col.name
                        )));
                    }
                }
            }
        }
        Ok(CovariateSchema { columns })
    }

    pub fn from_toml_str(s: &str) -> Result<Self, DataError> {
        toml::from_str(s).map_err(|e| DataError::Toml(e.to_string()))
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn column(&self, idx: usize) -> &Column {
        &self.columns[idx]
    }
}

/// Covariate values aligned to a schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
#[serde(bound = "T: Scalar")]
pub struct CovariateRow<T>(Vec<T>);

impl<T: Scalar> CovariateRow<T> {
    pub fn new(schema: &CovariateSchema, values: Vec<T>) -> Result<Self, DataError> {
        let row = CovariateRow(values);
        row.check(schema)?;
        Ok(row)
    }

    fn check(&self, schema: &CovariateSchema) -> Result<(), DataError> {
        if self.0.len() != schema.len() {
            return Err(DataError::Schema(format!(
                "row has {} covariates, schema has {}",
                self.0.len(),
                schema.len()
            )));
        }
        for (v, col) in self.0.iter().zip(schema.columns()) {
            if !v.is_finite() {
                return Err(DataError::Schema(format!("column '{}' is not finite", col.name)));
            }
            if let Some(levels) = col.kind.levels() {
                let f = v.as_f64();
                if f < 0.0 || f.fract() != 0.0 || f as usize >= levels.len() {
                    return Err(DataError::Schema(format!(
                        "column '{}' holds invalid level index {f}",
                        col.name
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn values(&self) -> &[T] {
        &self.0
    }

    pub fn get(&self, idx: usize) -> T {
        self.0[idx]
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// The survival part of an observation: entry `left`, exit `right`, event flag.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Span<T> {
    pub left: T,
    pub right: T,
    pub event: bool,
}

impl<T: Scalar> Span<T> {
    pub fn new(left: T, right: T, event: bool) -> Self {
        Span { left, right, event }
    }
}

/// One left-truncated, right-censored observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct LtrcRecord<T> {
    subject_id: String,
    left: T,
    right: T,
    event: bool,
    covariates: CovariateRow<T>,
}

impl<T: Scalar> LtrcRecord<T> {
    /// Checks `0 <= left < right` with finite times.
    pub fn new(
        subject_id: impl Into<String>,
        left: T,
        right: T,
        event: bool,
        covariates: CovariateRow<T>,
    ) -> Result<Self, DataError> {
        let subject_id = subject_id.into();
        if !left.is_finite() || !right.is_finite() {
            return Err(DataError::Argument(format!(
                "record '{subject_id}': times must be finite"
            )));
        }
        if left < T::zero() {
            return Err(DataError::Argument(format!(
                "record '{subject_id}': left = {left} is negative"
            )));
        }
        if left >= right {
            return Err(DataError::Argument(format!(
                "record '{subject_id}': left = {left} is not below right = {right}"
            )));
        }
        Ok(LtrcRecord {
            subject_id,
            left,
            right,
            event,
            covariates,
        })
    }

    pub fn subject_id(&self) -> &str {
        &self.subject_id
    }
    pub fn left(&self) -> T {
        self.left
    }
    pub fn right(&self) -> T {
        self.right
    }
    pub fn event(&self) -> bool {
        self.event
    }
    pub fn covariates(&self) -> &CovariateRow<T> {
        &self.covariates
    }
    pub fn span(&self) -> Span<T> {
        Span::new(self.left, self.right, self.event)
    }
}

/// Schema plus conforming records.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T> {
    schema: Arc<CovariateSchema>,
    records: Vec<LtrcRecord<T>>,
}

impl<T: Scalar> Dataset<T> {
    pub fn new(
        schema: impl Into<Arc<CovariateSchema>>,
        records: Vec<LtrcRecord<T>>,
    ) -> Result<Self, DataError> {
        let schema = schema.into();
        for (i, r) in records.iter().enumerate() {
            r.covariates.check(&schema).map_err(|e| DataError::Validation {
                row: i + 1,
                message: e.to_string(),
            })?;
        }
        Ok(Dataset { schema, records })
    }

    pub fn schema(&self) -> &CovariateSchema {
        &self.schema
    }

    pub fn shared_schema(&self) -> Arc<CovariateSchema> {
        Arc::clone(&self.schema)
    }

    pub fn records(&self) -> &[LtrcRecord<T>] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn spans(&self) -> Vec<Span<T>> {
        self.records.iter().map(LtrcRecord::span).collect()
    }

    pub fn event_count(&self) -> usize {
        self.records.iter().filter(|r| r.event).count()
    }

    /// Column-major copy of the covariate matrix.
    pub fn columns(&self) -> Vec<Vec<T>> {
        (0..self.schema.len())
            .map(|j| self.records.iter().map(|r| r.covariates.get(j)).collect())
            .collect()
    }

    /// Subset by record index, keeping the schema.
    pub fn subset(&self, indices: &[usize]) -> Dataset<T> {
        Dataset {
            schema: Arc::clone(&self.schema),
            records: indices.iter().map(|&i| self.records[i].clone()).collect(),
        }
    }

    pub fn to_document(&self) -> DatasetDocument<T> {
        DatasetDocument {
            format: DATASET_FORMAT.to_string(),
            version: DATASET_VERSION,
            schema: (*self.schema).clone(),
            records: self.records.clone(),
        }
    }

    pub fn to_json(&self) -> Result<String, DataError> {
        Ok(serde_json::to_string_pretty(&self.to_document())?)
    }

    pub fn from_json(s: &str) -> Result<Self, DataError> {
        let doc: DatasetDocument<T> = serde_json::from_str(s)?;
        doc.into_dataset()
    }
}

pub const DATASET_FORMAT: &str = "ltrc-dataset";
pub const DATASET_VERSION: u32 = 1;

/// Versioned JSON form of a [`Dataset`].
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct DatasetDocument<T> {
    pub format: String,
    pub version: u32,
    pub schema: CovariateSchema,
    pub records: Vec<LtrcRecord<T>>,
}

impl<T: Scalar> DatasetDocument<T> {
    pub fn into_dataset(self) -> Result<Dataset<T>, DataError> {
        if self.format != DATASET_FORMAT || self.version != DATASET_VERSION {
            return Err(DataError::Schema(format!(
                "unsupported dataset document {} v{}",
                self.format, self.version
            )));
        }
        // deserialization bypasses the record constructor
        let records = self
            .records
            .into_iter()
            .map(|r| LtrcRecord::new(r.subject_id, r.left, r.right, r.event, r.covariates))
            .collect::<Result<Vec<_>, _>>()?;
        Dataset::new(self.schema, records)
    }
}
