use std::collections::HashMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use super::{
    Column, CovariateRow, CovariateSchema, Dataset, LtrcRecord, LONG_RESERVED, WIDE_RESERVED,
};
use crate::error::DataError;
use crate::scalar::Scalar;

/// Visit rows of one subject in time order; the last row is the terminal (exit) row.
#[derive(Debug, Clone, PartialEq)]
pub struct LongGroup<T> {
    pub subject_id: String,
    pub visits: Vec<LongVisitRecord<T>>,
}

/// One row of the long format. The terminal row may omit covariates.
#[derive(Debug, Clone, PartialEq)]
pub struct LongVisitRecord<T> {
    pub subject_id: String,
    pub time: T,
    pub covariates: Option<CovariateRow<T>>,
    pub event: bool,
}

fn open(path: &Path) -> Result<File, DataError> {
    File::open(path).map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Maps each expected column name to its position in the header.
fn header_positions(
    header: &csv::StringRecord,
    reserved: &[&str],
    schema: &CovariateSchema,
) -> Result<HashMap<String, usize>, DataError> {
    let mut pos = HashMap::new();
    for (i, name) in header.iter().enumerate() {
        let name = name.trim();
        if pos.insert(name.to_string(), i).is_some() {
            return Err(DataError::Schema(format!("header repeats column '{name}'")));
        }
    }
    let expected: Vec<&str> = reserved
        .iter()
        .copied()
        .chain(schema.columns().iter().map(|c| c.name.as_str()))
        .collect();
    for name in &expected {
        if !pos.contains_key(*name) {
            return Err(DataError::Schema(format!("header lacks column '{name}'")));
        }
    }
    if let Some(extra) = pos.keys().find(|k| !expected.contains(&k.as_str())) {
        return Err(DataError::Schema(format!("header has unknown column '{extra}'")));
    }
    Ok(pos)
}

fn parse_time(cell: &str, row: usize, column: &str) -> Result<f64, DataError> {
    let v: f64 = cell.trim().parse().map_err(|_| DataError::Parse {
        row,
        column: column.to_string(),
        value: cell.to_string(),
    })?;
    if !v.is_finite() {
        return Err(DataError::Validation {
            row,
            message: format!("{column} is not finite"),
        });
    }
    Ok(v)
}

fn parse_flag(cell: &str, row: usize) -> Result<bool, DataError> {
    match cell.trim() {
        "0" => Ok(false),
        "1" => Ok(true),
        other => Err(DataError::Parse {
            row,
            column: "event".into(),
            value: other.to_string(),
        }),
    }
}

fn parse_covariates<T: Scalar>(
    schema: &CovariateSchema,
    pos: &HashMap<String, usize>,
    rec: &csv::StringRecord,
    row: usize,
) -> Result<Vec<T>, DataError> {
    schema
        .columns()
        .iter()
        .map(|col: &Column| {
            let cell = rec.get(pos[&col.name]).unwrap_or("");
            if cell.trim().is_empty() {
                return Err(DataError::Validation {
                    row,
                    message: format!("missing value for '{}'", col.name),
                });
            }
            col.parse_cell(cell, row).map(T::lit)
        })
        .collect()
}

/// Reads the wide format: reserved columns `id,left,right,event` plus one column per
/// schema entry, in any order. Rows are kept in file order.
pub fn parse_ltrc_csv<T: Scalar, R: Read>(
    input: R,
    schema: &CovariateSchema,
) -> Result<Dataset<T>, DataError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let pos = header_positions(reader.headers()?, &WIDE_RESERVED, schema)?;
    let mut records = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let row = i + 1;
        let rec = rec?;
        let id = rec.get(pos["id"]).unwrap_or("").trim().to_string();
        if id.is_empty() {
            return Err(DataError::Validation {
                row,
                message: "empty id".into(),
            });
        }
        let left = parse_time(rec.get(pos["left"]).unwrap_or(""), row, "left")?;
        let right = parse_time(rec.get(pos["right"]).unwrap_or(""), row, "right")?;
        let event = parse_flag(rec.get(pos["event"]).unwrap_or(""), row)?;
        let values = parse_covariates::<T>(schema, &pos, &rec, row)?;
        let covariates = CovariateRow::new(schema, values)?;
        let record = LtrcRecord::new(id, T::lit(left), T::lit(right), event, covariates)
            .map_err(|e| DataError::Validation {
                row,
                message: e.to_string(),
            })?;
        records.push(record);
    }
    Dataset::new(schema.clone(), records)
}

/// Reads subject ids and covariates for prediction. The reserved columns `left`, `right`
/// and `event` may be present and are ignored, so a wide training file can be scored
/// directly.
pub fn parse_covariate_csv<T: Scalar, R: Read>(
    input: R,
    schema: &CovariateSchema,
) -> Result<Vec<(String, CovariateRow<T>)>, DataError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let header = reader.headers()?.clone();
    let optional = ["left", "right", "event"];
    let kept: csv::StringRecord = header
        .iter()
        .filter(|h| !optional.contains(&h.trim()))
        .collect();
    let pos = header_positions(&kept, &["id"], schema)?;
    let index: Vec<usize> = header
        .iter()
        .enumerate()
        .filter(|(_, h)| !optional.contains(&h.trim()))
        .map(|(i, _)| i)
        .collect();
    let mut out = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let row = i + 1;
        let rec = rec?;
        let rec: csv::StringRecord = index.iter().map(|&k| rec.get(k).unwrap_or("")).collect();
        let id = rec.get(pos["id"]).unwrap_or("").trim().to_string();
        if id.is_empty() {
            return Err(DataError::Validation {
                row,
                message: "empty id".into(),
            });
        }
        let values = parse_covariates::<T>(schema, &pos, &rec, row)?;
        out.push((id, CovariateRow::new(schema, values)?));
    }
    Ok(out)
}

pub fn read_ltrc_csv<T: Scalar>(
    path: &Path,
    schema: &CovariateSchema,
) -> Result<Dataset<T>, DataError> {
    parse_ltrc_csv(open(path)?, schema)
}

/// Writes the wide format with covariates in schema order. Numeric values use the
/// shortest representation that parses back to the same value.
pub fn write_ltrc_csv<T: Scalar, W: Write>(data: &Dataset<T>, out: W) -> Result<(), DataError> {
    let schema = data.schema();
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<&str> = WIDE_RESERVED.to_vec();
    header.extend(schema.columns().iter().map(|c| c.name.as_str()));
    w.write_record(&header)?;
    for r in data.records() {
        let mut fields = vec![
            r.subject_id().to_string(),
            format!("{}", r.left()),
            format!("{}", r.right()),
            if r.event() { "1" } else { "0" }.to_string(),
        ];
        fields.extend(
            schema
                .columns()
                .iter()
                .zip(r.covariates().values())
                .map(|(c, &v)| c.format_value(v)),
        );
        w.write_record(&fields)?;
    }
    w.flush().map_err(|source| DataError::Io {
        path: "<output>".into(),
        source,
    })?;
    Ok(())
}

/// Reads the long format (`id,time,event` plus covariates) and groups rows by subject
/// in order of first appearance, each group sorted by time.
pub fn parse_long_csv<T: Scalar, R: Read>(
    input: R,
    schema: &CovariateSchema,
) -> Result<Vec<LongGroup<T>>, DataError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let pos = header_positions(reader.headers()?, &LONG_RESERVED, schema)?;
    let mut order: Vec<String> = Vec::new();
    let mut groups: HashMap<String, Vec<(usize, f64, bool, csv::StringRecord)>> = HashMap::new();
    for (i, rec) in reader.records().enumerate() {
        let row = i + 1;
        let rec = rec?;
        let id = rec.get(pos["id"]).unwrap_or("").trim().to_string();
        if id.is_empty() {
            return Err(DataError::Validation {
                row,
                message: "empty id".into(),
            });
        }
        let time = parse_time(rec.get(pos["time"]).unwrap_or(""), row, "time")?;
        let event = parse_flag(rec.get(pos["event"]).unwrap_or(""), row)?;
        if !groups.contains_key(&id) {
            order.push(id.clone());
        }
        groups.entry(id).or_default().push((row, time, event, rec));
    }

    let mut out = Vec::with_capacity(order.len());
    for id in order {
        let mut rows = groups.remove(&id).expect("group exists");
        rows.sort_by(|a, b| a.1.total_cmp(&b.1));
        for w in rows.windows(2) {
            if w[0].1 == w[1].1 {
                return Err(DataError::Validation {
                    row: w[1].0,
                    message: format!("subject '{id}' repeats time {}", w[1].1),
                });
            }
        }
        if rows.len() < 2 {
            return Err(DataError::Validation {
                row: rows[0].0,
                message: format!(
                    "subject '{id}' needs at least one visit row and a terminal row"
                ),
            });
        }
        let last = rows.len() - 1;
        let mut visits = Vec::with_capacity(rows.len());
        for (k, (row, time, event, rec)) in rows.into_iter().enumerate() {
            if event && k != last {
                return Err(DataError::Validation {
                    row,
                    message: format!("subject '{id}' has an event before its final row"),
                });
            }
            let blank = schema
                .columns()
                .iter()
                .all(|c| rec.get(pos[&c.name]).unwrap_or("").trim().is_empty());
            let covariates = if k == last && blank {
                None
            } else {
                let values = parse_covariates::<T>(schema, &pos, &rec, row)?;
                Some(CovariateRow::new(schema, values)?)
            };
            visits.push(LongVisitRecord {
                subject_id: id.clone(),
                time: T::lit(time),
                covariates,
                event,
            });
        }
        out.push(LongGroup {
            subject_id: id,
            visits,
        });
    }
    Ok(out)
}

pub fn read_long_csv<T: Scalar>(
    path: &Path,
    schema: &CovariateSchema,
) -> Result<Vec<LongGroup<T>>, DataError> {
    parse_long_csv(open(path)?, schema)
}
