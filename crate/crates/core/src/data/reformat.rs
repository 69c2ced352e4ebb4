use super::{CovariateSchema, Dataset, LongGroup, LtrcRecord};
use crate::error::DataError;
use crate::scalar::Scalar;

/// Converts visit-row groups into pseudo-subject records: one record per visit, spanning
/// from that visit to the next (or to the terminal time), carrying the covariates measured
/// at the visit. Only the final record of a subject can carry the event.
pub fn reformat_long_to_ltrc<T: Scalar>(
    schema: &CovariateSchema,
    groups: &[LongGroup<T>],
) -> Result<Dataset<T>, DataError> {
    let mut records = Vec::new();
    for (g, group) in groups.iter().enumerate() {
        let n = group.visits.len();
        if n < 2 {
            return Err(DataError::Validation {
                row: g + 1,
                message: format!("subject '{}' has no terminal row", group.subject_id),
            });
        }
        let terminal = &group.visits[n - 1];
        let measurements = &group.visits[..n - 1];
        let last_time = measurements[n - 2].time;
        if terminal.time <= last_time {
            return Err(DataError::Validation {
                row: g + 1,
                message: format!(
                    "subject '{}': terminal time {} does not exceed last measurement {}",
                    group.subject_id, terminal.time, last_time
                ),
            });
        }
        for (k, visit) in measurements.iter().enumerate() {
            let covariates = visit.covariates.clone().ok_or_else(|| DataError::Validation {
                row: g + 1,
                message: format!("subject '{}': visit without covariates", group.subject_id),
            })?;
            let (right, event) = if k + 1 < measurements.len() {
                (measurements[k + 1].time, false)
            } else {
                (terminal.time, terminal.event)
            };
            let rec = LtrcRecord::new(group.subject_id.clone(), visit.time, right, event, covariates)
                .map_err(|e| DataError::Validation {
                    row: g + 1,
                    message: e.to_string(),
                })?;
            records.push(rec);
        }
    }
    Dataset::new(schema.clone(), records)
}

/// Splits one record at interior cut times. Every piece keeps the covariates; only the
/// last piece keeps the event flag.
pub fn make_pseudo_subjects<T: Scalar>(
    rec: &LtrcRecord<T>,
    cuts: &[T],
) -> Result<Vec<LtrcRecord<T>>, DataError> {
    let mut prev = rec.left();
    for &c in cuts {
        if !(c > prev && c < rec.right()) {
            return Err(DataError::Argument(format!(
                "cut {c} must lie strictly inside ({}, {}) and increase",
                rec.left(),
                rec.right()
            )));
        }
        prev = c;
    }
    let bounds: Vec<T> = std::iter::once(rec.left())
        .chain(cuts.iter().copied())
        .chain(std::iter::once(rec.right()))
        .collect();
    let last = bounds.len() - 2;
    bounds
        .windows(2)
        .enumerate()
        .map(|(k, w)| {
            LtrcRecord::new(
                rec.subject_id().to_string(),
                w[0],
                w[1],
                k == last && rec.event(),
                rec.covariates().clone(),
            )
        })
        .collect()
}
