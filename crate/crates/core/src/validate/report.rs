use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{MethodValidation, ValidateError};

pub const VALIDATION_HEADER: &str =
    "method,calls_evaluated,termination_rate,oo_match_rate,method_size,num_accesses,capped_invocations";

/// One line of the validation report. Absent rates are empty cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationRow {
    pub method: String,
    pub calls_evaluated: usize,
    pub termination_rate: Option<f64>,
    pub oo_match_rate: Option<f64>,
    pub method_size: usize,
    pub num_accesses: usize,
    pub capped_invocations: usize,
}

impl MethodValidation {
    /// Report row; `name` overrides the method id in the `method` column.
    pub fn row(&self, name: Option<&str>) -> ValidationRow {
        ValidationRow {
            method: name.map_or_else(|| self.method.to_string(), str::to_string),
            calls_evaluated: self.calls_evaluated,
            termination_rate: self.termination_rate,
            oo_match_rate: self.oo_match_rate,
            method_size: self.method_size,
            num_accesses: self.num_accesses,
            capped_invocations: self.capped_invocations,
        }
    }
}

#[derive(Serialize)]
struct DetailRow<'a> {
    method: &'a str,
    calls_evaluated: usize,
    terminated: usize,
    matched: usize,
    skipped: usize,
    discarded: usize,
    capped_invocations: usize,
    termination_rate: Option<f64>,
    oo_match_rate: Option<f64>,
    mean_invocation_match_rate: Option<f64>,
}

fn csv_err(e: csv::Error) -> ValidateError {
    ValidateError::Report(e.to_string())
}

fn comment_line<W: Write>(w: &mut W, comment: Option<&str>) -> Result<(), ValidateError> {
    if let Some(c) = comment {
        writeln!(w, "# {c}").map_err(|e| ValidateError::Report(e.to_string()))?;
    }
    Ok(())
}

/// Writes rows under an optional `# ...` comment line.
pub fn write_validation_csv<W: Write>(rows: &[ValidationRow], comment: Option<&str>, mut w: W) -> Result<(), ValidateError> {
    comment_line(&mut w, comment)?;
    let mut out = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    out.write_record(VALIDATION_HEADER.split(',')).map_err(csv_err)?;
    for r in rows {
        out.serialize(r).map_err(csv_err)?;
    }
    out.flush().map_err(|e| ValidateError::Report(e.to_string()))
}

/// Companion report with raw counts and the per-invocation mean match rate.
pub fn write_detail_csv<W: Write>(
    rows: &[(String, &MethodValidation)],
    comment: Option<&str>,
    mut w: W,
) -> Result<(), ValidateError> {
    comment_line(&mut w, comment)?;
    let mut out = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    out.write_record([
        "method",
        "calls_evaluated",
        "terminated",
        "matched",
        "skipped",
        "discarded",
        "capped_invocations",
        "termination_rate",
        "oo_match_rate",
        "mean_invocation_match_rate",
    ])
    .map_err(csv_err)?;
    for (name, v) in rows {
        out.serialize(DetailRow {
            method: name,
            calls_evaluated: v.calls_evaluated,
            terminated: v.terminated,
            matched: v.matched,
            skipped: v.skipped,
            discarded: v.discarded,
            capped_invocations: v.capped_invocations,
            termination_rate: v.termination_rate,
            oo_match_rate: v.oo_match_rate,
            mean_invocation_match_rate: v.mean_invocation_match_rate,
        })
        .map_err(csv_err)?;
    }
    out.flush().map_err(|e| ValidateError::Report(e.to_string()))
}

pub fn read_validation_csv<R: Read>(r: R) -> Result<Vec<ValidationRow>, ValidateError> {
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(r);
    let header = rdr.headers().map_err(csv_err)?.iter().collect::<Vec<_>>().join(",");
    if header != VALIDATION_HEADER {
        return Err(ValidateError::Report(format!("unexpected header `{header}`")));
    }
    let mut rows = Vec::new();
    for rec in rdr.deserialize() {
        let row: ValidationRow = rec.map_err(csv_err)?;
        for rate in [row.termination_rate, row.oo_match_rate].into_iter().flatten() {
            if !(0.0..=1.0).contains(&rate) {
                return Err(ValidateError::Report(format!("{}: rate {rate} outside [0, 1]", row.method)));
            }
        }
        rows.push(row);
    }
    Ok(rows)
}
