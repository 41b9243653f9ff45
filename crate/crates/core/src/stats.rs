//! Method-level rank correlations over validation results, plus
//! distribution summaries of each metric.

use std::io::Write;

use crate::affinity::{spearman, Spearman};
use crate::validate::ValidationRow;

#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationReport {
    pub label: String,
    /// Rows that entered the correlations.
    pub methods: usize,
    /// Rows dropped for having no evaluated invocation or too few calls.
    pub excluded: usize,
    /// OO match rate vs termination rate.
    pub cot: Option<Spearman>,
    /// Termination rate vs number of accesses.
    pub ctn: Option<Spearman>,
    /// OO match rate vs number of accesses.
    pub con: Option<Spearman>,
    /// Termination rate vs method size.
    pub cts: Option<Spearman>,
    /// OO match rate vs method size.
    pub cos: Option<Spearman>,
}

struct Columns {
    term: Vec<f64>,
    oo: Vec<f64>,
    accesses: Vec<f64>,
    size: Vec<f64>,
}

fn usable(r: &ValidationRow, min_calls: usize) -> bool {
    r.calls_evaluated > 0
        && r.calls_evaluated >= min_calls
        && r.termination_rate.is_some()
        && r.oo_match_rate.is_some()
}

fn columns(rows: &[ValidationRow], min_calls: usize) -> Columns {
    let kept: Vec<&ValidationRow> = rows.iter().filter(|r| usable(r, min_calls)).collect();
    Columns {
        term: kept.iter().filter_map(|r| r.termination_rate).collect(),
        oo: kept.iter().filter_map(|r| r.oo_match_rate).collect(),
        accesses: kept.iter().map(|r| r.num_accesses as f64).collect(),
        size: kept.iter().map(|r| r.method_size as f64).collect(),
    }
}

fn rho(u: &[f64], v: &[f64]) -> Option<Spearman> {
    spearman(u, v).expect("columns share a length")
}

/// The five correlations over methods with at least one evaluated
/// invocation and at least `min_calls` of them.
pub fn correlation_report(rows: &[ValidationRow], label: &str, min_calls: usize) -> CorrelationReport {
    let c = columns(rows, min_calls);
    CorrelationReport {
        label: label.to_string(),
        methods: c.term.len(),
        excluded: rows.len() - c.term.len(),
        cot: rho(&c.oo, &c.term),
        ctn: rho(&c.term, &c.accesses),
        con: rho(&c.oo, &c.accesses),
        cts: rho(&c.term, &c.size),
        cos: rho(&c.oo, &c.size),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub metric: &'static str,
    pub mean: f64,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

fn summarize(metric: &'static str, mut xs: Vec<f64>) -> Option<Summary> {
    if xs.is_empty() {
        return None;
    }
    xs.sort_by(f64::total_cmp);
    Some(Summary {
        metric,
        mean: xs.iter().sum::<f64>() / xs.len() as f64,
        median: quantile(&xs, 0.5),
        q1: quantile(&xs, 0.25),
        q3: quantile(&xs, 0.75),
    })
}

/// Mean, median and quartiles of each metric over the same rows the
/// correlations use.
pub fn summaries(rows: &[ValidationRow], min_calls: usize) -> Vec<Summary> {
    let c = columns(rows, min_calls);
    [
        ("termination_rate", c.term),
        ("oo_match_rate", c.oo),
        ("num_accesses", c.accesses),
        ("method_size", c.size),
    ]
    .into_iter()
    .filter_map(|(m, xs)| summarize(m, xs))
    .collect()
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| format!("{x:?}")).unwrap_or_default()
}

fn coefficients(r: &CorrelationReport) -> [Option<Spearman>; 5] {
    [r.cot, r.ctn, r.con, r.cts, r.cos]
}

/// `label,methods,cot,ctn,con,cts,cos`, one row per report.
pub fn write_correlation_csv<W: Write>(reports: &[CorrelationReport], comment: Option<&str>, mut w: W) -> std::io::Result<()> {
    if let Some(c) = comment {
        writeln!(w, "# {c}")?;
    }
    writeln!(w, "label,methods,cot,ctn,con,cts,cos")?;
    for r in reports {
        let cells: Vec<String> = coefficients(r).iter().map(|s| cell(s.map(|s| s.rho))).collect();
        writeln!(w, "{},{},{}", r.label, r.methods, cells.join(","))?;
    }
    w.flush()
}

/// Same layout as the correlation table, holding p-values instead.
pub fn write_pvalue_csv<W: Write>(reports: &[CorrelationReport], comment: Option<&str>, mut w: W) -> std::io::Result<()> {
    if let Some(c) = comment {
        writeln!(w, "# {c}")?;
    }
    writeln!(w, "label,methods,cot,ctn,con,cts,cos")?;
    for r in reports {
        let cells: Vec<String> = coefficients(r).iter().map(|s| cell(s.map(|s| s.p_value))).collect();
        writeln!(w, "{},{},{}", r.label, r.methods, cells.join(","))?;
    }
    w.flush()
}

/// `metric,mean,median,q1,q3`
pub fn write_summary_csv<W: Write>(rows: &[Summary], comment: Option<&str>, mut w: W) -> std::io::Result<()> {
    if let Some(c) = comment {
        writeln!(w, "# {c}")?;
    }
    writeln!(w, "metric,mean,median,q1,q3")?;
    for s in rows {
        writeln!(w, "{},{:?},{:?},{:?},{:?}", s.metric, s.mean, s.median, s.q1, s.q3)?;
    }
    w.flush()
}
