//! Metric tables and severity-curve data.
//!
//! Tables have one column per cell (unaltered first) and one row per
//! metric, as percentages with two decimals. Undefined metrics print as
//! `-`. Curve data is long-format CSV for external plotting.

use std::fmt::Write as _;
use std::time::{SystemTime, UNIX_EPOCH};

use thiserror::Error;

use crate::metrics::{CellId, MetricsCell};

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("table line {line}: {message}")]
    Parse { line: usize, message: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub detector_id: String,
    pub plan_digest: Option<String>,
    /// Sorted: unaltered first, then by family and severity index.
    pub cells: Vec<MetricsCell>,
    /// Seconds since the Unix epoch.
    pub generated_at: u64,
}

impl MetricsReport {
    pub fn new(detector_id: impl Into<String>, plan_digest: Option<String>, mut cells: Vec<MetricsCell>) -> Self {
        cells.sort_by(|a, b| a.cell.cmp(&b.cell));
        let generated_at = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        Self {
            detector_id: detector_id.into(),
            plan_digest,
            cells,
            generated_at,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFormat {
    /// Space-aligned plain text.
    Grid,
    Markdown,
    /// CSV keyed by full cell ids; re-parseable with [`parse_delimited`].
    Delimited,
}

impl std::str::FromStr for TableFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "grid" | "plain" | "plain-grid" => Ok(TableFormat::Grid),
            "markdown" | "md" => Ok(TableFormat::Markdown),
            "delimited" | "csv" => Ok(TableFormat::Delimited),
            other => Err(format!("unknown table format `{other}` (grid, markdown, delimited)")),
        }
    }
}

const METRICS: [&str; 3] = ["AUC", "ACC", "F1"];

fn metric(cell: &MetricsCell, name: &str) -> Option<f64> {
    match name {
        "AUC" => cell.auc,
        "ACC" => cell.acc,
        "F1" => cell.f1,
        _ => None,
    }
}

fn percent(v: Option<f64>) -> String {
    match v {
        Some(v) => format!("{:.2}", v * 100.0),
        None => "-".to_string(),
    }
}

pub fn emit_table(report: &MetricsReport, format: TableFormat) -> String {
    match format {
        TableFormat::Grid => emit_grid(report),
        TableFormat::Markdown => emit_markdown(report),
        TableFormat::Delimited => emit_delimited(&report.cells),
    }
}

fn emit_grid(report: &MetricsReport) -> String {
    let mut rows: Vec<Vec<String>> = Vec::new();
    let mut header = vec!["Metric".to_string()];
    header.extend(report.cells.iter().map(|c| c.cell.column_label()));
    rows.push(header);
    for name in METRICS {
        let mut row = vec![name.to_string()];
        row.extend(report.cells.iter().map(|c| percent(metric(c, name))));
        rows.push(row);
    }
    let widths: Vec<usize> = (0..rows[0].len())
        .map(|i| rows.iter().map(|r| r[i].chars().count()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for row in rows {
        let line: Vec<String> = row
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(i, (v, w))| if i == 0 { format!("{v:<w$}") } else { format!("{v:>w$}") })
            .collect();
        out.push_str(line.join("  ").trim_end());
        out.push('\n');
    }
    out
}

fn emit_markdown(report: &MetricsReport) -> String {
    let mut out = String::new();
    let _ = write!(out, "Detector `{}`", report.detector_id);
    if let Some(d) = &report.plan_digest {
        let _ = write!(out, ", plan `{}`", &d[..d.len().min(12)]);
    }
    out.push_str("\n\n| Metric |");
    for c in &report.cells {
        let _ = write!(out, " {} |", c.cell.column_label());
    }
    out.push_str("\n|---|");
    for _ in &report.cells {
        out.push_str("---:|");
    }
    out.push('\n');
    for name in METRICS {
        let _ = write!(out, "| {name} |");
        for c in &report.cells {
            let _ = write!(out, " {} |", percent(metric(c, name)));
        }
        out.push('\n');
    }
    out
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn emit_delimited(cells: &[MetricsCell]) -> String {
    let mut out = String::from("metric");
    for c in cells {
        out.push(',');
        out.push_str(&csv_field(&c.cell.to_string()));
    }
    out.push('\n');
    for name in METRICS {
        out.push_str(name);
        for c in cells {
            out.push(',');
            out.push_str(&percent(metric(c, name)));
        }
        out.push('\n');
    }
    for name in ["n_real", "n_fake"] {
        out.push_str(name);
        for c in cells {
            let n = if name == "n_real" { c.n_real } else { c.n_fake };
            let _ = write!(out, ",{n}");
        }
        out.push('\n');
    }
    out
}

/// Reads a delimited table back into cells. Metric values are the printed
/// percentages divided by 100; notes and the degenerate-F1 flag are not
/// carried by the table and come back empty.
pub fn parse_delimited(text: &str) -> Result<Vec<MetricsCell>, ReportError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).from_reader(text.as_bytes());
    let mut records = rdr.records();
    let err = |line: usize, message: String| ReportError::Parse { line, message };
    let header = records
        .next()
        .ok_or_else(|| err(1, "empty table".into()))?
        .map_err(|e| err(1, e.to_string()))?;
    if header.get(0) != Some("metric") {
        return Err(err(1, "first column must be `metric`".into()));
    }
    let mut cells: Vec<MetricsCell> = header
        .iter()
        .skip(1)
        .map(|id| {
            id.parse::<CellId>().map(|cell| MetricsCell {
                cell,
                n_real: 0,
                n_fake: 0,
                acc: None,
                auc: None,
                f1: None,
                f1_degenerate: false,
                notes: Vec::new(),
            })
        })
        .collect::<Result<_, _>>()
        .map_err(|e| err(1, e.to_string()))?;
    for (i, row) in records.enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| err(line, e.to_string()))?;
        if row.len() != cells.len() + 1 {
            return Err(err(line, format!("expected {} fields, got {}", cells.len() + 1, row.len())));
        }
        let name = &row[0];
        for (cell, value) in cells.iter_mut().zip(row.iter().skip(1)) {
            match name {
                "AUC" | "ACC" | "F1" => {
                    let parsed = if value == "-" {
                        None
                    } else {
                        Some(value.parse::<f64>().map_err(|e| err(line, format!("`{value}`: {e}")))? / 100.0)
                    };
                    match name {
                        "AUC" => cell.auc = parsed,
                        "ACC" => cell.acc = parsed,
                        _ => cell.f1 = parsed,
                    }
                }
                "n_real" | "n_fake" => {
                    let n = value.parse().map_err(|e| err(line, format!("`{value}`: {e}")))?;
                    if name == "n_real" {
                        cell.n_real = n;
                    } else {
                        cell.n_fake = n;
                    }
                }
                other => return Err(err(line, format!("unknown metric row `{other}`"))),
            }
        }
    }
    Ok(cells)
}

/// Long-format curve rows: `family,severity_index,severity,metric,value`.
/// Values are unrounded fractions; undefined values print as `NA`.
pub fn emit_curves(report: &MetricsReport) -> String {
    let mut out = String::from("family,severity_index,severity,metric,value\n");
    let mut families: Vec<&str> = Vec::new();
    for c in &report.cells {
        if !families.contains(&c.cell.family()) {
            families.push(c.cell.family());
        }
    }
    for family in families {
        for name in METRICS {
            for c in report.cells.iter().filter(|c| c.cell.family() == family) {
                let severity = match &c.cell {
                    CellId::Unaltered => String::new(),
                    CellId::Rung { params, .. } => params.clone(),
                };
                let value = metric(c, name).map(|v| v.to_string()).unwrap_or_else(|| "NA".into());
                let _ = writeln!(
                    out,
                    "{},{},{},{},{}",
                    csv_field(family),
                    c.cell.severity_index(),
                    csv_field(&severity),
                    name.to_ascii_lowercase(),
                    value
                );
            }
        }
    }
    out
}
