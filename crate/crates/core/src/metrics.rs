//! Detection metrics per assessment cell: accuracy, ROC AUC, and F1.
//!
//! Scores are in `[0, 1]`, higher meaning "more likely fake". AUC is the
//! Mann-Whitney statistic with half credit for ties, computed by sweeping
//! tie-grouped thresholds in exact integer arithmetic.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("auc needs both classes (got {n_real} real, {n_fake} fake)")]
    DegenerateClassBalance { n_real: usize, n_fake: usize },
    #[error("no records")]
    EmptyInput,
    #[error("invalid label `{0}` (expected real/fake or 0/1)")]
    InvalidLabel(String),
    #[error("invalid cell id `{0}`")]
    InvalidCellId(String),
    #[error("record {item}/{cell}: score {score} outside [0, 1]")]
    ScoreOutOfRange { item: String, cell: String, score: f64 },
    #[error("duplicate record for item {item} in cell {cell}")]
    DuplicateRecord { item: String, cell: String },
    #[error("records file line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Ground truth. `Fake` is the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Real,
    Fake,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Real => "real",
            Label::Fake => "fake",
        }
    }

    pub fn flipped(self) -> Label {
        match self {
            Label::Real => Label::Fake,
            Label::Fake => Label::Real,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = MetricsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "real" | "0" => Ok(Label::Real),
            "fake" | "1" => Ok(Label::Fake),
            _ => Err(MetricsError::InvalidLabel(s.to_string())),
        }
    }
}

/// Identifies one assessment cell: the unaltered baseline or one rung of a
/// named ladder. Text form is `Unaltered` or `<cell>@<index>:<params>`,
/// e.g. `JPEG@0:95`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum CellId {
    Unaltered,
    Rung { cell: String, index: usize, params: String },
}

impl CellId {
    pub fn rung(cell: impl Into<String>, index: usize, params: impl Into<String>) -> Self {
        CellId::Rung {
            cell: cell.into(),
            index,
            params: params.into(),
        }
    }

    /// Family (ladder) name; `Unaltered` for the baseline.
    pub fn family(&self) -> &str {
        match self {
            CellId::Unaltered => "Unaltered",
            CellId::Rung { cell, .. } => cell,
        }
    }

    pub fn severity_index(&self) -> usize {
        match self {
            CellId::Unaltered => 0,
            CellId::Rung { index, .. } => *index,
        }
    }

    /// Short column label, e.g. `JPEG 95`.
    pub fn column_label(&self) -> String {
        match self {
            CellId::Unaltered => "Unaltered".to_string(),
            CellId::Rung { cell, params, .. } if params.is_empty() => cell.clone(),
            CellId::Rung { cell, params, .. } => format!("{cell} {params}"),
        }
    }
}

impl fmt::Display for CellId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CellId::Unaltered => f.write_str("Unaltered"),
            CellId::Rung { cell, index, params } => write!(f, "{cell}@{index}:{params}"),
        }
    }
}

impl FromStr for CellId {
    type Err = MetricsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s == "Unaltered" {
            return Ok(CellId::Unaltered);
        }
        let bad = || MetricsError::InvalidCellId(s.to_string());
        let (cell, rest) = s.split_once('@').ok_or_else(bad)?;
        let (index, params) = rest.split_once(':').ok_or_else(bad)?;
        if cell.is_empty() || cell == "Unaltered" {
            return Err(bad());
        }
        Ok(CellId::Rung {
            cell: cell.to_string(),
            index: index.parse().map_err(|_| bad())?,
            params: params.to_string(),
        })
    }
}

impl Ord for CellId {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (CellId::Unaltered, CellId::Unaltered) => Ordering::Equal,
            (CellId::Unaltered, _) => Ordering::Less,
            (_, CellId::Unaltered) => Ordering::Greater,
            (
                CellId::Rung { cell: a, index: ia, params: pa },
                CellId::Rung { cell: b, index: ib, params: pb },
            ) => crate::severity::family_rank(a)
                .cmp(&crate::severity::family_rank(b))
                .then_with(|| a.cmp(b))
                .then(ia.cmp(ib))
                .then_with(|| pa.cmp(pb)),
        }
    }
}

impl PartialOrd for CellId {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// One detector output for one item in one cell.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionRecord {
    pub item_id: String,
    pub cell: CellId,
    pub label: Label,
    pub score: f64,
}

impl PredictionRecord {
    pub fn new(item_id: impl Into<String>, cell: CellId, label: Label, score: f64) -> Result<Self, MetricsError> {
        let item_id = item_id.into();
        if !(0.0..=1.0).contains(&score) {
            return Err(MetricsError::ScoreOutOfRange {
                item: item_id,
                cell: cell.to_string(),
                score,
            });
        }
        Ok(Self { item_id, cell, label, score })
    }
}

fn class_counts(records: &[PredictionRecord]) -> (usize, usize) {
    let n_fake = records.iter().filter(|r| r.label == Label::Fake).count();
    (records.len() - n_fake, n_fake)
}

/// ROC AUC by trapezoidal integration over tie-grouped thresholds.
///
/// Identical to the Mann-Whitney estimator
/// `(#{s_fake > s_real} + 0.5 * #{ties}) / (n_fake * n_real)`.
pub fn auc(records: &[PredictionRecord]) -> Result<f64, MetricsError> {
    let (n_real, n_fake) = class_counts(records);
    if n_real == 0 || n_fake == 0 {
        return Err(MetricsError::DegenerateClassBalance { n_real, n_fake });
    }
    let mut sorted: Vec<(f64, Label)> = records.iter().map(|r| (r.score, r.label)).collect();
    sorted.sort_by(|a, b| b.0.total_cmp(&a.0));

    // Descending sweep. Each tie group adds a trapezoid whose doubled area
    // is neg_in_group * (2 * tp_before + pos_in_group), in count units.
    let mut twice_area: u128 = 0;
    let mut tp: u128 = 0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        let (mut pos, mut neg) = (0u128, 0u128);
        while j < sorted.len() && sorted[j].0 == sorted[i].0 {
            match sorted[j].1 {
                Label::Fake => pos += 1,
                Label::Real => neg += 1,
            }
            j += 1;
        }
        twice_area += neg * (2 * tp + pos);
        tp += pos;
        i = j;
    }
    Ok(twice_area as f64 / (2 * n_fake as u128 * n_real as u128) as f64)
}

#[inline]
fn predicted_fake(score: f64, threshold: f64) -> bool {
    score >= threshold
}

/// Fraction of records where `score >= threshold` matches `label == fake`.
pub fn accuracy(records: &[PredictionRecord], threshold: f64) -> Result<f64, MetricsError> {
    if records.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let correct = records
        .iter()
        .filter(|r| predicted_fake(r.score, threshold) == (r.label == Label::Fake))
        .count();
    Ok(correct as f64 / records.len() as f64)
}

/// F1 for the fake class. `degenerate` is set when precision or recall has
/// a zero denominator; the value is then 0 unless both are defined.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct F1Score {
    pub value: f64,
    pub degenerate: bool,
}

pub fn f1(records: &[PredictionRecord], threshold: f64) -> Result<F1Score, MetricsError> {
    if records.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
    for r in records {
        match (predicted_fake(r.score, threshold), r.label) {
            (true, Label::Fake) => tp += 1,
            (true, Label::Real) => fp += 1,
            (false, Label::Fake) => fn_ += 1,
            (false, Label::Real) => {}
        }
    }
    let degenerate = tp + fp == 0 || tp + fn_ == 0;
    let value = if tp == 0 {
        0.0
    } else {
        2.0 * tp as f64 / (2 * tp + fp + fn_) as f64
    };
    Ok(F1Score { value, degenerate })
}

/// Metrics for one cell. `None` marks a metric that is undefined for the
/// cell's data, never a failure rendered as zero.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsCell {
    #[serde(serialize_with = "serialize_display")]
    pub cell: CellId,
    pub n_real: usize,
    pub n_fake: usize,
    pub acc: Option<f64>,
    pub auc: Option<f64>,
    pub f1: Option<f64>,
    pub f1_degenerate: bool,
    pub notes: Vec<String>,
}

fn serialize_display<S: serde::Serializer, T: fmt::Display>(v: &T, s: S) -> Result<S::Ok, S::Error> {
    s.collect_str(v)
}

impl MetricsCell {
    /// Computes all three metrics for records that belong to one cell.
    pub fn compute(cell: CellId, records: &[PredictionRecord], threshold: f64) -> Self {
        let (n_real, n_fake) = class_counts(records);
        let mut notes = Vec::new();
        let mut seen = HashSet::new();
        for r in records {
            if !seen.insert(r.item_id.as_str()) {
                notes.push(format!("duplicate item {}", r.item_id));
            }
        }
        let auc = match auc(records) {
            Ok(v) => Some(v),
            Err(e) => {
                notes.push(e.to_string());
                None
            }
        };
        let acc = accuracy(records, threshold).ok();
        let (f1, f1_degenerate) = match f1(records, threshold) {
            Ok(s) => (Some(s.value), s.degenerate),
            Err(_) => (None, false),
        };
        MetricsCell {
            cell,
            n_real,
            n_fake,
            acc,
            auc,
            f1,
            f1_degenerate,
            notes,
        }
    }
}

/// Groups records by cell and computes each cell's metrics. Output is sorted
/// with the unaltered cell first.
pub fn aggregate(records: &[PredictionRecord], threshold: f64) -> Vec<MetricsCell> {
    let mut groups: BTreeMap<CellId, Vec<PredictionRecord>> = BTreeMap::new();
    for r in records {
        groups.entry(r.cell.clone()).or_default().push(r.clone());
    }
    groups
        .into_iter()
        .map(|(cell, rs)| MetricsCell::compute(cell, &rs, threshold))
        .collect()
}

#[derive(Debug, Serialize, Deserialize)]
struct RecordRow {
    item_id: String,
    cell_id: String,
    label: String,
    score: f64,
}

/// Writes records as `item_id,cell_id,label,score` with a header row.
pub fn write_records<W: Write>(writer: W, records: &[PredictionRecord]) -> Result<(), MetricsError> {
    let mut w = csv::Writer::from_writer(writer);
    for r in records {
        w.serialize(RecordRow {
            item_id: r.item_id.clone(),
            cell_id: r.cell.to_string(),
            label: r.label.to_string(),
            score: r.score,
        })?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Reads a records file, validating labels, cell ids, score range, and
/// `(item, cell)` uniqueness.
pub fn read_records<R: Read>(reader: R) -> Result<Vec<PredictionRecord>, MetricsError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for row in rdr.deserialize::<RecordRow>() {
        let row = row.map_err(|e| MetricsError::Parse {
            line: e.position().map(|p| p.line()).unwrap_or(0),
            message: e.to_string(),
        })?;
        let cell: CellId = row.cell_id.parse()?;
        let label: Label = row.label.parse()?;
        if !seen.insert((row.item_id.clone(), cell.clone())) {
            return Err(MetricsError::DuplicateRecord {
                item: row.item_id,
                cell: cell.to_string(),
            });
        }
        out.push(PredictionRecord::new(row.item_id, cell, label, row.score)?);
    }
    Ok(out)
}
