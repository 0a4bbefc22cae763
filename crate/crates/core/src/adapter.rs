//! Bridges to detectors.
//!
//! Three modes:
//! - `cmd:<command>`: a long-lived child process speaking a line protocol.
//!   We write one absolute image path per line to its stdin; it answers one
//!   decimal score in `[0, 1]` per line on stdout, in order, flushing after
//!   each answer.
//! - `scores:<path>`: a CSV with `item_id,cell_id,score` (extra columns
//!   ignored), joined to the manifest on item and cell.
//! - `mock`: a deterministic high-frequency-energy scorer ([`mock_score`]).
//!
//! Scores outside `[0, 1]` are protocol errors, never clamped.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::{Child, Stdio};
use std::sync::mpsc;
use std::thread;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::Deserialize;
use thiserror::Error;

use crate::metrics::{CellId, Label, PredictionRecord};
use crate::process::shell_command;
use crate::raster::{load_image, Image};
use crate::severity::{Manifest, ManifestRow};

#[derive(Debug, Error)]
pub enum AdapterError {
    #[error("detector gave no answer for {item} within {timeout:?}")]
    DetectorTimeout { item: String, timeout: Duration },
    #[error("detector protocol violation: {0}")]
    ProtocolViolation(String),
    #[error("no score for item {item} in cell {cell}")]
    MissingScore { item: String, cell: String },
    #[error("no label for item {item}; pass a labels file")]
    MissingLabel { item: String },
    #[error("could not start detector `{command}`: {reason}")]
    SpawnFailure { command: String, reason: String },
    #[error("invalid detector spec `{0}` (expected mock, cmd:<command>, or scores:<path>)")]
    InvalidSpec(String),
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DetectorMode {
    Subprocess { command: String },
    ScoreFile { path: PathBuf },
    Mock,
}

/// How to obtain scores, plus the per-response timeout for subprocesses.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DetectorHandle {
    pub mode: DetectorMode,
    pub timeout: Duration,
}

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);

impl DetectorHandle {
    pub fn mock() -> Self {
        Self {
            mode: DetectorMode::Mock,
            timeout: DEFAULT_TIMEOUT,
        }
    }

    pub fn subprocess(command: impl Into<String>) -> Self {
        Self {
            mode: DetectorMode::Subprocess { command: command.into() },
            timeout: DEFAULT_TIMEOUT,
        }
    }

    pub fn score_file(path: impl Into<PathBuf>) -> Self {
        Self {
            mode: DetectorMode::ScoreFile { path: path.into() },
            timeout: DEFAULT_TIMEOUT,
        }
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    /// Parses `mock`, `cmd:<command>`, or `scores:<path>`.
    pub fn parse(spec: &str) -> Result<Self, AdapterError> {
        if spec == "mock" {
            Ok(Self::mock())
        } else if let Some(cmd) = spec.strip_prefix("cmd:").filter(|c| !c.trim().is_empty()) {
            Ok(Self::subprocess(cmd))
        } else if let Some(path) = spec.strip_prefix("scores:").filter(|p| !p.is_empty()) {
            Ok(Self::score_file(path))
        } else {
            Err(AdapterError::InvalidSpec(spec.to_string()))
        }
    }

    /// Short identifier for reports.
    pub fn id(&self) -> String {
        match &self.mode {
            DetectorMode::Mock => "mock".into(),
            DetectorMode::Subprocess { command } => format!("cmd:{command}"),
            DetectorMode::ScoreFile { path } => format!("scores:{}", path.display()),
        }
    }
}

/// Mean absolute 4-neighbour Laplacian of luma divided by 16, squashed with
/// `s / (1 + s)`. Constant images score 0.
pub fn mock_score(img: &Image) -> f64 {
    let (w, h) = (img.width() as usize, img.height() as usize);
    // Luma scaled by 1000 keeps the Laplacian exact in integers.
    let luma: Vec<i64> = img
        .as_raw()
        .chunks_exact(3)
        .map(|p| 299 * p[0] as i64 + 587 * p[1] as i64 + 114 * p[2] as i64)
        .collect();
    let at = |x: usize, y: usize| luma[y * w + x];
    let mut total: i64 = 0;
    for y in 0..h {
        for x in 0..w {
            let left = at(x.saturating_sub(1), y);
            let right = at((x + 1).min(w - 1), y);
            let up = at(x, y.saturating_sub(1));
            let down = at(x, (y + 1).min(h - 1));
            total += (4 * at(x, y) - left - right - up - down).abs();
        }
    }
    let s = total as f64 / 1000.0 / (w * h) as f64 / 16.0;
    s / (1.0 + s)
}

fn label_of(row: &ManifestRow) -> Result<Label, AdapterError> {
    row.label.ok_or_else(|| AdapterError::MissingLabel { item: row.item_id.clone() })
}

fn record(row: &ManifestRow, score: f64) -> Result<PredictionRecord, AdapterError> {
    let label = label_of(row)?;
    PredictionRecord::new(row.item_id.clone(), row.cell_id(), label, score)
        .map_err(|e| AdapterError::ProtocolViolation(e.to_string()))
}

fn resolve(base_dir: &Path, row: &ManifestRow) -> PathBuf {
    let p = base_dir.join(&row.output_path);
    p.canonicalize().or_else(|_| std::path::absolute(&p)).unwrap_or(p)
}

/// Scores every manifest row. Output order follows the manifest. Relative
/// output paths are resolved against `base_dir` (the manifest's directory).
pub fn score_corpus(
    handle: &DetectorHandle,
    manifest: &Manifest,
    base_dir: impl AsRef<Path>,
) -> Result<Vec<PredictionRecord>, AdapterError> {
    let base_dir = base_dir.as_ref();
    for row in &manifest.rows {
        label_of(row)?;
    }
    let records = match &handle.mode {
        DetectorMode::Mock => manifest
            .rows
            .par_iter()
            .map(|row| {
                let path = resolve(base_dir, row);
                let img = load_image(&path).map_err(|e| AdapterError::Io {
                    path: path.clone(),
                    message: e.to_string(),
                })?;
                record(row, mock_score(&img))
            })
            .collect::<Result<Vec<_>, _>>()?,
        DetectorMode::ScoreFile { path } => score_from_file(path, manifest)?,
        DetectorMode::Subprocess { command } => score_with_process(command, handle.timeout, manifest, base_dir)?,
    };
    debug_assert_eq!(records.len(), manifest.rows.len());
    Ok(records)
}

#[derive(Deserialize)]
struct ScoreRow {
    item_id: String,
    cell_id: String,
    score: String,
}

fn parse_score(text: &str, context: &str) -> Result<f64, AdapterError> {
    let value: f64 = text
        .trim()
        .parse()
        .map_err(|_| AdapterError::ProtocolViolation(format!("{context}: `{}` is not a number", text.trim())))?;
    if !(0.0..=1.0).contains(&value) {
        return Err(AdapterError::ProtocolViolation(format!("{context}: score {value} outside [0, 1]")));
    }
    Ok(value)
}

fn score_from_file(path: &Path, manifest: &Manifest) -> Result<Vec<PredictionRecord>, AdapterError> {
    let io = |message: String| AdapterError::Io {
        path: path.to_path_buf(),
        message,
    };
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| io(e.to_string()))?;
    let mut scores: HashMap<(String, CellId), f64> = HashMap::new();
    for row in rdr.deserialize::<ScoreRow>() {
        let row = row.map_err(|e| io(e.to_string()))?;
        let cell: CellId = row.cell_id.parse().map_err(|e| io(format!("{e}")))?;
        let value = parse_score(&row.score, &format!("{}/{}", row.item_id, row.cell_id))?;
        scores.insert((row.item_id, cell), value);
    }
    manifest
        .rows
        .iter()
        .map(|row| {
            let cell = row.cell_id();
            let score = scores
                .get(&(row.item_id.clone(), cell.clone()))
                .ok_or_else(|| AdapterError::MissingScore {
                    item: row.item_id.clone(),
                    cell: cell.to_string(),
                })?;
            record(row, *score)
        })
        .collect()
}

struct DetectorProcess {
    child: Child,
    stdin: Option<std::process::ChildStdin>,
    lines: mpsc::Receiver<std::io::Result<String>>,
}

impl DetectorProcess {
    fn spawn(command: &str) -> Result<Self, AdapterError> {
        let mut child = shell_command(command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| AdapterError::SpawnFailure {
                command: command.to_string(),
                reason: e.to_string(),
            })?;
        let stdin = child.stdin.take();
        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        Ok(Self { child, stdin, lines: rx })
    }

    fn ask(&mut self, request: &str, item: &str, timeout: Duration) -> Result<String, AdapterError> {
        let premature = || AdapterError::ProtocolViolation(format!("detector exited before answering for {item}"));
        let stdin = self.stdin.as_mut().expect("stdin open during requests");
        if writeln!(stdin, "{request}").and_then(|_| stdin.flush()).is_err() {
            return Err(premature());
        }
        match self.lines.recv_timeout(timeout) {
            Ok(Ok(line)) => Ok(line),
            Ok(Err(e)) => Err(AdapterError::ProtocolViolation(format!("reading detector output: {e}"))),
            Err(mpsc::RecvTimeoutError::Timeout) => Err(AdapterError::DetectorTimeout {
                item: item.to_string(),
                timeout,
            }),
            Err(mpsc::RecvTimeoutError::Disconnected) => Err(premature()),
        }
    }

    /// Closes stdin, waits for exit, and rejects any unsolicited output.
    fn finish(mut self, timeout: Duration) -> Result<(), AdapterError> {
        drop(self.stdin.take());
        let deadline = Instant::now() + timeout;
        loop {
            match self.lines.recv_timeout(deadline.saturating_duration_since(Instant::now())) {
                Ok(Ok(line)) if line.trim().is_empty() => continue,
                Ok(Ok(line)) => {
                    return Err(AdapterError::ProtocolViolation(format!(
                        "unexpected extra output `{}`",
                        line.trim()
                    )))
                }
                Ok(Err(e)) => return Err(AdapterError::ProtocolViolation(e.to_string())),
                Err(mpsc::RecvTimeoutError::Disconnected) => break,
                Err(mpsc::RecvTimeoutError::Timeout) => break,
            }
        }
        Ok(())
    }
}

impl Drop for DetectorProcess {
    fn drop(&mut self) {
        drop(self.stdin.take());
        if let Ok(None) = self.child.try_wait() {
            let _ = self.child.kill();
        }
        let _ = self.child.wait();
    }
}

fn score_with_process(
    command: &str,
    timeout: Duration,
    manifest: &Manifest,
    base_dir: &Path,
) -> Result<Vec<PredictionRecord>, AdapterError> {
    let mut process = DetectorProcess::spawn(command)?;
    let mut out = Vec::with_capacity(manifest.rows.len());
    for row in &manifest.rows {
        let path = resolve(base_dir, row);
        let request = path.to_string_lossy().into_owned();
        if request.contains('\n') || request.contains('\r') {
            return Err(AdapterError::ProtocolViolation(format!("path {request:?} contains a line break")));
        }
        let answer = process.ask(&request, &row.item_id, timeout)?;
        let score = parse_score(&answer, &format!("response for {}", row.output_path))?;
        out.push(record(row, score)?);
    }
    process.finish(timeout)?;
    Ok(out)
}
