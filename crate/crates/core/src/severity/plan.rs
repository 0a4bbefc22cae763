//! Assessment plans: which operations to run at which severities.
//!
//! Plans are written as TOML:
//!
//! ```toml
//! master_seed = 7
//! codec_command = "my-codec --level {level}"   # optional
//!
//! [[cells]]
//! name = "JPEG"             # optional, defaults to `op`
//! op = "jpeg"
//! severities = [95, 60, 30]
//!
//! [[cells]]
//! name = "GN+GB"
//! op = "awgn+gaussian_blur" # a mixture: steps joined with '+'
//! severities = [[30, 7]]    # one value per step parameter
//!
//! [[cells]]
//! op = "linear_adjust"
//! severities = [0.8, 1.2]
//! params = [10]             # trailing parameters shared by every rung
//! ```
//!
//! Positional parameters per step: `jpeg` quality; `external_codec` level
//! token; `gaussian_blur`, `median_filter`, `average_filter` kernel;
//! `awgn` sigma; `poisson_gaussian` a, b; `linear_adjust` alpha, beta;
//! `contrast` factor; `gamma` exponent; `downscale` factor.

use std::collections::HashSet;
use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::metrics::Label;
use crate::ops::{DegradationOp, OpKind, PoissonGaussian};
use crate::rng;

#[derive(Debug, Error, PartialEq)]
pub enum PlanError {
    #[error("schema error{}: {message}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    SchemaError { line: Option<usize>, message: String },
    #[error("{field}: unknown operation `{name}`")]
    UnknownOperation { field: String, name: String },
    #[error("{field}: {message}")]
    InvalidParameter { field: String, message: String },
}

fn schema(message: impl Into<String>) -> PlanError {
    PlanError::SchemaError {
        line: None,
        message: message.into(),
    }
}

/// One positional parameter: a number or an opaque token.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum Param {
    Num(f64),
    Token(String),
}

impl Serialize for Param {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Param::Num(v) if v.fract() == 0.0 && v.abs() < 9.0e15 => s.serialize_i64(*v as i64),
            Param::Num(v) => s.serialize_f64(*v),
            Param::Token(t) => s.serialize_str(t),
        }
    }
}

impl fmt::Display for Param {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Param::Num(v) => write!(f, "{v}"),
            Param::Token(t) => f.write_str(t),
        }
    }
}

impl From<f64> for Param {
    fn from(v: f64) -> Self {
        Param::Num(v)
    }
}

impl From<&str> for Param {
    fn from(v: &str) -> Self {
        Param::Token(v.to_string())
    }
}

/// Positional parameter count for one step kind.
pub fn arity(kind: OpKind) -> usize {
    match kind {
        OpKind::PoissonGaussian | OpKind::LinearAdjust => 2,
        OpKind::Compose => 0,
        _ => 1,
    }
}

/// Ordered parameter settings for one operation or mixture, mild to harsh.
#[derive(Debug, Clone, PartialEq)]
pub struct SeverityLadder {
    pub steps: Vec<OpKind>,
    pub rungs: Vec<Vec<Param>>,
}

impl SeverityLadder {
    pub fn single(kind: OpKind, rungs: impl IntoIterator<Item = Param>) -> Self {
        Self {
            steps: vec![kind],
            rungs: rungs.into_iter().map(|p| vec![p]).collect(),
        }
    }

    /// `awgn+gaussian_blur` style name of the step sequence.
    pub fn op_name(&self) -> String {
        self.steps.iter().map(|k| k.name()).collect::<Vec<_>>().join("+")
    }

    pub fn is_stochastic(&self) -> bool {
        self.steps.iter().any(|k| k.is_stochastic())
    }

    /// Parameters of rung `index` joined with `;`, e.g. `30;7`.
    pub fn rung_label(&self, index: usize) -> String {
        self.rungs[index].iter().map(|p| p.to_string()).collect::<Vec<_>>().join(";")
    }

    /// Concrete op for one rung. `seed` feeds stochastic steps; mixture
    /// steps get `mix(seed, step_index)`.
    pub fn instantiate(&self, index: usize, seed: u64, codec_command: Option<&str>) -> Result<DegradationOp, String> {
        let rung = self.rungs.get(index).ok_or_else(|| format!("no rung {index}"))?;
        let mut values = rung.iter();
        let mut ops = Vec::with_capacity(self.steps.len());
        for (i, &kind) in self.steps.iter().enumerate() {
            let step_seed = if self.steps.len() == 1 { seed } else { rng::mix(seed, i as u64) };
            let args: Vec<&Param> = values.by_ref().take(arity(kind)).collect();
            ops.push(build_step(kind, &args, step_seed, codec_command)?);
        }
        if values.next().is_some() {
            return Err("too many parameters".into());
        }
        Ok(if ops.len() == 1 {
            ops.pop().expect("one op")
        } else {
            DegradationOp::Compose { steps: ops }
        })
    }
}

fn num(kind: OpKind, args: &[&Param], i: usize) -> Result<f64, String> {
    match args.get(i) {
        Some(Param::Num(v)) => Ok(*v),
        Some(Param::Token(t)) => Err(format!("{kind} expects a number, got `{t}`")),
        None => Err(format!("{kind} needs {} parameter(s), got {}", arity(kind), args.len())),
    }
}

fn int(kind: OpKind, args: &[&Param], i: usize) -> Result<u64, String> {
    let v = num(kind, args, i)?;
    if v.fract() != 0.0 || v < 0.0 || v > u32::MAX as f64 {
        return Err(format!("{kind} expects a non-negative integer, got {v}"));
    }
    Ok(v as u64)
}

fn build_step(kind: OpKind, args: &[&Param], seed: u64, codec_command: Option<&str>) -> Result<DegradationOp, String> {
    if args.len() != arity(kind) {
        return Err(format!("{kind} needs {} parameter(s), got {}", arity(kind), args.len()));
    }
    let op = match kind {
        OpKind::Jpeg => DegradationOp::Jpeg { quality: int(kind, args, 0)? as u32 },
        OpKind::ExternalCodec => DegradationOp::ExternalCodec {
            command: codec_command.unwrap_or_default().to_string(),
            level: args[0].to_string(),
        },
        OpKind::GaussianBlur => DegradationOp::GaussianBlur { kernel: int(kind, args, 0)? as usize },
        OpKind::MedianFilter => DegradationOp::MedianFilter { kernel: int(kind, args, 0)? as usize },
        OpKind::AverageFilter => DegradationOp::AverageFilter { kernel: int(kind, args, 0)? as usize },
        OpKind::Awgn => DegradationOp::Awgn { sigma: num(kind, args, 0)?, seed },
        OpKind::PoissonGaussian => DegradationOp::PoissonGaussian {
            a: num(kind, args, 0)?,
            b: num(kind, args, 1)?,
            seed,
        },
        OpKind::LinearAdjust => DegradationOp::LinearAdjust {
            alpha: num(kind, args, 0)?,
            beta: num(kind, args, 1)?,
        },
        OpKind::Contrast => DegradationOp::Contrast { factor: num(kind, args, 0)? },
        OpKind::Gamma => DegradationOp::Gamma { gamma: num(kind, args, 0)? },
        OpKind::Downscale => DegradationOp::Downscale { factor: int(kind, args, 0)? as u32 },
        OpKind::Compose => return Err("compose is expressed by joining steps with '+'".into()),
    };
    op.validate().map_err(|e| e.to_string())?;
    Ok(op)
}

/// A named ladder in a plan.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanCell {
    pub name: String,
    pub ladder: SeverityLadder,
    pub active: bool,
    /// Replaces the master seed for this cell's seed derivation.
    pub seed: Option<u64>,
}

impl PlanCell {
    pub fn new(name: &str, ladder: SeverityLadder) -> Self {
        Self {
            name: name.to_string(),
            ladder,
            active: true,
            seed: None,
        }
    }

    pub fn uses_external_codec(&self) -> bool {
        self.ladder.steps.contains(&OpKind::ExternalCodec)
    }

    /// Directory name for this cell's outputs.
    pub fn slug(&self) -> String {
        slugify(&self.name)
    }
}

pub(crate) fn slugify(name: &str) -> String {
    let mut out = String::new();
    for ch in name.chars() {
        if ch.is_ascii_alphanumeric() {
            out.push(ch.to_ascii_lowercase());
        } else if !out.ends_with('-') {
            out.push('-');
        }
    }
    out.trim_matches('-').to_string()
}

/// A source image and its ground truth, when known.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputItem {
    pub id: String,
    pub path: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<Label>,
}

/// Cells to evaluate, the master seed, and the test inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct AssessmentPlan {
    pub master_seed: u64,
    pub codec_command: Option<String>,
    pub cells: Vec<PlanCell>,
    pub inputs: Vec<InputItem>,
}

/// Default Poisson-Gaussian model for the builtin plan.
pub const DEFAULT_POISSON_GAUSSIAN: PoissonGaussian = PoissonGaussian { a: 0.01, b: 0.0002 };

/// Table-style column order for builtin families.
pub(crate) const BUILTIN_FAMILIES: [&str; 10] = [
    "JPEG",
    "DL-Comp",
    "GauNoise",
    "PoisGauNoise",
    "GauBlur",
    "Gamma",
    "Resize",
    "GN+GB",
    "JPEG+GN",
    "JPEG+LR",
];

/// Sort rank of a family name: builtin families in table order, everything
/// else after them.
pub fn family_rank(name: &str) -> usize {
    BUILTIN_FAMILIES
        .iter()
        .position(|f| *f == name)
        .unwrap_or(BUILTIN_FAMILIES.len())
}

fn nums(values: &[f64]) -> Vec<Param> {
    values.iter().map(|&v| Param::Num(v)).collect()
}

/// The reference plan: JPEG 95/60/30, learned-codec high/med/low (inactive
/// until a codec command is set), Gaussian noise σ 5/30/50, one
/// Poisson-Gaussian setting, Gaussian blur 3/7/11, gamma 0.1/0.75/1.3/2.5,
/// resize x4/x8/x16, and three mixtures.
pub fn builtin_plan() -> AssessmentPlan {
    use OpKind::*;
    let mut codec = PlanCell::new(
        "DL-Comp",
        SeverityLadder::single(ExternalCodec, ["high", "med", "low"].map(Param::from)),
    );
    codec.active = false;
    let mixture = |name: &str, steps: Vec<OpKind>, values: &[f64]| {
        PlanCell::new(
            name,
            SeverityLadder {
                steps,
                rungs: vec![nums(values)],
            },
        )
    };
    let cells = vec![
        PlanCell::new("JPEG", SeverityLadder::single(Jpeg, nums(&[95.0, 60.0, 30.0]))),
        codec,
        PlanCell::new("GauNoise", SeverityLadder::single(Awgn, nums(&[5.0, 30.0, 50.0]))),
        PlanCell::new(
            "PoisGauNoise",
            SeverityLadder {
                steps: vec![PoissonGaussian],
                rungs: vec![nums(&[DEFAULT_POISSON_GAUSSIAN.a, DEFAULT_POISSON_GAUSSIAN.b])],
            },
        ),
        PlanCell::new("GauBlur", SeverityLadder::single(GaussianBlur, nums(&[3.0, 7.0, 11.0]))),
        PlanCell::new("Gamma", SeverityLadder::single(Gamma, nums(&[0.1, 0.75, 1.3, 2.5]))),
        PlanCell::new("Resize", SeverityLadder::single(Downscale, nums(&[4.0, 8.0, 16.0]))),
        mixture("GN+GB", vec![Awgn, GaussianBlur], &[30.0, 7.0]),
        mixture("JPEG+GN", vec![Jpeg, Awgn], &[60.0, 30.0]),
        mixture("JPEG+LR", vec![Jpeg, Downscale], &[60.0, 4.0]),
    ];
    AssessmentPlan {
        master_seed: 0,
        codec_command: None,
        cells,
        inputs: Vec::new(),
    }
}

impl AssessmentPlan {
    /// Sets the external codec and activates every cell that uses it.
    pub fn with_codec_command(mut self, command: impl Into<String>) -> Self {
        self.codec_command = Some(command.into());
        for cell in &mut self.cells {
            if cell.uses_external_codec() {
                cell.active = true;
            }
        }
        self
    }

    pub fn with_master_seed(mut self, seed: u64) -> Self {
        self.master_seed = seed;
        self
    }

    pub fn with_inputs(mut self, inputs: Vec<InputItem>) -> Self {
        self.inputs = inputs;
        self
    }

    /// Cells that will produce outputs. Codec cells need a codec command.
    pub fn active_cells(&self) -> impl Iterator<Item = &PlanCell> {
        self.cells
            .iter()
            .filter(|c| c.active && (!c.uses_external_codec() || self.codec_command.is_some()))
    }

    /// Number of degraded rungs that will be generated per item.
    pub fn active_rung_count(&self) -> usize {
        self.active_cells().map(|c| c.ladder.rungs.len()).sum()
    }

    pub fn cell(&self, name: &str) -> Option<&PlanCell> {
        self.cells.iter().find(|c| c.name == name)
    }

    /// Seed for one `(item, cell, rung)` triple. Pure function of the
    /// master (or per-cell) seed, item id, cell name, and rung index.
    pub fn derive_seed(&self, cell: &PlanCell, item_id: &str, severity_index: usize) -> u64 {
        let base = cell.seed.unwrap_or(self.master_seed);
        let k = rng::mix(base, rng::hash_bytes(item_id.as_bytes()));
        let k = rng::mix(k, rng::hash_bytes(cell.name.as_bytes()));
        rng::mix(k, severity_index as u64)
    }

    /// Hex SHA-256 of the canonical plan text, excluding inputs.
    pub fn digest(&self) -> String {
        let bare = AssessmentPlan {
            inputs: Vec::new(),
            ..self.clone()
        };
        let hash = Sha256::digest(bare.to_toml().as_bytes());
        hash.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Checks every invariant `parse_plan` enforces.
    pub fn validate(&self) -> Result<(), PlanError> {
        if self.cells.is_empty() {
            return Err(schema("plan has no cells"));
        }
        let mut names = HashSet::new();
        let mut slugs = HashSet::new();
        for (ci, cell) in self.cells.iter().enumerate() {
            let field = format!("cells[{ci}]");
            validate_cell_name(&cell.name).map_err(|m| PlanError::InvalidParameter {
                field: format!("{field}.name"),
                message: m,
            })?;
            if !names.insert(cell.name.as_str()) || !slugs.insert(cell.slug()) {
                return Err(PlanError::InvalidParameter {
                    field: format!("{field}.name"),
                    message: format!("duplicate cell name `{}`", cell.name),
                });
            }
            if cell.ladder.steps.is_empty() {
                return Err(schema(format!("{field}: no operation")));
            }
            if cell.ladder.rungs.is_empty() {
                return Err(schema(format!("{field}: severity ladder needs at least one rung")));
            }
            for ri in 0..cell.ladder.rungs.len() {
                cell.ladder
                    .instantiate(ri, 0, self.codec_command.as_deref())
                    .map_err(|m| PlanError::InvalidParameter {
                        field: format!("{field}.severities[{ri}]"),
                        message: m,
                    })?;
            }
            check_ordering(&cell.ladder).map_err(|m| PlanError::InvalidParameter {
                field: format!("{field}.severities"),
                message: m,
            })?;
        }
        let mut ids = HashSet::new();
        for (i, item) in self.inputs.iter().enumerate() {
            validate_item_id(&item.id).map_err(|m| PlanError::InvalidParameter {
                field: format!("inputs[{i}].id"),
                message: m,
            })?;
            if !ids.insert(item.id.as_str()) {
                return Err(PlanError::InvalidParameter {
                    field: format!("inputs[{i}].id"),
                    message: format!("duplicate item id `{}`", item.id),
                });
            }
        }
        Ok(())
    }
}

fn validate_cell_name(name: &str) -> Result<(), String> {
    if name.trim().is_empty() {
        return Err("cell name is empty".into());
    }
    if name == "Unaltered" || slugify(name) == "unaltered" {
        return Err("`Unaltered` is reserved".into());
    }
    if slugify(name).is_empty() {
        return Err(format!("cell name `{name}` needs at least one letter or digit"));
    }
    if let Some(c) = name.chars().find(|c| matches!(c, '@' | ':' | ',' | '"' | '\n' | '\r')) {
        return Err(format!("cell name `{name}` contains reserved character {c:?}"));
    }
    Ok(())
}

/// Item ids become relative output paths, so they must stay inside the
/// output tree.
pub(crate) fn validate_item_id(id: &str) -> Result<(), String> {
    if id.is_empty() {
        return Err("empty item id".into());
    }
    if id.starts_with('/') || id.contains('\\') || id.split('/').any(|p| p.is_empty() || p == "." || p == "..") {
        return Err(format!("item id `{id}` is not a clean relative path"));
    }
    if id.chars().any(|c| matches!(c, ',' | '"' | '\n' | '\r')) {
        return Err(format!("item id `{id}` contains a reserved character"));
    }
    Ok(())
}

// Single-parameter ladders with an obvious intensity direction must be
// strictly monotone. Other ladders only need distinct rungs.
fn check_ordering(ladder: &SeverityLadder) -> Result<(), String> {
    let distinct: HashSet<String> = (0..ladder.rungs.len()).map(|i| ladder.rung_label(i)).collect();
    if distinct.len() != ladder.rungs.len() {
        return Err("duplicate rungs".into());
    }
    if ladder.steps.len() != 1 {
        return Ok(());
    }
    let values: Vec<f64> = ladder
        .rungs
        .iter()
        .filter_map(|r| match r.first() {
            Some(Param::Num(v)) => Some(*v),
            _ => None,
        })
        .collect();
    let descending = match ladder.steps[0] {
        OpKind::Jpeg => true,
        OpKind::GaussianBlur | OpKind::MedianFilter | OpKind::AverageFilter | OpKind::Awgn | OpKind::Downscale => {
            false
        }
        _ => return Ok(()),
    };
    let ordered = values
        .windows(2)
        .all(|w| if descending { w[0] > w[1] } else { w[0] < w[1] });
    if !ordered {
        return Err(format!(
            "rungs must be ordered mild to harsh ({} {})",
            ladder.steps[0],
            if descending { "descending" } else { "ascending" }
        ));
    }
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PlanFile {
    #[serde(default, with = "seed_text")]
    master_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    codec_command: Option<String>,
    cells: Vec<CellFile>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    inputs: Vec<InputItem>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CellFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    name: Option<String>,
    op: String,
    #[serde(default)]
    severities: Vec<SeverityEntry>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    params: Vec<Param>,
    #[serde(default, skip_serializing_if = "Option::is_none", with = "opt_seed_text")]
    seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    active: Option<bool>,
}

// TOML integers are i64; larger seeds are written as decimal strings.
mod seed_text {
    use serde::{Deserialize, Deserializer, Serializer};

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Int(i64),
        Text(String),
    }

    pub fn serialize<S: Serializer>(v: &u64, s: S) -> Result<S::Ok, S::Error> {
        match i64::try_from(*v) {
            Ok(i) => s.serialize_i64(i),
            Err(_) => s.serialize_str(&v.to_string()),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<u64, D::Error> {
        match Raw::deserialize(d)? {
            Raw::Int(i) => u64::try_from(i).map_err(|_| serde::de::Error::custom("seed must be non-negative")),
            Raw::Text(t) => t
                .trim()
                .parse()
                .map_err(|_| serde::de::Error::custom(format!("seed `{t}` is not a 64-bit unsigned integer"))),
        }
    }
}

mod opt_seed_text {
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &Option<u64>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(v) => super::seed_text::serialize(v, s),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<u64>, D::Error> {
        super::seed_text::deserialize(d).map(Some)
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum SeverityEntry {
    One(Param),
    Many(Vec<Param>),
}

/// Parses and validates a TOML plan.
pub fn parse_plan(text: &str) -> Result<AssessmentPlan, PlanError> {
    let file: PlanFile = toml::from_str(text).map_err(|e| PlanError::SchemaError {
        line: e.span().map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1),
        message: e.message().to_string(),
    })?;
    if file.cells.is_empty() {
        return Err(schema("`cells` must list at least one cell"));
    }
    let mut cells = Vec::with_capacity(file.cells.len());
    for (ci, raw) in file.cells.into_iter().enumerate() {
        let field = format!("cells[{ci}]");
        let mut steps = Vec::new();
        for part in raw.op.split('+') {
            let part = part.trim();
            match OpKind::from_name(part) {
                Some(OpKind::Compose) | None => {
                    return Err(PlanError::UnknownOperation {
                        field: format!("{field}.op"),
                        name: part.to_string(),
                    })
                }
                Some(k) => steps.push(k),
            }
        }
        let mut rungs: Vec<Vec<Param>> = raw
            .severities
            .into_iter()
            .map(|entry| {
                let mut values = match entry {
                    SeverityEntry::One(p) => vec![p],
                    SeverityEntry::Many(ps) => ps,
                };
                values.extend(raw.params.iter().cloned());
                values
            })
            .collect();
        if rungs.is_empty() && !raw.params.is_empty() {
            rungs.push(raw.params.clone());
        }
        if rungs.is_empty() {
            return Err(schema(format!("{field}: `severities` is empty")));
        }
        cells.push(PlanCell {
            name: raw.name.unwrap_or_else(|| raw.op.trim().to_string()),
            ladder: SeverityLadder { steps, rungs },
            active: raw.active.unwrap_or(true),
            seed: raw.seed,
        });
    }
    let plan = AssessmentPlan {
        master_seed: file.master_seed,
        codec_command: file.codec_command,
        cells,
        inputs: file.inputs,
    };
    plan.validate()?;
    Ok(plan)
}

impl AssessmentPlan {
    /// Canonical TOML text. `parse_plan(p.to_toml()) == p` for valid plans.
    pub fn to_toml(&self) -> String {
        let file = PlanFile {
            master_seed: self.master_seed,
            codec_command: self.codec_command.clone(),
            cells: self
                .cells
                .iter()
                .map(|c| CellFile {
                    name: Some(c.name.clone()),
                    op: c.ladder.op_name(),
                    severities: c
                        .ladder
                        .rungs
                        .iter()
                        .map(|r| match r.as_slice() {
                            [one] => SeverityEntry::One(one.clone()),
                            many => SeverityEntry::Many(many.to_vec()),
                        })
                        .collect(),
                    params: Vec::new(),
                    seed: c.seed,
                    active: (!c.active).then_some(false),
                })
                .collect(),
            inputs: self.inputs.clone(),
        };
        toml::to_string(&file).expect("plan serializes")
    }
}
