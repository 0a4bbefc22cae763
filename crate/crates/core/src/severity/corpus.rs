//! Deterministic generation of degraded test corpora.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use thiserror::Error;

use super::manifest::{Manifest, ManifestError, ManifestRow, MANIFEST_FILE};
use super::plan::{validate_item_id, AssessmentPlan, InputItem, PlanError};
use crate::metrics::CellId;
use crate::raster::{load_image, save_image, Image, SaveFormat};

/// Name of the plan snapshot written next to the manifest.
pub const PLAN_FILE: &str = "plan.toml";

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Manifest(#[from] ManifestError),
    #[error("thread pool: {0}")]
    Pool(String),
}

/// A row that could not be produced. Generation continues past these.
#[derive(Debug, Clone, PartialEq)]
pub struct RowFailure {
    pub item_id: String,
    pub cell: CellId,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct CorpusOutcome {
    pub manifest: Manifest,
    pub failures: Vec<RowFailure>,
}

impl CorpusOutcome {
    pub fn is_complete(&self) -> bool {
        self.failures.is_empty()
    }
}

#[derive(Debug, Clone, Default)]
pub struct GenerateOptions {
    /// Worker threads; `None` uses the global rayon pool.
    pub jobs: Option<usize>,
}

struct Task<'a> {
    plan: &'a AssessmentPlan,
    out_dir: &'a Path,
}

impl Task<'_> {
    fn write(&self, rel: &str, img: &Image) -> Result<(), String> {
        let path = self.out_dir.join(rel);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| format!("{}: {e}", parent.display()))?;
        }
        save_image(img, &path, SaveFormat::Png).map_err(|e| e.to_string())
    }

    fn run_item(&self, item: &InputItem) -> (Vec<ManifestRow>, Vec<RowFailure>) {
        let mut rows = Vec::new();
        let mut failures = Vec::new();
        let source = item.path.to_string_lossy().replace('\\', "/");

        let mut cells = vec![CellId::Unaltered];
        for cell in self.plan.active_cells() {
            for i in 0..cell.ladder.rungs.len() {
                cells.push(CellId::rung(cell.name.clone(), i, cell.ladder.rung_label(i)));
            }
        }

        let image = match load_image(&item.path) {
            Ok(img) => img,
            Err(e) => {
                for cell in cells {
                    failures.push(RowFailure {
                        item_id: item.id.clone(),
                        cell,
                        message: e.to_string(),
                    });
                }
                return (rows, failures);
            }
        };

        let unaltered = format!("unaltered/{}.png", item.id);
        match self.write(&unaltered, &image) {
            Ok(()) => rows.push(ManifestRow {
                item_id: item.id.clone(),
                source_path: source.clone(),
                output_path: unaltered,
                cell: "Unaltered".into(),
                op_kind: "identity".into(),
                params: String::new(),
                severity_index: 0,
                seed: None,
                label: item.label,
            }),
            Err(message) => failures.push(RowFailure {
                item_id: item.id.clone(),
                cell: CellId::Unaltered,
                message,
            }),
        }

        for cell in self.plan.active_cells() {
            for index in 0..cell.ladder.rungs.len() {
                let params = cell.ladder.rung_label(index);
                let cell_id = CellId::rung(cell.name.clone(), index, params.clone());
                let seed = cell
                    .ladder
                    .is_stochastic()
                    .then(|| self.plan.derive_seed(cell, &item.id, index));
                let rel = format!("{}/{}/{}.png", cell.slug(), index, item.id);
                let result = cell
                    .ladder
                    .instantiate(index, seed.unwrap_or(0), self.plan.codec_command.as_deref())
                    .and_then(|op| op.apply(&image).map_err(|e| e.to_string()))
                    .and_then(|out| self.write(&rel, &out));
                match result {
                    Ok(()) => rows.push(ManifestRow {
                        item_id: item.id.clone(),
                        source_path: source.clone(),
                        output_path: rel,
                        cell: cell.name.clone(),
                        op_kind: cell.ladder.op_name(),
                        params,
                        severity_index: index,
                        seed,
                        label: item.label,
                    }),
                    Err(message) => failures.push(RowFailure {
                        item_id: item.id.clone(),
                        cell: cell_id,
                        message,
                    }),
                }
            }
        }
        (rows, failures)
    }
}

/// Writes every active rung of every input item as PNG under `out_dir`,
/// plus an unaltered copy per item, then persists `manifest.csv` and
/// `plan.toml`.
///
/// Output layout: `unaltered/<item>.png` and `<cell-slug>/<rung>/<item>.png`.
/// Per-row failures are collected in the outcome rather than aborting.
pub fn generate_corpus(
    plan: &AssessmentPlan,
    out_dir: impl AsRef<Path>,
    options: &GenerateOptions,
) -> Result<CorpusOutcome, CorpusError> {
    plan.validate()?;
    let out_dir = out_dir.as_ref();
    std::fs::create_dir_all(out_dir).map_err(|e| CorpusError::Io {
        path: out_dir.to_path_buf(),
        source: e,
    })?;
    let task = Task { plan, out_dir };
    let run = || {
        plan.inputs
            .par_iter()
            .map(|item| task.run_item(item))
            .collect::<Vec<_>>()
    };
    let per_item = match options.jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| CorpusError::Pool(e.to_string()))?
            .install(run),
        None => run(),
    };

    let mut manifest = Manifest::default();
    let mut failures = Vec::new();
    for (rows, fails) in per_item {
        manifest.rows.extend(rows);
        failures.extend(fails);
    }
    manifest.sort_canonical();
    failures.sort_by(|a, b| a.item_id.cmp(&b.item_id).then_with(|| a.cell.cmp(&b.cell)));
    for f in &failures {
        log::warn!("{} / {}: {}", f.item_id, f.cell, f.message);
    }

    manifest.save(out_dir.join(MANIFEST_FILE))?;
    let plan_path = out_dir.join(PLAN_FILE);
    let snapshot = AssessmentPlan {
        inputs: Vec::new(),
        ..plan.clone()
    };
    std::fs::write(&plan_path, snapshot.to_toml()).map_err(|e| CorpusError::Io {
        path: plan_path,
        source: e,
    })?;
    Ok(CorpusOutcome { manifest, failures })
}

/// Lists PNG/JPEG files under `dir` (recursively, sorted). Item ids are
/// relative paths without extension, `/`-separated.
pub fn inputs_from_dir(dir: impl AsRef<Path>) -> Result<Vec<InputItem>, CorpusError> {
    fn walk(root: &Path, dir: &Path, out: &mut Vec<InputItem>) -> Result<(), CorpusError> {
        let io = |e| CorpusError::Io {
            path: dir.to_path_buf(),
            source: e,
        };
        let mut entries: Vec<_> = std::fs::read_dir(dir).map_err(io)?.collect::<Result<_, _>>().map_err(io)?;
        entries.sort_by_key(|e| e.file_name());
        for entry in entries {
            let path = entry.path();
            if path.is_dir() {
                walk(root, &path, out)?;
                continue;
            }
            let ext = path.extension().and_then(|e| e.to_str()).map(|e| e.to_ascii_lowercase());
            if !matches!(ext.as_deref(), Some("png" | "jpg" | "jpeg")) {
                continue;
            }
            let rel = path.strip_prefix(root).expect("walked under root").with_extension("");
            let id = rel
                .components()
                .map(|c| c.as_os_str().to_string_lossy().into_owned())
                .collect::<Vec<_>>()
                .join("/");
            validate_item_id(&id).map_err(|m| {
                CorpusError::Plan(PlanError::InvalidParameter {
                    field: path.display().to_string(),
                    message: m,
                })
            })?;
            out.push(InputItem {
                id,
                path,
                label: None,
            });
        }
        Ok(())
    }
    let dir = dir.as_ref();
    let mut out = Vec::new();
    walk(dir, dir, &mut out)?;
    Ok(out)
}
