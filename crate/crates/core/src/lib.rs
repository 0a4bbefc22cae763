//! Robustness assessment toolkit for image detectors.
//!
//! The crate turns a set of test images into a graded corpus of realistic
//! degradations, scores it with an external (or mock) detector, and reports
//! ACC/AUC/F1 per degradation cell. It also provides a seeded training-time
//! augmentation chain built from the same operations.
//!
//! - [`raster`]: the RGB8 [`Image`] type, PNG/JPEG IO, `mse`.
//! - [`ops`]: compression, smoothing, noise, enhancement, resizing, mixtures.
//! - [`severity`]: ladders, plans, corpus generation, manifests.
//! - [`augment`]: the enhancement → smoothing → noise → JPEG chain.
//! - [`metrics`]: accuracy, ROC AUC, F1 per cell.
//! - [`adapter`]: detector bridges (subprocess, score file, mock).
//! - [`report`]: metric tables and severity-curve data.
//! - [`cli`]: the `degrade` command-line front end.

pub mod adapter;
pub mod augment;
pub mod cli;
pub mod fixtures;
pub mod metrics;
pub mod ops;
pub(crate) mod process;
pub mod raster;
pub mod report;
pub mod rng;
pub mod severity;

pub use metrics::{CellId, Label, PredictionRecord};
pub use ops::{DegradationOp, OpError, OpKind};
pub use raster::{load_image, mse, save_image, Image, RasterError, SaveFormat};
pub use severity::{builtin_plan, generate_corpus, parse_plan, AssessmentPlan, Manifest};
