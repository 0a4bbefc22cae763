//! Seeded training-time augmentation chain.
//!
//! Four stages run in a fixed order, each firing independently:
//!
//! 1. enhancement (p = 0.5): brightness (gamma with exponent = factor) or
//!    contrast (linear about the channel mean, slope = factor), factor in
//!    `[0.5, 1.5]`;
//! 2. smoothing (p = 0.5): Gaussian or average blur, odd kernel in `[3, 15]`;
//! 3. additive Gaussian noise (p = 0.3): σ in `[0, 50]`;
//! 4. JPEG (p = 0.7): quality in `[10, 95]`.
//!
//! A draw is a pure function of `(config.seed, draw_key)`. Each stage uses
//! its own sub-key, so changing one stage's probability never changes
//! another stage's decisions.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ops::{compose, DegradationOp, OpError, OpKind};
use crate::raster::{load_image, save_image, Image, SaveFormat};
use crate::rng;
use crate::severity::inputs_from_dir;

#[derive(Debug, Error)]
pub enum AugmentError {
    #[error("invalid augmentation config: {0}")]
    InvalidConfig(String),
    #[error("{0}")]
    Op(#[from] OpError),
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
}

/// Chain parameters. Ranges are inclusive `[low, high]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentationChainConfig {
    pub p_enhance: f64,
    pub enhance_factor_range: [f64; 2],
    pub p_smooth: f64,
    pub smooth_kernel_range: [usize; 2],
    pub p_noise: f64,
    pub noise_sigma_range: [f64; 2],
    pub p_jpeg: f64,
    pub jpeg_quality_range: [u32; 2],
    pub seed: u64,
}

impl Default for AugmentationChainConfig {
    fn default() -> Self {
        Self {
            p_enhance: 0.5,
            enhance_factor_range: [0.5, 1.5],
            p_smooth: 0.5,
            smooth_kernel_range: [3, 15],
            p_noise: 0.3,
            noise_sigma_range: [0.0, 50.0],
            p_jpeg: 0.7,
            jpeg_quality_range: [10, 95],
            seed: 0,
        }
    }
}

impl AugmentationChainConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Sets all four stage probabilities.
    pub fn with_probabilities(mut self, p: f64) -> Self {
        self.p_enhance = p;
        self.p_smooth = p;
        self.p_noise = p;
        self.p_jpeg = p;
        self
    }

    pub fn validate(&self) -> Result<(), AugmentError> {
        let bad = |m: String| Err(AugmentError::InvalidConfig(m));
        for (name, p) in [
            ("p_enhance", self.p_enhance),
            ("p_smooth", self.p_smooth),
            ("p_noise", self.p_noise),
            ("p_jpeg", self.p_jpeg),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} = {p} outside [0, 1]"));
            }
        }
        let [lo, hi] = self.enhance_factor_range;
        if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
            return bad(format!("enhance_factor_range [{lo}, {hi}] must be positive and ordered"));
        }
        let [lo, hi] = self.smooth_kernel_range;
        if lo < 3 || lo > hi || lo % 2 == 0 || hi % 2 == 0 {
            return bad(format!("smooth_kernel_range [{lo}, {hi}] needs odd endpoints >= 3"));
        }
        let [lo, hi] = self.noise_sigma_range;
        if !(lo >= 0.0 && lo <= hi && hi.is_finite()) {
            return bad(format!("noise_sigma_range [{lo}, {hi}] must be non-negative and ordered"));
        }
        let [lo, hi] = self.jpeg_quality_range;
        if lo < 1 || hi > 100 || lo > hi {
            return bad(format!("jpeg_quality_range [{lo}, {hi}] must lie in [1, 100]"));
        }
        Ok(())
    }

    /// Parses TOML with the field names above; missing fields keep their
    /// defaults.
    pub fn from_toml(text: &str) -> Result<Self, AugmentError> {
        let cfg: Self = toml::from_str(text).map_err(|e| AugmentError::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

/// Chain stage, in application order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Enhance,
    Smooth,
    Noise,
    Jpeg,
}

impl Stage {
    pub const ALL: [Stage; 4] = [Stage::Enhance, Stage::Smooth, Stage::Noise, Stage::Jpeg];

    pub fn of(op: &DegradationOp) -> Option<Stage> {
        match op.kind() {
            OpKind::Gamma | OpKind::Contrast => Some(Stage::Enhance),
            OpKind::GaussianBlur | OpKind::AverageFilter => Some(Stage::Smooth),
            OpKind::Awgn => Some(Stage::Noise),
            OpKind::Jpeg => Some(Stage::Jpeg),
            _ => None,
        }
    }
}

/// The concrete steps one draw applies, in stage order. May be empty.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ChainDraw {
    pub steps: Vec<DegradationOp>,
}

impl ChainDraw {
    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn stages(&self) -> Vec<Stage> {
        self.steps.iter().filter_map(Stage::of).collect()
    }

    pub fn step(&self, stage: Stage) -> Option<&DegradationOp> {
        self.steps.iter().find(|s| Stage::of(s) == Some(stage))
    }

    pub fn apply(&self, img: &Image) -> Result<Image, OpError> {
        if self.steps.is_empty() {
            return Ok(img.clone());
        }
        compose(img, &self.steps)
    }
}

fn lerp([lo, hi]: [f64; 2], u: f64) -> f64 {
    lo + u * (hi - lo)
}

fn pick_int(lo: u64, hi: u64, u: f64) -> u64 {
    let count = hi - lo + 1;
    lo + ((u * count as f64) as u64).min(count - 1)
}

/// Decides which stages fire for `draw_key` and with what parameters.
pub fn sample_chain(cfg: &AugmentationChainConfig, draw_key: u64) -> ChainDraw {
    let base = rng::mix(cfg.seed, draw_key);
    let mut steps = Vec::new();
    for (index, stage) in Stage::ALL.into_iter().enumerate() {
        let key = rng::mix(base, index as u64);
        let fires = rng::uniform(key, 0);
        let variant = rng::uniform(key, 1);
        let param = rng::uniform(key, 2);
        let p = match stage {
            Stage::Enhance => cfg.p_enhance,
            Stage::Smooth => cfg.p_smooth,
            Stage::Noise => cfg.p_noise,
            Stage::Jpeg => cfg.p_jpeg,
        };
        if fires >= p {
            continue;
        }
        steps.push(match stage {
            Stage::Enhance => {
                let factor = lerp(cfg.enhance_factor_range, param);
                if variant < 0.5 {
                    DegradationOp::Gamma { gamma: factor }
                } else {
                    DegradationOp::Contrast { factor }
                }
            }
            Stage::Smooth => {
                let [lo, hi] = cfg.smooth_kernel_range;
                let kernel = lo + 2 * pick_int(0, ((hi - lo) / 2) as u64, param) as usize;
                if variant < 0.5 {
                    DegradationOp::GaussianBlur { kernel }
                } else {
                    DegradationOp::AverageFilter { kernel }
                }
            }
            Stage::Noise => DegradationOp::Awgn {
                sigma: lerp(cfg.noise_sigma_range, param),
                seed: rng::mix(key, 3),
            },
            Stage::Jpeg => {
                let [lo, hi] = cfg.jpeg_quality_range;
                DegradationOp::Jpeg {
                    quality: pick_int(lo as u64, hi as u64, param) as u32,
                }
            }
        });
    }
    ChainDraw { steps }
}

/// Samples the chain for `draw_key` and applies it to `img`.
pub fn apply_chain(img: &Image, cfg: &AugmentationChainConfig, draw_key: u64) -> Result<Image, OpError> {
    sample_chain(cfg, draw_key).apply(img)
}

/// One line of the draw log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrawLogEntry {
    pub item_id: String,
    pub draw_key: u64,
    pub steps: Vec<DegradationOp>,
}

pub const DRAW_LOG_FILE: &str = "draws.jsonl";

/// An item that could not be augmented: `(item_id, message)`.
pub type ItemFailure = (String, String);

/// Augments every image under `in_dir` into `out_dir/<item>.png` and writes
/// `out_dir/draws.jsonl`. Draw keys are item positions in sorted order.
/// Returns the log entries of items that succeeded and the failures.
pub fn augment_dir(
    in_dir: &Path,
    out_dir: &Path,
    cfg: &AugmentationChainConfig,
    jobs: Option<usize>,
) -> Result<(Vec<DrawLogEntry>, Vec<ItemFailure>), AugmentError> {
    cfg.validate()?;
    let inputs = inputs_from_dir(in_dir).map_err(|e| AugmentError::Io {
        path: in_dir.to_path_buf(),
        message: e.to_string(),
    })?;
    std::fs::create_dir_all(out_dir).map_err(|e| AugmentError::Io {
        path: out_dir.to_path_buf(),
        message: e.to_string(),
    })?;
    let work = || {
        inputs
            .par_iter()
            .enumerate()
            .map(|(key, item)| {
                let draw = sample_chain(cfg, key as u64);
                let dest = out_dir.join(format!("{}.png", item.id));
                let result = load_image(&item.path)
                    .map_err(|e| e.to_string())
                    .and_then(|img| draw.apply(&img).map_err(|e| e.to_string()))
                    .and_then(|img| {
                        if let Some(parent) = dest.parent() {
                            std::fs::create_dir_all(parent).map_err(|e| e.to_string())?;
                        }
                        save_image(&img, &dest, SaveFormat::Png).map_err(|e| e.to_string())
                    });
                match result {
                    Ok(()) => Ok(DrawLogEntry {
                        item_id: item.id.clone(),
                        draw_key: key as u64,
                        steps: draw.steps,
                    }),
                    Err(message) => Err((item.id.clone(), message)),
                }
            })
            .collect::<Vec<_>>()
    };
    let results = match jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| AugmentError::InvalidConfig(e.to_string()))?
            .install(work),
        None => work(),
    };
    let mut log = Vec::new();
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok(entry) => log.push(entry),
            Err(f) => failures.push(f),
        }
    }
    let mut text = String::new();
    for entry in &log {
        text.push_str(&serde_json::to_string(entry).expect("log entry serializes"));
        text.push('\n');
    }
    let log_path = out_dir.join(DRAW_LOG_FILE);
    std::fs::write(&log_path, text).map_err(|e| AugmentError::Io {
        path: log_path,
        message: e.to_string(),
    })?;
    Ok((log, failures))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::natural_photo;

    #[test]
    fn degenerate_probabilities() {
        let none = AugmentationChainConfig::default().with_probabilities(0.0);
        let all = AugmentationChainConfig::default().with_probabilities(1.0);
        for key in 0..200 {
            assert!(sample_chain(&none, key).is_empty());
            assert_eq!(sample_chain(&all, key).stages(), Stage::ALL);
        }
    }

    #[test]
    fn parameters_stay_in_range() {
        let cfg = AugmentationChainConfig::default().with_probabilities(1.0).with_seed(9);
        let mut kernels = std::collections::BTreeSet::new();
        let mut qualities = std::collections::BTreeSet::new();
        for key in 0..5000 {
            let draw = sample_chain(&cfg, key);
            for step in &draw.steps {
                match *step {
                    DegradationOp::Gamma { gamma: f } | DegradationOp::Contrast { factor: f } => {
                        assert!((0.5..=1.5).contains(&f))
                    }
                    DegradationOp::GaussianBlur { kernel } | DegradationOp::AverageFilter { kernel } => {
                        kernels.insert(kernel);
                    }
                    DegradationOp::Awgn { sigma, .. } => assert!((0.0..=50.0).contains(&sigma)),
                    DegradationOp::Jpeg { quality } => {
                        qualities.insert(quality);
                    }
                    ref other => panic!("unexpected step {other}"),
                }
            }
        }
        assert_eq!(kernels.into_iter().collect::<Vec<_>>(), [3, 5, 7, 9, 11, 13, 15]);
        assert_eq!(qualities.first(), Some(&10));
        assert_eq!(qualities.last(), Some(&95));
        assert_eq!(qualities.len(), 86);
    }

    #[test]
    fn variants_are_balanced() {
        let cfg = AugmentationChainConfig::default().with_probabilities(1.0);
        let n = 10_000;
        let (mut gamma, mut gauss) = (0, 0);
        for key in 0..n {
            let d = sample_chain(&cfg, key);
            gamma += matches!(d.step(Stage::Enhance), Some(DegradationOp::Gamma { .. })) as usize;
            gauss += matches!(d.step(Stage::Smooth), Some(DegradationOp::GaussianBlur { .. })) as usize;
        }
        for count in [gamma, gauss] {
            let f = count as f64 / n as f64;
            assert!((f - 0.5).abs() < 0.02, "{f}");
        }
    }

    #[test]
    fn stage_decisions_are_independent() {
        let base = AugmentationChainConfig::default().with_seed(4);
        let toggled = AugmentationChainConfig { p_noise: 1.0, ..base.clone() };
        for key in 0..1000 {
            let a = sample_chain(&base, key);
            let b = sample_chain(&toggled, key);
            for stage in [Stage::Enhance, Stage::Smooth, Stage::Jpeg] {
                assert_eq!(a.step(stage), b.step(stage));
            }
            if let Some(n) = a.step(Stage::Noise) {
                assert_eq!(Some(n), b.step(Stage::Noise));
            }
        }
    }

    #[test]
    fn apply_matches_manual_compose() {
        let photo = natural_photo();
        let small = crate::ops::resize_bilinear(&photo, 64, 64);
        let cfg = AugmentationChainConfig::default().with_seed(77);
        for key in 0..100 {
            let draw = sample_chain(&cfg, key);
            let manual = if draw.is_empty() { small.clone() } else { compose(&small, &draw.steps).unwrap() };
            let out = apply_chain(&small, &cfg, key).unwrap();
            assert_eq!(out, manual, "key {key}");
            assert_eq!(out, apply_chain(&small, &cfg, key).unwrap());
        }
        let none = cfg.with_probabilities(0.0);
        assert_eq!(apply_chain(&small, &none, 3).unwrap(), small);
    }

    #[test]
    fn config_validation_and_toml() {
        let cfg = AugmentationChainConfig::default();
        cfg.validate().unwrap();
        assert_eq!(AugmentationChainConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
        let partial = AugmentationChainConfig::from_toml("p_noise = 0.9\nseed = 5\n").unwrap();
        assert_eq!(partial.p_noise, 0.9);
        assert_eq!(partial.p_jpeg, 0.7);
        for bad in [
            "p_jpeg = 1.5",
            "smooth_kernel_range = [4, 15]",
            "smooth_kernel_range = [15, 3]",
            "jpeg_quality_range = [0, 95]",
            "noise_sigma_range = [-1.0, 5.0]",
            "enhance_factor_range = [0.0, 1.0]",
            "unknown = 1",
        ] {
            assert!(AugmentationChainConfig::from_toml(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn batch_mode_writes_images_and_log() {
        let src = tempfile::tempdir().unwrap();
        let out = tempfile::tempdir().unwrap();
        for i in 0..4u32 {
            let img = Image::from_fn(24, 24, |x, y| [(x * 10 + i) as u8, (y * 10) as u8, 60]);
            save_image(&img, src.path().join(format!("p{i}.png")), SaveFormat::Png).unwrap();
        }
        let cfg = AugmentationChainConfig::default().with_seed(1);
        let (log, failures) = augment_dir(src.path(), out.path(), &cfg, Some(2)).unwrap();
        assert!(failures.is_empty());
        assert_eq!(log.len(), 4);
        let text = std::fs::read_to_string(out.path().join(DRAW_LOG_FILE)).unwrap();
        let parsed: Vec<DrawLogEntry> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
        assert_eq!(parsed, log);
        for entry in &log {
            let src_img = load_image(src.path().join(format!("{}.png", entry.item_id))).unwrap();
            let expected = ChainDraw { steps: entry.steps.clone() }.apply(&src_img).unwrap();
            let written = load_image(out.path().join(format!("{}.png", entry.item_id))).unwrap();
            assert_eq!(written, expected);
        }
    }
}
