//! Degradation operations.
//!
//! Each family is a pure `Image -> Image` transform:
//!
//! | family      | operations                                            |
//! |-------------|-------------------------------------------------------|
//! | compression | [`jpeg_transcode`], [`external_codec_transcode`]      |
//! | smoothing   | [`gaussian_blur`], [`median_filter`], [`average_filter`] |
//! | noise       | [`awgn`], [`poisson_gaussian_noise`]                  |
//! | enhancement | [`linear_adjust`], [`gamma_correct`], [`contrast_about_mean`] |
//! | resizing    | [`downscale`]                                         |
//! | mixtures    | [`compose`]                                           |
//!
//! [`DegradationOp`] carries one operation with concrete parameters.
//! Stochastic operations carry their seed inline, so applying an op twice
//! always gives the same bytes.

pub mod codec;
pub mod filter;
pub mod jpeg;
pub mod noise;
pub mod resize;
pub mod tone;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::raster::{Image, RasterError};

pub use codec::{external_codec_transcode, LEVEL_ENV};
pub use filter::{average_filter, gaussian_blur, gaussian_kernel, median_filter, sigma_for_kernel};
pub use jpeg::jpeg_transcode;
pub use noise::{awgn, awgn_delta, poisson_gaussian_noise, PoissonGaussian};
pub use resize::{downscale, resize_bilinear};
pub use tone::{contrast_about_mean, gamma_correct, linear_adjust};

#[derive(Debug, Error)]
pub enum OpError {
    #[error("jpeg quality {0} outside [1, 100]")]
    InvalidQuality(u32),
    #[error("kernel size {0} must be odd and at least 3")]
    InvalidKernel(usize),
    #[error("scale factor {0} must be positive")]
    InvalidAlpha(f64),
    #[error("gamma {0} must be positive")]
    InvalidGamma(f64),
    #[error("noise sigma {0} must be non-negative")]
    InvalidSigma(f64),
    #[error("noise model a={a}, b={b} must be non-negative")]
    InvalidNoiseModel { a: f64, b: f64 },
    #[error("downscale factor {0} must be an integer >= 2")]
    InvalidFactor(u32),
    #[error("downscale factor {factor} too large for {width}x{height} image")]
    FactorTooLarge { factor: u32, width: u32, height: u32 },
    #[error("compose needs at least one step")]
    EmptyCompose,
    #[error("compose steps cannot themselves be compose")]
    NestedCompose,
    #[error("step {index}: {source}")]
    Step {
        index: usize,
        #[source]
        source: Box<OpError>,
    },
    #[error("could not start codec `{command}`: {reason}")]
    CodecSpawnFailure { command: String, reason: String },
    #[error("codec protocol violation: {0}")]
    CodecProtocolViolation(String),
    #[error("codec `{command}` exited with {code:?}: {stderr}")]
    CodecNonzeroExit {
        command: String,
        code: Option<i32>,
        stderr: String,
    },
    #[error(transparent)]
    Raster(#[from] RasterError),
}

/// Operation kinds, without parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OpKind {
    Jpeg,
    ExternalCodec,
    GaussianBlur,
    MedianFilter,
    AverageFilter,
    Awgn,
    PoissonGaussian,
    LinearAdjust,
    Contrast,
    Gamma,
    Downscale,
    Compose,
}

impl OpKind {
    pub const ALL: [OpKind; 12] = [
        OpKind::Jpeg,
        OpKind::ExternalCodec,
        OpKind::GaussianBlur,
        OpKind::MedianFilter,
        OpKind::AverageFilter,
        OpKind::Awgn,
        OpKind::PoissonGaussian,
        OpKind::LinearAdjust,
        OpKind::Contrast,
        OpKind::Gamma,
        OpKind::Downscale,
        OpKind::Compose,
    ];

    pub fn name(self) -> &'static str {
        match self {
            OpKind::Jpeg => "jpeg",
            OpKind::ExternalCodec => "external_codec",
            OpKind::GaussianBlur => "gaussian_blur",
            OpKind::MedianFilter => "median_filter",
            OpKind::AverageFilter => "average_filter",
            OpKind::Awgn => "awgn",
            OpKind::PoissonGaussian => "poisson_gaussian",
            OpKind::LinearAdjust => "linear_adjust",
            OpKind::Contrast => "contrast",
            OpKind::Gamma => "gamma",
            OpKind::Downscale => "downscale",
            OpKind::Compose => "compose",
        }
    }

    pub fn from_name(name: &str) -> Option<OpKind> {
        OpKind::ALL.into_iter().find(|k| k.name() == name)
    }

    pub fn is_stochastic(self) -> bool {
        matches!(self, OpKind::Awgn | OpKind::PoissonGaussian)
    }
}

impl fmt::Display for OpKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One degradation with concrete parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum DegradationOp {
    Jpeg { quality: u32 },
    ExternalCodec { command: String, level: String },
    GaussianBlur { kernel: usize },
    MedianFilter { kernel: usize },
    AverageFilter { kernel: usize },
    Awgn { sigma: f64, seed: u64 },
    PoissonGaussian { a: f64, b: f64, seed: u64 },
    LinearAdjust { alpha: f64, beta: f64 },
    Contrast { factor: f64 },
    Gamma { gamma: f64 },
    Downscale { factor: u32 },
    Compose { steps: Vec<DegradationOp> },
}

impl DegradationOp {
    pub fn kind(&self) -> OpKind {
        match self {
            DegradationOp::Jpeg { .. } => OpKind::Jpeg,
            DegradationOp::ExternalCodec { .. } => OpKind::ExternalCodec,
            DegradationOp::GaussianBlur { .. } => OpKind::GaussianBlur,
            DegradationOp::MedianFilter { .. } => OpKind::MedianFilter,
            DegradationOp::AverageFilter { .. } => OpKind::AverageFilter,
            DegradationOp::Awgn { .. } => OpKind::Awgn,
            DegradationOp::PoissonGaussian { .. } => OpKind::PoissonGaussian,
            DegradationOp::LinearAdjust { .. } => OpKind::LinearAdjust,
            DegradationOp::Contrast { .. } => OpKind::Contrast,
            DegradationOp::Gamma { .. } => OpKind::Gamma,
            DegradationOp::Downscale { .. } => OpKind::Downscale,
            DegradationOp::Compose { .. } => OpKind::Compose,
        }
    }

    /// True when the op (or any compose member) consumes a seed.
    pub fn is_stochastic(&self) -> bool {
        match self {
            DegradationOp::Compose { steps } => steps.iter().any(|s| s.is_stochastic()),
            other => other.kind().is_stochastic(),
        }
    }

    /// Checks parameter invariants without touching an image.
    pub fn validate(&self) -> Result<(), OpError> {
        match *self {
            DegradationOp::Jpeg { quality } if !(1..=100).contains(&quality) => {
                Err(OpError::InvalidQuality(quality))
            }
            DegradationOp::GaussianBlur { kernel }
            | DegradationOp::MedianFilter { kernel }
            | DegradationOp::AverageFilter { kernel }
                if kernel < 3 || kernel % 2 == 0 =>
            {
                Err(OpError::InvalidKernel(kernel))
            }
            DegradationOp::Awgn { sigma, .. } => noise::check_sigma(sigma),
            DegradationOp::PoissonGaussian { a, b, .. } => PoissonGaussian { a, b }.validate(),
            DegradationOp::LinearAdjust { alpha, beta } if !(alpha > 0.0 && alpha.is_finite() && beta.is_finite()) => {
                Err(OpError::InvalidAlpha(alpha))
            }
            DegradationOp::Contrast { factor } if !(factor > 0.0 && factor.is_finite()) => {
                Err(OpError::InvalidAlpha(factor))
            }
            DegradationOp::Gamma { gamma } if !(gamma > 0.0 && gamma.is_finite()) => Err(OpError::InvalidGamma(gamma)),
            DegradationOp::Downscale { factor } => resize::check_factor(factor),
            DegradationOp::Compose { ref steps } => {
                if steps.is_empty() {
                    return Err(OpError::EmptyCompose);
                }
                for (index, step) in steps.iter().enumerate() {
                    if step.kind() == OpKind::Compose {
                        return Err(OpError::NestedCompose);
                    }
                    step.validate().map_err(|e| OpError::Step {
                        index,
                        source: Box::new(e),
                    })?;
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn apply(&self, img: &Image) -> Result<Image, OpError> {
        match self {
            DegradationOp::Jpeg { quality } => jpeg_transcode(img, *quality),
            DegradationOp::ExternalCodec { command, level } => external_codec_transcode(img, command, level),
            DegradationOp::GaussianBlur { kernel } => gaussian_blur(img, *kernel),
            DegradationOp::MedianFilter { kernel } => median_filter(img, *kernel),
            DegradationOp::AverageFilter { kernel } => average_filter(img, *kernel),
            DegradationOp::Awgn { sigma, seed } => awgn(img, *sigma, *seed),
            DegradationOp::PoissonGaussian { a, b, seed } => {
                poisson_gaussian_noise(img, PoissonGaussian { a: *a, b: *b }, *seed)
            }
            DegradationOp::LinearAdjust { alpha, beta } => linear_adjust(img, *alpha, *beta),
            DegradationOp::Contrast { factor } => contrast_about_mean(img, *factor),
            DegradationOp::Gamma { gamma } => gamma_correct(img, *gamma),
            DegradationOp::Downscale { factor } => downscale(img, *factor),
            DegradationOp::Compose { steps } => compose(img, steps),
        }
    }
}

impl fmt::Display for DegradationOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DegradationOp::Jpeg { quality } => write!(f, "jpeg(q={quality})"),
            DegradationOp::ExternalCodec { level, .. } => write!(f, "external_codec({level})"),
            DegradationOp::GaussianBlur { kernel } => write!(f, "gaussian_blur(k={kernel})"),
            DegradationOp::MedianFilter { kernel } => write!(f, "median_filter(k={kernel})"),
            DegradationOp::AverageFilter { kernel } => write!(f, "average_filter(k={kernel})"),
            DegradationOp::Awgn { sigma, .. } => write!(f, "awgn(sigma={sigma})"),
            DegradationOp::PoissonGaussian { a, b, .. } => write!(f, "poisson_gaussian(a={a}, b={b})"),
            DegradationOp::LinearAdjust { alpha, beta } => write!(f, "linear_adjust(alpha={alpha}, beta={beta})"),
            DegradationOp::Contrast { factor } => write!(f, "contrast(factor={factor})"),
            DegradationOp::Gamma { gamma } => write!(f, "gamma({gamma})"),
            DegradationOp::Downscale { factor } => write!(f, "downscale(x{factor})"),
            DegradationOp::Compose { steps } => {
                for (i, s) in steps.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" + ")?;
                    }
                    write!(f, "{s}")?;
                }
                Ok(())
            }
        }
    }
}

/// Applies `steps` left to right. Errors carry the failing step's index.
pub fn compose(img: &Image, steps: &[DegradationOp]) -> Result<Image, OpError> {
    DegradationOp::Compose { steps: steps.to_vec() }.validate()?;
    let mut current = img.clone();
    for (index, step) in steps.iter().enumerate() {
        current = step.apply(&current).map_err(|e| OpError::Step {
            index,
            source: Box::new(e),
        })?;
    }
    Ok(current)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::natural_photo;

    #[test]
    fn compose_identity_and_chaining() {
        let photo = natural_photo();
        assert_eq!(compose(&photo, &[DegradationOp::Gamma { gamma: 1.0 }]).unwrap(), photo);

        let steps = [DegradationOp::Jpeg { quality: 60 }, DegradationOp::Awgn { sigma: 30.0, seed: 17 }];
        let chained = awgn(&jpeg_transcode(&photo, 60).unwrap(), 30.0, 17).unwrap();
        assert_eq!(compose(&photo, &steps).unwrap(), chained);
    }

    #[test]
    fn compose_errors_carry_step_index() {
        let img = Image::filled(4, 4, [1; 3]);
        assert!(matches!(compose(&img, &[]), Err(OpError::EmptyCompose)));
        let nested = DegradationOp::Compose { steps: vec![DegradationOp::Gamma { gamma: 1.0 }] };
        assert!(matches!(compose(&img, &[nested]), Err(OpError::NestedCompose)));
        let err = compose(&img, &[DegradationOp::Gamma { gamma: 2.0 }, DegradationOp::GaussianBlur { kernel: 4 }])
            .unwrap_err();
        match err {
            OpError::Step { index, source } => {
                assert_eq!(index, 1);
                assert!(matches!(*source, OpError::InvalidKernel(4)));
            }
            other => panic!("unexpected {other}"),
        }
        let err = compose(&img, &[DegradationOp::Downscale { factor: 8 }]).unwrap_err();
        assert!(matches!(err, OpError::Step { index: 0, .. }));
    }

    #[test]
    fn kind_names_round_trip() {
        for k in OpKind::ALL {
            assert_eq!(OpKind::from_name(k.name()), Some(k));
        }
        assert_eq!(OpKind::from_name("sharpen"), None);
    }

    #[test]
    fn ops_serialize_with_tag() {
        let op = DegradationOp::Awgn { sigma: 5.0, seed: 9 };
        let json = serde_json::to_string(&op).unwrap();
        assert_eq!(json, r#"{"op":"awgn","sigma":5.0,"seed":9}"#);
        assert_eq!(serde_json::from_str::<DegradationOp>(&json).unwrap(), op);
    }

    #[test]
    fn every_op_preserves_dimensions_and_is_deterministic() {
        let img = Image::from_fn(40, 24, |x, y| [(x * 6) as u8, (y * 10) as u8, ((x ^ y) * 4) as u8]);
        let ops = [
            DegradationOp::Jpeg { quality: 30 },
            DegradationOp::GaussianBlur { kernel: 7 },
            DegradationOp::MedianFilter { kernel: 5 },
            DegradationOp::AverageFilter { kernel: 11 },
            DegradationOp::Awgn { sigma: 50.0, seed: 1 },
            DegradationOp::PoissonGaussian { a: 0.01, b: 0.0002, seed: 2 },
            DegradationOp::LinearAdjust { alpha: 1.3, beta: -20.0 },
            DegradationOp::Contrast { factor: 0.6 },
            DegradationOp::Gamma { gamma: 0.1 },
            DegradationOp::Downscale { factor: 16 },
        ];
        for op in &ops {
            op.validate().unwrap();
            let a = op.apply(&img).unwrap();
            assert_eq!(a.dimensions(), img.dimensions(), "{op}");
            assert_eq!(a, op.apply(&img).unwrap(), "{op}");
        }
    }
}
