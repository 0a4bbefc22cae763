//! Additive white Gaussian and Poissonian-Gaussian noise.
//!
//! Each sample's draw is keyed by `(seed, pixel index, channel)`.

use serde::{Deserialize, Serialize};

use super::OpError;
use crate::raster::{quantize, Image};
use crate::rng;

/// Signal-dependent noise: on intensities `y` in `[0, 1]` the noise variance
/// is `a * y + b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoissonGaussian {
    pub a: f64,
    pub b: f64,
}

impl Default for PoissonGaussian {
    fn default() -> Self {
        Self { a: 0.01, b: 0.0002 }
    }
}

impl PoissonGaussian {
    pub fn validate(&self) -> Result<(), OpError> {
        if !(self.a >= 0.0 && self.a.is_finite() && self.b >= 0.0 && self.b.is_finite()) {
            return Err(OpError::InvalidNoiseModel { a: self.a, b: self.b });
        }
        Ok(())
    }

    pub fn variance_at(&self, y: f64) -> f64 {
        (self.a * y + self.b).max(0.0)
    }
}

pub(crate) fn check_sigma(sigma: f64) -> Result<(), OpError> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(OpError::InvalidSigma(sigma));
    }
    Ok(())
}

/// Pre-quantization delta that [`awgn`] adds to one sample.
#[inline]
pub fn awgn_delta(seed: u64, pixel: usize, channel: usize, sigma: f64) -> f64 {
    sigma * rng::standard_normal(rng::sample_key(seed, pixel, channel), 0)
}

pub fn awgn(img: &Image, sigma: f64, seed: u64) -> Result<Image, OpError> {
    check_sigma(sigma)?;
    if sigma == 0.0 {
        return Ok(img.clone());
    }
    Ok(img.map_samples(|v, px, c| quantize(v as f64 + awgn_delta(seed, px, c, sigma))))
}

pub fn poisson_gaussian_noise(img: &Image, model: PoissonGaussian, seed: u64) -> Result<Image, OpError> {
    model.validate()?;
    if model.a == 0.0 && model.b == 0.0 {
        return Ok(img.clone());
    }
    Ok(img.map_samples(|v, px, c| {
        let y = v as f64 / 255.0;
        let n = model.variance_at(y).sqrt() * rng::standard_normal(rng::sample_key(seed, px, c), 0);
        quantize(255.0 * (y + n))
    }))
}
