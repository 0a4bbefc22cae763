//! Enhancement: linear adjustment, gamma correction, and contrast about the
//! channel mean.

use super::OpError;
use crate::raster::{quantize, Image};

/// `out = alpha * in + beta` per sample.
pub fn linear_adjust(img: &Image, alpha: f64, beta: f64) -> Result<Image, OpError> {
    if !(alpha > 0.0 && alpha.is_finite()) || !beta.is_finite() {
        return Err(OpError::InvalidAlpha(alpha));
    }
    let lut: Vec<u8> = (0..=255u16).map(|v| quantize(alpha * v as f64 + beta)).collect();
    Ok(img.map_samples(|v, _, _| lut[v as usize]))
}

/// `out = 255 * (in / 255)^gamma` per sample.
pub fn gamma_correct(img: &Image, gamma: f64) -> Result<Image, OpError> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(OpError::InvalidGamma(gamma));
    }
    let lut: Vec<u8> = (0..=255u16)
        .map(|v| quantize(255.0 * (v as f64 / 255.0).powf(gamma)))
        .collect();
    Ok(img.map_samples(|v, _, _| lut[v as usize]))
}

/// Scales each channel about its own mean: `out = mean + factor * (in - mean)`.
pub fn contrast_about_mean(img: &Image, factor: f64) -> Result<Image, OpError> {
    if !(factor > 0.0 && factor.is_finite()) {
        return Err(OpError::InvalidAlpha(factor));
    }
    let mean = img.stats().mean;
    let luts: Vec<Vec<u8>> = mean
        .iter()
        .map(|&m| (0..=255u16).map(|v| quantize(m + factor * (v as f64 - m))).collect())
        .collect();
    Ok(img.map_samples(|v, _, c| luts[c][v as usize]))
}
