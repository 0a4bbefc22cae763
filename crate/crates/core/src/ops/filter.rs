//! Smoothing filters: Gaussian, median, and box average.
//!
//! All windows are square with odd side, and borders use replicate padding.

use super::OpError;
use crate::raster::{quantize, Image};

fn check_kernel(kernel: usize) -> Result<(), OpError> {
    if kernel < 3 || kernel.is_multiple_of(2) {
        return Err(OpError::InvalidKernel(kernel));
    }
    Ok(())
}

/// σ used for a given kernel size: `0.3 * ((k - 1) * 0.5 - 1) + 0.8`.
pub fn sigma_for_kernel(kernel: usize) -> f64 {
    0.3 * ((kernel as f64 - 1.0) * 0.5 - 1.0) + 0.8
}

/// Normalized 1-D Gaussian taps for `kernel`, centre at index `kernel / 2`.
pub fn gaussian_kernel(kernel: usize) -> Vec<f64> {
    let sigma = sigma_for_kernel(kernel);
    let half = (kernel / 2) as i64;
    let taps: Vec<f64> = (-half..=half)
        .map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f64 = taps.iter().sum();
    taps.into_iter().map(|t| t / total).collect()
}

// Horizontal then vertical pass; the intermediate stays in f64.
fn separable(img: &Image, taps: &[f64]) -> Image {
    let (w, h) = (img.width() as usize, img.height() as usize);
    let half = (taps.len() / 2) as i64;
    let mut tmp = vec![0f64; w * h * 3];
    for y in 0..h {
        for x in 0..w {
            for c in 0..3 {
                let mut acc = 0.0;
                for (t, &wt) in taps.iter().enumerate() {
                    let sx = x as i64 + t as i64 - half;
                    acc += wt * img.sample_clamped(sx, y as i64, c) as f64;
                }
                tmp[(y * w + x) * 3 + c] = acc;
            }
        }
    }
    let mut out = vec![0u8; w * h * 3];
    for y in 0..h {
        for x in 0..w {
            for c in 0..3 {
                let mut acc = 0.0;
                for (t, &wt) in taps.iter().enumerate() {
                    let sy = (y as i64 + t as i64 - half).clamp(0, h as i64 - 1) as usize;
                    acc += wt * tmp[(sy * w + x) * 3 + c];
                }
                out[(y * w + x) * 3 + c] = quantize(acc);
            }
        }
    }
    Image::from_rgb(img.width(), img.height(), out).expect("same dimensions")
}

pub fn gaussian_blur(img: &Image, kernel: usize) -> Result<Image, OpError> {
    check_kernel(kernel)?;
    Ok(separable(img, &gaussian_kernel(kernel)))
}

pub fn average_filter(img: &Image, kernel: usize) -> Result<Image, OpError> {
    check_kernel(kernel)?;
    let taps = vec![1.0 / kernel as f64; kernel];
    Ok(separable(img, &taps))
}

pub fn median_filter(img: &Image, kernel: usize) -> Result<Image, OpError> {
    check_kernel(kernel)?;
    let half = (kernel / 2) as i64;
    let mid = kernel * kernel / 2;
    let mut window = Vec::with_capacity(kernel * kernel);
    let mut out = Vec::with_capacity(img.as_raw().len());
    for y in 0..img.height() as i64 {
        for x in 0..img.width() as i64 {
            for c in 0..3 {
                window.clear();
                for dy in -half..=half {
                    for dx in -half..=half {
                        window.push(img.sample_clamped(x + dx, y + dy, c));
                    }
                }
                let (_, m, _) = window.select_nth_unstable(mid);
                out.push(*m);
            }
        }
    }
    Ok(Image::from_rgb(img.width(), img.height(), out).expect("same dimensions"))
}
