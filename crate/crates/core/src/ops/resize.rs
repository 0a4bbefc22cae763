//! Resolution loss: bilinear downscale by an integer factor followed by
//! bilinear upscale back to the original size.

use super::OpError;
use crate::raster::{quantize, Image};

// Half-pixel-centre bilinear resampling of an f64 plane set.
fn resample(src: &[f64], sw: usize, sh: usize, dw: usize, dh: usize) -> Vec<f64> {
    let sx_scale = sw as f64 / dw as f64;
    let sy_scale = sh as f64 / dh as f64;
    let axis = |d: usize, scale: f64, len: usize| -> (usize, usize, f64) {
        let pos = ((d as f64 + 0.5) * scale - 0.5).clamp(0.0, (len - 1) as f64);
        let i0 = pos.floor() as usize;
        let i1 = (i0 + 1).min(len - 1);
        (i0, i1, pos - i0 as f64)
    };
    let mut out = vec![0f64; dw * dh * 3];
    for y in 0..dh {
        let (y0, y1, fy) = axis(y, sy_scale, sh);
        for x in 0..dw {
            let (x0, x1, fx) = axis(x, sx_scale, sw);
            for c in 0..3 {
                let p = |xx: usize, yy: usize| src[(yy * sw + xx) * 3 + c];
                let top = p(x0, y0) * (1.0 - fx) + p(x1, y0) * fx;
                let bottom = p(x0, y1) * (1.0 - fx) + p(x1, y1) * fx;
                out[(y * dw + x) * 3 + c] = top * (1.0 - fy) + bottom * fy;
            }
        }
    }
    out
}

pub(crate) fn check_factor(factor: u32) -> Result<(), OpError> {
    if factor < 2 {
        return Err(OpError::InvalidFactor(factor));
    }
    Ok(())
}

/// Bilinear resize to `(width, height)`.
pub fn resize_bilinear(img: &Image, width: u32, height: u32) -> Image {
    let src: Vec<f64> = img.as_raw().iter().map(|&v| v as f64).collect();
    let out = resample(&src, img.width() as usize, img.height() as usize, width as usize, height as usize);
    Image::from_rgb(width, height, out.into_iter().map(quantize).collect()).expect("sized buffer")
}

/// Down by `factor` and back up; output has the input's dimensions.
///
/// The low-resolution intermediate is quantized to 8 bits, as it would be
/// if it were stored.
pub fn downscale(img: &Image, factor: u32) -> Result<Image, OpError> {
    check_factor(factor)?;
    let (w, h) = img.dimensions();
    if w < factor || h < factor {
        return Err(OpError::FactorTooLarge { factor, width: w, height: h });
    }
    let small = resize_bilinear(img, w / factor, h / factor);
    Ok(resize_bilinear(&small, w, h))
}
