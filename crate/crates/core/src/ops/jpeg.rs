//! Baseline JPEG round-trip.
//!
//! Encoding is baseline sequential with 4:2:0 chroma subsampling and the
//! Annex K quantization tables scaled by quality. Decoding goes through the
//! `image` crate.

use std::path::Path;

use jpeg_encoder::{ColorType, Encoder, SamplingFactor};

use super::OpError;
use crate::raster::{Image, RasterError};

pub fn encode_jpeg(img: &Image, quality: u32) -> Result<Vec<u8>, RasterError> {
    if !(1..=100).contains(&quality) {
        return Err(RasterError::InvalidQuality(quality));
    }
    let (w, h) = img.dimensions();
    if w > u16::MAX as u32 || h > u16::MAX as u32 {
        return Err(RasterError::Encode(format!("{w}x{h} exceeds jpeg limits")));
    }
    let mut out = Vec::new();
    let mut encoder = Encoder::new(&mut out, quality as u8);
    encoder.set_sampling_factor(SamplingFactor::R_4_2_0);
    encoder
        .encode(img.as_raw(), w as u16, h as u16, ColorType::Rgb)
        .map_err(|e| RasterError::Encode(e.to_string()))?;
    Ok(out)
}

/// Encodes at `quality` and decodes back in memory.
pub fn jpeg_transcode(img: &Image, quality: u32) -> Result<Image, OpError> {
    if !(1..=100).contains(&quality) {
        return Err(OpError::InvalidQuality(quality));
    }
    let bytes = encode_jpeg(img, quality)?;
    let decoded = Image::decode(&bytes, Path::new("<jpeg transcode>"))?;
    debug_assert_eq!(decoded.dimensions(), img.dimensions());
    Ok(decoded)
}
