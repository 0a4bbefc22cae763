//! 8-bit RGB raster type plus PNG/JPEG ingest and emit.
//!
//! Every operation in the crate consumes and produces [`Image`]. Pixels are
//! interleaved `R,G,B` in row-major order. Arithmetic happens in `f64` and is
//! written back through [`quantize`], which rounds half away from zero and
//! then clamps to `[0, 255]`.

use std::fmt;
use std::io::Cursor;
use std::path::{Path, PathBuf};

use image::{DynamicImage, ImageFormat, ImageReader, RgbImage};
use thiserror::Error;

/// Errors raised while decoding, encoding, or comparing images.
#[derive(Debug, Error)]
pub enum RasterError {
    #[error("{path}: file not found")]
    FileNotFound { path: PathBuf },
    #[error("{path}: unsupported image format")]
    UnsupportedFormat { path: PathBuf },
    #[error("{path}: corrupt image stream: {reason}")]
    CorruptStream { path: PathBuf, reason: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("jpeg quality {0} outside [1, 100]")]
    InvalidQuality(u32),
    #[error("image dimensions differ: {left:?} vs {right:?}")]
    DimensionMismatch { left: (u32, u32), right: (u32, u32) },
    #[error("invalid raster: {0}")]
    InvalidRaster(String),
    #[error("encode failed: {0}")]
    Encode(String),
}

/// Output encoding for [`save_image`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SaveFormat {
    Png,
    Jpeg { quality: u8 },
}

/// Row-major interleaved RGB8 image. Immutable once built.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Image {
    width: u32,
    height: u32,
    data: Vec<u8>,
}

impl fmt::Debug for Image {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Image")
            .field("width", &self.width)
            .field("height", &self.height)
            .finish_non_exhaustive()
    }
}

impl Image {
    /// Wraps an interleaved RGB buffer. Fails when the buffer length is not
    /// `width * height * 3` or either dimension is zero.
    pub fn from_rgb(width: u32, height: u32, data: Vec<u8>) -> Result<Self, RasterError> {
        if width == 0 || height == 0 {
            return Err(RasterError::InvalidRaster(format!(
                "zero-sized image {width}x{height}"
            )));
        }
        let expected = width as usize * height as usize * 3;
        if data.len() != expected {
            return Err(RasterError::InvalidRaster(format!(
                "buffer holds {} samples, expected {expected}",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    /// Uniform image filled with one colour.
    pub fn filled(width: u32, height: u32, rgb: [u8; 3]) -> Self {
        Self::from_fn(width, height, |_, _| rgb)
    }

    /// Builds an image by evaluating `f(x, y)` at every pixel.
    ///
    /// Panics when either dimension is zero.
    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> [u8; 3]) -> Self {
        assert!(width > 0 && height > 0, "image dimensions must be positive");
        let mut data = Vec::with_capacity(width as usize * height as usize * 3);
        for y in 0..height {
            for x in 0..width {
                data.extend_from_slice(&f(x, y));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dimensions(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }

    /// Interleaved samples, `pixel_count() * 3` long.
    pub fn as_raw(&self) -> &[u8] {
        &self.data
    }

    pub fn into_raw(self) -> Vec<u8> {
        self.data
    }

    pub fn pixel(&self, x: u32, y: u32) -> [u8; 3] {
        let i = (y as usize * self.width as usize + x as usize) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    /// Sample at `(x, y)` with coordinates clamped into the image
    /// (replicate padding).
    #[inline]
    pub fn sample_clamped(&self, x: i64, y: i64, channel: usize) -> u8 {
        let cx = x.clamp(0, self.width as i64 - 1) as usize;
        let cy = y.clamp(0, self.height as i64 - 1) as usize;
        self.data[(cy * self.width as usize + cx) * 3 + channel]
    }

    /// Applies `f` to every sample independently. `f` receives the sample
    /// value, its flat pixel index, and the channel.
    pub fn map_samples(&self, mut f: impl FnMut(u8, usize, usize) -> u8) -> Image {
        let data = self
            .data
            .iter()
            .enumerate()
            .map(|(i, &v)| f(v, i / 3, i % 3))
            .collect();
        Image {
            width: self.width,
            height: self.height,
            data,
        }
    }

    /// Per-channel mean and variance.
    pub fn stats(&self) -> PixelStats {
        let n = self.pixel_count() as f64;
        let mut sum = [0f64; 3];
        let mut sum_sq = [0f64; 3];
        for px in self.data.chunks_exact(3) {
            for c in 0..3 {
                let v = px[c] as f64;
                sum[c] += v;
                sum_sq[c] += v * v;
            }
        }
        let mean = sum.map(|s| s / n);
        let mut variance = [0f64; 3];
        for c in 0..3 {
            variance[c] = (sum_sq[c] / n - mean[c] * mean[c]).max(0.0);
        }
        PixelStats {
            mean,
            variance,
            mse_vs_reference: None,
        }
    }

    pub(crate) fn to_rgb_image(&self) -> RgbImage {
        RgbImage::from_raw(self.width, self.height, self.data.clone())
            .expect("buffer length checked at construction")
    }

    pub(crate) fn from_dynamic(img: DynamicImage) -> Result<Self, RasterError> {
        let rgb = flatten_to_rgb8(img);
        let (w, h) = rgb.dimensions();
        Image::from_rgb(w, h, rgb.into_raw())
    }

    /// Encodes as PNG into memory.
    pub fn to_png_bytes(&self) -> Result<Vec<u8>, RasterError> {
        let mut out = Cursor::new(Vec::new());
        self.to_rgb_image()
            .write_to(&mut out, ImageFormat::Png)
            .map_err(|e| RasterError::Encode(e.to_string()))?;
        Ok(out.into_inner())
    }

    /// Decodes PNG or JPEG bytes. `origin` only labels errors.
    pub fn decode(bytes: &[u8], origin: &Path) -> Result<Self, RasterError> {
        let reader = ImageReader::new(Cursor::new(bytes))
            .with_guessed_format()
            .map_err(|e| RasterError::Io {
                path: origin.to_path_buf(),
                source: e,
            })?;
        match reader.format() {
            Some(ImageFormat::Png) | Some(ImageFormat::Jpeg) => {}
            _ => {
                return Err(RasterError::UnsupportedFormat {
                    path: origin.to_path_buf(),
                })
            }
        }
        let decoded = reader.decode().map_err(|e| match e {
            image::ImageError::Unsupported(_) => RasterError::UnsupportedFormat {
                path: origin.to_path_buf(),
            },
            other => RasterError::CorruptStream {
                path: origin.to_path_buf(),
                reason: other.to_string(),
            },
        })?;
        Image::from_dynamic(decoded)
    }
}

/// Per-channel first and second moments, optionally with an mse against a
/// reference image.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PixelStats {
    pub mean: [f64; 3],
    pub variance: [f64; 3],
    pub mse_vs_reference: Option<f64>,
}

/// Round half away from zero, then clamp into `[0, 255]`. NaN maps to 0.
#[inline]
pub fn quantize(v: f64) -> u8 {
    if v.is_nan() {
        return 0;
    }
    v.round().clamp(0.0, 255.0) as u8
}

// Grayscale expands to RGB; alpha is composited over black; 16-bit samples
// are scaled to 8 bits.
fn flatten_to_rgb8(img: DynamicImage) -> RgbImage {
    if !img.color().has_alpha() {
        return img.to_rgb8();
    }
    let rgba = img.to_rgba16();
    let (w, h) = rgba.dimensions();
    let mut out = RgbImage::new(w, h);
    for (dst, src) in out.pixels_mut().zip(rgba.pixels()) {
        let alpha = src[3] as f64 / 65535.0;
        for c in 0..3 {
            dst[c] = quantize(src[c] as f64 / 257.0 * alpha);
        }
    }
    out
}

/// Reads a PNG or JPEG file into an RGB8 image.
pub fn load_image(path: impl AsRef<Path>) -> Result<Image, RasterError> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            RasterError::FileNotFound {
                path: path.to_path_buf(),
            }
        } else {
            RasterError::Io {
                path: path.to_path_buf(),
                source: e,
            }
        }
    })?;
    Image::decode(&bytes, path)
}

/// Writes `img` to `path`. PNG output is lossless.
pub fn save_image(img: &Image, path: impl AsRef<Path>, format: SaveFormat) -> Result<(), RasterError> {
    let path = path.as_ref();
    let bytes = match format {
        SaveFormat::Png => img.to_png_bytes()?,
        SaveFormat::Jpeg { quality } => crate::ops::jpeg::encode_jpeg(img, quality as u32)?,
    };
    std::fs::write(path, bytes).map_err(|e| RasterError::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

/// Mean squared difference over every channel sample.
pub fn mse(a: &Image, b: &Image) -> Result<f64, RasterError> {
    if a.dimensions() != b.dimensions() {
        return Err(RasterError::DimensionMismatch {
            left: a.dimensions(),
            right: b.dimensions(),
        });
    }
    let total: u64 = a
        .data
        .iter()
        .zip(&b.data)
        .map(|(&x, &y)| {
            let d = x as i64 - y as i64;
            (d * d) as u64
        })
        .sum();
    Ok(total as f64 / a.data.len() as f64)
}
