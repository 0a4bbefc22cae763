//! Bundled and procedurally generated test images.
//!
//! [`natural_photo`] is a 256x256 downsample of the public-domain NASA
//! portrait of astronaut Eileen Collins (as distributed with scikit-image).
//! The synthetic generators build labelled corpora whose two classes differ
//! only in high-frequency content: smooth gradients versus textured
//! surfaces.

use crate::metrics::Label;
use crate::raster::{quantize, Image};
use crate::rng;

static NATURAL_PHOTO_PNG: &[u8] = include_bytes!("../assets/astronaut_256.png");

/// The bundled natural test photo.
pub fn natural_photo() -> Image {
    Image::decode(NATURAL_PHOTO_PNG, std::path::Path::new("astronaut_256.png"))
        .expect("bundled photo decodes")
}

/// PNG bytes of the bundled photo.
pub fn natural_photo_png() -> &'static [u8] {
    NATURAL_PHOTO_PNG
}

fn smooth_base(seed: u64, x: f64, y: f64, size: f64) -> [f64; 3] {
    let u = |i: u64| rng::uniform(seed, i);
    let mut out = [0.0; 3];
    for (c, v) in out.iter_mut().enumerate() {
        let k = c as u64 * 8;
        let start = 40.0 + 150.0 * u(k);
        let gx = (u(k + 1) - 0.5) * 90.0 / size;
        let gy = (u(k + 2) - 0.5) * 90.0 / size;
        let cx = size * u(k + 3);
        let cy = size * u(k + 4);
        let curv = (u(k + 5) - 0.5) * 60.0 / (size * size);
        *v = start + gx * x + gy * y + curv * ((x - cx).powi(2) + (y - cy).powi(2));
    }
    out
}

/// Smooth colour gradient with mild curvature. Nearly zero Laplacian energy.
pub fn smooth_gradient(seed: u64, size: u32) -> Image {
    let s = size as f64;
    Image::from_fn(size, size, |x, y| smooth_base(seed, x as f64, y as f64, s).map(quantize))
}

/// Smooth base plus fine-grained texture: high-passed pixel noise and a
/// grating with a 2 to 3 pixel period, amplitude drawn per image. The
/// texture has almost no energy at coarse scales, so heavy smoothing
/// leaves an image statistically close to [`smooth_gradient`].
pub fn textured(seed: u64, size: u32) -> Image {
    let s = size as f64;
    let amp = 10.0 + 20.0 * rng::uniform(seed, 1000);
    let period = 2.0 + rng::uniform(seed, 1001);
    let angle = std::f64::consts::PI * rng::uniform(seed, 1002);
    let (dx, dy) = (angle.cos(), angle.sin());
    let tex_key = rng::mix(seed, 0x7e47);
    let n = size as i64;
    let noise = |x: i64, y: i64| {
        let (x, y) = (x.rem_euclid(n), y.rem_euclid(n));
        rng::standard_normal(tex_key, (y * n + x) as u64)
    };
    Image::from_fn(size, size, |x, y| {
        let base = smooth_base(seed, x as f64, y as f64, s);
        let phase = std::f64::consts::TAU * (dx * x as f64 + dy * y as f64) / period;
        let grating = 0.6 * amp * phase.sin();
        let (xi, yi) = (x as i64, y as i64);
        let high_pass = noise(xi, yi)
            - 0.25 * (noise(xi - 1, yi) + noise(xi + 1, yi) + noise(xi, yi - 1) + noise(xi, yi + 1));
        let grain = 0.6 * amp * high_pass;
        base.map(|b| quantize(b + grating + grain))
    })
}

/// A labelled item in a synthetic corpus.
#[derive(Debug, Clone)]
pub struct SyntheticItem {
    pub id: String,
    pub label: Label,
    pub image: Image,
}

/// `n_real` smooth gradients labelled real followed by `n_fake` textured
/// images labelled fake. Ids are `real_000`, `fake_000`, ...
pub fn synthetic_corpus(n_real: usize, n_fake: usize, size: u32, seed: u64) -> Vec<SyntheticItem> {
    let real = (0..n_real).map(|i| SyntheticItem {
        id: format!("real_{i:03}"),
        label: Label::Real,
        image: smooth_gradient(rng::mix(seed, i as u64), size),
    });
    let fake = (0..n_fake).map(|i| SyntheticItem {
        id: format!("fake_{i:03}"),
        label: Label::Fake,
        image: textured(rng::mix(seed ^ 0xfa4e, i as u64), size),
    });
    real.chain(fake).collect()
}
