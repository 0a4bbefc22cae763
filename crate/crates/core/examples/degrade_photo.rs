//! Applies one rung of every operation family to the bundled photo and
//! writes the results as PNGs.
//!
//! cargo run --example degrade_photo -- [OUT_DIR]

use degrade::fixtures::natural_photo;
use degrade::ops::PoissonGaussian;
use degrade::{mse, save_image, DegradationOp, SaveFormat};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args()
        .nth(1)
        .map(Into::into)
        .unwrap_or_else(|| std::env::temp_dir().join("degrade_photo"));
    std::fs::create_dir_all(&out)?;
    let photo = natural_photo();
    let ops = [
        DegradationOp::Jpeg { quality: 30 },
        DegradationOp::GaussianBlur { kernel: 7 },
        DegradationOp::MedianFilter { kernel: 5 },
        DegradationOp::AverageFilter { kernel: 5 },
        DegradationOp::Awgn { sigma: 30.0, seed: 1 },
        DegradationOp::PoissonGaussian { a: PoissonGaussian::default().a, b: PoissonGaussian::default().b, seed: 1 },
        DegradationOp::LinearAdjust { alpha: 1.2, beta: -10.0 },
        DegradationOp::Contrast { factor: 0.6 },
        DegradationOp::Gamma { gamma: 2.5 },
        DegradationOp::Downscale { factor: 8 },
        DegradationOp::Compose {
            steps: vec![DegradationOp::Jpeg { quality: 60 }, DegradationOp::Awgn { sigma: 30.0, seed: 2 }],
        },
    ];
    save_image(&photo, out.join("original.png"), SaveFormat::Png)?;
    for (i, op) in ops.iter().enumerate() {
        let img = op.apply(&photo)?;
        let name = format!("{i:02}_{}.png", op.kind().name());
        save_image(&img, out.join(&name), SaveFormat::Png)?;
        println!("{:<40} mse {:>8.2}  -> {name}", op.to_string(), mse(&photo, &img)?);
    }
    println!("written to {}", out.display());
    Ok(())
}
