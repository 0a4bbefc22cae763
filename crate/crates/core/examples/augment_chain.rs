//! Samples the training-time augmentation chain and applies a few draws to
//! the bundled photo.
//!
//! cargo run --example augment_chain -- [OUT_DIR]

use degrade::augment::{apply_chain, sample_chain, AugmentationChainConfig, Stage};
use degrade::fixtures::natural_photo;
use degrade::{save_image, SaveFormat};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args()
        .nth(1)
        .map(Into::into)
        .unwrap_or_else(|| std::env::temp_dir().join("degrade_augment"));
    std::fs::create_dir_all(&out)?;
    let cfg = AugmentationChainConfig::default().with_seed(2024);
    print!("config:\n{}", cfg.to_toml());

    let photo = natural_photo();
    for key in 0..6u64 {
        let draw = sample_chain(&cfg, key);
        let steps: Vec<String> = draw.steps.iter().map(ToString::to_string).collect();
        println!("draw {key}: [{}]", steps.join(", "));
        let img = apply_chain(&photo, &cfg, key)?;
        save_image(&img, out.join(format!("draw_{key}.png")), SaveFormat::Png)?;
    }

    let n = 10_000u64;
    let mut fired = [0u64; 4];
    for key in 0..n {
        let stages = sample_chain(&cfg, key).stages();
        for (i, stage) in Stage::ALL.iter().enumerate() {
            fired[i] += stages.contains(stage) as u64;
        }
    }
    for (stage, count) in Stage::ALL.iter().zip(fired) {
        println!("{stage:?} fired in {:.3} of {n} draws", count as f64 / n as f64);
    }
    println!("images in {}", out.display());
    Ok(())
}
