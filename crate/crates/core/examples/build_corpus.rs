//! Builds a graded corpus from a custom TOML plan and a small synthetic
//! input set, then prints the manifest summary.
//!
//! cargo run --example build_corpus -- [OUT_DIR]

use degrade::fixtures::synthetic_corpus;
use degrade::severity::{generate_corpus, GenerateOptions, InputItem};
use degrade::{parse_plan, save_image, SaveFormat};

const PLAN: &str = r#"
master_seed = 7

[[cells]]
name = "JPEG"
op = "jpeg"
severities = [90, 50, 20]

[[cells]]
name = "Median"
op = "median_filter"
severities = [3, 5]

[[cells]]
name = "PoisGauNoise"
op = "poisson_gaussian"
severities = [[0.005, 0.0001], [0.02, 0.0004]]

[[cells]]
name = "Blur+Noise"
op = "gaussian_blur+awgn"
severities = [[5, 10], [9, 25]]
"#;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args()
        .nth(1)
        .map(Into::into)
        .unwrap_or_else(|| std::env::temp_dir().join("degrade_corpus"));
    let inputs_dir = out.join("inputs");
    std::fs::create_dir_all(&inputs_dir)?;
    let mut inputs = Vec::new();
    for item in synthetic_corpus(3, 3, 64, 1) {
        let path = inputs_dir.join(format!("{}.png", item.id));
        save_image(&item.image, &path, SaveFormat::Png)?;
        inputs.push(InputItem { id: item.id, path, label: Some(item.label) });
    }

    let plan = parse_plan(PLAN)?.with_inputs(inputs);
    println!("plan digest {}", plan.digest());
    let corpus_dir = out.join("corpus");
    let outcome = generate_corpus(&plan, &corpus_dir, &GenerateOptions { jobs: Some(2) })?;
    println!("{} rows, {} failures", outcome.manifest.len(), outcome.failures.len());
    for row in outcome.manifest.rows.iter().filter(|r| r.item_id == "fake_000") {
        let seed = row.seed.map(|s| s.to_string()).unwrap_or_else(|| "-".into());
        println!("  {:<28} {:<30} seed {seed}", row.cell_id().to_string(), row.output_path);
    }
    println!("manifest at {}", corpus_dir.join("manifest.csv").display());
    Ok(())
}
