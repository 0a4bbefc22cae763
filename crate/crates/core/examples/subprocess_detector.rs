//! Scores a corpus through the line protocol with a shell detector, and
//! runs an external codec cell. Unix only.
//!
//! cargo run --example subprocess_detector

use std::time::Duration;

use degrade::adapter::{score_corpus, DetectorHandle};
use degrade::fixtures::synthetic_corpus;
use degrade::severity::{generate_corpus, GenerateOptions, InputItem};
use degrade::{parse_plan, save_image, SaveFormat};

// Replies with a score derived from the file size: one line per request.
const DETECTOR: &str = r#"while read p; do
  n=$(wc -c < "$p")
  echo "0.$(( n % 1000 ))"
done"#;

// Identity codec. Any command that reads PNG on stdin and writes PNG on
// stdout works; the level arrives as `{level}` or $DEGRADE_CODEC_LEVEL.
const CODEC: &str = "cat";

const PLAN: &str = r#"
master_seed = 1

[[cells]]
name = "Codec"
op = "external_codec"
severities = ["high", "low"]

[[cells]]
name = "Gamma"
op = "gamma"
severities = [0.5, 2.0]
"#;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::temp_dir().join("degrade_subprocess");
    let inputs_dir = out.join("inputs");
    std::fs::create_dir_all(&inputs_dir)?;
    let mut inputs = Vec::new();
    for item in synthetic_corpus(2, 2, 32, 9) {
        let path = inputs_dir.join(format!("{}.png", item.id));
        save_image(&item.image, &path, SaveFormat::Png)?;
        inputs.push(InputItem { id: item.id, path, label: Some(item.label) });
    }
    let plan = parse_plan(PLAN)?.with_codec_command(CODEC).with_inputs(inputs);
    let corpus = out.join("corpus");
    let outcome = generate_corpus(&plan, &corpus, &GenerateOptions::default())?;

    let detector = DetectorHandle::subprocess(DETECTOR).with_timeout(Duration::from_secs(5));
    for r in score_corpus(&detector, &outcome.manifest, &corpus)? {
        println!("{:<10} {:<16} {:<5} {}", r.item_id, r.cell.to_string(), r.label, r.score);
    }
    Ok(())
}
