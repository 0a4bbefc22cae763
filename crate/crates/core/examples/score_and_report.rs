//! End to end: builtin plan over a synthetic corpus, mock detector scores,
//! then a markdown table and severity-curve data.
//!
//! cargo run --release --example score_and_report -- [OUT_DIR]

use degrade::adapter::{score_corpus, DetectorHandle};
use degrade::fixtures::synthetic_corpus;
use degrade::metrics::aggregate;
use degrade::report::{emit_curves, emit_table, MetricsReport, TableFormat};
use degrade::severity::{generate_corpus, GenerateOptions, InputItem};
use degrade::{builtin_plan, save_image, SaveFormat};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args()
        .nth(1)
        .map(Into::into)
        .unwrap_or_else(|| std::env::temp_dir().join("degrade_e2e"));
    let inputs_dir = out.join("inputs");
    std::fs::create_dir_all(&inputs_dir)?;
    let mut inputs = Vec::new();
    for item in synthetic_corpus(10, 10, 64, 5) {
        let path = inputs_dir.join(format!("{}.png", item.id));
        save_image(&item.image, &path, SaveFormat::Png)?;
        inputs.push(InputItem { id: item.id, path, label: Some(item.label) });
    }

    let plan = builtin_plan().with_inputs(inputs);
    let corpus = out.join("corpus");
    let outcome = generate_corpus(&plan, &corpus, &GenerateOptions::default())?;
    let detector = DetectorHandle::mock();
    let records = score_corpus(&detector, &outcome.manifest, &corpus)?;

    let report = MetricsReport::new(detector.id(), Some(plan.digest()), aggregate(&records, 0.5));
    println!("{}", emit_table(&report, TableFormat::Markdown));
    let curves = emit_curves(&report);
    std::fs::write(out.join("curves.csv"), &curves)?;
    for line in curves.lines().filter(|l| l.starts_with("GauBlur,") && l.contains(",auc,")) {
        println!("{line}");
    }
    println!("curves at {}", out.join("curves.csv").display());
    Ok(())
}
