//! Computes ACC, AUC, and F1 on hand-written score records and aggregates
//! them per cell.
//!
//! cargo run --example auc_metrics

use degrade::metrics::{accuracy, aggregate, auc, f1, write_records};
use degrade::{CellId, Label, PredictionRecord};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let clean = CellId::Unaltered;
    let blur = CellId::rung("GauBlur", 2, "11");
    let rows = [
        ("a", &clean, Label::Fake, 0.9),
        ("b", &clean, Label::Fake, 0.4),
        ("c", &clean, Label::Real, 0.6),
        ("d", &clean, Label::Real, 0.2),
        ("a", &blur, Label::Fake, 0.3),
        ("b", &blur, Label::Fake, 0.3),
        ("c", &blur, Label::Real, 0.3),
        ("d", &blur, Label::Real, 0.1),
    ];
    let records = rows
        .iter()
        .map(|(id, cell, label, score)| PredictionRecord::new(*id, (*cell).clone(), *label, *score))
        .collect::<Result<Vec<_>, _>>()?;

    let unaltered: Vec<_> = records.iter().filter(|r| r.cell == clean).cloned().collect();
    println!("unaltered: auc {} acc {} f1 {}", auc(&unaltered)?, accuracy(&unaltered, 0.5)?, f1(&unaltered, 0.5)?.value);

    for cell in aggregate(&records, 0.5) {
        println!(
            "{:<14} n_real {} n_fake {} acc {:?} auc {:?} f1 {:?}{}",
            cell.cell.to_string(),
            cell.n_real,
            cell.n_fake,
            cell.acc,
            cell.auc,
            cell.f1,
            if cell.f1_degenerate { " (degenerate)" } else { "" }
        );
    }

    println!("\nrecords file:");
    write_records(std::io::stdout(), &records)?;
    Ok(())
}
