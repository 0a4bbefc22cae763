#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use degrade::fixtures::synthetic_corpus;
use degrade::metrics::PredictionRecord;
use degrade::severity::{Manifest, ManifestRow};
use degrade::{save_image, Image, Label, SaveFormat};

pub fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_degrade")
}

pub fn degrade_cmd(args: &[&str]) -> Output {
    Command::new(bin()).args(args).output().expect("binary runs")
}

/// Writes a labelled synthetic corpus as PNGs into `dir` and a labels CSV
/// next to it. Returns the labels file path.
pub fn write_synthetic_inputs(dir: &Path, n_real: usize, n_fake: usize, size: u32, seed: u64) -> PathBuf {
    std::fs::create_dir_all(dir).unwrap();
    let mut labels = String::from("item_id,label\n");
    for item in synthetic_corpus(n_real, n_fake, size, seed) {
        save_image(&item.image, dir.join(format!("{}.png", item.id)), SaveFormat::Png).unwrap();
        labels.push_str(&format!("{},{}\n", item.id, item.label));
    }
    let path = dir.with_extension("labels.csv");
    std::fs::write(&path, labels).unwrap();
    path
}

/// Every file under `root`, keyed by `/`-separated relative path.
pub fn tree_snapshot(root: &Path) -> BTreeMap<String, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<String, Vec<u8>>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(root, &path, out);
            } else {
                let rel = path.strip_prefix(root).unwrap().to_string_lossy().replace('\\', "/");
                out.insert(rel, std::fs::read(&path).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out);
    out
}

/// A manifest of `n` unaltered rows over small synthetic PNGs written into
/// `dir`. Labels alternate real/fake.
pub fn small_manifest(dir: &Path, n: usize) -> Manifest {
    std::fs::create_dir_all(dir.join("unaltered")).unwrap();
    let mut rows = Vec::new();
    for i in 0..n {
        let id = format!("item_{i:02}");
        let img = Image::from_fn(8, 8, |x, y| [(x * 30 + i as u32) as u8, (y * 30) as u8, 77]);
        let rel = format!("unaltered/{id}.png");
        save_image(&img, dir.join(&rel), SaveFormat::Png).unwrap();
        rows.push(ManifestRow {
            item_id: id,
            source_path: format!("src/{i}.png"),
            output_path: rel,
            cell: "Unaltered".into(),
            op_kind: "none".into(),
            params: String::new(),
            severity_index: 0,
            seed: None,
            label: Some(if i % 2 == 0 { Label::Real } else { Label::Fake }),
        });
    }
    Manifest { rows }
}

/// Pairwise AUC: fraction of (fake, real) pairs where the fake scores
/// higher, ties counting half. Exact in integer half-units.
pub fn brute_force_auc(records: &[PredictionRecord]) -> Option<f64> {
    let fakes: Vec<f64> = records.iter().filter(|r| r.label == Label::Fake).map(|r| r.score).collect();
    let reals: Vec<f64> = records.iter().filter(|r| r.label == Label::Real).map(|r| r.score).collect();
    if fakes.is_empty() || reals.is_empty() {
        return None;
    }
    let mut half_units: u64 = 0;
    for &f in &fakes {
        for &r in &reals {
            half_units += if f > r {
                2
            } else if f == r {
                1
            } else {
                0
            };
        }
    }
    Some(half_units as f64 / (2 * fakes.len() * reals.len()) as f64)
}
