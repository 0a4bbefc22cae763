mod common;

use std::path::Path;

use common::{degrade_cmd, tree_snapshot, write_synthetic_inputs};
use degrade::builtin_plan;
use degrade::severity::Manifest;

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn assert_ok(o: &std::process::Output) {
    assert!(
        o.status.success(),
        "exit {:?}\nstdout: {}\nstderr: {}",
        o.status.code(),
        String::from_utf8_lossy(&o.stdout),
        String::from_utf8_lossy(&o.stderr)
    );
}

#[test]
fn unknown_subcommand_prints_usage_and_exits_2() {
    let o = degrade_cmd(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("Usage"), "{err}");
}

#[test]
fn generate_is_reproducible_and_job_count_invariant() {
    let tmp = tempfile::tempdir().unwrap();
    let inputs = tmp.path().join("in");
    let labels = write_synthetic_inputs(&inputs, 2, 2, 48, 5);
    let before = tree_snapshot(&inputs);
    let mut trees = Vec::new();
    for (out, jobs) in [("a", "1"), ("b", "4")] {
        let out = tmp.path().join(out);
        let o = degrade_cmd(&[
            "generate", "--plan", "builtin", "--in", s(&inputs), "--out", s(&out), "--seed", "7", "--jobs", jobs,
            "--labels", s(&labels),
        ]);
        assert_ok(&o);
        trees.push(tree_snapshot(&out));
    }
    assert_eq!(trees[0], trees[1]);
    assert_eq!(trees[0].len(), 4 * (builtin_plan().active_rung_count() + 1) + 2);
    // Inputs untouched, nothing written beside the output directories.
    assert_eq!(tree_snapshot(&inputs), before);
    let mut top: Vec<String> = std::fs::read_dir(tmp.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    top.sort();
    assert_eq!(top, ["a", "b", "in", "in.labels.csv"]);
}

#[test]
fn partial_failures_exit_1_and_keep_good_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let inputs = tmp.path().join("in");
    write_synthetic_inputs(&inputs, 1, 0, 32, 1);
    // 8x8 is too small for the x16 downscale rung only.
    degrade::save_image(&degrade::Image::filled(8, 8, [50; 3]), inputs.join("tiny.png"), degrade::SaveFormat::Png)
        .unwrap();
    let out = tmp.path().join("out");
    let o = degrade_cmd(&["generate", "--in", s(&inputs), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("tiny") && err.contains("Resize@2:16"), "{err}");
    let manifest = Manifest::load(out.join("manifest.csv")).unwrap();
    let per_item = builtin_plan().active_rung_count() + 1;
    assert_eq!(manifest.len(), 2 * per_item - 1);
}

#[test]
fn external_codec_cells_activate_with_codec_flag() {
    let tmp = tempfile::tempdir().unwrap();
    let inputs = tmp.path().join("in");
    write_synthetic_inputs(&inputs, 1, 1, 32, 2);
    let out = tmp.path().join("out");
    let codec = format!("'{}' codec-jpeg", common::bin());
    let o = degrade_cmd(&["generate", "--in", s(&inputs), "--out", s(&out), "--codec", &codec]);
    assert_ok(&o);
    let manifest = Manifest::load(out.join("manifest.csv")).unwrap();
    let codec_rows = manifest.rows.iter().filter(|r| r.cell == "DL-Comp").count();
    assert_eq!(codec_rows, 2 * 3);
    assert_eq!(manifest.len(), 2 * (builtin_plan().active_rung_count() + 4));
}

#[test]
fn score_then_report_gives_full_grid() {
    let tmp = tempfile::tempdir().unwrap();
    let inputs = tmp.path().join("in");
    let labels = write_synthetic_inputs(&inputs, 3, 3, 48, 9);
    let corpus = tmp.path().join("corpus");
    assert_ok(&degrade_cmd(&["generate", "--in", s(&inputs), "--out", s(&corpus), "--labels", s(&labels)]));
    let scored = tmp.path().join("scored");
    assert_ok(&degrade_cmd(&["score", "--in", s(&corpus), "--detector", "mock", "--out", s(&scored)]));
    let report_dir = tmp.path().join("report");
    let o = degrade_cmd(&[
        "report", "--in", s(&scored.join("records.csv")), "--format", "markdown", "--out", s(&report_dir),
        "--plan", s(&corpus.join("plan.toml")), "--detector", "mock",
    ]);
    assert_ok(&o);
    let table = String::from_utf8_lossy(&o.stdout).into_owned();
    assert_eq!(std::fs::read_to_string(report_dir.join("table.md")).unwrap(), table);

    let plan = builtin_plan();
    let header = table.lines().find(|l| l.starts_with("| Metric")).unwrap();
    let columns: Vec<&str> = header.trim_matches('|').split('|').map(str::trim).skip(1).collect();
    assert_eq!(columns.len(), plan.active_rung_count() + 1);
    assert_eq!(columns[0], "Unaltered");
    for metric in ["AUC", "ACC", "F1"] {
        let row = table.lines().find(|l| l.starts_with(&format!("| {metric} |"))).unwrap();
        let values: Vec<&str> = row.trim_matches('|').split('|').map(str::trim).skip(1).collect();
        assert_eq!(values.len(), columns.len());
        for v in values {
            let x: f64 = v.parse().unwrap_or_else(|_| panic!("{metric}: `{v}`"));
            assert!((0.0..=100.0).contains(&x));
        }
    }

    // Curves: one row per rung and metric for each family.
    let curves = std::fs::read_to_string(report_dir.join("curves.csv")).unwrap();
    for cell in plan.active_cells() {
        let n = curves.lines().filter(|l| l.starts_with(&format!("{},", cell.name))).count();
        assert_eq!(n, 3 * cell.ladder.rungs.len(), "{}", cell.name);
    }
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(report_dir.join("metrics.json")).unwrap()).unwrap();
    assert_eq!(json["cells"].as_array().unwrap().len(), columns.len());
    assert_eq!(json["plan_digest"].as_str().unwrap().len(), 64);

    // The delimited table round-trips through the parser.
    let o = degrade_cmd(&["report", "--in", s(&scored), "--format", "delimited"]);
    assert_ok(&o);
    let delimited = String::from_utf8_lossy(&o.stdout).into_owned();
    let cells = degrade::report::parse_delimited(&delimited).unwrap();
    assert_eq!(cells.len(), columns.len());
}

#[test]
fn mock_noise_curve_is_monotone() {
    let tmp = tempfile::tempdir().unwrap();
    // Mean mock score on the smooth (real) items rises with sigma; the
    // emitted AUC curve never rises.
    let inputs = tmp.path().join("in");
    let labels = write_synthetic_inputs(&inputs, 4, 4, 48, 13);
    let corpus = tmp.path().join("corpus");
    assert_ok(&degrade_cmd(&["generate", "--in", s(&inputs), "--out", s(&corpus), "--labels", s(&labels)]));
    let scored = tmp.path().join("scored");
    assert_ok(&degrade_cmd(&["score", "--in", s(&corpus), "--detector", "mock", "--out", s(&scored)]));
    let records =
        degrade::metrics::read_records(std::fs::File::open(scored.join("records.csv")).unwrap()).unwrap();
    let mean_real = |cell: &str| {
        let v: Vec<f64> = records
            .iter()
            .filter(|r| r.label == degrade::Label::Real && r.cell.to_string() == cell)
            .map(|r| r.score)
            .collect();
        v.iter().sum::<f64>() / v.len() as f64
    };
    let curve = [mean_real("Unaltered"), mean_real("GauNoise@0:5"), mean_real("GauNoise@1:30"), mean_real("GauNoise@2:50")];
    assert!(curve.windows(2).all(|w| w[0] < w[1]), "{curve:?}");

    let report_dir = tmp.path().join("report");
    assert_ok(&degrade_cmd(&["report", "--in", s(&scored), "--out", s(&report_dir)]));
    let curves = std::fs::read_to_string(report_dir.join("curves.csv")).unwrap();
    let auc: Vec<f64> = curves
        .lines()
        .filter(|l| l.starts_with("GauNoise,") && l.contains(",auc,"))
        .map(|l| l.rsplit(',').next().unwrap().parse().unwrap())
        .collect();
    assert_eq!(auc.len(), 3);
    assert!(auc.windows(2).all(|w| w[0] >= w[1]), "{auc:?}");
}

#[test]
fn augment_writes_copies_and_draw_log() {
    let tmp = tempfile::tempdir().unwrap();
    let inputs = tmp.path().join("in");
    write_synthetic_inputs(&inputs, 3, 3, 40, 4);
    let config = tmp.path().join("chain.toml");
    std::fs::write(&config, "p_jpeg = 1.0\njpeg_quality_range = [50, 60]\n").unwrap();
    let mut trees = Vec::new();
    for (out, jobs) in [("a", "1"), ("b", "3")] {
        let out = tmp.path().join(out);
        let o = degrade_cmd(&[
            "augment", "--in", s(&inputs), "--out", s(&out), "--config", s(&config), "--seed", "3", "--jobs", jobs,
        ]);
        assert_ok(&o);
        trees.push(tree_snapshot(&out));
    }
    assert_eq!(trees[0], trees[1]);
    assert_eq!(trees[0].len(), 7);
    let log = String::from_utf8_lossy(&trees[0]["draws.jsonl"]).into_owned();
    assert_eq!(log.lines().count(), 6);
    for line in log.lines() {
        let entry: degrade::augment::DrawLogEntry = serde_json::from_str(line).unwrap();
        let jpeg = entry.steps.iter().find_map(|s| match s {
            degrade::DegradationOp::Jpeg { quality } => Some(*quality),
            _ => None,
        });
        assert!(matches!(jpeg, Some(50..=60)), "{line}");
    }
}

#[test]
fn config_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let bad_plan = tmp.path().join("plan.toml");
    std::fs::write(&bad_plan, "master_seed = 1\n[[cells]]\nname = \"Blur\"\nop = \"gaussian_blur\"\nseverities = [3, 4]\n")
        .unwrap();
    let o = degrade_cmd(&["plan-show", "--plan", s(&bad_plan)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("kernel"), "{}", String::from_utf8_lossy(&o.stderr));

    let bad_chain = tmp.path().join("chain.toml");
    std::fs::write(&bad_chain, "p_noise = 1.5\n").unwrap();
    let o = degrade_cmd(&["augment", "--in", s(tmp.path()), "--out", s(&tmp.path().join("o")), "--config", s(&bad_chain)]);
    assert_eq!(o.status.code(), Some(2));

    let o = degrade_cmd(&["report", "--in", s(tmp.path()), "--format", "pdf"]);
    assert_eq!(o.status.code(), Some(2));

    // Manifest without labels and no labels file.
    let inputs = tmp.path().join("in");
    write_synthetic_inputs(&inputs, 1, 1, 24, 1);
    let corpus = tmp.path().join("corpus");
    assert_ok(&degrade_cmd(&["generate", "--in", s(&inputs), "--out", s(&corpus)]));
    let o = degrade_cmd(&["score", "--in", s(&corpus), "--detector", "mock", "--out", s(&tmp.path().join("s"))]);
    assert_eq!(o.status.code(), Some(2));
    let o = degrade_cmd(&["score", "--in", s(&corpus), "--detector", "gpu", "--out", s(&tmp.path().join("s"))]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn plan_show_round_trips() {
    let o = degrade_cmd(&["plan-show", "--seed", "42"]);
    assert_ok(&o);
    let text = String::from_utf8_lossy(&o.stdout).into_owned();
    let plan = degrade::parse_plan(&text).unwrap();
    assert_eq!(plan, builtin_plan().with_master_seed(42));
}
