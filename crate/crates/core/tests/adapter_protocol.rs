#![cfg(unix)]

mod common;

use std::time::{Duration, Instant};

use common::small_manifest;
use degrade::adapter::{score_corpus, AdapterError, DetectorHandle};
use degrade::severity::Manifest;

fn run(cmd: &str, manifest: &Manifest, dir: &std::path::Path) -> Result<Vec<degrade::PredictionRecord>, AdapterError> {
    let handle = DetectorHandle::subprocess(cmd).with_timeout(Duration::from_secs(5));
    score_corpus(&handle, manifest, dir)
}

#[test]
fn constant_detector_scores_every_row() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = small_manifest(tmp.path(), 6);
    let records = run("while read p; do echo 0.5; done", &manifest, tmp.path()).unwrap();
    assert_eq!(records.len(), 6);
    assert!(records.iter().all(|r| r.score == 0.5));
    let ids: Vec<_> = records.iter().map(|r| r.item_id.as_str()).collect();
    let expected: Vec<_> = manifest.rows.iter().map(|r| r.item_id.as_str()).collect();
    assert_eq!(ids, expected);
}

#[test]
fn requests_are_absolute_existing_paths_in_manifest_order() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = small_manifest(tmp.path(), 4);
    let log = tmp.path().join("requests.txt");
    let cmd = format!("while read p; do echo \"$p\" >> '{}'; echo 0.1; done", log.display());
    run(&cmd, &manifest, tmp.path()).unwrap();
    let lines: Vec<String> = std::fs::read_to_string(&log).unwrap().lines().map(String::from).collect();
    assert_eq!(lines.len(), 4);
    for (line, row) in lines.iter().zip(&manifest.rows) {
        let p = std::path::Path::new(line);
        assert!(p.is_absolute(), "{line}");
        assert!(p.is_file(), "{line}");
        assert!(line.ends_with(&row.output_path), "{line}");
    }
}

#[test]
fn scores_follow_request_order() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = small_manifest(tmp.path(), 5);
    // Score encodes the request index: 0.0, 0.1, 0.2, ...
    let records = run("i=0; while read p; do echo \"0.$i\"; i=$((i+1)); done", &manifest, tmp.path()).unwrap();
    let scores: Vec<f64> = records.iter().map(|r| r.score).collect();
    assert_eq!(scores, [0.0, 0.1, 0.2, 0.3, 0.4]);
}

#[test]
fn out_of_range_and_non_numeric_scores_are_violations() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = small_manifest(tmp.path(), 3);
    for reply in ["-0.01", "1.0001", "NaN", "inf", "abc", ""] {
        let cmd = format!("while read p; do echo '{reply}'; done");
        let r = run(&cmd, &manifest, tmp.path());
        assert!(matches!(r, Err(AdapterError::ProtocolViolation(_))), "{reply:?}: {r:?}");
    }
    // Boundary values are accepted.
    let r = run("while read p; do echo 1; done", &manifest, tmp.path()).unwrap();
    assert!(r.iter().all(|p| p.score == 1.0));
}

#[test]
fn premature_exit_is_a_violation() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = small_manifest(tmp.path(), 4);
    for cmd in ["exit 0", "read p; echo 0.5; exit 0", "read p; echo 0.5; read q; exit 3"] {
        let r = run(cmd, &manifest, tmp.path());
        assert!(matches!(r, Err(AdapterError::ProtocolViolation(_))), "{cmd}: {r:?}");
    }
}

#[test]
fn extra_output_is_a_violation() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = small_manifest(tmp.path(), 2);
    let r = run("while read p; do echo 0.5; done; echo 0.7", &manifest, tmp.path());
    assert!(matches!(r, Err(AdapterError::ProtocolViolation(_))), "{r:?}");
}

#[test]
fn silent_detector_times_out() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = small_manifest(tmp.path(), 2);
    let handle = DetectorHandle::subprocess("read p; sleep 30").with_timeout(Duration::from_millis(300));
    let start = Instant::now();
    let r = score_corpus(&handle, &manifest, tmp.path());
    assert!(matches!(&r, Err(AdapterError::DetectorTimeout { item, .. }) if item == "item_00"), "{r:?}");
    assert!(start.elapsed() < Duration::from_secs(10));
}

#[test]
fn missing_command_fails_cleanly() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = small_manifest(tmp.path(), 2);
    let r = run("/nonexistent/detector-binary", &manifest, tmp.path());
    assert!(r.is_err());
}

#[test]
fn score_file_joins_by_item_and_cell() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = small_manifest(tmp.path(), 4);
    let path = tmp.path().join("scores.csv");
    let mut text = String::from("item_id,cell_id,score\n");
    // Reverse order and an unrelated extra row must not matter.
    for (i, row) in manifest.rows.iter().enumerate().rev() {
        text.push_str(&format!("{},{},0.{}\n", row.item_id, row.cell_id(), i + 1));
    }
    text.push_str("other,Unaltered,0.9\n");
    std::fs::write(&path, text).unwrap();
    let records = score_corpus(&DetectorHandle::score_file(&path), &manifest, tmp.path()).unwrap();
    let scores: Vec<f64> = records.iter().map(|r| r.score).collect();
    assert_eq!(scores, [0.1, 0.2, 0.3, 0.4]);
}

#[test]
fn score_file_missing_row_names_the_item() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = small_manifest(tmp.path(), 3);
    let path = tmp.path().join("scores.csv");
    let row = &manifest.rows[0];
    std::fs::write(&path, format!("item_id,cell_id,score\n{},{},0.5\n", row.item_id, row.cell_id())).unwrap();
    let r = score_corpus(&DetectorHandle::score_file(&path), &manifest, tmp.path());
    match r {
        Err(AdapterError::MissingScore { item, cell }) => {
            assert_eq!(item, "item_01");
            assert_eq!(cell, "Unaltered");
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn score_file_out_of_range_is_a_violation() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = small_manifest(tmp.path(), 1);
    let path = tmp.path().join("scores.csv");
    std::fs::write(&path, "item_id,cell_id,score\nitem_00,Unaltered,2\n").unwrap();
    let r = score_corpus(&DetectorHandle::score_file(&path), &manifest, tmp.path());
    assert!(matches!(r, Err(AdapterError::ProtocolViolation(_))), "{r:?}");
}

#[test]
fn unlabeled_rows_are_rejected_before_scoring() {
    let tmp = tempfile::tempdir().unwrap();
    let mut manifest = small_manifest(tmp.path(), 3);
    manifest.rows[2].label = None;
    let r = score_corpus(&DetectorHandle::mock(), &manifest, tmp.path());
    assert!(matches!(&r, Err(AdapterError::MissingLabel { item }) if item == "item_02"), "{r:?}");
}

#[test]
fn mock_detector_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = small_manifest(tmp.path(), 6);
    let a = score_corpus(&DetectorHandle::mock(), &manifest, tmp.path()).unwrap();
    let b = score_corpus(&DetectorHandle::mock(), &manifest, tmp.path()).unwrap();
    assert_eq!(a, b);
    assert!(a.iter().all(|r| (0.0..1.0).contains(&r.score)));
}
