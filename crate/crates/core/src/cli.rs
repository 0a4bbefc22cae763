//! The `degrade` command-line front end.
//!
//! Exit codes: 0 on success, 1 when some items failed (or a run-time error
//! stopped the command), 2 on usage or configuration errors.

use std::collections::HashMap;
use std::ffi::OsString;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand};

use crate::adapter::{score_corpus, AdapterError, DetectorHandle};
use crate::augment::{augment_dir, AugmentationChainConfig};
use crate::metrics::{aggregate, read_records, write_records, Label};
use crate::ops::jpeg::jpeg_transcode;
use crate::ops::LEVEL_ENV;
use crate::raster::Image;
use crate::report::{emit_curves, emit_table, parse_delimited, MetricsReport, TableFormat};
use crate::severity::{
    builtin_plan, generate_corpus, inputs_from_dir, parse_plan, AssessmentPlan, GenerateOptions, Manifest,
    MANIFEST_FILE, PLAN_FILE,
};

/// Records file written by `score` and read by `report`.
pub const RECORDS_FILE: &str = "records.csv";

#[derive(Debug, Parser)]
#[command(name = "degrade", version, about = "Degradation robustness assessment for image detectors")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build a graded corpus and its manifest from input images.
    Generate(GenerateArgs),
    /// Apply the seeded augmentation chain to a directory of images.
    Augment(AugmentArgs),
    /// Score a generated corpus with a detector.
    Score(ScoreArgs),
    /// Aggregate scores into metric tables and curve data.
    Report(ReportArgs),
    /// Print a plan in canonical form.
    PlanShow(PlanShowArgs),
    /// JPEG round trip as an external codec: PNG on stdin, PNG on stdout.
    #[command(hide = true)]
    CodecJpeg(CodecJpegArgs),
}

#[derive(Debug, Args)]
struct GenerateArgs {
    /// `builtin` or a plan TOML file.
    #[arg(long, default_value = "builtin")]
    plan: String,
    /// Input image directory (replaces any inputs listed in the plan).
    #[arg(long = "in")]
    input: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Master seed override.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    jobs: Option<usize>,
    /// CSV with columns item_id,label.
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Shell command for external-codec cells.
    #[arg(long)]
    codec: Option<String>,
}

#[derive(Debug, Args)]
struct AugmentArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Chain config TOML; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Debug, Args)]
struct ScoreArgs {
    /// Manifest file, or a corpus directory containing one.
    #[arg(long = "in")]
    input: PathBuf,
    /// `mock`, `cmd:<command>`, or `scores:<path>`.
    #[arg(long)]
    detector: String,
    #[arg(long)]
    out: PathBuf,
    /// CSV with columns item_id,label; overrides manifest labels.
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Per-response timeout in seconds for subprocess detectors.
    #[arg(long, default_value_t = 30.0)]
    timeout: f64,
}

#[derive(Debug, Args)]
struct ReportArgs {
    /// Records file, or a directory containing records.csv.
    #[arg(long = "in")]
    input: PathBuf,
    /// grid, markdown, or delimited.
    #[arg(long, default_value = "grid")]
    format: String,
    /// Writes table, curves.csv, and metrics.json here; stdout only when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Plan whose digest is stamped on the report.
    #[arg(long)]
    plan: Option<String>,
    /// Detector name shown in the report.
    #[arg(long, default_value = "detector")]
    detector: String,
    #[arg(long, default_value_t = 0.5)]
    threshold: f64,
}

#[derive(Debug, Args)]
struct PlanShowArgs {
    #[arg(long, default_value = "builtin")]
    plan: String,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    codec: Option<String>,
}

#[derive(Debug, Args)]
struct CodecJpegArgs {
    /// Defaults to the level passed by the corpus generator.
    #[arg(long)]
    quality: Option<u32>,
}

enum Failure {
    Usage(String),
    Runtime(String),
}

type CmdResult = Result<i32, Failure>;

fn usage(e: impl std::fmt::Display) -> Failure {
    Failure::Usage(e.to_string())
}

fn runtime(e: impl std::fmt::Display) -> Failure {
    Failure::Runtime(e.to_string())
}

/// Runs the CLI on `argv` (program name first) and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::new().filter_or("DEGRADE_LOG", "warn")).try_init();
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let result = match cli.command {
        Command::Generate(a) => generate(a),
        Command::Augment(a) => augment(a),
        Command::Score(a) => score(a),
        Command::Report(a) => report(a),
        Command::PlanShow(a) => plan_show(a),
        Command::CodecJpeg(a) => codec_jpeg(a),
    };
    match result {
        Ok(code) => code,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            2
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            1
        }
    }
}

fn load_plan(spec: &str) -> Result<AssessmentPlan, Failure> {
    if spec == "builtin" {
        return Ok(builtin_plan());
    }
    let path = Path::new(spec);
    let text = std::fs::read_to_string(path).map_err(|e| usage(format!("{spec}: {e}")))?;
    let mut plan = parse_plan(&text).map_err(|e| usage(format!("{spec}: {e}")))?;
    let base = path.parent().unwrap_or(Path::new(""));
    for item in &mut plan.inputs {
        if item.path.is_relative() {
            item.path = base.join(&item.path);
        }
    }
    Ok(plan)
}

fn read_labels(path: &Path) -> Result<HashMap<String, Label>, Failure> {
    #[derive(serde::Deserialize)]
    struct Row {
        item_id: String,
        label: String,
    }
    let ctx = |e: &dyn std::fmt::Display| usage(format!("{}: {e}", path.display()));
    let mut rdr = csv::Reader::from_path(path).map_err(|e| ctx(&e))?;
    let mut out = HashMap::new();
    for row in rdr.deserialize::<Row>() {
        let row = row.map_err(|e| ctx(&e))?;
        let label: Label = row.label.parse().map_err(|e| ctx(&e))?;
        out.insert(row.item_id, label);
    }
    Ok(out)
}

fn generate(a: GenerateArgs) -> CmdResult {
    let mut plan = load_plan(&a.plan)?;
    if let Some(seed) = a.seed {
        plan = plan.with_master_seed(seed);
    }
    if let Some(codec) = a.codec {
        plan = plan.with_codec_command(codec);
    }
    if let Some(dir) = &a.input {
        let inputs = inputs_from_dir(dir).map_err(usage)?;
        plan = plan.with_inputs(inputs);
    }
    if plan.inputs.is_empty() {
        return Err(usage("no inputs: pass --in DIR or list [[inputs]] in the plan"));
    }
    if let Some(path) = &a.labels {
        let labels = read_labels(path)?;
        for item in &mut plan.inputs {
            if let Some(l) = labels.get(&item.id) {
                item.label = Some(*l);
            }
        }
    }
    plan.validate().map_err(usage)?;
    let outcome = generate_corpus(&plan, &a.out, &GenerateOptions { jobs: a.jobs }).map_err(runtime)?;
    log::info!("{} rows written to {}", outcome.manifest.len(), a.out.display());
    if outcome.is_complete() {
        Ok(0)
    } else {
        for f in &outcome.failures {
            eprintln!("failed: {} {}: {}", f.item_id, f.cell, f.message);
        }
        eprintln!("{} of {} rows failed", outcome.failures.len(), outcome.manifest.len() + outcome.failures.len());
        Ok(1)
    }
}

fn augment(a: AugmentArgs) -> CmdResult {
    let mut cfg = match &a.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
            AugmentationChainConfig::from_toml(&text).map_err(usage)?
        }
        None => AugmentationChainConfig::default(),
    };
    if let Some(seed) = a.seed {
        cfg = cfg.with_seed(seed);
    }
    cfg.validate().map_err(usage)?;
    let (log, failures) = augment_dir(&a.input, &a.out, &cfg, a.jobs).map_err(runtime)?;
    log::info!("{} images augmented", log.len());
    if failures.is_empty() {
        Ok(0)
    } else {
        for (item, message) in &failures {
            eprintln!("failed: {item}: {message}");
        }
        Ok(1)
    }
}

fn score(a: ScoreArgs) -> CmdResult {
    let manifest_path = if a.input.is_dir() { a.input.join(MANIFEST_FILE) } else { a.input.clone() };
    let mut manifest = Manifest::load(&manifest_path).map_err(usage)?;
    if let Some(path) = &a.labels {
        let labels = read_labels(path)?;
        for row in &mut manifest.rows {
            if let Some(l) = labels.get(&row.item_id) {
                row.label = Some(*l);
            }
        }
    }
    if !(a.timeout.is_finite() && a.timeout > 0.0) {
        return Err(usage("--timeout must be a positive number of seconds"));
    }
    let handle = DetectorHandle::parse(&a.detector)
        .map_err(usage)?
        .with_timeout(Duration::from_secs_f64(a.timeout));
    let base = manifest_path.parent().unwrap_or(Path::new(""));
    let records = score_corpus(&handle, &manifest, base).map_err(|e| match e {
        AdapterError::MissingLabel { .. } | AdapterError::InvalidSpec(_) => usage(e),
        other => runtime(other),
    })?;
    std::fs::create_dir_all(&a.out).map_err(|e| runtime(format!("{}: {e}", a.out.display())))?;
    let out_path = a.out.join(RECORDS_FILE);
    let file = std::fs::File::create(&out_path).map_err(|e| runtime(format!("{}: {e}", out_path.display())))?;
    write_records(std::io::BufWriter::new(file), &records).map_err(runtime)?;
    log::info!("{} records written to {}", records.len(), out_path.display());
    Ok(0)
}

fn report(a: ReportArgs) -> CmdResult {
    let format: TableFormat = a.format.parse().map_err(usage)?;
    if !(0.0..=1.0).contains(&a.threshold) {
        return Err(usage("--threshold must lie in [0, 1]"));
    }
    let records_path = if a.input.is_dir() { a.input.join(RECORDS_FILE) } else { a.input.clone() };
    let file = std::fs::File::open(&records_path).map_err(|e| usage(format!("{}: {e}", records_path.display())))?;
    let records = read_records(std::io::BufReader::new(file)).map_err(usage)?;
    let digest = match &a.plan {
        Some(spec) => Some(load_plan(spec)?.digest()),
        None => {
            let snapshot = records_path.parent().map(|p| p.join(PLAN_FILE));
            match snapshot.filter(|p| p.is_file()) {
                Some(p) => Some(load_plan(&p.to_string_lossy())?.digest()),
                None => None,
            }
        }
    };
    let report = MetricsReport::new(a.detector, digest, aggregate(&records, a.threshold));
    let table = emit_table(&report, format);
    print!("{table}");
    if let Some(dir) = &a.out {
        let write = |name: &str, text: &str| {
            let p = dir.join(name);
            std::fs::write(&p, text).map_err(|e| runtime(format!("{}: {e}", p.display())))
        };
        std::fs::create_dir_all(dir).map_err(|e| runtime(format!("{}: {e}", dir.display())))?;
        let table_name = match format {
            TableFormat::Grid => "table.txt",
            TableFormat::Markdown => "table.md",
            TableFormat::Delimited => "table.csv",
        };
        write(table_name, &table)?;
        write("curves.csv", &emit_curves(&report))?;
        let json = serde_json::json!({
            "detector": report.detector_id,
            "plan_digest": report.plan_digest,
            "generated_at": report.generated_at,
            "threshold": a.threshold,
            "cells": report.cells,
        });
        write("metrics.json", &serde_json::to_string_pretty(&json).map_err(runtime)?)?;
        if format == TableFormat::Delimited {
            debug_assert!(parse_delimited(&table).is_ok());
        }
    }
    Ok(0)
}

fn plan_show(a: PlanShowArgs) -> CmdResult {
    let mut plan = load_plan(&a.plan)?;
    if let Some(seed) = a.seed {
        plan = plan.with_master_seed(seed);
    }
    if let Some(codec) = a.codec {
        plan = plan.with_codec_command(codec);
    }
    plan.validate().map_err(usage)?;
    println!("# digest {}", plan.digest());
    println!("# active rungs {} (+ unaltered)", plan.active_rung_count());
    print!("{}", plan.to_toml());
    Ok(0)
}

fn codec_level_quality(level: &str) -> Option<u32> {
    match level {
        "high" => Some(90),
        "med" | "medium" => Some(60),
        "low" => Some(30),
        other => other.parse().ok(),
    }
}

fn codec_jpeg(a: CodecJpegArgs) -> CmdResult {
    let quality = match a.quality {
        Some(q) => q,
        None => {
            let level = std::env::var(LEVEL_ENV).map_err(|_| usage(format!("pass --quality or set {LEVEL_ENV}")))?;
            codec_level_quality(&level).ok_or_else(|| usage(format!("unrecognized codec level `{level}`")))?
        }
    };
    let mut input = Vec::new();
    std::io::stdin().read_to_end(&mut input).map_err(runtime)?;
    let img = Image::decode(&input, Path::new("<stdin>")).map_err(runtime)?;
    let out = jpeg_transcode(&img, quality).map_err(usage)?;
    let png = out.to_png_bytes().map_err(runtime)?;
    let mut stdout = std::io::stdout().lock();
    stdout.write_all(&png).and_then(|_| stdout.flush()).map_err(runtime)?;
    Ok(0)
}
