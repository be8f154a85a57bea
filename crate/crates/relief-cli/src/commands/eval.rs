//! Benchmark evaluation: per-image metric rows against ground truth, with
//! optional multi-method comparison and mean-rank aggregation.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::Args;
use rayon::prelude::*;
use relief_core::metrics::{
    compare_methods, evaluate_pair, write_compare_csv, MetricReport, MetricRow,
};
use serde::Deserialize;
use serde_json::json;

use crate::util::{load_depth_auto, resolve_jobs, thread_pool, OutputTracker};

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Directory of predicted depth maps
    pub pred_dir: PathBuf,
    /// Directory of ground-truth depth maps
    pub gt_dir: PathBuf,
    /// Output report path (.csv; a .json twin is written next to it)
    pub out_report: PathBuf,
    /// Additional methods to rank against, as NAME=DIR (repeatable).
    /// With this flag the report becomes a per-method aggregate table with
    /// a mean-rank column.
    #[arg(long, value_name = "NAME=DIR")]
    pub compare: Vec<String>,
    /// Tolerate filename stems present on only one side
    #[arg(long)]
    pub allow_partial: bool,
    /// Explicit pairing manifest: JSON `[{"id", "pred", "gt"}, ...]`
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Worker threads (default: RELIEF_JOBS or all cores)
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Deserialize)]
struct ManifestPair {
    id: String,
    pred: PathBuf,
    gt: PathBuf,
}

/// Depth files by filename stem; normal maps in the directory are skipped.
fn scan_depth_files(dir: &Path) -> anyhow::Result<BTreeMap<String, PathBuf>> {
    let mut out = BTreeMap::new();
    let entries = std::fs::read_dir(dir).with_context(|| format!("listing {}", dir.display()))?;
    for entry in entries {
        let path = entry?.path();
        if !path.is_file() {
            continue;
        }
        let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("").to_ascii_lowercase();
        if ext != "pfm" && ext != "png" {
            continue;
        }
        if matches!(
            relief_core::io::detect_kind(&path),
            Ok(relief_core::io::FileKind::PfmNormal) | Ok(relief_core::io::FileKind::PngOther)
        ) {
            eprintln!("skipping non-depth file {}", path.display());
            continue;
        }
        let stem = path
            .file_stem()
            .and_then(|s| s.to_str())
            .map(str::to_string)
            .unwrap_or_default();
        if let Some(previous) = out.insert(stem.clone(), path.clone()) {
            bail!(
                "ambiguous stem {stem:?} in {}: {} and {}",
                dir.display(),
                previous.display(),
                path.display()
            );
        }
    }
    Ok(out)
}

fn paired(
    pred_dir: &Path,
    gt_dir: &Path,
    allow_partial: bool,
) -> anyhow::Result<Vec<(String, PathBuf, PathBuf)>> {
    let pred = scan_depth_files(pred_dir)?;
    let mut gt = scan_depth_files(gt_dir)?;
    let mut pairs = Vec::new();
    let mut unmatched: Vec<String> = Vec::new();
    for (stem, pred_path) in pred {
        match gt.remove(&stem) {
            Some(gt_path) => pairs.push((stem, pred_path, gt_path)),
            None => unmatched.push(format!("pred-only: {}", pred_path.display())),
        }
    }
    for (_, gt_path) in gt {
        unmatched.push(format!("gt-only: {}", gt_path.display()));
    }
    for line in &unmatched {
        eprintln!("unmatched {line}");
    }
    if pairs.is_empty() {
        bail!(
            "no matching filename stems between {} and {}",
            pred_dir.display(),
            gt_dir.display()
        );
    }
    if !unmatched.is_empty() && !allow_partial {
        bail!(
            "{} unmatched file(s) between {} and {} (pass --allow-partial to proceed)",
            unmatched.len(),
            pred_dir.display(),
            gt_dir.display()
        );
    }
    Ok(pairs)
}

fn evaluate_method(
    pred_dir: &Path,
    gt_dir: &Path,
    manifest: Option<&Path>,
    allow_partial: bool,
) -> anyhow::Result<MetricReport> {
    let pairs: Vec<(String, PathBuf, PathBuf)> = match manifest {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            let entries: Vec<ManifestPair> =
                serde_json::from_str(&text).context("parsing pairing manifest")?;
            entries.into_iter().map(|p| (p.id, p.pred, p.gt)).collect()
        }
        None => paired(pred_dir, gt_dir, allow_partial)?,
    };

    let rows: anyhow::Result<Vec<MetricRow>> = pairs
        .par_iter()
        .map(|(id, pred_path, gt_path)| {
            let pred = load_depth_auto(pred_path)?;
            let gt = load_depth_auto(gt_path)?;
            let metrics =
                evaluate_pair(&pred, &gt).with_context(|| format!("evaluating {id}"))?;
            Ok(MetricRow { id: id.clone(), metrics })
        })
        .collect();
    Ok(MetricReport::from_rows(rows?)?)
}

pub fn run(args: &EvalArgs) -> anyhow::Result<serde_json::Value> {
    let mut outputs = OutputTracker::default();
    run_inner(args, &mut outputs).inspect_err(|_| outputs.discard_all())
}

fn run_inner(args: &EvalArgs, outputs: &mut OutputTracker) -> anyhow::Result<serde_json::Value> {
    let pool = thread_pool(resolve_jobs(args.jobs))?;
    let json_path = args.out_report.with_extension("json");

    if args.compare.is_empty() {
        let report = pool.install(|| {
            evaluate_method(
                &args.pred_dir,
                &args.gt_dir,
                args.manifest.as_deref(),
                args.allow_partial,
            )
        })?;
        let mut csv_bytes = Vec::new();
        report.write_csv(&mut csv_bytes)?;
        std::fs::write(&args.out_report, csv_bytes)
            .with_context(|| format!("writing {}", args.out_report.display()))?;
        outputs.record(&args.out_report);
        std::fs::write(&json_path, serde_json::to_string_pretty(&report)?)
            .with_context(|| format!("writing {}", json_path.display()))?;
        outputs.record(&json_path);
        eprintln!("evaluated {} pairs", report.per_image.len());
        return Ok(json!({
            "command": "eval",
            "pairs": report.per_image.len(),
            "outputs": [args.out_report.display().to_string(), json_path.display().to_string()],
            "aggregate": report.aggregate,
        }));
    }

    // Comparison mode: the positional directory is one method, each
    // --compare NAME=DIR adds another; all are scored against gt_dir.
    let mut methods: Vec<(String, PathBuf)> = Vec::new();
    let lead_name = args
        .pred_dir
        .file_name()
        .and_then(|s| s.to_str())
        .unwrap_or("pred")
        .to_string();
    methods.push((lead_name, args.pred_dir.clone()));
    for entry in &args.compare {
        let Some((name, dir)) = entry.split_once('=') else {
            bail!("--compare {entry:?} is not NAME=DIR");
        };
        methods.push((name.to_string(), PathBuf::from(dir)));
    }

    let mut aggregates = Vec::new();
    for (name, dir) in &methods {
        let report = pool.install(|| {
            evaluate_method(dir, &args.gt_dir, args.manifest.as_deref(), args.allow_partial)
        })
        .with_context(|| format!("method {name}"))?;
        eprintln!("method {name}: {} pairs", report.per_image.len());
        aggregates.push((name.clone(), report.aggregate));
    }
    let ranked = compare_methods(aggregates);

    let mut csv_bytes = Vec::new();
    write_compare_csv(&ranked, &mut csv_bytes)?;
    std::fs::write(&args.out_report, csv_bytes)
        .with_context(|| format!("writing {}", args.out_report.display()))?;
    outputs.record(&args.out_report);
    std::fs::write(&json_path, serde_json::to_string_pretty(&ranked)?)
        .with_context(|| format!("writing {}", json_path.display()))?;
    outputs.record(&json_path);

    Ok(json!({
        "command": "eval",
        "methods": ranked,
        "outputs": [args.out_report.display().to_string(), json_path.display().to_string()],
    }))
}
