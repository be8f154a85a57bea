//! Dataset thickness statistics: per-sample depth ranges binned into a
//! histogram CSV.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::Args;
use rayon::prelude::*;
use serde_json::json;

use crate::util::{load_depth_auto, resolve_jobs, thread_pool, OutputTracker};

/// Default histogram bin width in pixels.
pub const DEFAULT_BIN_WIDTH: f64 = 25.0;

#[derive(Debug, Args)]
pub struct StatsArgs {
    /// Depth files or directories of depth files
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    /// Histogram CSV output path
    #[arg(long, short)]
    pub out: PathBuf,
    /// Histogram bin width (px)
    #[arg(long, default_value_t = DEFAULT_BIN_WIDTH)]
    pub bin_width: f64,
    /// Worker threads (default: RELIEF_JOBS or all cores)
    #[arg(long)]
    pub jobs: Option<usize>,
}

fn collect_depth_files(inputs: &[PathBuf]) -> anyhow::Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for input in inputs {
        if input.is_dir() {
            let entries = std::fs::read_dir(input)
                .with_context(|| format!("listing {}", input.display()))?;
            let mut found: Vec<PathBuf> = entries
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| {
                    let ext = p.extension().and_then(|e| e.to_str()).unwrap_or("");
                    p.is_file() && (ext.eq_ignore_ascii_case("pfm") || ext.eq_ignore_ascii_case("png"))
                })
                .collect();
            found.sort();
            // Pipeline output dirs mix normal maps and visualizations in;
            // thickness is a depth statistic, so skip them.
            for path in found {
                match relief_core::io::detect_kind(&path) {
                    Ok(relief_core::io::FileKind::PfmNormal)
                    | Ok(relief_core::io::FileKind::PngOther) => {
                        eprintln!("skipping non-depth file {}", path.display());
                    }
                    _ => files.push(path),
                }
            }
        } else {
            files.push(input.clone());
        }
    }
    if files.is_empty() {
        bail!("no depth files found");
    }
    Ok(files)
}

pub fn run(args: &StatsArgs) -> anyhow::Result<serde_json::Value> {
    let mut outputs = OutputTracker::default();
    run_inner(args, &mut outputs).inspect_err(|_| outputs.discard_all())
}

fn run_inner(args: &StatsArgs, outputs: &mut OutputTracker) -> anyhow::Result<serde_json::Value> {
    if !(args.bin_width.is_finite() && args.bin_width > 0.0) {
        bail!("bin width {} must be positive", args.bin_width);
    }
    let files = collect_depth_files(&args.inputs)?;
    let pool = thread_pool(resolve_jobs(args.jobs))?;
    let thicknesses: anyhow::Result<Vec<(PathBuf, f64)>> = pool.install(|| {
        files
            .par_iter()
            .map(|path| Ok((path.clone(), load_depth_auto(path)?.thickness())))
            .collect()
    });
    let thicknesses = thicknesses?;

    let max = thicknesses.iter().map(|(_, t)| *t).fold(0.0f64, f64::max);
    let min = thicknesses.iter().map(|(_, t)| *t).fold(f64::INFINITY, f64::min);
    let bins = (max / args.bin_width).floor() as usize + 1;
    let mut counts = vec![0usize; bins];
    for (_, t) in &thicknesses {
        counts[(t / args.bin_width).floor() as usize] += 1;
    }

    let mut csv = String::from("bin_start,bin_end,count\n");
    for (i, count) in counts.iter().enumerate() {
        csv.push_str(&format!(
            "{},{},{count}\n",
            i as f64 * args.bin_width,
            (i + 1) as f64 * args.bin_width
        ));
    }
    write_histogram(&args.out, &csv)?;
    outputs.record(&args.out);
    eprintln!("histogram over {} samples -> {}", thicknesses.len(), args.out.display());

    Ok(json!({
        "command": "stats",
        "files": thicknesses.len(),
        "min_thickness": min,
        "max_thickness": max,
        "bin_width": args.bin_width,
        "nonzero_bins": counts.iter().filter(|&&c| c > 0).count(),
        "outputs": [args.out.display().to_string()],
    }))
}

fn write_histogram(path: &Path, csv: &str) -> anyhow::Result<()> {
    std::fs::write(path, csv).with_context(|| format!("writing {}", path.display()))
}
