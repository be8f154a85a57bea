//! Depth-label refinement: depth-constrained normal integration of a rough
//! depth map against a detail-rich normal map.

use std::path::PathBuf;

use anyhow::Context;
use clap::Args;
use relief_core::integration::refine_depth_label_with;
use relief_core::io::load_normals;
use serde_json::json;

use crate::util::{load_depth_auto, save_depth_by_extension, OutputTracker};
use crate::ConfigArgs;

#[derive(Debug, Args)]
pub struct RefineArgs {
    /// Rough depth label (.pfm or 16-bit .png)
    pub rough_depth: PathBuf,
    /// Detail normal map (three-channel .pfm)
    pub normal: PathBuf,
    /// Output depth path (.pfm or .png)
    pub out: PathBuf,
    #[command(flatten)]
    pub config: ConfigArgs,
}

pub fn run(args: &RefineArgs) -> anyhow::Result<serde_json::Value> {
    let mut outputs = OutputTracker::default();
    run_inner(args, &mut outputs).inspect_err(|_| outputs.discard_all())
}

fn run_inner(args: &RefineArgs, outputs: &mut OutputTracker) -> anyhow::Result<serde_json::Value> {
    let cfg = args.config.resolve()?;
    let rough = load_depth_auto(&args.rough_depth)?;
    let normal = load_normals(&args.normal)
        .with_context(|| format!("loading {}", args.normal.display()))?;

    let (refined, report) = refine_depth_label_with(&rough, &normal, &cfg.as_solver_config())?;
    eprintln!(
        "refined depth: residual {:.3e} after {} cg iterations",
        report.final_relative_residual, report.cg_iterations_used
    );

    save_depth_by_extension(&refined, &args.out, &cfg.io)?;
    outputs.record(&args.out);

    Ok(json!({
        "command": "refine",
        "inputs": [args.rough_depth.display().to_string(), args.normal.display().to_string()],
        "outputs": [args.out.display().to_string()],
        "mu": cfg.integration.mu,
        "solver_residual": report.final_relative_residual,
        "cg_iterations": report.cg_iterations_used,
        "energy": report.energy,
        "thickness": refined.thickness(),
        "config": cfg,
    }))
}
