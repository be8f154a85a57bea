//! Depth pseudo-label generation: scale the relative depth against the
//! detail normals, soft-fuse the two normal sources, then recover the final
//! depth by iterative normal integration anchored to the scaled depth.

use std::path::PathBuf;

use anyhow::Context;
use clap::Args;
use relief_core::fusion::fuse_pipeline;
use relief_core::integration::integrate_normals;
use relief_core::io::{load_normals, save_normals};
use serde_json::json;

use crate::util::{load_depth_auto, save_depth_by_extension, OutputTracker};
use crate::ConfigArgs;

#[derive(Debug, Args)]
pub struct PseudoLabelArgs {
    /// Relative depth map (.pfm or 16-bit .png)
    pub rel_depth: PathBuf,
    /// Detailed normal map (three-channel .pfm)
    pub detail_normal: PathBuf,
    /// Output directory for the fused normals, depth label, and manifest
    pub out_dir: PathBuf,
    #[command(flatten)]
    pub config: ConfigArgs,
}

pub fn run(args: &PseudoLabelArgs) -> anyhow::Result<serde_json::Value> {
    let mut outputs = OutputTracker::default();
    run_inner(args, &mut outputs).inspect_err(|_| outputs.discard_all())
}

fn run_inner(
    args: &PseudoLabelArgs,
    outputs: &mut OutputTracker,
) -> anyhow::Result<serde_json::Value> {
    let cfg = args.config.resolve()?;
    let rel_depth = load_depth_auto(&args.rel_depth)?;
    let detail = load_normals(&args.detail_normal)
        .with_context(|| format!("loading {}", args.detail_normal.display()))?;

    let (fused, scale) = fuse_pipeline(&rel_depth, &detail, &cfg.as_fusion_config())?;
    eprintln!(
        "fused normals: scale {:.6} (objective {:.4} deg, {} evaluations)",
        scale.scale, scale.objective, scale.evaluations
    );
    let scaled = rel_depth.scaled(scale.scale);
    let (label, report) = integrate_normals(&fused, &scaled, &cfg.as_solver_config())?;
    eprintln!(
        "integrated depth label: residual {:.3e} after {} cg iterations",
        report.final_relative_residual, report.cg_iterations_used
    );

    std::fs::create_dir_all(&args.out_dir)
        .with_context(|| format!("creating {}", args.out_dir.display()))?;

    let normal_path = args.out_dir.join("fused_normal.pfm");
    save_normals(&fused, &normal_path)?;
    outputs.record(&normal_path);

    let depth_ext = if cfg.io.depth_format == "png16" { "png" } else { "pfm" };
    let depth_path = args.out_dir.join(format!("depth_label.{depth_ext}"));
    save_depth_by_extension(&label, &depth_path, &cfg.io)?;
    outputs.record(&depth_path);

    let manifest_path = args.out_dir.join("manifest.json");
    let manifest = json!({
        "command": "pseudo-label",
        "inputs": [args.rel_depth.display().to_string(), args.detail_normal.display().to_string()],
        "outputs": [normal_path.display().to_string(), depth_path.display().to_string()],
        "scale": scale.scale,
        "objective": scale.objective,
        "scale_degenerate": scale.degenerate,
        "solver_residual": report.final_relative_residual,
        "cg_iterations": report.cg_iterations_used,
        "energy": report.energy,
        "thickness": label.thickness(),
        "config": cfg,
    });
    std::fs::write(&manifest_path, serde_json::to_string_pretty(&manifest)?)
        .with_context(|| format!("writing {}", manifest_path.display()))?;
    outputs.record(&manifest_path);

    Ok(manifest)
}
