//! Visualization PNGs: depth maps affinely mapped onto [0, 255] grayscale,
//! normal maps channel-encoded to RGB.

use std::path::PathBuf;

use anyhow::Context;
use clap::Args;
use relief_core::grid::{viz_depth, viz_normals};
use relief_core::io::{detect_kind, load_normals, save_png8_gray, save_png8_rgb, FileKind};
use serde_json::json;

use crate::util::{load_depth_auto, OutputTracker};

#[derive(Debug, Args)]
pub struct VizArgs {
    /// Input grid (.pfm depth or normal, 16-bit .png depth)
    pub input: PathBuf,
    /// Output 8-bit PNG
    pub output: PathBuf,
}

pub fn run(args: &VizArgs) -> anyhow::Result<serde_json::Value> {
    let mut outputs = OutputTracker::default();
    run_inner(args, &mut outputs).inspect_err(|_| outputs.discard_all())
}

fn run_inner(args: &VizArgs, outputs: &mut OutputTracker) -> anyhow::Result<serde_json::Value> {
    let kind = detect_kind(&args.input)
        .with_context(|| format!("probing {}", args.input.display()))?;
    let mut constant = false;
    let rendered: &str = match kind {
        FileKind::PfmDepth | FileKind::Png16Depth => {
            let depth = load_depth_auto(&args.input)?;
            let (img, flat) = viz_depth(&depth);
            constant = flat;
            if flat {
                eprintln!(
                    "warning: {} is constant; wrote an all-zero image",
                    args.input.display()
                );
            }
            save_png8_gray(&img, &args.output)?;
            "depth"
        }
        FileKind::PfmNormal => {
            let normals = load_normals(&args.input)
                .with_context(|| format!("loading {}", args.input.display()))?;
            save_png8_rgb(&viz_normals(&normals), &args.output)?;
            "normal"
        }
        FileKind::PngOther => {
            anyhow::bail!("{} is already an 8-bit visualization", args.input.display())
        }
    };
    outputs.record(&args.output);

    Ok(json!({
        "command": "viz",
        "inputs": [args.input.display().to_string()],
        "outputs": [args.output.display().to_string()],
        "rendered": rendered,
        "constant": constant,
    }))
}
