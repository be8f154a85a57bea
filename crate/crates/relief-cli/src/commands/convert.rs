//! Format and representation conversion for depth and normal grids.

use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::{Args, ValueEnum};
use relief_core::differential::depth_to_normal;
use relief_core::io::{detect_kind, load_normals, save_normals, FileKind};
use relief_core::DiffScheme;
use serde_json::json;

use crate::config::IoSection;
use crate::util::{load_depth_auto, save_depth_by_extension, OutputTracker};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TargetKind {
    Depth,
    Normal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Scheme {
    Central,
    Forward,
}

impl From<Scheme> for DiffScheme {
    fn from(s: Scheme) -> Self {
        match s {
            Scheme::Central => DiffScheme::Central,
            Scheme::Forward => DiffScheme::Forward,
        }
    }
}

#[derive(Debug, Args)]
pub struct ConvertArgs {
    /// Input grid (.pfm depth or normal, 16-bit .png depth)
    pub input: PathBuf,
    /// Output path; extension picks the depth format (.pfm or .png)
    pub output: PathBuf,
    /// What the output should hold
    #[arg(long = "as", value_enum, default_value = "depth")]
    pub target: TargetKind,
    /// Difference scheme for depth → normal conversion
    #[arg(long, value_enum, default_value = "central")]
    pub scheme: Scheme,
    /// Fixed 16-bit quantization step for .png output
    #[arg(long)]
    pub png_scale: Option<f64>,
    /// Fixed 16-bit offset for .png output
    #[arg(long)]
    pub png_offset: Option<f64>,
}

pub fn run(args: &ConvertArgs) -> anyhow::Result<serde_json::Value> {
    let mut outputs = OutputTracker::default();
    run_inner(args, &mut outputs).inspect_err(|_| outputs.discard_all())
}

fn run_inner(args: &ConvertArgs, outputs: &mut OutputTracker) -> anyhow::Result<serde_json::Value> {
    let kind = detect_kind(&args.input)
        .with_context(|| format!("probing {}", args.input.display()))?;
    let io_cfg = IoSection {
        png16_scale: args.png_scale,
        png16_offset: args.png_offset,
        ..IoSection::default()
    };

    let produced: &str = match (kind, args.target) {
        (FileKind::PfmDepth | FileKind::Png16Depth, TargetKind::Depth) => {
            let depth = load_depth_auto(&args.input)?;
            save_depth_by_extension(&depth, &args.output, &io_cfg)?;
            "depth"
        }
        (FileKind::PfmDepth | FileKind::Png16Depth, TargetKind::Normal) => {
            let depth = load_depth_auto(&args.input)?;
            let normals = depth_to_normal(&depth, args.scheme.into());
            if args.output.extension().and_then(|e| e.to_str()) != Some("pfm") {
                bail!("normal maps are written as .pfm");
            }
            save_normals(&normals, &args.output)?;
            "normal"
        }
        (FileKind::PfmNormal, TargetKind::Normal) => {
            let normals = load_normals(&args.input)
                .with_context(|| format!("loading {}", args.input.display()))?;
            if args.output.extension().and_then(|e| e.to_str()) != Some("pfm") {
                bail!("normal maps are written as .pfm");
            }
            save_normals(&normals, &args.output)?;
            "normal"
        }
        (FileKind::PfmNormal, TargetKind::Depth) => {
            bail!("normal → depth is an integration problem; use `relief refine` or `relief pseudo-label`")
        }
        (FileKind::PngOther, _) => {
            bail!("{} is not 16-bit grayscale; depth PNGs are 16-bit", args.input.display())
        }
    };
    outputs.record(&args.output);

    Ok(json!({
        "command": "convert",
        "inputs": [args.input.display().to_string()],
        "outputs": [args.output.display().to_string()],
        "produced": produced,
    }))
}
