//! `relief` - batch front end for relief height-field processing.
//!
//! Logs go to stderr, data to files, and one machine-readable JSON summary
//! line to stdout. Exit code 0 means every declared output was written.

mod commands;
mod config;
mod util;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use config::PipelineConfig;

#[derive(Debug, Parser)]
#[command(name = "relief", version, about = "Relief height-field processing toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a depth pseudo-label from a relative depth map and a
    /// detailed normal map (fuse, then integrate)
    #[command(name = "pseudo-label")]
    PseudoLabel(commands::pseudo_label::PseudoLabelArgs),
    /// Refine a rough depth label via depth-constrained normal integration
    Refine(commands::refine::RefineArgs),
    /// Score predicted depth maps against ground truth
    Eval(commands::eval::EvalArgs),
    /// Convert between depth formats or derive normals from depth
    Convert(commands::convert::ConvertArgs),
    /// Render a grid to an 8-bit PNG
    Viz(commands::viz::VizArgs),
    /// Thickness histogram over a dataset
    Stats(commands::stats::StatsArgs),
}

/// Config file plus per-run overrides shared by the processing commands.
#[derive(Debug, Args)]
pub struct ConfigArgs {
    /// TOML or JSON config; a pseudo-label manifest.json also works
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Gradient-magnitude knee of the normal transformation (px/px)
    #[arg(long)]
    pub tau: Option<f64>,
    /// Attenuation sharpness (>= 1)
    #[arg(long)]
    pub k: Option<f64>,
    #[arg(long)]
    pub scale_min: Option<f64>,
    #[arg(long)]
    pub scale_max: Option<f64>,
    /// Depth-fidelity weight of the integration
    #[arg(long)]
    pub mu: Option<f64>,
    #[arg(long)]
    pub cg_tolerance: Option<f64>,
    #[arg(long)]
    pub max_cg_iters: Option<usize>,
    #[arg(long)]
    pub outer_iters: Option<usize>,
    #[arg(long)]
    pub edge_sigma: Option<f64>,
    /// Output depth format: pfm or png16
    #[arg(long)]
    pub depth_format: Option<String>,
}

impl ConfigArgs {
    pub fn resolve(&self) -> anyhow::Result<PipelineConfig> {
        let mut cfg = match &self.config {
            Some(path) => PipelineConfig::load(path)?,
            None => PipelineConfig::default(),
        };
        if let Some(v) = self.tau {
            cfg.fusion.tau = v;
        }
        if let Some(v) = self.k {
            cfg.fusion.k = v;
        }
        if let Some(v) = self.scale_min {
            cfg.fusion.scale_min = v;
        }
        if let Some(v) = self.scale_max {
            cfg.fusion.scale_max = v;
        }
        if let Some(v) = self.mu {
            cfg.integration.mu = v;
        }
        if let Some(v) = self.cg_tolerance {
            cfg.integration.cg_tolerance = v;
        }
        if let Some(v) = self.max_cg_iters {
            cfg.integration.max_cg_iters = Some(v);
        }
        if let Some(v) = self.outer_iters {
            cfg.integration.outer_iters = v;
        }
        if let Some(v) = self.edge_sigma {
            cfg.integration.edge_sigma = v;
        }
        if let Some(v) = &self.depth_format {
            cfg.io.depth_format = v.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn main() {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::PseudoLabel(args) => commands::pseudo_label::run(args),
        Command::Refine(args) => commands::refine::run(args),
        Command::Eval(args) => commands::eval::run(args),
        Command::Convert(args) => commands::convert::run(args),
        Command::Viz(args) => commands::viz::run(args),
        Command::Stats(args) => commands::stats::run(args),
    };
    match result {
        Ok(summary) => {
            let mut line = serde_json::Map::new();
            line.insert("status".into(), "ok".into());
            if let serde_json::Value::Object(fields) = summary {
                line.extend(fields);
            }
            println!("{}", serde_json::Value::Object(line));
        }
        Err(error) => {
            eprintln!("error: {error:#}");
            println!(
                "{}",
                serde_json::json!({ "status": "error", "error": format!("{error:#}") })
            );
            std::process::exit(1);
        }
    }
}
