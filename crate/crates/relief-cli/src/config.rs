//! Pipeline configuration: TOML or JSON files with strict validation,
//! plus extraction of the embedded config from a run manifest so a previous
//! run can be reproduced from its own metadata.

use std::path::Path;

use anyhow::{bail, Context};
use relief_core::fusion::FusionConfig;
use relief_core::integration::SolverConfig;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub fusion: FusionSection,
    pub integration: IntegrationSection,
    pub io: IoSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FusionSection {
    pub tau: f64,
    pub k: f64,
    pub scale_min: f64,
    pub scale_max: f64,
}

impl Default for FusionSection {
    fn default() -> Self {
        let d = FusionConfig::default();
        Self { tau: d.tau, k: d.k, scale_min: d.scale_min, scale_max: d.scale_max }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegrationSection {
    pub mu: f64,
    pub cg_tolerance: f64,
    /// Absent means `10·sqrt(N)` derived from the grid.
    pub max_cg_iters: Option<usize>,
    pub outer_iters: usize,
    pub edge_sigma: f64,
}

impl Default for IntegrationSection {
    fn default() -> Self {
        let d = SolverConfig::default();
        Self {
            mu: d.mu,
            cg_tolerance: d.cg_tolerance,
            max_cg_iters: d.max_cg_iters,
            outer_iters: d.outer_iters,
            edge_sigma: d.edge_sigma,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IoSection {
    /// Output depth format: "pfm" (lossless) or "png16".
    pub depth_format: String,
    /// Fixed 16-bit quantization step; absent derives it from the data.
    pub png16_scale: Option<f64>,
    pub png16_offset: Option<f64>,
}

impl Default for IoSection {
    fn default() -> Self {
        Self { depth_format: "pfm".into(), png16_scale: None, png16_offset: None }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> anyhow::Result<()> {
        self.as_fusion_config().validate().context("fusion config")?;
        self.as_solver_config().validate().context("integration config")?;
        if self.io.depth_format != "pfm" && self.io.depth_format != "png16" {
            bail!("io.depth_format {:?} must be \"pfm\" or \"png16\"", self.io.depth_format);
        }
        if let Some(s) = self.io.png16_scale {
            if !(s.is_finite() && s > 0.0) {
                bail!("io.png16_scale {s} must be positive");
            }
        }
        if let Some(o) = self.io.png16_offset {
            if !o.is_finite() {
                bail!("io.png16_offset {o} must be finite");
            }
        }
        Ok(())
    }

    pub fn as_fusion_config(&self) -> FusionConfig {
        FusionConfig {
            tau: self.fusion.tau,
            k: self.fusion.k,
            scale_min: self.fusion.scale_min,
            scale_max: self.fusion.scale_max,
        }
    }

    pub fn as_solver_config(&self) -> SolverConfig {
        SolverConfig {
            mu: self.integration.mu,
            cg_tolerance: self.integration.cg_tolerance,
            max_cg_iters: self.integration.max_cg_iters,
            outer_iters: self.integration.outer_iters,
            edge_sigma: self.integration.edge_sigma,
        }
    }

    /// Loads a config from TOML or JSON (by extension). A JSON file that is
    /// actually a run manifest (it has a `config` object next to `command`)
    /// yields its embedded config, so `--config manifest.json` reproduces
    /// the run that wrote the manifest.
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
        let config: PipelineConfig = match ext {
            "toml" => toml::from_str(&text)
                .with_context(|| format!("parsing TOML config {}", path.display()))?,
            "json" => {
                let value: serde_json::Value = serde_json::from_str(&text)
                    .with_context(|| format!("parsing JSON config {}", path.display()))?;
                let source = match (&value.get("config"), &value.get("command")) {
                    (Some(embedded), Some(_)) => (*embedded).clone(),
                    _ => value,
                };
                serde_json::from_value(source)
                    .with_context(|| format!("parsing JSON config {}", path.display()))?
            }
            other => bail!("config {} has unsupported extension {other:?} (want .toml or .json)", path.display()),
        };
        config.validate()?;
        Ok(config)
    }
}
