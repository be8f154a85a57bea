//! Shared command plumbing: format detection, output tracking, job counts.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use relief_core::io::{self, DepthFormat, FileKind, Png16Params};
use relief_core::DepthMap;

use crate::config::IoSection;

/// Loads a depth map whatever its on-disk format.
pub fn load_depth_auto(path: &Path) -> anyhow::Result<DepthMap> {
    let kind = io::detect_kind(path).with_context(|| format!("probing {}", path.display()))?;
    let format = match kind {
        FileKind::PfmDepth => DepthFormat::Pfm,
        FileKind::Png16Depth => DepthFormat::Png16,
        FileKind::PfmNormal => {
            bail!("{} holds a normal map where a depth map was expected", path.display())
        }
        FileKind::PngOther => {
            bail!("{} is not 16-bit grayscale; depth PNGs are 16-bit", path.display())
        }
    };
    io::load_depth(path, format).with_context(|| format!("loading {}", path.display()))
}

/// Saves a depth map, choosing the format from the output extension
/// (`.pfm` lossless, `.png` 16-bit quantized with sidecar).
pub fn save_depth_by_extension(
    map: &DepthMap,
    path: &Path,
    io_cfg: &IoSection,
) -> anyhow::Result<()> {
    let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("").to_ascii_lowercase();
    match ext.as_str() {
        "pfm" => io::save_depth(map, path, DepthFormat::Pfm)
            .with_context(|| format!("writing {}", path.display())),
        "png" => io::save_depth_png16(
            map,
            path,
            Png16Params { scale: io_cfg.png16_scale, offset: io_cfg.png16_offset },
        )
        .with_context(|| format!("writing {}", path.display())),
        other => bail!("unsupported depth output extension {other:?} (want .pfm or .png)"),
    }
}

/// Records files written by a command so a failure can remove partial
/// outputs before the process exits.
#[derive(Default)]
pub struct OutputTracker {
    written: Vec<PathBuf>,
}

impl OutputTracker {
    pub fn record(&mut self, path: impl Into<PathBuf>) {
        self.written.push(path.into());
    }

    pub fn discard_all(&self) {
        for path in &self.written {
            let _ = std::fs::remove_file(path);
            // 16-bit PNG outputs carry a sidecar.
            let sidecar = relief_core::io::sidecar_path(path);
            let _ = std::fs::remove_file(sidecar);
        }
    }
}

/// `--jobs` default: the `RELIEF_JOBS` environment variable, then the
/// machine's parallelism.
pub fn resolve_jobs(flag: Option<usize>) -> usize {
    flag.or_else(|| std::env::var("RELIEF_JOBS").ok().and_then(|v| v.parse().ok()))
        .filter(|&j| j > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Scoped rayon pool with the requested width.
pub fn thread_pool(jobs: usize) -> anyhow::Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .context("building worker pool")
}
