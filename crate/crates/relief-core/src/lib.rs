//! Relief height-field processing.
//!
//! A relief is an orthographic height field: shallow sculpted geometry
//! between a flat image and a full 3-D object. This crate covers the
//! numeric side of working with them:
//!
//! 1. **grid / io** - depth, normal, gradient, and encoded-normal
//!    containers; PFM and 16-bit-PNG file formats; [0, 255] visualization.
//! 2. **differential** - finite-difference conversions among the three
//!    geometric representations.
//! 3. **fusion** - normal-guided global depth scaling, gradient-magnitude
//!    attenuation, and the channelwise soft blend that transfers detail
//!    from one encoded normal map into another.
//! 4. **integration** - screened-Poisson depth recovery from gradients or
//!    normals, including the residual-reweighted iteration that sharpens
//!    occlusion edges, and depth-label refinement.
//! 5. **metrics** - the depth/normal evaluation suite (error percentages,
//!    PSNR/SSIM, angular statistics), report emission, and mean-rank
//!    comparison across methods.
//!
//! Conventions, used everywhere without exception: grids are row-major;
//! `x` points right (columns), `y` down (rows), `z` toward the viewer;
//! normals are unit length with `z > 0`; encoded channels are `(n + 1) / 2`.

pub mod differential;
pub mod error;
pub mod fusion;
pub mod grid;
pub mod integration;
pub mod io;
pub mod metrics;
pub mod synth;

pub use differential::{depth_to_gradient, depth_to_normal, gradient_to_normal, normal_to_gradient, DiffScheme};
pub use error::{Error, Result};
pub use fusion::{fuse_pipeline, global_scale, soft_fuse, transform_normals, FusionConfig, NormalTransformParams, ScaleSearchResult};
pub use grid::{decode_normals, encode_normals, viz_depth, viz_normals, DepthMap, EncodedNormalMap, GradientField, NormalMap};
pub use integration::{integrate_normals, refine_depth_label, screened_poisson, SolveReport, SolverConfig};
pub use io::{load_depth, load_normals, save_depth, save_normals, DepthFormat, Png16Params};
pub use metrics::{composite_loss, evaluate_pair, mean_depth_error, normal_angular_error, psnr, ssim, MetricReport, MetricRow, PairMetrics};
