//! Benchmark fixtures: deterministic relief-like inputs at a given size.

use relief_core::differential::{depth_to_normal, DiffScheme};
use relief_core::{synth, DepthMap, NormalMap};

/// Gaussian bump with superimposed wavy detail, the standard bench relief.
pub fn detailed_relief(size: usize) -> DepthMap {
    let mut values = synth::gaussian_bump(size, size, 40.0, size as f64 * 0.15)
        .values()
        .to_vec();
    for (i, v) in values.iter_mut().enumerate() {
        let (x, y) = ((i % size) as f64, (i / size) as f64);
        *v += 1.5 * (x * 0.37).sin() * (y * 0.53).cos();
    }
    DepthMap::new(size, size, values).expect("bench fixture is valid")
}

pub fn detail_normals(size: usize) -> NormalMap {
    depth_to_normal(&detailed_relief(size), DiffScheme::Central)
}
