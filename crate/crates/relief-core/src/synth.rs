//! Synthetic relief fixtures shared by tests, benchmarks, and demos.

use crate::grid::DepthMap;

/// Centered Gaussian bump `A·exp(-r²/(2σ²))`.
pub fn gaussian_bump(width: usize, height: usize, amplitude: f64, sigma: f64) -> DepthMap {
    let cx = (width as f64 - 1.0) / 2.0;
    let cy = (height as f64 - 1.0) / 2.0;
    let values = (0..width * height)
        .map(|i| {
            let dx = (i % width) as f64 - cx;
            let dy = (i / width) as f64 - cy;
            amplitude * (-(dx * dx + dy * dy) / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    DepthMap::new(width, height, values).expect("synthetic bump is valid")
}

/// Hemispherical cap of the given radius on a zero ground plane.
pub fn hemisphere(width: usize, height: usize, radius: f64) -> DepthMap {
    let cx = (width as f64 - 1.0) / 2.0;
    let cy = (height as f64 - 1.0) / 2.0;
    let values = (0..width * height)
        .map(|i| {
            let dx = (i % width) as f64 - cx;
            let dy = (i / width) as f64 - cy;
            (radius * radius - dx * dx - dy * dy).max(0.0).sqrt()
        })
        .collect();
    DepthMap::new(width, height, values).expect("synthetic hemisphere is valid")
}

/// Two flat plateaus split at `width / 2`: left at 0, right at `step`.
pub fn two_plateaus(width: usize, height: usize, step: f64) -> DepthMap {
    let half = width / 2;
    let values = (0..width * height)
        .map(|i| if i % width < half { 0.0 } else { step })
        .collect();
    DepthMap::new(width, height, values).expect("synthetic plateaus are valid")
}
