//! Finite-difference conversions among depth, gradient, and normal grids.
//!
//! Central differences are the default everywhere a scheme is not forced by a
//! caller; the forward scheme reproduces the integration module's
//! discretization exactly, which makes gradient→depth→gradient round trips
//! tight. Both schemes are exact on linear depth fields at interior pixels.

use crate::grid::{DepthMap, GradientField, NormalMap};

/// Finite-difference scheme for depth derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DiffScheme {
    /// `(z[i+1] - z[i-1]) / 2` in the interior, one-sided at borders.
    #[default]
    Central,
    /// `z[i+1] - z[i]`, with the last column/row replicating the previous
    /// difference.
    Forward,
}

/// Floor on the normal `z` component when converting normals to slopes;
/// caps slopes at 1000 px/px so occlusion rims stay finite.
pub const Z_FLOOR: f64 = 1e-3;

pub fn depth_to_gradient(z: &DepthMap, scheme: DiffScheme) -> GradientField {
    let (w, h) = (z.width(), z.height());
    let v = z.values();
    let mut field = GradientField::zero(w, h);
    let out = field.vectors_mut();
    match scheme {
        DiffScheme::Central => {
            for y in 0..h {
                for x in 0..w {
                    let p = if x == 0 {
                        v[y * w + 1] - v[y * w]
                    } else if x == w - 1 {
                        v[y * w + x] - v[y * w + x - 1]
                    } else {
                        (v[y * w + x + 1] - v[y * w + x - 1]) / 2.0
                    };
                    let q = if y == 0 {
                        v[w + x] - v[x]
                    } else if y == h - 1 {
                        v[y * w + x] - v[(y - 1) * w + x]
                    } else {
                        (v[(y + 1) * w + x] - v[(y - 1) * w + x]) / 2.0
                    };
                    out[y * w + x] = [p, q];
                }
            }
        }
        DiffScheme::Forward => {
            for y in 0..h {
                for x in 0..w {
                    let p = if x < w - 1 {
                        v[y * w + x + 1] - v[y * w + x]
                    } else {
                        v[y * w + x] - v[y * w + x - 1]
                    };
                    let q = if y < h - 1 {
                        v[(y + 1) * w + x] - v[y * w + x]
                    } else {
                        v[y * w + x] - v[(y - 1) * w + x]
                    };
                    out[y * w + x] = [p, q];
                }
            }
        }
    }
    field
}

/// Lifts slopes to unit normals: `n = (-p, -q, 1) / sqrt(p² + q² + 1)`.
/// The `z` component is positive by construction.
pub fn gradient_to_normal(g: &GradientField) -> NormalMap {
    let vectors = g
        .vectors()
        .iter()
        .map(|&[p, q]| {
            let norm = (p * p + q * q + 1.0).sqrt();
            [-p / norm, -q / norm, 1.0 / norm]
        })
        .collect();
    NormalMap::from_unit_vectors(g.width(), g.height(), vectors)
}

/// Converts normals back to slopes, flooring `n_z` at `z_floor`. Returns the
/// field and the number of pixels that hit the floor.
pub fn normal_to_gradient(n: &NormalMap, z_floor: f64) -> (GradientField, usize) {
    let mut floored = 0usize;
    let vectors = n
        .vectors()
        .iter()
        .map(|v| {
            let mut z = v[2];
            if z < z_floor {
                z = z_floor;
                floored += 1;
            }
            [-v[0] / z, -v[1] / z]
        })
        .collect();
    (
        GradientField::new(n.width(), n.height(), vectors)
            .expect("slopes are finite for unit normals with floored z"),
        floored,
    )
}

/// `gradient_to_normal(depth_to_gradient(z, scheme))`.
pub fn depth_to_normal(z: &DepthMap, scheme: DiffScheme) -> NormalMap {
    gradient_to_normal(&depth_to_gradient(z, scheme))
}
