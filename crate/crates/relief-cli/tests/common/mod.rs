//! Shared fixtures, a binary runner, and the independent reference
//! implementations (straight loops, dense linear algebra) used as oracles.
//! Nothing here calls into the code paths it is used to check.

#![allow(dead_code)]
#![allow(clippy::needless_range_loop)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use relief_core::io::{save_depth, save_normals, DepthFormat};
use relief_core::{DepthMap, GradientField, NormalMap};

pub fn relief_bin() -> &'static str {
    env!("CARGO_BIN_EXE_relief")
}

pub fn run_relief(args: &[&str]) -> Output {
    Command::new(relief_bin())
        .args(args)
        .output()
        .expect("relief binary runs")
}

pub fn run_relief_env(args: &[&str], env: &[(&str, &str)]) -> Output {
    Command::new(relief_bin())
        .args(args)
        .envs(env.iter().copied())
        .output()
        .expect("relief binary runs")
}

pub fn stdout_json(output: &Output) -> serde_json::Value {
    let text = String::from_utf8_lossy(&output.stdout);
    let line = text.lines().last().unwrap_or_default();
    serde_json::from_str(line).unwrap_or_else(|e| panic!("bad JSON line {line:?}: {e}"))
}

pub fn write_depth_pfm(dir: &Path, name: &str, map: &DepthMap) -> PathBuf {
    let path = dir.join(name);
    save_depth(map, &path, DepthFormat::Pfm).expect("write depth fixture");
    path
}

pub fn write_normals_pfm(dir: &Path, name: &str, n: &NormalMap) -> PathBuf {
    let path = dir.join(name);
    save_normals(n, &path).expect("write normal fixture");
    path
}

/// Deterministic value noise without any RNG dependency.
pub fn wavy_noise(w: usize, h: usize, amplitude: f64) -> Vec<f64> {
    (0..w * h)
        .map(|i| {
            let (x, y) = ((i % w) as f64, (i / w) as f64);
            amplitude * ((x * 0.61).sin() * (y * 0.43).cos() + (x * 0.17 + y * 0.29).sin()) / 2.0
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Dense solver oracle
// ---------------------------------------------------------------------------

/// Assembles the screened normal equations densely over valid pixels and
/// solves them by LU with partial pivoting. The μ = 0 gauge (solution mean
/// equals data mean) enters as a Lagrange row.
pub fn dense_screened_solve(g: &GradientField, d: &DepthMap, mu: f64) -> Vec<f64> {
    let (w, h) = (d.width(), d.height());
    let valid: Vec<bool> = match d.mask() {
        Some(m) => m.to_vec(),
        None => vec![true; w * h],
    };
    let rows: Vec<usize> = (0..w * h).filter(|&i| valid[i]).collect();
    let index: std::collections::HashMap<usize, usize> =
        rows.iter().enumerate().map(|(r, &i)| (i, r)).collect();
    let n = rows.len();
    let dim = if mu == 0.0 { n + 1 } else { n };
    let mut a = vec![vec![0.0f64; dim]; dim];
    let mut b = vec![0.0f64; dim];

    let add_edge = |ia: usize, ib: usize, target: f64, a: &mut Vec<Vec<f64>>, b: &mut Vec<f64>| {
        let (ra, rb) = (index[&ia], index[&ib]);
        a[ra][ra] += 1.0;
        a[rb][rb] += 1.0;
        a[ra][rb] -= 1.0;
        a[rb][ra] -= 1.0;
        b[ra] -= target;
        b[rb] += target;
    };
    for y in 0..h {
        for x in 0..w - 1 {
            let i = y * w + x;
            if valid[i] && valid[i + 1] {
                add_edge(i, i + 1, g.get(x, y)[0], &mut a, &mut b);
            }
        }
    }
    for y in 0..h - 1 {
        for x in 0..w {
            let i = y * w + x;
            if valid[i] && valid[i + w] {
                add_edge(i, i + w, g.get(x, y)[1], &mut a, &mut b);
            }
        }
    }
    for (r, &i) in rows.iter().enumerate() {
        a[r][r] += mu;
        b[r] += mu * d.values()[i];
    }
    if mu == 0.0 {
        for r in 0..n {
            a[r][n] = 1.0;
            a[n][r] = 1.0;
        }
        b[n] = rows.iter().map(|&i| d.values()[i]).sum();
    }

    let x = lu_solve(a, b);
    let mut z = d.values().to_vec();
    for (r, &i) in rows.iter().enumerate() {
        z[i] = x[r];
    }
    z
}

pub fn lu_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())
            .unwrap();
        a.swap(col, pivot);
        b.swap(col, pivot);
        assert!(a[col][col].abs() > 1e-14, "singular oracle system");
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            if f != 0.0 {
                for k in col..n {
                    a[row][k] -= f * a[col][k];
                }
                b[row] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for k in row + 1..n {
            acc -= a[row][k] * x[k];
        }
        x[row] = acc / a[row][row];
    }
    x
}

// ---------------------------------------------------------------------------
// Straight-loop metric references
// ---------------------------------------------------------------------------

pub fn ref_mean_depth_error(pred: &[f64], gt: &[f64]) -> f64 {
    let mut max = f64::NEG_INFINITY;
    for &v in gt {
        if v > max {
            max = v;
        }
    }
    assert!(max > 0.0);
    let mut total = 0.0;
    for i in 0..pred.len() {
        total += (pred[i] - gt[i]).abs() / max;
    }
    total / pred.len() as f64 * 100.0
}

pub fn ref_psnr(a: &[f64], b: &[f64], peak: f64) -> f64 {
    let mut sum = 0.0;
    for i in 0..a.len() {
        let d = a[i] - b[i];
        sum += d * d;
    }
    let mse = sum / a.len() as f64;
    if mse == 0.0 {
        return 99.0;
    }
    (10.0 * (peak * peak / mse).log10()).min(99.0)
}

/// Direct per-window Gaussian-weighted SSIM, no separable shortcut.
pub fn ref_ssim(a: &[f64], b: &[f64], w: usize, h: usize) -> f64 {
    const WIN: usize = 11;
    const SIGMA: f64 = 1.5;
    let mut kernel = [[0.0f64; WIN]; WIN];
    let mut total = 0.0;
    for (dy, row) in kernel.iter_mut().enumerate() {
        for (dx, v) in row.iter_mut().enumerate() {
            let (ty, tx) = (dy as f64 - 5.0, dx as f64 - 5.0);
            *v = (-(tx * tx + ty * ty) / (2.0 * SIGMA * SIGMA)).exp();
            total += *v;
        }
    }
    for row in kernel.iter_mut() {
        for v in row.iter_mut() {
            *v /= total;
        }
    }
    let c1 = (0.01f64 * 255.0).powi(2);
    let c2 = (0.03f64 * 255.0).powi(2);
    let mut sum = 0.0;
    let mut count = 0usize;
    for v in 0..=h - WIN {
        for u in 0..=w - WIN {
            let (mut mx, mut my, mut mxx, mut myy, mut mxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for dy in 0..WIN {
                for dx in 0..WIN {
                    let weight = kernel[dy][dx];
                    let i = (v + dy) * w + u + dx;
                    mx += weight * a[i];
                    my += weight * b[i];
                    mxx += weight * a[i] * a[i];
                    myy += weight * b[i] * b[i];
                    mxy += weight * a[i] * b[i];
                }
            }
            let (vx, vy, cxy) = (mxx - mx * mx, myy - my * my, mxy - mx * my);
            sum += ((2.0 * mx * my + c1) * (2.0 * cxy + c2))
                / ((mx * mx + my * my + c1) * (vx + vy + c2));
            count += 1;
        }
    }
    sum / count as f64
}

/// Central-difference unit normals, written as one straight loop.
pub fn ref_normals(z: &[f64], w: usize, h: usize) -> Vec<[f64; 3]> {
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let p = if x == 0 {
                z[y * w + 1] - z[y * w]
            } else if x == w - 1 {
                z[y * w + x] - z[y * w + x - 1]
            } else {
                (z[y * w + x + 1] - z[y * w + x - 1]) / 2.0
            };
            let q = if y == 0 {
                z[w + x] - z[x]
            } else if y == h - 1 {
                z[y * w + x] - z[(y - 1) * w + x]
            } else {
                (z[(y + 1) * w + x] - z[(y - 1) * w + x]) / 2.0
            };
            let norm = (p * p + q * q + 1.0).sqrt();
            out.push([-p / norm, -q / norm, 1.0 / norm]);
        }
    }
    out
}

pub fn ref_mean_angular_error_deg(pred: &[[f64; 3]], gt: &[[f64; 3]]) -> f64 {
    let mut sum = 0.0;
    for i in 0..pred.len() {
        let dot = (pred[i][0] * gt[i][0] + pred[i][1] * gt[i][1] + pred[i][2] * gt[i][2])
            .clamp(-1.0, 1.0);
        sum += dot.acos();
    }
    (sum / pred.len() as f64).to_degrees()
}

pub fn ref_threshold_fraction(pred: &[[f64; 3]], gt: &[[f64; 3]], threshold_deg: f64) -> f64 {
    let mut hits = 0usize;
    for i in 0..pred.len() {
        let dot = (pred[i][0] * gt[i][0] + pred[i][1] * gt[i][1] + pred[i][2] * gt[i][2])
            .clamp(-1.0, 1.0);
        if dot.acos().to_degrees() < threshold_deg {
            hits += 1;
        }
    }
    hits as f64 / pred.len() as f64 * 100.0
}

pub fn ref_composite_loss(pred: &[f64], gt: &[f64], w: usize, h: usize, alpha: f64) -> f64 {
    let np = ref_normals(pred, w, h);
    let ng = ref_normals(gt, w, h);
    let mut sum = 0.0;
    for i in 0..pred.len() {
        let dot =
            (np[i][0] * ng[i][0] + np[i][1] * ng[i][1] + np[i][2] * ng[i][2]).clamp(-1.0, 1.0);
        sum += alpha * (pred[i] - gt[i]).abs() - dot;
    }
    sum / pred.len() as f64
}

/// Normal part of the composite loss only, for derivative probes.
pub fn ref_composite_normal_term(pred: &[f64], gt: &[f64], w: usize, h: usize) -> f64 {
    let np = ref_normals(pred, w, h);
    let ng = ref_normals(gt, w, h);
    let mut sum = 0.0;
    for i in 0..pred.len() {
        let dot =
            (np[i][0] * ng[i][0] + np[i][1] * ng[i][1] + np[i][2] * ng[i][2]).clamp(-1.0, 1.0);
        sum -= dot;
    }
    sum / pred.len() as f64
}
