//! Depth recovery from gradient and normal fields.
//!
//! The objective is the screened least-squares gradient fit
//!
//! ```text
//!   E(z) = Σ_edges ( Δz - g )²  +  μ Σ_pixels ( z - d )²
//! ```
//!
//! discretized with forward differences and homogeneous Neumann boundaries,
//! so the gradient operator's adjoint is the standard 5-point Laplacian. The
//! normal equations `(AᵀWA + μI) z = AᵀW g + μ d` are solved matrix-free by
//! Jacobi-preconditioned conjugate gradients; for `μ = 0` the singular
//! system is deflated against constants and the gauge fixed by anchoring the
//! solution mean to the mean of `d`.
//!
//! Masked pixels are excluded from the system; edges touching them carry
//! weight zero and the output keeps `d`'s value there. With `μ = 0` and a
//! mask that disconnects the valid region, only the global mean is anchored;
//! per-component offsets come out of the solver deterministically but are
//! not individually pinned.

use crate::differential::{normal_to_gradient, Z_FLOOR};
use crate::error::{Error, Result};
use crate::grid::{DepthMap, GradientField, NormalMap};

/// Depth-fidelity weight of the screening term.
pub const DEFAULT_MU: f64 = 0.02;
/// Relative-residual target for conjugate gradients.
pub const DEFAULT_CG_TOLERANCE: f64 = 1e-8;
/// Outer passes of the residual-weighted integration.
pub const DEFAULT_OUTER_ITERS: usize = 3;
/// Scale of the residual-driven edge weights (px/px).
pub const DEFAULT_EDGE_SIGMA: f64 = 1.0;

/// Solver knobs; `max_cg_iters = None` derives `10·sqrt(N)` from the grid.
#[derive(Debug, Clone, Copy)]
pub struct SolverConfig {
    pub mu: f64,
    pub max_cg_iters: Option<usize>,
    pub cg_tolerance: f64,
    pub outer_iters: usize,
    pub edge_sigma: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            mu: DEFAULT_MU,
            max_cg_iters: None,
            cg_tolerance: DEFAULT_CG_TOLERANCE,
            outer_iters: DEFAULT_OUTER_ITERS,
            edge_sigma: DEFAULT_EDGE_SIGMA,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.mu.is_finite() && self.mu >= 0.0) {
            return Err(Error::InvalidConfig(format!("mu {} must be nonnegative", self.mu)));
        }
        if !(self.cg_tolerance > 0.0 && self.cg_tolerance < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "cg_tolerance {} must lie in (0, 1)",
                self.cg_tolerance
            )));
        }
        if self.outer_iters < 1 {
            return Err(Error::InvalidConfig("outer_iters must be at least 1".into()));
        }
        if !(self.edge_sigma.is_finite() && self.edge_sigma > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "edge_sigma {} must be positive",
                self.edge_sigma
            )));
        }
        Ok(())
    }

    fn cg_iteration_cap(&self, unknowns: usize) -> usize {
        self.max_cg_iters
            .unwrap_or_else(|| (10.0 * (unknowns as f64).sqrt()).ceil() as usize)
            .max(1)
    }
}

/// Convergence summary of one solve.
#[derive(Debug, Clone, Copy)]
pub struct SolveReport {
    /// `‖b - A z‖ / ‖b‖` of the normal equations at the returned solution.
    pub final_relative_residual: f64,
    pub cg_iterations_used: usize,
    /// Value of the (unweighted) screened objective at the solution.
    pub energy: f64,
}

/// Sparse grid system over the valid pixels.
struct System {
    width: usize,
    height: usize,
    /// Grid index → system row, `u32::MAX` for excluded pixels.
    sys_of_grid: Vec<u32>,
    /// System row → grid index.
    grid_of_sys: Vec<u32>,
    /// Weights of x-edges `(x, y)-(x+1, y)`, laid out `y·(w-1) + x`.
    wx: Vec<f64>,
    /// Weights of y-edges `(x, y)-(x, y+1)`, laid out `y·w + x`.
    wy: Vec<f64>,
    mu: f64,
}

const EXCLUDED: u32 = u32::MAX;

impl System {
    /// `valid` marks in-mask pixels. Pixels with no usable equation
    /// (μ = 0 and every incident edge weight zero) are excluded as well.
    fn build(
        width: usize,
        height: usize,
        valid: &[bool],
        wx: Vec<f64>,
        wy: Vec<f64>,
        mu: f64,
    ) -> Self {
        let mut sys_of_grid = vec![EXCLUDED; width * height];
        let mut grid_of_sys = Vec::new();
        for y in 0..height {
            for x in 0..width {
                let i = y * width + x;
                if !valid[i] {
                    continue;
                }
                let mut diag = mu;
                if x > 0 && valid[i - 1] {
                    diag += wx[y * (width - 1) + x - 1];
                }
                if x + 1 < width && valid[i + 1] {
                    diag += wx[y * (width - 1) + x];
                }
                if y > 0 && valid[i - width] {
                    diag += wy[(y - 1) * width + x];
                }
                if y + 1 < height && valid[i + width] {
                    diag += wy[y * width + x];
                }
                if diag > 0.0 {
                    sys_of_grid[i] = grid_of_sys.len() as u32;
                    grid_of_sys.push(i as u32);
                }
            }
        }
        Self { width, height, sys_of_grid, grid_of_sys, wx, wy, mu }
    }

    fn unknowns(&self) -> usize {
        self.grid_of_sys.len()
    }

    /// `out = (AᵀWA + μI) v`.
    fn apply(&self, v: &[f64], out: &mut [f64]) {
        let (w, h) = (self.width, self.height);
        for (r, &grid) in self.grid_of_sys.iter().enumerate() {
            let i = grid as usize;
            let (x, y) = (i % w, i / w);
            let vi = v[r];
            let mut acc = self.mu * vi;
            if x > 0 {
                let n = self.sys_of_grid[i - 1];
                if n != EXCLUDED {
                    acc += self.wx[y * (w - 1) + x - 1] * (vi - v[n as usize]);
                }
            }
            if x + 1 < w {
                let n = self.sys_of_grid[i + 1];
                if n != EXCLUDED {
                    acc += self.wx[y * (w - 1) + x] * (vi - v[n as usize]);
                }
            }
            if y > 0 {
                let n = self.sys_of_grid[i - w];
                if n != EXCLUDED {
                    acc += self.wy[(y - 1) * w + x] * (vi - v[n as usize]);
                }
            }
            if y + 1 < h {
                let n = self.sys_of_grid[i + w];
                if n != EXCLUDED {
                    acc += self.wy[y * w + x] * (vi - v[n as usize]);
                }
            }
            out[r] = acc;
        }
    }

    /// `b = AᵀW g + μ d` over system rows.
    fn rhs(&self, gx: &[f64], gy: &[f64], d: &[f64]) -> Vec<f64> {
        let (w, h) = (self.width, self.height);
        let mut b = vec![0.0; self.unknowns()];
        for (r, &grid) in self.grid_of_sys.iter().enumerate() {
            let i = grid as usize;
            let (x, y) = (i % w, i / w);
            let mut acc = self.mu * d[i];
            if x > 0 && self.sys_of_grid[i - 1] != EXCLUDED {
                let e = y * (w - 1) + x - 1;
                acc += self.wx[e] * gx[e];
            }
            if x + 1 < w && self.sys_of_grid[i + 1] != EXCLUDED {
                let e = y * (w - 1) + x;
                acc -= self.wx[e] * gx[e];
            }
            if y > 0 && self.sys_of_grid[i - w] != EXCLUDED {
                let e = (y - 1) * w + x;
                acc += self.wy[e] * gy[e];
            }
            if y + 1 < h && self.sys_of_grid[i + w] != EXCLUDED {
                let e = y * w + x;
                acc -= self.wy[e] * gy[e];
            }
            b[r] = acc;
        }
        b
    }

    fn jacobi_diagonal(&self) -> Vec<f64> {
        let (w, h) = (self.width, self.height);
        let mut diag = vec![0.0; self.unknowns()];
        for (r, &grid) in self.grid_of_sys.iter().enumerate() {
            let i = grid as usize;
            let (x, y) = (i % w, i / w);
            let mut acc = self.mu;
            if x > 0 && self.sys_of_grid[i - 1] != EXCLUDED {
                acc += self.wx[y * (w - 1) + x - 1];
            }
            if x + 1 < w && self.sys_of_grid[i + 1] != EXCLUDED {
                acc += self.wx[y * (w - 1) + x];
            }
            if y > 0 && self.sys_of_grid[i - w] != EXCLUDED {
                acc += self.wy[(y - 1) * w + x];
            }
            if y + 1 < h && self.sys_of_grid[i + w] != EXCLUDED {
                acc += self.wy[y * w + x];
            }
            diag[r] = acc;
        }
        diag
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn subtract_mean(v: &mut [f64]) {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    for x in v.iter_mut() {
        *x -= mean;
    }
}

/// Jacobi-preconditioned CG. With `μ = 0` the operator annihilates
/// constants, so the preconditioned residual is projected onto the
/// zero-mean subspace each iteration (deflation); the returned solution's
/// gauge is fixed by the caller.
fn pcg(system: &System, b: &[f64], tol: f64, max_iters: usize) -> (Vec<f64>, f64, usize) {
    let n = b.len();
    let deflate = system.mu == 0.0;
    let mut b = b.to_vec();
    if deflate {
        subtract_mean(&mut b);
    }
    let b_norm = dot(&b, &b).sqrt();
    let mut x = vec![0.0; n];
    if b_norm == 0.0 {
        return (x, 0.0, 0);
    }

    let diag = system.jacobi_diagonal();
    let mut r = b.clone();
    let mut z: Vec<f64> = r.iter().zip(&diag).map(|(ri, di)| ri / di).collect();
    if deflate {
        subtract_mean(&mut z);
    }
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    let mut iterations = 0usize;

    for _ in 0..max_iters {
        if dot(&r, &r).sqrt() <= tol * b_norm {
            break;
        }
        iterations += 1;
        system.apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            break; // numerically exhausted search direction
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        for i in 0..n {
            z[i] = r[i] / diag[i];
        }
        if deflate {
            subtract_mean(&mut z);
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }

    // Report the true residual, not the recurrence's drifted copy.
    system.apply(&x, &mut ap);
    let final_res: f64 = b
        .iter()
        .zip(&ap)
        .map(|(bi, ai)| (bi - ai) * (bi - ai))
        .sum::<f64>()
        .sqrt();
    (x, final_res / b_norm, iterations)
}

fn valid_from(d: &DepthMap) -> Vec<bool> {
    match d.mask() {
        Some(m) => m.to_vec(),
        None => vec![true; d.width() * d.height()],
    }
}

/// Edge-target arrays (forward-difference convention) taken from a gradient
/// field: x-edges use `p` at the left pixel, y-edges use `q` at the top one.
fn edge_targets(g: &GradientField) -> (Vec<f64>, Vec<f64>) {
    let (w, h) = (g.width(), g.height());
    let mut gx = vec![0.0; (w - 1) * h];
    let mut gy = vec![0.0; w * (h - 1)];
    for y in 0..h {
        for x in 0..w - 1 {
            gx[y * (w - 1) + x] = g.get(x, y)[0];
        }
    }
    for y in 0..h - 1 {
        for x in 0..w {
            gy[y * w + x] = g.get(x, y)[1];
        }
    }
    (gx, gy)
}

/// Unweighted screened objective at `z`.
#[allow(clippy::too_many_arguments)]
fn energy(
    z: &[f64],
    valid: &[bool],
    gx: &[f64],
    gy: &[f64],
    d: &[f64],
    mu: f64,
    width: usize,
    height: usize,
) -> f64 {
    let mut e = 0.0;
    for y in 0..height {
        for x in 0..width - 1 {
            let i = y * width + x;
            if valid[i] && valid[i + 1] {
                let r = z[i + 1] - z[i] - gx[y * (width - 1) + x];
                e += r * r;
            }
        }
    }
    for y in 0..height - 1 {
        for x in 0..width {
            let i = y * width + x;
            if valid[i] && valid[i + width] {
                let r = z[i + width] - z[i] - gy[i];
                e += r * r;
            }
        }
    }
    if mu > 0.0 {
        for (i, &v) in valid.iter().enumerate() {
            if v {
                let r = z[i] - d[i];
                e += mu * r * r;
            }
        }
    }
    e
}

fn solve_weighted(
    gx: &[f64],
    gy: &[f64],
    d: &DepthMap,
    valid: &[bool],
    wx: Vec<f64>,
    wy: Vec<f64>,
    cfg: &SolverConfig,
) -> (Vec<f64>, SolveReport) {
    let (w, h) = (d.width(), d.height());
    let system = System::build(w, h, valid, wx, wy, cfg.mu);
    let b = system.rhs(gx, gy, d.values());
    let cap = cfg.cg_iteration_cap(system.unknowns());
    let (mut z_sys, residual, iters) = pcg(&system, &b, cfg.cg_tolerance, cap);

    if cfg.mu == 0.0 {
        // Gauge: anchor the solution mean to the data mean.
        let mut d_mean = 0.0;
        let mut z_mean = 0.0;
        for (r, &grid) in system.grid_of_sys.iter().enumerate() {
            d_mean += d.values()[grid as usize];
            z_mean += z_sys[r];
        }
        let shift = (d_mean - z_mean) / system.unknowns() as f64;
        for v in z_sys.iter_mut() {
            *v += shift;
        }
    }

    // Excluded pixels pass the data value through.
    let mut z = d.values().to_vec();
    for (r, &grid) in system.grid_of_sys.iter().enumerate() {
        z[grid as usize] = z_sys[r];
    }
    let e = energy(&z, valid, gx, gy, d.values(), cfg.mu, w, h);
    (
        z,
        SolveReport {
            final_relative_residual: residual,
            cg_iterations_used: iters,
            energy: e,
        },
    )
}

fn check_same_shape(
    context: &'static str,
    gw: usize,
    gh: usize,
    d: &DepthMap,
) -> Result<()> {
    if gw != d.width() || gh != d.height() {
        return Err(Error::dims(context, (gw, gh), (d.width(), d.height())));
    }
    Ok(())
}

/// Minimizes `Σ (Δz - g)² + μ Σ (z - d)²` over the valid pixels.
pub fn screened_poisson(
    g: &GradientField,
    d: &DepthMap,
    cfg: &SolverConfig,
) -> Result<(DepthMap, SolveReport)> {
    cfg.validate()?;
    check_same_shape("screened_poisson", g.width(), g.height(), d)?;
    let valid = valid_from(d);
    let (gx, gy) = edge_targets(g);
    let (w, h) = (d.width(), d.height());
    let (z, report) = solve_weighted(
        &gx,
        &gy,
        d,
        &valid,
        vec![1.0; (w - 1) * h],
        vec![1.0; w * (h - 1)],
        cfg,
    );
    let out = DepthMap::with_mask(w, h, z, d.mask().map(<[bool]>::to_vec))?;
    Ok((out, report))
}

/// Iterative normal integration: converts `n` to slopes, then runs
/// `outer_iters` screened solves where each edge is reweighted by
/// `exp(-(r/edge_sigma)²)` with `r` the previous round's residual
/// `|Δz - g|` on that edge. Round one uses unit weights, so a single outer
/// iteration reduces exactly to [`screened_poisson`].
pub fn integrate_normals(
    n: &NormalMap,
    d_init: &DepthMap,
    cfg: &SolverConfig,
) -> Result<(DepthMap, SolveReport)> {
    cfg.validate()?;
    check_same_shape("integrate_normals", n.width(), n.height(), d_init)?;
    let (g, _floored) = normal_to_gradient(n, Z_FLOOR);
    let valid = valid_from(d_init);
    let (gx, gy) = edge_targets(&g);
    let (w, h) = (d_init.width(), d_init.height());

    let mut wx = vec![1.0; (w - 1) * h];
    let mut wy = vec![1.0; w * (h - 1)];
    let mut best: Option<(Vec<f64>, SolveReport)> = None;
    for round in 0..cfg.outer_iters {
        if round > 0 {
            let z = &best.as_ref().unwrap().0;
            let inv_sigma = 1.0 / cfg.edge_sigma;
            for y in 0..h {
                for x in 0..w - 1 {
                    let i = y * w + x;
                    let e = y * (w - 1) + x;
                    let r = (z[i + 1] - z[i] - gx[e]).abs() * inv_sigma;
                    wx[e] = (-r * r).exp();
                }
            }
            for y in 0..h - 1 {
                for x in 0..w {
                    let i = y * w + x;
                    let r = (z[i + w] - z[i] - gy[i]).abs() * inv_sigma;
                    wy[i] = (-r * r).exp();
                }
            }
        }
        best = Some(solve_weighted(&gx, &gy, d_init, &valid, wx.clone(), wy.clone(), cfg));
    }
    let (z, report) = best.expect("outer_iters >= 1");
    let out = DepthMap::with_mask(w, h, z, d_init.mask().map(<[bool]>::to_vec))?;
    Ok((out, report))
}

/// Depth-constrained refinement: injects the detail normals' gradients into
/// `rough` under the screening weight `mu`.
pub fn refine_depth_label(
    rough: &DepthMap,
    detail_normal: &NormalMap,
    mu: f64,
) -> Result<(DepthMap, SolveReport)> {
    refine_depth_label_with(rough, detail_normal, &SolverConfig { mu, ..SolverConfig::default() })
}

/// [`refine_depth_label`] with full control over the solver knobs.
pub fn refine_depth_label_with(
    rough: &DepthMap,
    detail_normal: &NormalMap,
    cfg: &SolverConfig,
) -> Result<(DepthMap, SolveReport)> {
    cfg.validate()?;
    check_same_shape("refine_depth_label", detail_normal.width(), detail_normal.height(), rough)?;
    let (g, _floored) = normal_to_gradient(detail_normal, Z_FLOOR);
    screened_poisson(&g, rough, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::differential::{depth_to_gradient, depth_to_normal, DiffScheme};
    use crate::synth;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Brute-force oracle: assemble the normal equations densely and solve
    /// by LU with partial pivoting. For μ = 0 the mean-anchor gauge is
    /// imposed through a Lagrange row. Independent of the CG path.
    #[allow(clippy::needless_range_loop)]
    fn dense_reference(g: &GradientField, d: &DepthMap, mu: f64) -> Vec<f64> {
        let (w, h) = (d.width(), d.height());
        let valid: Vec<bool> = match d.mask() {
            Some(m) => m.to_vec(),
            None => vec![true; w * h],
        };
        let rows: Vec<usize> =
            (0..w * h).filter(|&i| valid[i]).collect();
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

    #[allow(clippy::needless_range_loop)]
    fn lu_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
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

    fn tight_cfg(mu: f64) -> SolverConfig {
        SolverConfig {
            mu,
            max_cg_iters: Some(2000),
            cg_tolerance: 1e-13,
            ..SolverConfig::default()
        }
    }

    fn random_instance(rng: &mut ChaCha8Rng, w: usize, h: usize) -> (GradientField, DepthMap) {
        let g = GradientField::new(
            w,
            h,
            (0..w * h).map(|_| [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]).collect(),
        )
        .unwrap();
        let d = DepthMap::new(w, h, (0..w * h).map(|_| rng.random_range(-1.0..1.0)).collect())
            .unwrap();
        (g, d)
    }

    #[test]
    fn zero_gradient_constant_data_is_stationary() {
        let g = GradientField::zero(6, 5);
        let d = DepthMap::constant(6, 5, 3.5).unwrap();
        let (z, report) =
            screened_poisson(&g, &d, &SolverConfig { mu: 0.5, ..tight_cfg(0.5) }).unwrap();
        for &v in z.values() {
            assert!((v - 3.5).abs() < 1e-10);
        }
        assert!(report.energy < 1e-18);
    }

    #[test]
    fn consistent_plane_recovered_to_machine_precision() {
        let (w, h) = (9, 7);
        let values: Vec<f64> =
            (0..w * h).map(|i| 2.0 * (i % w) as f64 + 3.0 * (i / w) as f64).collect();
        let d = DepthMap::new(w, h, values).unwrap();
        let g = depth_to_gradient(&d, DiffScheme::Forward);
        for mu in [0.0, 0.02, 1.0] {
            let (z, _) = screened_poisson(&g, &d, &tight_cfg(mu)).unwrap();
            let worst = z
                .values()
                .iter()
                .zip(d.values())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f64, f64::max);
            assert!(worst < 1e-9, "plane error {worst} at mu={mu}");
        }
    }

    #[test]
    fn matches_dense_oracle_on_small_grids() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for case in 0..20 {
            let w = rng.random_range(2..=6);
            let h = rng.random_range(2..=6);
            let (g, d) = random_instance(&mut rng, w, h);
            for mu in [0.0, 0.02, 1.0] {
                let (z, _) = screened_poisson(&g, &d, &tight_cfg(mu)).unwrap();
                let reference = dense_reference(&g, &d, mu);
                let worst = z
                    .values()
                    .iter()
                    .zip(&reference)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0f64, f64::max);
                assert!(worst < 1e-8, "case {case} mu={mu}: max abs diff {worst}");
            }
        }
    }

    #[test]
    fn matches_dense_oracle_with_mask() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let (w, h) = (5, 5);
            let (g, d_raw) = random_instance(&mut rng, w, h);
            let mask: Vec<bool> = (0..w * h).map(|_| rng.random_range(0.0..1.0) > 0.25).collect();
            if !mask.iter().any(|&m| m) {
                continue;
            }
            let d = DepthMap::with_mask(w, h, d_raw.values().to_vec(), Some(mask)).unwrap();
            let (z, _) = screened_poisson(&g, &d, &tight_cfg(0.02)).unwrap();
            let reference = dense_reference(&g, &d, 0.02);
            let worst = z
                .values()
                .iter()
                .zip(&reference)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f64, f64::max);
            assert!(worst < 1e-8, "masked case: max abs diff {worst}");
        }
    }

    #[test]
    fn single_outer_iteration_reduces_to_screened_poisson() {
        let z = synth::gaussian_bump(24, 20, 12.0, 5.0);
        let n = depth_to_normal(&z, DiffScheme::Forward);
        let d = DepthMap::constant(24, 20, 1.0).unwrap();
        let cfg = SolverConfig { outer_iters: 1, ..SolverConfig::default() };
        let (a, ra) = integrate_normals(&n, &d, &cfg).unwrap();
        let (g, _) = normal_to_gradient(&n, Z_FLOOR);
        let (b, rb) = screened_poisson(&g, &d, &cfg).unwrap();
        assert_eq!(a.values(), b.values());
        assert_eq!(ra.cg_iterations_used, rb.cg_iterations_used);
        assert_eq!(ra.energy, rb.energy);
    }

    #[test]
    fn flat_normals_and_zero_data_stay_zero() {
        let n = NormalMap::flat(8, 8);
        let d = DepthMap::constant(8, 8, 0.0).unwrap();
        for outer in [1, 3] {
            let cfg = SolverConfig { outer_iters: outer, ..SolverConfig::default() };
            let (z, report) = integrate_normals(&n, &d, &cfg).unwrap();
            assert!(z.values().iter().all(|&v| v == 0.0));
            assert_eq!(report.cg_iterations_used, 0);
        }
    }

    /// Plateau RMS on the two-plateau fixture, excluding the two columns
    /// adjacent to the jump.
    fn plateau_rms(z: &DepthMap, truth: &DepthMap) -> f64 {
        let (w, h) = (z.width(), z.height());
        let half = w / 2;
        let mut sum = 0.0;
        let mut count = 0usize;
        for y in 0..h {
            for x in 0..w {
                if x + 1 == half || x == half {
                    continue;
                }
                let e = z.get(x, y) - truth.get(x, y);
                sum += e * e;
                count += 1;
            }
        }
        (sum / count as f64).sqrt()
    }

    #[test]
    fn edge_sharpening_improves_plateaus() {
        // Truth is a hard 40 px step; the gradient field caps the jump at 4,
        // mimicking attenuated occlusion normals. Reweighting should drop the
        // inconsistent jump edges and let the data term pin the plateaus.
        let (w, h, step) = (64, 16, 40.0);
        let truth = synth::two_plateaus(w, h, step);
        let mut g = depth_to_gradient(&truth, DiffScheme::Forward);
        for v in g.vectors_mut() {
            v[0] = v[0].clamp(-4.0, 4.0);
            v[1] = v[1].clamp(-4.0, 4.0);
        }
        let n = crate::differential::gradient_to_normal(&g);
        let mut rms = Vec::new();
        for outer in 1..=3 {
            let cfg = SolverConfig { outer_iters: outer, ..SolverConfig::default() };
            let (z, _) = integrate_normals(&n, &truth, &cfg).unwrap();
            rms.push(plateau_rms(&z, &truth));
        }
        assert!(rms[1] < rms[0], "round 2 ({}) not below round 1 ({})", rms[1], rms[0]);
        assert!(rms[2] <= rms[1] + 1e-9, "round 3 ({}) above round 2 ({})", rms[2], rms[1]);
        assert!(rms[2] < rms[0]);
    }

    #[test]
    fn refine_is_consistent_on_matching_inputs() {
        let rough = synth::gaussian_bump(32, 32, 20.0, 6.0);
        let detail = depth_to_normal(&rough, DiffScheme::Forward);
        let (z, _) = refine_depth_label(&rough, &detail, DEFAULT_MU).unwrap();
        let rms = (z
            .values()
            .iter()
            .zip(rough.values())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            / z.values().len() as f64)
            .sqrt();
        assert!(rms < 1e-3, "consistent refine drifted rms {rms}");
    }

    #[test]
    fn refine_with_huge_mu_returns_the_data() {
        let rough = synth::gaussian_bump(24, 24, 20.0, 5.0);
        let detail = NormalMap::flat(24, 24); // fights the data term
        let (z, _) = refine_depth_label(&rough, &detail, 1e6).unwrap();
        let rms = (z
            .values()
            .iter()
            .zip(rough.values())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            / z.values().len() as f64)
            .sqrt();
        assert!(rms < 1e-3, "large-mu refine rms {rms}");
    }

    #[test]
    fn default_mu_matches_published_value() {
        assert_eq!(DEFAULT_MU, 0.02);
    }

    #[test]
    fn solution_energy_no_worse_than_data_energy() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let (g, d) = random_instance(&mut rng, 8, 8);
            let cfg = SolverConfig::default();
            let (_, report) = screened_poisson(&g, &d, &cfg).unwrap();
            let (gx, gy) = edge_targets(&g);
            let valid = vec![true; 64];
            let data_energy = energy(d.values(), &valid, &gx, &gy, d.values(), cfg.mu, 8, 8);
            assert!(report.energy <= data_energy + 1e-12);
        }
    }

    #[test]
    fn report_satisfies_requested_tolerance() {
        let (g, d) = random_instance(&mut ChaCha8Rng::seed_from_u64(5), 12, 10);
        let cfg = SolverConfig::default();
        let (_, report) = screened_poisson(&g, &d, &cfg).unwrap();
        assert!(report.final_relative_residual <= cfg.cg_tolerance);
        assert!(report.cg_iterations_used > 0);
    }

    #[test]
    fn shift_equivariance_in_the_data() {
        let (g, d) = random_instance(&mut ChaCha8Rng::seed_from_u64(9), 10, 9);
        let shifted = d.map_values(|v| v + 7.25);
        let cfg = tight_cfg(0.02);
        let (a, _) = screened_poisson(&g, &d, &cfg).unwrap();
        let (b, _) = screened_poisson(&g, &shifted, &cfg).unwrap();
        let worst = a
            .values()
            .iter()
            .zip(b.values())
            .map(|(x, y)| (x + 7.25 - y).abs())
            .fold(0.0f64, f64::max);
        assert!(worst < 1e-9, "shift equivariance violated by {worst}");
    }

    #[test]
    fn gaussian_bump_round_trip() {
        let z = synth::gaussian_bump(128, 128, 40.0, 20.0);
        let n = depth_to_normal(&z, DiffScheme::Forward);
        let d = DepthMap::constant(128, 128, z.mean()).unwrap();
        let cfg = SolverConfig { mu: 0.0, ..SolverConfig::default() };
        let (out, _) = integrate_normals(&n, &d, &cfg).unwrap();
        let z_mean = z.mean();
        let out_mean = out.mean();
        let rmse = (z
            .values()
            .iter()
            .zip(out.values())
            .map(|(a, b)| {
                let e = (a - z_mean) - (b - out_mean);
                e * e
            })
            .sum::<f64>()
            / (128.0 * 128.0))
            .sqrt();
        assert!(rmse < 0.1, "round-trip rmse {rmse}");
    }

    #[test]
    fn config_validation() {
        let bad = SolverConfig { mu: -1.0, ..SolverConfig::default() };
        assert!(bad.validate().is_err());
        let bad = SolverConfig { cg_tolerance: 0.0, ..SolverConfig::default() };
        assert!(bad.validate().is_err());
        let bad = SolverConfig { outer_iters: 0, ..SolverConfig::default() };
        assert!(bad.validate().is_err());
        let bad = SolverConfig { edge_sigma: 0.0, ..SolverConfig::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let g = GradientField::zero(4, 4);
        let d = DepthMap::constant(5, 4, 0.0).unwrap();
        assert!(screened_poisson(&g, &d, &SolverConfig::default()).is_err());
    }
}
