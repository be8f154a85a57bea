//! Depth and normal evaluation metrics, per-image reports, and mean-rank
//! aggregation across methods.
//!
//! PSNR and SSIM operate on grayscale planes normalized to [0, 255]: depth
//! maps per-image min-max normalized (which makes the depth scores
//! scale-free), normal maps through the channel encoding scaled by 255 with
//! the three channel scores averaged. Normals enter every metric via central
//! differences on the depth maps.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::differential::{depth_to_normal, DiffScheme};
use crate::error::{Error, Result};
use crate::grid::{encode_normals, DepthMap, EncodedNormalMap, NormalMap};

/// Display peak used throughout.
pub const PSNR_PEAK: f64 = 255.0;
/// Numeric stand-in for infinite PSNR so reports stay numeric.
pub const PSNR_CAP_DB: f64 = 99.0;
/// Depth weight of the composite loss during early training.
pub const DEFAULT_ALPHA: f64 = 0.1;
/// SSIM window and Gaussian width.
pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;

// ---------------------------------------------------------------------------
// Planes
// ---------------------------------------------------------------------------

/// Grayscale raster in display units, the domain of [`psnr`] and [`ssim`].
#[derive(Debug, Clone)]
pub struct Plane {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
    pub mask: Option<Vec<bool>>,
}

impl Plane {
    pub fn new(
        width: usize,
        height: usize,
        data: Vec<f64>,
        mask: Option<Vec<bool>>,
    ) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::InvalidDimensions {
                width,
                height,
                message: "plane buffer length does not match dimensions",
            });
        }
        crate::grid::check_mask(&mask, width, height)?;
        Ok(Self { width, height, data, mask })
    }

    /// Min-max normalization of a depth map onto [0, 255] over the given
    /// validity set (the visualization convention). Constant maps become all
    /// zeros; masked pixels are zeroed and keep their mask.
    pub fn from_depth_normalized(d: &DepthMap, mask: Option<&[bool]>) -> Plane {
        let n = d.width() * d.height();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            if mask.is_none_or(|m| m[i]) {
                lo = lo.min(d.values()[i]);
                hi = hi.max(d.values()[i]);
            }
        }
        let range = hi - lo;
        let data = (0..n)
            .map(|i| {
                if mask.is_none_or(|m| m[i]) && range > 0.0 {
                    (d.values()[i] - lo) / range * 255.0
                } else {
                    0.0
                }
            })
            .collect();
        Plane {
            width: d.width(),
            height: d.height(),
            data,
            mask: mask.map(<[bool]>::to_vec),
        }
    }

    /// One channel of an encoded normal map scaled by 255.
    pub fn from_encoded_channel(
        e: &EncodedNormalMap,
        channel: usize,
        mask: Option<&[bool]>,
    ) -> Plane {
        let data = e.channels().iter().map(|c| c[channel] * 255.0).collect();
        Plane {
            width: e.width(),
            height: e.height(),
            data,
            mask: mask.map(<[bool]>::to_vec),
        }
    }

    fn joint_mask(&self, other: &Plane) -> Option<Vec<bool>> {
        match (&self.mask, &other.mask) {
            (None, None) => None,
            (a, b) => {
                let n = self.width * self.height;
                let mut out = vec![true; n];
                if let Some(m) = a {
                    for i in 0..n {
                        out[i] &= m[i];
                    }
                }
                if let Some(m) = b {
                    for i in 0..n {
                        out[i] &= m[i];
                    }
                }
                Some(out)
            }
        }
    }
}

fn check_plane_shapes(context: &'static str, a: &Plane, b: &Plane) -> Result<()> {
    if a.width != b.width || a.height != b.height {
        return Err(Error::dims(context, (a.width, a.height), (b.width, b.height)));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Scalar metrics
// ---------------------------------------------------------------------------

/// Mean depth error percentage: `100 · mean(|d - d*| / max(d*))` over valid
/// pixels, the per-image normalizer being the ground-truth maximum.
pub fn mean_depth_error(pred: &DepthMap, gt: &DepthMap) -> Result<f64> {
    if !pred.same_shape(gt) {
        return Err(Error::dims(
            "mean_depth_error",
            (pred.width(), pred.height()),
            (gt.width(), gt.height()),
        ));
    }
    let mask = pred.joint_mask(gt);
    let n = pred.width() * pred.height();
    let mut gt_max = f64::NEG_INFINITY;
    for i in 0..n {
        if mask.as_ref().is_none_or(|m| m[i]) {
            gt_max = gt_max.max(gt.values()[i]);
        }
    }
    if gt_max <= 0.0 {
        return Err(Error::UndefinedNormalizer);
    }
    let mut sum = 0.0;
    let mut count = 0usize;
    for i in 0..n {
        if mask.as_ref().is_none_or(|m| m[i]) {
            sum += (pred.values()[i] - gt.values()[i]).abs() / gt_max;
            count += 1;
        }
    }
    Ok(sum / count as f64 * 100.0)
}

/// `10·log10(peak²/MSE)` over valid pixels, capped at [`PSNR_CAP_DB`]
/// (bit-identical inputs have zero MSE and report the cap).
pub fn psnr(a: &Plane, b: &Plane, peak: f64) -> Result<f64> {
    check_plane_shapes("psnr", a, b)?;
    let mask = a.joint_mask(b);
    let mut sum = 0.0;
    let mut count = 0usize;
    for i in 0..a.data.len() {
        if mask.as_ref().is_none_or(|m| m[i]) {
            let d = a.data[i] - b.data[i];
            sum += d * d;
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::EmptyMask);
    }
    let mse = sum / count as f64;
    if mse == 0.0 {
        return Ok(PSNR_CAP_DB);
    }
    Ok((10.0 * (peak * peak / mse).log10()).min(PSNR_CAP_DB))
}

fn gaussian_kernel() -> [f64; SSIM_WINDOW] {
    let mut k = [0.0; SSIM_WINDOW];
    let half = (SSIM_WINDOW / 2) as f64;
    let mut sum = 0.0;
    for (i, v) in k.iter_mut().enumerate() {
        let t = i as f64 - half;
        *v = (-t * t / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
        sum += *v;
    }
    for v in k.iter_mut() {
        *v /= sum;
    }
    k
}

/// Horizontal then vertical valid convolution with the separable window.
fn filter_valid(data: &[f64], width: usize, height: usize, k: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let ow = width - SSIM_WINDOW + 1;
    let oh = height - SSIM_WINDOW + 1;
    let mut horizontal = vec![0.0; ow * height];
    for y in 0..height {
        for u in 0..ow {
            let mut acc = 0.0;
            for (t, &kt) in k.iter().enumerate() {
                acc += kt * data[y * width + u + t];
            }
            horizontal[y * ow + u] = acc;
        }
    }
    let mut out = vec![0.0; ow * oh];
    for v in 0..oh {
        for u in 0..ow {
            let mut acc = 0.0;
            for (t, &kt) in k.iter().enumerate() {
                acc += kt * horizontal[(v + t) * ow + u];
            }
            out[v * ow + u] = acc;
        }
    }
    out
}

/// Mean local SSIM with an 11×11 Gaussian window (σ = 1.5, K1 = 0.01,
/// K2 = 0.03, L = 255), averaged over fully interior windows. With masks,
/// a window counts when its center pixel is valid and its local statistics
/// are taken over the valid pixels only (weights renormalized), so masked
/// pixels never influence the score.
pub fn ssim(a: &Plane, b: &Plane) -> Result<f64> {
    check_plane_shapes("ssim", a, b)?;
    if a.width < SSIM_WINDOW || a.height < SSIM_WINDOW {
        return Err(Error::ImageTooSmall {
            width: a.width,
            height: a.height,
            window: SSIM_WINDOW,
        });
    }
    let c1 = (SSIM_K1 * PSNR_PEAK) * (SSIM_K1 * PSNR_PEAK);
    let c2 = (SSIM_K2 * PSNR_PEAK) * (SSIM_K2 * PSNR_PEAK);
    let mask = a.joint_mask(b);
    match mask {
        None => {
            let k = gaussian_kernel();
            let (w, h) = (a.width, a.height);
            let xx: Vec<f64> = a.data.iter().map(|v| v * v).collect();
            let yy: Vec<f64> = b.data.iter().map(|v| v * v).collect();
            let xy: Vec<f64> = a.data.iter().zip(&b.data).map(|(x, y)| x * y).collect();
            let mx = filter_valid(&a.data, w, h, &k);
            let my = filter_valid(&b.data, w, h, &k);
            let mxx = filter_valid(&xx, w, h, &k);
            let myy = filter_valid(&yy, w, h, &k);
            let mxy = filter_valid(&xy, w, h, &k);
            let mut sum = 0.0;
            for i in 0..mx.len() {
                let vx = mxx[i] - mx[i] * mx[i];
                let vy = myy[i] - my[i] * my[i];
                let cxy = mxy[i] - mx[i] * my[i];
                let num = (2.0 * (mx[i] * my[i]) + c1) * (2.0 * cxy + c2);
                let den = (mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2);
                sum += num / den;
            }
            Ok(sum / mx.len() as f64)
        }
        Some(mask) => ssim_masked(a, b, &mask, c1, c2),
    }
}

fn ssim_masked(a: &Plane, b: &Plane, mask: &[bool], c1: f64, c2: f64) -> Result<f64> {
    let k = gaussian_kernel();
    let (w, h) = (a.width, a.height);
    let half = SSIM_WINDOW / 2;
    let mut sum = 0.0;
    let mut windows = 0usize;
    for v in 0..=h - SSIM_WINDOW {
        for u in 0..=w - SSIM_WINDOW {
            if !mask[(v + half) * w + u + half] {
                continue;
            }
            let mut weight_total = 0.0;
            let mut mx = 0.0;
            let mut my = 0.0;
            let mut mxx = 0.0;
            let mut myy = 0.0;
            let mut mxy = 0.0;
            for dy in 0..SSIM_WINDOW {
                for dx in 0..SSIM_WINDOW {
                    let i = (v + dy) * w + u + dx;
                    if !mask[i] {
                        continue;
                    }
                    let weight = k[dy] * k[dx];
                    let (x, y) = (a.data[i], b.data[i]);
                    weight_total += weight;
                    mx += weight * x;
                    my += weight * y;
                    mxx += weight * x * x;
                    myy += weight * y * y;
                    mxy += weight * x * y;
                }
            }
            mx /= weight_total;
            my /= weight_total;
            mxx /= weight_total;
            myy /= weight_total;
            mxy /= weight_total;
            let vx = mxx - mx * mx;
            let vy = myy - my * my;
            let cxy = mxy - mx * my;
            let num = (2.0 * (mx * my) + c1) * (2.0 * cxy + c2);
            let den = (mx * mx + my * my + c1) * (vx + vy + c2);
            sum += num / den;
            windows += 1;
        }
    }
    if windows == 0 {
        return Err(Error::EmptyMask);
    }
    Ok(sum / windows as f64)
}

#[inline]
fn normal_dot(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    // Bit-identical vectors have an exact dot product of 1; the clamp guards
    // floating-point spill on nearly parallel pairs.
    if a == b {
        return 1.0;
    }
    (a[0] * b[0] + a[1] * b[1] + a[2] * b[2]).clamp(-1.0, 1.0)
}

/// Mean `arccos(n · n*)` in degrees over valid pixels.
pub fn normal_angular_error(
    pred: &NormalMap,
    gt: &NormalMap,
    mask: Option<&[bool]>,
) -> Result<f64> {
    if !pred.same_shape(gt) {
        return Err(Error::dims(
            "normal_angular_error",
            (pred.width(), pred.height()),
            (gt.width(), gt.height()),
        ));
    }
    let mut sum = 0.0;
    let mut count = 0usize;
    for (i, (a, b)) in pred.vectors().iter().zip(gt.vectors()).enumerate() {
        if mask.is_none_or(|m| m[i]) {
            sum += normal_dot(a, b).acos();
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::EmptyMask);
    }
    Ok((sum / count as f64).to_degrees())
}

/// Percentage of valid pixels with angular error strictly below the
/// threshold (degrees).
pub fn angular_threshold_fraction(
    pred: &NormalMap,
    gt: &NormalMap,
    threshold_deg: f64,
    mask: Option<&[bool]>,
) -> Result<f64> {
    if !pred.same_shape(gt) {
        return Err(Error::dims(
            "angular_threshold_fraction",
            (pred.width(), pred.height()),
            (gt.width(), gt.height()),
        ));
    }
    if threshold_deg.is_nan() || threshold_deg <= 0.0 {
        return Err(Error::InvalidConfig(format!(
            "threshold {threshold_deg} must be positive"
        )));
    }
    let mut hits = 0usize;
    let mut count = 0usize;
    for (i, (a, b)) in pred.vectors().iter().zip(gt.vectors()).enumerate() {
        if mask.is_none_or(|m| m[i]) {
            if normal_dot(a, b).acos().to_degrees() < threshold_deg {
                hits += 1;
            }
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::EmptyMask);
    }
    Ok(hits as f64 / count as f64 * 100.0)
}

/// Pixels whose central-difference stencil stays inside the valid set; only
/// these carry trustworthy derived normals on masked inputs.
fn stencil_mask(mask: &[bool], width: usize, height: usize) -> Vec<bool> {
    let mut out = vec![false; mask.len()];
    for y in 0..height {
        for x in 0..width {
            let i = y * width + x;
            if !mask[i] {
                continue;
            }
            let xs: [usize; 2] = if x == 0 {
                [0, 1]
            } else if x == width - 1 {
                [width - 2, width - 1]
            } else {
                [x - 1, x + 1]
            };
            let ys: [usize; 2] = if y == 0 {
                [0, 1]
            } else if y == height - 1 {
                [height - 2, height - 1]
            } else {
                [y - 1, y + 1]
            };
            if xs.iter().all(|&nx| mask[y * width + nx])
                && ys.iter().all(|&ny| mask[ny * width + x])
            {
                out[i] = true;
            }
        }
    }
    out
}

/// Masked values zeroed so finite differences never touch garbage.
fn sanitized(d: &DepthMap, mask: Option<&[bool]>) -> DepthMap {
    match mask {
        None => d.clone(),
        Some(m) => {
            let values = d
                .values()
                .iter()
                .enumerate()
                .map(|(i, &v)| if m[i] { v } else { 0.0 })
                .collect();
            DepthMap::new(d.width(), d.height(), values).expect("sanitized map is finite")
        }
    }
}

/// Composite depth + normal-alignment loss:
/// `mean( α·|d_pred - d_gt| - n_pred · n_gt )`, normals by central
/// differences on the two depth maps. Equal depths score exactly -1.
pub fn composite_loss(pred: &DepthMap, gt: &DepthMap, alpha: f64) -> Result<f64> {
    if !pred.same_shape(gt) {
        return Err(Error::dims(
            "composite_loss",
            (pred.width(), pred.height()),
            (gt.width(), gt.height()),
        ));
    }
    let joint = pred.joint_mask(gt);
    let counted: Option<Vec<bool>> = joint
        .as_ref()
        .map(|m| stencil_mask(m, pred.width(), pred.height()));
    let n_pred = depth_to_normal(&sanitized(pred, joint.as_deref()), DiffScheme::Central);
    let n_gt = depth_to_normal(&sanitized(gt, joint.as_deref()), DiffScheme::Central);
    let mut sum = 0.0;
    let mut count = 0usize;
    for i in 0..pred.values().len() {
        if counted.as_ref().is_none_or(|m| m[i]) {
            let depth_term = alpha * (pred.values()[i] - gt.values()[i]).abs();
            let dot = normal_dot(&n_pred.vectors()[i], &n_gt.vectors()[i]);
            sum += depth_term - dot;
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::EmptyMask);
    }
    Ok(sum / count as f64)
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

/// The eight per-image metric values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairMetrics {
    pub eps_d: f64,
    pub depth_psnr: f64,
    pub depth_ssim: f64,
    pub eps_n: f64,
    pub normal_psnr: f64,
    pub normal_ssim: f64,
    pub frac_11_25: f64,
    pub frac_22_5: f64,
}

/// Computes the full metric suite for one prediction/ground-truth pair.
/// Normal metrics are derived from the depth maps via central differences;
/// with masks, derived-normal metrics only count pixels whose stencil is
/// fully valid.
pub fn evaluate_pair(pred: &DepthMap, gt: &DepthMap) -> Result<PairMetrics> {
    if !pred.same_shape(gt) {
        return Err(Error::dims(
            "evaluate_pair",
            (pred.width(), pred.height()),
            (gt.width(), gt.height()),
        ));
    }
    let joint = pred.joint_mask(gt);
    let eps_d = mean_depth_error(pred, gt)?;

    let pred_plane = Plane::from_depth_normalized(pred, joint.as_deref());
    let gt_plane = Plane::from_depth_normalized(gt, joint.as_deref());
    let depth_psnr = psnr(&pred_plane, &gt_plane, PSNR_PEAK)?;
    let depth_ssim = ssim(&pred_plane, &gt_plane)?;

    let n_pred = depth_to_normal(&sanitized(pred, joint.as_deref()), DiffScheme::Central);
    let n_gt = depth_to_normal(&sanitized(gt, joint.as_deref()), DiffScheme::Central);
    let normal_mask: Option<Vec<bool>> = joint
        .as_ref()
        .map(|m| stencil_mask(m, pred.width(), pred.height()));
    let eps_n = normal_angular_error(&n_pred, &n_gt, normal_mask.as_deref())?;
    let frac_11_25 =
        angular_threshold_fraction(&n_pred, &n_gt, 11.25, normal_mask.as_deref())?;
    let frac_22_5 =
        angular_threshold_fraction(&n_pred, &n_gt, 22.5, normal_mask.as_deref())?;

    let e_pred = encode_normals(&n_pred);
    let e_gt = encode_normals(&n_gt);
    let mut psnr_sum = 0.0;
    let mut ssim_sum = 0.0;
    for channel in 0..3 {
        let a = Plane::from_encoded_channel(&e_pred, channel, normal_mask.as_deref());
        let b = Plane::from_encoded_channel(&e_gt, channel, normal_mask.as_deref());
        psnr_sum += psnr(&a, &b, PSNR_PEAK)?;
        ssim_sum += ssim(&a, &b)?;
    }

    Ok(PairMetrics {
        eps_d,
        depth_psnr,
        depth_ssim,
        eps_n,
        normal_psnr: psnr_sum / 3.0,
        normal_ssim: ssim_sum / 3.0,
        frac_11_25,
        frac_22_5,
    })
}

/// One labelled report row.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricRow {
    pub id: String,
    #[serde(flatten)]
    pub metrics: PairMetrics,
}

/// Per-image rows plus their column means.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricReport {
    pub per_image: Vec<MetricRow>,
    pub aggregate: PairMetrics,
}

impl MetricReport {
    /// Aggregates rows (sorted by id for deterministic output).
    pub fn from_rows(mut rows: Vec<MetricRow>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::InvalidConfig("no rows to aggregate".into()));
        }
        rows.sort_by(|a, b| a.id.cmp(&b.id));
        let n = rows.len() as f64;
        let mut sums = [0.0f64; 8];
        for row in &rows {
            let m = &row.metrics;
            for (s, v) in sums.iter_mut().zip([
                m.eps_d,
                m.depth_psnr,
                m.depth_ssim,
                m.eps_n,
                m.normal_psnr,
                m.normal_ssim,
                m.frac_11_25,
                m.frac_22_5,
            ]) {
                *s += v;
            }
        }
        let aggregate = PairMetrics {
            eps_d: sums[0] / n,
            depth_psnr: sums[1] / n,
            depth_ssim: sums[2] / n,
            eps_n: sums[3] / n,
            normal_psnr: sums[4] / n,
            normal_ssim: sums[5] / n,
            frac_11_25: sums[6] / n,
            frac_22_5: sums[7] / n,
        };
        Ok(Self { per_image: rows, aggregate })
    }

    pub const CSV_HEADER: [&'static str; 9] = [
        "id",
        "eps_d",
        "depth_psnr",
        "depth_ssim",
        "eps_n",
        "normal_psnr",
        "normal_ssim",
        "frac_11_25",
        "frac_22_5",
    ];

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut writer = csv::Writer::from_writer(out);
        let io_err = |e: csv::Error| Error::InvalidConfig(format!("csv write failed: {e}"));
        writer.write_record(Self::CSV_HEADER).map_err(io_err)?;
        for row in &self.per_image {
            writer
                .write_record(csv_fields(&row.id, &row.metrics))
                .map_err(io_err)?;
        }
        writer
            .write_record(csv_fields("mean", &self.aggregate))
            .map_err(io_err)?;
        writer.flush().map_err(|e| Error::InvalidConfig(format!("csv flush failed: {e}")))?;
        Ok(())
    }
}

fn csv_fields(id: &str, m: &PairMetrics) -> Vec<String> {
    vec![
        id.to_string(),
        format!("{:.6}", m.eps_d),
        format!("{:.6}", m.depth_psnr),
        format!("{:.6}", m.depth_ssim),
        format!("{:.6}", m.eps_n),
        format!("{:.6}", m.normal_psnr),
        format!("{:.6}", m.normal_ssim),
        format!("{:.6}", m.frac_11_25),
        format!("{:.6}", m.frac_22_5),
    ]
}

/// One method's aggregate row in a cross-method comparison.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MethodRow {
    pub id: String,
    #[serde(flatten)]
    pub metrics: PairMetrics,
    pub rank: f64,
}

/// Mean rank of each method over the six headline metrics (eps_d and eps_n
/// lower-better, the PSNR/SSIM columns higher-better). Ties share the
/// average of their positions, so the ranking is invariant under strictly
/// monotone transforms of any one column.
pub fn mean_ranks(aggregates: &[PairMetrics]) -> Vec<f64> {
    type Extract = fn(&PairMetrics) -> f64;
    const COLUMNS: [(Extract, bool); 6] = [
        (|m: &PairMetrics| m.eps_d, false),
        (|m: &PairMetrics| m.depth_psnr, true),
        (|m: &PairMetrics| m.depth_ssim, true),
        (|m: &PairMetrics| m.eps_n, false),
        (|m: &PairMetrics| m.normal_psnr, true),
        (|m: &PairMetrics| m.normal_ssim, true),
    ];
    let n = aggregates.len();
    let mut totals = vec![0.0f64; n];
    for (extract, higher_better) in COLUMNS {
        let values: Vec<f64> = aggregates.iter().map(extract).collect();
        for (method, rank) in fractional_ranks(&values, higher_better).into_iter().enumerate() {
            totals[method] += rank;
        }
    }
    totals.iter().map(|t| t / COLUMNS.len() as f64).collect()
}

/// 1-based ranks, best first; tied values receive the mean of their
/// positions.
fn fractional_ranks(values: &[f64], higher_better: bool) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| {
        let cmp = values[a].partial_cmp(&values[b]).expect("finite metric values");
        if higher_better {
            cmp.reverse()
        } else {
            cmp
        }
    });
    let mut ranks = vec![0.0; values.len()];
    let mut pos = 0;
    while pos < order.len() {
        let mut end = pos + 1;
        while end < order.len() && values[order[end]] == values[order[pos]] {
            end += 1;
        }
        // positions pos..end are tied; 1-based mean rank
        let mean_rank = (pos + 1 + end) as f64 / 2.0;
        for &idx in &order[pos..end] {
            ranks[idx] = mean_rank;
        }
        pos = end;
    }
    ranks
}

/// Comparison table across methods, ranked.
pub fn compare_methods(methods: Vec<(String, PairMetrics)>) -> Vec<MethodRow> {
    let aggregates: Vec<PairMetrics> = methods.iter().map(|(_, m)| *m).collect();
    let ranks = mean_ranks(&aggregates);
    methods
        .into_iter()
        .zip(ranks)
        .map(|((id, metrics), rank)| MethodRow { id, metrics, rank })
        .collect()
}

pub fn write_compare_csv<W: Write>(rows: &[MethodRow], out: W) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    let io_err = |e: csv::Error| Error::InvalidConfig(format!("csv write failed: {e}"));
    let mut header: Vec<&str> = MetricReport::CSV_HEADER.to_vec();
    header.push("rank");
    writer.write_record(header).map_err(io_err)?;
    for row in rows {
        let mut fields = csv_fields(&row.id, &row.metrics);
        fields.push(format!("{:.6}", row.rank));
        writer.write_record(fields).map_err(io_err)?;
    }
    writer.flush().map_err(|e| Error::InvalidConfig(format!("csv flush failed: {e}")))?;
    Ok(())
}
