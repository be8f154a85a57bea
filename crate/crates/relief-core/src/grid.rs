//! Dense 2-D grid containers for depth, normal, and gradient data.
//!
//! All grids are row-major with `x` indexing columns (rightward) and `y`
//! indexing rows (downward); `z` points toward the viewer. The same frame is
//! used by every module in this crate.

use crate::error::{Error, Result};

pub(crate) fn check_mask(
    mask: &Option<Vec<bool>>,
    width: usize,
    height: usize,
) -> Result<()> {
    if let Some(m) = mask {
        if m.len() != width * height {
            return Err(Error::MaskShape { len: m.len(), width, height });
        }
        if !m.iter().any(|&v| v) {
            return Err(Error::EmptyMask);
        }
    }
    Ok(())
}

/// H×W scalar height field in pixel units.
///
/// Invariants: `width >= 2`, `height >= 2`, every unmasked value finite.
/// The optional mask marks valid relief pixels (`true` = valid); when absent
/// every pixel is valid. Masked pixels are skipped by metrics and solvers.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    width: usize,
    height: usize,
    values: Vec<f64>,
    mask: Option<Vec<bool>>,
}

impl DepthMap {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        Self::with_mask(width, height, values, None)
    }

    pub fn with_mask(
        width: usize,
        height: usize,
        values: Vec<f64>,
        mask: Option<Vec<bool>>,
    ) -> Result<Self> {
        if width < 2 || height < 2 {
            return Err(Error::InvalidDimensions {
                width,
                height,
                message: "depth maps need at least 2 pixels per axis",
            });
        }
        if values.len() != width * height {
            return Err(Error::InvalidDimensions {
                width,
                height,
                message: "value buffer length does not match dimensions",
            });
        }
        check_mask(&mask, width, height)?;
        for (i, &v) in values.iter().enumerate() {
            let valid = mask.as_ref().is_none_or(|m| m[i]);
            if valid && !v.is_finite() {
                return Err(Error::NonFinite {
                    context: "depth map",
                    x: i % width,
                    y: i / width,
                });
            }
        }
        Ok(Self { width, height, values, mask })
    }

    /// Constant-valued map, handy for gauge anchors and tests.
    pub fn constant(width: usize, height: usize, value: f64) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn mask(&self) -> Option<&[bool]> {
        self.mask.as_deref()
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }

    pub fn is_valid(&self, x: usize, y: usize) -> bool {
        self.mask.as_ref().is_none_or(|m| m[y * self.width + x])
    }

    /// Iterator over `(index, value)` of valid pixels only.
    pub fn valid_values(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.values.iter().copied().enumerate().filter(move |(i, _)| {
            self.mask.as_ref().is_none_or(|m| m[*i])
        })
    }

    /// `(min, max)` over valid pixels.
    pub fn min_max(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for (_, v) in self.valid_values() {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        (lo, hi)
    }

    /// Depth range (max - min) over valid pixels.
    pub fn thickness(&self) -> f64 {
        let (lo, hi) = self.min_max();
        hi - lo
    }

    /// Mean over valid pixels.
    pub fn mean(&self) -> f64 {
        let mut sum = 0.0;
        let mut n = 0usize;
        for (_, v) in self.valid_values() {
            sum += v;
            n += 1;
        }
        sum / n as f64
    }

    /// New map with `f` applied to every value; the mask is carried over.
    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> DepthMap {
        DepthMap {
            width: self.width,
            height: self.height,
            values: self.values.iter().map(|&v| f(v)).collect(),
            mask: self.mask.clone(),
        }
    }

    /// Uniformly scaled copy (`value * s` per pixel).
    pub fn scaled(&self, s: f64) -> DepthMap {
        self.map_values(|v| v * s)
    }

    pub(crate) fn same_shape(&self, other: &DepthMap) -> bool {
        self.width == other.width && self.height == other.height
    }

    /// Intersection of both maps' masks, or `None` when both are all-valid.
    pub(crate) fn joint_mask(&self, other: &DepthMap) -> Option<Vec<bool>> {
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

/// H×W unit 3-vectors with positive viewer-facing `z` component.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalMap {
    width: usize,
    height: usize,
    vectors: Vec<[f64; 3]>,
}

/// Tolerance on the unit-norm invariant.
pub const NORMAL_NORM_TOL: f64 = 1e-6;

impl NormalMap {
    /// Validates the unit-norm (within [`NORMAL_NORM_TOL`]) and `z > 0`
    /// invariants.
    pub fn new(width: usize, height: usize, vectors: Vec<[f64; 3]>) -> Result<Self> {
        if width == 0 || height == 0 || vectors.len() != width * height {
            return Err(Error::InvalidDimensions {
                width,
                height,
                message: "vector buffer length does not match dimensions",
            });
        }
        for (i, v) in vectors.iter().enumerate() {
            let (x, y) = (i % width, i / width);
            let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
            if !norm.is_finite() || (norm - 1.0).abs() > NORMAL_NORM_TOL {
                return Err(Error::InvalidNormal {
                    x,
                    y,
                    message: format!("norm {norm} not within {NORMAL_NORM_TOL} of 1"),
                });
            }
            if v[2] <= 0.0 {
                return Err(Error::InvalidNormal {
                    x,
                    y,
                    message: format!("z component {} not positive", v[2]),
                });
            }
        }
        Ok(Self { width, height, vectors })
    }

    /// Constructor for vectors that are unit-length with positive `z` by
    /// construction (e.g. produced by the gradient lift).
    pub(crate) fn from_unit_vectors(
        width: usize,
        height: usize,
        vectors: Vec<[f64; 3]>,
    ) -> Self {
        debug_assert!(vectors.iter().all(|v| {
            let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
            (n - 1.0).abs() <= NORMAL_NORM_TOL && v[2] > 0.0
        }));
        Self { width, height, vectors }
    }

    /// All-flat map, every vector (0, 0, 1).
    pub fn flat(width: usize, height: usize) -> Self {
        Self::from_unit_vectors(width, height, vec![[0.0, 0.0, 1.0]; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn vectors(&self) -> &[[f64; 3]] {
        &self.vectors
    }

    pub fn get(&self, x: usize, y: usize) -> [f64; 3] {
        self.vectors[y * self.width + x]
    }

    pub(crate) fn same_shape(&self, other: &NormalMap) -> bool {
        self.width == other.width && self.height == other.height
    }
}

/// H×W triples with each component in `[0, 1]`, the channel space of the
/// soft-fusion blend.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedNormalMap {
    width: usize,
    height: usize,
    channels: Vec<[f64; 3]>,
}

impl EncodedNormalMap {
    pub fn new(width: usize, height: usize, channels: Vec<[f64; 3]>) -> Result<Self> {
        if width == 0 || height == 0 || channels.len() != width * height {
            return Err(Error::InvalidDimensions {
                width,
                height,
                message: "channel buffer length does not match dimensions",
            });
        }
        for (i, c) in channels.iter().enumerate() {
            for &component in c {
                if !(0.0..=1.0).contains(&component) {
                    return Err(Error::ChannelOutOfRange {
                        x: i % width,
                        y: i / width,
                        value: component,
                    });
                }
            }
        }
        Ok(Self { width, height, channels })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> &[[f64; 3]] {
        &self.channels
    }

    pub fn get(&self, x: usize, y: usize) -> [f64; 3] {
        self.channels[y * self.width + x]
    }

    pub(crate) fn same_shape(&self, other: &EncodedNormalMap) -> bool {
        self.width == other.width && self.height == other.height
    }
}

/// H×W 2-vectors `(p, q) = (dz/dx, dz/dy)` in pixel/pixel units.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientField {
    width: usize,
    height: usize,
    vectors: Vec<[f64; 2]>,
}

impl GradientField {
    pub fn new(width: usize, height: usize, vectors: Vec<[f64; 2]>) -> Result<Self> {
        if width == 0 || height == 0 || vectors.len() != width * height {
            return Err(Error::InvalidDimensions {
                width,
                height,
                message: "vector buffer length does not match dimensions",
            });
        }
        for (i, v) in vectors.iter().enumerate() {
            if !v[0].is_finite() || !v[1].is_finite() {
                return Err(Error::NonFinite {
                    context: "gradient field",
                    x: i % width,
                    y: i / width,
                });
            }
        }
        Ok(Self { width, height, vectors })
    }

    pub fn zero(width: usize, height: usize) -> Self {
        Self { width, height, vectors: vec![[0.0, 0.0]; width * height] }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn vectors(&self) -> &[[f64; 2]] {
        &self.vectors
    }

    pub fn get(&self, x: usize, y: usize) -> [f64; 2] {
        self.vectors[y * self.width + x]
    }

    /// Mutable slope access; callers must keep components finite.
    pub fn vectors_mut(&mut self) -> &mut [[f64; 2]] {
        &mut self.vectors
    }
}

/// Maps each component `v` to the channel value `(v + 1) / 2`.
///
/// The flat normal (0, 0, 1) encodes to (0.5, 0.5, 1.0); the `z` channel is
/// always above 0.5 because `z > 0` on valid maps.
pub fn encode_normals(n: &NormalMap) -> EncodedNormalMap {
    let channels = n
        .vectors()
        .iter()
        .map(|v| [(v[0] + 1.0) / 2.0, (v[1] + 1.0) / 2.0, (v[2] + 1.0) / 2.0])
        .collect();
    EncodedNormalMap { width: n.width, height: n.height, channels }
}

/// Floor applied to the decoded `z` component before renormalization.
pub const DECODE_Z_FLOOR: f64 = 1e-4;

/// Inverse of [`encode_normals`]: `v = 2c - 1` per channel, `z` floored at
/// [`DECODE_Z_FLOOR`], then renormalized to unit length.
///
/// Pixels whose decoded vector is exactly zero-length cannot be oriented and
/// are reported with their coordinates.
pub fn decode_normals(e: &EncodedNormalMap) -> Result<NormalMap> {
    let mut degenerate = Vec::new();
    let mut vectors = Vec::with_capacity(e.channels.len());
    for (i, c) in e.channels.iter().enumerate() {
        let v = [2.0 * c[0] - 1.0, 2.0 * c[1] - 1.0, 2.0 * c[2] - 1.0];
        if v[0] == 0.0 && v[1] == 0.0 && v[2] == 0.0 {
            degenerate.push((i % e.width, i / e.width));
            continue;
        }
        let z = v[2].max(DECODE_Z_FLOOR);
        let norm = (v[0] * v[0] + v[1] * v[1] + z * z).sqrt();
        vectors.push([v[0] / norm, v[1] / norm, z / norm]);
    }
    if !degenerate.is_empty() {
        return Err(Error::DegeneratePixels { pixels: degenerate });
    }
    Ok(NormalMap::from_unit_vectors(e.width, e.height, vectors))
}

/// Affine [min, max] → [0, 255] visualization with round-half-away-from-zero.
///
/// Returns the 8-bit image and a flag that is `true` when the input was
/// constant over its valid pixels (the image is then all zeros). Masked
/// pixels render as 0.
pub fn viz_depth(map: &DepthMap) -> (image::GrayImage, bool) {
    let (lo, hi) = map.min_max();
    let range = hi - lo;
    let constant = range <= 0.0;
    let mut img = image::GrayImage::new(map.width as u32, map.height as u32);
    if !constant {
        for y in 0..map.height {
            for x in 0..map.width {
                if map.is_valid(x, y) {
                    let t = (map.get(x, y) - lo) / range * 255.0;
                    img.put_pixel(x as u32, y as u32, image::Luma([t.round() as u8]));
                }
            }
        }
    }
    (img, constant)
}

/// 8-bit RGB rendering of a normal map via the channel encoding.
pub fn viz_normals(n: &NormalMap) -> image::RgbImage {
    let mut img = image::RgbImage::new(n.width as u32, n.height as u32);
    for y in 0..n.height {
        for x in 0..n.width {
            let v = n.get(x, y);
            let px = [
                ((v[0] + 1.0) / 2.0 * 255.0).round() as u8,
                ((v[1] + 1.0) / 2.0 * 255.0).round() as u8,
                ((v[2] + 1.0) / 2.0 * 255.0).round() as u8,
            ];
            img.put_pixel(x as u32, y as u32, image::Rgb(px));
        }
    }
    img
}
