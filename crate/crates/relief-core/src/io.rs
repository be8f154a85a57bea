//! File I/O for depth and normal grids.
//!
//! Formats:
//! - PFM, the lossless interchange format: `Pf` (single channel) for depth,
//!   `PF` (three channels) for normals. Samples are 32-bit floats, scanlines
//!   run bottom-to-top, and the sign of the scale line selects endianness
//!   (negative = little-endian). Save→load round-trips are bit-exact for
//!   values representable as f32, which covers everything that originated
//!   from a file.
//! - 16-bit grayscale PNG for depth, with a JSON sidecar `{"scale", "offset"}`
//!   stored next to the image (`foo.png` → `foo.png.json`). Pixel heights are
//!   `offset + scale * raw`; a missing sidecar means scale 1, offset 0.
//! - 8-bit PNG for visualizations.
//!
//! Files carry no validity mask; loaded maps are all-valid. All writes go
//! through a temp-file-then-rename so interrupted runs never leave partial
//! outputs behind.

use std::fs;
use std::io::Cursor;
use std::path::{Path, PathBuf};

use byteorder::{BigEndian, ByteOrder, LittleEndian};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{DepthMap, NormalMap};

/// On-disk depth representations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DepthFormat {
    Pfm,
    Png16,
}

/// Quantization overrides for 16-bit PNG output. `None` fields are derived
/// from the data (offset = min, scale = range / 65535).
#[derive(Debug, Clone, Copy, Default)]
pub struct Png16Params {
    pub scale: Option<f64>,
    pub offset: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Png16Sidecar {
    scale: f64,
    offset: f64,
}

/// What a file on disk holds, detected from magic bytes (and for PNG, the
/// IHDR bit depth and color type).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FileKind {
    PfmDepth,
    PfmNormal,
    Png16Depth,
    /// A PNG that is not 16-bit grayscale, e.g. an 8-bit visualization.
    PngOther,
}

pub fn detect_kind(path: &Path) -> Result<FileKind> {
    // 8-byte PNG signature + IHDR length/type (8) + width/height (8),
    // then bit depth and color type.
    let mut head = [0u8; 26];
    let read = {
        use std::io::Read;
        let mut f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        f.read(&mut head).map_err(|e| Error::io(path, e))?
    };
    if read >= 2 && &head[..2] == b"Pf" {
        return Ok(FileKind::PfmDepth);
    }
    if read >= 2 && &head[..2] == b"PF" {
        return Ok(FileKind::PfmNormal);
    }
    if read >= 26 && head[..8] == [0x89, b'P', b'N', b'G', b'\r', b'\n', 0x1a, b'\n'] {
        let (bit_depth, color_type) = (head[24], head[25]);
        return Ok(if bit_depth == 16 && color_type == 0 {
            FileKind::Png16Depth
        } else {
            FileKind::PngOther
        });
    }
    Err(Error::PfmFormat {
        offset: 0,
        message: format!("unrecognized file header in {}", path.display()),
    })
}

pub fn load_depth(path: &Path, format: DepthFormat) -> Result<DepthMap> {
    match format {
        DepthFormat::Pfm => load_depth_pfm(path),
        DepthFormat::Png16 => load_depth_png16(path),
    }
}

pub fn save_depth(map: &DepthMap, path: &Path, format: DepthFormat) -> Result<()> {
    match format {
        DepthFormat::Pfm => save_depth_pfm(map, path),
        DepthFormat::Png16 => save_depth_png16(map, path, Png16Params::default()),
    }
}

// ---------------------------------------------------------------------------
// PFM
// ---------------------------------------------------------------------------

fn is_pfm_ws(b: u8) -> bool {
    b == b' ' || b == b'\t' || b == b'\n' || b == b'\r'
}

struct PfmHeader {
    channels: usize,
    width: usize,
    height: usize,
    little_endian: bool,
    data_offset: usize,
}

fn pfm_err(offset: usize, message: impl Into<String>) -> Error {
    Error::PfmFormat { offset: offset as u64, message: message.into() }
}

fn parse_pfm_header(bytes: &[u8]) -> Result<PfmHeader> {
    let mut pos = 0usize;
    let token = |pos: &mut usize| -> Result<(usize, String)> {
        while *pos < bytes.len() && is_pfm_ws(bytes[*pos]) {
            *pos += 1;
        }
        let start = *pos;
        while *pos < bytes.len() && !is_pfm_ws(bytes[*pos]) {
            *pos += 1;
        }
        if start == *pos {
            return Err(pfm_err(start, "unexpected end of header"));
        }
        let text = std::str::from_utf8(&bytes[start..*pos])
            .map_err(|_| pfm_err(start, "non-ascii header token"))?;
        Ok((start, text.to_string()))
    };

    let (magic_at, magic) = token(&mut pos)?;
    let channels = match magic.as_str() {
        "Pf" => 1,
        "PF" => 3,
        other => return Err(pfm_err(magic_at, format!("bad magic {other:?}"))),
    };

    let (w_at, w_text) = token(&mut pos)?;
    let width: usize = w_text
        .parse()
        .map_err(|_| pfm_err(w_at, format!("bad width {w_text:?}")))?;
    let (h_at, h_text) = token(&mut pos)?;
    let height: usize = h_text
        .parse()
        .map_err(|_| pfm_err(h_at, format!("bad height {h_text:?}")))?;
    if width < 2 || height < 2 {
        return Err(pfm_err(w_at, format!("dimensions {width}x{height} below 2x2")));
    }

    let (s_at, s_text) = token(&mut pos)?;
    let scale: f64 = s_text
        .parse()
        .map_err(|_| pfm_err(s_at, format!("bad scale {s_text:?}")))?;
    if scale == 0.0 || !scale.is_finite() {
        return Err(pfm_err(s_at, format!("scale {scale} must be finite and nonzero")));
    }

    // Exactly one whitespace byte separates the scale line from the raster.
    if pos >= bytes.len() || !is_pfm_ws(bytes[pos]) {
        return Err(pfm_err(pos, "missing separator before raster data"));
    }
    pos += 1;

    Ok(PfmHeader {
        channels,
        width,
        height,
        little_endian: scale < 0.0,
        data_offset: pos,
    })
}

/// Reads the raster as rows of f32 samples, returning them top-to-bottom.
fn read_pfm_samples(bytes: &[u8], header: &PfmHeader) -> Result<Vec<f32>> {
    let per_row = header.width * header.channels;
    let expected = header.height * per_row * 4;
    let data = &bytes[header.data_offset..];
    if data.len() < expected {
        return Err(pfm_err(
            bytes.len(),
            format!("truncated raster: expected {expected} bytes, found {}", data.len()),
        ));
    }
    let mut samples = vec![0.0f32; header.height * per_row];
    for file_row in 0..header.height {
        // PFM stores the bottom scanline first.
        let image_row = header.height - 1 - file_row;
        let src = &data[file_row * per_row * 4..(file_row + 1) * per_row * 4];
        let dst = &mut samples[image_row * per_row..(image_row + 1) * per_row];
        if header.little_endian {
            LittleEndian::read_f32_into(src, dst);
        } else {
            BigEndian::read_f32_into(src, dst);
        }
    }
    // Report non-finite payloads at the byte where they sit in the file.
    for (i, &s) in samples.iter().enumerate() {
        if !s.is_finite() {
            let (row, col) = (i / per_row, i % per_row);
            let file_row = header.height - 1 - row;
            let at = header.data_offset + (file_row * per_row + col) * 4;
            return Err(pfm_err(at, format!("non-finite sample {s}")));
        }
    }
    Ok(samples)
}

fn load_depth_pfm(path: &Path) -> Result<DepthMap> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let header = parse_pfm_header(&bytes)?;
    if header.channels != 1 {
        return Err(pfm_err(0, "expected single-channel (Pf) depth map"));
    }
    let samples = read_pfm_samples(&bytes, &header)?;
    DepthMap::new(
        header.width,
        header.height,
        samples.into_iter().map(f64::from).collect(),
    )
}

fn save_depth_pfm(map: &DepthMap, path: &Path) -> Result<()> {
    let bytes = encode_pfm(map.width(), map.height(), 1, map.values());
    atomic_write(path, &bytes)
}

pub fn load_normals(path: &Path) -> Result<NormalMap> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let header = parse_pfm_header(&bytes)?;
    if header.channels != 3 {
        return Err(pfm_err(0, "expected three-channel (PF) normal map"));
    }
    let samples = read_pfm_samples(&bytes, &header)?;
    let mut vectors = Vec::with_capacity(header.width * header.height);
    for (i, v) in samples.chunks_exact(3).enumerate() {
        let (x, y) = (i % header.width, i / header.width);
        let (vx, vy, vz) = (f64::from(v[0]), f64::from(v[1]), f64::from(v[2]));
        let norm = (vx * vx + vy * vy + vz * vz).sqrt();
        if norm == 0.0 {
            return Err(Error::InvalidNormal { x, y, message: "zero-length vector".into() });
        }
        if vz <= 0.0 {
            return Err(Error::InvalidNormal {
                x,
                y,
                message: format!("z component {vz} not positive"),
            });
        }
        // f32 storage drifts the norm slightly; renormalize on load.
        vectors.push([vx / norm, vy / norm, vz / norm]);
    }
    NormalMap::new(header.width, header.height, vectors)
}

pub fn save_normals(n: &NormalMap, path: &Path) -> Result<()> {
    let flat: Vec<f64> = n.vectors().iter().flatten().copied().collect();
    let bytes = encode_pfm(n.width(), n.height(), 3, &flat);
    atomic_write(path, &bytes)
}

fn encode_pfm(width: usize, height: usize, channels: usize, values: &[f64]) -> Vec<u8> {
    let magic = if channels == 1 { "Pf" } else { "PF" };
    let mut out = format!("{magic}\n{width} {height}\n-1.0\n").into_bytes();
    let per_row = width * channels;
    for image_row in (0..height).rev() {
        for &v in &values[image_row * per_row..(image_row + 1) * per_row] {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    out
}

// ---------------------------------------------------------------------------
// 16-bit PNG + sidecar
// ---------------------------------------------------------------------------

/// Sidecar path for a 16-bit PNG depth map: the image path with `.json`
/// appended (`relief.png` → `relief.png.json`).
pub fn sidecar_path(png_path: &Path) -> PathBuf {
    let mut name = png_path.file_name().unwrap_or_default().to_os_string();
    name.push(".json");
    png_path.with_file_name(name)
}

fn load_depth_png16(path: &Path) -> Result<DepthMap> {
    let dynamic = image::ImageReader::open(path)
        .map_err(|e| Error::io(path, e))?
        .decode()
        .map_err(|e| Error::PngFormat { path: path.into(), message: e.to_string() })?;
    let buf = match dynamic {
        image::DynamicImage::ImageLuma16(buf) => buf,
        other => {
            return Err(Error::PngFormat {
                path: path.into(),
                message: format!("expected 16-bit grayscale, got {:?}", other.color()),
            })
        }
    };
    let sidecar = sidecar_path(path);
    let (scale, offset) = if sidecar.exists() {
        let text = fs::read_to_string(&sidecar).map_err(|e| Error::io(&sidecar, e))?;
        let sc: Png16Sidecar = serde_json::from_str(&text).map_err(|e| {
            Error::PngFormat { path: sidecar.clone(), message: format!("bad sidecar: {e}") }
        })?;
        (sc.scale, sc.offset)
    } else {
        (1.0, 0.0)
    };
    let (width, height) = (buf.width() as usize, buf.height() as usize);
    if width < 2 || height < 2 {
        return Err(Error::InvalidDimensions {
            width,
            height,
            message: "depth maps need at least 2 pixels per axis",
        });
    }
    let values = buf.pixels().map(|p| offset + scale * f64::from(p.0[0])).collect();
    DepthMap::new(width, height, values)
}

pub fn save_depth_png16(map: &DepthMap, path: &Path, params: Png16Params) -> Result<()> {
    let (lo, hi) = map.min_max();
    let offset = params.offset.unwrap_or(lo);
    let scale = params.scale.unwrap_or_else(|| {
        let range = hi - lo;
        if range > 0.0 {
            range / 65535.0
        } else {
            1.0
        }
    });
    if !(scale.is_finite() && scale > 0.0) {
        return Err(Error::InvalidConfig(format!("png16 scale {scale} must be positive")));
    }

    let mut buf =
        image::ImageBuffer::<image::Luma<u16>, Vec<u16>>::new(map.width() as u32, map.height() as u32);
    for y in 0..map.height() {
        for x in 0..map.width() {
            let raw = if map.is_valid(x, y) {
                ((map.get(x, y) - offset) / scale).round().clamp(0.0, 65535.0) as u16
            } else {
                0
            };
            buf.put_pixel(x as u32, y as u32, image::Luma([raw]));
        }
    }
    let mut png = Vec::new();
    buf.write_to(&mut Cursor::new(&mut png), image::ImageFormat::Png)
        .map_err(|e| Error::PngFormat { path: path.into(), message: e.to_string() })?;
    atomic_write(path, &png)?;

    let sidecar = Png16Sidecar { scale, offset };
    let text = serde_json::to_string_pretty(&sidecar).expect("sidecar serializes");
    atomic_write(&sidecar_path(path), text.as_bytes())
}

// ---------------------------------------------------------------------------
// 8-bit PNG (visualization)
// ---------------------------------------------------------------------------

pub fn save_png8_gray(img: &image::GrayImage, path: &Path) -> Result<()> {
    let mut png = Vec::new();
    img.write_to(&mut Cursor::new(&mut png), image::ImageFormat::Png)
        .map_err(|e| Error::PngFormat { path: path.into(), message: e.to_string() })?;
    atomic_write(path, &png)
}

pub fn save_png8_rgb(img: &image::RgbImage, path: &Path) -> Result<()> {
    let mut png = Vec::new();
    img.write_to(&mut Cursor::new(&mut png), image::ImageFormat::Png)
        .map_err(|e| Error::PngFormat { path: path.into(), message: e.to_string() })?;
    atomic_write(path, &png)
}

/// Write-temp-then-rename so readers never observe partial files.
fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let name = path.file_name().ok_or_else(|| {
        Error::io(path, std::io::Error::new(std::io::ErrorKind::InvalidInput, "no file name"))
    })?;
    let tmp = path.with_file_name(format!(".{}.tmp", name.to_string_lossy()));
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    match fs::rename(&tmp, path) {
        Ok(()) => Ok(()),
        Err(e) => {
            let _ = fs::remove_file(&tmp);
            Err(Error::io(path, e))
        }
    }
}
