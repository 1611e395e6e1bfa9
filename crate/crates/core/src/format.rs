//! Binary heat-map (`HWKE`) and depth-map (`HWKD`) files, plus PNG renders.
//!
//! Both formats are little-endian:
//!
//! ```text
//! HWKE: "HWKE" u16 version, u16 n_az, u16 n_el, u16 n_range,
//!       f32 az_min, az_max, el_min, el_max (deg), range_min, range_max (m),
//!       f32 voxels, azimuth outermost, then elevation, then range
//! HWKD: "HWKD" u16 version, u16 width, u16 height,
//!       f32 az_min, az_max, el_min, el_max (deg),
//!       f32 pixels, row-major, row 0 = lowest elevation, 0.0 = no surface
//! ```

use std::path::Path;

use image::{ImageBuffer, ImageFormat, Luma, Rgb};

use crate::geometry::AngularGrid;
use crate::groundtruth::{DepthMap2D, INVALID_DEPTH};
use crate::imager::{project_top_m, HeatMap3D, RangeAxis};
use crate::{HawkError, Result};

pub const HEATMAP_MAGIC: &[u8; 4] = b"HWKE";
pub const DEPTHMAP_MAGIC: &[u8; 4] = b"HWKD";
pub const VERSION: u16 = 1;

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
    what: &'static str,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(HawkError::Format {
                what: self.what,
                message: format!("truncated: {} bytes, need {} more at offset {}", self.buf.len(), n, self.pos),
            });
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().expect("2 bytes")))
    }

    fn f32s(&mut self, n: usize) -> Result<Vec<f32>> {
        let bytes = self.take(n.checked_mul(4).ok_or_else(|| self.err("size overflow"))?)?;
        Ok(bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect())
    }

    fn header(&mut self, magic: &[u8; 4]) -> Result<()> {
        if self.take(4)? != magic {
            return Err(self.err(format!("bad magic, expected {:?}", std::str::from_utf8(magic).unwrap())));
        }
        let v = self.u16()?;
        if v != VERSION {
            return Err(self.err(format!("unsupported version {v}")));
        }
        Ok(())
    }

    fn finish(&self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(self.err(format!("{} trailing bytes", self.buf.len() - self.pos)));
        }
        Ok(())
    }

    fn err(&self, message: impl Into<String>) -> HawkError {
        HawkError::Format {
            what: self.what,
            message: message.into(),
        }
    }
}

fn dim(n: usize, what: &'static str) -> Result<u16> {
    u16::try_from(n).map_err(|_| HawkError::Format {
        what,
        message: format!("dimension {n} exceeds 65535"),
    })
}

fn grid_from(ext: &[f32], n_az: u16, n_el: u16, what: &'static str) -> Result<AngularGrid> {
    let grid = AngularGrid::new((ext[0] as f64, ext[1] as f64), n_az as usize, (ext[2] as f64, ext[3] as f64), n_el as usize);
    grid.validate("extents").map_err(|e| HawkError::Format {
        what,
        message: e.to_string(),
    })?;
    Ok(grid)
}

pub fn encode_heatmap(h: &HeatMap3D) -> Result<Vec<u8>> {
    const WHAT: &str = "heat-map";
    let mut out = Vec::with_capacity(14 + 24 + 4 * h.data.len());
    out.extend_from_slice(HEATMAP_MAGIC);
    for v in [VERSION, dim(h.grid.n_az, WHAT)?, dim(h.grid.n_el, WHAT)?, dim(h.range.n, WHAT)?] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    let g = &h.grid;
    for e in [g.az_min_deg, g.az_max_deg, g.el_min_deg, g.el_max_deg, h.range.min_m, h.range.max_m] {
        out.extend_from_slice(&(e as f32).to_le_bytes());
    }
    for v in &h.data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub fn decode_heatmap(bytes: &[u8]) -> Result<HeatMap3D> {
    let mut r = Reader {
        buf: bytes,
        pos: 0,
        what: "heat-map",
    };
    r.header(HEATMAP_MAGIC)?;
    let (n_az, n_el, n_r) = (r.u16()?, r.u16()?, r.u16()?);
    let ext = r.f32s(6)?;
    let grid = grid_from(&ext, n_az, n_el, "heat-map")?;
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    let inverted = !(ext[5] > ext[4]);
    if n_r == 0 || inverted || !ext[4].is_finite() || !ext[5].is_finite() {
        return Err(r.err("empty or inverted range axis"));
    }
    let data = r.f32s(n_az as usize * n_el as usize * n_r as usize)?;
    r.finish()?;
    if let Some(v) = data.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
        return Err(r.err(format!("voxel value {v} is not a finite non-negative power")));
    }
    Ok(HeatMap3D {
        grid,
        range: RangeAxis {
            min_m: ext[4] as f64,
            max_m: ext[5] as f64,
            n: n_r as usize,
        },
        data,
    })
}

pub fn encode_depthmap(d: &DepthMap2D) -> Result<Vec<u8>> {
    const WHAT: &str = "depth-map";
    let mut out = Vec::with_capacity(10 + 16 + 4 * d.data.len());
    out.extend_from_slice(DEPTHMAP_MAGIC);
    for v in [VERSION, dim(d.width(), WHAT)?, dim(d.height(), WHAT)?] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    let g = &d.grid;
    for e in [g.az_min_deg, g.az_max_deg, g.el_min_deg, g.el_max_deg] {
        out.extend_from_slice(&(e as f32).to_le_bytes());
    }
    for v in &d.data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub fn decode_depthmap(bytes: &[u8]) -> Result<DepthMap2D> {
    let mut r = Reader {
        buf: bytes,
        pos: 0,
        what: "depth-map",
    };
    r.header(DEPTHMAP_MAGIC)?;
    let (w, h) = (r.u16()?, r.u16()?);
    let ext = r.f32s(4)?;
    let grid = grid_from(&ext, w, h, "depth-map")?;
    let data = r.f32s(w as usize * h as usize)?;
    r.finish()?;
    if let Some(v) = data.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
        return Err(r.err(format!("depth {v} is neither positive nor the 0.0 sentinel")));
    }
    Ok(DepthMap2D { grid, data })
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| HawkError::io(path, e))
}

/// Writes through a sibling temporary file so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".part");
    let tmp = std::path::PathBuf::from(tmp);
    std::fs::write(&tmp, bytes).map_err(|e| HawkError::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| HawkError::io(path, e))
}

pub fn read_heatmap(path: &Path) -> Result<HeatMap3D> {
    decode_heatmap(&read_file(path)?).map_err(|e| in_file(e, path))
}

pub fn write_heatmap(path: &Path, h: &HeatMap3D) -> Result<()> {
    write_atomic(path, &encode_heatmap(h)?)
}

pub fn read_depthmap(path: &Path) -> Result<DepthMap2D> {
    decode_depthmap(&read_file(path)?).map_err(|e| in_file(e, path))
}

pub fn write_depthmap(path: &Path, d: &DepthMap2D) -> Result<()> {
    write_atomic(path, &encode_depthmap(d)?)
}

fn in_file(e: HawkError, path: &Path) -> HawkError {
    match e {
        HawkError::Format { what, message } => HawkError::Format {
            what,
            message: format!("{}: {message}", path.display()),
        },
        other => other,
    }
}

fn save<P, C>(img: &ImageBuffer<P, C>, path: &Path) -> Result<()>
where
    P: image::Pixel + image::PixelWithColorType,
    [P::Subpixel]: image::EncodableLayout,
    C: std::ops::Deref<Target = [P::Subpixel]>,
{
    img.save_with_format(path, ImageFormat::Png).map_err(|e| match e {
        image::ImageError::IoError(io) => HawkError::io(path, io),
        other => HawkError::io(path, std::io::Error::other(other.to_string())),
    })
}

/// Grayscale image of each pixel's strongest range bin (linear power,
/// scaled to the global peak). Top row is the highest elevation.
pub fn render_heatmap(h: &HeatMap3D) -> ImageBuffer<Luma<u8>, Vec<u8>> {
    let p = project_top_m(h, 1).expect("a heat-map has at least one range bin");
    let peak = h.max();
    let (w, ht) = (h.grid.n_az as u32, h.grid.n_el as u32);
    ImageBuffer::from_fn(w, ht, |x, y| {
        let el = (ht - 1 - y) as usize;
        let v = if peak > 0.0 {
            (p.power(0, x as usize, el) / peak * 255.0).round() as u8
        } else {
            0
        };
        Luma([v])
    })
}

/// Colour for a surface pixel; never black, which is reserved for "no surface".
pub const SENTINEL_RGB: [u8; 3] = [0, 0, 0];

fn ramp(t: f64) -> [u8; 3] {
    // Near = warm yellow, far = deep blue.
    const STOPS: [[f64; 3]; 4] = [[253.0, 231.0, 37.0], [53.0, 183.0, 121.0], [49.0, 104.0, 142.0], [68.0, 1.0, 84.0]];
    let t = t.clamp(0.0, 1.0) * (STOPS.len() - 1) as f64;
    let i = (t.floor() as usize).min(STOPS.len() - 2);
    let f = t - i as f64;
    let c = |k: usize| (STOPS[i][k] + (STOPS[i + 1][k] - STOPS[i][k]) * f).round() as u8;
    [c(0), c(1), c(2)]
}

/// Colour-mapped depth image, scaled between the nearest and farthest
/// valid depth; pixels without a surface are [`SENTINEL_RGB`].
pub fn render_depthmap(d: &DepthMap2D) -> ImageBuffer<Rgb<u8>, Vec<u8>> {
    let (lo, hi) = d
        .data
        .iter()
        .filter(|&&v| v != INVALID_DEPTH)
        .fold((f32::INFINITY, 0.0f32), |(a, b), &v| (a.min(v), b.max(v)));
    let span = (hi - lo).max(f32::EPSILON) as f64;
    let (w, h) = (d.width() as u32, d.height() as u32);
    ImageBuffer::from_fn(w, h, |x, y| {
        let v = d.get(x as usize, (h - 1 - y) as usize);
        if v == INVALID_DEPTH {
            Rgb(SENTINEL_RGB)
        } else {
            Rgb(ramp((v - lo) as f64 / span))
        }
    })
}

/// 16-bit grayscale depth in millimetres (0 = no surface, saturating at 65.535 m).
pub fn depthmap_mm16(d: &DepthMap2D) -> ImageBuffer<Luma<u16>, Vec<u16>> {
    let (w, h) = (d.width() as u32, d.height() as u32);
    ImageBuffer::from_fn(w, h, |x, y| {
        let v = d.get(x as usize, (h - 1 - y) as usize) as f64;
        Luma([(v * 1000.0).round().clamp(0.0, 65535.0) as u16])
    })
}

pub fn write_heatmap_png(path: &Path, h: &HeatMap3D) -> Result<()> {
    save(&render_heatmap(h), path)
}

pub fn write_depthmap_png(path: &Path, d: &DepthMap2D) -> Result<()> {
    save(&render_depthmap(d), path)
}

pub fn write_depthmap_png16(path: &Path, d: &DepthMap2D) -> Result<()> {
    save(&depthmap_mm16(d), path)
}
