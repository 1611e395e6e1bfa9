//! Synthetic-aperture imaging: element layout, per-range-bin beamforming
//! into a 3D heat-map, top-m range projection, and the end-to-end sample
//! simulation.
//!
//! The array sum for direction (φ, θ) is
//!
//! ```text
//! x(φ, θ) = Σ_k Σ_l S[k,l] · exp(j 2π/λ (k·d·cosθ·sinφ + l·d·sinθ))
//! ```
//!
//! with `k` along `x` and `l` along `z`. The radar is monostatic, so the
//! scanner moves in steps of `d/2`: the round trip doubles every path
//! difference, which makes the recorded phases those of a one-way array with
//! spacing `d`.

use std::time::Instant;

use log::debug;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{jitter_elements, trace_paths_flat};
use crate::config::RunConfig;
use crate::geometry::{AngularGrid, Vec3};
use crate::groundtruth::{render_labelled, DepthMap2D};
use crate::perception::SceneAnnotations;
use crate::rcs::{cull_occluded, extract_reflectors, PointReflectorCloud};
use crate::scene::{Scene, WorldScene};
use crate::waveform::{synthesize_beat, RangeProcessor};
use crate::{HawkError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArrayConfig {
    pub nx: usize,
    pub nz: usize,
    /// Effective element spacing `d` (m); the scanner steps `d/2`.
    pub spacing_m: f64,
    pub wavelength_m: f64,
}

impl ArrayConfig {
    pub fn half_wavelength(nx: usize, nz: usize, wavelength_m: f64) -> Self {
        Self {
            nx,
            nz,
            spacing_m: wavelength_m / 2.0,
            wavelength_m,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.nx == 0 {
            return Err(HawkError::config("array.nx", "must be >= 1"));
        }
        if self.nz == 0 {
            return Err(HawkError::config("array.nz", "must be >= 1"));
        }
        if !(self.spacing_m.is_finite() && self.spacing_m > 0.0) {
            return Err(HawkError::config("array.spacing", "must be > 0"));
        }
        if !(self.wavelength_m.is_finite() && self.wavelength_m > 0.0) {
            return Err(HawkError::config("array.wavelength", "must be > 0"));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.nx * self.nz
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Aperture span `(N−1)·d` along x and z.
    pub fn aperture_m(&self) -> (f64, f64) {
        (
            (self.nx - 1) as f64 * self.spacing_m,
            (self.nz - 1) as f64 * self.spacing_m,
        )
    }

    /// Scanner positions centred on `origin`, indexed `k·nz + l`.
    pub fn element_positions(&self, origin: &Vec3) -> Vec<Vec3> {
        let step = self.spacing_m / 2.0;
        let (cx, cz) = ((self.nx - 1) as f64 / 2.0, (self.nz - 1) as f64 / 2.0);
        let mut out = Vec::with_capacity(self.len());
        for k in 0..self.nx {
            for l in 0..self.nz {
                out.push(origin + Vec3::new((k as f64 - cx) * step, 0.0, (l as f64 - cz) * step));
            }
        }
        out
    }
}

/// Complex sample per element for one range bin, indexed `k·nz + l`.
#[derive(Debug, Clone, PartialEq)]
pub struct ArraySnapshot {
    pub nx: usize,
    pub nz: usize,
    pub data: Vec<Complex64>,
}

impl ArraySnapshot {
    pub fn zeros(nx: usize, nz: usize) -> Self {
        Self {
            nx,
            nz,
            data: vec![Complex64::new(0.0, 0.0); nx * nz],
        }
    }

    pub fn at(&self, k: usize, l: usize) -> Complex64 {
        self.data[k * self.nz + l]
    }

    /// Far-field response to a unit source in direction (`az`, `el`) radians.
    pub fn plane_wave(cfg: &ArrayConfig, az: f64, el: f64) -> Self {
        let kd = std::f64::consts::TAU / cfg.wavelength_m * cfg.spacing_m;
        let (ux, uz) = (el.cos() * az.sin(), el.sin());
        let mut s = Self::zeros(cfg.nx, cfg.nz);
        for k in 0..cfg.nx {
            for l in 0..cfg.nz {
                s.data[k * cfg.nz + l] = Complex64::from_polar(1.0, -kd * (k as f64 * ux + l as f64 * uz));
            }
        }
        s
    }

    fn check(&self, cfg: &ArrayConfig) -> Result<()> {
        if self.nx != cfg.nx || self.nz != cfg.nz || self.data.len() != cfg.len() {
            return Err(HawkError::DimensionMismatch(format!(
                "snapshot is {}×{} ({} values), array is {}×{}",
                self.nx,
                self.nz,
                self.data.len(),
                cfg.nx,
                cfg.nz
            )));
        }
        Ok(())
    }
}

/// Cell-centred range axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RangeAxis {
    pub min_m: f64,
    pub max_m: f64,
    pub n: usize,
}

impl RangeAxis {
    pub fn bin_width_m(&self) -> f64 {
        (self.max_m - self.min_m) / self.n as f64
    }

    pub fn center(&self, r: usize) -> f64 {
        self.min_m + (r as f64 + 0.5) * self.bin_width_m()
    }

    /// Bin containing `range_m`, if inside the axis.
    pub fn bin_of(&self, range_m: f64) -> Option<usize> {
        let f = (range_m - self.min_m) / self.bin_width_m();
        (f >= 0.0 && f < self.n as f64).then_some(f as usize)
    }
}

/// Power over azimuth × elevation × range, azimuth outermost.
#[derive(Debug, Clone, PartialEq)]
pub struct HeatMap3D {
    pub grid: AngularGrid,
    pub range: RangeAxis,
    pub data: Vec<f32>,
}

impl HeatMap3D {
    pub fn zeros(grid: AngularGrid, range: RangeAxis) -> Self {
        Self {
            data: vec![0.0; grid.len() * range.n],
            grid,
            range,
        }
    }

    pub fn index(&self, az: usize, el: usize, r: usize) -> usize {
        (az * self.grid.n_el + el) * self.range.n + r
    }

    pub fn get(&self, az: usize, el: usize, r: usize) -> f32 {
        self.data[self.index(az, el, r)]
    }

    /// Range profile of one angular pixel.
    pub fn column(&self, az: usize, el: usize) -> &[f32] {
        let i = self.index(az, el, 0);
        &self.data[i..i + self.range.n]
    }

    pub fn max(&self) -> f32 {
        self.data.iter().fold(0.0, |a, &b| a.max(b))
    }

    /// (az, el, range) of the global maximum; first in storage order on ties.
    pub fn argmax(&self) -> (usize, usize, usize) {
        let mut best = 0;
        for (i, &v) in self.data.iter().enumerate() {
            if v > self.data[best] {
                best = i;
            }
        }
        let r = best % self.range.n;
        let rest = best / self.range.n;
        (rest / self.grid.n_el, rest % self.grid.n_el, r)
    }

    /// Scales so the global maximum is 1; an all-zero map is left as is.
    pub fn normalize(&mut self) {
        let m = self.max();
        if m > 0.0 {
            self.data.iter_mut().for_each(|v| *v /= m);
        }
    }
}

/// Steering tables for one array and angular grid. Sums over `l` first
/// (elevation only), then over `k` per azimuth: the same terms as the direct
/// double sum, in a different order.
#[derive(Debug, Clone)]
pub struct Beamformer {
    cfg: ArrayConfig,
    grid: AngularGrid,
    /// `[el][az][k]` azimuth phasors.
    a: Vec<Complex64>,
    /// `[el][l]` elevation phasors.
    b: Vec<Complex64>,
}

impl Beamformer {
    pub fn new(cfg: &ArrayConfig, grid: &AngularGrid) -> Result<Self> {
        cfg.validate()?;
        let kd = std::f64::consts::TAU / cfg.wavelength_m * cfg.spacing_m;
        let mut a = Vec::with_capacity(grid.len() * cfg.nx);
        let mut b = Vec::with_capacity(grid.n_el * cfg.nz);
        for j in 0..grid.n_el {
            let el = grid.el(j);
            for l in 0..cfg.nz {
                b.push(Complex64::from_polar(1.0, kd * l as f64 * el.sin()));
            }
            for i in 0..grid.n_az {
                let u = el.cos() * grid.az(i).sin();
                for k in 0..cfg.nx {
                    a.push(Complex64::from_polar(1.0, kd * k as f64 * u));
                }
            }
        }
        Ok(Self {
            cfg: *cfg,
            grid: *grid,
            a,
            b,
        })
    }

    /// `|x(φ, θ)|²` over the grid, azimuth outermost.
    pub fn power(&self, snap: &ArraySnapshot) -> Result<Vec<f64>> {
        snap.check(&self.cfg)?;
        let (nx, nz) = (self.cfg.nx, self.cfg.nz);
        let (n_az, n_el) = (self.grid.n_az, self.grid.n_el);
        let mut out = vec![0.0; n_az * n_el];
        let mut partial = vec![Complex64::new(0.0, 0.0); nx];
        for j in 0..n_el {
            let b = &self.b[j * nz..(j + 1) * nz];
            for (k, p) in partial.iter_mut().enumerate() {
                let row = &snap.data[k * nz..(k + 1) * nz];
                *p = row.iter().zip(b).map(|(s, w)| s * w).sum();
            }
            for i in 0..n_az {
                let a = &self.a[(j * n_az + i) * nx..(j * n_az + i + 1) * nx];
                let x: Complex64 = partial.iter().zip(a).map(|(p, w)| p * w).sum();
                out[i * n_el + j] = x.norm_sqr();
            }
        }
        Ok(out)
    }
}

/// Reference evaluation of the double steering sum, term by term.
pub fn beamform_direct(snap: &ArraySnapshot, cfg: &ArrayConfig, grid: &AngularGrid) -> Result<Vec<f64>> {
    cfg.validate()?;
    snap.check(cfg)?;
    let kd = std::f64::consts::TAU / cfg.wavelength_m * cfg.spacing_m;
    let mut out = vec![0.0; grid.len()];
    for i in 0..grid.n_az {
        for j in 0..grid.n_el {
            let (az, el) = (grid.az(i), grid.el(j));
            let mut x = Complex64::new(0.0, 0.0);
            for k in 0..cfg.nx {
                for l in 0..cfg.nz {
                    let phase = kd * (k as f64 * el.cos() * az.sin() + l as f64 * el.sin());
                    x += snap.at(k, l) * Complex64::from_polar(1.0, phase);
                }
            }
            out[i * grid.n_el + j] = x.norm_sqr();
        }
    }
    Ok(out)
}

/// Beamforms one snapshot per range bin into a heat-map.
pub fn beamform(
    snapshots: &[ArraySnapshot],
    cfg: &ArrayConfig,
    grid: &AngularGrid,
    range: &RangeAxis,
) -> Result<HeatMap3D> {
    if snapshots.len() != range.n {
        return Err(HawkError::DimensionMismatch(format!(
            "{} snapshots for {} range bins",
            snapshots.len(),
            range.n
        )));
    }
    let bf = Beamformer::new(cfg, grid)?;
    let planes: Vec<Vec<f64>> = snapshots.par_iter().map(|s| bf.power(s)).collect::<Result<_>>()?;
    let mut h = HeatMap3D::zeros(*grid, *range);
    for (r, plane) in planes.iter().enumerate() {
        for (px, &v) in plane.iter().enumerate() {
            h.data[px * range.n + r] = v as f32;
        }
    }
    Ok(h)
}

/// The `m` strongest range bins of every angular pixel, strongest first.
#[derive(Debug, Clone, PartialEq)]
pub struct RadarProjection2D {
    pub m: usize,
    pub n_az: usize,
    pub n_el: usize,
    /// Range-bin indices, shaped `m × n_az × n_el`.
    pub bins: Vec<u16>,
    /// Matching powers, same shape.
    pub powers: Vec<f32>,
}

impl RadarProjection2D {
    pub fn index(&self, channel: usize, az: usize, el: usize) -> usize {
        (channel * self.n_az + az) * self.n_el + el
    }

    pub fn bin(&self, channel: usize, az: usize, el: usize) -> u16 {
        self.bins[self.index(channel, az, el)]
    }

    pub fn power(&self, channel: usize, az: usize, el: usize) -> f32 {
        self.powers[self.index(channel, az, el)]
    }
}

/// Per pixel, sorts range bins by descending power with ties going to the
/// smaller bin and keeps the first `m`.
pub fn project_top_m(h: &HeatMap3D, m: usize) -> Result<RadarProjection2D> {
    if m == 0 || m > h.range.n {
        return Err(HawkError::config(
            "top_m",
            format!("must lie in 1..={} (range bins)", h.range.n),
        ));
    }
    let (n_az, n_el) = (h.grid.n_az, h.grid.n_el);
    let mut out = RadarProjection2D {
        m,
        n_az,
        n_el,
        bins: vec![0; m * n_az * n_el],
        powers: vec![0.0; m * n_az * n_el],
    };
    let mut order: Vec<usize> = Vec::with_capacity(h.range.n);
    for az in 0..n_az {
        for el in 0..n_el {
            let col = h.column(az, el);
            order.clear();
            order.extend(0..col.len());
            order.sort_by(|&a, &b| col[b].total_cmp(&col[a]).then(a.cmp(&b)));
            for (c, &r) in order.iter().take(m).enumerate() {
                let i = out.index(c, az, el);
                out.bins[i] = r as u16;
                out.powers[i] = col[r];
            }
        }
    }
    Ok(out)
}

/// Radar baseline depth-map: argmax range of each pixel whose peak power is
/// within `threshold_db` of the global maximum, upscaled by `upscale`.
pub fn radar_depth_map(h: &HeatMap3D, threshold_db: f64, upscale: usize) -> DepthMap2D {
    let floor = h.max() as f64 * 10f64.powf(-threshold_db / 10.0);
    let mut d = DepthMap2D::invalid(h.grid);
    for az in 0..h.grid.n_az {
        for el in 0..h.grid.n_el {
            let col = h.column(az, el);
            let mut best = 0;
            for (r, &v) in col.iter().enumerate() {
                if v > col[best] {
                    best = r;
                }
            }
            let p = col[best] as f64;
            if p > 0.0 && p >= floor {
                d.set(az, el, h.range.center(best) as f32);
            }
        }
    }
    if upscale > 1 {
        d.upsample(upscale)
    } else {
        d
    }
}

#[derive(Debug, Clone)]
pub struct SimulatedSample {
    /// Heat-map scaled to a maximum of 1.
    pub heatmap: HeatMap3D,
    pub depth: DepthMap2D,
    /// Annotations of the first vehicle; `None` for an empty scene.
    pub annotations: Option<SceneAnnotations>,
    /// Peak power before normalization.
    pub peak_power: f64,
    pub reflectors: PointReflectorCloud,
}

impl SimulatedSample {
    pub fn valid_pixels(&self) -> usize {
        self.depth.valid_count()
    }
}

/// Complex value of each heat-map range bin for one element: the nearest
/// zero-padded FFT bin to the bin centre.
#[allow(clippy::too_many_arguments)]
fn range_samples(
    element: usize,
    position: &Vec3,
    cloud: &PointReflectorCloud,
    ground: f64,
    cfg: &RunConfig,
    processor: &RangeProcessor,
    axis: &RangeAxis,
    paths: &mut Vec<crate::channel::PropagationPath>,
) -> Result<Vec<Complex64>> {
    trace_paths_flat(cloud, position, ground, &cfg.channel, paths);
    let beat = synthesize_beat(paths, &cfg.fmcw, &cfg.channel, element as u64)?;
    let profile = processor.process(&beat);
    Ok((0..axis.n)
        .map(|r| profile.bins[profile.bin_of_range(axis.center(r))])
        .collect())
}

/// Scene → reflectors → paths → beat signals → range FFT → beamforming,
/// plus the ray-cast ground truth and annotations.
pub fn simulate_sample(scene: &Scene, cfg: &RunConfig) -> Result<SimulatedSample> {
    cfg.validate()?;
    scene.validate()?;
    let t0 = Instant::now();
    let world = WorldScene::new(scene);
    let depth_grid = cfg.depth_grid();
    let cull_grid = depth_grid.upscaled(cfg.cull_upscale);
    let visible = cull_occluded(&world, &cull_grid);
    let cloud = extract_reflectors(&visible, &world, &cfg.rcs)?;
    debug!(
        "{} visible triangles, {} reflectors ({:.2?})",
        visible.triangles.len(),
        cloud.len(),
        t0.elapsed()
    );

    let array = cfg.array_config();
    let nominal = array.element_positions(&world.radar_origin);
    let elements = jitter_elements(&nominal, &cfg.channel);
    let processor = RangeProcessor::new(&cfg.fmcw, cfg.fft_len());
    let axis = cfg.range_axis();
    let per_element: Vec<Vec<Complex64>> = elements
        .par_iter()
        .enumerate()
        .map_init(Vec::new, |paths, (e, pos)| {
            range_samples(e, pos, &cloud, world.ground_height, cfg, &processor, &axis, paths)
        })
        .collect::<Result<_>>()?;
    let snapshots: Vec<ArraySnapshot> = (0..axis.n)
        .map(|r| ArraySnapshot {
            nx: array.nx,
            nz: array.nz,
            data: per_element.iter().map(|v| v[r]).collect(),
        })
        .collect();
    let mut heatmap = beamform(&snapshots, &array, &cfg.heatmap.angular, &axis)?;
    let peak_power = heatmap.max() as f64;
    heatmap.normalize();
    debug!("beamformed {} elements ({:.2?})", elements.len(), t0.elapsed());

    let (depth, owners) = render_labelled(&world, &depth_grid, axis.max_m);
    let annotations = (!scene.vehicles.is_empty()).then(|| SceneAnnotations::new(scene, 0, &world, &depth, &owners));
    Ok(SimulatedSample {
        heatmap,
        depth,
        annotations,
        peak_power,
        reflectors: cloud,
    })
}
