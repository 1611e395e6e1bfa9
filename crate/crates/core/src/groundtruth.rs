//! Ground-truth depth-maps: nearest vehicle surface per angular pixel.

use serde::{Deserialize, Serialize};

use crate::geometry::{direction, AngularGrid, Vec3};
use crate::scene::{spherical_project, WorldScene};
use crate::{HawkError, Result};

/// Depth value marking a pixel with no surface.
pub const INVALID_DEPTH: f32 = 0.0;

/// Per-pixel depth in meters over an angular grid. Row-major with elevation
/// rows (row 0 = lowest elevation) and azimuth columns; invalid pixels hold
/// [`INVALID_DEPTH`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthMap2D {
    pub grid: AngularGrid,
    pub data: Vec<f32>,
}

impl DepthMap2D {
    pub fn invalid(grid: AngularGrid) -> Self {
        Self {
            data: vec![INVALID_DEPTH; grid.len()],
            grid,
        }
    }

    pub fn width(&self) -> usize {
        self.grid.n_az
    }

    pub fn height(&self) -> usize {
        self.grid.n_el
    }

    pub fn index(&self, az: usize, el: usize) -> usize {
        el * self.grid.n_az + az
    }

    pub fn get(&self, az: usize, el: usize) -> f32 {
        self.data[self.index(az, el)]
    }

    pub fn set(&mut self, az: usize, el: usize, depth: f32) {
        let i = self.index(az, el);
        self.data[i] = depth;
    }

    pub fn is_valid(&self, az: usize, el: usize) -> bool {
        self.get(az, el) != INVALID_DEPTH
    }

    pub fn valid_count(&self) -> usize {
        self.data.iter().filter(|&&d| d != INVALID_DEPTH).count()
    }

    /// Radar-relative 3D point of a pixel at its stored depth.
    pub fn point(&self, az: usize, el: usize) -> Vec3 {
        direction(self.grid.az(az), self.grid.el(el)) * self.get(az, el) as f64
    }

    pub fn check_same_grid(&self, other: &DepthMap2D) -> Result<()> {
        if self.grid.same_as(&other.grid) {
            Ok(())
        } else {
            Err(HawkError::DimensionMismatch(format!(
                "depth-map grids differ: {}×{} vs {}×{}",
                self.width(),
                self.height(),
                other.width(),
                other.height()
            )))
        }
    }

    /// Reduces `factor × factor` blocks to the depth at the block centre,
    /// where the coarser grid samples. The centre is interpolated from the
    /// middle pixels (2×2 for even factors) when all are valid; otherwise the
    /// lower median of the valid middle pixels, then of the whole block, is
    /// used so that no depth is blended across a silhouette. A block with no
    /// valid pixel is invalid.
    pub fn downsample(&self, factor: usize) -> DepthMap2D {
        assert!(factor > 0 && self.width().is_multiple_of(factor) && self.height().is_multiple_of(factor));
        let grid = AngularGrid {
            n_az: self.width() / factor,
            n_el: self.height() / factor,
            ..self.grid
        };
        let middle: &[usize] = if factor.is_multiple_of(2) { &[factor / 2 - 1, factor / 2] } else { &[factor / 2] };
        let lower_median = |mut v: Vec<f32>| {
            v.sort_by(f32::total_cmp);
            v[(v.len() - 1) / 2]
        };
        let mut out = DepthMap2D::invalid(grid);
        for el in 0..grid.n_el {
            for az in 0..grid.n_az {
                let at = |di: usize, dj: usize| self.get(az * factor + di, el * factor + dj);
                let centre: Vec<f32> = middle
                    .iter()
                    .flat_map(|&dj| middle.iter().map(move |&di| (di, dj)))
                    .map(|(di, dj)| at(di, dj))
                    .filter(|&d| d != INVALID_DEPTH)
                    .collect();
                let d = if centre.len() == middle.len() * middle.len() {
                    (centre.iter().map(|&d| d as f64).sum::<f64>() / centre.len() as f64) as f32
                } else if !centre.is_empty() {
                    lower_median(centre)
                } else {
                    let block: Vec<f32> = (0..factor)
                        .flat_map(|dj| (0..factor).map(move |di| (di, dj)))
                        .map(|(di, dj)| at(di, dj))
                        .filter(|&d| d != INVALID_DEPTH)
                        .collect();
                    if block.is_empty() {
                        continue;
                    }
                    lower_median(block)
                };
                out.set(az, el, d);
            }
        }
        out
    }

    /// Nearest-neighbour upscaling by an integer factor.
    pub fn upsample(&self, factor: usize) -> DepthMap2D {
        let mut out = DepthMap2D::invalid(self.grid.upscaled(factor));
        for el in 0..out.height() {
            for az in 0..out.width() {
                out.set(az, el, self.get(az / factor, el / factor));
            }
        }
        out
    }
}

/// Spherical projection of the vehicles only; hits beyond `max_range_m` are
/// left invalid. The ground plane is not geometry and never appears.
pub fn render_depth(world: &WorldScene, grid: &AngularGrid, max_range_m: f64) -> DepthMap2D {
    render_labelled(world, grid, max_range_m).0
}

/// [`render_depth`] plus the id of the vehicle seen at each valid pixel.
pub fn render_labelled(world: &WorldScene, grid: &AngularGrid, max_range_m: f64) -> (DepthMap2D, Vec<Option<u32>>) {
    let proj = spherical_project(world, grid);
    let (data, owners) = proj
        .pixels
        .iter()
        .map(|h| match h {
            Some(h) if h.depth <= max_range_m => (h.depth as f32, Some(h.vehicle_id)),
            _ => (INVALID_DEPTH, None),
        })
        .unzip();
    (DepthMap2D { grid: *grid, data }, owners)
}
