//! Shared geometric primitives: angular sampling grids, a watertight
//! ray/triangle test and a bounding-volume hierarchy for ray casting.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::{HawkError, Result};

pub type Vec3 = Vector3<f64>;

/// Unit direction for an (azimuth, elevation) pair in radians.
pub fn direction(az: f64, el: f64) -> Vec3 {
    let (sa, ca) = az.sin_cos();
    let (se, ce) = el.sin_cos();
    Vec3::new(ce * sa, ce * ca, se)
}

/// Inverse of [`direction`]: (azimuth, elevation) in radians of a vector.
pub fn angles_of(v: &Vec3) -> (f64, f64) {
    let horiz = (v.x * v.x + v.y * v.y).sqrt();
    (v.x.atan2(v.y), v.z.atan2(horiz))
}

/// Cell-centred azimuth × elevation sampling grid.
///
/// Extents are cell edges, so bin `i` of `n` spans
/// `[min + i·Δ, min + (i+1)·Δ]` and is sampled at its centre.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AngularGrid {
    pub az_min_deg: f64,
    pub az_max_deg: f64,
    pub n_az: usize,
    pub el_min_deg: f64,
    pub el_max_deg: f64,
    pub n_el: usize,
}

impl AngularGrid {
    pub fn new(az_deg: (f64, f64), n_az: usize, el_deg: (f64, f64), n_el: usize) -> Self {
        Self {
            az_min_deg: az_deg.0,
            az_max_deg: az_deg.1,
            n_az,
            el_min_deg: el_deg.0,
            el_max_deg: el_deg.1,
            n_el,
        }
    }

    /// Heat-map angular grid: ±45° azimuth over 64 bins, ±22.5° elevation over 32.
    pub fn heatmap_default() -> Self {
        Self::new((-45.0, 45.0), 64, (-22.5, 22.5), 32)
    }

    /// Depth-map grid: same extents at 4× the heat-map resolution.
    pub fn depth_default() -> Self {
        Self::heatmap_default().upscaled(4)
    }

    pub fn upscaled(&self, factor: usize) -> Self {
        Self {
            n_az: self.n_az * factor,
            n_el: self.n_el * factor,
            ..*self
        }
    }

    pub fn validate(&self, field: &str) -> Result<()> {
        if self.n_az == 0 || self.n_el == 0 {
            return Err(HawkError::config(field, "grid needs at least one bin per axis"));
        }
        let ok = |lo: f64, hi: f64| lo.is_finite() && hi.is_finite() && hi > lo;
        if !ok(self.az_min_deg, self.az_max_deg) || !ok(self.el_min_deg, self.el_max_deg) {
            return Err(HawkError::config(field, "angular extents must be finite and increasing"));
        }
        if self.az_min_deg < -180.0
            || self.az_max_deg > 180.0
            || self.el_min_deg < -90.0
            || self.el_max_deg > 90.0
        {
            return Err(HawkError::config(field, "angular extents out of range"));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.n_az * self.n_el
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn az_step_deg(&self) -> f64 {
        (self.az_max_deg - self.az_min_deg) / self.n_az as f64
    }

    pub fn el_step_deg(&self) -> f64 {
        (self.el_max_deg - self.el_min_deg) / self.n_el as f64
    }

    /// Azimuth of column `i` in radians.
    pub fn az(&self, i: usize) -> f64 {
        (self.az_min_deg + (i as f64 + 0.5) * self.az_step_deg()).to_radians()
    }

    /// Elevation of row `j` in radians.
    pub fn el(&self, j: usize) -> f64 {
        (self.el_min_deg + (j as f64 + 0.5) * self.el_step_deg()).to_radians()
    }

    pub fn direction(&self, i: usize, j: usize) -> Vec3 {
        direction(self.az(i), self.el(j))
    }

    /// Fractional (column, row) position of an angle pair given in radians.
    pub fn locate(&self, az: f64, el: f64) -> (f64, f64) {
        (
            (az.to_degrees() - self.az_min_deg) / self.az_step_deg() - 0.5,
            (el.to_degrees() - self.el_min_deg) / self.el_step_deg() - 0.5,
        )
    }

    /// Same extents (to f32 precision) and dimensions.
    pub fn same_as(&self, other: &AngularGrid) -> bool {
        let close = |a: f64, b: f64| (a as f32) == (b as f32);
        self.n_az == other.n_az
            && self.n_el == other.n_el
            && close(self.az_min_deg, other.az_min_deg)
            && close(self.az_max_deg, other.az_max_deg)
            && close(self.el_min_deg, other.el_min_deg)
            && close(self.el_max_deg, other.el_max_deg)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Ray {
    pub origin: Vec3,
    pub dir: Vec3,
}

/// Precomputed shear/permutation for the watertight ray/triangle test.
#[derive(Debug, Clone, Copy)]
struct RayShear {
    kx: usize,
    ky: usize,
    kz: usize,
    sx: f64,
    sy: f64,
    sz: f64,
}

impl RayShear {
    fn new(dir: &Vec3) -> Self {
        let a = dir.abs();
        let kz = if a.x >= a.y && a.x >= a.z {
            0
        } else if a.y >= a.z {
            1
        } else {
            2
        };
        let mut kx = (kz + 1) % 3;
        let mut ky = (kx + 1) % 3;
        if dir[kz] < 0.0 {
            std::mem::swap(&mut kx, &mut ky);
        }
        Self {
            kx,
            ky,
            kz,
            sx: dir[kx] / dir[kz],
            sy: dir[ky] / dir[kz],
            sz: 1.0 / dir[kz],
        }
    }
}

/// Two-sided watertight ray/triangle intersection. Returns the ray
/// parameter `t > 0` of the hit. Edges shared by two triangles are never
/// missed by both.
fn intersect_sheared(ray: &Ray, s: &RayShear, tri: &[Vec3; 3]) -> Option<f64> {
    let a = tri[0] - ray.origin;
    let b = tri[1] - ray.origin;
    let c = tri[2] - ray.origin;
    let ax = a[s.kx] - s.sx * a[s.kz];
    let ay = a[s.ky] - s.sy * a[s.kz];
    let bx = b[s.kx] - s.sx * b[s.kz];
    let by = b[s.ky] - s.sy * b[s.kz];
    let cx = c[s.kx] - s.sx * c[s.kz];
    let cy = c[s.ky] - s.sy * c[s.kz];

    let u = cx * by - cy * bx;
    let v = ax * cy - ay * cx;
    let w = bx * ay - by * ax;
    if (u < 0.0 || v < 0.0 || w < 0.0) && (u > 0.0 || v > 0.0 || w > 0.0) {
        return None;
    }
    let det = u + v + w;
    if det == 0.0 {
        return None;
    }
    let az = s.sz * a[s.kz];
    let bz = s.sz * b[s.kz];
    let cz = s.sz * c[s.kz];
    let t = u * az + v * bz + w * cz;
    if (det < 0.0 && t >= 0.0) || (det > 0.0 && t <= 0.0) {
        return None;
    }
    Some(t / det)
}

pub fn intersect_triangle(ray: &Ray, tri: &[Vec3; 3]) -> Option<f64> {
    intersect_sheared(ray, &RayShear::new(&ray.dir), tri)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn empty() -> Self {
        Self {
            min: Vec3::repeat(f64::INFINITY),
            max: Vec3::repeat(f64::NEG_INFINITY),
        }
    }

    pub fn grow(&mut self, p: &Vec3) {
        self.min = self.min.inf(p);
        self.max = self.max.sup(p);
    }

    pub fn merge(&self, o: &Aabb) -> Aabb {
        Aabb {
            min: self.min.inf(&o.min),
            max: self.max.sup(&o.max),
        }
    }

    pub fn center(&self) -> Vec3 {
        (self.min + self.max) * 0.5
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        (0..3).all(|k| p[k] >= self.min[k] && p[k] <= self.max[k])
    }

    /// Slab test; returns the entry parameter if the ray meets the box
    /// before `t_max`.
    fn hit(&self, ray: &Ray, inv: &Vec3, t_max: f64) -> Option<f64> {
        // Relative slack so coplanar triangles tied with the current best
        // are not culled by rounding in the slab arithmetic.
        const SLACK: f64 = 1.0 + 1e-9;
        let mut t0 = 0.0f64;
        let mut t1 = t_max * SLACK;
        for k in 0..3 {
            let mut a = (self.min[k] - ray.origin[k]) * inv[k];
            let mut b = (self.max[k] - ray.origin[k]) * inv[k];
            if a > b {
                std::mem::swap(&mut a, &mut b);
            }
            // NaN from 0·∞ means the ray lies in the slab plane; keep it.
            if a.is_nan() || b.is_nan() {
                if ray.origin[k] < self.min[k] || ray.origin[k] > self.max[k] {
                    return None;
                }
                continue;
            }
            t0 = t0.max(a);
            t1 = t1.min(b * SLACK);
            if t0 > t1 {
                return None;
            }
        }
        Some(t0)
    }
}

#[derive(Debug, Clone, Copy)]
enum NodeKind {
    Leaf { start: u32, count: u32 },
    Inner { left: u32, right: u32 },
}

#[derive(Debug, Clone, Copy)]
struct Node {
    bounds: Aabb,
    kind: NodeKind,
}

/// Closest hit along a ray.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    pub t: f64,
    pub triangle: usize,
}

/// Bounding-volume hierarchy over a flat triangle soup.
///
/// Ties in hit distance resolve to the lowest triangle index, independent of
/// traversal order.
#[derive(Debug, Clone)]
pub struct Bvh {
    triangles: Vec<[Vec3; 3]>,
    order: Vec<u32>,
    nodes: Vec<Node>,
}

const LEAF_SIZE: usize = 4;

impl Bvh {
    pub fn build(triangles: Vec<[Vec3; 3]>) -> Self {
        let mut order: Vec<u32> = (0..triangles.len() as u32).collect();
        let centroids: Vec<Vec3> = triangles
            .iter()
            .map(|t| (t[0] + t[1] + t[2]) / 3.0)
            .collect();
        let mut nodes = Vec::new();
        if !triangles.is_empty() {
            Self::build_node(&triangles, &centroids, &mut order, 0, triangles.len(), &mut nodes);
        }
        Self {
            triangles,
            order,
            nodes,
        }
    }

    fn build_node(
        tris: &[[Vec3; 3]],
        centroids: &[Vec3],
        order: &mut [u32],
        start: usize,
        end: usize,
        nodes: &mut Vec<Node>,
    ) -> u32 {
        let mut bounds = Aabb::empty();
        let mut cbounds = Aabb::empty();
        for &i in &order[start..end] {
            for v in &tris[i as usize] {
                bounds.grow(v);
            }
            cbounds.grow(&centroids[i as usize]);
        }
        let id = nodes.len() as u32;
        nodes.push(Node {
            bounds,
            kind: NodeKind::Leaf {
                start: start as u32,
                count: (end - start) as u32,
            },
        });
        let extent = cbounds.max - cbounds.min;
        if end - start <= LEAF_SIZE || extent.max() <= 0.0 {
            return id;
        }
        let axis = extent.imax();
        let slice = &mut order[start..end];
        let mid = slice.len() / 2;
        slice.select_nth_unstable_by(mid, |&a, &b| {
            centroids[a as usize][axis]
                .total_cmp(&centroids[b as usize][axis])
                .then(a.cmp(&b))
        });
        let left = Self::build_node(tris, centroids, order, start, start + mid, nodes);
        let right = Self::build_node(tris, centroids, order, start + mid, end, nodes);
        nodes[id as usize].kind = NodeKind::Inner { left, right };
        id
    }

    pub fn triangles(&self) -> &[[Vec3; 3]] {
        &self.triangles
    }

    pub fn len(&self) -> usize {
        self.triangles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    /// Nearest hit with `t < t_max`; ties go to the lowest triangle index.
    pub fn closest_hit(&self, ray: &Ray, t_max: f64) -> Option<Hit> {
        if self.nodes.is_empty() {
            return None;
        }
        let shear = RayShear::new(&ray.dir);
        let inv = ray.dir.map(|d| 1.0 / d);
        let mut best: Option<Hit> = None;
        let mut limit = t_max;
        let mut stack = Vec::with_capacity(64);
        stack.push(0u32);
        while let Some(n) = stack.pop() {
            let node = &self.nodes[n as usize];
            if node.bounds.hit(ray, &inv, limit).is_none() {
                continue;
            }
            match node.kind {
                NodeKind::Leaf { start, count } => {
                    for &ti in &self.order[start as usize..(start + count) as usize] {
                        let ti = ti as usize;
                        if let Some(t) = intersect_sheared(ray, &shear, &self.triangles[ti]) {
                            let better = match best {
                                None => t < t_max,
                                Some(b) => t < b.t || (t == b.t && ti < b.triangle),
                            };
                            if better {
                                best = Some(Hit { t, triangle: ti });
                                limit = t;
                            }
                        }
                    }
                }
                NodeKind::Inner { left, right } => {
                    stack.push(right);
                    stack.push(left);
                }
            }
        }
        best
    }

    /// Number of triangle crossings along a ray (for inside/outside parity).
    pub fn count_crossings(&self, ray: &Ray) -> usize {
        let shear = RayShear::new(&ray.dir);
        self.triangles
            .iter()
            .filter(|t| intersect_sheared(ray, &shear, t).is_some())
            .count()
    }
}
