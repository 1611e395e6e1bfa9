//! Radar cross-section model: visible surfaces become clouds of point
//! reflectors, each tagged as specular, diffuse or corner.

use std::collections::{BTreeSet, HashMap};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geometry::{AngularGrid, Vec3};
use crate::scene::{spherical_project, TriangleMesh, TriangleRef, WorldScene};
use crate::{HawkError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RcsConfig {
    /// Sampling density, points per m² of visible surface.
    pub density: f64,
    /// Normal-to-radar angle above which a surface returns no direct echo.
    pub specular_threshold_deg: f64,
    /// Edges whose interior dihedral angle is at most this are corners.
    pub corner_dihedral_deg: f64,
    pub corner_radius_m: f64,
    /// Amplitude multiplier for corner points.
    pub corner_gain: f64,
    pub seed: u64,
}

impl Default for RcsConfig {
    fn default() -> Self {
        Self {
            density: 200.0,
            specular_threshold_deg: 30.0,
            corner_dihedral_deg: 120.0,
            corner_radius_m: 0.05,
            corner_gain: 4.0,
            seed: 0,
        }
    }
}

impl RcsConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.density) {
            return Err(HawkError::config("rcs.density", "must be > 0"));
        }
        if !(0.0..=90.0).contains(&self.specular_threshold_deg) {
            return Err(HawkError::config("rcs.specular_threshold_deg", "must lie in [0, 90]"));
        }
        if !(0.0..=180.0).contains(&self.corner_dihedral_deg) {
            return Err(HawkError::config("rcs.corner_dihedral_deg", "must lie in [0, 180]"));
        }
        if !(self.corner_radius_m.is_finite() && self.corner_radius_m >= 0.0) {
            return Err(HawkError::config("rcs.corner_radius_m", "must be >= 0"));
        }
        if !(self.corner_gain.is_finite() && self.corner_gain >= 0.0) {
            return Err(HawkError::config("rcs.corner_gain", "must be >= 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScatterClass {
    /// Mirror-like surface angled away from the radar; no direct echo.
    Specular,
    Diffuse,
    Corner,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointReflector {
    pub position: Vec3,
    /// Linear amplitude, non-negative.
    pub reflectivity: f64,
    /// Unit normal, oriented towards the radar side of the surface.
    pub normal: Vec3,
    pub class: ScatterClass,
    pub vehicle_id: u32,
    pub triangle: TriangleRef,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointReflectorCloud {
    pub points: Vec<PointReflector>,
}

impl PointReflectorCloud {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn count(&self, class: ScatterClass) -> usize {
        self.points.iter().filter(|p| p.class == class).count()
    }
}

/// Triangles that win at least one pixel of the spherical projection.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct VisibleSet {
    pub triangles: BTreeSet<TriangleRef>,
}

impl VisibleSet {
    pub fn for_vehicle(&self, vehicle: usize) -> usize {
        self.triangles.iter().filter(|t| t.vehicle == vehicle).count()
    }

    pub fn area(&self, world: &WorldScene) -> f64 {
        self.triangles
            .iter()
            .map(|t| world.vehicles[t.vehicle].mesh.triangle_area(t.triangle))
            .sum()
    }
}

pub fn cull_occluded(world: &WorldScene, grid: &AngularGrid) -> VisibleSet {
    let proj = spherical_project(world, grid);
    VisibleSet {
        triangles: proj.pixels.iter().flatten().map(|h| h.triangle).collect(),
    }
}

/// Mesh edges shared by two faces whose interior dihedral angle is at most
/// `max_dihedral_deg`. Vertices are welded on a 1 µm lattice first so that
/// separately modelled panels meeting along a seam count as adjacent.
pub fn corner_edges(mesh: &TriangleMesh, max_dihedral_deg: f64) -> Vec<[Vec3; 2]> {
    let key = |v: &Vec3| {
        let q = |c: f64| (c * 1e6).round() as i64;
        (q(v.x), q(v.y), q(v.z))
    };
    let mut weld: HashMap<(i64, i64, i64), usize> = HashMap::new();
    let mut canon = Vec::with_capacity(mesh.vertices().len());
    let mut reps: Vec<Vec3> = Vec::new();
    for v in mesh.vertices() {
        let next = reps.len();
        let id = *weld.entry(key(v)).or_insert(next);
        if id == next {
            reps.push(*v);
        }
        canon.push(id);
    }
    let mut edges: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
    for (f, t) in mesh.triangles().iter().enumerate() {
        for k in 0..3 {
            let a = canon[t[k] as usize];
            let b = canon[t[(k + 1) % 3] as usize];
            if a != b {
                edges.entry((a.min(b), a.max(b))).or_default().push(f);
            }
        }
    }
    let mut out: Vec<((usize, usize), [Vec3; 2])> = edges
        .into_iter()
        .filter(|(_, faces)| faces.len() == 2)
        .filter_map(|((a, b), faces)| {
            let (n1, n2) = (mesh.normals()[faces[0]], mesh.normals()[faces[1]]);
            let dihedral = 180.0 - n1.dot(&n2).clamp(-1.0, 1.0).acos().to_degrees();
            (dihedral <= max_dihedral_deg).then_some(((a, b), [reps[a], reps[b]]))
        })
        .collect();
    out.sort_by_key(|(k, _)| *k);
    out.into_iter().map(|(_, e)| e).collect()
}

fn point_segment_distance(p: &Vec3, seg: &[Vec3; 2]) -> f64 {
    let d = seg[1] - seg[0];
    let len2 = d.norm_squared();
    let t = if len2 > 0.0 {
        ((p - seg[0]).dot(&d) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (p - (seg[0] + d * t)).norm()
}

/// Angle in degrees between a surface normal and the direction from the
/// surface point back to the radar, after orienting the normal towards it.
pub fn incidence_deg(normal: &Vec3, point: &Vec3, radar: &Vec3) -> f64 {
    let to_radar = (radar - point).normalize();
    normal.dot(&to_radar).abs().clamp(0.0, 1.0).acos().to_degrees()
}

/// Samples point reflectors on the visible triangles and classifies them.
///
/// Each triangle draws `⌊density·area⌋` points plus one more with probability
/// equal to the fractional part, uniformly over its surface, from its own
/// RNG stream; serial and parallel runs are therefore identical. Points whose
/// line of sight to the radar is blocked are dropped.
pub fn extract_reflectors(
    visible: &VisibleSet,
    world: &WorldScene,
    cfg: &RcsConfig,
) -> Result<PointReflectorCloud> {
    cfg.validate()?;
    let corners: Vec<Vec<[Vec3; 2]>> = world
        .vehicles
        .iter()
        .map(|v| corner_edges(&v.mesh, cfg.corner_dihedral_deg))
        .collect();
    let radar = world.radar_origin;
    let tris: Vec<TriangleRef> = visible.triangles.iter().copied().collect();
    let per_triangle: Vec<Vec<PointReflector>> = tris
        .par_iter()
        .map(|&tr| {
            let vehicle = &world.vehicles[tr.vehicle];
            let [a, b, c] = vehicle.mesh.triangle(tr.triangle);
            let area = vehicle.mesh.triangle_area(tr.triangle);
            let mut normal = vehicle.mesh.normals()[tr.triangle];
            if normal.dot(&(radar - a)) < 0.0 {
                normal = -normal;
            }
            let mut rng = crate::rng::stream(cfg.seed, crate::rng::RCS, world.global_index(tr) as u64);
            let expected = cfg.density * area;
            let mut n = expected.floor() as usize;
            if rng.random::<f64>() < expected - expected.floor() {
                n += 1;
            }
            let mut pts = Vec::with_capacity(n);
            for _ in 0..n {
                let r1: f64 = rng.random::<f64>().sqrt();
                let r2: f64 = rng.random();
                let p = a * (1.0 - r1) + b * (r1 * (1.0 - r2)) + c * (r1 * r2);
                if !world.visible_from_radar(&p, tr) {
                    continue;
                }
                let near_corner = corners[tr.vehicle]
                    .iter()
                    .any(|e| point_segment_distance(&p, e) <= cfg.corner_radius_m);
                let (class, reflectivity) = if near_corner {
                    (ScatterClass::Corner, cfg.corner_gain)
                } else if incidence_deg(&normal, &p, &radar) > cfg.specular_threshold_deg {
                    (ScatterClass::Specular, 1.0)
                } else {
                    (ScatterClass::Diffuse, 1.0)
                };
                pts.push(PointReflector {
                    position: p,
                    reflectivity,
                    normal,
                    class,
                    vehicle_id: vehicle.id,
                    triangle: tr,
                });
            }
            pts
        })
        .collect();
    Ok(PointReflectorCloud {
        points: per_triangle.into_iter().flatten().collect(),
    })
}
