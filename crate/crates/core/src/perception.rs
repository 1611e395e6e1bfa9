//! Vehicle metrics from a depth-map: range to the closest point, box size,
//! heading, and how much of the true surface a candidate image misses or
//! invents.

use std::cmp::Ordering;

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::geometry::{AngularGrid, Vec3};
use crate::groundtruth::{DepthMap2D, INVALID_DEPTH};
use crate::scene::{Scene, WorldScene};
use crate::{HawkError, Result};

type P2 = Vector2<f64>;

/// Pixel radius within which a candidate pixel may match a truth pixel.
pub const MATCH_RADIUS_PX: usize = 2;
/// Depth difference allowed between matched pixels (m).
pub const DEPTH_TOLERANCE_M: f64 = 0.3;

/// Ground truth for one vehicle, in the radar-relative frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneAnnotations {
    pub vehicle_id: u32,
    /// Distance from the radar to the nearest point of the vehicle surface.
    pub closest_range_m: f64,
    pub length_m: f64,
    pub width_m: f64,
    pub height_m: f64,
    /// Heading of the vehicle's long axis, counter-clockwise from `+y`, in [0, 360).
    pub yaw_deg: f64,
    pub grid: AngularGrid,
    /// Run lengths of the vehicle pixel mask in row-major order, starting
    /// with a run of background pixels.
    pub mask_rle: Vec<u32>,
    /// Ground-truth depth of each masked pixel, in mask order.
    pub depths: Vec<f32>,
}

impl SceneAnnotations {
    /// Annotates vehicle `index` of `scene`. `world` is the same scene
    /// flattened, `truth` its ground-truth depth-map and `owners` the vehicle
    /// id seen at each truth pixel.
    pub fn new(scene: &Scene, index: usize, world: &WorldScene, truth: &DepthMap2D, owners: &[Option<u32>]) -> Self {
        let v = &scene.vehicles[index];
        let local = v.mesh.bounds();
        let posed = &world.vehicles[index].mesh;
        let closest = (0..posed.triangles().len())
            .map(|t| point_triangle_distance(&world.radar_origin, &posed.triangle(t)))
            .fold(f64::INFINITY, f64::min);
        let mut mask_rle = Vec::new();
        let mut depths = Vec::new();
        let mut run = 0u32;
        let mut state = false;
        for (&d, &owner) in truth.data.iter().zip(owners) {
            let on = d != INVALID_DEPTH && owner == Some(v.id);
            if on != state {
                mask_rle.push(run);
                run = 0;
                state = on;
            }
            run += 1;
            if on {
                depths.push(d);
            }
        }
        mask_rle.push(run);
        Self {
            vehicle_id: v.id,
            closest_range_m: closest,
            length_m: local.max.y - local.min.y,
            width_m: local.max.x - local.min.x,
            height_m: local.max.z - local.min.z,
            yaw_deg: v.pose.yaw().to_degrees().rem_euclid(360.0),
            grid: truth.grid,
            mask_rle,
            depths,
        }
    }

    pub fn mask(&self) -> Vec<bool> {
        let mut m = Vec::with_capacity(self.grid.len());
        for (k, &run) in self.mask_rle.iter().enumerate() {
            m.extend(std::iter::repeat_n(k % 2 == 1, run as usize));
        }
        m
    }

    /// Truth depth-map restricted to this vehicle.
    pub fn truth_depth_map(&self) -> Result<DepthMap2D> {
        let mask = self.mask();
        let n_on = mask.iter().filter(|&&b| b).count();
        if mask.len() != self.grid.len() || n_on != self.depths.len() {
            return Err(HawkError::Format {
                what: "annotations",
                message: format!(
                    "mask covers {} pixels with {} set, grid has {} and {} depths are listed",
                    mask.len(),
                    n_on,
                    self.grid.len(),
                    self.depths.len()
                ),
            });
        }
        let mut d = DepthMap2D::invalid(self.grid);
        let mut it = self.depths.iter();
        for (px, on) in d.data.iter_mut().zip(mask) {
            if on {
                *px = *it.next().expect("counted above");
            }
        }
        Ok(d)
    }
}

fn point_triangle_distance(p: &Vec3, tri: &[Vec3; 3]) -> f64 {
    // Closest point by region tests on the barycentric domain.
    let [a, b, c] = *tri;
    let (ab, ac, ap) = (b - a, c - a, p - a);
    let (d1, d2) = (ab.dot(&ap), ac.dot(&ap));
    if d1 <= 0.0 && d2 <= 0.0 {
        return ap.norm();
    }
    let bp = p - b;
    let (d3, d4) = (ab.dot(&bp), ac.dot(&bp));
    if d3 >= 0.0 && d4 <= d3 {
        return bp.norm();
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        return (p - (a + ab * (d1 / (d1 - d3)))).norm();
    }
    let cp = p - c;
    let (d5, d6) = (ab.dot(&cp), ac.dot(&cp));
    if d6 >= 0.0 && d5 <= d6 {
        return cp.norm();
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        return (p - (a + ac * (d2 / (d2 - d6)))).norm();
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return (p - (b + (c - b) * w)).norm();
    }
    let denom = 1.0 / (va + vb + vc);
    (p - (a + ab * (vb * denom) + ac * (vc * denom))).norm()
}

/// One radar-relative point per valid pixel.
pub fn to_point_cloud(d: &DepthMap2D) -> Vec<Vec3> {
    let mut out = Vec::with_capacity(d.valid_count());
    for el in 0..d.height() {
        for az in 0..d.width() {
            if d.is_valid(az, el) {
                out.push(d.point(az, el));
            }
        }
    }
    out
}

/// Oriented box: top-view rectangle plus vertical extent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrientedBox {
    pub center: [f64; 3],
    pub length_m: f64,
    pub width_m: f64,
    pub height_m: f64,
    /// Direction of the longer edge, counter-clockwise from `+y`, in [0, 180).
    pub yaw_deg: f64,
}

impl OrientedBox {
    /// Distance from `p` to the nearest point of the box (0 inside).
    pub fn distance_to(&self, p: &Vec3) -> f64 {
        let yaw = self.yaw_deg.to_radians();
        let (s, c) = yaw.sin_cos();
        let d = p - Vec3::from(self.center);
        // Long axis along (−sin, cos), short axis along (cos, sin).
        let along = -s * d.x + c * d.y;
        let across = c * d.x + s * d.y;
        let ex = (across.abs() - self.width_m / 2.0).max(0.0);
        let ey = (along.abs() - self.length_m / 2.0).max(0.0);
        let ez = (d.z.abs() - self.height_m / 2.0).max(0.0);
        (ex * ex + ey * ey + ez * ez).sqrt()
    }
}

fn cross(o: &P2, a: &P2, b: &P2) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

/// Counter-clockwise convex hull (Andrew's monotone chain), collinear points dropped.
pub fn convex_hull(points: &[P2]) -> Vec<P2> {
    let mut pts: Vec<P2> = points.to_vec();
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut hull: Vec<P2> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &P2>> = if pass == 0 {
            Box::new(pts.iter())
        } else {
            Box::new(pts.iter().rev())
        };
        for p in iter {
            while hull.len() >= start + 2 && cross(&hull[hull.len() - 2], &hull[hull.len() - 1], p) <= 0.0 {
                hull.pop();
            }
            hull.push(*p);
        }
        hull.pop();
    }
    hull
}

fn yaw_of(v: &P2) -> f64 {
    (-v.x).atan2(v.y).to_degrees().rem_euclid(180.0) % 180.0
}

/// Minimum-area enclosing rectangle of the top view (rotating calipers over
/// the hull edges) and the vertical extent of the cloud.
pub fn estimate_box(cloud: &[Vec3]) -> Result<OrientedBox> {
    let top: Vec<P2> = cloud.iter().map(|p| P2::new(p.x, p.y)).collect();
    let hull = convex_hull(&top);
    if hull.len() < 3 {
        return Err(HawkError::Degenerate(format!(
            "{} points give a top-view hull of {} vertices",
            cloud.len(),
            hull.len()
        )));
    }
    let scale = hull.iter().map(|p| p.norm()).fold(1.0, f64::max);
    let mut best: Option<(f64, P2, [f64; 4])> = None;
    for i in 0..hull.len() {
        let e = hull[(i + 1) % hull.len()] - hull[i];
        let u = e / e.norm();
        let n = P2::new(-u.y, u.x);
        let (mut umin, mut umax, mut nmin, mut nmax) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for p in &hull {
            let (a, b) = (p.dot(&u), p.dot(&n));
            umin = umin.min(a);
            umax = umax.max(a);
            nmin = nmin.min(b);
            nmax = nmax.max(b);
        }
        let area = (umax - umin) * (nmax - nmin);
        if best.as_ref().is_none_or(|(a, _, _)| area < *a - 1e-12 * scale * scale) {
            best = Some((area, u, [umin, umax, nmin, nmax]));
        }
    }
    let (area, u, [umin, umax, nmin, nmax]) = best.expect("hull has edges");
    if area <= 1e-12 * scale * scale {
        return Err(HawkError::Degenerate("top-view points are collinear".into()));
    }
    let n = P2::new(-u.y, u.x);
    let c2 = u * (umin + umax) / 2.0 + n * (nmin + nmax) / 2.0;
    let (du, dn) = (umax - umin, nmax - nmin);
    let (length, width, long_dir) = if du >= dn { (du, dn, u) } else { (dn, du, n) };
    let (zmin, zmax) = cloud
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.z), b.max(p.z)));
    Ok(OrientedBox {
        center: [c2.x, c2.y, (zmin + zmax) / 2.0],
        length_m: length,
        width_m: width,
        height_m: zmax - zmin,
        yaw_deg: yaw_of(&long_dir),
    })
}

/// Coverage scores in percent: truth pixels with no matching candidate pixel,
/// and candidate pixels with no matching truth pixel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShapeScores {
    pub pct_surface_missed: f64,
    pub pct_fictitious: f64,
}

/// Two pixels match when they lie within `radius_px` (Euclidean, in pixels)
/// and their depths differ by at most `tolerance_m`.
pub fn shape_metrics(
    candidate: &DepthMap2D,
    truth: &DepthMap2D,
    tolerance_m: f64,
    radius_px: usize,
) -> Result<ShapeScores> {
    candidate.check_same_grid(truth)?;
    let (w, h) = (truth.width() as isize, truth.height() as isize);
    let r = radius_px as isize;
    let offsets: Vec<(isize, isize)> = (-r..=r)
        .flat_map(|dy| (-r..=r).map(move |dx| (dx, dy)))
        .filter(|(dx, dy)| dx * dx + dy * dy <= r * r)
        .collect();
    let matched = |from: &DepthMap2D, to: &DepthMap2D| -> (usize, usize) {
        let (mut valid, mut hit) = (0, 0);
        for y in 0..h {
            for x in 0..w {
                let d = from.get(x as usize, y as usize);
                if d == INVALID_DEPTH {
                    continue;
                }
                valid += 1;
                let found = offsets.iter().any(|&(dx, dy)| {
                    let (xx, yy) = (x + dx, y + dy);
                    if xx < 0 || yy < 0 || xx >= w || yy >= h {
                        return false;
                    }
                    let o = to.get(xx as usize, yy as usize);
                    o != INVALID_DEPTH && ((o - d).abs() as f64) <= tolerance_m
                });
                if found {
                    hit += 1;
                }
            }
        }
        (valid, hit)
    };
    let pct = |num: usize, den: usize| if den == 0 { 0.0 } else { 100.0 * num as f64 / den as f64 };
    let (n_truth, covered) = matched(truth, candidate);
    let (n_cand, real) = matched(candidate, truth);
    Ok(ShapeScores {
        pct_surface_missed: pct(n_truth - covered, n_truth),
        pct_fictitious: pct(n_cand - real, n_cand),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricErrors {
    pub range_m: f64,
    pub length_m: f64,
    pub width_m: f64,
    pub height_m: f64,
    /// Heading error folded into [0°, 90°].
    pub orientation_deg: f64,
}

/// Estimated quantities and their absolute errors. When the candidate has too
/// few points for a box, `degenerate` is set and the box-derived fields are
/// `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub range_m: Option<f64>,
    pub length_m: Option<f64>,
    pub width_m: Option<f64>,
    pub height_m: Option<f64>,
    pub orientation_deg: Option<f64>,
    pub pct_surface_missed: f64,
    pub pct_fictitious: f64,
    pub errors: Option<MetricErrors>,
    pub degenerate: bool,
}

/// Heading difference modulo the 180° ambiguity of a rectangle, in [0, 90].
pub fn fold_orientation_error(a_deg: f64, b_deg: f64) -> f64 {
    let e = (a_deg - b_deg).rem_euclid(180.0);
    e.min(180.0 - e)
}

pub fn evaluate(candidate: &DepthMap2D, ann: &SceneAnnotations) -> Result<MetricsReport> {
    let truth = ann.truth_depth_map()?;
    let shape = shape_metrics(candidate, &truth, DEPTH_TOLERANCE_M, MATCH_RADIUS_PX)?;
    let cloud = to_point_cloud(candidate);
    let mut report = MetricsReport {
        range_m: None,
        length_m: None,
        width_m: None,
        height_m: None,
        orientation_deg: None,
        pct_surface_missed: shape.pct_surface_missed,
        pct_fictitious: shape.pct_fictitious,
        errors: None,
        degenerate: true,
    };
    let Ok(b) = estimate_box(&cloud) else {
        return Ok(report);
    };
    let range = b.distance_to(&Vec3::zeros());
    report.range_m = Some(range);
    report.length_m = Some(b.length_m);
    report.width_m = Some(b.width_m);
    report.height_m = Some(b.height_m);
    report.orientation_deg = Some(b.yaw_deg);
    report.errors = Some(MetricErrors {
        range_m: (range - ann.closest_range_m).abs(),
        length_m: (b.length_m - ann.length_m).abs(),
        width_m: (b.width_m - ann.width_m).abs(),
        height_m: (b.height_m - ann.height_m).abs(),
        orientation_deg: fold_orientation_error(b.yaw_deg, ann.yaw_deg),
    });
    report.degenerate = false;
    Ok(report)
}

/// Median and 90th percentile of one metric over a batch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Spread {
    pub median: f64,
    pub p90: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchSummary {
    pub samples: usize,
    pub degenerate: usize,
    pub range_error_m: Option<Spread>,
    pub length_error_m: Option<Spread>,
    pub width_error_m: Option<Spread>,
    pub height_error_m: Option<Spread>,
    pub orientation_error_deg: Option<Spread>,
    pub pct_surface_missed: Option<Spread>,
    pub pct_fictitious: Option<Spread>,
}

/// Linear-interpolated percentile (`q` in [0, 1]); `None` for no values.
pub fn percentile(values: &[f64], q: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    Some(v[lo] + (v[hi] - v[lo]) * (pos - lo as f64))
}

pub fn summarize(reports: &[MetricsReport]) -> BatchSummary {
    let spread = |vals: Vec<f64>| {
        Some(Spread {
            median: percentile(&vals, 0.5)?,
            p90: percentile(&vals, 0.9)?,
        })
    };
    let errs: Vec<MetricErrors> = reports.iter().filter_map(|r| r.errors).collect();
    let pick = |f: fn(&MetricErrors) -> f64| spread(errs.iter().map(f).collect());
    BatchSummary {
        samples: reports.len(),
        degenerate: reports.iter().filter(|r| r.degenerate).count(),
        range_error_m: pick(|e| e.range_m),
        length_error_m: pick(|e| e.length_m),
        width_error_m: pick(|e| e.width_m),
        height_error_m: pick(|e| e.height_m),
        orientation_error_deg: pick(|e| e.orientation_deg),
        pct_surface_missed: spread(reports.iter().map(|r| r.pct_surface_missed).collect()),
        pct_fictitious: spread(reports.iter().map(|r| r.pct_fictitious).collect()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn box_cloud(l: f64, w: f64, h: f64, yaw_deg: f64, center: Vec3) -> Vec<Vec3> {
        let (s, c) = yaw_deg.to_radians().sin_cos();
        let mut pts = Vec::new();
        let n = 9;
        for i in 0..=n {
            for j in 0..=n {
                for k in 0..=n {
                    let on_face = [i, j, k].iter().any(|&q| q == 0 || q == n);
                    if !on_face {
                        continue;
                    }
                    let x = (i as f64 / n as f64 - 0.5) * w;
                    let y = (j as f64 / n as f64 - 0.5) * l;
                    let z = k as f64 / n as f64 * h;
                    pts.push(center + Vec3::new(c * x - s * y, s * x + c * y, z));
                }
            }
        }
        pts
    }

    #[test]
    fn axis_aligned_box_is_exact() {
        let b = estimate_box(&box_cloud(4.0, 2.0, 1.5, 0.0, Vec3::new(1.0, 8.0, -1.0))).unwrap();
        assert!((b.length_m - 4.0).abs() < 1e-12);
        assert!((b.width_m - 2.0).abs() < 1e-12);
        assert!((b.height_m - 1.5).abs() < 1e-12);
        assert!(b.yaw_deg.abs() < 1e-9 || (b.yaw_deg - 180.0).abs() < 1e-9);
    }

    #[test]
    fn rotated_box_recovers_yaw() {
        for yaw in [30.0, 60.0, 135.0] {
            let b = estimate_box(&box_cloud(4.0, 2.0, 1.5, yaw, Vec3::new(0.0, 9.0, 0.0))).unwrap();
            assert!((b.yaw_deg - yaw).abs() < 0.5, "{} vs {yaw}", b.yaw_deg);
            assert!((b.length_m - 4.0).abs() < 0.01);
            assert!((b.width_m - 2.0).abs() < 0.01);
        }
    }

    #[test]
    fn collinear_and_tiny_clouds_are_degenerate() {
        assert!(estimate_box(&[]).is_err());
        let line: Vec<Vec3> = (0..10).map(|i| Vec3::new(i as f64, 2.0 * i as f64, 0.0)).collect();
        assert!(matches!(estimate_box(&line), Err(HawkError::Degenerate(_))));
    }

    #[test]
    fn box_distance_is_zero_inside_and_euclidean_outside() {
        let b = OrientedBox {
            center: [0.0, 10.0, 0.0],
            length_m: 4.0,
            width_m: 2.0,
            height_m: 2.0,
            yaw_deg: 90.0,
        };
        // Long axis points along −x at yaw 90°.
        assert_eq!(b.distance_to(&Vec3::new(0.0, 10.0, 0.0)), 0.0);
        assert!((b.distance_to(&Vec3::zeros()) - 9.0).abs() < 1e-12);
        assert!((b.distance_to(&Vec3::new(5.0, 10.0, 0.0)) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn boresight_pixel_projects_onto_y_axis() {
        let grid = AngularGrid::new((-1.0, 1.0), 1, (-1.0, 1.0), 1);
        let mut d = DepthMap2D::invalid(grid);
        assert!(to_point_cloud(&d).is_empty());
        d.set(0, 0, 10.0);
        let c = to_point_cloud(&d);
        assert_eq!(c.len(), 1);
        assert!((c[0] - Vec3::new(0.0, 10.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn plate_cloud_spans_its_width_within_two_pixel_footprints() {
        use crate::groundtruth::render_depth;
        use crate::meshgen;
        use crate::scene::{Pose, Scene, Vehicle};
        use std::sync::Arc;
        let plate = meshgen::plate(Vec3::new(0.0, 10.0, 0.0), -Vec3::y(), 1.0, 1.0);
        let world = WorldScene::new(&Scene {
            radar_origin: Vec3::zeros(),
            ground_height: -2.0,
            vehicles: vec![Vehicle {
                id: 1,
                mesh: Arc::new(plate),
                pose: Pose::identity(),
            }],
        });
        let grid = AngularGrid::depth_default();
        let cloud = to_point_cloud(&render_depth(&world, &grid, 20.0));
        let footprint = 10.0 * grid.az_step_deg().to_radians();
        let (lo, hi) = cloud
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.x), b.max(p.x)));
        // Edge pixel centres fall at most one footprint inside each edge.
        let span = hi - lo;
        assert!(span <= 1.0 && span >= 1.0 - 2.0 * footprint, "span {span} vs footprint {footprint}");
    }

    fn blob(grid: AngularGrid, x0: usize, y0: usize, w: usize, h: usize, depth: f32) -> DepthMap2D {
        let mut d = DepthMap2D::invalid(grid);
        for y in y0..y0 + h {
            for x in x0..x0 + w {
                d.set(x, y, depth);
            }
        }
        d
    }

    fn union(a: &DepthMap2D, b: &DepthMap2D) -> DepthMap2D {
        let mut out = a.clone();
        for (o, &v) in out.data.iter_mut().zip(&b.data) {
            if v != INVALID_DEPTH {
                *o = v;
            }
        }
        out
    }

    #[test]
    fn shape_metric_identities() {
        let g = AngularGrid::depth_default();
        let left = blob(g, 20, 30, 30, 20, 7.0);
        let right = blob(g, 120, 30, 30, 20, 7.5);
        let truth = union(&left, &right);
        let s = shape_metrics(&truth, &truth, DEPTH_TOLERANCE_M, MATCH_RADIUS_PX).unwrap();
        assert_eq!((s.pct_surface_missed, s.pct_fictitious), (0.0, 0.0));
        let s = shape_metrics(&left, &truth, DEPTH_TOLERANCE_M, MATCH_RADIUS_PX).unwrap();
        assert_eq!((s.pct_surface_missed, s.pct_fictitious), (50.0, 0.0));
        let extra = blob(g, 200, 90, 40, 30, 9.0);
        let cand = union(&truth, &extra);
        let s = shape_metrics(&cand, &truth, DEPTH_TOLERANCE_M, MATCH_RADIUS_PX).unwrap();
        assert_eq!((s.pct_surface_missed, s.pct_fictitious), (0.0, 50.0));
        let small = DepthMap2D::invalid(AngularGrid::heatmap_default());
        assert!(matches!(
            shape_metrics(&small, &truth, DEPTH_TOLERANCE_M, MATCH_RADIUS_PX),
            Err(HawkError::DimensionMismatch(_))
        ));
    }

    #[test]
    fn exact_matching_half_deletion_of_interleaved_pixels() {
        let g = AngularGrid::heatmap_default();
        let truth = blob(g, 10, 10, 20, 10, 5.0);
        let mut cand = truth.clone();
        for (i, px) in cand.data.iter_mut().enumerate() {
            if *px != INVALID_DEPTH && i % 2 == 0 {
                *px = INVALID_DEPTH;
            }
        }
        let s = shape_metrics(&cand, &truth, DEPTH_TOLERANCE_M, 0).unwrap();
        assert_eq!((s.pct_surface_missed, s.pct_fictitious), (50.0, 0.0));
    }

    #[test]
    fn depth_tolerance_is_respected() {
        let g = AngularGrid::heatmap_default();
        let truth = blob(g, 10, 10, 5, 5, 5.0);
        let near = blob(g, 10, 10, 5, 5, 5.25);
        let far = blob(g, 10, 10, 5, 5, 5.5);
        assert_eq!(shape_metrics(&near, &truth, 0.3, 2).unwrap().pct_surface_missed, 0.0);
        let s = shape_metrics(&far, &truth, 0.3, 2).unwrap();
        assert_eq!((s.pct_surface_missed, s.pct_fictitious), (100.0, 100.0));
    }

    #[test]
    fn empty_candidate_is_degenerate_without_panicking() {
        let g = AngularGrid::depth_default();
        let truth = blob(g, 100, 50, 30, 20, 8.0);
        let ann = annotations_for(&truth, 8.0, 0.0);
        let r = evaluate(&DepthMap2D::invalid(g), &ann).unwrap();
        assert!(r.degenerate);
        assert!(r.errors.is_none());
        assert_eq!(r.pct_surface_missed, 100.0);
        assert_eq!(r.pct_fictitious, 0.0);
        let json = serde_json::to_string(&r).unwrap();
        assert!(json.contains("\"range_m\":null"));
    }

    fn annotations_for(truth: &DepthMap2D, range: f64, yaw: f64) -> SceneAnnotations {
        let mut mask_rle = Vec::new();
        let (mut run, mut state) = (0u32, false);
        let mut depths = Vec::new();
        for &d in &truth.data {
            let on = d != INVALID_DEPTH;
            if on != state {
                mask_rle.push(run);
                run = 0;
                state = on;
            }
            run += 1;
            if on {
                depths.push(d);
            }
        }
        mask_rle.push(run);
        SceneAnnotations {
            vehicle_id: 1,
            closest_range_m: range,
            length_m: 4.0,
            width_m: 2.0,
            height_m: 1.5,
            yaw_deg: yaw,
            grid: truth.grid,
            mask_rle,
            depths,
        }
    }

    #[test]
    fn annotation_mask_round_trips() {
        let g = AngularGrid::heatmap_default();
        let truth = union(&blob(g, 0, 0, 3, 2, 4.0), &blob(g, 60, 31, 4, 1, 6.0));
        let ann = annotations_for(&truth, 4.0, 10.0);
        assert_eq!(ann.truth_depth_map().unwrap(), truth);
        assert_eq!(ann.mask().len(), g.len());
    }

    #[test]
    fn orientation_error_folds() {
        assert_eq!(fold_orientation_error(10.0, 190.0), 0.0);
        assert_eq!(fold_orientation_error(0.0, 100.0), 80.0);
        assert_eq!(fold_orientation_error(179.0, 1.0), 2.0);
        assert_eq!(fold_orientation_error(45.0, 135.0), 90.0);
    }

    #[test]
    fn summary_percentiles() {
        assert_eq!(percentile(&[3.0, 1.0, 2.0], 0.5), Some(2.0));
        assert!((percentile(&(1..=11).map(f64::from).collect::<Vec<_>>(), 0.9).unwrap() - 10.0).abs() < 1e-12);
        assert_eq!(percentile(&[], 0.5), None);
        let r = MetricsReport {
            range_m: None,
            length_m: None,
            width_m: None,
            height_m: None,
            orientation_deg: None,
            pct_surface_missed: 40.0,
            pct_fictitious: 10.0,
            errors: None,
            degenerate: true,
        };
        let s = summarize(&[r.clone(), r]);
        assert_eq!(s.degenerate, 2);
        assert!(s.range_error_m.is_none());
        assert_eq!(s.pct_surface_missed.unwrap().median, 40.0);
    }

    fn arb_depth_map() -> impl Strategy<Value = DepthMap2D> {
        let g = AngularGrid::new((-10.0, 10.0), 24, (-5.0, 5.0), 12);
        proptest::collection::vec(prop_oneof![Just(0.0f32), 1.0f32..9.0], g.len())
            .prop_map(move |data| DepthMap2D { grid: g, data })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn yaw_is_rotation_equivariant(alpha in 0.0..180.0f64, l in 3.0..5.0f64, w in 1.5..2.2f64) {
            let base = estimate_box(&box_cloud(l, w, 1.4, 0.0, Vec3::new(0.0, 8.0, 0.0))).unwrap();
            let rot = estimate_box(&box_cloud(l, w, 1.4, alpha, Vec3::new(0.0, 8.0, 0.0))).unwrap();
            prop_assert!(fold_orientation_error(rot.yaw_deg, base.yaw_deg + alpha) < 0.5);
            prop_assert!((rot.length_m - base.length_m).abs() < 0.01);
            prop_assert!((rot.width_m - base.width_m).abs() < 0.01);
        }

        #[test]
        fn self_comparison_is_perfect(a in arb_depth_map()) {
            let s = shape_metrics(&a, &a, DEPTH_TOLERANCE_M, MATCH_RADIUS_PX).unwrap();
            prop_assert_eq!((s.pct_surface_missed, s.pct_fictitious), (0.0, 0.0));
        }

        #[test]
        fn deleting_candidate_pixels_never_lowers_missed(
            truth in arb_depth_map(),
            cand in arb_depth_map(),
            drop in proptest::collection::vec(any::<bool>(), 288),
        ) {
            let mut fewer = cand.clone();
            for (px, d) in fewer.data.iter_mut().zip(&drop) {
                if *d {
                    *px = INVALID_DEPTH;
                }
            }
            let before = shape_metrics(&cand, &truth, DEPTH_TOLERANCE_M, MATCH_RADIUS_PX).unwrap();
            let after = shape_metrics(&fewer, &truth, DEPTH_TOLERANCE_M, MATCH_RADIUS_PX).unwrap();
            prop_assert!(after.pct_surface_missed >= before.pct_surface_missed);
        }

        #[test]
        fn adding_unmatched_pixels_never_lowers_fictitious(
            truth in arb_depth_map(),
            cand in arb_depth_map(),
            add in proptest::collection::vec(any::<bool>(), 288),
        ) {
            // Pixels far deeper than any truth depth cannot match.
            let mut more = cand.clone();
            for (px, a) in more.data.iter_mut().zip(&add) {
                if *a && *px == INVALID_DEPTH {
                    *px = 50.0;
                }
            }
            let before = shape_metrics(&cand, &truth, DEPTH_TOLERANCE_M, MATCH_RADIUS_PX).unwrap();
            let after = shape_metrics(&more, &truth, DEPTH_TOLERANCE_M, MATCH_RADIUS_PX).unwrap();
            prop_assert!(after.pct_fictitious >= before.pct_fictitious);
        }
    }
}
