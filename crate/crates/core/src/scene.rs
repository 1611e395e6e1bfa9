//! Vehicle meshes, poses and scenes, plus the spherical projection used by
//! occlusion culling and ground-truth rendering.

use std::collections::HashMap;
use std::f64::consts::TAU;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geometry::{Aabb, AngularGrid, Bvh, Ray, Vec3};
use crate::{HawkError, Result};

/// Indexed triangle mesh with per-triangle unit normals (meters).
#[derive(Debug, Clone, PartialEq)]
pub struct TriangleMesh {
    vertices: Vec<Vec3>,
    triangles: Vec<[u32; 3]>,
    normals: Vec<Vec3>,
}

impl TriangleMesh {
    /// Builds a mesh, dropping zero-area triangles and computing normals
    /// from the counter-clockwise winding.
    pub fn new(vertices: Vec<Vec3>, triangles: Vec<[u32; 3]>) -> Result<Self> {
        if let Some(v) = vertices.iter().find(|v| !v.iter().all(|c| c.is_finite())) {
            return Err(HawkError::Scene(format!("non-finite vertex {v:?}")));
        }
        let mut kept = Vec::with_capacity(triangles.len());
        let mut normals = Vec::with_capacity(triangles.len());
        for t in triangles {
            if t.iter().any(|&i| i as usize >= vertices.len()) {
                return Err(HawkError::Scene(format!("triangle {t:?} indexes past {} vertices", vertices.len())));
            }
            let [a, b, c] = t.map(|i| vertices[i as usize]);
            let n = (b - a).cross(&(c - a));
            let len = n.norm();
            if len > 1e-14 {
                kept.push(t);
                normals.push(n / len);
            }
        }
        Ok(Self {
            vertices,
            triangles: kept,
            normals,
        })
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[u32; 3]] {
        &self.triangles
    }

    pub fn normals(&self) -> &[Vec3] {
        &self.normals
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn triangle(&self, i: usize) -> [Vec3; 3] {
        self.triangles[i].map(|k| self.vertices[k as usize])
    }

    pub fn triangle_area(&self, i: usize) -> f64 {
        let [a, b, c] = self.triangle(i);
        0.5 * (b - a).cross(&(c - a)).norm()
    }

    pub fn area(&self) -> f64 {
        (0..self.triangles.len()).map(|i| self.triangle_area(i)).sum()
    }

    pub fn bounds(&self) -> Aabb {
        let mut b = Aabb::empty();
        for v in &self.vertices {
            b.grow(v);
        }
        b
    }

    /// Applies `f` to every vertex and recomputes normals.
    pub fn map_vertices(&self, f: impl Fn(&Vec3) -> Vec3) -> TriangleMesh {
        let vertices: Vec<Vec3> = self.vertices.iter().map(f).collect();
        let normals = self
            .triangles
            .iter()
            .map(|t| {
                let [a, b, c] = t.map(|i| vertices[i as usize]);
                (b - a).cross(&(c - a)).normalize()
            })
            .collect();
        TriangleMesh {
            vertices,
            triangles: self.triangles.clone(),
            normals,
        }
    }

    /// Concatenates meshes into one.
    pub fn merge(parts: &[TriangleMesh]) -> TriangleMesh {
        let mut out = TriangleMesh {
            vertices: Vec::new(),
            triangles: Vec::new(),
            normals: Vec::new(),
        };
        for p in parts {
            let base = out.vertices.len() as u32;
            out.vertices.extend_from_slice(&p.vertices);
            out.triangles
                .extend(p.triangles.iter().map(|t| t.map(|i| i + base)));
            out.normals.extend_from_slice(&p.normals);
        }
        out
    }

    pub fn to_obj(&self) -> String {
        let mut s = String::new();
        for v in &self.vertices {
            let _ = writeln!(s, "v {:.6} {:.6} {:.6}", v.x, v.y, v.z);
        }
        for t in &self.triangles {
            let _ = writeln!(s, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1);
        }
        s
    }
}

/// Parses Wavefront OBJ text. Polygons are fan-triangulated; texture and
/// normal references in face tuples are ignored.
pub fn parse_obj(text: &str, path: &Path) -> Result<TriangleMesh> {
    let err = |line: usize, message: String| HawkError::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut vertices: Vec<Vec3> = Vec::new();
    let mut faces: Vec<[u32; 3]> = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line_no = n + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        let mut tok = line.split_whitespace();
        match tok.next() {
            Some("v") => {
                let coords: Vec<&str> = tok.collect();
                if coords.len() < 3 {
                    return Err(err(line_no, format!("vertex needs 3 coordinates, got {}", coords.len())));
                }
                let mut p = [0.0; 3];
                for (k, c) in coords[..3].iter().enumerate() {
                    p[k] = c
                        .parse::<f64>()
                        .ok()
                        .filter(|v| v.is_finite())
                        .ok_or_else(|| err(line_no, format!("bad coordinate `{c}`")))?;
                }
                vertices.push(Vec3::from(p));
            }
            Some("f") => {
                let mut idx = Vec::new();
                for t in tok {
                    let first = t.split('/').next().unwrap_or("");
                    let i: i64 = first
                        .parse()
                        .map_err(|_| err(line_no, format!("bad face index `{t}`")))?;
                    let resolved = if i > 0 {
                        i - 1
                    } else if i < 0 {
                        vertices.len() as i64 + i
                    } else {
                        -1
                    };
                    if resolved < 0 || resolved >= vertices.len() as i64 {
                        return Err(err(line_no, format!("face index {i} out of range")));
                    }
                    idx.push(resolved as u32);
                }
                if idx.len() < 3 {
                    return Err(err(line_no, format!("face needs at least 3 vertices, got {}", idx.len())));
                }
                for k in 1..idx.len() - 1 {
                    faces.push([idx[0], idx[k], idx[k + 1]]);
                }
            }
            _ => {}
        }
    }
    let mesh = TriangleMesh::new(vertices, faces)?;
    if mesh.is_empty() {
        return Err(HawkError::EmptyMesh(path.to_path_buf()));
    }
    Ok(mesh)
}

pub fn load_mesh(path: &Path) -> Result<TriangleMesh> {
    let text = std::fs::read_to_string(path).map_err(|e| HawkError::io(path, e))?;
    parse_obj(&text, path)
}

/// Placement of a vehicle: translation plus yaw about `+z`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub translation: Vec3,
    yaw: f64,
}

impl Pose {
    pub fn new(translation: Vec3, yaw: f64) -> Self {
        Self {
            translation,
            yaw: yaw.rem_euclid(TAU),
        }
    }

    pub fn identity() -> Self {
        Self::new(Vec3::zeros(), 0.0)
    }

    /// Yaw in `[0, 2π)`.
    pub fn yaw(&self) -> f64 {
        self.yaw
    }

    pub fn is_identity(&self) -> bool {
        self.yaw == 0.0 && self.translation == Vec3::zeros()
    }

    pub fn apply(&self, p: &Vec3) -> Vec3 {
        let (s, c) = self.yaw.sin_cos();
        Vec3::new(c * p.x - s * p.y, s * p.x + c * p.y, p.z) + self.translation
    }
}

#[derive(Debug, Clone)]
pub struct Vehicle {
    pub id: u32,
    pub mesh: Arc<TriangleMesh>,
    pub pose: Pose,
}

#[derive(Debug, Clone)]
pub struct Scene {
    pub radar_origin: Vec3,
    pub ground_height: f64,
    pub vehicles: Vec<Vehicle>,
}

impl Scene {
    pub fn empty(radar_origin: Vec3, ground_height: f64) -> Self {
        Self {
            radar_origin,
            ground_height,
            vehicles: Vec::new(),
        }
    }

    /// Adds a vehicle whose mesh base (`z = 0`) rests on the ground plane.
    pub fn with_vehicle(mut self, id: u32, mesh: Arc<TriangleMesh>, x: f64, y: f64, yaw: f64) -> Self {
        let pose = Pose::new(Vec3::new(x, y, self.ground_height), yaw);
        self.vehicles.push(Vehicle { id, mesh, pose });
        self
    }

    /// Checks that posed geometry sits on or above the ground plane and that
    /// the radar is outside every mesh.
    pub fn validate(&self) -> Result<()> {
        if !self.radar_origin.iter().all(|c| c.is_finite()) || !self.ground_height.is_finite() {
            return Err(HawkError::Scene("non-finite radar origin or ground height".into()));
        }
        if self.radar_origin.z <= self.ground_height {
            return Err(HawkError::Scene("radar origin must be above the ground plane".into()));
        }
        let world = pose_scene(self);
        for v in &world.vehicles {
            let b = v.mesh.bounds();
            if b.min.z < self.ground_height - 1e-9 {
                return Err(HawkError::Scene(format!(
                    "vehicle {} extends {:.3} m below the ground plane",
                    v.id,
                    self.ground_height - b.min.z
                )));
            }
            if b.contains(&self.radar_origin) {
                let bvh = Bvh::build((0..v.mesh.triangles().len()).map(|i| v.mesh.triangle(i)).collect());
                let ray = Ray {
                    origin: self.radar_origin,
                    dir: Vec3::new(0.267_261_24, 0.534_522_48, 0.801_783_73),
                };
                if bvh.count_crossings(&ray) % 2 == 1 {
                    return Err(HawkError::Scene(format!("radar origin lies inside vehicle {}", v.id)));
                }
            }
        }
        Ok(())
    }
}

/// Transforms every mesh into the world frame; the returned poses are identity.
pub fn pose_scene(scene: &Scene) -> Scene {
    let vehicles = scene
        .vehicles
        .iter()
        .map(|v| Vehicle {
            id: v.id,
            mesh: if v.pose.is_identity() {
                v.mesh.clone()
            } else {
                Arc::new(v.mesh.map_vertices(|p| v.pose.apply(p)))
            },
            pose: Pose::identity(),
        })
        .collect();
    Scene {
        radar_origin: scene.radar_origin,
        ground_height: scene.ground_height,
        vehicles,
    }
}

/// A posed scene flattened into one triangle soup with a BVH for ray casting.
#[derive(Debug, Clone)]
pub struct WorldScene {
    pub radar_origin: Vec3,
    pub ground_height: f64,
    /// World-frame vehicles, in scene order.
    pub vehicles: Vec<Vehicle>,
    offsets: Vec<usize>,
    owner: Vec<u32>,
    bvh: Bvh,
}

/// Global triangle reference: vehicle index in the scene plus local index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TriangleRef {
    pub vehicle: usize,
    pub triangle: usize,
}

impl WorldScene {
    pub fn new(scene: &Scene) -> Self {
        let posed = pose_scene(scene);
        let mut tris = Vec::new();
        let mut owner = Vec::new();
        let mut offsets = Vec::with_capacity(posed.vehicles.len());
        for (vi, v) in posed.vehicles.iter().enumerate() {
            offsets.push(tris.len());
            for t in 0..v.mesh.triangles().len() {
                tris.push(v.mesh.triangle(t));
                owner.push(vi as u32);
            }
        }
        Self {
            radar_origin: posed.radar_origin,
            ground_height: posed.ground_height,
            vehicles: posed.vehicles,
            offsets,
            owner,
            bvh: Bvh::build(tris),
        }
    }

    pub fn triangle_count(&self) -> usize {
        self.owner.len()
    }

    pub fn global_index(&self, r: TriangleRef) -> usize {
        self.offsets[r.vehicle] + r.triangle
    }

    pub fn resolve(&self, global: usize) -> TriangleRef {
        let vehicle = self.owner[global] as usize;
        TriangleRef {
            vehicle,
            triangle: global - self.offsets[vehicle],
        }
    }

    pub fn cast(&self, origin: Vec3, dir: Vec3, t_max: f64) -> Option<(f64, TriangleRef)> {
        self.bvh
            .closest_hit(&Ray { origin, dir }, t_max)
            .map(|h| (h.t, self.resolve(h.triangle)))
    }

    /// Whether the straight line from the radar to `p` (lying on triangle
    /// `on`) is unobstructed.
    pub fn visible_from_radar(&self, p: &Vec3, on: TriangleRef) -> bool {
        let d = p - self.radar_origin;
        let dist = d.norm();
        if dist == 0.0 {
            return true;
        }
        match self.cast(self.radar_origin, d / dist, f64::INFINITY) {
            None => true,
            Some((t, hit)) => hit == on || t >= dist - 1e-6 * dist.max(1.0),
        }
    }
}

/// Nearest intersection along one projection ray.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PixelHit {
    pub depth: f64,
    pub triangle: TriangleRef,
    pub vehicle_id: u32,
}

/// Per-pixel nearest hits over an angular grid, row-major with elevation rows
/// (row 0 = lowest elevation) and azimuth columns.
#[derive(Debug, Clone)]
pub struct Projection {
    pub grid: AngularGrid,
    pub pixels: Vec<Option<PixelHit>>,
}

impl Projection {
    pub fn at(&self, az: usize, el: usize) -> Option<PixelHit> {
        self.pixels[el * self.grid.n_az + az]
    }
}

/// Casts one ray per grid cell from the radar origin and records the nearest
/// triangle. Ties at equal depth go to the lowest global triangle index.
pub fn spherical_project(world: &WorldScene, grid: &AngularGrid) -> Projection {
    let pixels = (0..grid.n_el)
        .into_par_iter()
        .flat_map_iter(|j| {
            (0..grid.n_az).map(move |i| {
                world
                    .cast(world.radar_origin, grid.direction(i, j), f64::INFINITY)
                    .map(|(t, r)| PixelHit {
                        depth: t,
                        triangle: r,
                        vehicle_id: world.vehicles[r.vehicle].id,
                    })
            })
        })
        .collect();
    Projection { grid: *grid, pixels }
}

/// JSON scene description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneFile {
    pub radar_origin: [f64; 3],
    pub ground_height: f64,
    #[serde(default)]
    pub vehicles: Vec<VehicleEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VehicleEntry {
    /// OBJ path, relative to the scene file's directory unless absolute.
    pub mesh: PathBuf,
    pub x: f64,
    pub y: f64,
    pub yaw_deg: f64,
    pub id: u32,
}

impl SceneFile {
    /// Loads meshes (relative to `base_dir`) and builds the scene.
    pub fn build(&self, base_dir: &Path) -> Result<Scene> {
        let mut cache: HashMap<PathBuf, Arc<TriangleMesh>> = HashMap::new();
        let mut scene = Scene::empty(Vec3::from(self.radar_origin), self.ground_height);
        for v in &self.vehicles {
            let path = base_dir.join(&v.mesh);
            let mesh = match cache.get(&path) {
                Some(m) => m.clone(),
                None => {
                    let m = Arc::new(load_mesh(&path)?);
                    cache.insert(path.clone(), m.clone());
                    m
                }
            };
            scene = scene.with_vehicle(v.id, mesh, v.x, v.y, v.yaw_deg.to_radians());
        }
        scene.validate()?;
        Ok(scene)
    }
}

pub fn load_scene(path: &Path) -> Result<Scene> {
    let text = std::fs::read_to_string(path).map_err(|e| HawkError::io(path, e))?;
    let file: SceneFile = serde_json::from_str(&text).map_err(|e| HawkError::Parse {
        path: path.to_path_buf(),
        line: e.line(),
        message: e.to_string(),
    })?;
    file.build(path.parent().unwrap_or(Path::new(".")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::meshgen;
    use proptest::prelude::*;

    const CUBE: &str = "\
v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nv 0 0 1\nv 1 0 1\nv 1 1 1\nv 0 1 1
f 1 3 2\nf 1 4 3\nf 5 6 7\nf 5 7 8\nf 1 2 6\nf 1 6 5
f 2 3 7\nf 2 7 6\nf 3 4 8\nf 3 8 7\nf 4 1 5\nf 4 5 8
";

    #[test]
    fn unit_cube_has_axis_aligned_normals() {
        let m = parse_obj(CUBE, Path::new("cube.obj")).unwrap();
        assert_eq!(m.vertices().len(), 8);
        assert_eq!(m.triangles().len(), 12);
        for n in m.normals() {
            assert!((n.norm() - 1.0).abs() < 1e-6);
            assert_eq!(n.iter().filter(|c| c.abs() > 1e-12).count(), 1);
        }
        assert!((m.area() - 6.0).abs() < 1e-12);
    }

    #[test]
    fn quad_face_splits_into_two_coplanar_triangles() {
        let m = parse_obj("v 0 0 0\nv 1 0 0\nv 1 0 1\nv 0 0 1\nf 1/1/1 2/2/1 3/3/1 4/4/1\n", Path::new("q.obj")).unwrap();
        assert_eq!(m.triangles().len(), 2);
        assert!((m.normals()[0] - m.normals()[1]).norm() < 1e-12);
    }

    #[test]
    fn truncated_obj_names_offending_line() {
        let text = "v 0 0 0\nv 1 0 0\nv 1 1";
        match parse_obj(text, Path::new("t.obj")) {
            Err(HawkError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
        match parse_obj("v 0 0 0\nv 1 0 0\nv 1 1 0\nf 1 2", Path::new("t.obj")) {
            Err(HawkError::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn vertices_without_faces_is_empty_mesh() {
        assert!(matches!(
            parse_obj("v 0 0 0\n", Path::new("e.obj")),
            Err(HawkError::EmptyMesh(_))
        ));
    }

    #[test]
    fn negative_obj_indices_are_relative() {
        let m = parse_obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nf -3 -2 -1\n", Path::new("n.obj")).unwrap();
        assert_eq!(m.triangles(), &[[0, 1, 2]]);
    }

    #[test]
    fn pose_identity_yaw_and_translation() {
        let p = Vec3::new(1.0, 2.0, 3.0);
        assert_eq!(Pose::identity().apply(&p), p);
        let r = Pose::new(Vec3::zeros(), std::f64::consts::PI).apply(&Vec3::new(1.0, 0.0, 0.0));
        assert!((r - Vec3::new(-1.0, 0.0, 0.0)).norm() < 1e-9);
        let t = Pose::new(Vec3::new(0.0, 10.0, 0.0), 0.0).apply(&p);
        assert_eq!(t, Vec3::new(1.0, 12.0, 3.0));
        assert!((Pose::new(Vec3::zeros(), -0.5).yaw() - (TAU - 0.5)).abs() < 1e-15);
    }

    #[test]
    fn pose_scene_is_idempotent_for_identity() {
        let mesh = Arc::new(meshgen::box_mesh(1.0, 2.0, 1.0));
        let scene = Scene {
            radar_origin: Vec3::new(0.0, -5.0, 0.5),
            ground_height: 0.0,
            vehicles: vec![Vehicle {
                id: 1,
                mesh: mesh.clone(),
                pose: Pose::identity(),
            }],
        };
        let posed = pose_scene(&scene);
        assert_eq!(*posed.vehicles[0].mesh, *mesh);
        let twice = pose_scene(&posed);
        assert_eq!(*twice.vehicles[0].mesh, *mesh);
    }

    fn wall(y: f64, half: f64) -> TriangleMesh {
        meshgen::plate(Vec3::new(0.0, y, 0.0), Vec3::new(0.0, -1.0, 0.0), 2.0 * half, 2.0 * half)
    }

    fn raw_scene(meshes: Vec<TriangleMesh>) -> Scene {
        Scene {
            radar_origin: Vec3::zeros(),
            ground_height: -5.0,
            vehicles: meshes
                .into_iter()
                .enumerate()
                .map(|(i, m)| Vehicle {
                    id: i as u32 + 1,
                    mesh: Arc::new(m),
                    pose: Pose::identity(),
                })
                .collect(),
        }
    }

    #[test]
    fn boresight_wall_depth() {
        let world = WorldScene::new(&raw_scene(vec![wall(10.0, 2.0)]));
        let grid = AngularGrid::new((-1.0, 1.0), 1, (-1.0, 1.0), 1);
        let p = spherical_project(&world, &grid);
        assert!((p.at(0, 0).unwrap().depth - 10.0).abs() < 1e-12);
    }

    #[test]
    fn empty_scene_projects_all_invalid() {
        let world = WorldScene::new(&raw_scene(vec![]));
        let p = spherical_project(&world, &AngularGrid::heatmap_default());
        assert!(p.pixels.iter().all(|x| x.is_none()));
    }

    #[test]
    fn nearest_wall_wins() {
        let world = WorldScene::new(&raw_scene(vec![wall(10.0, 2.0), wall(5.0, 2.0)]));
        let grid = AngularGrid::new((-1.0, 1.0), 1, (-1.0, 1.0), 1);
        let hit = spherical_project(&world, &grid).at(0, 0).unwrap();
        assert!((hit.depth - 5.0).abs() < 1e-12);
        assert_eq!(hit.vehicle_id, 2);
    }

    #[test]
    fn removing_occluded_triangles_leaves_projection_unchanged() {
        let front = wall(4.0, 3.0);
        let behind = meshgen::box_mesh(1.0, 1.0, 1.0).map_vertices(|p| p + Vec3::new(-0.5, 8.0, -0.5));
        let grid = AngularGrid::new((-20.0, 20.0), 40, (-10.0, 10.0), 20);
        let with = spherical_project(&WorldScene::new(&raw_scene(vec![front.clone(), behind])), &grid);
        let without = spherical_project(&WorldScene::new(&raw_scene(vec![front])), &grid);
        let depths = |p: &Projection| p.pixels.iter().map(|h| h.map(|h| h.depth)).collect::<Vec<_>>();
        assert_eq!(depths(&with), depths(&without));
    }

    #[test]
    fn validate_rejects_radar_inside_mesh_and_sunken_vehicle() {
        let mesh = Arc::new(meshgen::box_mesh(4.0, 4.0, 2.0));
        let inside = Scene::empty(Vec3::new(0.0, 0.0, 0.5), 0.0).with_vehicle(1, mesh.clone(), 0.0, 0.0, 0.0);
        assert!(inside.validate().is_err());
        let ok = Scene::empty(Vec3::new(0.0, 0.0, 0.5), 0.0).with_vehicle(1, mesh.clone(), 0.0, 10.0, 0.3);
        ok.validate().unwrap();
        let mut sunk = ok.clone();
        sunk.vehicles[0].pose.translation.z = -0.2;
        assert!(sunk.validate().is_err());
    }

    #[test]
    fn scene_file_resolves_relative_meshes() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("cube.obj"), CUBE).unwrap();
        let json = r#"{"radar_origin":[0,0,0.5],"ground_height":0,
            "vehicles":[{"mesh":"cube.obj","x":0,"y":10,"yaw_deg":90,"id":7}]}"#;
        std::fs::write(dir.path().join("scene.json"), json).unwrap();
        let s = load_scene(&dir.path().join("scene.json")).unwrap();
        assert_eq!(s.vehicles[0].id, 7);
        assert!((s.vehicles[0].pose.yaw() - std::f64::consts::FRAC_PI_2).abs() < 1e-12);

        let missing = r#"{"radar_origin":[0,0,0.5],"ground_height":0,
            "vehicles":[{"mesh":"nope.obj","x":0,"y":10,"yaw_deg":0,"id":1}]}"#;
        std::fs::write(dir.path().join("bad.json"), missing).unwrap();
        match load_scene(&dir.path().join("bad.json")) {
            Err(HawkError::Io { path, .. }) => assert!(path.ends_with("nope.obj")),
            other => panic!("expected I/O error, got {other:?}"),
        }
    }

    proptest! {
        #[test]
        fn pose_is_rigid(yaw in 0.0..TAU, tx in -20.0..20.0f64, ty in -20.0..20.0f64) {
            let mesh = meshgen::sedan(&meshgen::CarDims::sedan());
            let pose = Pose::new(Vec3::new(tx, ty, 0.3), yaw);
            let posed = mesh.map_vertices(|p| pose.apply(p));
            let (a, b) = (mesh.vertices(), posed.vertices());
            for i in (0..a.len()).step_by(7) {
                for j in (0..a.len()).step_by(11) {
                    let d0 = (a[i] - a[j]).norm();
                    let d1 = (b[i] - b[j]).norm();
                    prop_assert!((d0 - d1).abs() < 1e-9);
                }
            }
        }

        #[test]
        fn projection_depth_respects_bounding_sphere(x in -3.0..3.0f64, y in 4.0..9.0f64, yaw in 0.0..TAU) {
            let mesh = Arc::new(meshgen::sedan(&meshgen::CarDims::sedan()));
            let scene = Scene::empty(Vec3::new(0.0, 0.0, 0.5), 0.0).with_vehicle(1, mesh, x, y, yaw);
            let world = WorldScene::new(&scene);
            let verts = world.vehicles[0].mesh.vertices();
            let b = world.vehicles[0].mesh.bounds();
            let c = b.center();
            let radius = verts.iter().map(|v| (v - c).norm()).fold(0.0, f64::max);
            let bound = (c - scene.radar_origin).norm() - radius;
            let p = spherical_project(&world, &AngularGrid::new((-45.0, 45.0), 48, (-22.5, 22.5), 24));
            for h in p.pixels.iter().flatten() {
                prop_assert!(h.depth > 0.0);
                prop_assert!(h.depth >= bound - 1e-9);
            }
        }
    }
}
