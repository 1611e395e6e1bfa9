//! Procedural test geometry: plates, boxes and lofted car bodies.
//!
//! Car meshes use the vehicle-local frame expected by [`crate::scene`]:
//! length along `+y`, width along `x`, height along `+z` with the lowest
//! point of the body above `z = 0` (the road) by the ground clearance.

use serde::{Deserialize, Serialize};

use crate::geometry::Vec3;
use crate::scene::TriangleMesh;

/// Rectangular plate centred at `center` facing `normal` (two triangles).
/// `width` runs horizontally (perpendicular to `normal` and `+z`), `height`
/// along the remaining in-plane axis.
pub fn plate(center: Vec3, normal: Vec3, width: f64, height: f64) -> TriangleMesh {
    let n = normal.normalize();
    let up = if n.z.abs() > 0.999 { Vec3::x() } else { Vec3::z() };
    let u = up.cross(&n).normalize();
    let v = n.cross(&u);
    let (hu, hv) = (u * width / 2.0, v * height / 2.0);
    let verts = vec![center - hu - hv, center + hu - hv, center + hu + hv, center - hu + hv];
    TriangleMesh::new(verts, vec![[0, 1, 2], [0, 2, 3]]).expect("plate is well formed")
}

/// Axis-aligned box, `width` along x, `length` along y, `height` along z,
/// centred in x/y and resting on `z = 0`. Normals point outward.
pub fn box_mesh(width: f64, length: f64, height: f64) -> TriangleMesh {
    let (hx, hy) = (width / 2.0, length / 2.0);
    let mut v = Vec::with_capacity(8);
    for &z in &[0.0, height] {
        for &(x, y) in &[(-hx, -hy), (hx, -hy), (hx, hy), (-hx, hy)] {
            v.push(Vec3::new(x, y, z));
        }
    }
    let quads: [[u32; 4]; 6] = [
        [0, 3, 2, 1], // bottom
        [4, 5, 6, 7], // top
        [0, 1, 5, 4], // -y
        [1, 2, 6, 5], // +x
        [2, 3, 7, 6], // +y
        [3, 0, 4, 7], // -x
    ];
    let tris = quads
        .iter()
        .flat_map(|q| [[q[0], q[1], q[2]], [q[0], q[2], q[3]]])
        .collect();
    TriangleMesh::new(v, tris).expect("box is well formed")
}

/// Overall body dimensions of a generated car (meters).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CarDims {
    pub length: f64,
    pub width: f64,
    pub height: f64,
}

impl CarDims {
    pub fn sedan() -> Self {
        Self {
            length: 4.6,
            width: 1.8,
            height: 1.45,
        }
    }

    pub fn hatchback() -> Self {
        Self {
            length: 4.0,
            width: 1.75,
            height: 1.5,
        }
    }

    pub fn suv() -> Self {
        Self {
            length: 4.7,
            width: 1.9,
            height: 1.75,
        }
    }
}

/// One lofting station, all values normalised: `s` along the length
/// (0 = rear, 1 = front), `ws` body half-width scale, heights as fractions of
/// the overall height, `rw` top half-width scale.
#[derive(Debug, Clone, Copy)]
struct Station {
    s: f64,
    ws: f64,
    z_bottom: f64,
    z_belt: f64,
    z_top: f64,
    rw: f64,
}

const fn st(s: f64, ws: f64, z_bottom: f64, z_belt: f64, z_top: f64, rw: f64) -> Station {
    Station {
        s,
        ws,
        z_bottom,
        z_belt,
        z_top,
        rw,
    }
}

const SEDAN: [Station; 9] = [
    st(0.00, 0.88, 0.24, 0.52, 0.55, 0.80),
    st(0.04, 0.96, 0.14, 0.59, 0.66, 0.84),
    st(0.18, 1.00, 0.10, 0.63, 0.69, 0.86),
    st(0.28, 1.00, 0.10, 0.63, 0.95, 0.62),
    st(0.36, 1.00, 0.10, 0.63, 1.00, 0.58),
    st(0.60, 1.00, 0.10, 0.63, 1.00, 0.58),
    st(0.72, 1.00, 0.10, 0.63, 0.69, 0.86),
    st(0.96, 0.96, 0.14, 0.55, 0.59, 0.84),
    st(1.00, 0.88, 0.21, 0.45, 0.48, 0.78),
];

const HATCHBACK: [Station; 8] = [
    st(0.00, 0.90, 0.22, 0.58, 0.80, 0.66),
    st(0.04, 0.97, 0.11, 0.60, 0.93, 0.62),
    st(0.12, 1.00, 0.10, 0.62, 1.00, 0.60),
    st(0.55, 1.00, 0.10, 0.62, 1.00, 0.60),
    st(0.70, 1.00, 0.10, 0.62, 0.66, 0.86),
    st(0.90, 0.98, 0.12, 0.56, 0.60, 0.84),
    st(0.97, 0.94, 0.16, 0.50, 0.54, 0.80),
    st(1.00, 0.88, 0.22, 0.44, 0.47, 0.76),
];

const SUV: [Station; 7] = [
    st(0.00, 0.92, 0.18, 0.58, 0.90, 0.72),
    st(0.03, 0.98, 0.12, 0.60, 0.98, 0.70),
    st(0.10, 1.00, 0.12, 0.62, 1.00, 0.70),
    st(0.62, 1.00, 0.12, 0.62, 1.00, 0.70),
    st(0.74, 1.00, 0.12, 0.62, 0.68, 0.88),
    st(0.96, 0.98, 0.14, 0.58, 0.62, 0.86),
    st(1.00, 0.92, 0.20, 0.52, 0.56, 0.82),
];

/// Half cross-section from bottom centre to top centre (x ≥ 0), as (x, z).
fn half_section(st: &Station, dims: &CarDims) -> [(f64, f64); 8] {
    let hw = st.ws * dims.width / 2.0;
    let h = dims.height;
    let (zb, zs, zt) = (st.z_bottom * h, st.z_belt * h, st.z_top * h);
    let shoulder = (zs + 0.04 * h / 1.45).min(zt);
    [
        (0.0, zb),
        (0.9 * hw, zb),
        (hw, zb + 0.12 * h / 1.45),
        (hw, zb + 0.45 * (zs - zb)),
        (0.98 * hw, zs),
        (0.93 * hw, shoulder),
        (st.rw * dims.width / 2.0, zt),
        (0.0, zt),
    ]
}

fn loft(stations: &[Station], dims: &CarDims) -> TriangleMesh {
    let mut verts = Vec::new();
    let mut rings: Vec<Vec<u32>> = Vec::new();
    for stn in stations {
        let y = (stn.s - 0.5) * dims.length;
        let half = half_section(stn, dims);
        let mut ring = Vec::with_capacity(14);
        // Bottom centre → right side → top centre → left side (mirrored).
        let mut pts: Vec<(f64, f64)> = half.to_vec();
        pts.extend(half[1..7].iter().rev().map(|&(x, z)| (-x, z)));
        for (x, z) in pts {
            ring.push(verts.len() as u32);
            verts.push(Vec3::new(x, y, z));
        }
        rings.push(ring);
    }
    let n = rings[0].len();
    let mut tris = Vec::new();
    for w in rings.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        for i in 0..n {
            let j = (i + 1) % n;
            tris.push([a[i], b[i], b[j]]);
            tris.push([a[i], b[j], a[j]]);
        }
    }
    for (ring, rear) in [(&rings[0], true), (&rings[rings.len() - 1], false)] {
        let c: Vec3 = ring.iter().map(|&i| verts[i as usize]).sum::<Vec3>() / n as f64;
        let ci = verts.len() as u32;
        verts.push(c);
        for i in 0..n {
            let j = (i + 1) % n;
            if rear {
                tris.push([ci, ring[i], ring[j]]);
            } else {
                tris.push([ci, ring[j], ring[i]]);
            }
        }
    }
    TriangleMesh::new(verts, tris).expect("lofted body is well formed")
}

pub fn sedan(dims: &CarDims) -> TriangleMesh {
    loft(&SEDAN, dims)
}

pub fn hatchback(dims: &CarDims) -> TriangleMesh {
    loft(&HATCHBACK, dims)
}

pub fn suv(dims: &CarDims) -> TriangleMesh {
    loft(&SUV, dims)
}

/// Signed volume of a closed mesh; positive when normals point outward.
pub fn signed_volume(mesh: &TriangleMesh) -> f64 {
    (0..mesh.triangles().len())
        .map(|i| {
            let [a, b, c] = mesh.triangle(i);
            a.dot(&b.cross(&c)) / 6.0
        })
        .sum()
}
