//! Closed primitive meshes with outward (counter-clockwise) winding.

use std::collections::HashMap;

use super::TriangleMesh;
use crate::geom::Vec3;

/// Axis-aligned box between `min` and `max`: 8 vertices, 12 triangles.
pub fn box_mesh(min: [f64; 3], max: [f64; 3]) -> TriangleMesh {
    let v = |x: usize, y: usize, z: usize| {
        Vec3::new(
            if x == 0 { min[0] } else { max[0] },
            if y == 0 { min[1] } else { max[1] },
            if z == 0 { min[2] } else { max[2] },
        )
    };
    let vertices = vec![
        v(0, 0, 0),
        v(1, 0, 0),
        v(1, 1, 0),
        v(0, 1, 0),
        v(0, 0, 1),
        v(1, 0, 1),
        v(1, 1, 1),
        v(0, 1, 1),
    ];
    let triangles = vec![
        [0, 2, 1],
        [0, 3, 2],
        [4, 5, 6],
        [4, 6, 7],
        [0, 1, 5],
        [0, 5, 4],
        [1, 2, 6],
        [1, 6, 5],
        [2, 3, 7],
        [2, 7, 6],
        [3, 0, 4],
        [3, 4, 7],
    ];
    TriangleMesh::new("box", vertices, triangles).expect("valid box")
}

/// Cube `[-0.5, 0.5]^3`.
pub fn unit_cube() -> TriangleMesh {
    box_mesh([-0.5; 3], [0.5; 3])
}

/// Subdivided icosahedron projected onto a sphere.
pub fn icosphere(center: [f64; 3], radius: f64, subdivisions: u32) -> TriangleMesh {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut verts: Vec<Vec3> = [
        [-1.0, t, 0.0],
        [1.0, t, 0.0],
        [-1.0, -t, 0.0],
        [1.0, -t, 0.0],
        [0.0, -1.0, t],
        [0.0, 1.0, t],
        [0.0, -1.0, -t],
        [0.0, 1.0, -t],
        [t, 0.0, -1.0],
        [t, 0.0, 1.0],
        [-t, 0.0, -1.0],
        [-t, 0.0, 1.0],
    ]
    .iter()
    .map(|p| Vec3::new(p[0], p[1], p[2]).normalize())
    .collect();
    let mut faces: Vec<[u32; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..subdivisions {
        let mut cache: HashMap<(u32, u32), u32> = HashMap::new();
        let mut mid = |a: u32, b: u32, verts: &mut Vec<Vec3>| -> u32 {
            let key = (a.min(b), a.max(b));
            *cache.entry(key).or_insert_with(|| {
                verts.push(((verts[a as usize] + verts[b as usize]) * 0.5).normalize());
                (verts.len() - 1) as u32
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for f in &faces {
            let ab = mid(f[0], f[1], &mut verts);
            let bc = mid(f[1], f[2], &mut verts);
            let ca = mid(f[2], f[0], &mut verts);
            next.push([f[0], ab, ca]);
            next.push([f[1], bc, ab]);
            next.push([f[2], ca, bc]);
            next.push([ab, bc, ca]);
        }
        faces = next;
    }
    let c = Vec3::new(center[0], center[1], center[2]);
    let vertices = verts.into_iter().map(|p| c + p * radius).collect();
    TriangleMesh::new("icosphere", vertices, faces).expect("valid sphere")
}

/// L-shaped bracket: a 2x1x1 slab with a 1x1x1 block standing on its
/// `x in [0,1]` end. Not symmetric under the x reflection.
pub fn l_bracket() -> TriangleMesh {
    // Extruded L profile in the xy plane, extruded along z in [0, 1].
    let profile = [
        (0.0, 0.0),
        (2.0, 0.0),
        (2.0, 1.0),
        (1.0, 1.0),
        (1.0, 2.0),
        (0.0, 2.0),
    ];
    let n = profile.len() as u32;
    let mut vertices = Vec::new();
    for z in [0.0, 1.0] {
        for &(x, y) in &profile {
            vertices.push(Vec3::new(x, y, z));
        }
    }
    let mut triangles = Vec::new();
    // Caps: profile split into two convex pieces (0,1,2,3) and (0,3,4,5).
    for quad in [[0u32, 1, 2, 3], [0, 3, 4, 5]] {
        triangles.push([quad[0], quad[2], quad[1]]);
        triangles.push([quad[0], quad[3], quad[2]]);
        triangles.push([quad[0] + n, quad[1] + n, quad[2] + n]);
        triangles.push([quad[0] + n, quad[2] + n, quad[3] + n]);
    }
    for i in 0..n {
        let j = (i + 1) % n;
        triangles.push([i, j, j + n]);
        triangles.push([i, j + n, i + n]);
    }
    TriangleMesh::new("l_bracket", vertices, triangles).expect("valid bracket")
}
