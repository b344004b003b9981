//! Indexed triangle meshes and the geometric operations built on them.

mod components;
pub mod distance;
mod obj;
mod sampling;
pub mod sdf;
pub mod shapes;
mod weld;

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::geom::{Aabb, Vec3};

pub use components::{connected_components, convex_hull_volume, default_weld_eps, Part, PartSet};
pub use obj::{load_mesh, parse_obj, write_obj, write_obj_groups, ObjLoad};
pub use sampling::{fps_downsample, fps_indices, sample_surface_uniform, PointCloud};
pub use sdf::{build_sdf, query_sdf, query_sdf_gradient, SdfGrid, SignMethod};
pub use weld::weld_representatives;

/// Weld tolerance applied when cleaning freshly loaded meshes.
pub const LOAD_WELD_EPS: f64 = 1e-9;

/// Indexed triangle surface.
///
/// Every index is in range and no stored triangle has zero area; both are
/// checked by [`TriangleMesh::new`].
#[derive(Debug, Clone, PartialEq)]
pub struct TriangleMesh {
    pub vertices: Vec<Vec3>,
    pub triangles: Vec<[u32; 3]>,
    pub name: String,
}

impl TriangleMesh {
    pub fn new(name: impl Into<String>, vertices: Vec<Vec3>, triangles: Vec<[u32; 3]>) -> Result<Self> {
        let name = name.into();
        if triangles.is_empty() || vertices.len() < 3 {
            return Err(Error::EmptyMesh(name));
        }
        let n = vertices.len() as u32;
        if let Some(t) = triangles.iter().find(|t| t.iter().any(|&i| i >= n)) {
            return Err(Error::InvalidMesh(format!(
                "triangle {t:?} references a vertex outside 0..{n}"
            )));
        }
        let mesh = TriangleMesh {
            vertices,
            triangles,
            name,
        };
        if let Some(i) = (0..mesh.triangles.len()).find(|&i| mesh.triangle_area(i) == 0.0) {
            return Err(Error::InvalidMesh(format!("triangle {i} has zero area")));
        }
        Ok(mesh)
    }

    /// Weld vertices closer than `weld_eps`, drop zero-area triangles and
    /// unreferenced vertices. Returns the cleaned mesh, the surviving
    /// original triangle indices and human-readable warnings.
    pub fn cleaned(
        name: impl Into<String>,
        vertices: Vec<Vec3>,
        triangles: Vec<[u32; 3]>,
        weld_eps: f64,
    ) -> Result<(Self, Vec<usize>, Vec<String>)> {
        let name = name.into();
        let mut warnings = Vec::new();
        let rep = weld_representatives(&vertices, weld_eps);
        let scale = Aabb::from_points(vertices.iter())
            .map(|b| b.diagonal())
            .unwrap_or(0.0);
        let area_floor = 1e-14 * scale * scale;

        let mut kept = Vec::with_capacity(triangles.len());
        let mut kept_src = Vec::with_capacity(triangles.len());
        let mut dropped = 0usize;
        for (i, t) in triangles.iter().enumerate() {
            let w = [rep[t[0] as usize], rep[t[1] as usize], rep[t[2] as usize]];
            let degenerate = w[0] == w[1] || w[1] == w[2] || w[0] == w[2] || {
                let a = vertices[w[0]];
                let n = (vertices[w[1]] - a).cross(&(vertices[w[2]] - a));
                0.5 * n.norm() <= area_floor
            };
            if degenerate {
                dropped += 1;
                continue;
            }
            kept.push(w);
            kept_src.push(i);
        }
        if dropped > 0 {
            warnings.push(format!("dropped {dropped} degenerate triangle(s)"));
        }

        // Compact to referenced vertices, keeping their original order.
        let mut used = vec![false; vertices.len()];
        for w in &kept {
            for &v in w {
                used[v] = true;
            }
        }
        let mut remap = vec![u32::MAX; vertices.len()];
        let mut verts = Vec::new();
        for (i, p) in vertices.iter().enumerate() {
            if used[i] {
                remap[i] = verts.len() as u32;
                verts.push(*p);
            }
        }
        let tris: Vec<[u32; 3]> = kept
            .iter()
            .map(|w| [remap[w[0]], remap[w[1]], remap[w[2]]])
            .collect();
        let welded = vertices.len().saturating_sub(verts.len());
        if welded > 0 && dropped == 0 {
            log::debug!("{name}: welded or dropped {welded} vertices");
        }
        let mesh = TriangleMesh::new(name, verts, tris)?;
        Ok((mesh, kept_src, warnings))
    }

    pub fn triangle(&self, i: usize) -> [Vec3; 3] {
        let t = self.triangles[i];
        [
            self.vertices[t[0] as usize],
            self.vertices[t[1] as usize],
            self.vertices[t[2] as usize],
        ]
    }

    pub fn triangle_area(&self, i: usize) -> f64 {
        let [a, b, c] = self.triangle(i);
        0.5 * (b - a).cross(&(c - a)).norm()
    }

    pub fn surface_area(&self) -> f64 {
        (0..self.triangles.len()).map(|i| self.triangle_area(i)).sum()
    }

    pub fn aabb(&self) -> Aabb {
        Aabb::from_points(self.vertices.iter()).expect("mesh has vertices")
    }

    /// Area-weighted centroid of the surface.
    pub fn centroid(&self) -> Vec3 {
        let mut acc = Vec3::zeros();
        let mut total = 0.0;
        for i in 0..self.triangles.len() {
            let [a, b, c] = self.triangle(i);
            let w = self.triangle_area(i);
            acc += w * (a + b + c) / 3.0;
            total += w;
        }
        if total > 0.0 {
            acc / total
        } else {
            self.vertices.iter().sum::<Vec3>() / self.vertices.len() as f64
        }
    }

    /// Signed volume enclosed by the surface (positive for outward winding).
    pub fn signed_volume(&self) -> f64 {
        (0..self.triangles.len())
            .map(|i| {
                let [a, b, c] = self.triangle(i);
                a.dot(&b.cross(&c)) / 6.0
            })
            .sum()
    }

    pub fn translated(&self, v: &Vec3) -> TriangleMesh {
        self.mapped(|p| p + v)
    }

    pub fn mapped(&self, f: impl Fn(&Vec3) -> Vec3) -> TriangleMesh {
        TriangleMesh {
            vertices: self.vertices.iter().map(f).collect(),
            triangles: self.triangles.clone(),
            name: self.name.clone(),
        }
    }

    /// Concatenate meshes without welding. Triangle order follows input order.
    pub fn concat<'a>(name: impl Into<String>, meshes: impl IntoIterator<Item = &'a TriangleMesh>) -> TriangleMesh {
        let mut vertices = Vec::new();
        let mut triangles = Vec::new();
        for m in meshes {
            let base = vertices.len() as u32;
            vertices.extend_from_slice(&m.vertices);
            triangles.extend(m.triangles.iter().map(|t| [t[0] + base, t[1] + base, t[2] + base]));
        }
        TriangleMesh {
            vertices,
            triangles,
            name: name.into(),
        }
    }

    /// True when every undirected edge is traversed equally often in both
    /// directions. This is the condition under which the winding number of
    /// the surface is integer valued away from it.
    pub fn is_closed(&self) -> bool {
        let mut balance: HashMap<(u32, u32), i64> = HashMap::new();
        for t in &self.triangles {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                if a < b {
                    *balance.entry((a, b)).or_default() += 1;
                } else {
                    *balance.entry((b, a)).or_default() -= 1;
                }
            }
        }
        balance.values().all(|&c| c == 0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cube_is_closed_with_unit_volume() {
        let cube = shapes::unit_cube();
        assert!(cube.is_closed());
        assert!((cube.signed_volume() - 1.0).abs() < 1e-12);
        assert!((cube.surface_area() - 6.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_out_of_range_index() {
        let v = vec![Vec3::zeros(), Vec3::x(), Vec3::y()];
        assert!(TriangleMesh::new("t", v, vec![[0, 1, 3]]).is_err());
    }

    #[test]
    fn cleaning_drops_degenerate_and_welds() {
        let v = vec![
            Vec3::zeros(),
            Vec3::x(),
            Vec3::y(),
            Vec3::new(1.0 + 1e-12, 0.0, 0.0),
            Vec3::new(2.0, 0.0, 0.0),
        ];
        // second triangle is collinear -> zero area
        let (m, src, warnings) =
            TriangleMesh::cleaned("t", v, vec![[0, 1, 2], [0, 3, 4]], LOAD_WELD_EPS).unwrap();
        assert_eq!(m.triangles.len(), 1);
        assert_eq!(src, vec![0]);
        assert_eq!(warnings.len(), 1);
    }
}
