//! Part decomposition by connected components over (welded) shared vertices.

use std::cmp::Ordering;
use std::collections::HashMap;

use chull::ConvexHullWrapper;

use super::weld::close_pairs;
use super::TriangleMesh;
use crate::error::{Error, Result};
use crate::geom::{Aabb, Vec3};

/// One connected piece of a source mesh.
#[derive(Debug, Clone)]
pub struct Part {
    pub mesh: TriangleMesh,
    pub centroid: Vec3,
    pub aabb: Aabb,
    /// Convex-hull volume.
    pub volume: f64,
    /// Indices of this part's triangles in the source mesh.
    pub source_triangles: Vec<usize>,
}

impl Part {
    pub fn from_mesh(mesh: TriangleMesh, source_triangles: Vec<usize>) -> Part {
        let volume = convex_hull_volume(&mesh.vertices);
        Part {
            centroid: mesh.centroid(),
            aabb: mesh.aabb(),
            volume,
            mesh,
            source_triangles,
        }
    }

    pub fn translated(&self, v: &Vec3) -> Part {
        Part {
            mesh: self.mesh.translated(v),
            centroid: self.centroid + v,
            aabb: self.aabb.translated(v),
            volume: self.volume,
            source_triangles: self.source_triangles.clone(),
        }
    }
}

/// Disjoint parts partitioning the triangles of `source`.
#[derive(Debug, Clone)]
pub struct PartSet {
    pub parts: Vec<Part>,
    pub source: TriangleMesh,
}

impl PartSet {
    pub fn len(&self) -> usize {
        self.parts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }

    pub fn aabb(&self) -> Aabb {
        self.parts
            .iter()
            .map(|p| p.aabb)
            .reduce(|a, b| a.union(&b))
            .unwrap_or_else(|| self.source.aabb())
    }

    /// Build a part set from already separated part meshes, keeping their
    /// order. The source is their concatenation.
    pub fn from_part_meshes(name: &str, meshes: Vec<TriangleMesh>) -> PartSet {
        let source = TriangleMesh::concat(name, meshes.iter());
        let mut start = 0;
        let parts = meshes
            .into_iter()
            .map(|m| {
                let n = m.triangles.len();
                let p = Part::from_mesh(m, (start..start + n).collect());
                start += n;
                p
            })
            .collect();
        PartSet { parts, source }
    }

    /// Every part translated by its own vector; the source is rebuilt.
    pub fn translated(&self, offsets: &[Vec3]) -> Result<PartSet> {
        if offsets.len() != self.parts.len() {
            return Err(Error::LengthMismatch {
                what: "translations vs parts",
                left: offsets.len(),
                right: self.parts.len(),
            });
        }
        let parts: Vec<Part> = self
            .parts
            .iter()
            .zip(offsets)
            .map(|(p, v)| p.translated(v))
            .collect();
        let source = TriangleMesh::concat(self.source.name.clone(), parts.iter().map(|p| &p.mesh));
        Ok(PartSet { parts, source })
    }
}

/// Default weld tolerance: 1e-6 of the mesh bounding-box diagonal.
pub fn default_weld_eps(mesh: &TriangleMesh) -> f64 {
    1e-6 * mesh.aabb().diagonal()
}

/// Convex-hull volume of a point set; 0 for flat or degenerate sets.
pub fn convex_hull_volume(points: &[Vec3]) -> f64 {
    if points.len() < 4 {
        return 0.0;
    }
    let pts: Vec<Vec<f64>> = points.iter().map(|p| vec![p.x, p.y, p.z]).collect();
    let Ok(hull) = ConvexHullWrapper::try_new(&pts, None) else {
        return 0.0;
    };
    // The hull library's face order varies between runs, so sum the faces in
    // a canonical order and drop the last few bits that differing
    // triangulations of coplanar faces can still leave behind.
    let (verts, idx) = hull.vertices_indices();
    let reference = points.iter().fold(Vec3::zeros(), |a, p| a + p) / points.len() as f64;
    let mut faces: Vec<[[u64; 3]; 3]> = idx
        .chunks_exact(3)
        .map(|t| {
            let mut f = [0, 1, 2].map(|k| [0, 1, 2].map(|c| verts[t[k]][c].to_bits()));
            let first = (0..3).min_by_key(|&k| f[k]).unwrap_or(0);
            f.rotate_left(first);
            f
        })
        .collect();
    faces.sort_unstable();
    let corner = |c: &[u64; 3]| Vec3::new(f64::from_bits(c[0]), f64::from_bits(c[1]), f64::from_bits(c[2])) - reference;
    let six_vol: f64 = faces
        .iter()
        .map(|f| corner(&f[0]).dot(&corner(&f[1]).cross(&corner(&f[2]))))
        .sum();
    round_low_bits((six_vol / 6.0).abs())
}

fn round_low_bits(v: f64) -> f64 {
    const DROP: u32 = 12;
    if !v.is_finite() || v == 0.0 {
        return v;
    }
    let bits = v.to_bits();
    f64::from_bits((bits + (1 << (DROP - 1))) & !((1u64 << DROP) - 1))
}

struct UnionFind {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
            rank: vec![0; n],
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            Ordering::Less => self.parent[ra] = rb,
            Ordering::Greater => self.parent[rb] = ra,
            Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
    }
}

/// Triangle groups connected through shared or welded vertices, in order of
/// first triangle.
pub(crate) fn component_triangles(mesh: &TriangleMesh, weld_eps: f64) -> Vec<Vec<usize>> {
    let mut uf = UnionFind::new(mesh.vertices.len());
    for t in &mesh.triangles {
        uf.union(t[0] as usize, t[1] as usize);
        uf.union(t[1] as usize, t[2] as usize);
    }
    for (i, j) in close_pairs(&mesh.vertices, weld_eps) {
        uf.union(i, j);
    }
    let mut by_root: HashMap<usize, usize> = HashMap::new();
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for (ti, t) in mesh.triangles.iter().enumerate() {
        let r = uf.find(t[0] as usize);
        let g = *by_root.entry(r).or_insert_with(|| {
            groups.push(Vec::new());
            groups.len() - 1
        });
        groups[g].push(ti);
    }
    groups
}

/// Extract the sub-mesh made of `tris`, reindexing referenced vertices.
pub(crate) fn submesh(mesh: &TriangleMesh, tris: &[usize], name: String) -> TriangleMesh {
    let mut remap: HashMap<u32, u32> = HashMap::new();
    let mut vertices = Vec::new();
    let triangles = tris
        .iter()
        .map(|&ti| {
            let mut out = [0u32; 3];
            for (slot, &v) in out.iter_mut().zip(mesh.triangles[ti].iter()) {
                *slot = *remap.entry(v).or_insert_with(|| {
                    vertices.push(mesh.vertices[v as usize]);
                    (vertices.len() - 1) as u32
                });
            }
            out
        })
        .collect();
    TriangleMesh {
        vertices,
        triangles,
        name,
    }
}

/// Decompose `mesh` into parts. Two triangles share a part iff they are
/// linked through vertices, where vertices closer than `weld_eps` count as
/// shared. Parts are ordered by descending convex-hull volume, ties broken by
/// ascending centroid (lexicographic).
pub fn connected_components(mesh: &TriangleMesh, weld_eps: f64) -> Result<PartSet> {
    if !(weld_eps >= 0.0) {
        return Err(Error::InvalidArgument(format!("weld_eps {weld_eps} < 0")));
    }
    if mesh.triangles.is_empty() {
        return Err(Error::EmptyMesh(mesh.name.clone()));
    }
    let groups = component_triangles(mesh, weld_eps);
    let mut parts: Vec<Part> = groups
        .into_iter()
        .map(|tris| {
            let m = submesh(mesh, &tris, mesh.name.clone());
            Part::from_mesh(m, tris)
        })
        .collect();
    sort_parts(&mut parts);
    for (i, p) in parts.iter_mut().enumerate() {
        p.mesh.name = format!("{}_part{i}", mesh.name);
    }
    Ok(PartSet {
        parts,
        source: mesh.clone(),
    })
}

/// Volumes are compared after rounding to 9 significant digits of the
/// largest volume so translated copies of a part tie exactly.
fn sort_parts(parts: &mut [Part]) {
    let vmax = parts.iter().map(|p| p.volume).fold(0.0, f64::max);
    let quantum = if vmax > 0.0 { vmax * 1e-9 } else { 1.0 };
    let key = |p: &Part| (p.volume / quantum).round() as i64;
    parts.sort_by(|a, b| {
        key(b).cmp(&key(a)).then_with(|| {
            (0..3)
                .map(|k| a.centroid[k].total_cmp(&b.centroid[k]))
                .find(|o| *o != Ordering::Equal)
                .unwrap_or(Ordering::Equal)
        })
    });
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::shapes::{box_mesh, unit_cube};

    fn two_cubes(offset: f64) -> TriangleMesh {
        let a = box_mesh([0.0; 3], [1.0; 3]);
        let b = box_mesh([1.0 + offset, 0.0, 0.0], [2.0 + offset, 1.0, 1.0]);
        TriangleMesh::concat("pair", [&a, &b])
    }

    /// Independent oracle: BFS over triangles where two triangles are
    /// adjacent iff some pair of their vertices is within eps.
    fn brute_force_count(mesh: &TriangleMesh, eps: f64) -> usize {
        let n = mesh.triangles.len();
        let mut label = vec![usize::MAX; n];
        let mut count = 0;
        for s in 0..n {
            if label[s] != usize::MAX {
                continue;
            }
            label[s] = count;
            let mut stack = vec![s];
            while let Some(t) = stack.pop() {
                for u in 0..n {
                    if label[u] != usize::MAX {
                        continue;
                    }
                    let linked = mesh.triangles[t].iter().any(|&a| {
                        mesh.triangles[u].iter().any(|&b| {
                            a == b
                                || (mesh.vertices[a as usize] - mesh.vertices[b as usize]).norm()
                                    <= eps
                        })
                    });
                    if linked {
                        label[u] = count;
                        stack.push(u);
                    }
                }
            }
            count += 1;
        }
        count
    }

    #[test]
    fn single_cube_is_one_part() {
        let ps = connected_components(&unit_cube(), 0.0).unwrap();
        assert_eq!(ps.len(), 1);
        assert!((ps.parts[0].volume - 1.0).abs() < 1e-9);
    }

    #[test]
    fn separated_cubes_are_two_parts() {
        let ps = connected_components(&two_cubes(4.0), 1e-6).unwrap();
        assert_eq!(ps.len(), 2);
        // equal volumes: tie broken by centroid x
        assert!(ps.parts[0].centroid.x < ps.parts[1].centroid.x);
    }

    #[test]
    fn weld_eps_controls_merging() {
        let m = two_cubes(1e-4);
        assert_eq!(brute_force_count(&m, 1e-3), 1);
        assert_eq!(brute_force_count(&m, 1e-5), 2);
        assert_eq!(connected_components(&m, 1e-3).unwrap().len(), 1);
        assert_eq!(connected_components(&m, 1e-5).unwrap().len(), 2);
    }

    #[test]
    fn parts_sorted_by_volume() {
        let small = box_mesh([5.0; 3], [5.5; 3]);
        let big = box_mesh([0.0; 3], [2.0; 3]);
        let m = TriangleMesh::concat("m", [&small, &big]);
        let ps = connected_components(&m, 0.0).unwrap();
        assert!((ps.parts[0].volume - 8.0).abs() < 1e-9);
        assert!((ps.parts[1].volume - 0.125).abs() < 1e-9);
        assert_eq!(ps.parts[1].source_triangles, (0..12).collect::<Vec<_>>());
    }

    #[test]
    fn negative_eps_rejected() {
        assert!(connected_components(&unit_cube(), -1.0).is_err());
    }

    proptest::proptest! {
        #[test]
        fn partition_matches_oracle(
            offsets in proptest::collection::vec((-3i32..3, -3i32..3, -3i32..3), 1..6),
            eps_exp in -6i32..0,
        ) {
            let eps = 10f64.powi(eps_exp);
            let boxes: Vec<TriangleMesh> = offsets
                .iter()
                .map(|&(x, y, z)| {
                    let o = [x as f64 * 0.75, y as f64 * 0.75, z as f64 * 0.75];
                    box_mesh(o, [o[0] + 0.5, o[1] + 0.5, o[2] + 0.5])
                })
                .collect();
            let m = TriangleMesh::concat("p", boxes.iter());
            let ps = connected_components(&m, eps).unwrap();
            let total: usize = ps.parts.iter().map(|p| p.source_triangles.len()).sum();
            proptest::prop_assert_eq!(total, m.triangles.len());
            let mut seen = vec![false; m.triangles.len()];
            for p in &ps.parts {
                for &t in &p.source_triangles {
                    proptest::prop_assert!(!seen[t]);
                    seen[t] = true;
                }
                for v in &p.mesh.vertices {
                    proptest::prop_assert!(p.aabb.contains(v, 0.0));
                }
                proptest::prop_assert!(p.aabb.contains(&p.centroid, 1e-12));
            }
            proptest::prop_assert_eq!(ps.len(), brute_force_count(&m, eps));
        }
    }
}
