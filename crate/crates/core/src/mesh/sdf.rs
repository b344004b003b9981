//! Regular-grid signed distance fields (negative inside, positive outside).
//!
//! Construction: magnitude is the exact point/triangle distance for every
//! node within a narrow band of the surface, then propagated outward by
//! closest-point sweeps. The sign comes from the winding number: exact
//! integer crossing counts along grid scanlines for closed meshes, the
//! generalized (solid-angle) winding number otherwise. Triangles that lie
//! strictly inside another closed component are culled from the distance
//! set, so a mesh made of interpenetrating parts yields the field of their
//! union.

use std::io::{Read, Write};

use super::components::component_triangles;
use super::distance::{closest_point_on_triangle, winding_number};
use super::TriangleMesh;
use crate::error::{Error, Result};
use crate::geom::{Aabb, Vec3};

/// Padding on each side of the mesh box, as a fraction of its largest extent.
pub const GRID_PADDING: f64 = 0.1;
/// Half-width, in cells, of the band of exactly evaluated nodes.
const EXACT_BAND: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignMethod {
    /// Crossing counts along x scanlines (closed meshes).
    ScanlineWinding,
    /// Generalized winding number >= 1/2 (open meshes; flagged).
    GeneralizedWinding,
}

#[derive(Debug, Clone)]
pub struct SdfGrid {
    /// Nodes per axis.
    pub resolution: usize,
    pub origin: [f64; 3],
    pub cell_size: f64,
    /// Node values, x fastest: `i + r * (j + r * k)`.
    pub values: Vec<f64>,
    pub sign_method: SignMethod,
    /// False when the mesh was not closed and the sign is an estimate.
    pub watertight: bool,
    /// Triangles excluded from the distance set as interior to another part.
    pub culled_triangles: usize,
}

impl SdfGrid {
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.resolution * (j + self.resolution * k)
    }

    pub fn node_position(&self, i: usize, j: usize, k: usize) -> Vec3 {
        Vec3::new(
            self.origin[0] + i as f64 * self.cell_size,
            self.origin[1] + j as f64 * self.cell_size,
            self.origin[2] + k as f64 * self.cell_size,
        )
    }

    pub fn bounds(&self) -> Aabb {
        let side = (self.resolution - 1) as f64 * self.cell_size;
        Aabb::new(
            self.origin,
            [
                self.origin[0] + side,
                self.origin[1] + side,
                self.origin[2] + side,
            ],
        )
    }

    /// Cell index and fractional offset along one axis, clamped to the grid.
    fn locate(&self, x: f64, axis: usize) -> (usize, f64) {
        let u = (x - self.origin[axis]) / self.cell_size;
        let i0 = (u.floor().max(0.0) as usize).min(self.resolution - 2);
        (i0, u - i0 as f64)
    }

    fn corners(&self, p: &Vec3) -> ([usize; 3], [f64; 3], [f64; 8]) {
        let (i, fx) = self.locate(p.x, 0);
        let (j, fy) = self.locate(p.y, 1);
        let (k, fz) = self.locate(p.z, 2);
        let mut c = [0.0; 8];
        for (n, slot) in c.iter_mut().enumerate() {
            *slot = self.values[self.index(i + (n & 1), j + ((n >> 1) & 1), k + ((n >> 2) & 1))];
        }
        ([i, j, k], [fx, fy, fz], c)
    }

    fn trilinear(&self, p: &Vec3) -> f64 {
        let (_, [fx, fy, fz], c) = self.corners(p);
        let x00 = c[0] + (c[1] - c[0]) * fx;
        let x10 = c[2] + (c[3] - c[2]) * fx;
        let x01 = c[4] + (c[5] - c[4]) * fx;
        let x11 = c[6] + (c[7] - c[6]) * fx;
        let y0 = x00 + (x10 - x00) * fy;
        let y1 = x01 + (x11 - x01) * fy;
        y0 + (y1 - y0) * fz
    }

    fn trilinear_with_gradient(&self, p: &Vec3) -> (f64, Vec3) {
        let (_, [fx, fy, fz], c) = self.corners(p);
        let x00 = c[0] + (c[1] - c[0]) * fx;
        let x10 = c[2] + (c[3] - c[2]) * fx;
        let x01 = c[4] + (c[5] - c[4]) * fx;
        let x11 = c[6] + (c[7] - c[6]) * fx;
        let y0 = x00 + (x10 - x00) * fy;
        let y1 = x01 + (x11 - x01) * fy;
        let value = y0 + (y1 - y0) * fz;
        let h = self.cell_size;
        let dx = (1.0 - fy) * (1.0 - fz) * (c[1] - c[0])
            + fy * (1.0 - fz) * (c[3] - c[2])
            + (1.0 - fy) * fz * (c[5] - c[4])
            + fy * fz * (c[7] - c[6]);
        let dy = (1.0 - fz) * (x10 - x00) + fz * (x11 - x01);
        let dz = y1 - y0;
        (value, Vec3::new(dx, dy, dz) / h)
    }

    /// Field value anywhere: trilinear inside the grid, distance to the grid
    /// box plus the boundary value outside.
    pub fn value(&self, p: &Vec3) -> f64 {
        let b = self.bounds();
        let q = b.clamp(p);
        let v = self.trilinear(&q);
        if q == *p {
            v
        } else {
            v + (p - q).norm()
        }
    }

    /// Value and gradient of the extended field used by the optimizers.
    pub fn value_and_gradient(&self, p: &Vec3) -> (f64, Vec3) {
        let b = self.bounds();
        let q = b.clamp(p);
        let (v, mut g) = self.trilinear_with_gradient(&q);
        if q == *p {
            return (v, g);
        }
        for k in 0..3 {
            if q[k] != p[k] {
                g[k] = 0.0;
            }
        }
        let off = p - q;
        let d = off.norm();
        (v + d, g + off / d)
    }

    pub fn strictly_inside(&self, p: &Vec3) -> bool {
        let b = self.bounds();
        (0..3).all(|k| p[k] > b.min[k] && p[k] < b.max[k])
    }

    /// Debug export: little-endian header `{u32 resolution, f64 origin[3],
    /// f64 cell_size}` followed by `resolution^3` f32 values.
    pub fn write_export<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(&(self.resolution as u32).to_le_bytes())?;
        for o in self.origin {
            w.write_all(&o.to_le_bytes())?;
        }
        w.write_all(&self.cell_size.to_le_bytes())?;
        for v in &self.values {
            w.write_all(&(*v as f32).to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_export<R: Read>(mut r: R) -> Result<SdfGrid> {
        let mut b4 = [0u8; 4];
        let mut b8 = [0u8; 8];
        r.read_exact(&mut b4)?;
        let resolution = u32::from_le_bytes(b4) as usize;
        if !(2..=4096).contains(&resolution) {
            return Err(Error::InvalidArgument(format!("bad exported resolution {resolution}")));
        }
        let mut origin = [0.0; 3];
        for o in origin.iter_mut() {
            r.read_exact(&mut b8)?;
            *o = f64::from_le_bytes(b8);
        }
        r.read_exact(&mut b8)?;
        let cell_size = f64::from_le_bytes(b8);
        let n = resolution.pow(3);
        let mut values = Vec::with_capacity(n);
        for _ in 0..n {
            r.read_exact(&mut b4)?;
            values.push(f32::from_le_bytes(b4) as f64);
        }
        Ok(SdfGrid {
            resolution,
            origin,
            cell_size,
            values,
            sign_method: SignMethod::ScanlineWinding,
            watertight: true,
            culled_triangles: 0,
        })
    }
}

/// Grid placement for a mesh box: cubic, centred, padded on every side.
fn placement(bounds: &Aabb, resolution: usize) -> ([f64; 3], f64) {
    let extent = bounds.max_dimension().max(1e-12);
    let side = extent * (1.0 + 2.0 * GRID_PADDING);
    let c = bounds.center();
    let origin = [c.x - side / 2.0, c.y - side / 2.0, c.z - side / 2.0];
    (origin, side / (resolution - 1) as f64)
}

pub fn build_sdf(mesh: &TriangleMesh, resolution: usize) -> Result<SdfGrid> {
    if !(16..=512).contains(&resolution) {
        return Err(Error::ResolutionOutOfRange(resolution));
    }
    if mesh.triangles.is_empty() {
        return Err(Error::EmptyMesh(mesh.name.clone()));
    }
    let (origin, cell_size) = placement(&mesh.aabb(), resolution);
    let mut grid = SdfGrid {
        resolution,
        origin,
        cell_size,
        values: Vec::new(),
        sign_method: SignMethod::ScanlineWinding,
        watertight: mesh.is_closed(),
        culled_triangles: 0,
    };

    let tris: Vec<[Vec3; 3]> = (0..mesh.triangles.len()).map(|i| mesh.triangle(i)).collect();
    let comps = if grid.watertight {
        component_triangles(mesh, 0.0)
    } else {
        vec![(0..tris.len()).collect()]
    };
    let kept = union_components(&comps, &tris);
    let boundary: Vec<usize> = kept.iter().flat_map(|&c| comps[c].iter().copied()).collect();
    grid.culled_triangles = tris.len() - boundary.len();

    let whole = Window::full(resolution);
    let dist = unsigned_distance(&grid, &whole, &boundary.iter().map(|&i| tris[i]).collect::<Vec<_>>());
    let inside = if grid.watertight {
        scanline_inside(&grid, &whole, &mesh.triangles, &tris, &(0..tris.len()).collect::<Vec<_>>())
    } else {
        log::warn!(
            "{}: mesh is not closed; sign estimated from the generalized winding number",
            mesh.name
        );
        grid.sign_method = SignMethod::GeneralizedWinding;
        gwn_inside(&grid, &tris)
    };
    grid.values = dist
        .into_iter()
        .zip(&inside)
        .map(|(d, &inn)| if inn { -d } else { d })
        .collect();
    if grid.watertight {
        deepen_overlaps(&mut grid, mesh, &tris, &comps, &kept, &inside);
    }
    Ok(grid)
}

/// Components that are not swallowed by another closed component.
fn union_components(comps: &[Vec<usize>], tris: &[[Vec3; 3]]) -> Vec<usize> {
    if comps.len() < 2 {
        return (0..comps.len()).collect();
    }
    let comp_tris: Vec<Vec<[Vec3; 3]>> = comps
        .iter()
        .map(|c| c.iter().map(|&i| tris[i]).collect())
        .collect();
    let boxes: Vec<Aabb> = comp_tris
        .iter()
        .map(|ts| Aabb::from_points(ts.iter().flatten()).expect("non-empty"))
        .collect();
    (0..comps.len())
        .filter(|&c| {
            // swallowed when every triangle centroid sits inside one other component
            !(0..comps.len()).any(|o| {
                o != c
                    && boxes[o].contains(&boxes[c].center(), 0.0)
                    && comp_tris[c].iter().all(|t| {
                        let centroid = (t[0] + t[1] + t[2]) / 3.0;
                        boxes[o].contains(&centroid, 0.0)
                            && winding_number(&centroid, &comp_tris[o]).abs() >= 0.75
                    })
            })
        })
        .collect()
}

/// Where closed components interpenetrate, replace the nearest-triangle
/// magnitude by the union rule `-max_c depth_c` over the components holding
/// the node, so buried faces do not read as surface.
fn deepen_overlaps(
    grid: &mut SdfGrid,
    mesh: &TriangleMesh,
    tris: &[[Vec3; 3]],
    comps: &[Vec<usize>],
    kept: &[usize],
    inside: &[bool],
) {
    if kept.len() < 2 {
        return;
    }
    let boxes: Vec<Aabb> = kept
        .iter()
        .map(|&c| Aabb::from_points(comps[c].iter().flat_map(|&t| tris[t].iter())).expect("non-empty"))
        .collect();
    let overlapping: Vec<usize> = (0..kept.len())
        .filter(|&a| (0..kept.len()).any(|b| a != b && boxes[a].intersection_volume(&boxes[b]) > 0.0))
        .collect();
    if overlapping.is_empty() {
        return;
    }
    let r = grid.resolution;
    let mut depth = vec![0.0f64; r * r * r];
    let mut touched = vec![false; r * r * r];
    for &a in &overlapping {
        let members = &comps[kept[a]];
        let Some(win) = Window::covering(grid, &boxes[a].inflated(grid.cell_size)) else {
            continue;
        };
        let own: Vec<[Vec3; 3]> = members.iter().map(|&t| tris[t]).collect();
        let dist = unsigned_distance(grid, &win, &own);
        let inn = scanline_inside(grid, &win, &mesh.triangles, tris, members);
        for (local, (d, is_in)) in dist.into_iter().zip(inn).enumerate() {
            if !is_in {
                continue;
            }
            let g = win.global_index(grid, local);
            if inside[g] {
                depth[g] = depth[g].max(d);
                touched[g] = true;
            }
        }
    }
    for (g, t) in touched.into_iter().enumerate() {
        if t {
            grid.values[g] = -depth[g];
        }
    }
}

/// Axis-aligned block of grid nodes.
struct Window {
    lo: [usize; 3],
    n: [usize; 3],
}

impl Window {
    fn full(r: usize) -> Window {
        Window { lo: [0; 3], n: [r; 3] }
    }

    fn covering(grid: &SdfGrid, b: &Aabb) -> Option<Window> {
        let mut lo = [0; 3];
        let mut n = [0; 3];
        for axis in 0..3 {
            let (a, z) = node_range(grid, &Window::full(grid.resolution), b.min[axis], b.max[axis], axis)?;
            lo[axis] = a;
            n[axis] = z - a + 1;
        }
        Some(Window { lo, n })
    }

    fn len(&self) -> usize {
        self.n[0] * self.n[1] * self.n[2]
    }

    fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.n[0] * (j + self.n[1] * k)
    }

    fn global_index(&self, grid: &SdfGrid, local: usize) -> usize {
        let i = local % self.n[0];
        let j = (local / self.n[0]) % self.n[1];
        let k = local / (self.n[0] * self.n[1]);
        grid.index(self.lo[0] + i, self.lo[1] + j, self.lo[2] + k)
    }

    fn position(&self, grid: &SdfGrid, i: usize, j: usize, k: usize) -> Vec3 {
        grid.node_position(self.lo[0] + i, self.lo[1] + j, self.lo[2] + k)
    }
}

/// Local node index range of the window covering `[lo, hi]` along an axis.
fn node_range(grid: &SdfGrid, win: &Window, lo: f64, hi: f64, axis: usize) -> Option<(usize, usize)> {
    let first = win.lo[axis] as f64;
    let last = (win.lo[axis] + win.n[axis] - 1) as f64;
    let a = ((lo - grid.origin[axis]) / grid.cell_size).ceil().max(first);
    let b = ((hi - grid.origin[axis]) / grid.cell_size).floor().min(last);
    (a <= b).then_some(((a - first) as usize, (b - first) as usize))
}

fn unsigned_distance(grid: &SdfGrid, win: &Window, tris: &[[Vec3; 3]]) -> Vec<f64> {
    let [nx, ny, nz] = win.n;
    let n = win.len();
    let h = grid.cell_size;
    let band = EXACT_BAND * h;
    let mut best = vec![f64::INFINITY; n];
    let mut closest = vec![Vec3::zeros(); n];

    for [a, b, c] in tris {
        let mut bx = Aabb::from_points([a, b, c]).expect("three points");
        bx = bx.inflated(band);
        let normal = (b - a).cross(&(c - a)).normalize();
        let (Some((i0, i1)), Some((j0, j1)), Some((k0, k1))) = (
            node_range(grid, win, bx.min[0], bx.max[0], 0),
            node_range(grid, win, bx.min[1], bx.max[1], 1),
            node_range(grid, win, bx.min[2], bx.max[2], 2),
        ) else {
            continue;
        };
        for k in k0..=k1 {
            for j in j0..=j1 {
                for i in i0..=i1 {
                    let p = win.position(grid, i, j, k);
                    if normal.dot(&(p - a)).abs() > band {
                        continue;
                    }
                    let q = closest_point_on_triangle(&p, a, b, c);
                    let d = (p - q).norm();
                    let idx = win.index(i, j, k);
                    if d < best[idx] {
                        best[idx] = d;
                        closest[idx] = q;
                    }
                }
            }
        }
    }

    // Closest-point propagation: one sweep per octant direction.
    let (sy_stride, sz_stride) = (nx as isize, (nx * ny) as isize);
    for dir in 0..8 {
        let sx = if dir & 1 == 0 { 1isize } else { -1 };
        let sy = if dir & 2 == 0 { 1isize } else { -1 };
        let sz = if dir & 4 == 0 { 1isize } else { -1 };
        for kk in 0..nz {
            let k = if sz > 0 { kk } else { nz - 1 - kk };
            for jj in 0..ny {
                let j = if sy > 0 { jj } else { ny - 1 - jj };
                for ii in 0..nx {
                    let i = if sx > 0 { ii } else { nx - 1 - ii };
                    let idx = win.index(i, j, k);
                    let p = win.position(grid, i, j, k);
                    let mut neighbours = [usize::MAX; 3];
                    if ii > 0 {
                        neighbours[0] = (idx as isize - sx) as usize;
                    }
                    if jj > 0 {
                        neighbours[1] = (idx as isize - sy * sy_stride) as usize;
                    }
                    if kk > 0 {
                        neighbours[2] = (idx as isize - sz * sz_stride) as usize;
                    }
                    for nb in neighbours {
                        if nb == usize::MAX || !best[nb].is_finite() {
                            continue;
                        }
                        let q = closest[nb];
                        let d = (p - q).norm();
                        if d < best[idx] {
                            best[idx] = d;
                            closest[idx] = q;
                        }
                    }
                }
            }
        }
    }
    best
}

/// Inside test from oriented crossing counts along each x scanline, using
/// only the listed triangles. Rays are offset by a tiny irrational fraction
/// of a cell so they never pass exactly through mesh edges of grid-aligned
/// geometry.
fn scanline_inside(
    grid: &SdfGrid,
    win: &Window,
    ids: &[[u32; 3]],
    tris: &[[Vec3; 3]],
    subset: &[usize],
) -> Vec<bool> {
    let [nx, ny, nz] = win.n;
    let h = grid.cell_size;
    let dy = h * 3.1e-6 * std::f64::consts::PI;
    let dz = h * 2.7e-6 * std::f64::consts::E;
    let mut crossings: Vec<(usize, f64, i32)> = Vec::new();

    for &ti in subset {
        let [a, b, c] = &tris[ti];
        let tid = ids[ti];
        let area2 = (b.y - a.y) * (c.z - a.z) - (b.z - a.z) * (c.y - a.y);
        if area2 == 0.0 {
            continue;
        }
        let (Some((j0, j1)), Some((k0, k1))) = (
            node_range(grid, win, a.y.min(b.y).min(c.y) - dy, a.y.max(b.y).max(c.y) - dy, 1),
            node_range(grid, win, a.z.min(b.z).min(c.z) - dz, a.z.max(b.z).max(c.z) - dz, 2),
        ) else {
            continue;
        };
        let verts = [(tid[0], a), (tid[1], b), (tid[2], c)];
        let n = (b - a).cross(&(c - a));
        let sign = if area2 > 0.0 { 1.0 } else { -1.0 };
        for k in k0..=k1 {
            let z = grid.origin[2] + (win.lo[2] + k) as f64 * h + dz;
            for j in j0..=j1 {
                let y = grid.origin[1] + (win.lo[1] + j) as f64 * h + dy;
                let mut inside = true;
                for e in 0..3 {
                    let (ip, p) = verts[e];
                    let (iq, q) = verts[(e + 1) % 3];
                    // Evaluate each edge in a canonical direction so the two
                    // triangles sharing it agree exactly.
                    let f = if ip < iq {
                        edge(p, q, y, z)
                    } else {
                        -edge(q, p, y, z)
                    };
                    if f * sign <= 0.0 {
                        inside = false;
                        break;
                    }
                }
                if !inside {
                    continue;
                }
                let x = a.x - (n.y * (y - a.y) + n.z * (z - a.z)) / n.x;
                // Normal facing -x means the ray enters the solid.
                let s = if n.x < 0.0 { 1 } else { -1 };
                crossings.push((j + ny * k, x, s));
            }
        }
    }
    crossings.sort_by(|p, q| p.0.cmp(&q.0).then(p.1.total_cmp(&q.1)));

    let mut inside = vec![false; win.len()];
    let mut at = 0;
    for line in 0..ny * nz {
        let start = at;
        while at < crossings.len() && crossings[at].0 == line {
            at += 1;
        }
        let hits = &crossings[start..at];
        if hits.is_empty() {
            continue;
        }
        let (j, k) = (line % ny, line / ny);
        let mut w = 0i32;
        let mut h_idx = 0;
        for i in 0..nx {
            let x = grid.origin[0] + (win.lo[0] + i) as f64 * h;
            while h_idx < hits.len() && hits[h_idx].1 < x {
                w += hits[h_idx].2;
                h_idx += 1;
            }
            if w != 0 {
                inside[win.index(i, j, k)] = true;
            }
        }
    }
    inside
}

fn edge(p: &Vec3, q: &Vec3, y: f64, z: f64) -> f64 {
    (q.y - p.y) * (z - p.z) - (q.z - p.z) * (y - p.y)
}

fn gwn_inside(grid: &SdfGrid, tris: &[[Vec3; 3]]) -> Vec<bool> {
    let r = grid.resolution;
    let mut inside = vec![false; r * r * r];
    for k in 0..r {
        for j in 0..r {
            for i in 0..r {
                let p = grid.node_position(i, j, k);
                inside[grid.index(i, j, k)] = winding_number(&p, tris) >= 0.5;
            }
        }
    }
    inside
}

/// Field values at arbitrary points (far-field rule outside the grid).
pub fn query_sdf(grid: &SdfGrid, points: &[Vec3]) -> Vec<f64> {
    points.iter().map(|p| grid.value(p)).collect()
}

/// Analytic gradient of the trilinear interpolant. Points must lie strictly
/// inside the grid.
pub fn query_sdf_gradient(grid: &SdfGrid, points: &[Vec3]) -> Result<Vec<Vec3>> {
    points
        .iter()
        .map(|p| {
            if grid.strictly_inside(p) {
                Ok(grid.trilinear_with_gradient(p).1)
            } else {
                Err(Error::PointOnGridBoundary([p.x, p.y, p.z]))
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::shapes::{box_mesh, icosphere, unit_cube};

    fn box_sdf(p: &Vec3, half: f64) -> f64 {
        let q = p.abs() - Vec3::repeat(half);
        let outside = q.map(|x| x.max(0.0)).norm();
        outside + q.max().min(0.0)
    }

    #[test]
    fn sphere_center_and_outside() {
        let sphere = icosphere([0.0; 3], 1.0, 4);
        let g = build_sdf(&sphere, 128).unwrap();
        assert!(g.watertight);
        assert!((g.value(&Vec3::zeros()) + 1.0).abs() <= 0.05);
        assert!((g.value(&Vec3::new(2.0, 0.0, 0.0)) - 1.0).abs() <= 0.05);
        let grad = query_sdf_gradient(&g, &[Vec3::new(0.5, 0.0, 0.0)]).unwrap()[0];
        assert!((grad.norm() - 1.0).abs() <= 0.05);
        assert!((grad.normalize() - Vec3::x()).norm() < 0.05);
    }

    #[test]
    fn cube_value_matches_box_sdf() {
        let g = build_sdf(&unit_cube(), 64).unwrap();
        let p = Vec3::new(0.75, 0.0, 0.0);
        assert!((g.value(&p) - 0.25).abs() <= 1.5 * g.cell_size);
        for p in [Vec3::new(0.1, 0.2, -0.3), Vec3::new(0.55, 0.55, 0.0), Vec3::zeros()] {
            assert!((g.value(&p) - box_sdf(&p, 0.5)).abs() <= 1.5 * g.cell_size, "{p:?}");
        }
    }

    #[test]
    fn node_and_midpoint_interpolation() {
        let g = build_sdf(&unit_cube(), 32).unwrap();
        let (i, j, k) = (5, 17, 9);
        let p = g.node_position(i, j, k);
        assert_eq!(g.value(&p), g.values[g.index(i, j, k)]);
        let q = g.node_position(i + 1, j, k);
        let mid = (p + q) / 2.0;
        let expect = 0.5 * (g.values[g.index(i, j, k)] + g.values[g.index(i + 1, j, k)]);
        assert!((g.value(&mid) - expect).abs() < 1e-14);
    }

    #[test]
    fn far_field_is_positive() {
        let g = build_sdf(&unit_cube(), 32).unwrap();
        let p = Vec3::new(50.0, -3.0, 7.0);
        let d = (p - g.bounds().clamp(&p)).norm();
        let v = g.value(&p);
        assert!(v > 0.0 && v >= d);
        assert!(query_sdf_gradient(&g, &[p]).is_err());
        assert!(query_sdf_gradient(&g, &[g.node_position(0, 3, 3)]).is_err());
    }

    #[test]
    fn constant_region_has_zero_gradient() {
        let mut g = build_sdf(&unit_cube(), 16).unwrap();
        g.values.iter_mut().for_each(|v| *v = 0.3);
        let p = Vec3::new(0.1, 0.2, 0.05);
        assert_eq!(query_sdf_gradient(&g, &[p]).unwrap()[0], Vec3::zeros());
    }

    #[test]
    fn resolution_bounds() {
        assert!(matches!(build_sdf(&unit_cube(), 8), Err(Error::ResolutionOutOfRange(8))));
        assert!(build_sdf(&unit_cube(), 513).is_err());
    }

    #[test]
    fn open_mesh_is_flagged() {
        let mut cube = unit_cube();
        cube.triangles.truncate(10);
        let g = build_sdf(&cube, 16).unwrap();
        assert!(!g.watertight);
        assert_eq!(g.sign_method, SignMethod::GeneralizedWinding);
        assert!(g.value(&Vec3::zeros()) < 0.0);
    }

    #[test]
    fn overlapping_parts_give_union_field() {
        let a = box_mesh([-1.0, -0.5, -0.5], [0.5, 0.5, 0.5]);
        let b = box_mesh([-0.5, -0.5, -0.5], [1.0, 0.5, 0.5]);
        let m = TriangleMesh::concat("ab", [&a, &b]);
        let g = build_sdf(&m, 64).unwrap();
        // x = 0.4 is next to a's +x face, which is buried inside b.
        let p = Vec3::new(0.4, 0.0, 0.0);
        assert!((g.value(&p) + 0.5).abs() <= 1.5 * g.cell_size, "{}", g.value(&p));
        // a surface point of b buried in a
        let q = Vec3::new(-0.5, 0.2, 0.1);
        assert!((g.value(&q) + 0.3).abs() <= 1.5 * g.cell_size, "{}", g.value(&q));
        // outside both, the field is untouched
        let o = Vec3::new(1.2, 0.0, 0.0);
        assert!((g.value(&o) - 0.2).abs() <= 0.5 * g.cell_size);
    }

    #[test]
    fn swallowed_component_is_culled() {
        let outer = box_mesh([-1.0; 3], [1.0; 3]);
        let inner = box_mesh([-0.2; 3], [0.3; 3]);
        let m = TriangleMesh::concat("nested", [&outer, &inner]);
        let g = build_sdf(&m, 48).unwrap();
        assert_eq!(g.culled_triangles, 12);
        let p = Vec3::new(0.05, 0.05, 0.05);
        assert!((g.value(&p) + 0.95).abs() <= 1.5 * g.cell_size, "{}", g.value(&p));
    }

    #[test]
    fn export_round_trip() {
        let g = build_sdf(&unit_cube(), 16).unwrap();
        let mut buf = Vec::new();
        g.write_export(&mut buf).unwrap();
        assert_eq!(buf.len(), 4 + 32 + 4 * 16usize.pow(3));
        let back = SdfGrid::read_export(buf.as_slice()).unwrap();
        assert_eq!(back.resolution, 16);
        assert_eq!(back.origin, g.origin);
        assert!((back.values[100] - g.values[100]).abs() < 1e-6);
    }
}
