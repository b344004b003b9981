//! Seeded synthetic part assemblies used as ground truth in tests and demos.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geom::Aabb;
use crate::mesh::shapes::{box_mesh, icosphere};
use crate::mesh::TriangleMesh;

/// A random box cut recursively into `n` face-touching boxes
/// (largest piece split across its longest side each time).
pub fn guillotine_boxes(n: usize, seed: u64) -> Vec<TriangleMesh> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let size = [0; 3].map(|_| rng.random_range(1.0..2.0));
    let mut cells = vec![Aabb::new([0.0; 3], size)];
    while cells.len() < n.max(1) {
        let (idx, _) = cells
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.volume().total_cmp(&b.1.volume()))
            .unwrap();
        let cell = cells.swap_remove(idx);
        let ext = cell.extent();
        let axis = (0..3).max_by(|&a, &b| ext[a].total_cmp(&ext[b])).unwrap();
        let cut = cell.min[axis] + ext[axis] * rng.random_range(0.3..0.7);
        let (mut a, mut b) = (cell, cell);
        a.max[axis] = cut;
        b.min[axis] = cut;
        cells.push(a);
        cells.push(b);
    }
    cells.iter().map(|c| box_mesh(c.min, c.max)).collect()
}

/// A base block with `n - 1` smaller blocks sunk 50 to 80 percent into
/// distinct faces.
pub fn embedded_blocks(n: usize, seed: u64) -> Vec<TriangleMesh> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base = [0; 3].map(|_| rng.random_range(1.0..1.6));
    let mut out = vec![box_mesh([0.0; 3], base)];
    let faces = [(0, 1.0), (1, 1.0), (2, 1.0), (0, -1.0), (1, -1.0), (2, -1.0)];
    for &(axis, side) in faces.iter().take(n.saturating_sub(1)) {
        let mut lo = [0.0; 3];
        let mut hi = [0.0; 3];
        for k in 0..3 {
            let size = if k == axis {
                rng.random_range(0.3..0.5)
            } else {
                rng.random_range(0.2..0.45) * base[k]
            };
            if k == axis {
                let depth = size * rng.random_range(0.5..0.8);
                if side > 0.0 {
                    lo[k] = base[k] - depth;
                } else {
                    lo[k] = depth - size;
                }
            } else {
                lo[k] = rng.random_range(0.1..0.9) * (base[k] - size);
            }
            hi[k] = lo[k] + size;
        }
        out.push(box_mesh(lo, hi));
    }
    out
}

/// A block with a sphere sunk into its top face.
pub fn sphere_in_block(subdiv: u32) -> Vec<TriangleMesh> {
    vec![
        box_mesh([-1.0, -1.0, -0.6], [1.0, 1.0, 0.6]),
        icosphere([0.15, -0.1, 0.75], 0.45, subdiv),
    ]
}

/// `n` overlapping random boxes in the unit cube; some may nest.
pub fn random_boxes(n: usize, seed: u64) -> Vec<TriangleMesh> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let size = [0; 3].map(|_| rng.random_range(0.2..0.6));
            let lo = [0, 1, 2].map(|k| rng.random_range(0.0..1.0 - size[k]));
            box_mesh(lo, [lo[0] + size[0], lo[1] + size[1], lo[2] + size[2]])
        })
        .collect()
}

/// `n` overlapping spheres along a wobbly row, dense enough to pass the
/// default vertex floor at subdivision 3 or more.
pub fn sphere_chain(n: usize, seed: u64, subdiv: u32) -> Vec<TriangleMesh> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let r = rng.random_range(0.4..0.6);
            let c = [i as f64 * 0.8, rng.random_range(-0.2..0.2), rng.random_range(-0.2..0.2)];
            icosphere(c, r, subdiv)
        })
        .collect()
}
