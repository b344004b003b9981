use std::collections::HashMap;

use crate::geom::Vec3;

type Cell = (i64, i64, i64);

fn cell_of(p: &Vec3, inv: f64) -> Cell {
    (
        (p.x * inv).floor() as i64,
        (p.y * inv).floor() as i64,
        (p.z * inv).floor() as i64,
    )
}

/// Map every vertex to the first earlier vertex within `eps` (or itself).
///
/// With `eps == 0` only bitwise-identical positions are merged.
pub fn weld_representatives(vertices: &[Vec3], eps: f64) -> Vec<usize> {
    let mut rep: Vec<usize> = (0..vertices.len()).collect();
    if eps <= 0.0 {
        let mut seen: HashMap<[u64; 3], usize> = HashMap::new();
        for (i, p) in vertices.iter().enumerate() {
            let key = [p.x.to_bits(), p.y.to_bits(), p.z.to_bits()];
            rep[i] = *seen.entry(key).or_insert(i);
        }
        return rep;
    }
    let inv = 1.0 / eps;
    let mut grid: HashMap<Cell, Vec<usize>> = HashMap::new();
    for (i, p) in vertices.iter().enumerate() {
        let c = cell_of(p, inv);
        let mut found = None;
        'search: for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    if let Some(bucket) = grid.get(&(c.0 + dx, c.1 + dy, c.2 + dz)) {
                        for &j in bucket {
                            if (vertices[j] - p).norm() <= eps {
                                found = Some(j);
                                break 'search;
                            }
                        }
                    }
                }
            }
        }
        match found {
            Some(j) => rep[i] = j,
            None => grid.entry(c).or_default().push(i),
        }
    }
    rep
}

/// All vertex pairs (i < j) closer than `eps`, found by spatial hashing.
pub(crate) fn close_pairs(vertices: &[Vec3], eps: f64) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    if eps <= 0.0 {
        let rep = weld_representatives(vertices, 0.0);
        for (i, &r) in rep.iter().enumerate() {
            if r != i {
                out.push((r, i));
            }
        }
        return out;
    }
    let inv = 1.0 / eps;
    let mut grid: HashMap<Cell, Vec<usize>> = HashMap::new();
    for (i, p) in vertices.iter().enumerate() {
        grid.entry(cell_of(p, inv)).or_default().push(i);
    }
    for (i, p) in vertices.iter().enumerate() {
        let c = cell_of(p, inv);
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    if let Some(bucket) = grid.get(&(c.0 + dx, c.1 + dy, c.2 + dz)) {
                        for &j in bucket {
                            if j > i && (vertices[j] - p).norm() <= eps {
                                out.push((i, j));
                            }
                        }
                    }
                }
            }
        }
    }
    out
}
