//! Seeded surface sampling and farthest-point downsampling.

use std::cmp::Ordering;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::TriangleMesh;
use crate::error::{Error, Result};
use crate::geom::Vec3;

#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Vec3>,
    pub seed: u64,
}

impl PointCloud {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn centroid(&self) -> Vec3 {
        self.points.iter().sum::<Vec3>() / self.points.len().max(1) as f64
    }
}

/// Draw `n` points area-proportionally over the triangles, uniformly in
/// barycentric coordinates within each. Bit-reproducible for a given seed.
pub fn sample_surface_uniform(mesh: &TriangleMesh, n: usize, seed: u64) -> Result<PointCloud> {
    if n == 0 {
        return Err(Error::InvalidArgument("sample count must be >= 1".into()));
    }
    if mesh.triangles.is_empty() {
        return Err(Error::EmptyMesh(mesh.name.clone()));
    }
    let mut cdf = Vec::with_capacity(mesh.triangles.len());
    let mut total = 0.0;
    for i in 0..mesh.triangles.len() {
        total += mesh.triangle_area(i);
        cdf.push(total);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points = (0..n)
        .map(|_| {
            let u: f64 = rng.random::<f64>() * total;
            let ti = cdf.partition_point(|&c| c <= u).min(cdf.len() - 1);
            let [a, b, c] = mesh.triangle(ti);
            let r1: f64 = rng.random::<f64>().sqrt();
            let r2: f64 = rng.random();
            a * (1.0 - r1) + b * (r1 * (1.0 - r2)) + c * (r1 * r2)
        })
        .collect();
    Ok(PointCloud { points, seed })
}

fn lex_cmp(a: &Vec3, b: &Vec3) -> Ordering {
    a.x.total_cmp(&b.x)
        .then(a.y.total_cmp(&b.y))
        .then(a.z.total_cmp(&b.z))
}

/// Indices selected by farthest-point sampling, `count` of them.
///
/// Starts from the point nearest the centroid; each following pick maximizes
/// the distance to the selected set. Ties go to the lexicographically
/// smallest point, so the selected positions do not depend on input order.
pub fn fps_indices(points: &[Vec3], count: usize) -> Vec<usize> {
    let n = points.len();
    let count = count.min(n);
    if count == 0 {
        return Vec::new();
    }
    let c = points.iter().sum::<Vec3>() / n as f64;
    let better = |i: usize, j: usize, di: f64, dj: f64, farther: bool| -> bool {
        let ord = if farther { di.total_cmp(&dj) } else { dj.total_cmp(&di) };
        match ord {
            Ordering::Greater => true,
            Ordering::Less => false,
            Ordering::Equal => lex_cmp(&points[i], &points[j]) == Ordering::Less,
        }
    };
    let mut start = 0;
    let mut dstart = (points[0] - c).norm_squared();
    for i in 1..n {
        let d = (points[i] - c).norm_squared();
        if better(i, start, d, dstart, false) {
            start = i;
            dstart = d;
        }
    }
    let mut selected = Vec::with_capacity(count);
    selected.push(start);
    let mut mind: Vec<f64> = points.iter().map(|p| (p - points[start]).norm_squared()).collect();
    while selected.len() < count {
        let mut best = usize::MAX;
        for i in 0..n {
            if best == usize::MAX || better(i, best, mind[i], mind[best], true) {
                best = i;
            }
        }
        selected.push(best);
        let q = points[best];
        for (i, p) in points.iter().enumerate() {
            let d = (p - q).norm_squared();
            if d < mind[i] {
                mind[i] = d;
            }
        }
    }
    selected
}

/// Keep `ceil(len / factor)` points chosen by farthest-point sampling.
pub fn fps_downsample(cloud: &PointCloud, factor: usize) -> Result<PointCloud> {
    if factor == 0 {
        return Err(Error::InvalidArgument("fps factor must be >= 1".into()));
    }
    if cloud.is_empty() {
        return Err(Error::InvalidArgument("fps on an empty cloud".into()));
    }
    let keep = cloud.len().div_ceil(factor);
    let idx = fps_indices(&cloud.points, keep);
    Ok(PointCloud {
        points: idx.iter().map(|&i| cloud.points[i]).collect(),
        seed: cloud.seed,
    })
}
