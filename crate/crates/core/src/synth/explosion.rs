use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{Aabb, Vec3};
use crate::mesh::PartSet;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExplosionConfig {
    /// Allowed total pairwise box overlap, as a fraction of the scene box volume.
    pub overlap_threshold: f64,
    /// Per-part translation bound, in scene diagonals.
    pub max_translation: f64,
    /// Initial line-search step, in scene diagonals.
    pub step_size: f64,
    pub max_iters: usize,
    pub reg_weight: f64,
    /// Softplus sharpness applied to per-axis penetration depths (diagonal units).
    pub sharpness: f64,
    /// Boxes are inflated by half of this on every side, so separated parts
    /// keep roughly this gap (scene diagonals).
    pub clearance: f64,
    /// Seeds the direction of parts whose centroid sits on the scene centroid.
    pub seed: u64,
}

impl Default for ExplosionConfig {
    fn default() -> Self {
        ExplosionConfig {
            overlap_threshold: 1e-3,
            max_translation: 1.5,
            step_size: 0.02,
            max_iters: 2000,
            reg_weight: 0.01,
            sharpness: 1e3,
            clearance: 0.03,
            seed: 0,
        }
    }
}

impl ExplosionConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("overlap_threshold", self.overlap_threshold),
            ("max_translation", self.max_translation),
            ("step_size", self.step_size),
            ("reg_weight", self.reg_weight),
            ("sharpness", self.sharpness),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")));
            }
        }
        if self.overlap_threshold >= 1.0 {
            return Err(Error::InvalidArgument("overlap_threshold must be < 1".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidArgument("max_iters must be positive".into()));
        }
        if !(self.clearance >= 0.0 && self.clearance.is_finite()) {
            return Err(Error::InvalidArgument("clearance must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExplosionResult {
    /// Per-part translations in the input's units.
    pub translations: Vec<Vec3>,
    /// Unit outward direction assigned to each part.
    pub directions: Vec<Vec3>,
    pub converged: bool,
    pub iterations: usize,
    /// Total pairwise overlap of the inflated boxes per accepted iterate,
    /// as a fraction of the scene box volume. Starts with the assembled state.
    pub overlap_history: Vec<f64>,
}

impl ExplosionResult {
    pub fn final_overlap(&self) -> f64 {
        *self.overlap_history.last().unwrap_or(&0.0)
    }
}

struct Problem {
    lo: Vec<[f64; 3]>,
    hi: Vec<[f64; 3]>,
    dirs: Vec<Vec3>,
    weights: Vec<f64>,
    scene_volume: f64,
    cfg: ExplosionConfig,
}

fn softplus(x: f64, s: f64) -> f64 {
    let z = s * x;
    if z > 30.0 {
        x
    } else if z < -30.0 {
        z.exp() / s
    } else {
        z.exp().ln_1p() / s
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl Problem {
    fn displacements(&self, alpha: &[f64]) -> Vec<Vec3> {
        let raw: Vec<Vec3> = alpha.iter().zip(&self.dirs).map(|(a, d)| d * *a).collect();
        let wsum: f64 = self.weights.iter().sum();
        let mean = raw
            .iter()
            .zip(&self.weights)
            .fold(Vec3::zeros(), |acc, (v, w)| acc + v * *w)
            / wsum;
        raw.into_iter().map(|v| v - mean).collect()
    }

    fn within_bounds(&self, alpha: &[f64]) -> bool {
        self.displacements(alpha)
            .iter()
            .all(|v| v.norm() <= self.cfg.max_translation)
    }

    /// Total pairwise intersection volume of the inflated, displaced boxes.
    fn hard_overlap(&self, alpha: &[f64]) -> f64 {
        let n = self.lo.len();
        let mut total = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                let mut vol = 1.0;
                for k in 0..3 {
                    let oi = alpha[i] * self.dirs[i][k];
                    let oj = alpha[j] * self.dirs[j][k];
                    let len = (self.hi[i][k] + oi).min(self.hi[j][k] + oj)
                        - (self.lo[i][k] + oi).max(self.lo[j][k] + oj);
                    if len <= 0.0 {
                        vol = 0.0;
                        break;
                    }
                    vol *= len;
                }
                total += vol;
            }
        }
        total
    }

    /// Smooth objective and its gradient with respect to the radial magnitudes.
    fn smooth(&self, alpha: &[f64], reg: f64) -> (f64, Vec<f64>) {
        let n = self.lo.len();
        let s = self.cfg.sharpness;
        let cutoff = -40.0 / s;
        let mut value = 0.0;
        let mut grad = vec![0.0; n];
        for i in 0..n {
            for j in i + 1..n {
                let mut depth = [0.0; 3];
                let mut dsign = [0.0; 3];
                let mut skip = false;
                for k in 0..3 {
                    let oi = alpha[i] * self.dirs[i][k];
                    let oj = alpha[j] * self.dirs[j][k];
                    let a = self.hi[i][k] + oi - self.lo[j][k] - oj;
                    let b = self.hi[j][k] + oj - self.lo[i][k] - oi;
                    depth[k] = a.min(b);
                    dsign[k] = if a < b {
                        1.0
                    } else if b < a {
                        -1.0
                    } else {
                        0.0
                    };
                    if depth[k] < cutoff {
                        skip = true;
                        break;
                    }
                }
                if skip {
                    continue;
                }
                let sp = depth.map(|d| softplus(d, s));
                value += sp[0] * sp[1] * sp[2];
                // derivative with respect to the displacement of part i (part j gets the negative)
                let mut dv = Vec3::zeros();
                for k in 0..3 {
                    let others = sp[(k + 1) % 3] * sp[(k + 2) % 3];
                    dv[k] = sigmoid(s * depth[k]) * dsign[k] * others;
                }
                grad[i] += dv.dot(&self.dirs[i]);
                grad[j] -= dv.dot(&self.dirs[j]);
            }
        }
        for (g, a) in grad.iter_mut().zip(alpha) {
            value += reg * a * a;
            *g += 2.0 * reg * a;
        }
        (value, grad)
    }
}

fn unit_jitter(seed: u64, index: usize) -> Vec3 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    loop {
        let v = Vec3::new(
            rng.random::<f64>() * 2.0 - 1.0,
            rng.random::<f64>() * 2.0 - 1.0,
            rng.random::<f64>() * 2.0 - 1.0,
        );
        let n = v.norm();
        if n > 1e-3 && n <= 1.0 {
            return v / n;
        }
    }
}

/// Push parts radially outward from the scene centroid until their bounding
/// boxes stop overlapping.
///
/// Each part moves along its own fixed outward direction; the optimizer picks
/// the non-negative distance per part by projected gradient descent on a
/// softplus overlap surrogate with a backtracking line search that never lets
/// the true box overlap grow. The volume-weighted mean translation is removed
/// from the result.
pub fn optimize_explosion(parts: &PartSet, cfg: &ExplosionConfig) -> Result<ExplosionResult> {
    cfg.validate()?;
    let n = parts.len();
    if n < 2 {
        return Err(Error::SinglePart(n));
    }
    let scene = parts.aabb();
    let diag = scene.diagonal();
    if !(diag > 0.0) {
        return Err(Error::InvalidMesh("scene has zero extent".into()));
    }
    let origin = scene.center();
    let to_unit = |p: [f64; 3]| -> [f64; 3] {
        [
            (p[0] - origin[0]) / diag,
            (p[1] - origin[1]) / diag,
            (p[2] - origin[2]) / diag,
        ]
    };

    let vol_floor = 1e-12 * diag.powi(3);
    let weights: Vec<f64> = parts
        .parts
        .iter()
        .map(|p| {
            let v = if p.volume > vol_floor { p.volume } else { p.aabb.volume() };
            v.max(vol_floor) / diag.powi(3)
        })
        .collect();
    let wsum: f64 = weights.iter().sum();
    let center = parts
        .parts
        .iter()
        .zip(&weights)
        .fold(Vec3::zeros(), |acc, (p, w)| acc + p.centroid * *w)
        / wsum;
    let dirs: Vec<Vec3> = parts
        .parts
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let r = p.centroid - center;
            if r.norm() <= 1e-9 * diag {
                unit_jitter(cfg.seed, i)
            } else {
                r.normalize()
            }
        })
        .collect();

    let half = cfg.clearance / 2.0;
    let boxes: Vec<Aabb> = parts
        .parts
        .iter()
        .map(|p| Aabb::new(to_unit(p.aabb.min), to_unit(p.aabb.max)).inflated(half))
        .collect();
    let scene_unit = Aabb::new(to_unit(scene.min), to_unit(scene.max));
    let scene_volume = scene_unit.volume().max(1e-300);
    let problem = Problem {
        lo: boxes.iter().map(|b| b.min).collect(),
        hi: boxes.iter().map(|b| b.max).collect(),
        dirs: dirs.clone(),
        weights,
        scene_volume,
        cfg: cfg.clone(),
    };
    let threshold = cfg.overlap_threshold * problem.scene_volume;

    let finish = |alpha: &[f64], converged: bool, iterations: usize, history: Vec<f64>| {
        let translations = problem
            .displacements(alpha)
            .into_iter()
            .map(|v| v * diag)
            .collect();
        ExplosionResult {
            translations,
            directions: dirs.clone(),
            converged,
            iterations,
            overlap_history: history,
        }
    };

    let zero = vec![0.0; n];
    let h0 = problem.hard_overlap(&zero);
    let mut history = vec![h0 / problem.scene_volume];
    if h0 <= threshold {
        return Ok(finish(&zero, true, 0, history));
    }

    // radial start at a tenth of the diagonal, shrunk if it would add overlap
    let mut alpha = vec![0.1; n];
    let mut tries = 0;
    while (problem.hard_overlap(&alpha) > h0 || !problem.within_bounds(&alpha)) && tries < 10 {
        alpha.iter_mut().for_each(|a| *a *= 0.5);
        tries += 1;
    }
    if problem.hard_overlap(&alpha) > h0 || !problem.within_bounds(&alpha) {
        alpha = zero.clone();
    }
    let mut hard = problem.hard_overlap(&alpha);
    history.push(hard / problem.scene_volume);
    if hard <= threshold {
        let alpha = bisect_to_threshold(&problem, &zero, &alpha, threshold);
        let last = problem.hard_overlap(&alpha) / problem.scene_volume;
        *history.last_mut().unwrap() = last;
        return Ok(finish(&alpha, true, 0, history));
    }

    let mut reg = cfg.reg_weight;
    let mut anneals = 0;
    let (mut value, mut grad) = problem.smooth(&alpha, reg);
    let mut step = cfg.step_size;
    for iter in 1..=cfg.max_iters {
        // projected descent direction: magnitudes stay non-negative
        let mut dir: Vec<f64> = grad
            .iter()
            .zip(&alpha)
            .map(|(g, a)| if *a <= 0.0 && *g > 0.0 { 0.0 } else { -g })
            .collect();
        let norm = dir.iter().map(|d| d * d).sum::<f64>().sqrt();
        let mut accepted = None;
        let mut trial_step = step;
        if norm > 1e-15 {
            dir.iter_mut().for_each(|d| *d /= norm);
        }
        for _ in 0..if norm > 1e-15 { 40 } else { 0 } {
            let cand: Vec<f64> = alpha
                .iter()
                .zip(&dir)
                .map(|(a, d)| (a + trial_step * d).max(0.0))
                .collect();
            let (cv, cg) = problem.smooth(&cand, reg);
            let ch = problem.hard_overlap(&cand);
            if cv < value && ch <= hard && problem.within_bounds(&cand) {
                accepted = Some((cand, cv, cg, ch));
                break;
            }
            trial_step *= 0.5;
        }
        if accepted.is_none() && anneals < MAX_ANNEALS {
            // the penalty on distance is holding parts in overlap; weaken it
            reg *= 0.1;
            anneals += 1;
            (value, grad) = problem.smooth(&alpha, reg);
            step = cfg.step_size;
            continue;
        }
        if accepted.is_none() {
            accepted = escape_move(&problem, &alpha, hard, cfg.step_size).map(|cand| {
                let (cv, cg) = problem.smooth(&cand, reg);
                let ch = problem.hard_overlap(&cand);
                (cand, cv, cg, ch)
            });
        }
        let Some((cand, cv, cg, ch)) = accepted else {
            log::debug!("explosion stalled at iteration {iter}");
            return Ok(finish(&alpha, false, iter, history));
        };
        if ch <= threshold {
            let landed = bisect_to_threshold(&problem, &alpha, &cand, threshold);
            history.push(problem.hard_overlap(&landed) / problem.scene_volume);
            return Ok(finish(&landed, true, iter, history));
        }
        alpha = cand;
        value = cv;
        grad = cg;
        hard = ch;
        history.push(hard / problem.scene_volume);
        step = (trial_step * 1.5).min(0.25);
    }
    Ok(finish(&alpha, false, cfg.max_iters, history))
}

const MAX_ANNEALS: usize = 8;

/// Push one part, or all of them, further out along their directions; the
/// candidate with the lowest box overlap wins if it beats `hard`.
fn escape_move(problem: &Problem, alpha: &[f64], hard: f64, base_step: f64) -> Option<Vec<f64>> {
    let n = alpha.len();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for mover in 0..=n {
        let mut t = base_step;
        for _ in 0..8 {
            let cand: Vec<f64> = alpha
                .iter()
                .enumerate()
                .map(|(i, a)| if mover == n || i == mover { a + t } else { *a })
                .collect();
            if problem.within_bounds(&cand) {
                let h = problem.hard_overlap(&cand);
                if h < hard && best.as_ref().is_none_or(|b| h < b.0) {
                    best = Some((h, cand));
                }
            }
            t *= 2.0;
        }
    }
    best.map(|b| b.1)
}

/// Earliest point on the segment `from -> to` whose overlap is within the threshold,
/// given that `to` satisfies it.
fn bisect_to_threshold(problem: &Problem, from: &[f64], to: &[f64], threshold: f64) -> Vec<f64> {
    let at = |lambda: f64| -> Vec<f64> {
        from.iter()
            .zip(to)
            .map(|(a, b)| a + lambda * (b - a))
            .collect()
    };
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if problem.hard_overlap(&at(mid)) <= threshold {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    at(hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::shapes::box_mesh;
    use crate::mesh::TriangleMesh;

    fn parts_of(boxes: &[([f64; 3], [f64; 3])]) -> PartSet {
        let meshes: Vec<TriangleMesh> = boxes.iter().map(|(a, b)| box_mesh(*a, *b)).collect();
        PartSet::from_part_meshes("boxes", meshes)
    }

    fn raw_overlap(parts: &PartSet, v: &[Vec3], inflate: f64) -> f64 {
        let boxes: Vec<Aabb> = parts
            .parts
            .iter()
            .zip(v)
            .map(|(p, t)| p.aabb.translated(t).inflated(inflate))
            .collect();
        let mut total = 0.0;
        for i in 0..boxes.len() {
            for j in i + 1..boxes.len() {
                total += boxes[i].intersection_volume(&boxes[j]);
            }
        }
        total
    }

    #[test]
    fn two_cubes_match_symmetric_line_search() {
        let parts = parts_of(&[([0.0; 3], [1.0; 3]), ([0.5, 0.0, 0.0], [1.5, 1.0, 1.0])]);
        let cfg = ExplosionConfig::default();
        let res = optimize_explosion(&parts, &cfg).unwrap();
        assert!(res.converged);
        let (a, b) = (res.translations[0], res.translations[1]);
        let (left, right) = if parts.parts[0].centroid.x < parts.parts[1].centroid.x {
            (a, b)
        } else {
            (b, a)
        };
        assert!(left.x < 0.0 && right.x > 0.0);
        for v in [a, b] {
            assert!(v.y.abs() <= 1e-6 && v.z.abs() <= 1e-6, "{v:?}");
        }
        // oracle: scan symmetric separations for the smallest one under the threshold
        let diag = parts.aabb().diagonal();
        let limit = cfg.overlap_threshold * parts.aabb().volume();
        let inflate = cfg.clearance * diag / 2.0;
        let mut lo = 0.0;
        let mut hi = 2.0;
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            let v = [Vec3::new(-mid / 2.0, 0.0, 0.0), Vec3::new(mid / 2.0, 0.0, 0.0)];
            if raw_overlap(&parts, &v, inflate) <= limit {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let sep = right.x - left.x;
        assert!((sep - hi).abs() < 1e-6, "sep {sep} oracle {hi}");
        assert!(sep >= 0.5 - limit);
    }

    #[test]
    fn disjoint_cubes_stay_put() {
        let parts = parts_of(&[([0.0; 3], [1.0; 3]), ([2.0, 0.0, 0.0], [3.0, 1.0, 1.0])]);
        let res = optimize_explosion(&parts, &ExplosionConfig::default()).unwrap();
        assert!(res.converged);
        assert_eq!(res.iterations, 0);
        for v in &res.translations {
            assert!(v.norm() <= 1e-6);
        }
    }

    #[test]
    fn nested_cube_leaves_along_nearest_lattice_direction() {
        let parts = parts_of(&[
            ([-2.0; 3], [2.0; 3]),
            ([0.2, -0.4, -0.45], [1.2, 0.6, 0.55]),
        ]);
        let cfg = ExplosionConfig::default();
        let res = optimize_explosion(&parts, &cfg).unwrap();
        assert!(res.converged);
        let big = parts.parts.iter().position(|p| p.volume > 10.0).unwrap();
        let small = 1 - big;
        let rel = res.translations[small] - res.translations[big];
        let radial = (parts.parts[small].centroid - parts.parts[big].centroid).normalize();

        // oracle: for each of the 26 lattice directions find the shortest move
        // that clears the threshold; the best one should agree with the optimizer
        let diag = parts.aabb().diagonal();
        let limit = cfg.overlap_threshold * parts.aabb().volume();
        let inflate = cfg.clearance * diag / 2.0;
        let mut best = (f64::INFINITY, Vec3::zeros());
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    if (dx, dy, dz) == (0, 0, 0) {
                        continue;
                    }
                    let d = Vec3::new(dx as f64, dy as f64, dz as f64).normalize();
                    let mut dist = 0.0;
                    while dist < 20.0 {
                        let mut v = vec![Vec3::zeros(); 2];
                        v[small] = d * dist;
                        if raw_overlap(&parts, &v, inflate) <= limit {
                            break;
                        }
                        dist += 1e-3;
                    }
                    if dist < best.0 {
                        best = (dist, d);
                    }
                }
            }
        }
        let angle = |a: Vec3, b: Vec3| a.normalize().dot(&b.normalize()).clamp(-1.0, 1.0).acos().to_degrees();
        assert!(angle(rel, radial) <= 15.0, "radial angle {}", angle(rel, radial));
        assert!(angle(rel, best.1) <= 15.0, "lattice angle {}", angle(rel, best.1));
        assert!(raw_overlap(&parts, &res.translations, inflate) <= limit * (1.0 + 1e-9));
    }

    #[test]
    fn centered_nested_cube_separates() {
        let parts = parts_of(&[([-2.0; 3], [2.0; 3]), ([-0.5; 3], [0.5; 3])]);
        let cfg = ExplosionConfig::default();
        let res = optimize_explosion(&parts, &cfg).unwrap();
        assert!(res.converged);
        let limit = cfg.overlap_threshold * parts.aabb().volume();
        let inflate = cfg.clearance * parts.aabb().diagonal() / 2.0;
        assert!(raw_overlap(&parts, &res.translations, inflate) <= limit * (1.0 + 1e-9));
        // same seed, same answer
        let again = optimize_explosion(&parts, &cfg).unwrap();
        assert_eq!(res, again);
    }

    #[test]
    fn single_part_is_an_error() {
        let parts = parts_of(&[([0.0; 3], [1.0; 3])]);
        assert!(matches!(
            optimize_explosion(&parts, &ExplosionConfig::default()),
            Err(Error::SinglePart(1))
        ));
        let bad = ExplosionConfig { overlap_threshold: 1.5, ..Default::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn softplus_is_stable() {
        assert!((softplus(1.0, 1e3) - 1.0).abs() < 1e-12);
        assert!(softplus(-1.0, 1e3) >= 0.0);
        assert!((softplus(0.0, 1e3) - 2f64.ln() / 1e3).abs() < 1e-15);
        assert!((sigmoid(-800.0)).abs() < 1e-300 || sigmoid(-800.0) == 0.0);
    }
}
