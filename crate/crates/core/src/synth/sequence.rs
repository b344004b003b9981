use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{arr3, vec3, Aabb, Vec3};
use crate::mesh::{connected_components, default_weld_eps, PartSet, TriangleMesh};

/// Frames of a part assembly moving apart over time `t` in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExplodedSequence {
    pub times: Vec<f64>,
    pub frames: Vec<TriangleMesh>,
    /// Ground-truth per-part translations at `t = 1`, when known.
    pub translations: Option<Vec<Vec3>>,
    pub part_count: usize,
    /// Triangles per part, in frame order, when known.
    pub part_triangle_counts: Option<Vec<usize>>,
}

/// `p_normalized = (p - center) * scale`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizeTransform {
    pub center: [f64; 3],
    pub scale: f64,
}

impl NormalizeTransform {
    pub fn identity() -> Self {
        NormalizeTransform { center: [0.0; 3], scale: 1.0 }
    }

    pub fn apply(&self, p: &Vec3) -> Vec3 {
        (p - vec3(self.center)) * self.scale
    }

    pub fn invert(&self, p: &Vec3) -> Vec3 {
        p / self.scale + vec3(self.center)
    }

    /// `self` after `first`.
    pub fn compose(&self, first: &NormalizeTransform) -> NormalizeTransform {
        // ((p - c1) s1 - c2) s2 = (p - (c1 + c2 / s1)) s1 s2
        let c = vec3(first.center) + vec3(self.center) / first.scale;
        NormalizeTransform { center: arr3(&c), scale: first.scale * self.scale }
    }
}

pub fn uniform_times(count: usize) -> Result<Vec<f64>> {
    if count < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 times, got {count}")));
    }
    Ok((0..count).map(|i| i as f64 / (count - 1) as f64).collect())
}

fn validate_times(times: &[f64]) -> Result<()> {
    if times.len() < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 times, got {}", times.len())));
    }
    if times[0] != 0.0 || *times.last().unwrap() != 1.0 {
        return Err(Error::InvalidArgument("times must start at 0 and end at 1".into()));
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidArgument("times must be strictly ascending".into()));
    }
    Ok(())
}

impl ExplodedSequence {
    pub fn validate(&self) -> Result<()> {
        validate_times(&self.times)?;
        if self.times.len() != self.frames.len() {
            return Err(Error::LengthMismatch {
                what: "times vs frames",
                left: self.times.len(),
                right: self.frames.len(),
            });
        }
        if let Some(t) = &self.translations {
            if t.len() != self.part_count {
                return Err(Error::LengthMismatch {
                    what: "translations vs parts",
                    left: t.len(),
                    right: self.part_count,
                });
            }
        }
        if let Some(counts) = &self.part_triangle_counts {
            let total: usize = counts.iter().sum();
            if counts.len() != self.part_count || self.frames.iter().any(|f| f.triangles.len() != total) {
                return Err(Error::InvalidArgument("part triangle counts do not match frames".into()));
            }
        }
        Ok(())
    }

    pub fn union_aabb(&self) -> Aabb {
        self.frames
            .iter()
            .map(|f| f.aabb())
            .reduce(|a, b| a.union(&b))
            .expect("sequence has frames")
    }

    /// Per-part meshes of one frame, using the stored triangle counts when
    /// present and connected components otherwise.
    pub fn frame_parts(&self, index: usize) -> Result<Vec<TriangleMesh>> {
        let frame = &self.frames[index];
        match &self.part_triangle_counts {
            Some(counts) => {
                let mut start = 0;
                let mut out = Vec::with_capacity(counts.len());
                for (i, &n) in counts.iter().enumerate() {
                    let tris = frame.triangles[start..start + n].to_vec();
                    start += n;
                    let (m, _, _) = TriangleMesh::cleaned(
                        format!("{}_part{i}", frame.name),
                        frame.vertices.clone(),
                        tris,
                        0.0,
                    )?;
                    out.push(m);
                }
                Ok(out)
            }
            None => Ok(connected_components(frame, default_weld_eps(frame))?
                .parts
                .into_iter()
                .map(|p| p.mesh)
                .collect()),
        }
    }
}

/// Place every part at `assembled + t * v_i` for each requested time.
pub fn interpolate_sequence(parts: &PartSet, translations: &[Vec3], times: &[f64]) -> Result<ExplodedSequence> {
    if translations.len() != parts.len() {
        return Err(Error::LengthMismatch {
            what: "translations vs parts",
            left: translations.len(),
            right: parts.len(),
        });
    }
    validate_times(times)?;
    let name = &parts.source.name;
    let frames = times
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            let moved: Vec<TriangleMesh> = parts
                .parts
                .iter()
                .zip(translations)
                .map(|(p, v)| if t == 0.0 { p.mesh.clone() } else { p.mesh.translated(&(v * t)) })
                .collect();
            TriangleMesh::concat(format!("{name}_frame{k}"), moved.iter())
        })
        .collect();
    Ok(ExplodedSequence {
        times: times.to_vec(),
        frames,
        translations: Some(translations.to_vec()),
        part_count: parts.len(),
        part_triangle_counts: Some(parts.parts.iter().map(|p| p.mesh.triangles.len()).collect()),
    })
}

/// Center the union box of all frames at the origin and scale its largest side to 2.
pub fn normalize_sequence(seq: &ExplodedSequence) -> Result<(ExplodedSequence, NormalizeTransform)> {
    seq.validate()?;
    let bounds = seq.union_aabb();
    let dim = bounds.max_dimension();
    if !(dim > 0.0) {
        return Err(Error::ZeroVolume);
    }
    let tf = NormalizeTransform { center: arr3(&bounds.center()), scale: 2.0 / dim };
    let frames = seq.frames.iter().map(|f| f.mapped(|p| tf.apply(p))).collect();
    let translations = seq
        .translations
        .as_ref()
        .map(|ts| ts.iter().map(|v| v * tf.scale).collect());
    Ok((
        ExplodedSequence {
            times: seq.times.clone(),
            frames,
            translations,
            part_count: seq.part_count,
            part_triangle_counts: seq.part_triangle_counts.clone(),
        },
        tf,
    ))
}

/// Largest side of the last frame's box over that of the first frame's.
pub fn expansion_ratio(seq: &ExplodedSequence) -> f64 {
    let first = seq.frames.first().map(|f| f.aabb().max_dimension()).unwrap_or(0.0);
    let last = seq.frames.last().map(|f| f.aabb().max_dimension()).unwrap_or(0.0);
    if first > 0.0 {
        last / first
    } else {
        f64::INFINITY
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RejectDecision {
    pub accepted: bool,
    pub reasons: Vec<String>,
    /// Smallest pairwise box gap at `t = 1`.
    pub min_gap: f64,
    pub expansion_ratio: f64,
}

pub fn reject_sequence(seq: &ExplodedSequence, min_gap: f64, max_expansion: f64) -> Result<RejectDecision> {
    seq.validate()?;
    let last = seq.frames.len() - 1;
    let boxes: Vec<Aabb> = seq.frame_parts(last)?.iter().map(|m| m.aabb()).collect();
    let mut gap = f64::INFINITY;
    for i in 0..boxes.len() {
        for j in i + 1..boxes.len() {
            gap = gap.min(boxes[i].gap(&boxes[j]));
        }
    }
    let ratio = expansion_ratio(seq);
    let mut reasons = Vec::new();
    if gap < min_gap {
        reasons.push(format!("parts too close at t=1: gap {gap:.3e} < {min_gap}"));
    }
    if ratio > max_expansion {
        reasons.push(format!("expansion ratio {ratio:.3} > {max_expansion}: excessively large"));
    }
    Ok(RejectDecision { accepted: reasons.is_empty(), reasons, min_gap: gap, expansion_ratio: ratio })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::shapes::box_mesh;
    use proptest::prelude::*;

    fn two_boxes() -> PartSet {
        PartSet::from_part_meshes(
            "pair",
            vec![box_mesh([0.0; 3], [1.0; 3]), box_mesh([0.5, 0.0, 0.0], [1.5, 1.0, 1.0])],
        )
    }

    fn centroids(seq: &ExplodedSequence, k: usize) -> Vec<Vec3> {
        seq.frame_parts(k).unwrap().iter().map(|m| m.centroid()).collect()
    }

    #[test]
    fn endpoints_and_midpoint() {
        let parts = two_boxes();
        let v = vec![Vec3::new(-1.0, 0.2, 0.0), Vec3::new(1.0, 0.0, 0.3)];
        let seq = interpolate_sequence(&parts, &v, &[0.0, 0.5, 1.0]).unwrap();
        assert_eq!(seq.frames[0].vertices, parts.source.vertices);
        assert_eq!(seq.frames[0].triangles, parts.source.triangles);
        let c0 = centroids(&seq, 0);
        let c1 = centroids(&seq, 1);
        let c2 = centroids(&seq, 2);
        for i in 0..2 {
            assert!((c2[i] - c0[i] - v[i]).norm() < 1e-12);
            assert!((c1[i] - (c0[i] + c2[i]) / 2.0).norm() < 1e-9);
        }
    }

    #[test]
    fn length_and_time_errors() {
        let parts = two_boxes();
        assert!(matches!(
            interpolate_sequence(&parts, &[Vec3::zeros()], &[0.0, 1.0]),
            Err(Error::LengthMismatch { .. })
        ));
        let v = vec![Vec3::zeros(); 2];
        assert!(interpolate_sequence(&parts, &v, &[0.1, 1.0]).is_err());
        assert!(interpolate_sequence(&parts, &v, &[0.0, 0.6, 0.5, 1.0]).is_err());
        assert!(uniform_times(1).is_err());
        assert_eq!(uniform_times(5).unwrap(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
    }

    #[test]
    fn normalize_scale_and_identity() {
        let parts = PartSet::from_part_meshes(
            "big",
            vec![box_mesh([-2.0; 3], [0.0; 3]), box_mesh([0.0; 3], [2.0; 3])],
        );
        let seq = interpolate_sequence(&parts, &[Vec3::zeros(), Vec3::zeros()], &[0.0, 1.0]).unwrap();
        let (n, tf) = normalize_sequence(&seq).unwrap();
        assert_eq!(tf.scale, 0.5);
        assert_eq!(tf.center, [0.0; 3]);
        let (_, again) = normalize_sequence(&n).unwrap();
        assert_eq!(again, NormalizeTransform::identity());
    }

    #[test]
    fn reject_rules() {
        let parts = two_boxes();
        let apart = vec![Vec3::new(-0.5, 0.0, 0.0), Vec3::new(0.5, 0.0, 0.0)];
        let seq = interpolate_sequence(&parts, &apart, &[0.0, 1.0]).unwrap();
        let d = reject_sequence(&seq, 0.01, 4.0).unwrap();
        assert!(d.accepted, "{:?}", d.reasons);
        assert!((d.min_gap - 0.5).abs() < 1e-12);
        assert!((d.expansion_ratio - 2.5 / 1.5).abs() < 1e-12);

        let stuck = interpolate_sequence(&parts, &[Vec3::zeros(), Vec3::zeros()], &[0.0, 1.0]).unwrap();
        let d = reject_sequence(&stuck, 0.01, 4.0).unwrap();
        assert!(!d.accepted);
        assert!(d.reasons[0].contains("too close"));

        // 1.5 wide assembly blown up to 9 wide
        let far = vec![Vec3::new(-3.75, 0.0, 0.0), Vec3::new(3.75, 0.0, 0.0)];
        let seq = interpolate_sequence(&parts, &far, &[0.0, 1.0]).unwrap();
        let d = reject_sequence(&seq, 0.01, 4.0).unwrap();
        assert!((d.expansion_ratio - 6.0).abs() < 1e-12);
        assert!(!d.accepted);
        assert!(d.reasons[0].contains("excessively large"));
    }

    #[test]
    fn component_fallback_matches_counts() {
        let parts = two_boxes();
        let apart = vec![Vec3::new(-0.5, 0.0, 0.0), Vec3::new(0.5, 0.0, 0.0)];
        let mut seq = interpolate_sequence(&parts, &apart, &[0.0, 1.0]).unwrap();
        let known = reject_sequence(&seq, 0.01, 4.0).unwrap();
        seq.part_triangle_counts = None;
        assert_eq!(reject_sequence(&seq, 0.01, 4.0).unwrap(), known);
    }

    proptest! {
        #[test]
        fn centroids_move_linearly(
            vx in -3.0f64..3.0, vy in -3.0f64..3.0, wz in -3.0f64..3.0,
            t1 in 0.05f64..0.3, t2 in 0.35f64..0.6, t3 in 0.65f64..0.95,
        ) {
            let parts = two_boxes();
            let v = vec![Vec3::new(vx, vy, 0.0), Vec3::new(0.0, vy, wz)];
            let seq = interpolate_sequence(&parts, &v, &[0.0, t1, t2, t3, 1.0]).unwrap();
            let (a, b, c) = (centroids(&seq, 1), centroids(&seq, 2), centroids(&seq, 3));
            let lambda = (t2 - t1) / (t3 - t1);
            for i in 0..2 {
                let lerp = a[i] + (c[i] - a[i]) * lambda;
                prop_assert!((b[i] - lerp).norm() <= 1e-9);
            }
        }

        #[test]
        fn normalization_is_idempotent(
            sx in 0.1f64..10.0, ox in -5.0f64..5.0, oy in -5.0f64..5.0, vz in -4.0f64..4.0,
        ) {
            let parts = PartSet::from_part_meshes("p", vec![
                box_mesh([ox, oy, 0.0], [ox + sx, oy + 1.0, 1.0]),
                box_mesh([ox, oy, 1.0], [ox + 1.0, oy + 2.0, 2.0 + sx]),
            ]);
            let seq = interpolate_sequence(&parts, &[Vec3::zeros(), Vec3::new(0.0, 0.0, vz)], &[0.0, 0.5, 1.0]).unwrap();
            let (n1, tf1) = normalize_sequence(&seq).unwrap();
            prop_assert!((n1.union_aabb().max_dimension() - 2.0).abs() <= 1e-9);
            prop_assert!(n1.union_aabb().center().norm() <= 1e-9);
            let (n2, tf2) = normalize_sequence(&n1).unwrap();
            prop_assert!((tf2.scale - 1.0).abs() <= 1e-12);
            prop_assert!(vec3(tf2.center).norm() <= 1e-12);
            let composed = tf2.compose(&tf1);
            prop_assert!((composed.scale - tf1.scale).abs() <= 1e-12 * tf1.scale);
            for (a, b) in n1.frames[2].vertices.iter().zip(&n2.frames[2].vertices) {
                prop_assert!((a - b).norm() <= 1e-12);
            }
        }
    }
}
