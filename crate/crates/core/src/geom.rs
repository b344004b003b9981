//! Small vector and box helpers shared by every module.

use serde::{Deserialize, Serialize};

pub type Vec3 = nalgebra::Vector3<f64>;

pub fn vec3(a: [f64; 3]) -> Vec3 {
    Vec3::new(a[0], a[1], a[2])
}

pub fn arr3(v: &Vec3) -> [f64; 3] {
    [v.x, v.y, v.z]
}

/// Axis-aligned bounding box. `min <= max` componentwise once non-empty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Aabb {
    pub fn new(min: [f64; 3], max: [f64; 3]) -> Self {
        debug_assert!((0..3).all(|k| min[k] <= max[k]), "inverted aabb");
        Aabb { min, max }
    }

    pub fn from_points<'a, I: IntoIterator<Item = &'a Vec3>>(points: I) -> Option<Self> {
        let mut it = points.into_iter();
        let first = it.next()?;
        let mut b = Aabb {
            min: arr3(first),
            max: arr3(first),
        };
        for p in it {
            b.expand(p);
        }
        Some(b)
    }

    pub fn expand(&mut self, p: &Vec3) {
        for k in 0..3 {
            self.min[k] = self.min[k].min(p[k]);
            self.max[k] = self.max[k].max(p[k]);
        }
    }

    pub fn union(&self, other: &Aabb) -> Aabb {
        let mut out = *self;
        for k in 0..3 {
            out.min[k] = out.min[k].min(other.min[k]);
            out.max[k] = out.max[k].max(other.max[k]);
        }
        out
    }

    pub fn extent(&self) -> Vec3 {
        Vec3::new(
            self.max[0] - self.min[0],
            self.max[1] - self.min[1],
            self.max[2] - self.min[2],
        )
    }

    pub fn center(&self) -> Vec3 {
        Vec3::new(
            0.5 * (self.min[0] + self.max[0]),
            0.5 * (self.min[1] + self.max[1]),
            0.5 * (self.min[2] + self.max[2]),
        )
    }

    pub fn diagonal(&self) -> f64 {
        self.extent().norm()
    }

    pub fn max_dimension(&self) -> f64 {
        self.extent().max()
    }

    pub fn volume(&self) -> f64 {
        let e = self.extent();
        e.x * e.y * e.z
    }

    pub fn translated(&self, v: &Vec3) -> Aabb {
        Aabb {
            min: [self.min[0] + v.x, self.min[1] + v.y, self.min[2] + v.z],
            max: [self.max[0] + v.x, self.max[1] + v.y, self.max[2] + v.z],
        }
    }

    /// Inflate every side by `margin` (may be negative as long as the box stays valid).
    pub fn inflated(&self, margin: f64) -> Aabb {
        Aabb {
            min: [
                self.min[0] - margin,
                self.min[1] - margin,
                self.min[2] - margin,
            ],
            max: [
                self.max[0] + margin,
                self.max[1] + margin,
                self.max[2] + margin,
            ],
        }
    }

    pub fn contains(&self, p: &Vec3, tol: f64) -> bool {
        (0..3).all(|k| p[k] >= self.min[k] - tol && p[k] <= self.max[k] + tol)
    }

    pub fn intersection_volume(&self, other: &Aabb) -> f64 {
        let mut v = 1.0;
        for k in 0..3 {
            let o = self.max[k].min(other.max[k]) - self.min[k].max(other.min[k]);
            if o <= 0.0 {
                return 0.0;
            }
            v *= o;
        }
        v
    }

    pub fn iou(&self, other: &Aabb) -> f64 {
        let inter = self.intersection_volume(other);
        let union = self.volume() + other.volume() - inter;
        if union <= 0.0 {
            // Two identical degenerate boxes still count as a perfect match.
            return if self == other { 1.0 } else { 0.0 };
        }
        inter / union
    }

    /// Euclidean distance between the two boxes; 0 when they touch or overlap.
    pub fn gap(&self, other: &Aabb) -> f64 {
        let mut d2 = 0.0;
        for k in 0..3 {
            let d = (other.min[k] - self.max[k]).max(self.min[k] - other.max[k]);
            if d > 0.0 {
                d2 += d * d;
            }
        }
        d2.sqrt()
    }

    /// Closest point of the box to `p` (p itself when inside).
    pub fn clamp(&self, p: &Vec3) -> Vec3 {
        Vec3::new(
            p.x.clamp(self.min[0], self.max[0]),
            p.y.clamp(self.min[1], self.max[1]),
            p.z.clamp(self.min[2], self.max[2]),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn iou_half_shifted_unit_boxes() {
        let a = Aabb::new([0.0; 3], [1.0; 3]);
        let b = Aabb::new([0.5, 0.0, 0.0], [1.5, 1.0, 1.0]);
        assert!((a.iou(&b) - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(a.iou(&a), 1.0);
    }

    #[test]
    fn gap_is_euclidean() {
        let a = Aabb::new([0.0; 3], [1.0; 3]);
        let b = Aabb::new([4.0, 5.0, 0.0], [5.0, 6.0, 1.0]);
        assert!((a.gap(&b) - 5.0).abs() < 1e-12);
        assert_eq!(a.gap(&a.translated(&Vec3::new(0.5, 0.0, 0.0))), 0.0);
    }
}
