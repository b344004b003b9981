use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{connected_components, default_weld_eps, PartSet, TriangleMesh};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterRules {
    pub min_parts: usize,
    pub max_parts: usize,
    pub min_vertices: usize,
    pub max_vertices: usize,
}

impl Default for FilterRules {
    fn default() -> Self {
        FilterRules {
            min_parts: 2,
            max_parts: 30,
            min_vertices: 1_000,
            max_vertices: 1_000_000,
        }
    }
}

impl FilterRules {
    pub fn validate(&self) -> Result<()> {
        if self.min_parts < 1 || self.min_parts > self.max_parts {
            return Err(Error::InvalidArgument(format!(
                "part bounds [{}, {}] invalid",
                self.min_parts, self.max_parts
            )));
        }
        if self.min_vertices >= self.max_vertices {
            return Err(Error::InvalidArgument(format!(
                "vertex bounds [{}, {}] invalid",
                self.min_vertices, self.max_vertices
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterDecision {
    pub accepted: bool,
    pub reasons: Vec<String>,
    pub part_count: usize,
    pub vertex_count: usize,
}

/// Accept or reject an asset; every violated rule is listed.
pub fn filter_asset(mesh: &TriangleMesh, rules: &FilterRules) -> Result<FilterDecision> {
    let parts = connected_components(mesh, default_weld_eps(mesh))?;
    Ok(filter_parts(&parts, rules))
}

pub fn filter_parts(parts: &PartSet, rules: &FilterRules) -> FilterDecision {
    let part_count = parts.len();
    let vertex_count = parts.source.vertices.len();
    let mut reasons = Vec::new();
    if part_count < rules.min_parts {
        reasons.push(format!("part count {part_count} < {}", rules.min_parts));
    }
    if part_count > rules.max_parts {
        reasons.push(format!("part count {part_count} > {}", rules.max_parts));
    }
    if vertex_count < rules.min_vertices {
        reasons.push(format!("vertex count {vertex_count} < {}", rules.min_vertices));
    }
    if vertex_count > rules.max_vertices {
        reasons.push(format!("vertex count {vertex_count} > {}", rules.max_vertices));
    }
    FilterDecision {
        accepted: reasons.is_empty(),
        reasons,
        part_count,
        vertex_count,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::shapes::icosphere;

    fn spheres(n: usize, subdiv: u32) -> TriangleMesh {
        let s: Vec<TriangleMesh> = (0..n)
            .map(|i| icosphere([3.0 * i as f64, 0.0, 0.0], 1.0, subdiv))
            .collect();
        TriangleMesh::concat("spheres", s.iter())
    }

    #[test]
    fn three_parts_inside_bounds_accepted() {
        // 3 x 10242 vertices, roughly 3e4
        let d = filter_asset(&spheres(3, 5), &FilterRules::default()).unwrap();
        assert!(d.accepted, "{:?}", d.reasons);
        assert_eq!(d.part_count, 3);
    }

    #[test]
    fn single_part_rejected() {
        let d = filter_asset(&spheres(1, 4), &FilterRules::default()).unwrap();
        assert!(!d.accepted);
        assert_eq!(d.reasons, vec!["part count 1 < 2".to_string()]);
    }

    #[test]
    fn vertex_floor() {
        // 2 x 162 vertices
        let d = filter_asset(&spheres(2, 2), &FilterRules::default()).unwrap();
        assert!(!d.accepted);
        assert!(d.reasons[0].starts_with("vertex count 324 < 1000"));
    }

    #[test]
    fn every_violation_listed() {
        let rules = FilterRules {
            min_parts: 2,
            max_parts: 3,
            min_vertices: 10,
            max_vertices: 100,
        };
        let d = filter_asset(&spheres(4, 2), &rules).unwrap();
        assert_eq!(d.reasons.len(), 2);
        assert!(FilterRules { min_parts: 0, ..rules.clone() }.validate().is_err());
    }
}
