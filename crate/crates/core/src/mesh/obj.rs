//! Wavefront OBJ: vertices and faces only. Polygons are fan-triangulated,
//! `g`/`o` records define triangle groups, everything else is ignored with a
//! warning.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use super::{TriangleMesh, LOAD_WELD_EPS};
use crate::error::{Error, Result};
use crate::geom::Vec3;

/// Result of loading an OBJ file.
#[derive(Debug, Clone)]
pub struct ObjLoad {
    pub mesh: TriangleMesh,
    pub warnings: Vec<String>,
    /// Group names in first-appearance order. Faces before any `g`/`o`
    /// record belong to an implicit group named `default`.
    pub groups: Vec<String>,
    /// Group index of every triangle of `mesh`.
    pub triangle_group: Vec<usize>,
}

impl ObjLoad {
    /// Triangle indices of each group, in group order. Empty groups are skipped.
    pub fn group_triangles(&self) -> Vec<(String, Vec<usize>)> {
        let mut out: Vec<(String, Vec<usize>)> =
            self.groups.iter().map(|g| (g.clone(), Vec::new())).collect();
        for (t, &g) in self.triangle_group.iter().enumerate() {
            out[g].1.push(t);
        }
        out.retain(|(_, tris)| !tris.is_empty());
        out
    }
}

pub fn load_mesh(path: impl AsRef<Path>) -> Result<ObjLoad> {
    let path = path.as_ref();
    let bytes = match std::fs::read(path) {
        Ok(b) => b,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            return Err(Error::FileNotFound(path.to_path_buf()))
        }
        Err(e) => return Err(e.into()),
    };
    let text = String::from_utf8_lossy(&bytes);
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    parse_obj_named(&text, &name, &path.display().to_string())
}

pub fn parse_obj(text: &str, name: &str) -> Result<ObjLoad> {
    parse_obj_named(text, name, name)
}

fn parse_obj_named(text: &str, name: &str, origin: &str) -> Result<ObjLoad> {
    let err = |line: usize, message: String| Error::Parse {
        path: origin.to_string(),
        line,
        message,
    };

    let mut vertices: Vec<Vec3> = Vec::new();
    let mut triangles: Vec<[u32; 3]> = Vec::new();
    let mut tri_group: Vec<usize> = Vec::new();
    let mut groups: Vec<String> = vec!["default".to_string()];
    let mut current = 0usize;
    let mut ignored: BTreeMap<String, usize> = BTreeMap::new();
    let mut polygons = 0usize;

    for (lineno, raw) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut tok = line.split_whitespace();
        let key = tok.next().unwrap_or("");
        match key {
            "v" => {
                let mut c = [0.0f64; 3];
                for slot in c.iter_mut() {
                    let s = tok
                        .next()
                        .ok_or_else(|| err(lineno, "vertex needs 3 coordinates".into()))?;
                    *slot = s
                        .parse()
                        .map_err(|_| err(lineno, format!("bad coordinate `{s}`")))?;
                }
                if c.iter().any(|x| !x.is_finite()) {
                    return Err(err(lineno, "non-finite vertex coordinate".into()));
                }
                vertices.push(Vec3::new(c[0], c[1], c[2]));
            }
            "f" => {
                let mut idx = Vec::new();
                for s in tok {
                    let head = s.split('/').next().unwrap_or("");
                    let i: i64 = head
                        .parse()
                        .map_err(|_| err(lineno, format!("bad face index `{s}`")))?;
                    let n = vertices.len() as i64;
                    let resolved = if i > 0 { i - 1 } else { n + i };
                    if i == 0 || resolved < 0 || resolved >= n {
                        return Err(err(
                            lineno,
                            format!("face index {i} out of range (1..={n} vertices defined)"),
                        ));
                    }
                    idx.push(resolved as u32);
                }
                if idx.len() < 3 {
                    return Err(err(lineno, "face needs at least 3 vertices".into()));
                }
                if idx.len() > 3 {
                    polygons += 1;
                }
                for k in 1..idx.len() - 1 {
                    triangles.push([idx[0], idx[k], idx[k + 1]]);
                    tri_group.push(current);
                }
            }
            "g" | "o" => {
                let gname = tok.collect::<Vec<_>>().join(" ");
                let gname = if gname.is_empty() { "default".to_string() } else { gname };
                current = match groups.iter().position(|g| *g == gname) {
                    Some(p) => p,
                    None => {
                        groups.push(gname);
                        groups.len() - 1
                    }
                };
            }
            other => *ignored.entry(other.to_string()).or_default() += 1,
        }
    }

    let mut warnings: Vec<String> = ignored
        .into_iter()
        .map(|(k, n)| format!("ignored {n} `{k}` record(s)"))
        .collect();
    if polygons > 0 {
        warnings.push(format!("triangulated {polygons} polygon face(s)"));
    }
    if triangles.is_empty() || vertices.len() < 3 {
        return Err(Error::EmptyMesh(name.to_string()));
    }

    let (mesh, kept, clean_warnings) =
        TriangleMesh::cleaned(name, vertices, triangles, LOAD_WELD_EPS)?;
    warnings.extend(clean_warnings);
    for w in &warnings {
        log::warn!("{origin}: {w}");
    }
    let triangle_group = kept.iter().map(|&i| tri_group[i]).collect();
    Ok(ObjLoad {
        mesh,
        warnings,
        groups,
        triangle_group,
    })
}

/// Serialize with shortest round-trip float formatting (deterministic).
pub fn write_obj(mesh: &TriangleMesh) -> String {
    write_obj_groups(mesh, &[])
}

/// Serialize with `g` records. `groups` lists (name, triangle count) in
/// triangle order; counts must sum to the triangle count when non-empty.
pub fn write_obj_groups(mesh: &TriangleMesh, groups: &[(String, usize)]) -> String {
    let mut s = String::with_capacity(mesh.vertices.len() * 40 + mesh.triangles.len() * 24);
    let _ = writeln!(s, "# {}", mesh.name);
    for v in &mesh.vertices {
        let _ = writeln!(s, "v {:?} {:?} {:?}", v.x, v.y, v.z);
    }
    let mut bounds = Vec::new();
    let mut start = 0;
    for (name, count) in groups {
        bounds.push((start, name));
        start += count;
    }
    debug_assert!(groups.is_empty() || start == mesh.triangles.len());
    let mut next = 0;
    for (i, t) in mesh.triangles.iter().enumerate() {
        while next < bounds.len() && bounds[next].0 == i {
            let _ = writeln!(s, "g {}", bounds[next].1);
            next += 1;
        }
        let _ = writeln!(s, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1);
    }
    s
}
