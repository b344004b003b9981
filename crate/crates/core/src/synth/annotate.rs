use std::io::{Read, Write};
use std::net::{TcpStream, ToSocketAddrs};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::distance::point_triangle_distance;
use crate::mesh::{connected_components, default_weld_eps, sample_surface_uniform, TriangleMesh};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DensityClass {
    Low,
    Medium,
    High,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeRecord {
    /// Mirror symmetry across the x, y and z planes through the centroid.
    pub symmetry: [bool; 3],
    pub density: DensityClass,
    /// In `[0, 1]`.
    pub complexity: f64,
}

pub trait AnnotationClient {
    fn annotate(&self, mesh: &TriangleMesh) -> Result<AttributeRecord>;
}

/// Offline heuristics: reflection distance for symmetry, triangles per
/// normalized area for density.
#[derive(Debug, Clone)]
pub struct DefaultAnnotator {
    pub samples: usize,
    /// Relative to the bounding-box diagonal.
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for DefaultAnnotator {
    fn default() -> Self {
        DefaultAnnotator { samples: 256, tolerance: 1e-3, seed: 0 }
    }
}

fn distance_to_mesh(mesh: &TriangleMesh, p: &crate::geom::Vec3) -> f64 {
    (0..mesh.triangles.len())
        .map(|i| {
            let [a, b, c] = mesh.triangle(i);
            point_triangle_distance(p, &a, &b, &c)
        })
        .fold(f64::INFINITY, f64::min)
}

impl DefaultAnnotator {
    pub fn symmetry(&self, mesh: &TriangleMesh) -> Result<[bool; 3]> {
        let diag = mesh.aabb().diagonal();
        let center = mesh.centroid();
        let cloud = sample_surface_uniform(mesh, self.samples, self.seed)?;
        let mut out = [true; 3];
        for (axis, flag) in out.iter_mut().enumerate() {
            *flag = cloud.points.iter().all(|p| {
                let mut q = *p;
                q[axis] = 2.0 * center[axis] - q[axis];
                distance_to_mesh(mesh, &q) <= self.tolerance * diag
            });
        }
        Ok(out)
    }
}

pub fn density_class(mesh: &TriangleMesh) -> DensityClass {
    let diag = mesh.aabb().diagonal();
    let area = mesh.surface_area() / (diag * diag);
    let density = mesh.triangles.len() as f64 / area.max(1e-12);
    if density < 50.0 {
        DensityClass::Low
    } else if density < 5_000.0 {
        DensityClass::Medium
    } else {
        DensityClass::High
    }
}

impl AnnotationClient for DefaultAnnotator {
    fn annotate(&self, mesh: &TriangleMesh) -> Result<AttributeRecord> {
        let parts = connected_components(mesh, default_weld_eps(mesh))?.len();
        let tri_term = ((mesh.triangles.len() as f64).log10() / 6.0).clamp(0.0, 1.0);
        let part_term = ((parts as f64 - 1.0) / 29.0).clamp(0.0, 1.0);
        Ok(AttributeRecord {
            symmetry: self.symmetry(mesh)?,
            density: density_class(mesh),
            complexity: 0.5 * tri_term + 0.5 * part_term,
        })
    }
}

/// Posts mesh statistics as JSON to an HTTP endpoint and expects an
/// [`AttributeRecord`] back.
#[derive(Debug, Clone)]
pub struct RemoteAnnotator {
    pub endpoint: url::Url,
    pub timeout: Duration,
}

impl RemoteAnnotator {
    pub fn new(endpoint: &str, timeout: Duration) -> Result<Self> {
        let endpoint = url::Url::parse(endpoint)
            .map_err(|e| Error::InvalidArgument(format!("bad endpoint {endpoint}: {e}")))?;
        if endpoint.scheme() != "http" {
            return Err(Error::InvalidArgument(format!("unsupported scheme {}", endpoint.scheme())));
        }
        Ok(RemoteAnnotator { endpoint, timeout })
    }

    fn connect(&self) -> Result<TcpStream> {
        let host = self.endpoint.host_str().ok_or_else(|| Error::ClientUnavailable("endpoint has no host".into()))?;
        let port = self.endpoint.port_or_known_default().unwrap_or(80);
        let addrs = (host, port)
            .to_socket_addrs()
            .map_err(|e| Error::ClientUnavailable(format!("{host}:{port}: {e}")))?;
        let mut last = None;
        for addr in addrs {
            match TcpStream::connect_timeout(&addr, self.timeout) {
                Ok(s) => return Ok(s),
                Err(e) => last = Some(e),
            }
        }
        Err(Error::ClientUnavailable(format!(
            "{host}:{port}: {}",
            last.map(|e| e.to_string()).unwrap_or_else(|| "no address".into())
        )))
    }
}

impl AnnotationClient for RemoteAnnotator {
    fn annotate(&self, mesh: &TriangleMesh) -> Result<AttributeRecord> {
        let mut stream = self.connect()?;
        let unavailable = |e: std::io::Error| Error::ClientUnavailable(e.to_string());
        stream.set_read_timeout(Some(self.timeout)).map_err(unavailable)?;
        stream.set_write_timeout(Some(self.timeout)).map_err(unavailable)?;
        let body = serde_json::json!({
            "name": mesh.name,
            "vertices": mesh.vertices.len(),
            "triangles": mesh.triangles.len(),
            "surface_area": mesh.surface_area(),
            "aabb": mesh.aabb(),
        })
        .to_string();
        let request = format!(
            "POST {} HTTP/1.0\r\nHost: {}\r\nContent-Type: application/json\r\nContent-Length: {}\r\n\r\n{}",
            self.endpoint.path(),
            self.endpoint.host_str().unwrap_or_default(),
            body.len(),
            body
        );
        stream.write_all(request.as_bytes()).map_err(unavailable)?;
        let mut response = String::new();
        stream.read_to_string(&mut response).map_err(unavailable)?;
        let (head, payload) = response
            .split_once("\r\n\r\n")
            .ok_or_else(|| Error::ClientUnavailable("malformed response".into()))?;
        if !head.split_whitespace().nth(1).is_some_and(|code| code == "200") {
            return Err(Error::ClientUnavailable(format!(
                "status line {:?}",
                head.lines().next().unwrap_or_default()
            )));
        }
        Ok(serde_json::from_str(payload)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationOutcome {
    pub record: Option<AttributeRecord>,
    /// Set when the client could not be reached and the asset passed through.
    pub unannotated: bool,
    pub warning: Option<String>,
}

pub fn annotate_asset(mesh: &TriangleMesh, client: &dyn AnnotationClient) -> Result<AnnotationOutcome> {
    match client.annotate(mesh) {
        Ok(record) => Ok(AnnotationOutcome { record: Some(record), unannotated: false, warning: None }),
        Err(Error::ClientUnavailable(why)) => {
            log::warn!("{}: annotation skipped: {why}", mesh.name);
            Ok(AnnotationOutcome { record: None, unannotated: true, warning: Some(why) })
        }
        Err(e) => Err(e),
    }
}
