//! Triangulated metric surfaces, stored in chart coordinates.
//!
//! Non-orientable surfaces are stored as their orientable double cover with
//! the deck involution τ; `boundary` then lists the Γ₊ loops and
//! `cover.minus_loops` their τ images.

use std::collections::HashSet;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::boundary_calculus::BoundaryGrid;
use crate::error::{Result, SurfError};

pub const MESH_SCHEMA: &str = "surf-eit/mesh/v1";

/// An ordered boundary loop; node `i` sits at arc length `i·length/N`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryLoop {
    pub vertices: Vec<usize>,
    /// Nominal length of the smooth boundary curve.
    pub length: f64,
    /// ∂_γ = orientation · d/ds along the stored order.
    pub orientation: f64,
    /// Cumulative polygonal arc length (metric) at each node.
    pub arclength: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverData {
    pub tau: Vec<usize>,
    /// Orbit index of every cover vertex (π, 2-to-1).
    pub projection: Vec<usize>,
    /// τ images of the Γ₊ loops, node-by-node.
    pub minus_loops: Vec<Vec<usize>>,
}

/// Geometric parameters needed to evaluate perturbation profiles.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum Family {
    Disk,
    Annulus { rho: f64 },
    Mobius { r: f64 },
    MobiusWithHole { r: f64, hole: f64 },
    TorusWithHole { hole: f64 },
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::Disk => "disk",
            Family::Annulus { .. } => "annulus",
            Family::Mobius { .. } => "mobius",
            Family::MobiusWithHole { .. } => "mobius-with-hole",
            Family::TorusWithHole { .. } => "torus-with-hole",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurfaceMesh {
    pub family: Family,
    pub vertices: Vec<[f64; 2]>,
    pub triangles: Vec<[usize; 3]>,
    /// Per-triangle metric (g11, g12, g22) in chart coordinates.
    pub metrics: Vec<[f64; 3]>,
    /// Chart periods along x and y (cylinder and torus charts).
    pub period: [Option<f64>; 2],
    pub boundary: Vec<BoundaryLoop>,
    pub orientable: bool,
    pub cover: Option<CoverData>,
    /// sup log K of the identity map back to the unperturbed metric.
    pub ground_truth_log_k: f64,
    pub perturbed: bool,
    pub metric_bounds: (f64, f64),
}

#[derive(Serialize, Deserialize)]
struct MeshFile {
    schema: String,
    #[serde(flatten)]
    mesh: SurfaceMesh,
}

fn wrap(d: f64, p: Option<f64>) -> f64 {
    match p {
        Some(p) => d - p * (d / p).round(),
        None => d,
    }
}

impl SurfaceMesh {
    /// Chart vector from vertex `a` to vertex `b`, unwrapped across periods.
    pub fn edge(&self, a: usize, b: usize) -> [f64; 2] {
        let (p, q) = (self.vertices[a], self.vertices[b]);
        [wrap(q[0] - p[0], self.period[0]), wrap(q[1] - p[1], self.period[1])]
    }

    /// Unwrapped chart positions of a triangle's corners (first corner as stored).
    pub fn corners(&self, t: usize) -> [[f64; 2]; 3] {
        let [a, b, c] = self.triangles[t];
        let p = self.vertices[a];
        let e1 = self.edge(a, b);
        let e2 = self.edge(a, c);
        [p, [p[0] + e1[0], p[1] + e1[1]], [p[0] + e2[0], p[1] + e2[1]]]
    }

    pub fn centroid(&self, t: usize) -> [f64; 2] {
        let c = self.corners(t);
        [(c[0][0] + c[1][0] + c[2][0]) / 3.0, (c[0][1] + c[1][1] + c[2][1]) / 3.0]
    }

    /// Signed chart area.
    pub fn chart_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t];
        let e1 = self.edge(a, b);
        let e2 = self.edge(a, c);
        0.5 * (e1[0] * e2[1] - e1[1] * e2[0])
    }

    /// Metric area √det g · chart area.
    pub fn area(&self, t: usize) -> f64 {
        let g = self.metrics[t];
        (g[0] * g[2] - g[1] * g[1]).sqrt() * self.chart_area(t).abs()
    }

    pub fn total_area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.area(t)).sum()
    }

    pub fn edges(&self) -> HashSet<(usize, usize)> {
        let mut e = HashSet::new();
        for t in &self.triangles {
            for (a, b) in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
                e.insert((a.min(b), a.max(b)));
            }
        }
        e
    }

    /// V − E + F of the stored (cover) triangulation.
    pub fn stored_euler(&self) -> i64 {
        self.vertices.len() as i64 - self.edges().len() as i64 + self.triangles.len() as i64
    }

    /// χ of the surface itself (half the cover's when stored as a cover).
    pub fn euler_characteristic(&self) -> i64 {
        let chi = self.stored_euler();
        if self.cover.is_some() && !self.orientable {
            chi / 2
        } else {
            chi
        }
    }

    /// Boundary grid Γ with one loop per boundary component.
    pub fn boundary_grid(&self) -> Result<Arc<BoundaryGrid>> {
        let loops: Vec<(f64, usize)> = self.boundary.iter().map(|l| (l.length, l.vertices.len())).collect();
        let mut g = BoundaryGrid::new(&loops)?;
        for (l, b) in g.loops.iter_mut().zip(&self.boundary) {
            l.orientation = b.orientation;
        }
        Ok(Arc::new(g))
    }

    /// Dirichlet vertices of the stored triangulation in loop order (Γ₊ then Γ₋).
    pub fn dirichlet_loops(&self) -> Vec<Vec<usize>> {
        let mut v: Vec<Vec<usize>> = self.boundary.iter().map(|l| l.vertices.clone()).collect();
        if let Some(c) = &self.cover {
            if !self.orientable {
                v.extend(c.minus_loops.iter().cloned());
            }
        }
        v
    }

    pub fn metric_eigenvalues(g: [f64; 3]) -> (f64, f64) {
        let tr = 0.5 * (g[0] + g[2]);
        let d = (0.25 * (g[0] - g[2]).powi(2) + g[1] * g[1]).sqrt();
        (tr - d, tr + d)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(SurfError::DegenerateParameters(m));
        if self.metrics.len() != self.triangles.len() {
            return bad("metric count differs from triangle count".into());
        }
        for (t, g) in self.metrics.iter().enumerate() {
            let (lo, hi) = Self::metric_eigenvalues(*g);
            if !(g[0] * g[2] - g[1] * g[1] > 0.0) || lo < self.metric_bounds.0 || hi > self.metric_bounds.1 {
                return bad(format!("triangle {t}: metric eigenvalues ({lo}, {hi}) out of bounds"));
            }
            if self.chart_area(t) <= 0.0 {
                return bad(format!("triangle {t} is not positively oriented"));
            }
        }
        let edges = self.edges();
        for (i, l) in self.dirichlet_loops().iter().enumerate() {
            for j in 0..l.len() {
                let (a, b) = (l[j], l[(j + 1) % l.len()]);
                if !edges.contains(&(a.min(b), a.max(b))) {
                    return bad(format!("boundary loop {i} is not closed along mesh edges"));
                }
            }
        }
        if let Some(c) = &self.cover {
            let n = self.vertices.len();
            if c.tau.len() != n {
                return bad("involution size".into());
            }
            for v in 0..n {
                if c.tau[v] == v || c.tau[c.tau[v]] != v || c.projection[v] != c.projection[c.tau[v]] {
                    return bad(format!("involution invalid at vertex {v}"));
                }
            }
            let tri: HashSet<[usize; 3]> = self.triangles.iter().map(|t| canonical(*t)).collect();
            for t in &self.triangles {
                let img = [c.tau[t[0]], c.tau[t[2]], c.tau[t[1]]];
                if !tri.contains(&canonical(img)) {
                    return bad("involution does not reverse orientation".into());
                }
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&MeshFile { schema: MESH_SCHEMA.into(), mesh: self.clone() })?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let f: MeshFile = serde_json::from_str(s)?;
        if f.schema != MESH_SCHEMA {
            return Err(SurfError::Config(format!("unsupported mesh schema `{}`", f.schema)));
        }
        f.mesh.validate()?;
        Ok(f.mesh)
    }
}

/// Rotation of a triangle that starts at its smallest index.
fn canonical(t: [usize; 3]) -> [usize; 3] {
    let i = (0..3).min_by_key(|&i| t[i]).unwrap();
    [t[i], t[(i + 1) % 3], t[(i + 2) % 3]]
}

/// Orientable double cover.
///
/// A non-orientable mesh is already stored as its cover, so only the
/// boundary bookkeeping changes (Υ becomes the boundary). An orientable
/// mesh yields two disjoint copies, the second with reversed orientation.
pub fn double_cover(mesh: &SurfaceMesh) -> SurfaceMesh {
    if !mesh.orientable {
        let c = mesh.cover.as_ref().expect("non-orientable mesh carries cover data");
        let mut out = mesh.clone();
        out.orientable = true;
        let mut loops = mesh.boundary.clone();
        for (l, m) in mesh.boundary.iter().zip(&c.minus_loops) {
            loops.push(BoundaryLoop { vertices: m.clone(), orientation: -l.orientation, ..l.clone() });
        }
        out.boundary = loops;
        return out;
    }
    let n = mesh.vertices.len();
    let mut vertices = mesh.vertices.clone();
    vertices.extend_from_slice(&mesh.vertices);
    let mut triangles = mesh.triangles.clone();
    let mut metrics = mesh.metrics.clone();
    // The second copy carries the reflected chart (x ↦ −x) so that it is
    // positively oriented in its own chart while τ reverses orientation.
    for v in vertices.iter_mut().skip(n) {
        v[0] = -v[0];
    }
    for (t, g) in mesh.triangles.iter().zip(&mesh.metrics) {
        triangles.push([t[0] + n, t[2] + n, t[1] + n]);
        metrics.push([g[0], -g[1], g[2]]);
    }
    let tau: Vec<usize> = (0..2 * n).map(|v| if v < n { v + n } else { v - n }).collect();
    let projection: Vec<usize> = (0..2 * n).map(|v| v % n).collect();
    let mut boundary = mesh.boundary.clone();
    for l in &mesh.boundary {
        boundary.push(BoundaryLoop {
            vertices: l.vertices.iter().map(|v| v + n).collect(),
            orientation: -l.orientation,
            ..l.clone()
        });
    }
    SurfaceMesh {
        family: mesh.family.clone(),
        vertices,
        triangles,
        metrics,
        period: mesh.period,
        boundary,
        orientable: true,
        cover: Some(CoverData { tau, projection, minus_loops: Vec::new() }),
        ground_truth_log_k: mesh.ground_truth_log_k,
        perturbed: mesh.perturbed,
        metric_bounds: mesh.metric_bounds,
    }
}

/// Triangles touching any Dirichlet vertex.
pub fn boundary_triangles(mesh: &SurfaceMesh) -> Vec<usize> {
    let on: HashSet<usize> = mesh.dirichlet_loops().into_iter().flatten().collect();
    (0..mesh.triangles.len()).filter(|&t| mesh.triangles[t].iter().any(|v| on.contains(v))).collect()
}
