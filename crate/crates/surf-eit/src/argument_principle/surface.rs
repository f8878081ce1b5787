//! Point clouds of reconstructed images.

use std::collections::HashMap;
use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::cover::{build_cylinder_cover, Cover, CoverConfig, CylinderKind};
use super::gap::Projection;
use super::spec::EmbeddingSpec;
use crate::error::{Result, SurfError};

type C64 = Complex64;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReconstructConfig {
    pub cover: CoverConfig,
    /// Nodes per loop used for quadrature.
    pub nodes: usize,
    /// Rows ρ = jρ₀/rows, j < rows, in each boundary chart.
    pub rows: usize,
    /// Points closer than this are merged.
    pub dedup_tol: f64,
}

impl Default for ReconstructConfig {
    fn default() -> Self {
        ReconstructConfig { cover: CoverConfig::default(), nodes: 1024, rows: 4, dedup_tol: 1e-10 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "at")]
pub enum Location {
    Interior { zeta: C64 },
    Strip { node: usize, rho: f64, zeta: C64 },
    /// Image of another sample under conjugation, found over ζ* = ξ̂·conj ξ.
    Mirror { of: usize, zeta: C64 },
}

impl Location {
    pub fn zeta(&self) -> C64 {
        match *self {
            Location::Interior { zeta } | Location::Strip { zeta, .. } | Location::Mirror { zeta, .. } => zeta,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SurfacePoint {
    pub chart: usize,
    pub location: Location,
    pub xi: Vec<C64>,
}

/// Disagreement between two evaluations of one point by different routes.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Overlap {
    pub boundary_chart: usize,
    pub interior_chart: usize,
    pub zeta: C64,
    pub difference: f64,
}

/// Reconstructed image: cover, samples and diagnostics.
#[derive(Clone, Debug)]
pub struct ReconstructedSurface {
    pub spec: EmbeddingSpec,
    pub cover: Cover,
    pub projection: Projection,
    pub points: Vec<SurfacePoint>,
    /// ℰ(Υ), one point per boundary node.
    pub boundary_cloud: Vec<Vec<C64>>,
    pub overlaps: Vec<Overlap>,
    /// max |Ξ(ζ*) − conj ξ| over mirrored samples.
    pub mirror_defect: f64,
    /// Per-chart difference against a half-resolution evaluation.
    pub quadrature_error: Vec<f64>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    direction: &'a [C64],
    rho0: f64,
    symmetric: bool,
    cylinders: &'a [super::cover::Cylinder],
    points: usize,
    boundary_points: usize,
    max_overlap: f64,
    mirror_defect: f64,
    quadrature_error: &'a [f64],
}

impl ReconstructedSurface {
    pub fn cloud(&self) -> Vec<Vec<C64>> {
        self.points.iter().map(|p| p.xi.clone()).collect()
    }

    pub fn max_overlap(&self) -> f64 {
        self.overlaps.iter().map(|o| o.difference).fold(0.0, f64::max)
    }

    /// Ξ and its ζ-derivatives up to order `l` at any admissible ζ.
    pub fn jet(&self, zeta: C64, l: usize) -> Result<Vec<Vec<C64>>> {
        (0..=l).map(|j| self.projection.evaluate(zeta, j)).collect()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let n = self.spec.n();
        let mut header = vec!["chart".to_string(), "kind".into(), "node".into(), "rho".into(), "zeta_re".into(), "zeta_im".into()];
        for k in 1..=n {
            header.push(format!("x{k}_re"));
            header.push(format!("x{k}_im"));
        }
        w.write_record(&header).map_err(csv_err)?;
        for p in &self.points {
            let (kind, node, rho) = match p.location {
                Location::Interior { .. } => ("interior", String::new(), String::new()),
                Location::Strip { node, rho, .. } => ("strip", node.to_string(), format!("{rho:e}")),
                Location::Mirror { of, .. } => ("mirror", of.to_string(), String::new()),
            };
            let z = p.location.zeta();
            let mut rec = vec![p.chart.to_string(), kind.into(), node, rho, format!("{:e}", z.re), format!("{:e}", z.im)];
            for x in &p.xi {
                rec.push(format!("{:e}", x.re));
                rec.push(format!("{:e}", x.im));
            }
            w.write_record(&rec).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn manifest_json(&self) -> Result<String> {
        let m = Manifest {
            direction: &self.cover.direction,
            rho0: self.cover.rho0,
            symmetric: self.spec.symmetric,
            cylinders: &self.cover.cylinders,
            points: self.points.len(),
            boundary_points: self.boundary_cloud.len(),
            max_overlap: self.max_overlap(),
            mirror_defect: self.mirror_defect,
            quadrature_error: &self.quadrature_error,
        };
        Ok(serde_json::to_string_pretty(&m)?)
    }
}

fn csv_err(e: csv::Error) -> SurfError {
    SurfError::Io(std::io::Error::other(e))
}

/// Sampling positions of one boundary chart.
fn strip_positions(p: &Projection, start: usize, len: usize, rho0: f64, rows: usize) -> Vec<(usize, f64, C64)> {
    let (c, _) = p.grid.locate(start);
    let speed = p.dmu[start..start + len].iter().map(|d| d.norm()).sum::<f64>() / len as f64;
    let target = rho0 / rows as f64;
    let stride = ((target / (p.grid.spacing(c) * speed)).round() as usize).max(1);
    let mut out = Vec::new();
    for i in (start..start + len).step_by(stride) {
        for j in 0..rows {
            let rho = rho0 * j as f64 / rows as f64;
            out.push((i, rho, p.mu[i] + p.normal(i) * rho));
        }
    }
    out
}

/// Boundary chart Ξ(s, ρ) on the window of `cyl` at the given rows; the
/// ρ = 0 row is the trace itself.
pub fn reconstruct_near_boundary(proj: &Projection, cyl: &super::cover::Cylinder, rhos: &[f64]) -> Result<Vec<Vec<Vec<C64>>>> {
    let CylinderKind::Boundary { start, len, rho0, min_jacobian, .. } = cyl.kind else {
        return Err(SurfError::ChartSingular("not a boundary cylinder".into()));
    };
    if min_jacobian <= 0.0 {
        return Err(SurfError::ChartSingular(format!("Jacobian {min_jacobian:e}")));
    }
    if let Some(&r) = rhos.iter().find(|&&r| !(0.0..rho0).contains(&r)) {
        return Err(SurfError::ChartSingular(format!("row ρ = {r:e} outside [0, {rho0:e})")));
    }
    let rows = crate::par::map_range(len, |i| {
        let node = start + i;
        rhos.iter()
            .map(|&rho| if rho == 0.0 { Ok(proj.trace_at(node)) } else { proj.evaluate(proj.mu[node] + proj.normal(node) * rho, 0) })
            .collect::<Result<Vec<_>>>()
    });
    rows.into_iter().collect()
}

/// Evaluates every chart of the cover and assembles the cloud.
pub fn reconstruct_surface(spec: &EmbeddingSpec, cfg: &ReconstructConfig) -> Result<ReconstructedSurface> {
    let spec = spec.resampled(cfg.nodes)?;
    let cover = build_cylinder_cover(&spec, &cfg.cover)?;
    let proj = Projection::new(&spec, &cover.direction)?;

    // (chart, location) of every primary sample.
    let mut tasks: Vec<(usize, Location)> = cover.interior.iter().map(|q| (q.cylinder, Location::Interior { zeta: q.zeta })).collect();
    for (id, cyl) in cover.cylinders.iter().enumerate() {
        if let CylinderKind::Boundary { start, len, rho0, .. } = cyl.kind {
            for (node, rho, zeta) in strip_positions(&proj, start, len, rho0, cfg.rows) {
                tasks.push((id, Location::Strip { node, rho, zeta }));
            }
        }
    }
    let values = crate::par::map_slice(&tasks, |(_, loc)| match *loc {
        Location::Strip { node, rho, .. } if rho == 0.0 => Ok(proj.trace_at(node)),
        _ => proj.evaluate(loc.zeta(), 0),
    });
    let mut points = Vec::with_capacity(2 * tasks.len());
    for ((chart, location), v) in tasks.into_iter().zip(values) {
        points.push(SurfacePoint { chart, location, xi: v? });
    }

    let mut mirror_defect = 0.0;
    if spec.symmetric {
        let pair = spec.grid().pairing().expect("symmetric specs live on doubled grids");
        let mirrored = crate::par::map_range(points.len(), |i| -> Result<(C64, Vec<C64>, f64)> {
            let p = &points[i];
            let conj: Vec<C64> = p.xi.iter().map(|x| x.conj()).collect();
            let zs: C64 = cover.direction.iter().zip(&conj).map(|(a, x)| a * x).sum();
            let xi = match p.location {
                Location::Strip { node, rho, .. } if rho == 0.0 => proj.trace_at(pair[node]),
                _ => proj.evaluate(zs, 0)?,
            };
            let defect = xi.iter().zip(&conj).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
            Ok((zs, xi, defect))
        });
        let primary = points.len();
        for (i, m) in mirrored.into_iter().enumerate() {
            let (zeta, xi, defect) = m?;
            mirror_defect = f64::max(mirror_defect, defect);
            points.push(SurfacePoint { chart: points[i].chart, location: Location::Mirror { of: i, zeta }, xi });
        }
        debug_assert_eq!(points.len(), 2 * primary);
    }

    let overlaps = overlap_table(&proj, &cover, &points);
    let points = dedup(points, cfg.dedup_tol);
    let quadrature_error = chart_errors(&spec, &cover, &points, cfg)?;
    let boundary_cloud = (0..spec.grid().node_count()).map(|i| spec.point(i)).collect();
    Ok(ReconstructedSurface { spec, cover, projection: proj, points, boundary_cloud, overlaps, mirror_defect, quadrature_error })
}

/// Strip samples that also lie in an interior disk, evaluated both ways.
fn overlap_table(proj: &Projection, cover: &Cover, points: &[SurfacePoint]) -> Vec<Overlap> {
    let disks: Vec<(usize, C64, f64)> = cover
        .cylinders
        .iter()
        .enumerate()
        .filter(|(_, c)| c.kind == CylinderKind::Interior)
        .map(|(i, c)| (i, c.center, c.radius))
        .collect();
    let mut out = Vec::new();
    for p in points {
        let Location::Strip { zeta, rho, .. } = p.location else { continue };
        if rho == 0.0 {
            continue;
        }
        if let Some(&(id, _, _)) = disks.iter().find(|(_, c, r)| (zeta - c).norm() <= *r) {
            let plain = proj.plain(zeta, 0);
            let difference = plain.iter().zip(&p.xi).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
            out.push(Overlap { boundary_chart: p.chart, interior_chart: id, zeta, difference });
        }
    }
    out
}

/// Drops points within `tol` (per coordinate) of an earlier one.
fn dedup(points: Vec<SurfacePoint>, tol: f64) -> Vec<SurfacePoint> {
    let key = |xi: &[C64]| -> Vec<i64> { xi.iter().flat_map(|x| [(x.re / tol).round() as i64, (x.im / tol).round() as i64]).collect() };
    let mut seen = HashMap::new();
    let mut out = Vec::with_capacity(points.len());
    for p in points {
        if seen.insert(key(&p.xi), ()).is_none() {
            out.push(p);
        }
    }
    out
}

/// Largest change of a few samples per chart when the quadrature uses half
/// the nodes.
fn chart_errors(spec: &EmbeddingSpec, cover: &Cover, points: &[SurfacePoint], cfg: &ReconstructConfig) -> Result<Vec<f64>> {
    let half = spec.resampled(cfg.nodes / 2)?;
    let coarse = Projection::new(&half, &cover.direction)?;
    let mut by_chart: Vec<Vec<&SurfacePoint>> = vec![Vec::new(); cover.cylinders.len()];
    for p in points {
        if let Location::Mirror { .. } = p.location {
            continue;
        }
        if let Location::Strip { rho, .. } = p.location {
            if rho == 0.0 {
                continue;
            }
        }
        if by_chart[p.chart].len() < 4 {
            by_chart[p.chart].push(p);
        }
    }
    Ok(crate::par::map_slice(&by_chart, |pts| {
        pts.iter()
            .filter_map(|p| coarse.evaluate(p.location.zeta(), 0).ok().map(|v| v.iter().zip(&p.xi).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)))
            .fold(0.0, f64::max)
    }))
}
