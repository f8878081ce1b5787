//! Semi-geodesic coordinates (ς, r) near the boundary of a reconstructed image.
//!
//! The image carries the metric induced from ℂⁿ, which in the projected
//! coordinate ζ is conformal: e^{2u}|dζ|² with e^{2u} = Σ|∂_ζΞ_k|². Its
//! geodesics solve ζ̈ = −2 ∂_ζu ζ̇², integrated here by classical RK4 from
//! every sampled boundary node along the inward normal at unit speed.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::argument_principle::{Projection, ReconstructedSurface};
use crate::boundary_calculus::{fft_coeffs, ifft_values, mode_index};
use crate::error::{Result, SurfError};

type C64 = Complex64;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GeodesicConfig {
    /// Requested strip depth in ambient length units.
    pub r0_request: f64,
    /// Integration steps up to the requested depth.
    pub steps: usize,
    /// Target number of geodesics per boundary loop.
    pub per_loop: usize,
    /// Fewer regular rows than this is immediate focusing.
    pub min_rows: usize,
    /// Area element relative to its boundary value below which the chart
    /// is treated as singular.
    pub jacobian_floor: f64,
}

impl Default for GeodesicConfig {
    fn default() -> Self {
        GeodesicConfig { r0_request: 0.8, steps: 64, per_loop: 128, min_rows: 4, jacobian_floor: 0.05 }
    }
}

/// One inward geodesic sampled at r_j = j·step.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Geodesic {
    pub node: usize,
    pub component: usize,
    pub varsigma: f64,
    pub z: Vec<C64>,
    pub v: Vec<C64>,
    pub xi: Vec<Vec<C64>>,
    /// e^u at each row.
    pub conformal: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SemiGeodesicChart {
    pub geodesics: Vec<Geodesic>,
    /// Geodesic index ranges per loop.
    pub loops: Vec<std::ops::Range<usize>>,
    /// Spacing of ς between neighbouring geodesics on each loop.
    pub dvarsigma: Vec<f64>,
    /// Loop lengths (periods of ς).
    pub periods: Vec<f64>,
    pub step: f64,
    /// Rows 0..rows are regular on every geodesic.
    pub rows: usize,
    pub r0: f64,
    pub r0_request: f64,
    /// Set when the regular depth fell short of the request.
    pub flagged: bool,
    /// |∂_ςΞ| per geodesic and regular row.
    pub sqrt_g: Vec<Vec<f64>>,
    /// Area element relative to its boundary value, per geodesic and row.
    pub jacobian: Vec<Vec<f64>>,
    /// Largest |cos| of the angle between ∂_ς and ∂_r at r = 0.
    pub orthogonality: f64,
}

fn accel(p: &Projection, z: C64) -> Result<(Vec<Vec<C64>>, C64, f64)> {
    let j = p.jet(z, 2)?;
    let lam: f64 = j[1].iter().map(|d| d.norm_sqr()).sum();
    let cross: C64 = j[1].iter().zip(&j[2]).map(|(a, b)| a.conj() * b).sum();
    Ok((j, cross / lam, lam.sqrt()))
}

/// Integrates one geodesic until `steps` or the first failed evaluation.
fn integrate(p: &Projection, node: usize, step: f64, steps: usize) -> Geodesic {
    let (component, local) = p.grid.locate(node);
    let varsigma = p.grid.s(component, local);
    let mut g = Geodesic { node, component, varsigma, z: Vec::new(), v: Vec::new(), xi: Vec::new(), conformal: Vec::new() };
    let z0 = p.mu[node];
    let Ok((_, mut a, eu)) = accel(p, z0) else { return g };
    let mut z = z0;
    let mut v = p.normal(node) / eu;
    g.z.push(z);
    g.v.push(v);
    g.xi.push(p.trace_at(node));
    g.conformal.push(eu);
    for _ in 0..steps {
        let f = |v: C64, a: C64| (v, -a * v * v);
        let k1 = f(v, a);
        let stage = |dz: C64| accel(p, z + dz).map(|r| r.1);
        let Ok(a2) = stage(k1.0 * (step / 2.0)) else { break };
        let k2 = f(v + k1.1 * (step / 2.0), a2);
        let Ok(a3) = stage(k2.0 * (step / 2.0)) else { break };
        let k3 = f(v + k2.1 * (step / 2.0), a3);
        let Ok(a4) = stage(k3.0 * step) else { break };
        let k4 = f(v + k3.1 * step, a4);
        let zn = z + (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0) * (step / 6.0);
        let vn = v + (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1) * (step / 6.0);
        let Ok((jn, an, eun)) = accel(p, zn) else { break };
        z = zn;
        v = vn;
        a = an;
        g.z.push(z);
        g.v.push(v);
        g.xi.push(jn[0].clone());
        g.conformal.push(eun);
    }
    g
}

/// Spectral derivative of periodic samples with period `period`.
fn periodic_derivative(vals: &[C64], period: f64) -> Vec<C64> {
    let n = vals.len();
    let mut c = fft_coeffs(vals);
    for (j, v) in c.iter_mut().enumerate() {
        let k = mode_index(j, n);
        *v *= if k == -(n as i64) / 2 { C64::new(0.0, 0.0) } else { C64::new(0.0, 2.0 * std::f64::consts::PI * k as f64 / period) };
    }
    ifft_values(&c)
}

/// Largest divisor of `nodes` not exceeding `nodes / per_loop` (at least 1)
/// that leaves an even count.
fn stride_for(nodes: usize, per_loop: usize) -> usize {
    let want = (nodes / per_loop.max(1)).max(1);
    (1..=want).rev().find(|s| nodes % s == 0 && (nodes / s) % 2 == 0).unwrap_or(1)
}

/// Semi-geodesic chart of a reconstructed image.
pub fn semi_geodesic_coords(surface: &ReconstructedSurface, cfg: &GeodesicConfig) -> Result<SemiGeodesicChart> {
    let p = &surface.projection;
    let grid = &p.grid;
    let step = cfg.r0_request / cfg.steps as f64;
    let mut nodes = Vec::new();
    let mut loops = Vec::new();
    let mut dvarsigma = Vec::new();
    let mut periods = Vec::new();
    for c in 0..grid.component_count() {
        let stride = stride_for(grid.loops[c].nodes, cfg.per_loop);
        let start = nodes.len();
        nodes.extend(grid.range(c).step_by(stride));
        loops.push(start..nodes.len());
        dvarsigma.push(grid.spacing(c) * stride as f64);
        periods.push(grid.loops[c].length);
    }
    let geodesics = crate::par::map_slice(&nodes, |&n| integrate(p, n, step, cfg.steps));
    let mut rows = geodesics.iter().map(|g| g.z.len()).min().unwrap_or(0);

    // Jacobian of (ς, r) ↦ Ξ relative to r = 0, loop by loop.
    let mut sqrt_g = vec![Vec::new(); geodesics.len()];
    let mut jacobian = vec![Vec::new(); geodesics.len()];
    let mut orthogonality: f64 = 0.0;
    'rows: for j in 0..rows {
        for (c, range) in loops.iter().enumerate() {
            let zs: Vec<C64> = geodesics[range.clone()].iter().map(|g| g.z[j]).collect();
            let dz = periodic_derivative(&zs, periods[c]);
            for (i, gi) in range.clone().enumerate() {
                let g = &geodesics[gi];
                let e2u = g.conformal[j] * g.conformal[j];
                let det = e2u * (dz[i].conj() * g.v[j]).im * grid.loops[c].orientation;
                let sg = g.conformal[j] * dz[i].norm();
                if j == 0 {
                    orthogonality = orthogonality.max((dz[i].conj() * g.v[j]).re.abs() / (dz[i].norm() * g.v[j].norm()));
                }
                let rel = if j == 0 { 1.0 } else { det / (sqrt_g[gi][0]) };
                if !(rel >= cfg.jacobian_floor) {
                    rows = j;
                    break 'rows;
                }
                sqrt_g[gi].push(sg);
                jacobian[gi].push(rel);
            }
        }
    }
    for (s, jv) in sqrt_g.iter_mut().zip(jacobian.iter_mut()) {
        s.truncate(rows);
        jv.truncate(rows);
    }
    if rows < cfg.min_rows {
        return Err(SurfError::ImmediateFocusing(step * rows.saturating_sub(1) as f64));
    }
    let r0 = step * (rows - 1) as f64;
    let geodesics = geodesics
        .into_iter()
        .map(|mut g| {
            g.z.truncate(rows);
            g.v.truncate(rows);
            g.xi.truncate(rows);
            g.conformal.truncate(rows);
            g
        })
        .collect();
    Ok(SemiGeodesicChart {
        geodesics,
        loops,
        dvarsigma,
        periods,
        step,
        rows,
        r0,
        r0_request: cfg.r0_request,
        flagged: rows <= cfg.steps,
        sqrt_g,
        jacobian,
        orthogonality,
    })
}

impl SemiGeodesicChart {
    pub fn r(&self, row: usize) -> f64 {
        self.step * row as f64
    }

    /// Geodesic index on the loop of `g` shifted by `offset` (periodic).
    pub fn neighbour(&self, g: usize, offset: i64) -> usize {
        let c = self.geodesics[g].component;
        let r = &self.loops[c];
        let m = r.len() as i64;
        r.start + ((g - r.start) as i64 + offset).rem_euclid(m) as usize
    }

    /// ζ(ς, r) on loop `c` by cubic Lagrange interpolation in ς and cubic
    /// Hermite interpolation in r; returns ζ, the four geodesic weights and
    /// their indices.
    pub fn zeta_at(&self, c: usize, varsigma: f64, r: f64) -> Option<C64> {
        if !(0.0..=self.r0).contains(&r) {
            return None;
        }
        let range = &self.loops[c];
        let h = self.dvarsigma[c];
        let t = varsigma.rem_euclid(self.periods[c]) / h;
        let i0 = t.floor() as i64;
        let x = t - i0 as f64;
        let w = [-x * (x - 1.0) * (x - 2.0) / 6.0, (x + 1.0) * (x - 1.0) * (x - 2.0) / 2.0, -(x + 1.0) * x * (x - 2.0) / 2.0, (x + 1.0) * x * (x - 1.0) / 6.0];
        let jr = ((r / self.step).floor() as usize).min(self.rows.saturating_sub(2));
        let u = r / self.step - jr as f64;
        let (h00, h10, h01, h11) = ((1.0 + 2.0 * u) * (1.0 - u) * (1.0 - u), u * (1.0 - u) * (1.0 - u), u * u * (3.0 - 2.0 * u), u * u * (u - 1.0));
        let mut z = C64::new(0.0, 0.0);
        for (k, wk) in w.iter().enumerate() {
            let g = self.neighbour(range.start, i0 - 1 + k as i64);
            let geo = &self.geodesics[g];
            let zr = geo.z[jr] * h00 + geo.v[jr] * (h10 * self.step) + geo.z[jr + 1] * h01 + geo.v[jr + 1] * (h11 * self.step);
            z += zr * *wk;
        }
        Some(z)
    }

    /// √G = |∂_ςΞ| at (ς, r), interpolated like ζ.
    pub fn sqrt_g_at(&self, c: usize, varsigma: f64, r: f64) -> f64 {
        let range = &self.loops[c];
        let t = varsigma.rem_euclid(self.periods[c]) / self.dvarsigma[c];
        let i0 = t.floor() as i64;
        let x = t - i0 as f64;
        let w = [-x * (x - 1.0) * (x - 2.0) / 6.0, (x + 1.0) * (x - 1.0) * (x - 2.0) / 2.0, -(x + 1.0) * x * (x - 2.0) / 2.0, (x + 1.0) * x * (x - 1.0) / 6.0];
        let jr = ((r / self.step).floor() as usize).min(self.rows.saturating_sub(2));
        let u = (r / self.step - jr as f64).clamp(0.0, 1.0);
        w.iter()
            .enumerate()
            .map(|(k, wk)| {
                let g = self.neighbour(range.start, i0 - 1 + k as i64);
                wk * ((1.0 - u) * self.sqrt_g[g][jr] + u * self.sqrt_g[g][jr + 1])
            })
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::argument_principle::{reconstruct_surface, EmbeddingSpec, ReconstructConfig};

    fn disk() -> ReconstructedSurface {
        reconstruct_surface(&EmbeddingSpec::disk_identity(512).unwrap(), &ReconstructConfig { nodes: 512, ..Default::default() }).unwrap()
    }

    #[test]
    fn flat_disk_geodesics_are_radii() {
        let s = disk();
        let chart = semi_geodesic_coords(&s, &GeodesicConfig { r0_request: 0.5, ..Default::default() }).unwrap();
        assert!(!chart.flagged);
        assert!(chart.orthogonality < 1e-6);
        for g in &chart.geodesics {
            for (j, z) in g.z.iter().enumerate() {
                let want = C64::from_polar(1.0 - chart.r(j), g.varsigma);
                assert!((z - want).norm() < 1e-8);
            }
        }
        // Interpolated positions follow the polar chart as well.
        let z = chart.zeta_at(0, 0.1234, 0.2345).unwrap();
        assert!((z - C64::from_polar(1.0 - 0.2345, 0.1234)).norm() < 1e-6);
        assert!((chart.sqrt_g_at(0, 0.5, 0.25) - 0.75).abs() < 1e-6);
    }

    #[test]
    fn focal_requests_are_cut_back() {
        let s = disk();
        let chart = semi_geodesic_coords(&s, &GeodesicConfig { r0_request: 1.5, steps: 96, ..Default::default() }).unwrap();
        assert!(chart.flagged);
        assert!(chart.r0 < 1.0 && chart.r0 > 0.5, "{}", chart.r0);
    }

    #[test]
    fn mobius_chart_rows_start_on_the_boundary_cloud() {
        let s = reconstruct_surface(&EmbeddingSpec::mobius_cover(2.0, 256).unwrap(), &ReconstructConfig { nodes: 512, ..Default::default() }).unwrap();
        let chart = semi_geodesic_coords(&s, &GeodesicConfig::default()).unwrap();
        for g in &chart.geodesics {
            assert_eq!(g.xi[0], s.boundary_cloud[g.node]);
        }
        assert!(chart.r0 > 0.3);
    }
}
