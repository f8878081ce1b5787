//! The nearest-point correspondence α between two reconstructed images and
//! its dilatation.
//!
//! Each source sample is sent to the minimizer over the target of
//! (1 − χ)|ξ' − ξ|² + χ(|ς' − ς|² + |r' − r|²), where (ς, r) are
//! semi-geodesic coordinates and χ(r) is a quintic smoothstep equal to one
//! for r ≤ r₀/3 and zero for r ≥ 2r₀/3. Interior samples are refined by
//! Gauss–Newton in the target's projected coordinate, blended samples in
//! the target's semi-geodesic coordinates.

use nalgebra::{DMatrix, DVector, Matrix2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::geodesic::SemiGeodesicChart;
use super::hausdorff::{hausdorff_distance, nearest};
use crate::argument_principle::{Location, ReconstructedSurface};
use crate::error::{Result, SurfError};

type C64 = Complex64;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MapConfig {
    /// Strip width r₀ of the blended functional; `None` uses half the
    /// smaller regular depth of the two charts.
    pub r0: Option<f64>,
    /// Use every `row_stride`-th chart row as a sample row.
    pub row_stride: usize,
    /// Finite-difference step in chart coordinates.
    pub fd_step: f64,
    pub max_iter: usize,
    /// Keep every `interior_stride`-th interior point (mirrors follow their
    /// originals).
    pub interior_stride: usize,
    /// Relative objective gap below which two distinct minimizers count as
    /// a multiple minimum.
    pub multiple_minima_gap: f64,
}

impl Default for MapConfig {
    fn default() -> Self {
        MapConfig { r0: None, row_stride: 2, fd_step: 1e-4, max_iter: 60, interior_stride: 1, multiple_minima_gap: 1e-2 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Zone {
    /// χ = 1: semi-geodesic coordinates are matched directly.
    Boundary,
    /// 0 < χ < 1.
    Blend,
    /// χ = 0: nearest point in ℂⁿ.
    Interior,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MapSample {
    pub zone: Zone,
    pub chi: f64,
    pub source: Vec<C64>,
    pub target: Vec<C64>,
    /// Geodesic and row for strip samples.
    pub strip: Option<(usize, usize)>,
    /// Projected coordinate of the source sample.
    pub zeta: C64,
    /// Differential in chart coordinates with the Gram matrices of the
    /// source and target metrics in those coordinates.
    pub differential: [[f64; 2]; 2],
    pub metric_src: [[f64; 2]; 2],
    pub metric_tgt: [[f64; 2]; 2],
    /// Two distinct minimizers with nearly equal objective were found.
    pub multiple: bool,
    /// Index of the τ-paired sample, when known.
    pub pair: Option<usize>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CorrespondenceMap {
    pub samples: Vec<MapSample>,
    pub r0: f64,
    /// d_H(src, tgt) exceeded r₀/4, outside the regime of unique minimizers.
    pub far_apart: bool,
    pub d_h: f64,
    /// Samples whose minimization failed; they are left out of `samples`.
    pub failed: usize,
}

impl CorrespondenceMap {
    /// Multiple-minimum samples plus failed ones.
    pub fn excluded(&self) -> usize {
        self.samples.iter().filter(|s| s.multiple).count() + self.failed
    }

    pub fn excluded_fraction(&self) -> f64 {
        let total = self.samples.len() + self.failed;
        if total == 0 {
            0.0
        } else {
            self.excluded() as f64 / total as f64
        }
    }

    /// max |α(ℰ(x)) − ℰ'(x)| over the r = 0 samples.
    pub fn boundary_residual(&self, tgt: &ReconstructedSurface, tgt_chart: &SemiGeodesicChart) -> f64 {
        self.samples
            .iter()
            .filter_map(|s| match s.strip {
                Some((g, 0)) => {
                    let want = &tgt.boundary_cloud[tgt_chart.geodesics[g].node];
                    Some(s.target.iter().zip(want).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max))
                }
                _ => None,
            })
            .fold(0.0, f64::max)
    }
}

/// Quintic smoothstep cutoff.
pub fn chi(r: f64, r0: f64) -> f64 {
    let t = ((r - r0 / 3.0) / (r0 / 3.0)).clamp(0.0, 1.0);
    1.0 - t * t * t * (t * (6.0 * t - 15.0) + 10.0)
}

/// Dilatation from a differential in chart coordinates and the Gram
/// matrices of both metrics: returns (K, √K, s₁, s₂) with K = (s₁/s₂)².
pub fn dilatation(d: &[[f64; 2]; 2], g_src: &[[f64; 2]; 2], g_tgt: &[[f64; 2]; 2]) -> Result<(f64, f64, f64, f64)> {
    let m = |a: &[[f64; 2]; 2]| Matrix2::new(a[0][0], a[0][1], a[1][0], a[1][1]);
    let (gs, gt) = (m(g_src), m(g_tgt));
    let rs = gs.cholesky().ok_or(SurfError::DegenerateDifferential(0.0))?.l().transpose();
    let rt = gt.cholesky().ok_or(SurfError::DegenerateDifferential(0.0))?.l().transpose();
    let rs_inv = rs.try_inverse().ok_or(SurfError::DegenerateDifferential(0.0))?;
    let on = rt * m(d) * rs_inv;
    let sv = on.singular_values();
    let (s1, s2) = (sv[0].max(sv[1]), sv[0].min(sv[1]));
    if !(s2 > 1e-10 * s1.max(1e-300)) {
        return Err(SurfError::DegenerateDifferential(s2));
    }
    let k = s1 / s2;
    Ok((k * k, k, s1, s2))
}

/// Per-sample (K, √K); the squared value follows the ratio-of-axes-squared
/// convention.
pub fn dilatation_field(map: &CorrespondenceMap) -> Result<Vec<(f64, f64)>> {
    map.samples.iter().map(|s| dilatation(&s.differential, &s.metric_src, &s.metric_tgt).map(|(k, ku, _, _)| (k, ku))).collect()
}

/// sup log K over samples not flagged as multiple minima.
pub fn sup_log_k(map: &CorrespondenceMap) -> Result<f64> {
    let ks = dilatation_field(map)?;
    Ok(map.samples.iter().zip(ks).filter(|(s, _)| !s.multiple).map(|(_, (k, _))| k.ln()).fold(0.0, f64::max))
}

fn dist2(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum()
}

/// Gauss–Newton for min_ζ' |Ξ'(ζ') − ξ|² (Ξ' holomorphic).
fn refine(tgt: &ReconstructedSurface, xi: &[C64], start: C64, max_iter: usize) -> Result<(C64, Vec<C64>, f64)> {
    let mut z = start;
    let mut jet = tgt.projection.jet(z, 1)?;
    let mut cost = dist2(&jet[0], xi);
    for _ in 0..max_iter {
        let num: C64 = jet[1].iter().zip(&jet[0]).zip(xi).map(|((d, a), b)| d.conj() * (a - b)).sum();
        let den: f64 = jet[1].iter().map(|d| d.norm_sqr()).sum();
        let delta = -num / den;
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..20 {
            if let Ok(j) = tgt.projection.jet(z + delta * t, 1) {
                let c = dist2(&j[0], xi);
                if c <= cost {
                    z += delta * t;
                    jet = j;
                    cost = c;
                    accepted = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !accepted || (delta * t).norm() <= 1e-13 * (1.0 + z.norm()) {
            break;
        }
    }
    let grad: C64 = jet[1].iter().zip(&jet[0]).zip(xi).map(|((d, a), b)| d.conj() * (a - b)).sum();
    let scale: f64 = jet[1].iter().map(|d| d.norm_sqr()).sum::<f64>().sqrt();
    if grad.norm() > 1e-6 * scale * (cost.sqrt() + 1e-3) {
        return Err(SurfError::NewtonDiverged);
    }
    Ok((z, jet.swap_remove(0), cost))
}

fn project(dir: &[C64], xi: &[C64]) -> C64 {
    dir.iter().zip(xi).map(|(a, b)| a * b).sum()
}

struct Ctx<'a> {
    src: &'a ReconstructedSurface,
    tgt: &'a ReconstructedSurface,
    src_chart: &'a SemiGeodesicChart,
    tgt_chart: &'a SemiGeodesicChart,
    tgt_cloud: Vec<Vec<C64>>,
    tgt_zeta: Vec<C64>,
    r0: f64,
    cfg: &'a MapConfig,
}

impl Ctx<'_> {
    /// Interior-zone image of the source point over ζ (source chart).
    fn interior_image(&self, xi: &[C64], start: C64) -> Result<(C64, Vec<C64>)> {
        let (z, t, _) = refine(self.tgt, xi, start, self.cfg.max_iter)?;
        Ok((z, t))
    }

    fn interior(&self, zeta: C64, xi: Vec<C64>) -> Result<MapSample> {
        let dir = &self.tgt.projection.direction;
        let first = refine(self.tgt, &xi, project(dir, &xi), self.cfg.max_iter)?;
        let (k, _) = nearest(&self.tgt_cloud, &xi);
        let mut multiple = false;
        let mut best = first.clone();
        if let Ok(second) = refine(self.tgt, &xi, self.tgt_zeta[k], self.cfg.max_iter) {
            if (second.0 - first.0).norm() > 1e-6 * (1.0 + first.0.norm()) {
                let (lo, hi) = (first.2.min(second.2), first.2.max(second.2));
                if hi - lo <= self.cfg.multiple_minima_gap * hi.max(1e-300) {
                    multiple = true;
                }
                if second.2 < first.2 {
                    best = second;
                }
            }
        }
        let h = self.cfg.fd_step;
        let mut cols = [[0.0; 2]; 2];
        for (c, e) in [C64::new(h, 0.0), C64::new(0.0, h)].into_iter().enumerate() {
            let xp = self.src.projection.evaluate(zeta + e, 0)?;
            let xm = self.src.projection.evaluate(zeta - e, 0)?;
            let (zp, _) = self.interior_image(&xp, best.0)?;
            let (zm, _) = self.interior_image(&xm, best.0)?;
            let d = (zp - zm) / (2.0 * h);
            cols[c] = [d.re, d.im];
        }
        let lam = |s: &ReconstructedSurface, z: C64| -> Result<f64> { Ok(s.projection.jet(z, 1)?[1].iter().map(|d| d.norm_sqr()).sum()) };
        let ls = lam(self.src, zeta)?;
        let lt = lam(self.tgt, best.0)?;
        Ok(MapSample {
            zone: Zone::Interior,
            chi: 0.0,
            source: xi,
            target: best.1,
            strip: None,
            zeta,
            differential: [[cols[0][0], cols[1][0]], [cols[0][1], cols[1][1]]],
            metric_src: [[ls, 0.0], [0.0, ls]],
            metric_tgt: [[lt, 0.0], [0.0, lt]],
            multiple,
            pair: None,
        })
    }

    fn boundary(&self, g: usize, j: usize) -> MapSample {
        let s = &self.src_chart.geodesics[g];
        let t = &self.tgt_chart.geodesics[g];
        let gs = self.src_chart.sqrt_g[g][j];
        let gt = self.tgt_chart.sqrt_g[g][j];
        MapSample {
            zone: Zone::Boundary,
            chi: 1.0,
            source: s.xi[j].clone(),
            target: t.xi[j].clone(),
            strip: Some((g, j)),
            zeta: s.z[j],
            differential: [[1.0, 0.0], [0.0, 1.0]],
            metric_src: [[gs * gs, 0.0], [0.0, 1.0]],
            metric_tgt: [[gt * gt, 0.0], [0.0, 1.0]],
            multiple: false,
            pair: None,
        }
    }

    /// Source point at (ς, r) of loop c.
    fn src_point(&self, c: usize, vs: f64, r: f64) -> Result<Vec<C64>> {
        let z = self.src_chart.zeta_at(c, vs, r).ok_or(SurfError::NewtonDiverged)?;
        self.src.projection.evaluate(z, 0)
    }

    /// Minimizer over (ς', r') of the blended functional for a source
    /// point with coordinates (ς, r) and weight χ.
    fn blend_image(&self, c: usize, xi: &[C64], vs: f64, r: f64, w: f64, start: [f64; 2]) -> Result<([f64; 2], Vec<C64>)> {
        let n = xi.len();
        let resid = |p: [f64; 2]| -> Result<(DVector<f64>, Vec<C64>)> {
            let z = self.tgt_chart.zeta_at(c, p[0], p[1].clamp(0.0, self.tgt_chart.r0)).ok_or(SurfError::NewtonDiverged)?;
            let t = self.tgt.projection.evaluate(z, 0)?;
            let mut v = DVector::zeros(2 * n + 2);
            let a = (1.0 - w).sqrt();
            for k in 0..n {
                let d = t[k] - xi[k];
                v[2 * k] = a * d.re;
                v[2 * k + 1] = a * d.im;
            }
            v[2 * n] = w.sqrt() * (p[0] - vs);
            v[2 * n + 1] = w.sqrt() * (p[1] - r);
            Ok((v, t))
        };
        let mut p = start;
        let (mut rv, mut t) = resid(p)?;
        let h = 1e-6;
        for _ in 0..self.cfg.max_iter {
            let mut jac = DMatrix::zeros(rv.len(), 2);
            for k in 0..2 {
                let mut a = p;
                a[k] += h;
                let mut b = p;
                b[k] -= h;
                jac.set_column(k, &((resid(a)?.0 - resid(b)?.0) / (2.0 * h)));
            }
            let jt = jac.transpose();
            let step = (&jt * &jac).lu().solve(&(-(&jt * &rv))).ok_or(SurfError::NewtonDiverged)?;
            let mut s = 1.0;
            let cost = rv.norm_squared();
            let mut done = false;
            for _ in 0..20 {
                let q = [p[0] + s * step[0], p[1] + s * step[1]];
                if let Ok((rq, tq)) = resid(q) {
                    if rq.norm_squared() <= cost {
                        p = q;
                        rv = rq;
                        t = tq;
                        done = true;
                        break;
                    }
                }
                s *= 0.5;
            }
            if !done || s * step.norm() <= 1e-12 {
                break;
            }
        }
        Ok((p, t))
    }

    fn blend(&self, g: usize, j: usize) -> Result<MapSample> {
        let geo = &self.src_chart.geodesics[g];
        let c = geo.component;
        let vs = geo.varsigma;
        let r = self.src_chart.r(j);
        let w = chi(r, self.r0);
        let xi = geo.xi[j].clone();
        let (p, target) = self.blend_image(c, &xi, vs, r, w, [vs, r])?;
        let h = self.cfg.fd_step;
        let mut m = [[0.0; 2]; 2];
        for k in 0..2 {
            let (dv, dr) = if k == 0 { (h, 0.0) } else { (0.0, h) };
            let wp = chi(r + dr, self.r0);
            let wm = chi(r - dr, self.r0);
            let xp = self.src_point(c, vs + dv, r + dr)?;
            let xm = self.src_point(c, vs - dv, r - dr)?;
            let (pp, _) = self.blend_image(c, &xp, vs + dv, r + dr, wp, p)?;
            let (pm, _) = self.blend_image(c, &xm, vs - dv, r - dr, wm, p)?;
            m[0][k] = (pp[0] - pm[0]) / (2.0 * h);
            m[1][k] = (pp[1] - pm[1]) / (2.0 * h);
        }
        let gs = self.src_chart.sqrt_g[g][j];
        let gt = self.tgt_chart.sqrt_g_at(c, p[0], p[1]);
        Ok(MapSample {
            zone: Zone::Blend,
            chi: w,
            source: xi,
            target,
            strip: Some((g, j)),
            zeta: geo.z[j],
            differential: m,
            metric_src: [[gs * gs, 0.0], [0.0, 1.0]],
            metric_tgt: [[gt * gt, 0.0], [0.0, 1.0]],
            multiple: false,
            pair: None,
        })
    }
}

/// Builds α on the samples of `src`: chart rows inside the strip and
/// reconstructed interior points (with their mirrors) beyond it.
pub fn nearest_point_map(
    src: &ReconstructedSurface,
    src_chart: &SemiGeodesicChart,
    tgt: &ReconstructedSurface,
    tgt_chart: &SemiGeodesicChart,
    cfg: &MapConfig,
) -> Result<CorrespondenceMap> {
    if src_chart.geodesics.len() != tgt_chart.geodesics.len() || src_chart.step != tgt_chart.step {
        return Err(SurfError::GridMismatch("semi-geodesic charts sampled differently".into()));
    }
    let r0 = cfg.r0.unwrap_or(0.5 * src_chart.r0.min(tgt_chart.r0));
    if !(r0 > 0.0) || r0 > src_chart.r0.min(tgt_chart.r0) {
        return Err(SurfError::DegenerateParameters(format!("strip width r0 = {r0}")));
    }
    let d_h = hausdorff_distance(&src.boundary_cloud, &tgt.boundary_cloud);
    let ctx = Ctx {
        src,
        tgt,
        src_chart,
        tgt_chart,
        tgt_cloud: tgt.cloud(),
        tgt_zeta: tgt.points.iter().map(|p| p.location.zeta()).collect(),
        r0,
        cfg,
    };

    // Strip tasks; rows with r < r₀.
    let jmax = ((r0 / src_chart.step).ceil() as usize).min(src_chart.rows);
    let mut strip: Vec<(usize, usize)> = Vec::new();
    for g in 0..src_chart.geodesics.len() {
        for j in (0..jmax).step_by(cfg.row_stride.max(1)) {
            if src_chart.r(j) < r0 {
                strip.push((g, j));
            }
        }
    }
    // Interior tasks: reconstructed points beyond the strip's reach in ζ.
    let reach = src_chart
        .geodesics
        .iter()
        .map(|g| {
            let j = ((r0 / src_chart.step).round() as usize).min(g.z.len() - 1);
            (g.z[j] - g.z[0]).norm()
        })
        .fold(0.0, f64::max);
    let stride = cfg.interior_stride.max(1);
    let mut kept = vec![false; src.points.len()];
    let mut seen = 0usize;
    let mut interior: Vec<usize> = Vec::new();
    for (i, p) in src.points.iter().enumerate() {
        let keep = match p.location {
            Location::Interior { .. } => {
                seen += 1;
                (seen - 1) % stride == 0
            }
            Location::Mirror { of, .. } => kept[of],
            Location::Strip { .. } => false,
        };
        kept[i] = keep;
        if keep && src.projection.nearest(p.location.zeta()).1 >= reach {
            interior.push(i);
        }
    }

    let strip_samples = crate::par::map_slice(&strip, |&(g, j)| {
        let r = src_chart.r(j);
        if r <= r0 / 3.0 {
            Ok(ctx.boundary(g, j))
        } else if r < 2.0 * r0 / 3.0 {
            ctx.blend(g, j)
        } else {
            let geo = &src_chart.geodesics[g];
            ctx.interior(geo.z[j], geo.xi[j].clone()).map(|mut s| {
                s.strip = Some((g, j));
                s
            })
        }
    });
    let interior_samples = crate::par::map_slice(&interior, |&i| {
        let p = &src.points[i];
        ctx.interior(p.location.zeta(), p.xi.clone())
    });

    let mut samples = Vec::with_capacity(strip.len() + interior.len());
    let mut failed = 0;
    for s in strip_samples {
        match s {
            Ok(s) => samples.push(s),
            Err(_) => failed += 1,
        }
    }
    let mut by_point = std::collections::HashMap::new();
    for (&i, s) in interior.iter().zip(interior_samples) {
        match s {
            Ok(s) => {
                by_point.insert(i, samples.len());
                samples.push(s);
            }
            Err(_) => failed += 1,
        }
    }

    // τ pairs: matching rows of paired geodesics, and interior mirrors.
    if let Some(pairing) = src.spec.grid().pairing() {
        let mut by_strip = std::collections::HashMap::new();
        for (k, s) in samples.iter().enumerate() {
            if let Some((g, j)) = s.strip {
                by_strip.insert((src_chart.geodesics[g].node, j), k);
            }
        }
        let node_of: Vec<Option<(usize, usize)>> = samples.iter().map(|s| s.strip.map(|(g, j)| (src_chart.geodesics[g].node, j))).collect();
        for (k, nj) in node_of.into_iter().enumerate() {
            if let Some((node, j)) = nj {
                samples[k].pair = by_strip.get(&(pairing[node], j)).copied();
            }
        }
        for &i in &interior {
            if let (&Location::Mirror { of, .. }, Some(&k)) = (&src.points[i].location, by_point.get(&i)) {
                if let Some(&other) = by_point.get(&of) {
                    samples[k].pair = Some(other);
                    samples[other].pair = Some(k);
                }
            }
        }
    }
    if samples.is_empty() {
        return Err(SurfError::NewtonDiverged);
    }
    Ok(CorrespondenceMap { samples, r0, far_apart: d_h > r0 / 4.0, d_h, failed })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shear_has_the_squared_axis_ratio() {
        let id = [[1.0, 0.0], [0.0, 1.0]];
        let (k, ku, s1, s2) = dilatation(&[[1.0, 0.0], [0.0, 0.2f64.exp()]], &id, &id).unwrap();
        assert!((k.ln() - 0.4).abs() < 1e-12);
        assert!((ku.ln() - 0.2).abs() < 1e-12);
        assert!((s1 - 0.2f64.exp()).abs() < 1e-12 && (s2 - 1.0).abs() < 1e-12);
        assert_eq!(dilatation(&id, &id, &id).unwrap().0, 1.0);
    }

    #[test]
    fn conformal_differentials_have_unit_dilatation() {
        // Multiplication by 2e^{0.3i} between conformal metrics λ = 3 and 5.
        let a = 2.0 * C64::from_polar(1.0, 0.3);
        let d = [[a.re, -a.im], [a.im, a.re]];
        let (k, _, _, _) = dilatation(&d, &[[3.0, 0.0], [0.0, 3.0]], &[[5.0, 0.0], [0.0, 5.0]]).unwrap();
        assert!((k - 1.0).abs() < 1e-12);
        assert!(matches!(dilatation(&[[1.0, 0.0], [0.0, 0.0]], &[[1.0, 0.0], [0.0, 1.0]], &[[1.0, 0.0], [0.0, 1.0]]), Err(SurfError::DegenerateDifferential(_))));
    }

    use crate::argument_principle::{reconstruct_surface, EmbeddingSpec, ReconstructConfig};
    use crate::boundary_calculus::BoundaryGrid;
    use crate::correspondence::{semi_geodesic_coords, GeodesicConfig};
    use std::sync::Arc;

    fn disk_spec(v: C64) -> EmbeddingSpec {
        let g = Arc::new(BoundaryGrid::unit_circle(256).unwrap());
        EmbeddingSpec::from_maps(g, |_, s| C64::from_polar(1.0, s), &[&move |z| z + v, &|z| 0.3 * z * z], false).unwrap()
    }

    fn pipeline(a: &EmbeddingSpec, b: &EmbeddingSpec) -> (ReconstructedSurface, ReconstructedSurface, CorrespondenceMap) {
        let rc = ReconstructConfig { nodes: 256, ..Default::default() };
        let gc = GeodesicConfig { r0_request: 0.4, steps: 32, per_loop: 64, ..Default::default() };
        let sa = reconstruct_surface(a, &rc).unwrap();
        let sb = reconstruct_surface(b, &rc).unwrap();
        let ca = semi_geodesic_coords(&sa, &gc).unwrap();
        let cb = semi_geodesic_coords(&sb, &gc).unwrap();
        let m = nearest_point_map(&sa, &ca, &sb, &cb, &MapConfig::default()).unwrap();
        assert!(m.boundary_residual(&sb, &cb) < 1e-12);
        (sa, sb, m)
    }

    #[test]
    fn identity_pair_has_unit_dilatation() {
        let s = disk_spec(C64::new(0.0, 0.0));
        let (_, _, m) = pipeline(&s, &s);
        assert!(m.samples.iter().any(|s| s.zone == Zone::Blend));
        assert!(m.samples.iter().any(|s| s.zone == Zone::Interior));
        for smp in &m.samples {
            let d = smp.source.iter().zip(&smp.target).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
            assert!(d < 1e-8, "{:?} {d}", smp.zone);
        }
        assert!(sup_log_k(&m).unwrap() < 1e-8);
        assert_eq!(m.excluded(), 0);
    }

    #[test]
    fn normal_translation_is_an_isometry() {
        // A planar disk in ℂ² moved along its normal: α(ξ) = ξ + v exactly.
        let v = C64::new(0.05, -0.02);
        let plane = |w: C64| {
            let g = Arc::new(BoundaryGrid::unit_circle(256).unwrap());
            EmbeddingSpec::from_maps(g, |_, s| C64::from_polar(1.0, s), &[&|z| z, &move |_| w], false).unwrap()
        };
        let (_, _, m) = pipeline(&plane(C64::new(0.0, 0.0)), &plane(v));
        for smp in &m.samples {
            assert!((smp.target[0] - smp.source[0]).norm() < 1e-8);
            assert!((smp.target[1] - smp.source[1] - v).norm() < 1e-8);
        }
        assert!(sup_log_k(&m).unwrap() < 1e-6);
    }

    #[test]
    fn cutoff_plateaus() {
        assert_eq!(chi(0.0, 0.3), 1.0);
        assert_eq!(chi(0.1, 0.3), 1.0);
        assert_eq!(chi(0.2, 0.3), 0.0);
        assert!((chi(0.15, 0.3) - 0.5).abs() < 1e-12);
    }
}
