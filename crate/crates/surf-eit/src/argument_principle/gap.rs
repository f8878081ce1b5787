//! Winding numbers and Cauchy integrals of projected traces.
//!
//! For a direction ξ̂ the projected trace μ = Σ ξ̂_k η_k bounds the image of
//! the surface in the ζ-plane. At points with winding one the coordinates of
//! the embedded point over ζ are Ξ_k(ζ) = (1/2πi)∮ η_k dμ/(μ − ζ). Close to
//! the curve the integrand is split into a cubic Taylor polynomial at the
//! nearest node, integrated in closed form, and a remainder that vanishes to
//! fourth order there.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;

use super::spec::EmbeddingSpec;
use crate::boundary_calculus::{BoundaryFunction, BoundaryGrid, ComplexBoundaryFunction};
use crate::error::{Result, SurfError};

type C64 = Complex64;

/// Taylor order of the near-boundary splitting.
pub const TAYLOR_ORDER: usize = 3;
const GUARD_FACTOR: f64 = 6.0;
const WIND_FACTOR: f64 = 4.0;

fn factorial(l: usize) -> f64 {
    (1..=l).map(|k| k as f64).product()
}

/// Largest h_c·max|∂_γη| over the loops of the grid.
fn spacing_speed(eta: &ComplexBoundaryFunction) -> f64 {
    let d = eta.derivative();
    (0..eta.grid.component_count())
        .map(|c| eta.grid.spacing(c) * d.component(c).iter().map(|v| v.norm()).fold(0.0, f64::max))
        .fold(0.0, f64::max)
}

fn polygon_winding(grid: &BoundaryGrid, values: &[C64], z: C64) -> i64 {
    let mut total = 0.0;
    for c in 0..grid.component_count() {
        let r = grid.range(c);
        let v = &values[r.clone()];
        let mut inc = 0.0;
        for i in 0..v.len() {
            let a = v[i] - z;
            let b = v[(i + 1) % v.len()] - z;
            inc += (b / a).arg();
        }
        total += grid.loops[c].orientation * inc;
    }
    (total / (2.0 * PI)).round() as i64
}

/// Winding number of the closed boundary curve η around z, counted along
/// the positive orientation of every loop.
pub fn winding_number(eta: &ComplexBoundaryFunction, z: C64) -> Result<i64> {
    let guard = WIND_FACTOR * spacing_speed(eta);
    let dist = eta.values.iter().map(|v| (v - z).norm()).fold(f64::INFINITY, f64::min);
    if dist < guard {
        return Err(SurfError::TooCloseToCurve(dist));
    }
    Ok(polygon_winding(&eta.grid, &eta.values, z))
}

/// A spec projected along one direction, with everything the Cauchy
/// integrals need precomputed at the nodes.
#[derive(Clone, Debug)]
pub struct Projection {
    pub direction: Vec<C64>,
    pub grid: Arc<BoundaryGrid>,
    pub mu: Vec<C64>,
    /// ∂_γ μ.
    pub dmu: Vec<C64>,
    /// dμ·dl for the trapezoid rule.
    dw: Vec<C64>,
    traces: Vec<Vec<C64>>,
    /// taylor[k][node] = coefficients a₀..a₃ of Ξ_k around μ(node).
    taylor: Vec<Vec<[C64; TAYLOR_ORDER + 1]>>,
    /// Plain quadrature is used at distances ≥ guard (order 0).
    pub guard: f64,
    wind_guard: f64,
}

impl Projection {
    /// Fails with `ImmersionFailure` when ∂_γμ vanishes somewhere.
    pub fn new(spec: &EmbeddingSpec, direction: &[C64]) -> Result<Self> {
        let mu = spec.project(direction)?;
        let dmu = mu.derivative();
        let speeds: Vec<f64> = dmu.values.iter().map(|v| v.norm()).collect();
        let top = speeds.iter().cloned().fold(0.0, f64::max);
        let low = speeds.iter().cloned().fold(f64::INFINITY, f64::min);
        if !(top > 1e-12) || low < 1e-3 * top {
            return Err(SurfError::ImmersionFailure);
        }
        let grid = spec.grid().clone();
        let weights = grid.weights();
        let dw = dmu.values.iter().zip(&weights).map(|(d, w)| d * w).collect();
        let over_dmu = |f: &ComplexBoundaryFunction| f.derivative().zip(&dmu, |a, b| a / b);
        let taylor = spec
            .traces
            .iter()
            .map(|eta| {
                let f1 = over_dmu(eta);
                let f2 = over_dmu(&f1);
                let f3 = over_dmu(&f2);
                (0..eta.values.len()).map(|i| [eta.values[i], f1.values[i], f2.values[i] / 2.0, f3.values[i] / 6.0]).collect()
            })
            .collect();
        let hs = spacing_speed(&mu);
        Ok(Projection {
            direction: direction.to_vec(),
            grid,
            mu: mu.values,
            dmu: dmu.values,
            dw,
            traces: spec.traces.iter().map(|t| t.values.clone()).collect(),
            taylor,
            guard: GUARD_FACTOR * hs,
            wind_guard: WIND_FACTOR * hs,
        })
    }

    pub fn n(&self) -> usize {
        self.traces.len()
    }

    /// Distance guard for derivatives of order l.
    pub fn guard_for(&self, l: usize) -> f64 {
        self.guard * (1.0 + 0.5 * l as f64)
    }

    pub fn curve(&self) -> ComplexBoundaryFunction {
        BoundaryFunction { grid: self.grid.clone(), values: self.mu.clone() }
    }

    /// Nearest node and its distance.
    pub fn nearest(&self, z: C64) -> (usize, f64) {
        self.mu
            .iter()
            .enumerate()
            .map(|(i, m)| (i, (m - z).norm()))
            .fold((0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a })
    }

    pub fn winding(&self, z: C64) -> Result<i64> {
        let (_, d) = self.nearest(z);
        if d < self.wind_guard {
            return Err(SurfError::TooCloseToCurve(d));
        }
        Ok(polygon_winding(&self.grid, &self.mu, z))
    }

    /// Unit inward normal at a node (left of the positive tangent).
    pub fn normal(&self, node: usize) -> C64 {
        C64::i() * self.dmu[node] / self.dmu[node].norm()
    }

    /// Trace values at a node.
    pub fn trace_at(&self, node: usize) -> Vec<C64> {
        self.traces.iter().map(|t| t[node]).collect()
    }

    /// Trapezoid rule for (l!/2πi)∮ η_k dμ/(μ − z)^{l+1}.
    pub fn plain(&self, z: C64, l: usize) -> Vec<C64> {
        let kern: Vec<C64> = self.mu.iter().zip(&self.dw).map(|(m, w)| w / (m - z).powu(l as u32 + 1)).collect();
        let f = C64::new(0.0, -factorial(l) / (2.0 * PI));
        self.traces.iter().map(|t| f * t.iter().zip(&kern).map(|(a, b)| a * b).sum::<C64>()).collect()
    }

    /// Taylor-subtracted integral around node `p`.
    pub fn taylor(&self, z: C64, l: usize, p: usize) -> Vec<C64> {
        let m0 = self.mu[p];
        let f = C64::new(0.0, -factorial(l) / (2.0 * PI));
        let tiny = 1e-14 * (1.0 + m0.norm());
        self.taylor
            .iter()
            .zip(&self.traces)
            .map(|(coef, t)| {
                let a = &coef[p];
                let poly = |x: C64| ((a[3] * x + a[2]) * x + a[1]) * x + a[0];
                let mut rem = C64::new(0.0, 0.0);
                for j in 0..self.mu.len() {
                    let d = self.mu[j] - z;
                    if d.norm() <= tiny {
                        continue;
                    }
                    rem += (t[j] - poly(self.mu[j] - m0)) * self.dw[j] / d.powu(l as u32 + 1);
                }
                let x = z - m0;
                let mut head = C64::new(0.0, 0.0);
                for m in l..=TAYLOR_ORDER {
                    head += a[m] * (factorial(m) / factorial(m - l)) * x.powu((m - l) as u32);
                }
                head + f * rem
            })
            .collect()
    }

    /// ∂_ζ^l Ξ at ζ = z, routing between plain and Taylor-subtracted
    /// quadrature by the distance to the curve.
    pub fn evaluate(&self, z: C64, l: usize) -> Result<Vec<C64>> {
        let (p, d) = self.nearest(z);
        if d == 0.0 && l == 0 {
            return Ok(self.trace_at(p));
        }
        let guard = self.guard_for(l);
        if d >= guard {
            let w = self.winding(z)?;
            if w != 1 {
                return Err(SurfError::NotAdmissible(w));
            }
            return Ok(self.plain(z, l));
        }
        self.check_near(z, p)?;
        Ok(self.taylor(z, l, p))
    }

    /// Ξ, ∂_ζΞ, …, ∂_ζ^{lmax}Ξ at ζ = z in one pass, routed by the guard of
    /// the highest order.
    pub fn jet(&self, z: C64, lmax: usize) -> Result<Vec<Vec<C64>>> {
        let (p, d) = self.nearest(z);
        let n = self.n();
        let mut out = vec![vec![C64::new(0.0, 0.0); n]; lmax + 1];
        let f = |l: usize| C64::new(0.0, -factorial(l) / (2.0 * PI));
        if d >= self.guard_for(lmax) {
            let w = self.winding(z)?;
            if w != 1 {
                return Err(SurfError::NotAdmissible(w));
            }
            for j in 0..self.mu.len() {
                let inv = 1.0 / (self.mu[j] - z);
                let mut kern = self.dw[j] * inv;
                for row in out.iter_mut() {
                    for (k, t) in self.traces.iter().enumerate() {
                        row[k] += t[j] * kern;
                    }
                    kern *= inv;
                }
            }
            for (l, row) in out.iter_mut().enumerate() {
                row.iter_mut().for_each(|v| *v *= f(l));
            }
            return Ok(out);
        }
        if d == 0.0 && lmax == 0 {
            return Ok(vec![self.trace_at(p)]);
        }
        self.check_near(z, p)?;
        let m0 = self.mu[p];
        let tiny = 1e-14 * (1.0 + m0.norm());
        let x = z - m0;
        for (k, (coef, t)) in self.taylor.iter().zip(&self.traces).enumerate() {
            let a = &coef[p];
            let poly = |y: C64| ((a[3] * y + a[2]) * y + a[1]) * y + a[0];
            let mut rem = vec![C64::new(0.0, 0.0); lmax + 1];
            for j in 0..self.mu.len() {
                let dj = self.mu[j] - z;
                if dj.norm() <= tiny {
                    continue;
                }
                let inv = 1.0 / dj;
                let mut kern = (t[j] - poly(self.mu[j] - m0)) * self.dw[j] * inv;
                for r in rem.iter_mut() {
                    *r += kern;
                    kern *= inv;
                }
            }
            for (l, r) in rem.into_iter().enumerate() {
                let mut head = C64::new(0.0, 0.0);
                for m in l..=TAYLOR_ORDER {
                    head += a[m] * (factorial(m) / factorial(m - l)) * x.powu((m - l) as u32);
                }
                out[l][k] = head + f(l) * r;
            }
        }
        Ok(out)
    }

    /// A near point must lie on the inner side of its nearest node and that
    /// side must have winding one just beyond the guard.
    fn check_near(&self, z: C64, p: usize) -> Result<()> {
        let n = self.normal(p);
        let side = ((z - self.mu[p]) * n.conj()).re;
        if side < -1e-12 * (1.0 + z.norm()) {
            return Err(SurfError::NotAdmissible(0));
        }
        let probe = self.mu[p] + n * (1.5 * self.guard);
        match self.winding(probe) {
            Ok(1) => Ok(()),
            Ok(w) => Err(SurfError::NotAdmissible(w)),
            Err(_) => Err(SurfError::QuadratureDegraded(self.nearest(probe).1)),
        }
    }
}

/// Point of the embedded image over an admissible pair (ξ̂, z).
pub fn gap_point(spec: &EmbeddingSpec, direction: &[C64], z: C64) -> Result<Vec<C64>> {
    gap_derivative(spec, direction, z, 0)
}

/// ∂_z^l Ξ by Cauchy's differentiation formula with plain quadrature.
pub fn gap_derivative(spec: &EmbeddingSpec, direction: &[C64], z: C64, l: usize) -> Result<Vec<C64>> {
    let p = Projection::new(spec, direction)?;
    let (_, d) = p.nearest(z);
    let w = p.winding(z).map_err(|_| SurfError::QuadratureDegraded(d))?;
    if w != 1 {
        return Err(SurfError::NotAdmissible(w));
    }
    if d < p.guard_for(l) {
        return Err(SurfError::QuadratureDegraded(d));
    }
    Ok(p.plain(z, l))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::argument_principle::spec::mobius_position;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn circle(k: i32, n: usize) -> ComplexBoundaryFunction {
        let g = Arc::new(BoundaryGrid::unit_circle(n).unwrap());
        BoundaryFunction::from_fn(g, move |_, s| C64::from_polar(1.0, k as f64 * s))
    }

    #[test]
    fn winding_numbers_of_circles() {
        assert_eq!(winding_number(&circle(1, 64), c(0.0, 0.0)).unwrap(), 1);
        assert_eq!(winding_number(&circle(1, 64), c(2.0, 0.0)).unwrap(), 0);
        assert_eq!(winding_number(&circle(2, 128), c(0.3, 0.0)).unwrap(), 2);
        assert!(matches!(winding_number(&circle(1, 64), c(0.99, 0.0)), Err(SurfError::TooCloseToCurve(_))));
    }

    #[test]
    fn winding_on_the_doubled_grid_adds_over_components() {
        let s = EmbeddingSpec::mobius_cover(2.0, 256).unwrap();
        let mu = s.project(&[c(1.0, 0.0), c(0.0, -1.0)]).unwrap();
        // Inside the image annulus, outside it, and inside the hole.
        assert_eq!(winding_number(&mu, c(2.5, 0.0)).unwrap(), 1);
        assert_eq!(winding_number(&mu, c(5.0, 0.0)).unwrap(), 0);
        assert_eq!(winding_number(&mu, c(0.2, 0.0)).unwrap(), 0);
    }

    #[test]
    fn disk_identity_reproduces_the_point() {
        let s = EmbeddingSpec::disk_identity(128).unwrap();
        let x = gap_point(&s, &[c(1.0, 0.0)], c(0.3, 0.0)).unwrap();
        assert!((x[0] - 0.3).norm() < 1e-14);
        let d1 = gap_derivative(&s, &[c(1.0, 0.0)], c(0.1, 0.2), 1).unwrap();
        assert!((d1[0] - 1.0).norm() < 1e-13);
        let d2 = gap_derivative(&s, &[c(1.0, 0.0)], c(0.1, 0.2), 2).unwrap();
        assert!(d2[0].norm() < 1e-12);
    }

    #[test]
    fn constant_component_is_reconstructed_exactly() {
        let g = Arc::new(BoundaryGrid::unit_circle(128).unwrap());
        let s = EmbeddingSpec::from_maps(g, |_, s| C64::from_polar(1.0, s), &[&|z| z, &|_| c(1.0, 0.0)], false).unwrap();
        let x = gap_point(&s, &[c(1.0, 0.0), c(0.0, 0.0)], c(-0.2, 0.4)).unwrap();
        assert!((x[1] - 1.0).norm() < 1e-14);
    }

    #[test]
    fn mobius_point_and_derivative_match_the_maps() {
        let r = 2.0;
        let s = EmbeddingSpec::mobius_cover(r, 1024).unwrap();
        let dir = [c(1.0, 0.0), c(0.0, -1.0)];
        let zs = c(1.3, 0.0);
        let x = gap_point(&s, &dir, 2.0 * zs).unwrap();
        assert!((x[0] - (zs - 1.0 / zs)).norm() < 1e-8);
        assert!((x[1] - C64::i() * (zs + 1.0 / zs)).norm() < 1e-8);
        // Chain rule: dΞ/dζ = w'(z)/2 since ζ = 2z.
        let d = gap_derivative(&s, &dir, 2.0 * zs, 1).unwrap();
        let w1p = 1.0 + 1.0 / (zs * zs);
        let w2p = C64::i() * (1.0 - 1.0 / (zs * zs));
        assert!((d[0] - w1p / 2.0).norm() < 1e-6);
        assert!((d[1] - w2p / 2.0).norm() < 1e-6);
        assert!((d[1] / d[0] - w2p / w1p).norm() < 1e-6);
        // w₁ alone folds the band onto itself twice.
        let e = gap_point(&s, &[c(1.0, 0.0), c(0.0, 0.0)], zs - 1.0 / zs).unwrap_err();
        assert!(matches!(e, SurfError::NotAdmissible(2)));
    }

    #[test]
    fn two_directions_agree() {
        let s = EmbeddingSpec::mobius_cover(2.0, 1024).unwrap();
        let zs = C64::from_polar(1.4, 0.7);
        let mut pts = Vec::new();
        for dir in [[c(1.0, 0.0), c(0.0, -1.0)], [c(1.0, 0.0), c(0.3, -1.0)]] {
            let zeta = dir[0] * (zs - 1.0 / zs) + dir[1] * C64::i() * (zs + 1.0 / zs);
            pts.push(gap_point(&s, &dir, zeta).unwrap());
        }
        for k in 0..2 {
            assert!((pts[0][k] - pts[1][k]).norm() < 1e-9);
        }
    }

    #[test]
    fn near_boundary_disk_chart_beats_plain_quadrature() {
        let s = EmbeddingSpec::disk_identity(256).unwrap();
        let p = Projection::new(&s, &[c(1.0, 0.0)]).unwrap();
        for rho in [0.01, 0.02, 0.05] {
            for node in [0usize, 37, 101] {
                let z = p.mu[node] + p.normal(node) * rho;
                let t = p.taylor(z, 0, node)[0];
                assert!((t - z).norm() < 1e-7, "rho {rho}: {}", (t - z).norm());
                let e = p.evaluate(z, 0).unwrap()[0];
                assert!((e - z).norm() < 1e-7);
                let d1 = p.evaluate(z, 1).unwrap()[0];
                assert!((d1 - 1.0).norm() < 1e-6);
            }
        }
        let z = p.mu[5] + p.normal(5) * 0.01;
        assert!((p.plain(z, 0)[0] - z).norm() > 1e-4);
        assert_eq!(p.evaluate(p.mu[9], 0).unwrap()[0], s.traces[0].values[9]);
    }

    #[test]
    fn jet_agrees_with_single_orders() {
        let s = EmbeddingSpec::mobius_cover(2.0, 512).unwrap();
        let p = Projection::new(&s, &[c(1.0, 0.0), c(0.0, -1.0)]).unwrap();
        for zeta in [c(2.6, 0.4), p.mu[17] + p.normal(17) * 0.03, p.mu[40]] {
            let j = p.jet(zeta, 2).unwrap();
            for l in 0..3 {
                let e = p.evaluate(zeta, l).unwrap();
                for k in 0..2 {
                    assert!((j[l][k] - e[k]).norm() < 1e-9 * (1.0 + e[k].norm()), "l={l}");
                }
            }
        }
    }

    #[test]
    fn mobius_near_boundary_matches_the_maps() {
        let r = 2.0;
        let s = EmbeddingSpec::mobius_cover(r, 1024).unwrap();
        let p = Projection::new(&s, &[c(1.0, 0.0), c(0.0, -1.0)]).unwrap();
        for node in [0usize, 300, 1024 + 77] {
            for rho in [0.02, 0.05] {
                let zeta = p.mu[node] + p.normal(node) * rho;
                let z = zeta / 2.0;
                let x = p.evaluate(zeta, 0).unwrap();
                assert!((x[0] - (z - 1.0 / z)).norm() < 1e-6);
                assert!((x[1] - C64::i() * (z + 1.0 / z)).norm() < 1e-6);
            }
        }
        let (cidx, i) = s.grid().locate(1024 + 5);
        let outside = 2.0 * mobius_position(r, cidx, s.grid().s(cidx, i)) * 0.97;
        assert!(p.evaluate(outside, 0).is_err());
    }
}
