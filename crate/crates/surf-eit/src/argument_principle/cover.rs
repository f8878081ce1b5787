//! Cylinder covers of the reconstructed image.
//!
//! One projective direction is searched for whose projected boundary curve
//! is immersed and bounds a region of winding one. Interior cylinders are
//! disks kept away from the curve; boundary cylinders are windows of the
//! curve carrying normal coordinates (s, ρ) ↦ μ(s) + ρ·n(s), ρ ∈ [0, ρ₀).

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::gap::Projection;
use super::spec::EmbeddingSpec;
use crate::error::{Result, SurfError};

type C64 = Complex64;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CoverConfig {
    /// Requested strip width ρ₀ in the projected plane.
    pub rho0: f64,
    /// Jacobian bound c₀ as a fraction of the smallest boundary speed.
    pub c0_fraction: f64,
    pub random_directions: usize,
    pub seed: u64,
    pub max_cylinders: usize,
    /// Halvings of ρ₀ tried before giving up on the strip.
    pub refinements: usize,
}

impl Default for CoverConfig {
    fn default() -> Self {
        CoverConfig { rho0: 0.15, c0_fraction: 0.5, random_directions: 32, seed: 11, max_cylinders: 4096, refinements: 3 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum CylinderKind {
    Interior,
    Boundary {
        component: usize,
        /// First global node of the window and its length.
        start: usize,
        len: usize,
        rho0: f64,
        /// Smallest |μ'|(1 − ρκ) over the strip.
        min_jacobian: f64,
    },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Cylinder {
    pub direction: Vec<C64>,
    pub center: C64,
    pub radius: f64,
    pub kind: CylinderKind,
    /// Distance from the disk to the curve (interior) or ρ₀ (boundary).
    pub margin: f64,
}

/// A lattice point kept for interior sampling.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct LatticePoint {
    pub zeta: C64,
    pub clearance: f64,
    pub cylinder: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Cover {
    pub direction: Vec<C64>,
    pub rho0: f64,
    pub spacing: f64,
    pub cylinders: Vec<Cylinder>,
    pub interior: Vec<LatticePoint>,
    /// Directions tried before the accepted one, with the reason.
    pub rejected: Vec<(Vec<C64>, String)>,
}

impl Cover {
    pub fn interior_count(&self) -> usize {
        self.cylinders.iter().filter(|c| c.kind == CylinderKind::Interior).count()
    }

    pub fn boundary_count(&self) -> usize {
        self.cylinders.len() - self.interior_count()
    }
}

/// Axes, then e_j ± i e_k, then random unit directions.
pub fn candidate_directions(n: usize, random: usize, seed: u64) -> Vec<Vec<C64>> {
    let zero = C64::new(0.0, 0.0);
    let mut out = Vec::new();
    for k in 0..n {
        let mut d = vec![zero; n];
        d[k] = C64::new(1.0, 0.0);
        out.push(d);
    }
    let h = std::f64::consts::FRAC_1_SQRT_2;
    for j in 0..n {
        for k in j + 1..n {
            for sign in [-1.0, 1.0] {
                let mut d = vec![zero; n];
                d[j] = C64::new(h, 0.0);
                d[k] = C64::new(0.0, sign * h);
                out.push(d);
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..random {
        let d: Vec<C64> = (0..n).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
        let norm = d.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        out.push(d.into_iter().map(|v| v / norm).collect());
    }
    out
}

struct Scan {
    points: Vec<(C64, f64)>,
}

/// Windings on a lattice of the given spacing; points too close to the
/// curve are skipped. Fails on any winding outside {0, 1}.
fn scan(p: &Projection, spacing: f64) -> std::result::Result<Scan, String> {
    let (mut lo, mut hi) = (C64::new(f64::INFINITY, f64::INFINITY), C64::new(f64::NEG_INFINITY, f64::NEG_INFINITY));
    for m in &p.mu {
        lo = C64::new(lo.re.min(m.re), lo.im.min(m.im));
        hi = C64::new(hi.re.max(m.re), hi.im.max(m.im));
    }
    // Centred on the bounding box so symmetric images get symmetric lattices.
    let mid = (lo + hi) / 2.0;
    let hx = ((hi.re - lo.re) / (2.0 * spacing)).ceil() as i64;
    let hy = ((hi.im - lo.im) / (2.0 * spacing)).ceil() as i64;
    let nx = (2 * hx + 1) as usize;
    let ny = (2 * hy + 1) as usize;
    let cells = crate::par::map_range(nx * ny, |idx| {
        let (ix, iy) = ((idx % nx) as i64 - hx, (idx / nx) as i64 - hy);
        let z = mid + C64::new(ix as f64 * spacing, iy as f64 * spacing);
        let (_, d) = p.nearest(z);
        (z, d, p.winding(z).unwrap_or(0))
    });
    let mut points = Vec::new();
    for (z, d, w) in cells {
        if w == 1 {
            points.push((z, d));
        } else if w != 0 {
            return Err(format!("winding {w} at {z}"));
        }
    }
    if points.is_empty() {
        return Err("no point of winding one".into());
    }
    Ok(Scan { points })
}

/// Inward probes just beyond the guard must all have winding one.
fn probe_boundary(p: &Projection) -> std::result::Result<(), String> {
    let stride = (p.mu.len() / 256).max(1);
    for i in (0..p.mu.len()).step_by(stride) {
        let z = p.mu[i] + p.normal(i) * (1.5 * p.guard);
        match p.winding(z) {
            Ok(1) => {}
            Ok(w) => return Err(format!("inward probe at node {i} has winding {w}")),
            Err(e) => return Err(format!("inward probe at node {i}: {e}")),
        }
    }
    Ok(())
}

/// Signed curvature of the projected curve at every node.
fn curvature(p: &Projection) -> Vec<f64> {
    let d2 = p.curve().derivative().derivative();
    p.dmu.iter().zip(&d2.values).map(|(a, b)| (a.conj() * b).im / a.norm().powi(3)).collect()
}

/// Boundary windows with strip width rho0, or why the strip is singular.
fn boundary_cylinders(p: &Projection, rho0: f64, c0_fraction: f64) -> std::result::Result<Vec<Cylinder>, String> {
    let kappa = curvature(p);
    let speed: Vec<f64> = p.dmu.iter().map(|d| d.norm()).collect();
    let c0 = c0_fraction * speed.iter().cloned().fold(f64::INFINITY, f64::min);
    let grid = &p.grid;
    let mut out = Vec::new();
    for c in 0..grid.component_count() {
        let r = grid.range(c);
        let mean = speed[r.clone()].iter().sum::<f64>() / r.len() as f64;
        let per = ((2.0 * rho0 / (grid.spacing(c) * mean)).round() as usize).clamp(4, r.len());
        let windows = r.len().div_ceil(per);
        for w in 0..windows {
            let start = r.start + w * per;
            let len = per.min(r.end - start);
            let mut jac = f64::INFINITY;
            for i in start..start + len {
                let j = speed[i] * (1.0 - rho0 * kappa[i]).min(1.0);
                jac = jac.min(j);
                // The outer edge of the strip must stay clear of the curve.
                let z = p.mu[i] + p.normal(i) * rho0;
                let (_, d) = p.nearest(z);
                if d < 0.5 * rho0 {
                    return Err(format!("strip of width {rho0:e} meets the curve near node {i}"));
                }
            }
            if jac < c0 {
                return Err(format!("Jacobian {jac:e} below {c0:e} in window at node {start}"));
            }
            let mid = start + len / 2;
            let arc = speed[start..start + len].iter().sum::<f64>() * grid.spacing(c);
            out.push(Cylinder {
                direction: p.direction.clone(),
                center: p.mu[mid],
                radius: 0.5 * arc + rho0,
                kind: CylinderKind::Boundary { component: c, start, len, rho0, min_jacobian: jac },
                margin: rho0,
            });
        }
    }
    Ok(out)
}

/// Greedy disks over the lattice points with clearance ≥ 0.75ρ₀; every
/// disk keeps a margin of at least 0.375ρ₀ to the curve.
fn interior_cylinders(p: &Projection, pts: &[(C64, f64)], rho0: f64, first_id: usize) -> (Vec<Cylinder>, Vec<LatticePoint>) {
    let mut kept: Vec<LatticePoint> =
        pts.iter().filter(|(_, d)| *d >= 0.75 * rho0).map(|&(zeta, clearance)| LatticePoint { zeta, clearance, cylinder: usize::MAX }).collect();
    let mut order: Vec<usize> = (0..kept.len()).collect();
    order.sort_by(|&a, &b| kept[b].clearance.total_cmp(&kept[a].clearance).then(a.cmp(&b)));
    let mut cyl = Vec::new();
    for &i in &order {
        if kept[i].cylinder != usize::MAX {
            continue;
        }
        let center = kept[i].zeta;
        let radius = (kept[i].clearance - 0.375 * rho0).max(0.25 * rho0);
        let id = first_id + cyl.len();
        for q in kept.iter_mut() {
            if q.cylinder == usize::MAX && (q.zeta - center).norm() <= radius {
                q.cylinder = id;
            }
        }
        cyl.push(Cylinder { direction: p.direction.clone(), center, radius, kind: CylinderKind::Interior, margin: kept[i].clearance - radius });
    }
    (cyl, kept)
}

/// Finds a direction and builds the cover.
pub fn build_cylinder_cover(spec: &EmbeddingSpec, cfg: &CoverConfig) -> Result<Cover> {
    let mut rejected = Vec::new();
    let mut any_immersed = false;
    for dir in candidate_directions(spec.n(), cfg.random_directions, cfg.seed) {
        let p = match Projection::new(spec, &dir) {
            Ok(p) => p,
            Err(e) => {
                rejected.push((dir, e.to_string()));
                continue;
            }
        };
        any_immersed = true;
        if let Err(why) = probe_boundary(&p) {
            rejected.push((dir, why));
            continue;
        }
        let mut rho0 = cfg.rho0;
        let mut strip = boundary_cylinders(&p, rho0, cfg.c0_fraction);
        for _ in 0..cfg.refinements {
            if strip.is_ok() {
                break;
            }
            rho0 *= 0.5;
            strip = boundary_cylinders(&p, rho0, cfg.c0_fraction);
        }
        let boundary = strip.map_err(SurfError::ChartSingular)?;
        let spacing = 0.5 * rho0;
        let lattice = match scan(&p, spacing) {
            Ok(s) => s,
            Err(why) => {
                rejected.push((dir, why));
                continue;
            }
        };
        let (mut cylinders, interior) = interior_cylinders(&p, &lattice.points, rho0, 0);
        let offset = cylinders.len();
        cylinders.extend(boundary);
        if cylinders.len() > cfg.max_cylinders {
            return Err(SurfError::CoverageGap(format!("{} cylinders exceed the budget {}", cylinders.len(), cfg.max_cylinders)));
        }
        debug_assert!(interior.iter().all(|q| q.cylinder < offset));
        return Ok(Cover { direction: dir, rho0, spacing, cylinders, interior, rejected });
    }
    if !any_immersed {
        return Err(SurfError::ImmersionFailure);
    }
    Err(SurfError::CoverageGap(format!("no admissible direction among {} candidates", rejected.len())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boundary_calculus::BoundaryGrid;
    use std::sync::Arc;

    #[test]
    fn disk_needs_one_interior_cylinder() {
        let s = EmbeddingSpec::disk_identity(512).unwrap();
        let cfg = CoverConfig::default();
        let cover = build_cylinder_cover(&s, &cfg).unwrap();
        assert_eq!(cover.interior_count(), 1);
        // About 2π/(2ρ₀) windows.
        let expected = 2.0 * std::f64::consts::PI / (2.0 * cfg.rho0);
        let b = cover.boundary_count() as f64;
        assert!(b >= expected / 2.0 && b <= expected * 2.0, "{b}");
        assert!(cover.rejected.is_empty());
    }

    #[test]
    fn mobius_cover_rejects_folding_axes() {
        let s = EmbeddingSpec::mobius_cover(2.0, 1024).unwrap();
        let cover = build_cylinder_cover(&s, &CoverConfig::default()).unwrap();
        assert_eq!(cover.rejected.len(), 2);
        assert!(cover.interior_count() >= 1);
        assert!(cover.interior.iter().all(|q| q.clearance >= 0.75 * cover.rho0));
    }

    #[test]
    fn constant_coordinate_direction_is_skipped() {
        let g = Arc::new(BoundaryGrid::unit_circle(256).unwrap());
        let s = EmbeddingSpec::from_maps(g, |_, s| C64::from_polar(1.0, s), &[&|_| C64::new(1.0, 0.0), &|z| z], false).unwrap();
        let cover = build_cylinder_cover(&s, &CoverConfig::default()).unwrap();
        assert_eq!(cover.rejected.len(), 1);
        assert_eq!(cover.direction, vec![C64::new(0.0, 0.0), C64::new(1.0, 0.0)]);
    }

    #[test]
    fn constant_traces_are_not_immersed() {
        let g = Arc::new(BoundaryGrid::unit_circle(64).unwrap());
        let s = EmbeddingSpec::from_maps(g, |_, s| C64::from_polar(1.0, s), &[&|_| C64::new(1.0, 0.0)], false).unwrap();
        assert!(matches!(build_cylinder_cover(&s, &CoverConfig { random_directions: 2, ..Default::default() }), Err(SurfError::ImmersionFailure)));
    }
}
