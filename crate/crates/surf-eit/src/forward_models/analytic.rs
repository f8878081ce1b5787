//! Closed-form DN maps from separation of variables.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::boundary_calculus::{BoundaryFunction, BoundaryGrid, DNMatrix, Provenance};
use crate::error::{Result, SurfError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AnnulusBoundary {
    /// Γ = both circles, Dirichlet data on each.
    Both,
    /// Γ = outer circle, homogeneous Neumann condition on the inner one.
    OuterWithInnerNeumann,
}

/// Λ of the unit disk: k ↦ |k|.
pub fn dn_disk(n: usize) -> Result<DNMatrix> {
    let grid = Arc::new(BoundaryGrid::unit_circle(n)?);
    Ok(DNMatrix::from_mode_blocks(grid, n / 2 - 1, |k| DMatrix::from_element(1, 1, k as f64), Provenance::Analytic))
}

/// Λ of the annulus ρ ≤ |z| ≤ 1 with `n` nodes on the outer circle and a
/// proportional (even, ≥ 16) count on the inner one when it belongs to Γ.
pub fn dn_annulus(rho: f64, n: usize, selection: AnnulusBoundary) -> Result<DNMatrix> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(SurfError::DegenerateParameters(format!("annulus inner radius {rho}")));
    }
    match selection {
        AnnulusBoundary::OuterWithInnerNeumann => {
            let grid = Arc::new(BoundaryGrid::unit_circle(n)?);
            let block = |k: usize| {
                let q2 = rho.powi(2 * k as i32);
                DMatrix::from_element(1, 1, k as f64 * (1.0 - q2) / (1.0 + q2))
            };
            Ok(DNMatrix::from_mode_blocks(grid, n / 2 - 1, block, Provenance::Analytic))
        }
        AnnulusBoundary::Both => {
            let grid = Arc::new(BoundaryGrid::new(&[(2.0 * PI, n), (2.0 * PI * rho, n)])?);
            dn_annulus_on(grid, rho)
        }
    }
}

/// Two-boundary annulus Λ on a given grid (outer loop first), e.g. one read
/// off a mesh; modes are truncated at the coarser loop.
pub fn dn_annulus_on(grid: Arc<BoundaryGrid>, rho: f64) -> Result<DNMatrix> {
    if grid.component_count() != 2 {
        return Err(SurfError::GridMismatch("annulus grid needs two loops".into()));
    }
    if grid.loops[1].orientation > 0.0 {
        // The inner circle is traversed clockwise as part of ∂M.
        let mut g = (*grid).clone();
        g.loops[1].orientation = -1.0;
        return dn_annulus_on(Arc::new(g), rho);
    }
    let kmax = grid.loops.iter().map(|l| l.nodes / 2 - 1).min().unwrap_or(0);
    Ok(DNMatrix::from_mode_blocks(grid, kmax, |k| annulus_block(rho, k), Provenance::Analytic))
}

/// 2×2 map from angular Dirichlet coefficients (outer, inner) to outward
/// normal derivatives with respect to arc length.
pub fn annulus_block(rho: f64, k: usize) -> DMatrix<f64> {
    if k == 0 {
        let l = rho.ln();
        return DMatrix::from_row_slice(2, 2, &[-1.0 / l, 1.0 / l, 1.0 / (rho * l), -1.0 / (rho * l)]);
    }
    let kf = k as f64;
    let q = rho.powi(k as i32);
    let c = kf / (1.0 - q * q);
    DMatrix::from_row_slice(2, 2, &[c * (1.0 + q * q), -2.0 * c * q, -2.0 * c * q / rho, c * (1.0 + q * q) / rho])
}

/// Eigenvalue of the Möbius band Λ on angular mode k (boundary |z| = R).
pub fn mobius_eigenvalue(r: f64, k: usize) -> f64 {
    if k == 0 {
        return 0.0;
    }
    let t = (k as f64 * r.ln()).tanh();
    let kf = k as f64;
    if k % 2 == 0 {
        kf / r * t
    } else {
        kf / r / t
    }
}

/// Λ of the Möbius band {1/R ≤ |z| ≤ R}/(z ∼ −1/z̄), boundary length 2πR.
pub fn dn_mobius(r: f64, n: usize) -> Result<DNMatrix> {
    if !(r > 1.0) {
        return Err(SurfError::DegenerateParameters(format!("Möbius radius R = {r} must exceed 1")));
    }
    let grid = Arc::new(BoundaryGrid::circle(2.0 * PI * r, n)?);
    Ok(DNMatrix::from_mode_blocks(
        grid,
        n / 2 - 1,
        |k| DMatrix::from_element(1, 1, mobius_eigenvalue(r, k)),
        Provenance::Analytic,
    ))
}

/// Harmonic extension of boundary data `f` (on |z| = R) into the annulus,
/// evaluated at `z`; symmetric under z ↦ −1/z̄.
pub fn mobius_interior_solution(r: f64, f: &BoundaryFunction<f64>, z: Complex64) -> f64 {
    let l = r.ln();
    let x = z.norm().ln();
    let theta = z.arg();
    let coeffs = f.fourier(0);
    let n = coeffs.len();
    let mut u = coeffs[0].re;
    for k in 1..n / 2 {
        let kf = k as f64;
        let radial = if k % 2 == 0 { (kf * x).cosh() / (kf * l).cosh() } else { (kf * x).sinh() / (kf * l).sinh() };
        // Real data: c₋ₖ = conj(cₖ).
        u += 2.0 * (coeffs[k] * Complex64::from_polar(1.0, kf * theta)).re * radial;
    }
    u
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boundary_calculus::{BoundaryFunction, ModeBasis};

    #[test]
    fn disk_modes_are_separation_of_variables_eigenvalues() {
        let l = dn_disk(64).unwrap();
        let g = l.grid.clone();
        for k in [1usize, 3, 7] {
            let f = BoundaryFunction::from_fn(g.clone(), |_, s| (k as f64 * s).cos());
            let out = l.apply(&f).unwrap();
            let err = (&out - &f.scale(k as f64)).sup_norm();
            assert!(err < 1e-11, "k={k} err={err}");
        }
        let one = BoundaryFunction::constant(g, 1.0);
        assert!(l.apply(&one).unwrap().sup_norm() < 1e-12);
    }

    #[test]
    fn annulus_zero_mode_matches_log_solution() {
        // Outer datum 1, inner datum 0: u = 1 − log r / log ρ.
        let rho: f64 = 0.5;
        let b = annulus_block(rho, 0);
        assert!((b[(0, 0)] + 1.0 / rho.ln()).abs() < 1e-14);
        assert!((b[(1, 0)] - 1.0 / (rho * rho.ln())).abs() < 1e-14);
        let lam = dn_annulus(rho, 32, AnnulusBoundary::Both).unwrap();
        assert!(lam.constant_defect() < 1e-12);
        assert!(lam.flux_defect() < 1e-12);
        assert!(lam.l2_asymmetry() < 1e-12);
    }

    #[test]
    fn annulus_outer_entry_tends_to_disk() {
        let b = annulus_block(0.05, 20);
        assert!((b[(0, 0)] - 20.0).abs() < 1e-12);
        let n = dn_annulus(0.05, 64, AnnulusBoundary::OuterWithInnerNeumann).unwrap();
        assert!((n.mode_value(0, 20) - 20.0).abs() < 1e-10);
    }

    #[test]
    fn mobius_interior_solution_is_tau_symmetric() {
        let r = 2.0;
        let lam = dn_mobius(r, 64).unwrap();
        let basis = ModeBasis::new(lam.grid.clone(), 5);
        let coeffs: Vec<f64> = (0..basis.len()).map(|j| ((j * 7 + 3) % 5) as f64 - 2.0).collect();
        let f = basis.synthesize(&coeffs);
        for (rad, th) in [(1.3, 0.2), (0.7, 2.0), (1.9, -1.1), (1.0, 0.5)] {
            let z = Complex64::from_polar(rad, th);
            let tz = -1.0 / z.conj();
            let d = mobius_interior_solution(r, &f, z) - mobius_interior_solution(r, &f, tz);
            assert!(d.abs() < 1e-12, "{d}");
        }
        // Boundary values are reproduced.
        let z = Complex64::from_polar(r, 0.0);
        assert!((mobius_interior_solution(r, &f, z) - f.values[0]).abs() < 1e-12);
    }

    #[test]
    fn mobius_normal_derivative_matches_finite_difference() {
        let r = 2.0;
        let lam = dn_mobius(r, 64).unwrap();
        for k in [1usize, 2, 3] {
            let f = BoundaryFunction::from_fn(lam.grid.clone(), |_, s| (k as f64 * s / r).cos());
            let h = 1e-5;
            let du = (mobius_interior_solution(r, &f, Complex64::new(r, 0.0))
                - mobius_interior_solution(r, &f, Complex64::new(r - h, 0.0)))
                / h;
            let lk = lam.apply(&f).unwrap().values[0];
            assert!((du - lk).abs() < 1e-4 * (1.0 + lk.abs()), "k={k}: {du} vs {lk}");
        }
    }
}
