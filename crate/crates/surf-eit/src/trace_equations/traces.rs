//! Traces of (symmetric) holomorphic functions from a real boundary part.
//!
//! With v = JΛf + C_j on loop j the imaginary part of the trace satisfies
//! 𝔑(f) = Σ C_j (1_j∂_γf + Λ(1_j·JΛf)) + ½Λ(C²) in the non-orientable case
//! and 𝔇f + Σ C_jΛ1_j = 0 in the orientable one. On a connected boundary
//! the first reduces to 𝔑(f) = c_f𝔇f and the second to 𝔇f = 0.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::maps::AdmissibleMapHandle;
use super::nullspace::NullSpaceBasis;
use super::operators::{d_terms, frak_d, frak_n, j_lambda};
use super::transfer::{transfer_y, TransferConfig};
use crate::boundary_calculus::{BoundaryFunction, BoundaryGrid, ComplexBoundaryFunction, DNMatrix};
use crate::error::{Result, SurfError};

type Bf = BoundaryFunction<f64>;

/// Relative size of max|𝔇f| below which the ratio is refused.
pub const DENOMINATOR_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct CRatio {
    pub value: f64,
    pub pointwise: f64,
    pub least_squares: f64,
    /// Pointwise and least-squares values differ by more than 10%.
    pub fallback: bool,
}

fn is_constant(f: &Bf) -> bool {
    let (lo, hi) = f.values.iter().fold((f64::MAX, f64::MIN), |(a, b), &v| (a.min(v), b.max(v)));
    hi - lo <= 1e-12 * (1.0 + f.sup_norm())
}

/// c_f = 𝔑(f)/𝔇f at the node of largest |𝔇f|, with the least-squares value as fallback.
pub fn c_ratio_detailed(lambda: &DNMatrix, f: &Bf) -> Result<CRatio> {
    if is_constant(f) {
        return Ok(CRatio { value: 0.0, pointwise: 0.0, least_squares: 0.0, fallback: false });
    }
    let [df, ljl] = d_terms(lambda, f)?;
    let d = &df + &ljl;
    let i = d.max_abs_index();
    let dmax = d.values[i].abs();
    if dmax <= DENOMINATOR_TOL * (df.sup_norm() + ljl.sup_norm()) {
        return Err(SurfError::DenominatorDegenerate(dmax));
    }
    let n = frak_n(lambda, f)?;
    let pointwise = n.values[i] / d.values[i];
    let least_squares = n.inner(&d) / d.inner(&d);
    let fallback = (pointwise - least_squares).abs() > 0.1 * least_squares.abs().max(pointwise.abs());
    Ok(CRatio { value: if fallback { least_squares } else { pointwise }, pointwise, least_squares, fallback })
}

pub fn c_ratio(lambda: &DNMatrix, f: &Bf) -> Result<f64> {
    Ok(c_ratio_detailed(lambda, f)?.value)
}

fn indicator(grid: &Arc<BoundaryGrid>, j: usize) -> Bf {
    BoundaryFunction::from_fn(grid.clone(), |c, _| if c == j { 1.0 } else { 0.0 })
}

/// Minimum-norm least-squares coefficients of `target` on `cols` (weighted L²).
fn fit(target: &Bf, cols: &[Bf]) -> Vec<f64> {
    let w: Vec<f64> = target.grid.weights().iter().map(|w| w.sqrt()).collect();
    let a = DMatrix::from_fn(w.len(), cols.len(), |i, j| cols[j].values[i] * w[i]);
    let b = DVector::from_iterator(w.len(), target.values.iter().zip(&w).map(|(v, w)| v * w));
    let svd = a.svd(true, true);
    let eps = 1e-10 * svd.singular_values.max();
    svd.solve(&b, eps).map(|x| x.as_slice().to_vec()).unwrap_or_else(|_| vec![0.0; cols.len()])
}

/// Per-loop constants C_j of the imaginary part JΛf + C_j.
pub fn trace_constants(lambda: &DNMatrix, f: &Bf, orientable: bool) -> Result<Vec<f64>> {
    let g = &lambda.grid;
    let b = g.component_count();
    if orientable {
        if b == 1 {
            return Ok(vec![0.0]);
        }
        let cols: Vec<Bf> = (0..b).map(|j| lambda.apply_unchecked(&indicator(g, j))).collect();
        let c = fit(&-frak_d(lambda, f)?, &cols);
        // Σ Λ1_j = 0 leaves a common shift free; fix C_0 = 0.
        return Ok(c.iter().map(|x| x - c[0]).collect());
    }
    if b == 1 {
        return Ok(vec![c_ratio(lambda, f)?]);
    }
    if is_constant(f) {
        return Ok(vec![0.0; b]);
    }
    let df = f.derivative();
    let jlf = j_lambda(lambda, f)?;
    let mut cols: Vec<Bf> = (0..b)
        .map(|j| {
            let ind = indicator(g, j);
            &ind * &df + lambda.apply_unchecked(&(&ind * &jlf))
        })
        .collect();
    cols.extend((0..b).map(|j| lambda.apply_unchecked(&indicator(g, j))));
    Ok(fit(&frak_n(lambda, f)?, &cols)[..b].to_vec())
}

/// Real part, loop constants, imaginary part h on Υ and the assembled trace η.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SymmetricTraceData {
    pub f: Bf,
    pub constants: Vec<f64>,
    pub h: Bf,
    pub eta: ComplexBoundaryFunction,
}

impl SymmetricTraceData {
    /// h = σ((JΛf)∘π + C) on the doubled grid of Λ.
    pub fn new(lambda: &DNMatrix, f: &Bf, constants: Vec<f64>) -> Result<Self> {
        f.same_grid(&lambda.grid)?;
        let v = imaginary(lambda, f, &constants)?;
        let upsilon = Arc::new(lambda.grid.doubled());
        let sigma = upsilon.sigma();
        let lifted = v.lift(upsilon.clone());
        let h = BoundaryFunction {
            grid: upsilon.clone(),
            values: lifted.values.iter().zip(&sigma).map(|(v, s)| v * s).collect(),
        };
        let eta = ComplexBoundaryFunction::from_parts(&f.lift(upsilon), &h);
        Ok(SymmetricTraceData { f: f.clone(), constants, h, eta })
    }

    /// Largest violation of h∘τ = −h and Re η∘τ = Re η.
    pub fn symmetry_defect(&self) -> f64 {
        let pair = self.h.grid.pairing().expect("doubled grid");
        pair.iter()
            .enumerate()
            .map(|(i, &j)| {
                let dh = (self.h.values[i] + self.h.values[j]).abs();
                let dr = (self.eta.values[i].re - self.eta.values[j].re).abs();
                dh.max(dr)
            })
            .fold(0.0, f64::max)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// JΛf + C_j on loop j.
fn imaginary(lambda: &DNMatrix, f: &Bf, constants: &[f64]) -> Result<Bf> {
    let jlf = j_lambda(lambda, f)?;
    let g = jlf.grid.clone();
    Ok(BoundaryFunction::from_fn(g.clone(), |c, _| constants[c]) + jlf)
}

/// Symmetric trace of a null-set element of a non-orientable surface.
pub fn symmetric_trace(lambda: &DNMatrix, f: &Bf) -> Result<SymmetricTraceData> {
    let c = trace_constants(lambda, f, false)?;
    SymmetricTraceData::new(lambda, f, c)
}

/// Trace η = f + i(JΛf + C_j) of a holomorphic function with real part f on an orientable surface.
pub fn orientable_trace_solve(lambda: &DNMatrix, f: &Bf, tol: f64) -> Result<ComplexBoundaryFunction> {
    f.same_grid(&lambda.grid)?;
    let handle = AdmissibleMapHandle::new(lambda.clone(), true);
    let rel = handle.relative(f)?;
    if rel > tol {
        return Err(SurfError::NotInKernel(rel));
    }
    let c = trace_constants(lambda, f, true)?;
    let v = imaginary(lambda, f, &c)?;
    Ok(ComplexBoundaryFunction::from_parts(f, &v))
}

/// η' for Λ' built from the transferred real part f' = 𝔜(f).
pub fn transfer_trace(
    lambda_new: &DNMatrix,
    g: &AdmissibleMapHandle,
    basis: &NullSpaceBasis,
    data: &SymmetricTraceData,
    cfg: &TransferConfig,
) -> Result<SymmetricTraceData> {
    let g_new = AdmissibleMapHandle { lambda: lambda_new.clone(), ..g.clone() };
    let moved = transfer_y(g, &g_new, basis, &data.f, cfg)?;
    let rel = g_new.relative(&moved.f)?;
    if rel > cfg.tol_null {
        return Err(SurfError::NotInKernel(rel));
    }
    if lambda_new.matrix == g.lambda.matrix && moved.f == data.f {
        return Ok(data.clone());
    }
    let c = trace_constants(lambda_new, &moved.f, false)?;
    SymmetricTraceData::new(lambda_new, &moved.f, c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boundary_calculus::ModeBasis;
    use crate::forward_models::{dn_annulus, dn_disk, dn_mobius, AnnulusBoundary};
    use num_complex::Complex64;

    #[test]
    fn constants_have_zero_ratio() {
        let l = dn_mobius(2.0, 64).unwrap();
        assert_eq!(c_ratio(&l, &BoundaryFunction::constant(l.grid.clone(), 3.0)).unwrap(), 0.0);
    }

    #[test]
    fn ratio_is_degree_one_and_vanishes_on_the_mobius_band() {
        let l = dn_mobius(2.0, 128).unwrap();
        let basis = ModeBasis::new(l.grid.clone(), 5);
        let f = basis.synthesize(&(0..basis.len()).map(|j| ((j * 5 + 2) % 7) as f64 - 3.0).collect::<Vec<_>>());
        let c1 = c_ratio(&l, &f).unwrap();
        let c2 = c_ratio(&l, &f.scale(2.0)).unwrap();
        assert!((c2 - 2.0 * c1).abs() <= 1e-8 * (1.0 + c1.abs()));
        // Symmetric holomorphic functions on the band have real constant parts only.
        assert!(c1.abs() < 1e-10 * f.sup_norm());
    }

    #[test]
    fn mobius_trace_of_z_minus_inverse() {
        let r = 2.0;
        let l = dn_mobius(r, 128).unwrap();
        let f = BoundaryFunction::from_fn(l.grid.clone(), |_, s| (r - 1.0 / r) * (s / r).cos());
        let d = symmetric_trace(&l, &f).unwrap();
        let half = l.grid.node_count();
        for i in 0..half {
            let y = l.grid.s(0, i) / r;
            assert!((d.h.values[i] - (r + 1.0 / r) * y.sin()).abs() < 1e-10);
        }
        assert!(d.symmetry_defect() < 1e-12);
    }

    #[test]
    fn disk_cosine_gives_exponential() {
        let l = dn_disk(64).unwrap();
        let f = BoundaryFunction::from_fn(l.grid.clone(), |_, s| s.cos());
        let eta = orientable_trace_solve(&l, &f, 1e-8).unwrap();
        for (i, z) in eta.values.iter().enumerate() {
            let s = l.grid.s(0, i);
            assert!((z - Complex64::from_polar(1.0, s)).norm() < 1e-12);
        }
        let c = BoundaryFunction::constant(l.grid.clone(), 1.5);
        let eta = orientable_trace_solve(&l, &c, 1e-8).unwrap();
        let e = eta.values.iter().map(|z| (z - 1.5).norm()).fold(0.0, f64::max);
        assert!(e < 1e-13, "{e}");
    }

    #[test]
    fn annulus_real_part_of_z() {
        let rho = 0.5;
        let l = dn_annulus(rho, 128, AnnulusBoundary::Both).unwrap();
        // Inner loop runs counterclockwise with ∂_γ = −d/ds; x = ρ cos θ, θ = s/ρ.
        let f = BoundaryFunction::from_fn(l.grid.clone(), |c, s| if c == 0 { s.cos() } else { rho * (s / rho).cos() });
        let eta = orientable_trace_solve(&l, &f, 1e-8).unwrap();
        for i in 0..l.grid.node_count() {
            let (c, j) = l.grid.locate(i);
            let s = l.grid.s(c, j);
            let z = if c == 0 { Complex64::from_polar(1.0, s) } else { Complex64::from_polar(rho, s / rho) };
            assert!((eta.values[i] - z).norm() < 1e-10, "node {i}: {} vs {z}", eta.values[i]);
        }
    }

    #[test]
    fn non_kernel_input_is_rejected() {
        let l = dn_mobius(2.0, 64).unwrap();
        let f = BoundaryFunction::from_fn(l.grid.clone(), |_, s| (s / 2.0).cos());
        assert!(matches!(orientable_trace_solve(&l, &f, 1e-6), Err(SurfError::NotInKernel(_))));
    }
}
