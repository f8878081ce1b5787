//! Spectral calculus on the boundary circles.
//!
//! Functions live on equispaced arc-length grids, one periodic loop per
//! boundary component. Derivatives and the antiderivative J are Fourier
//! multipliers per loop; only a [`DNMatrix`] couples different loops.

pub mod basis;
pub mod dn;
pub mod function;
pub mod grid;

pub use basis::{Mode, ModeBasis, ModeKind};
pub use dn::{op_norm_h1_l2, spectral_norm, write_function_csv, DNMatrix, Provenance};
pub use function::{fft_coeffs, ifft_values, mode_index, BoundaryFunction, ComplexBoundaryFunction, Sample};
pub use grid::{BoundaryGrid, Loop};

use crate::error::Result;

/// ∂_γ f.
pub fn derivative_gamma<T: Sample>(f: &BoundaryFunction<T>) -> BoundaryFunction<T> {
    f.derivative()
}

/// J f, the zero-mean antiderivative.
pub fn integrate_j<T: Sample>(f: &BoundaryFunction<T>) -> Result<BoundaryFunction<T>> {
    f.integrate_j()
}

/// Λ f.
pub fn apply_dn(lambda: &DNMatrix, f: &BoundaryFunction<f64>) -> Result<BoundaryFunction<f64>> {
    lambda.apply(f)
}

/// max_{j ≤ l} sup |∂_γ^j f|.
pub fn cl_norm<T: Sample>(f: &BoundaryFunction<T>, l: usize) -> f64 {
    f.cl_norm(l)
}

/// Default Fourier cutoff for operator norms.
pub const OP_NORM_KMAX: usize = 32;
