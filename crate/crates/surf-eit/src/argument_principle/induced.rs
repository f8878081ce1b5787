//! Embeddings induced on a nearby surface by transferring traces.

use serde::{Deserialize, Serialize};

use super::spec::{EmbeddingSpec, SpecProvenance};
use crate::boundary_calculus::{BoundaryFunction, DNMatrix};
use crate::error::{Result, SurfError};
use crate::trace_equations::{orientable_trace_solve, symmetric_trace, transfer_trace, transfer_y, AdmissibleMapHandle, NullSpaceBasis, TransferConfig};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InducedEmbedding {
    pub spec: EmbeddingSpec,
    /// Σ_k ‖η'_k − η_k‖_{C⁰}.
    pub closeness: f64,
    /// Per coordinate, ‖f'_k − f_k‖_{C⁰} of the transferred real parts.
    pub real_shift: Vec<f64>,
    /// Per coordinate, ‖f'_k − f_k‖_{C⁴}.
    pub real_shift_c4: Vec<f64>,
}

/// Real part of a trace restricted to Γ (the Γ₊ half on doubled grids).
fn real_part_on(lambda: &DNMatrix, eta: &crate::boundary_calculus::ComplexBoundaryFunction) -> Result<BoundaryFunction<f64>> {
    let n = lambda.grid.node_count();
    if eta.grid.base().loops != lambda.grid.loops {
        return Err(SurfError::GridMismatch("embedding traces do not live over the grid of Λ".into()));
    }
    BoundaryFunction::new(lambda.grid.clone(), eta.values[..n].iter().map(|v| v.re).collect())
}

/// η'_k built from 𝔜(Re η_k) and Λ'. Λ' = Λ returns the spec unchanged.
pub fn induced_embedding(
    lambda: &DNMatrix,
    lambda_new: &DNMatrix,
    spec: &EmbeddingSpec,
    handle: &AdmissibleMapHandle,
    basis: &NullSpaceBasis,
    cfg: &TransferConfig,
) -> Result<InducedEmbedding> {
    lambda.grid.loops.iter().zip(&lambda_new.grid.loops).try_for_each(|(a, b)| {
        if a.nodes == b.nodes && a.length == b.length {
            Ok(())
        } else {
            Err(SurfError::GridMismatch("Λ and Λ' on different grids".into()))
        }
    })?;
    if lambda_new.matrix == lambda.matrix {
        return Ok(InducedEmbedding { spec: spec.clone(), closeness: 0.0, real_shift: vec![0.0; spec.n()], real_shift_c4: vec![0.0; spec.n()] });
    }
    let orientable = handle.orientable();
    if orientable == spec.symmetric {
        return Err(SurfError::DegenerateParameters("orientability of the map and symmetry of the embedding disagree".into()));
    }
    let moved = crate::par::map_slice(&spec.traces, |eta| -> Result<(crate::boundary_calculus::ComplexBoundaryFunction, [f64; 2])> {
        let f = real_part_on(lambda, eta)?;
        if orientable {
            let g_new = AdmissibleMapHandle { lambda: lambda_new.clone(), ..handle.clone() };
            let t = transfer_y(handle, &g_new, basis, &f, cfg)?;
            let d = &t.f - &f;
            Ok((orientable_trace_solve(lambda_new, &t.f, cfg.tol_null)?, [d.sup_norm(), d.cl_norm(4)]))
        } else {
            let data = symmetric_trace(lambda, &f)?;
            let out = transfer_trace(lambda_new, handle, basis, &data, cfg)?;
            let d = &out.f - &f;
            Ok((out.eta, [d.sup_norm(), d.cl_norm(4)]))
        }
    });
    let mut traces = Vec::with_capacity(spec.n());
    let mut real_shift = Vec::with_capacity(spec.n());
    let mut real_shift_c4 = Vec::with_capacity(spec.n());
    let mut closeness = 0.0;
    for (m, eta) in moved.into_iter().zip(&spec.traces) {
        let (t, shift) = m?;
        let t = BoundaryFunction { grid: eta.grid.clone(), values: t.values };
        closeness += (&t - eta).sup_norm();
        real_shift.push(shift[0]);
        real_shift_c4.push(shift[1]);
        traces.push(t);
    }
    let spec = EmbeddingSpec::new(traces, spec.symmetric, SpecProvenance::Transferred)?;
    Ok(InducedEmbedding { spec, closeness, real_shift, real_shift_c4 })
}

/// Symmetric spec of the real parts `fs` on Γ under Λ.
pub fn spec_from_real_parts(lambda: &DNMatrix, fs: &[BoundaryFunction<f64>], orientable: bool, tol_null: f64) -> Result<EmbeddingSpec> {
    let traces = fs
        .iter()
        .map(|f| if orientable { orientable_trace_solve(lambda, f, tol_null) } else { symmetric_trace(lambda, f).map(|d| d.eta) })
        .collect::<Result<Vec<_>>>()?;
    // Share one grid among the coordinates.
    let grid = traces[0].grid.clone();
    let traces = traces.into_iter().map(|t| BoundaryFunction { grid: grid.clone(), values: t.values }).collect();
    EmbeddingSpec::new(traces, !orientable, SpecProvenance::Computed)
}
