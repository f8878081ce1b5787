//! Discrete Dirichlet-to-Neumann operators on a boundary grid.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::basis::{ModeBasis, ModeKind};
use super::function::{BoundaryFunction, ComplexBoundaryFunction};
use super::grid::BoundaryGrid;
use crate::error::{Result, SurfError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Analytic,
    Fem,
    Perturbed,
}

/// Λ acting on node values of Γ.
#[derive(Clone, Debug, PartialEq)]
pub struct DNMatrix {
    pub grid: Arc<BoundaryGrid>,
    pub matrix: DMatrix<f64>,
    pub provenance: Provenance,
}

pub const DN_SCHEMA: &str = "surf-eit/dn-matrix/v1";

#[derive(Serialize, Deserialize)]
struct DnFile {
    schema: String,
    grid: BoundaryGrid,
    provenance: Provenance,
    rows: Vec<Vec<f64>>,
}

impl DNMatrix {
    pub fn new(grid: Arc<BoundaryGrid>, matrix: DMatrix<f64>, provenance: Provenance) -> Result<Self> {
        let n = grid.node_count();
        if matrix.nrows() != n || matrix.ncols() != n {
            return Err(SurfError::GridMismatch(format!(
                "{}×{} matrix for {n} nodes",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        Ok(DNMatrix { grid, matrix, provenance })
    }

    /// Assembles Λ from blocks acting on the angular Fourier coefficients of
    /// mode k across all loops (`block(k)` is b×b, loops share the node count).
    pub fn from_mode_blocks(
        grid: Arc<BoundaryGrid>,
        kmax: usize,
        block: impl Fn(usize) -> DMatrix<f64>,
        provenance: Provenance,
    ) -> Self {
        let basis = ModeBasis::new(grid.clone(), kmax);
        let b = grid.component_count();
        let sqrt_len: Vec<f64> = grid.loops.iter().map(|l| l.length.sqrt()).collect();
        let mut coef = DMatrix::zeros(basis.len(), basis.len());
        for (i, mi) in basis.modes.iter().enumerate() {
            for (j, mj) in basis.modes.iter().enumerate() {
                if mi.k != mj.k || mi.kind != mj.kind {
                    continue;
                }
                let m = block(mi.k);
                debug_assert_eq!(m.nrows(), b);
                coef[(i, j)] = sqrt_len[mi.component] * m[(mi.component, mj.component)] / sqrt_len[mj.component];
            }
        }
        Self::from_mode_coefficients(&basis, &coef, provenance)
    }

    /// Λ = E A Eᵀ W for a matrix A in the orthonormal basis E.
    pub fn from_mode_coefficients(basis: &ModeBasis, a: &DMatrix<f64>, provenance: Provenance) -> Self {
        let w = DVector::from_vec(basis.grid.weights());
        let mut et_w = basis.matrix.transpose();
        for j in 0..et_w.ncols() {
            let wj = w[j];
            et_w.column_mut(j).scale_mut(wj);
        }
        let matrix = &basis.matrix * a * et_w;
        DNMatrix { grid: basis.grid.clone(), matrix, provenance }
    }

    /// Representation ⟨e_i, Λ e_j⟩ in an orthonormal mode basis.
    pub fn mode_coefficients(&self, basis: &ModeBasis) -> DMatrix<f64> {
        let w = DMatrix::from_diagonal(&DVector::from_vec(self.grid.weights()));
        basis.matrix.transpose() * w * &self.matrix * &basis.matrix
    }

    pub fn apply(&self, f: &BoundaryFunction<f64>) -> Result<BoundaryFunction<f64>> {
        f.same_grid(&self.grid)?;
        Ok(self.apply_unchecked(f))
    }

    pub(crate) fn apply_unchecked(&self, f: &BoundaryFunction<f64>) -> BoundaryFunction<f64> {
        let v = &self.matrix * DVector::from_column_slice(&f.values);
        BoundaryFunction { grid: self.grid.clone(), values: v.iter().copied().collect() }
    }

    pub fn apply_complex(&self, f: &ComplexBoundaryFunction) -> Result<ComplexBoundaryFunction> {
        let re = self.apply(&f.re())?;
        let im = self.apply(&f.im())?;
        Ok(ComplexBoundaryFunction::from_parts(&re, &im))
    }

    fn sym_form(&self) -> DMatrix<f64> {
        let w: Vec<f64> = self.grid.weights();
        let mut s = self.matrix.clone();
        for i in 0..s.nrows() {
            for j in 0..s.ncols() {
                s[(i, j)] *= w[i].sqrt() / w[j].sqrt();
            }
        }
        s
    }

    /// Spectral norm of the L²-antisymmetric part (0 for self-adjoint Λ).
    pub fn l2_asymmetry(&self) -> f64 {
        let s = self.sym_form();
        let d = &s - s.transpose();
        spectral_norm(&d) * 0.5
    }

    /// L²-self-adjoint part ½(Λ + W⁻¹ΛᵀW).
    pub fn symmetrize(&self) -> Self {
        let w = self.grid.weights();
        let mut m = self.matrix.clone();
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                m[(i, j)] = 0.5 * (self.matrix[(i, j)] + self.matrix[(j, i)] * w[j] / w[i]);
            }
        }
        DNMatrix { grid: self.grid.clone(), matrix: m, provenance: self.provenance }
    }

    /// ‖Λ1‖_{L²}.
    pub fn constant_defect(&self) -> f64 {
        let one = BoundaryFunction::constant(self.grid.clone(), 1.0);
        self.apply_unchecked(&one).norm_l2()
    }

    /// Largest total flux ∫_Γ Λf over unit-L² inputs (0 when outputs have zero mean).
    pub fn flux_defect(&self) -> f64 {
        let w = self.grid.weights();
        let row: Vec<f64> = (0..self.matrix.ncols())
            .map(|j| (0..self.matrix.nrows()).map(|i| w[i] * self.matrix[(i, j)]).sum::<f64>() / w[j].sqrt())
            .collect();
        row.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// d_op(Λ, Λ') = ‖Λ − Λ'‖_{H¹→L²}.
    pub fn d_op(&self, other: &DNMatrix, kmax: usize) -> Result<f64> {
        if *self.grid != *other.grid {
            return Err(SurfError::GridMismatch("DN maps on different grids".into()));
        }
        Ok(op_norm_h1_l2(&self.grid, &(&self.matrix - &other.matrix), kmax))
    }

    pub fn scaled(&self, c: f64) -> Self {
        DNMatrix { grid: self.grid.clone(), matrix: &self.matrix * c, provenance: self.provenance }
    }

    pub fn to_json(&self) -> Result<String> {
        let rows = self.matrix.row_iter().map(|r| r.iter().copied().collect()).collect();
        let file = DnFile { schema: DN_SCHEMA.into(), grid: (*self.grid).clone(), provenance: self.provenance, rows };
        Ok(serde_json::to_string(&file)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let file: DnFile = serde_json::from_str(s)?;
        if file.schema != DN_SCHEMA {
            return Err(SurfError::Config(format!("unsupported DN schema `{}`", file.schema)));
        }
        file.grid.validate()?;
        let n = file.rows.len();
        let flat: Vec<f64> = file.rows.into_iter().flatten().collect();
        if flat.len() != n * n {
            return Err(SurfError::Config("DN matrix is not square".into()));
        }
        let matrix = DMatrix::from_row_slice(n, n, &flat);
        DNMatrix::new(Arc::new(file.grid), matrix, file.provenance)
    }

    /// Eigenvalue of Λ on the cos-mode k of loop `c`, read from the Rayleigh quotient.
    pub fn mode_value(&self, c: usize, k: usize) -> f64 {
        let basis = ModeBasis::filtered(self.grid.clone(), k, |m| {
            m.component == c && m.k == k && matches!(m.kind, ModeKind::Cos | ModeKind::Constant)
        });
        let e = basis.function(0);
        self.apply_unchecked(&e).inner(&e)
    }
}

/// Largest singular value.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().singular_values().iter().copied().fold(0.0, f64::max)
}

/// ‖A‖_{H¹→L²} on modes |k| ≤ kmax: largest singular value of W^{1/2}·A·E·diag((1+κ²)^{-1/2}).
pub fn op_norm_h1_l2(grid: &Arc<BoundaryGrid>, a: &DMatrix<f64>, kmax: usize) -> f64 {
    let basis = ModeBasis::new(grid.clone(), kmax);
    let w = grid.weights();
    let mut b = a * &basis.matrix;
    for (i, wi) in w.iter().enumerate() {
        b.row_mut(i).scale_mut(wi.sqrt());
    }
    for (j, m) in basis.modes.iter().enumerate() {
        b.column_mut(j).scale_mut(1.0 / (1.0 + m.kappa * m.kappa).sqrt());
    }
    spectral_norm(&b)
}

/// Writes sampled values as CSV rows `component,node,s,re,im`.
pub fn write_function_csv<W: std::io::Write>(f: &ComplexBoundaryFunction, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["component", "node", "s", "re", "im"]).map_err(csv_err)?;
    for c in 0..f.grid.component_count() {
        for (i, z) in f.component(c).iter().enumerate() {
            let z: Complex64 = *z;
            w.write_record(&[
                c.to_string(),
                i.to_string(),
                format!("{:.17e}", f.grid.s(c, i)),
                format!("{:.17e}", z.re),
                format!("{:.17e}", z.im),
            ])
            .map_err(csv_err)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub(crate) fn csv_err(e: csv::Error) -> SurfError {
    SurfError::Io(std::io::Error::new(std::io::ErrorKind::Other, e.to_string()))
}
