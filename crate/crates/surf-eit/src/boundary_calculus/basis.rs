//! L²-orthonormal real Fourier bases on each boundary loop.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DMatrix;

use super::function::BoundaryFunction;
use super::grid::BoundaryGrid;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModeKind {
    Constant,
    Cos,
    Sin,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mode {
    pub component: usize,
    pub k: usize,
    pub kind: ModeKind,
    /// Arc-length wavenumber 2πk/L.
    pub kappa: f64,
}

/// Modes |k| ≤ kmax on every loop (clamped below the Nyquist index).
#[derive(Clone, Debug)]
pub struct ModeBasis {
    pub grid: Arc<BoundaryGrid>,
    pub modes: Vec<Mode>,
    /// Node values, one column per mode; orthonormal in the discrete L² product.
    pub matrix: DMatrix<f64>,
}

impl ModeBasis {
    pub fn new(grid: Arc<BoundaryGrid>, kmax: usize) -> Self {
        Self::filtered(grid, kmax, |_| true)
    }

    /// Basis restricted to modes accepted by `keep`.
    pub fn filtered(grid: Arc<BoundaryGrid>, kmax: usize, keep: impl Fn(&Mode) -> bool) -> Self {
        let mut modes = Vec::new();
        for (c, l) in grid.loops.iter().enumerate() {
            let kc = kmax.min(l.nodes / 2 - 1);
            for k in 0..=kc {
                let kappa = 2.0 * PI * k as f64 / l.length;
                let kinds: &[ModeKind] =
                    if k == 0 { &[ModeKind::Constant] } else { &[ModeKind::Cos, ModeKind::Sin] };
                for &kind in kinds {
                    let m = Mode { component: c, k, kind, kappa };
                    if keep(&m) {
                        modes.push(m);
                    }
                }
            }
        }
        let n = grid.node_count();
        let mut matrix = DMatrix::zeros(n, modes.len());
        for (j, m) in modes.iter().enumerate() {
            let l = &grid.loops[m.component];
            let off = grid.offset(m.component);
            for i in 0..l.nodes {
                let s = grid.s(m.component, i);
                let th = m.kappa * s;
                matrix[(off + i, j)] = match m.kind {
                    ModeKind::Constant => 1.0 / l.length.sqrt(),
                    ModeKind::Cos => (2.0 / l.length).sqrt() * th.cos(),
                    ModeKind::Sin => (2.0 / l.length).sqrt() * th.sin(),
                };
            }
        }
        ModeBasis { grid, modes, matrix }
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn function(&self, j: usize) -> BoundaryFunction<f64> {
        BoundaryFunction { grid: self.grid.clone(), values: self.matrix.column(j).iter().copied().collect() }
    }

    /// Σ c_j e_j.
    pub fn synthesize(&self, coeffs: &[f64]) -> BoundaryFunction<f64> {
        let v = &self.matrix * nalgebra::DVector::from_column_slice(coeffs);
        BoundaryFunction { grid: self.grid.clone(), values: v.iter().copied().collect() }
    }

    /// L² projection coefficients ⟨f, e_j⟩.
    pub fn analyze(&self, f: &BoundaryFunction<f64>) -> Vec<f64> {
        let w = self.grid.weights();
        (0..self.len())
            .map(|j| self.matrix.column(j).iter().zip(&f.values).zip(&w).map(|((a, b), w)| a * b * w).sum())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basis_is_orthonormal() {
        let g = Arc::new(BoundaryGrid::new(&[(6.0, 32), (2.0, 16)]).unwrap());
        let b = ModeBasis::new(g.clone(), 5);
        let w = nalgebra::DMatrix::from_diagonal(&nalgebra::DVector::from_vec(g.weights()));
        let gram = b.matrix.transpose() * w * &b.matrix;
        let err = (gram - DMatrix::identity(b.len(), b.len())).abs().max();
        assert!(err < 1e-13, "{err}");
        assert_eq!(b.len(), 2 * 11);
    }
}
