//! Admissible maps as residual vectors, and the trial spaces they act on.
//!
//! The single-loop 𝔇 and 𝒢 assume a connected boundary. With several boundary
//! loops the trace of a holomorphic function has a piecewise constant
//! imaginary offset and each loop carries its own flux condition, so the
//! multi-loop maps project the offsets out and append per-loop flux rows:
//!
//! * orientable: D_b(f) = [(I − P_{Λ1_j}) 𝔇f ; ⟨Λf, 1_j⟩], degree 1;
//! * non-orientable: G_b(f) = [(I − P_S) 𝔑(f) ; ‖f‖⟨Λf, 1_j⟩], degree 2,
//!   S = span{1_j∂_γf + Λ(1_j·JΛf), Λ1_j}.
//!
//! Residual vectors carry √dl weights, so their Euclidean norm is the L² norm.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::operators::{d_terms, frak_n, n_terms, q_terms, GAnchor};
use crate::boundary_calculus::{BoundaryFunction, BoundaryGrid, DNMatrix, Mode, ModeBasis, ModeKind};
use crate::error::Result;

type Bf = BoundaryFunction<f64>;

/// Orthonormal band-limited functions (|k| ≤ kmax on every loop) orthogonal
/// to the global constant.
#[derive(Clone, Debug)]
pub struct TrialSpace {
    pub grid: Arc<BoundaryGrid>,
    /// Node values of the basis functions, one per column.
    pub matrix: DMatrix<f64>,
    /// Fourier mode of each column (`None` for the loop-constant combinations).
    pub modes: Vec<Option<Mode>>,
}

impl TrialSpace {
    pub fn new(grid: Arc<BoundaryGrid>, kmax: usize) -> Self {
        let basis = ModeBasis::new(grid.clone(), kmax);
        let b = grid.component_count();
        let mut cols = Vec::new();
        let mut modes = Vec::new();
        for (j, m) in basis.modes.iter().enumerate() {
            if m.kind != ModeKind::Constant {
                cols.push(basis.matrix.column(j).clone_owned());
                modes.push(Some(*m));
            }
        }
        if b > 1 {
            // Loop constants c_j = 1/√L_j; the global constant is Σ √L_j c_j.
            let consts: Vec<usize> = (0..basis.len()).filter(|&j| basis.modes[j].kind == ModeKind::Constant).collect();
            let u = DVector::from_iterator(b, grid.loops.iter().map(|l| l.length.sqrt()));
            let mut aug = DMatrix::identity(b, b + 1);
            aug.set_column(0, &u);
            for c in 1..=b {
                aug.set_column(c, &DMatrix::<f64>::identity(b, b).column(c - 1));
            }
            let q = aug.qr().q();
            for c in 1..b {
                let mut v = DVector::zeros(grid.node_count());
                for (jj, &j) in consts.iter().enumerate() {
                    v += basis.matrix.column(j) * q[(jj, c)];
                }
                cols.push(v);
                modes.push(None);
            }
        }
        let matrix = DMatrix::from_columns(&cols);
        TrialSpace { grid, matrix, modes }
    }

    pub fn len(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn function(&self, j: usize) -> Bf {
        BoundaryFunction { grid: self.grid.clone(), values: self.matrix.column(j).iter().copied().collect() }
    }

    pub fn synthesize(&self, coeffs: &[f64]) -> Bf {
        let v = &self.matrix * DVector::from_column_slice(coeffs);
        BoundaryFunction { grid: self.grid.clone(), values: v.iter().copied().collect() }
    }

    pub fn analyze(&self, f: &Bf) -> Vec<f64> {
        let w = self.grid.weights();
        (0..self.len())
            .map(|j| self.matrix.column(j).iter().zip(&f.values).zip(&w).map(|((a, b), w)| a * b * w).sum())
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MapKind {
    /// 𝔇, orientable with connected Γ.
    Denominator,
    /// D_b, orientable with several loops.
    ProjectedDenominator,
    /// 𝒢, non-orientable with connected Γ.
    Cubic,
    /// G_b, non-orientable with several loops.
    Quadratic,
}

/// An (m, α)-admissible map f ↦ residual, closed over a DN map.
#[derive(Clone, Debug)]
pub struct AdmissibleMapHandle {
    pub lambda: DNMatrix,
    pub kind: MapKind,
    pub expected_codim: Option<usize>,
    /// Norm index of the input space (C^{l+4}).
    pub e_index: usize,
    /// Norm index of the output space (C^l).
    pub f_index: usize,
}

fn indicator(grid: &Arc<BoundaryGrid>, j: usize) -> Bf {
    BoundaryFunction::from_fn(grid.clone(), |c, _| if c == j { 1.0 } else { 0.0 })
}

fn weighted(f: &Bf) -> DVector<f64> {
    let w = f.grid.weights();
    DVector::from_iterator(f.values.len(), f.values.iter().zip(&w).map(|(v, w)| v * w.sqrt()))
}

/// x − P_span(cols) x for weighted vectors.
fn project_out(x: &DVector<f64>, cols: &[DVector<f64>]) -> DVector<f64> {
    if cols.is_empty() {
        return x.clone();
    }
    let s = DMatrix::from_columns(cols);
    let svd = s.svd(true, false);
    let u = svd.u.expect("left vectors requested");
    let smax = svd.singular_values.max();
    let mut r = x.clone();
    for (i, &sv) in svd.singular_values.iter().enumerate() {
        if sv > 1e-10 * smax {
            let ui = u.column(i);
            r -= ui * ui.dot(x);
        }
    }
    r
}

/// ⟨Λf, 1_j⟩/√L_j for every loop j.
fn flux_rows(lf: &Bf) -> Vec<f64> {
    let g = &lf.grid;
    (0..g.component_count())
        .map(|c| lf.component(c).iter().sum::<f64>() * g.spacing(c) / g.loops[c].length.sqrt())
        .collect()
}

fn l2_sum(t: &[Bf]) -> f64 {
    t.iter().map(|x| x.norm_l2()).sum()
}

fn stack(main: DVector<f64>, extra: &[f64]) -> DVector<f64> {
    let n = main.len();
    DVector::from_iterator(n + extra.len(), main.iter().copied().chain(extra.iter().copied()))
}

impl AdmissibleMapHandle {
    /// The map characterizing holomorphic traces for a surface of the given orientability.
    pub fn new(lambda: DNMatrix, orientable: bool) -> Self {
        let multi = lambda.grid.component_count() > 1;
        let kind = match (orientable, multi) {
            (true, false) => MapKind::Denominator,
            (true, true) => MapKind::ProjectedDenominator,
            (false, false) => MapKind::Cubic,
            (false, true) => MapKind::Quadratic,
        };
        AdmissibleMapHandle { lambda, kind, expected_codim: None, e_index: 4, f_index: 0 }
    }

    pub fn with_codim(mut self, m: usize) -> Self {
        self.expected_codim = Some(m);
        self
    }

    pub fn degree(&self) -> u32 {
        match self.kind {
            MapKind::Denominator | MapKind::ProjectedDenominator => 1,
            MapKind::Quadratic => 2,
            MapKind::Cubic => 3,
        }
    }

    pub fn orientable(&self) -> bool {
        matches!(self.kind, MapKind::Denominator | MapKind::ProjectedDenominator)
    }

    fn offsets(&self, f: &Bf) -> Result<Vec<DVector<f64>>> {
        let g = &self.lambda.grid;
        let b = g.component_count();
        let mut cols = Vec::with_capacity(2 * b);
        if self.kind == MapKind::Quadratic {
            let df = f.derivative();
            let jlf = self.lambda.apply(f)?.integrate_j_projected();
            for j in 0..b {
                let ind = indicator(g, j);
                let bj = &ind * &df + self.lambda.apply_unchecked(&(&ind * &jlf));
                cols.push(weighted(&bj));
            }
        }
        for j in 0..b {
            cols.push(weighted(&self.lambda.apply_unchecked(&indicator(g, j))));
        }
        Ok(cols)
    }

    /// Residual vector; zero exactly on the null set of the map.
    pub fn residual(&self, f: &Bf) -> Result<DVector<f64>> {
        let lam = &self.lambda;
        Ok(match self.kind {
            MapKind::Denominator => weighted(&super::operators::frak_d(lam, f)?),
            MapKind::Cubic => weighted(&GAnchor::new(lam, f)?.value()),
            MapKind::ProjectedDenominator => {
                let d = weighted(&super::operators::frak_d(lam, f)?);
                stack(project_out(&d, &self.offsets(f)?), &flux_rows(&lam.apply(f)?))
            }
            MapKind::Quadratic => {
                let n = weighted(&frak_n(lam, f)?);
                let norm = f.norm_l2();
                let flux: Vec<f64> = flux_rows(&lam.apply(f)?).into_iter().map(|x| x * norm).collect();
                stack(project_out(&n, &self.offsets(f)?), &flux)
            }
        })
    }

    /// Majorant of the residual norm from the individual operator terms.
    pub fn scale(&self, f: &Bf) -> Result<f64> {
        let lam = &self.lambda;
        Ok(match self.kind {
            MapKind::Denominator => l2_sum(&d_terms(lam, f)?),
            MapKind::ProjectedDenominator => l2_sum(&d_terms(lam, f)?) + lam.apply(f)?.norm_l2(),
            MapKind::Cubic => GAnchor::new(lam, f)?.scale(),
            MapKind::Quadratic => l2_sum(&n_terms(lam, f)?) + f.norm_l2() * lam.apply(f)?.norm_l2(),
        })
    }

    /// ‖residual‖ / scale, in [0, 1]; 0 for constants.
    pub fn relative(&self, f: &Bf) -> Result<f64> {
        let (lo, hi) = f.values.iter().fold((f64::MAX, f64::MIN), |(a, b), &v| (a.min(v), b.max(v)));
        if hi - lo <= 1e-12 * (1.0 + f.sup_norm()) {
            return Ok(0.0);
        }
        let s = self.scale(f)?;
        Ok(if s == 0.0 { 0.0 } else { self.residual(f)?.norm() / s })
    }

    /// Linearization at `f0` on the trial space, with a majorant per column.
    pub fn linearization(&self, f0: &Bf, space: &TrialSpace) -> Result<(DMatrix<f64>, Vec<f64>)> {
        let d = space.len();
        let cols: Vec<Result<(DVector<f64>, f64)>> = crate::par::map_range(d, |j| {
            let h = space.function(j);
            match self.kind {
                MapKind::Denominator | MapKind::ProjectedDenominator => Ok((self.residual(&h)?, self.scale(&h)?)),
                MapKind::Cubic => {
                    let a = GAnchor::new(&self.lambda, f0)?;
                    let (v, s) = a.g1_with_scale(&h)?;
                    Ok((weighted(&v), s))
                }
                MapKind::Quadratic => {
                    let step = 1e-5 * f0.norm_l2().max(1e-300);
                    let plus = self.residual(&f0.axpy(step, &h))?;
                    let minus = self.residual(&f0.axpy(-step, &h))?;
                    let s = l2_sum(&q_terms(&self.lambda, f0, &h)?) + f0.norm_l2() * self.lambda.apply(&h)?.norm_l2();
                    Ok(((plus - minus) / (2.0 * step), s))
                }
            }
        });
        let mut vecs = Vec::with_capacity(d);
        let mut scales = Vec::with_capacity(d);
        for c in cols {
            let (v, s) = c?;
            vecs.push(v);
            scales.push(s);
        }
        Ok((DMatrix::from_columns(&vecs), scales))
    }
}

/// Singular-value split of a column-normalized linearization.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RankAnalysis {
    /// Normalized singular values, descending.
    pub singular_values: Vec<f64>,
    pub codim: usize,
    /// σ_m/σ_{m+1} (1/σ_1 when m = 0, ∞ when the map is injective).
    pub gap_ratio: f64,
    pub threshold: f64,
}

/// Normalizes columns by `scales`, splits singular values at `threshold` and
/// returns the analysis with right singular vectors in trial coordinates.
pub fn rank_analysis(j: &DMatrix<f64>, scales: &[f64], threshold: f64) -> (RankAnalysis, DMatrix<f64>) {
    let d = j.ncols();
    let mut jn = j.clone();
    let inv: Vec<f64> = scales.iter().map(|&s| if s > 0.0 { 1.0 / s } else { 0.0 }).collect();
    for (c, &f) in inv.iter().enumerate() {
        jn.column_mut(c).scale_mut(f);
    }
    // Pad so the SVD yields a full set of right vectors.
    let rows = jn.nrows().max(d);
    let mut padded = DMatrix::zeros(rows, d);
    padded.view_mut((0, 0), (jn.nrows(), d)).copy_from(&jn);
    let svd = padded.svd(false, true);
    let vt = svd.v_t.expect("right vectors requested");
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].partial_cmp(&svd.singular_values[a]).unwrap());
    let sv: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
    let mut v = DMatrix::zeros(d, d);
    for (k, &i) in order.iter().enumerate() {
        // Undo the column scaling: coefficients a = diag(1/s) y.
        let col = DVector::from_iterator(d, vt.row(i).iter().zip(&inv).map(|(y, f)| y * f));
        let n = col.norm();
        v.set_column(k, &if n > 0.0 { col / n } else { col });
    }
    let codim = sv.iter().filter(|&&s| s > threshold).count();
    let gap_ratio = if codim == d {
        f64::INFINITY
    } else if codim == 0 {
        1.0 / sv[0].max(f64::MIN_POSITIVE)
    } else {
        sv[codim - 1] / sv[codim].max(f64::MIN_POSITIVE)
    };
    (RankAnalysis { singular_values: sv, codim, gap_ratio, threshold }, v)
}
