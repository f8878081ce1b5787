//! Transfer of null-set elements from one DN map to a nearby one.
//!
//! For f in the null set of G, the transferred element is f − Σ d_k h_k with
//! d minimizing the residual of G' along the complement directions h_k. The
//! residual of G at f itself is subtracted as a baseline so that
//! discretization noise shared by both maps does not move the minimizer.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::maps::AdmissibleMapHandle;
use super::nullspace::NullSpaceBasis;
use crate::boundary_calculus::BoundaryFunction;
use crate::error::{Result, SurfError};

type Bf = BoundaryFunction<f64>;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TransferConfig {
    pub max_iter: usize,
    /// Stop once the step is below `tol·‖f‖`.
    pub tol: f64,
    /// |d| ≤ escape_bound·‖f‖ is required of the minimizer.
    pub escape_bound: f64,
    /// Accepted normalized residual of the input under G.
    pub tol_null: f64,
}

impl Default for TransferConfig {
    fn default() -> Self {
        TransferConfig { max_iter: 50, tol: 1e-12, escape_bound: 10.0, tol_null: 1e-2 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TransferResult {
    pub f: Bf,
    pub d: Vec<f64>,
    /// Final ‖G'(f̃) − G(f)‖.
    pub objective: f64,
    pub iterations: usize,
}

fn combine(f: &Bf, basis: &NullSpaceBasis, d: &DVector<f64>) -> Bf {
    basis.complement.iter().zip(d.iter()).fold(f.clone(), |acc, (h, &dk)| acc.axpy(-dk, h))
}

/// f̃ = f − Σ d_k h_k minimizing ‖G'(f̃) − G(f)‖ by damped Gauss–Newton from d = 0.
pub fn transfer_y(g: &AdmissibleMapHandle, g_new: &AdmissibleMapHandle, basis: &NullSpaceBasis, f: &Bf, cfg: &TransferConfig) -> Result<TransferResult> {
    let rel = g.relative(f)?;
    if rel > cfg.tol_null {
        return Err(SurfError::NotInKernel(rel));
    }
    let m = basis.codim();
    let baseline = g.residual(f)?;
    let norm = f.norm_l2();
    if m == 0 || norm == 0.0 {
        return Ok(TransferResult { f: f.clone(), d: vec![0.0; m], objective: (g_new.residual(f)? - baseline).norm(), iterations: 0 });
    }
    let eval = |d: &DVector<f64>| -> Result<DVector<f64>> { Ok(g_new.residual(&combine(f, basis, d))? - &baseline) };
    let mut d = DVector::zeros(m);
    let mut r = eval(&d)?;
    let mut mu = 1e-6;
    let mut iterations = 0;
    let step = 1e-6 * norm;
    while iterations < cfg.max_iter && r.norm() > 0.0 {
        iterations += 1;
        let mut jac = DMatrix::zeros(r.len(), m);
        for k in 0..m {
            let mut p = d.clone();
            p[k] += step;
            let mut q = d.clone();
            q[k] -= step;
            jac.set_column(k, &((eval(&p)? - eval(&q)?) / (2.0 * step)));
        }
        let jtj = jac.transpose() * &jac;
        let grad = jac.transpose() * &r;
        let cost = r.norm();
        let mut accepted = None;
        for _ in 0..12 {
            let mut a = jtj.clone();
            for i in 0..m {
                a[(i, i)] += mu * (jtj[(i, i)] + f64::MIN_POSITIVE);
            }
            if let Some(delta) = a.cholesky().map(|c| c.solve(&(-&grad))) {
                let cand = &d + &delta;
                let rc = eval(&cand)?;
                if rc.norm() <= cost {
                    accepted = Some((cand, rc, delta.norm()));
                    break;
                }
            }
            mu *= 10.0;
        }
        let Some((cand, rc, dn)) = accepted else { break };
        d = cand;
        r = rc;
        mu = (mu * 0.1).max(1e-12);
        if dn <= cfg.tol * norm {
            break;
        }
    }
    let bound = cfg.escape_bound * norm;
    if d.norm() > bound {
        return Err(SurfError::MinimizerEscaped { d: d.norm(), bound });
    }
    Ok(TransferResult { f: combine(f, basis, &d), d: d.as_slice().to_vec(), objective: r.norm(), iterations })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward_models::dn_mobius;
    use crate::trace_equations::nullspace::{null_space, NullSpaceConfig};

    #[test]
    fn empty_complement_leaves_f_unchanged() {
        let l = dn_mobius(2.0, 96).unwrap();
        let g = AdmissibleMapHandle::new(l.clone(), false);
        let basis = null_space(&g, None, &NullSpaceConfig::default()).unwrap();
        let g2 = AdmissibleMapHandle::new(l.scaled(1.01), false);
        let f = basis.kernel[2].clone();
        let t = transfer_y(&g, &g2, &basis, &f, &TransferConfig::default()).unwrap();
        assert_eq!(t.f, f);
        assert!(t.d.is_empty());
    }
}
