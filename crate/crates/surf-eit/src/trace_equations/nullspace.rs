//! Null sets of the non-orientable maps: anchor search, kernel of the
//! linearization, validation and complement.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::maps::{rank_analysis, AdmissibleMapHandle, RankAnalysis, TrialSpace};
use super::probe::RankConfig;
use crate::boundary_calculus::{BoundaryFunction, Provenance};
use crate::error::{Result, SurfError};

type Bf = BoundaryFunction<f64>;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NullSpaceConfig {
    pub rank: RankConfig,
    /// Accepted normalized residual for the anchor and every kernel vector.
    pub tol_null: f64,
    pub starts: usize,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for NullSpaceConfig {
    fn default() -> Self {
        NullSpaceConfig { rank: RankConfig::default(), tol_null: 1e-2, starts: 16, max_iter: 60, seed: 7 }
    }
}

impl NullSpaceConfig {
    /// Defaults adjusted to the provenance of the DN map.
    pub fn for_handle(handle: &AdmissibleMapHandle) -> Self {
        let rank = match handle.lambda.provenance {
            Provenance::Analytic => RankConfig::default(),
            _ => RankConfig::fem(),
        };
        NullSpaceConfig { rank, ..Self::default() }
    }
}

/// Orthonormal basis of the discretized null set and of a complement.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NullSpaceBasis {
    pub kernel: Vec<Bf>,
    pub complement: Vec<Bf>,
    /// Normalized map residual of each kernel vector.
    pub residuals: Vec<f64>,
    pub anchor: Bf,
    pub anchor_residual: f64,
    pub analysis: RankAnalysis,
    /// Smallest singular value of the Gram matrix of kernel and complement.
    pub independence: f64,
}

impl NullSpaceBasis {
    pub fn codim(&self) -> usize {
        self.complement.len()
    }

    /// Basis with no constraints (m = 0) on the whole trial space.
    pub fn whole(space: &TrialSpace, anchor: Bf, analysis: RankAnalysis) -> Self {
        NullSpaceBasis {
            kernel: (0..space.len()).map(|j| space.function(j)).collect(),
            complement: Vec::new(),
            residuals: vec![0.0; space.len()],
            anchor,
            anchor_residual: 0.0,
            analysis,
            independence: 1.0,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Normalized residual r(a)/scale(a) of the synthesized function.
fn normalized(handle: &AdmissibleMapHandle, space: &TrialSpace, a: &[f64]) -> Result<DVector<f64>> {
    let f = space.synthesize(a);
    let s = handle.scale(&f)?;
    let r = handle.residual(&f)?;
    Ok(if s > 0.0 { r / s } else { r })
}

/// Levenberg–Marquardt on the unit sphere of trial coefficients.
fn descend(handle: &AdmissibleMapHandle, space: &TrialSpace, start: Vec<f64>, cfg: &NullSpaceConfig) -> Result<(Vec<f64>, f64)> {
    let d = start.len();
    let mut a = DVector::from_vec(start);
    a /= a.norm();
    let mut r = normalized(handle, space, a.as_slice())?;
    let mut mu = 1e-3;
    for _ in 0..cfg.max_iter {
        let cost = r.norm();
        if cost <= 1e-3 * cfg.tol_null {
            break;
        }
        let step = 1e-7;
        let mut jac = DMatrix::zeros(r.len(), d);
        for j in 0..d {
            let mut b = a.clone();
            b[j] += step;
            let rj = normalized(handle, space, b.as_slice())?;
            jac.set_column(j, &((rj - &r) / step));
        }
        let jtj = jac.transpose() * &jac;
        let g = jac.transpose() * &r;
        let mut improved = false;
        for _ in 0..10 {
            let mut m = jtj.clone();
            for i in 0..d {
                m[(i, i)] += mu * (1.0 + jtj[(i, i)]);
            }
            let Some(delta) = m.cholesky().map(|c| c.solve(&(-&g))) else {
                mu *= 10.0;
                continue;
            };
            let mut cand = &a + delta;
            cand /= cand.norm();
            let rc = normalized(handle, space, cand.as_slice())?;
            if rc.norm() < cost {
                a = cand;
                r = rc;
                mu = (mu * 0.3).max(1e-12);
                improved = true;
                break;
            }
            mu *= 10.0;
        }
        if !improved {
            break;
        }
    }
    let cost = r.norm();
    Ok((a.as_slice().to_vec(), cost))
}

/// Finds a nonconstant anchor with small normalized residual by multistart descent.
pub fn find_anchor(handle: &AdmissibleMapHandle, space: &TrialSpace, cfg: &NullSpaceConfig) -> Result<(Bf, f64)> {
    let d = space.len();
    let runs = crate::par::map_range(cfg.starts.max(1), |s| {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(s as u64));
        let start: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        descend(handle, space, start, cfg)
    });
    let mut best: Option<(Vec<f64>, f64)> = None;
    for r in runs {
        let (a, c) = r?;
        if best.as_ref().map_or(true, |b| c < b.1) {
            best = Some((a, c));
        }
    }
    let (a, cost) = best.expect("at least one start");
    if cost > cfg.tol_null {
        return Err(SurfError::AnchorNotFound(cost));
    }
    Ok((space.synthesize(&a), cost))
}

/// Null set of the map: anchor, kernel of its linearization and a complement.
pub fn null_space(handle: &AdmissibleMapHandle, m_hint: Option<usize>, cfg: &NullSpaceConfig) -> Result<NullSpaceBasis> {
    let space = TrialSpace::new(handle.lambda.grid.clone(), cfg.rank.kmax);
    let (anchor, cost) = find_anchor(handle, &space, cfg)?;
    let mut basis = null_space_at(handle, &space, &anchor, cfg)?;
    basis.anchor_residual = cost;
    if let Some(h) = m_hint.or(handle.expected_codim) {
        if h != basis.codim() {
            return Err(SurfError::CodimMismatch { found: basis.codim(), hint: h });
        }
    }
    Ok(basis)
}

/// Kernel and complement from the linearization at a given anchor.
pub fn null_space_at(handle: &AdmissibleMapHandle, space: &TrialSpace, anchor: &Bf, cfg: &NullSpaceConfig) -> Result<NullSpaceBasis> {
    let (j, scales) = handle.linearization(anchor, space)?;
    let (analysis, v) = rank_analysis(&j, &scales, cfg.rank.threshold);
    if analysis.gap_ratio < cfg.rank.min_gap {
        return Err(SurfError::RankAmbiguous(analysis.gap_ratio));
    }
    let m = analysis.codim;
    let d = space.len();
    // Right vectors are individually normalized after unscaling, so
    // re-orthonormalize: kernel first, then the complement against it.
    let kern = DMatrix::from_columns(&(m..d).map(|c| v.column(c).clone_owned()).collect::<Vec<_>>());
    let kq = if d > m { kern.qr().q() } else { DMatrix::zeros(d, 0) };
    let mut comp_cols: Vec<DVector<f64>> = Vec::new();
    for c in 0..m {
        let mut x = v.column(c).clone_owned();
        let prior: Vec<DVector<f64>> = kq.column_iter().map(|q| q.clone_owned()).chain(comp_cols.iter().cloned()).collect();
        for q in &prior {
            let p = q.dot(&x);
            x -= q * p;
        }
        let n = x.norm();
        if n < 1e-8 {
            return Err(SurfError::RankAmbiguous(n));
        }
        comp_cols.push(x / n);
    }
    let kernel: Vec<Bf> = kq.column_iter().map(|c| space.synthesize(c.as_slice())).collect();
    let complement: Vec<Bf> = comp_cols.iter().map(|c| space.synthesize(c.as_slice())).collect();
    let residuals = crate::par::map_slice(&kernel, |k| handle.relative(k));
    let residuals = residuals.into_iter().collect::<Result<Vec<_>>>()?;
    if let Some(&worst) = residuals.iter().max_by(|a, b| a.total_cmp(b)) {
        if worst > cfg.tol_null {
            return Err(SurfError::NotInKernel(worst));
        }
    }
    let mut all: Vec<DVector<f64>> = kq.column_iter().map(|c| c.clone_owned()).collect();
    all.extend(comp_cols.iter().cloned());
    let independence = if all.is_empty() { 1.0 } else { DMatrix::from_columns(&all).singular_values().min() };
    Ok(NullSpaceBasis {
        kernel,
        complement,
        residuals,
        anchor: anchor.clone(),
        anchor_residual: handle.relative(anchor)?,
        analysis,
        independence,
    })
}
