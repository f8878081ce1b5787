//! Orientability and Euler-characteristic probes.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::maps::{rank_analysis, AdmissibleMapHandle, RankAnalysis, TrialSpace};
use super::nullspace::{null_space, NullSpaceConfig};
use super::operators::frak_d;
use crate::boundary_calculus::{BoundaryFunction, DNMatrix};
use crate::error::{Result, SurfError};

type Bf = BoundaryFunction<f64>;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProbeConfig {
    /// Threshold on the normalized residual of the denominator map.
    pub tol_orient: f64,
    /// Required separation factor from `tol_orient`.
    pub min_margin: f64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig { tol_orient: 1.3e-3, min_margin: 10.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Orientability {
    Orientable,
    NonOrientable,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProbeReport {
    pub verdict: Orientability,
    /// Smallest normalized singular value of the denominator map on the trial span.
    pub residual: f64,
    /// max(tol/residual, residual/tol).
    pub margin: f64,
    pub spectrum: Vec<f64>,
    /// ‖𝔇f‖/‖f‖_{C³} for each trial.
    pub trial_residuals: Vec<f64>,
    pub trial_count: usize,
    pub kernel_codim: usize,
}

/// Modes k ≤ 2 on every loop plus mixtures of them, at least two and at
/// least 8 functions in total.
pub fn default_trials(lambda: &DNMatrix) -> Vec<Bf> {
    let space = TrialSpace::new(lambda.grid.clone(), 2);
    let mut out: Vec<Bf> = (0..space.len()).map(|j| space.function(j)).collect();
    let d = space.len();
    let mix = |w: &dyn Fn(usize) -> f64| space.synthesize(&(0..d).map(w).collect::<Vec<_>>());
    let mut t = 0;
    while out.len() < 8 || t < 2 {
        let p = (t + 2) as f64;
        out.push(mix(&|j| ((j as f64 + 1.0) * p).sin() / (1.0 + j as f64)));
        t += 1;
    }
    out
}

/// Orthonormal span of `trials` with the global constant removed.
fn trial_span(lambda: &DNMatrix, trials: &[Bf]) -> Result<TrialSpace> {
    let grid = lambda.grid.clone();
    let w: Vec<f64> = grid.weights();
    let total: f64 = grid.total_length();
    let mut cols = Vec::new();
    for f in trials {
        f.same_grid(&grid)?;
        let mean = f.values.iter().zip(&w).map(|(v, w)| v * w).sum::<f64>() / total;
        cols.push(DVector::from_iterator(f.values.len(), f.values.iter().zip(&w).map(|(v, w)| (v - mean) * w.sqrt())));
    }
    let m = DMatrix::from_columns(&cols);
    let svd = m.svd(true, false);
    let u = svd.u.expect("left vectors requested");
    let smax = svd.singular_values.max();
    let keep: Vec<DVector<f64>> = (0..svd.singular_values.len())
        .filter(|&i| svd.singular_values[i] > 1e-8 * smax)
        .map(|i| DVector::from_iterator(w.len(), u.column(i).iter().zip(&w).map(|(x, w)| x / w.sqrt())))
        .collect();
    let n = keep.len();
    Ok(TrialSpace { grid, matrix: DMatrix::from_columns(&keep), modes: vec![None; n] })
}

/// Decides orientability from the denominator map on the trial span.
pub fn orientability_probe(lambda: &DNMatrix, trials: &[Bf], cfg: &ProbeConfig) -> Result<ProbeReport> {
    let nonconstant = trials.iter().filter(|f| {
        let (lo, hi) = f.values.iter().fold((f64::MAX, f64::MIN), |(a, b), &v| (a.min(v), b.max(v)));
        hi - lo > 1e-12 * (1.0 + f.sup_norm())
    });
    if nonconstant.count() < 8 {
        return Err(SurfError::Config("orientability probe needs at least 8 nonconstant trials".into()));
    }
    let span = trial_span(lambda, trials)?;
    let handle = AdmissibleMapHandle::new(lambda.clone(), true);
    let (j, scales) = handle.linearization(&span.function(0), &span)?;
    let (analysis, _) = rank_analysis(&j, &scales, cfg.tol_orient);
    let residual = *analysis.singular_values.last().unwrap_or(&0.0);
    let trial_residuals = trials
        .iter()
        .map(|f| {
            let c3 = f.cl_norm(3);
            Ok(if c3 == 0.0 { 0.0 } else { frak_d(lambda, f)?.sup_norm() / c3 })
        })
        .collect::<Result<Vec<_>>>()?;
    let orientable = residual <= cfg.tol_orient && analysis.codim < span.len();
    let margin = if residual == 0.0 { f64::INFINITY } else { (cfg.tol_orient / residual).max(residual / cfg.tol_orient) };
    if margin < cfg.min_margin {
        return Err(SurfError::Inconclusive(margin));
    }
    Ok(ProbeReport {
        verdict: if orientable { Orientability::Orientable } else { Orientability::NonOrientable },
        residual,
        margin,
        spectrum: analysis.singular_values.clone(),
        trial_residuals,
        trial_count: trials.len(),
        kernel_codim: analysis.codim,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RankConfig {
    /// Fourier cutoff of the trial space.
    pub kmax: usize,
    /// Normalized singular values above this count toward the codimension.
    pub threshold: f64,
    /// Minimum accepted ratio across the split.
    pub min_gap: f64,
}

impl Default for RankConfig {
    fn default() -> Self {
        RankConfig { kmax: 8, threshold: 3e-2, min_gap: 1e2 }
    }
}

impl RankConfig {
    /// Settings for finite-element DN maps, whose higher modes carry
    /// discretization noise near the threshold.
    pub fn fem() -> Self {
        RankConfig { kmax: 3, ..Self::default() }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EulerReport {
    pub chi: i64,
    pub codim: usize,
    pub analysis: RankAnalysis,
}

/// χ from the codimension of ker 𝔇 (orientable: χ = 1 − codim) or of the
/// null set of 𝒢 (non-orientable: χ = −codim).
pub fn euler_characteristic(lambda: &DNMatrix, orientable: bool, cfg: &RankConfig) -> Result<EulerReport> {
    if orientable {
        let handle = AdmissibleMapHandle::new(lambda.clone(), true);
        let space = TrialSpace::new(lambda.grid.clone(), cfg.kmax);
        let (j, scales) = handle.linearization(&space.function(0), &space)?;
        let (analysis, _) = rank_analysis(&j, &scales, cfg.threshold);
        if analysis.gap_ratio < cfg.min_gap {
            return Err(SurfError::RankAmbiguous(analysis.gap_ratio));
        }
        Ok(EulerReport { chi: 1 - analysis.codim as i64, codim: analysis.codim, analysis })
    } else {
        let handle = AdmissibleMapHandle::new(lambda.clone(), false);
        let ns = null_space(&handle, None, &NullSpaceConfig { rank: cfg.clone(), ..NullSpaceConfig::default() })?;
        Ok(EulerReport { chi: -(ns.codim() as i64), codim: ns.codim(), analysis: ns.analysis })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward_models::{dn_annulus, dn_disk, dn_mobius, AnnulusBoundary};

    #[test]
    fn disk_is_orientable_with_tiny_residuals() {
        let l = dn_disk(128).unwrap();
        let r = orientability_probe(&l, &default_trials(&l), &ProbeConfig::default()).unwrap();
        assert_eq!(r.verdict, Orientability::Orientable);
        assert!(r.trial_residuals.iter().all(|&x| x <= 1e-9), "{:?}", r.trial_residuals);
    }

    #[test]
    fn mobius_is_non_orientable_and_stable_under_small_noise() {
        let l = dn_mobius(2.0, 128).unwrap();
        let cfg = ProbeConfig::default();
        let r = orientability_probe(&l, &default_trials(&l), &cfg).unwrap();
        assert_eq!(r.verdict, Orientability::NonOrientable);
        let min = r.trial_residuals.iter().copied().fold(f64::MAX, f64::min);
        assert!(min >= 1e-2, "min residual {min}");
        let n = l.matrix.nrows();
        let noise = DMatrix::from_fn(n, n, |i, j| 1e-6 / n as f64 * (((i * 7 + j * 13) % 11) as f64 / 11.0 - 0.5));
        let lp = DNMatrix { matrix: &l.matrix + noise, ..l.clone() };
        let rp = orientability_probe(&lp, &default_trials(&lp), &cfg).unwrap();
        assert_eq!(rp.verdict, Orientability::NonOrientable);
    }

    #[test]
    fn too_few_trials_is_a_config_error() {
        let l = dn_disk(64).unwrap();
        let t = default_trials(&l);
        assert!(matches!(orientability_probe(&l, &t[..3], &ProbeConfig::default()), Err(SurfError::Config(_))));
    }

    #[test]
    fn euler_characteristics_of_analytic_models() {
        let cfg = RankConfig::default();
        assert_eq!(euler_characteristic(&dn_disk(128).unwrap(), true, &cfg).unwrap().chi, 1);
        let ann = dn_annulus(0.5, 128, AnnulusBoundary::Both).unwrap();
        assert_eq!(euler_characteristic(&ann, true, &cfg).unwrap().chi, 0);
        assert_eq!(euler_characteristic(&dn_mobius(2.0, 128).unwrap(), false, &cfg).unwrap().chi, 0);
    }
}
