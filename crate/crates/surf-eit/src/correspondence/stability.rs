//! Descent to the base surfaces, the quadratic-form lower bound and the
//! per-run stability report.

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::map::{dilatation_field, CorrespondenceMap};
use crate::boundary_calculus::{BoundaryFunction, DNMatrix};
use crate::error::{Result, SurfError};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BaseMap {
    /// Sample index pairs (ξ, conj ξ) folded to one base sample each.
    pub pairs: Vec<(usize, usize)>,
    /// max |α(conj ξ) − conj α(ξ)| over pairs.
    pub equivariance: f64,
    /// max |log K(ξ) − log K(conj ξ)| over pairs.
    pub pair_mismatch: f64,
    pub base_sup_log_k: f64,
    pub cover_sup_log_k: f64,
    /// Samples without a partner.
    pub unpaired: usize,
}

/// Checks α(conj ξ) = conj α(ξ) on τ-paired samples and folds them.
pub fn descend_to_base(map: &CorrespondenceMap, tol_sym: f64) -> Result<BaseMap> {
    let ks = dilatation_field(map)?;
    let mut pairs = Vec::new();
    let mut equivariance: f64 = 0.0;
    let mut mismatch: f64 = 0.0;
    let mut base: f64 = 0.0;
    let mut unpaired = 0;
    for (i, s) in map.samples.iter().enumerate() {
        let Some(j) = s.pair else {
            unpaired += 1;
            continue;
        };
        if j < i {
            continue;
        }
        let t = &map.samples[j];
        let src = s.source.iter().zip(&t.source).map(|(a, b)| (a.conj() - b).norm()).fold(0.0, f64::max);
        let tgt = s.target.iter().zip(&t.target).map(|(a, b)| (a.conj() - b).norm()).fold(0.0, f64::max);
        // The source pair itself may be off by its own reconstruction error.
        equivariance = equivariance.max((tgt - src).max(0.0));
        let (la, lb) = (ks[i].0.ln(), ks[j].0.ln());
        mismatch = mismatch.max((la - lb).abs());
        if !(s.multiple || t.multiple) {
            base = base.max(la.max(lb));
        }
        pairs.push((i, j));
    }
    if equivariance > 10.0 * tol_sym {
        return Err(SurfError::EquivarianceBroken(equivariance));
    }
    let cover = map.samples.iter().zip(&ks).filter(|(s, _)| s.pair.is_some() && !s.multiple).map(|(_, k)| k.0.ln()).fold(0.0, f64::max);
    Ok(BaseMap { pairs, equivariance, pair_mismatch: mismatch, base_sup_log_k: base, cover_sup_log_k: cover, unpaired })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LowerBoundReport {
    /// |((Λ' − Λ)f, f)| per trial.
    pub lhs: Vec<f64>,
    /// ((Λ' + Λ)f, f) per trial.
    pub rhs: Vec<f64>,
    pub d_t_proxy: f64,
    /// max lhs/(d_T·rhs); `None` when d_T = 0.
    pub constant: Option<f64>,
}

/// Empirical constant of |((Λ'−Λ)f,f)| ≤ c·d_T·((Λ'+Λ)f,f) over trials,
/// with d_T = ½ log K_true.
pub fn lower_bound_check(lambda: &DNMatrix, lambda_new: &DNMatrix, log_k_true: f64, trials: &[BoundaryFunction<f64>]) -> Result<LowerBoundReport> {
    let d_t = 0.5 * log_k_true;
    let mut lhs = Vec::with_capacity(trials.len());
    let mut rhs = Vec::with_capacity(trials.len());
    for f in trials {
        let a = lambda.apply(f)?;
        let b = lambda_new.apply(f)?;
        lhs.push((&b - &a).inner(f).abs());
        rhs.push((&b + &a).inner(f));
    }
    let constant = (d_t > 0.0).then(|| lhs.iter().zip(&rhs).filter(|(_, r)| **r > 0.0).map(|(l, r)| l / (d_t * r)).fold(0.0, f64::max));
    Ok(LowerBoundReport { lhs, rhs, d_t_proxy: d_t, constant })
}

/// One run of the stability pipeline.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StabilityReport {
    pub epsilon: f64,
    /// t = d_op(Λ', Λ).
    pub t: f64,
    pub d_h: f64,
    pub sup_log_k: f64,
    /// ½ sup log K with the squared convention.
    pub dt_estimate: f64,
    /// ½ sup log √K, the unsquared convention.
    pub dt_unsquared: f64,
    pub log_k_true: Option<f64>,
    pub excluded_fraction: f64,
    /// Σ_k ‖η'_k − η_k‖_{C⁰}.
    pub trace_closeness: f64,
    /// ‖𝔜f − f‖_{C⁴} of the transferred real parts.
    pub transfer_c4: f64,
    pub lower_bound_constant: Option<f64>,
    pub equivariance: Option<f64>,
    /// Named residuals of the intermediate stages.
    pub stages: Vec<(String, f64)>,
}

impl StabilityReport {
    pub const CSV_HEADER: [&'static str; 7] = ["epsilon", "t", "d_H", "sup_logK", "dT_estimate", "logK_true", "excluded_fraction"];

    pub fn csv_row(&self) -> [String; 7] {
        [
            format!("{:e}", self.epsilon),
            format!("{:e}", self.t),
            format!("{:e}", self.d_h),
            format!("{:e}", self.sup_log_k),
            format!("{:e}", self.dt_estimate),
            self.log_k_true.map(|v| format!("{v:e}")).unwrap_or_default(),
            format!("{:e}", self.excluded_fraction),
        ]
    }

    pub fn write_csv<W: Write>(reports: &[StabilityReport], out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| SurfError::Io(std::io::Error::other(e));
        w.write_record(Self::CSV_HEADER).map_err(io)?;
        for r in reports {
            w.write_record(r.csv_row()).map_err(io)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward_models::dn_disk;
    use crate::trace_equations::default_trials;

    #[test]
    fn equal_maps_have_zero_left_side() {
        let l = dn_disk(64).unwrap();
        let rep = lower_bound_check(&l, &l, 0.1, &default_trials(&l)).unwrap();
        assert!(rep.lhs.iter().all(|&v| v == 0.0));
        assert_eq!(rep.constant, Some(0.0));
    }

    #[test]
    fn scaled_map_gives_the_expected_constant() {
        // Λ' = (1+a)Λ: |((Λ'−Λ)f,f)|/((Λ'+Λ)f,f) = a/(2+a).
        let l = dn_disk(64).unwrap();
        let a = 0.02;
        let rep = lower_bound_check(&l, &l.scaled(1.0 + a), 0.2, &default_trials(&l)).unwrap();
        let c = rep.constant.unwrap();
        assert!((c - a / (2.0 + a) / 0.1).abs() < 1e-10, "{c}");
    }

    #[test]
    fn csv_row_matches_header() {
        let r = StabilityReport {
            epsilon: 0.01,
            t: 1e-3,
            d_h: 2e-3,
            sup_log_k: 0.02,
            dt_estimate: 0.01,
            dt_unsquared: 0.005,
            log_k_true: Some(0.02),
            excluded_fraction: 0.0,
            trace_closeness: 0.0,
            transfer_c4: 0.0,
            lower_bound_constant: None,
            equivariance: None,
            stages: vec![],
        };
        let mut buf = Vec::new();
        StabilityReport::write_csv(&[r], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("epsilon,t,d_H,sup_logK,dT_estimate,logK_true,excluded_fraction\n"));
        assert_eq!(text.lines().nth(1).unwrap().split(',').count(), 7);
    }
}
