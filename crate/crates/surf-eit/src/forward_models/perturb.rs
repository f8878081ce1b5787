//! Smooth metric perturbations with a known dilatation.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::mesh::{boundary_triangles, Family, SurfaceMesh};
use crate::error::{Result, SurfError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PerturbationMode {
    /// g ↦ e^{εφ} g.
    Conformal,
    /// Stretches the chart x-direction by e^{εφ}.
    Shear,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Profile {
    /// Interior bump adapted to the family (τ-invariant on covers).
    Default,
    /// Euclidean bump in chart coordinates.
    Bump { center: [f64; 2], radius: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerturbationSpec {
    pub epsilon: f64,
    pub mode: PerturbationMode,
    #[serde(default = "default_profile")]
    pub profile: Profile,
    /// Require the boundary length element to stay unchanged.
    #[serde(default = "default_true")]
    pub preserve_boundary: bool,
}

fn default_profile() -> Profile {
    Profile::Default
}

fn default_true() -> bool {
    true
}

/// exp(1 − 1/(1 − t²)) on |t| < 1, zero outside; peak value 1 at t = 0.
pub fn bump(t: f64) -> f64 {
    if t.abs() >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - t * t)).exp()
    }
}

fn wrapped(d: f64, p: Option<f64>) -> f64 {
    match p {
        Some(p) => d - p * (d / p).round(),
        None => d,
    }
}

/// Profile value φ ∈ [0, 1] at a chart point.
pub fn profile_value(mesh: &SurfaceMesh, profile: &Profile, p: [f64; 2]) -> f64 {
    let (x, y) = (p[0], p[1]);
    match profile {
        Profile::Bump { center, radius } => {
            let dx = wrapped(x - center[0], mesh.period[0]);
            let dy = wrapped(y - center[1], mesh.period[1]);
            bump((dx * dx + dy * dy).sqrt() / radius)
        }
        Profile::Default => match mesh.family {
            Family::Disk => profile_value(mesh, &Profile::Bump { center: [0.2, -0.1], radius: 0.5 }, p),
            Family::Annulus { rho } => {
                let r = (x * x + y * y).sqrt();
                let (mid, half) = (0.5 * (1.0 + rho), 0.35 * (1.0 - rho));
                bump((r - mid) / half) * (3.0 + (y.atan2(x) - 0.4).cos()) / 4.0
            }
            Family::Mobius { r } => bump(x / (0.6 * r.ln())) * 0.5 * (1.0 + (2.0 * y - 0.5).cos()),
            Family::MobiusWithHole { r, hole } => {
                let dy = wrapped(y, Some(PI)).abs();
                bump(x / (0.6 * r.ln())) * bump(dy / (PI / 2.0 - hole - 0.1))
            }
            Family::TorusWithHole { .. } => profile_value(mesh, &Profile::Bump { center: [0.5, 0.0], radius: 0.2 }, p),
        },
    }
}

/// Applies `spec` triangle-wise (profile sampled at centroids) and records
/// the ground-truth sup log K of the identity map.
pub fn perturb_metric(mesh: &SurfaceMesh, spec: &PerturbationSpec) -> Result<SurfaceMesh> {
    if !(spec.epsilon >= 0.0) || !spec.epsilon.is_finite() {
        return Err(SurfError::DegenerateParameters(format!("perturbation magnitude {}", spec.epsilon)));
    }
    if spec.epsilon == 0.0 {
        return Ok(mesh.clone());
    }
    let phi: Vec<f64> = (0..mesh.triangles.len()).map(|t| profile_value(mesh, &spec.profile, mesh.centroid(t))).collect();
    if spec.preserve_boundary {
        if let Some(t) = boundary_triangles(mesh).into_iter().find(|&t| phi[t] != 0.0) {
            return Err(SurfError::BoundaryLengthChanged(format!("profile is nonzero on boundary triangle {t}")));
        }
    }
    let mut out = mesh.clone();
    let eps = spec.epsilon;
    let mut log_k: f64 = 0.0;
    for (g, &f) in out.metrics.iter_mut().zip(&phi) {
        if f == 0.0 {
            continue;
        }
        match spec.mode {
            PerturbationMode::Conformal => {
                let c = (eps * f).exp();
                *g = [g[0] * c, g[1] * c, g[2] * c];
            }
            PerturbationMode::Shear => {
                // G + (e^{2εφ} − 1)(Gv)(Gv)ᵀ/(vᵀGv) with v = ∂_x.
                let s = ((2.0 * eps * f).exp() - 1.0) / g[0];
                let gv = [g[0], g[1]];
                *g = [g[0] + s * gv[0] * gv[0], g[1] + s * gv[0] * gv[1], g[2] + s * gv[1] * gv[1]];
                log_k = log_k.max(2.0 * eps * f);
            }
        }
    }
    out.perturbed = true;
    out.ground_truth_log_k = log_k;
    out.validate()?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward_models::build_mesh;

    fn shear(eps: f64) -> PerturbationSpec {
        PerturbationSpec { epsilon: eps, mode: PerturbationMode::Shear, profile: Profile::Default, preserve_boundary: true }
    }

    #[test]
    fn zero_magnitude_is_identity() {
        let m = build_mesh(&Family::Disk, 0.2).unwrap();
        assert_eq!(perturb_metric(&m, &shear(0.0)).unwrap(), m);
    }

    #[test]
    fn shear_dilatation_matches_eigenvalue_ratio() {
        let m = build_mesh(&Family::Disk, 0.1).unwrap();
        let p = perturb_metric(&m, &shear(0.1)).unwrap();
        // Independent oracle: eigenvalue ratio of each perturbed metric
        // relative to the (Euclidean) original.
        let worst = p
            .metrics
            .iter()
            .map(|g| {
                let (lo, hi) = SurfaceMesh::metric_eigenvalues(*g);
                (hi / lo).ln()
            })
            .fold(0.0, f64::max);
        assert!((worst - p.ground_truth_log_k).abs() < 1e-12);
        assert!(p.ground_truth_log_k <= 0.2 + 1e-12 && p.ground_truth_log_k > 0.19);
    }

    #[test]
    fn boundary_support_is_rejected() {
        let m = build_mesh(&Family::Disk, 0.2).unwrap();
        let mut s = shear(0.1);
        s.profile = Profile::Bump { center: [0.9, 0.0], radius: 0.5 };
        assert!(matches!(perturb_metric(&m, &s), Err(SurfError::BoundaryLengthChanged(_))));
        s.preserve_boundary = false;
        assert!(perturb_metric(&m, &s).is_ok());
    }

    #[test]
    fn default_profiles_are_tau_invariant_on_covers() {
        for fam in [Family::Mobius { r: 2.0 }, Family::MobiusWithHole { r: 2.0, hole: 0.45 }] {
            let m = build_mesh(&fam, 0.2).unwrap();
            let c = m.cover.as_ref().unwrap();
            for v in 0..m.vertices.len() {
                let a = profile_value(&m, &Profile::Default, m.vertices[v]);
                let b = profile_value(&m, &Profile::Default, m.vertices[c.tau[v]]);
                assert!((a - b).abs() < 1e-12);
            }
            assert!(perturb_metric(&m, &shear(0.1)).is_ok());
        }
    }
}
