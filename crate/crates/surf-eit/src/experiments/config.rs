//! TOML configuration of an experiment run.
//!
//! ```toml
//! out = "out/mobius"
//! seed = 11
//!
//! [surface]
//! family = "mobius"        # disk | annulus | mobius | mobius-with-hole | torus-with-hole
//! r = 2.0                  # Möbius radius; `rho` for the annulus, `hole` for holes
//! model = "fem"            # fem | analytic
//! h = 0.1                  # mesh edge length (fem)
//! nodes = 128              # boundary nodes (analytic)
//! kmax = 12                # Fourier cutoff of the FEM DN map and of d_op
//!
//! [sweep]
//! mode = "shear"           # shear | conformal
//! epsilons = [1e-3, 1e-2, 1e-1]
//! ```
//!
//! Every other table (`embedding`, `tolerances`, `reconstruct`, `geodesic`,
//! `map`) is optional and falls back to the defaults below.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::argument_principle::{CoverConfig, ReconstructConfig};
use crate::correspondence::{GeodesicConfig, MapConfig};
use crate::error::{Result, SurfError};
use crate::forward_models::{Family, PerturbationMode, Profile, DEFAULT_FEM_KMAX};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Fem,
    Analytic,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurfaceConfig {
    pub family: String,
    pub r: Option<f64>,
    pub rho: Option<f64>,
    pub hole: Option<f64>,
    #[serde(default = "default_model")]
    pub model: ModelKind,
    #[serde(default = "default_h")]
    pub h: f64,
    #[serde(default = "default_nodes")]
    pub nodes: usize,
    #[serde(default = "default_kmax")]
    pub kmax: usize,
}

fn default_model() -> ModelKind {
    ModelKind::Fem
}
fn default_h() -> f64 {
    0.1
}
fn default_nodes() -> usize {
    128
}
fn default_kmax() -> usize {
    DEFAULT_FEM_KMAX
}

impl SurfaceConfig {
    pub fn family(&self) -> Result<Family> {
        let need = |v: Option<f64>, name: &str| v.ok_or_else(|| SurfError::Config(format!("family `{}` needs `{name}`", self.family)));
        Ok(match self.family.as_str() {
            "disk" => Family::Disk,
            "annulus" => Family::Annulus { rho: need(self.rho, "rho")? },
            "mobius" => Family::Mobius { r: need(self.r, "r")? },
            "mobius-with-hole" => Family::MobiusWithHole { r: need(self.r, "r")?, hole: need(self.hole, "hole")? },
            "torus-with-hole" => Family::TorusWithHole { hole: need(self.hole, "hole")? },
            other => return Err(SurfError::UnknownFamily(other.into())),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub mode: PerturbationMode,
    pub epsilons: Vec<f64>,
    #[serde(default = "default_profile")]
    pub profile: Profile,
}

fn default_profile() -> Profile {
    Profile::Default
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbeddingConfig {
    /// Nodes per loop after resampling the traces.
    pub nodes: usize,
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        EmbeddingConfig { nodes: 1024 }
    }
}

/// Thresholds a run is judged against; every sweep row records them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Accepted normalized residual of null-set members.
    pub tol_null: f64,
    pub tol_orient: f64,
    /// Symmetry defect of analytic embedding data.
    pub tol_sym: f64,
    /// Equivariance of the correspondence map; descent fails above 10×.
    pub tol_equivariance: f64,
    /// sup log K allowed for Λ' = Λ and for conformal perturbations.
    pub null_log_k: f64,
    /// d_H allowed for Λ' = Λ.
    pub null_d_h: f64,
    /// Minimum fitted d_T-vs-t slope of shear sweeps.
    pub min_slope: f64,
    /// Allowed max/min ratio of the lower-bound constant.
    pub lower_bound_spread: f64,
    /// Fraction of failed rows above which the sweep fails.
    pub max_failed_fraction: f64,
    /// Rows with t below `noise_factor` × null level are left out of fits.
    pub noise_factor: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            tol_null: 1e-2,
            tol_orient: 1.3e-3,
            tol_sym: 1e-8,
            tol_equivariance: 1e-5,
            null_log_k: 5e-3,
            null_d_h: 1e-5,
            min_slope: 0.3,
            lower_bound_spread: 3.0,
            max_failed_fraction: 0.2,
            noise_factor: 10.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReconstructSettings {
    pub rho0: f64,
    pub rows: usize,
    pub random_directions: usize,
}

impl Default for ReconstructSettings {
    fn default() -> Self {
        let c = ReconstructConfig::default();
        ReconstructSettings { rho0: c.cover.rho0, rows: c.rows, random_directions: c.cover.random_directions }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeodesicSettings {
    pub r0: f64,
    pub steps: usize,
    pub per_loop: usize,
}

impl Default for GeodesicSettings {
    fn default() -> Self {
        GeodesicSettings { r0: GeodesicConfig::default().r0_request, steps: 64, per_loop: 64 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MapSettings {
    pub r0: Option<f64>,
    pub row_stride: usize,
    pub interior_stride: usize,
}

impl Default for MapSettings {
    fn default() -> Self {
        MapSettings { r0: None, row_stride: 4, interior_stride: 8 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub surface: SurfaceConfig,
    pub sweep: Option<SweepConfig>,
    #[serde(default)]
    pub embedding: EmbeddingConfig,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub reconstruct: ReconstructSettings,
    #[serde(default)]
    pub geodesic: GeodesicSettings,
    #[serde(default)]
    pub map: MapSettings,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}
fn default_seed() -> u64 {
    11
}

fn positive(v: f64, name: &str) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(SurfError::Config(format!("`{name}` must be positive, got {v}")))
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| SurfError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| SurfError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let family = self.surface.family()?;
        positive(self.surface.h, "surface.h")?;
        if self.surface.model == ModelKind::Analytic && matches!(family, Family::MobiusWithHole { .. } | Family::TorusWithHole { .. }) {
            return Err(SurfError::Config(format!("no analytic model for `{}`", family.name())));
        }
        if self.surface.nodes < 16 || self.surface.nodes % 2 != 0 {
            return Err(SurfError::Config(format!("surface.nodes = {} must be even and at least 16", self.surface.nodes)));
        }
        if self.surface.kmax == 0 {
            return Err(SurfError::Config("surface.kmax must be positive".into()));
        }
        if let Some(s) = &self.sweep {
            if s.epsilons.is_empty() {
                return Err(SurfError::Config("sweep.epsilons is empty".into()));
            }
            for e in &s.epsilons {
                positive(*e, "sweep.epsilons")?;
            }
            if s.epsilons.windows(2).any(|w| w[1] <= w[0]) {
                return Err(SurfError::Config("sweep.epsilons must be strictly increasing".into()));
            }
        }
        let t = &self.tolerances;
        for (v, n) in [
            (t.tol_null, "tol_null"),
            (t.tol_orient, "tol_orient"),
            (t.tol_sym, "tol_sym"),
            (t.tol_equivariance, "tol_equivariance"),
            (t.null_log_k, "null_log_k"),
            (t.null_d_h, "null_d_h"),
            (t.lower_bound_spread, "lower_bound_spread"),
            (t.noise_factor, "noise_factor"),
            (self.reconstruct.rho0, "reconstruct.rho0"),
            (self.geodesic.r0, "geodesic.r0"),
        ] {
            positive(v, n)?;
        }
        if !(0.0..=1.0).contains(&t.max_failed_fraction) {
            return Err(SurfError::Config("max_failed_fraction must lie in [0, 1]".into()));
        }
        if self.embedding.nodes < 16 {
            return Err(SurfError::Config("embedding.nodes must be at least 16".into()));
        }
        if self.geodesic.steps < 4 || self.geodesic.per_loop < 4 {
            return Err(SurfError::Config("geodesic sampling too coarse".into()));
        }
        Ok(())
    }

    pub fn reconstruct_config(&self) -> ReconstructConfig {
        let d = ReconstructConfig::default();
        ReconstructConfig {
            cover: CoverConfig {
                rho0: self.reconstruct.rho0,
                random_directions: self.reconstruct.random_directions,
                seed: self.seed,
                ..d.cover
            },
            nodes: self.embedding.nodes,
            rows: self.reconstruct.rows,
            ..d
        }
    }

    pub fn geodesic_config(&self) -> GeodesicConfig {
        GeodesicConfig { r0_request: self.geodesic.r0, steps: self.geodesic.steps, per_loop: self.geodesic.per_loop, ..GeodesicConfig::default() }
    }

    pub fn map_config(&self) -> MapConfig {
        MapConfig { r0: self.map.r0, row_stride: self.map.row_stride, interior_stride: self.map.interior_stride, ..MapConfig::default() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "[surface]\nfamily = \"disk\"\n";

    #[test]
    fn minimal_config_takes_defaults() {
        let c = ExperimentConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(c.surface.family().unwrap(), Family::Disk);
        assert_eq!(c.seed, 11);
        assert_eq!(c.tolerances, Tolerances::default());
    }

    #[test]
    fn unknown_family_is_a_config_error() {
        let err = ExperimentConfig::from_toml("[surface]\nfamily = \"klein\"\n").unwrap_err();
        assert!(matches!(err, SurfError::UnknownFamily(_)));
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn epsilons_must_increase() {
        let text = format!("{MINIMAL}[sweep]\nmode = \"shear\"\nepsilons = [1e-2, 1e-3]\n");
        assert_eq!(ExperimentConfig::from_toml(&text).unwrap_err().exit_code(), 2);
        let text = format!("{MINIMAL}[sweep]\nmode = \"shear\"\nepsilons = [0.0, 1e-3]\n");
        assert!(ExperimentConfig::from_toml(&text).is_err());
        let text = format!("{MINIMAL}[sweep]\nmode = \"conformal\"\nepsilons = [1e-3, 1e-2]\n");
        assert!(ExperimentConfig::from_toml(&text).is_ok());
    }

    #[test]
    fn missing_parameters_and_typos_are_rejected() {
        assert!(matches!(ExperimentConfig::from_toml("[surface]\nfamily = \"mobius\"\n"), Err(SurfError::Config(_))));
        assert!(matches!(ExperimentConfig::from_toml("[surface]\nfamily = \"disk\"\nhh = 0.1\n"), Err(SurfError::Config(_))));
        let err = ExperimentConfig::from_toml("[surface]\nfamily = \"torus-with-hole\"\nhole = 0.3\nmodel = \"analytic\"\n").unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }
}
