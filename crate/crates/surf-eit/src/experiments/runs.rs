//! Single-model runs: forward solve, traces, reconstruction and topology.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::model::Model;
use crate::argument_principle::reconstruct_surface;
use crate::boundary_calculus::{write_function_csv, DNMatrix};
use crate::error::Result;
use crate::forward_models::{dn_annulus_on, dn_disk, dn_mobius, Family};
use crate::trace_equations::{
    default_trials, euler_characteristic, null_space, orientability_probe, AdmissibleMapHandle, NullSpaceConfig, Orientability, ProbeConfig, RankConfig,
};

pub(crate) fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(dir.join(name), text)?;
    Ok(())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModeCheck {
    pub k: usize,
    pub value: f64,
    pub oracle: f64,
    pub rel_error: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ForwardReport {
    pub family: String,
    pub loops: Vec<usize>,
    pub asymmetry: f64,
    pub constant_defect: f64,
    pub flux_defect: f64,
    pub mesh_error: Option<f64>,
    /// Outer-loop Rayleigh quotients against the analytic map on the same grid.
    pub modes: Vec<ModeCheck>,
    pub max_rel_error: Option<f64>,
}

/// Analytic Λ on the grid of `lambda`, where one is known.
pub fn oracle_for(family: &Family, lambda: &DNMatrix) -> Result<Option<DNMatrix>> {
    let g = &lambda.grid;
    Ok(match *family {
        Family::Disk => Some(dn_disk(g.loops[0].nodes)?),
        Family::Annulus { rho } => Some(dn_annulus_on(g.clone(), rho)?),
        Family::Mobius { r } => Some(dn_mobius(r, g.loops[0].nodes)?),
        _ => None,
    })
}

/// Mode-by-mode comparison on loop 0 for 1 ≤ k ≤ `kcheck`.
pub fn mode_checks(lambda: &DNMatrix, oracle: &DNMatrix, kcheck: usize) -> Vec<ModeCheck> {
    let kmax = kcheck.min(lambda.grid.loops[0].nodes / 2 - 1);
    (1..=kmax)
        .map(|k| {
            let value = lambda.mode_value(0, k);
            let exact = oracle.mode_value(0, k);
            ModeCheck { k, value, oracle: exact, rel_error: (value - exact).abs() / exact.abs() }
        })
        .collect()
}

pub fn forward_report(model: &Model) -> Result<ForwardReport> {
    let l = &model.lambda;
    let modes = match oracle_for(&model.family, l)? {
        Some(o) => mode_checks(l, &o, model.kmax.min(8)),
        None => Vec::new(),
    };
    let max_rel_error = (!modes.is_empty()).then(|| modes.iter().map(|m| m.rel_error).fold(0.0, f64::max));
    Ok(ForwardReport {
        family: model.family.name().into(),
        loops: l.grid.loops.iter().map(|l| l.nodes).collect(),
        asymmetry: l.l2_asymmetry(),
        constant_defect: l.constant_defect(),
        flux_defect: l.flux_defect(),
        mesh_error: model.mesh_error,
        modes,
        max_rel_error,
    })
}

/// Writes `dn.json` and `forward.json`.
pub fn run_forward(cfg: &ExperimentConfig) -> Result<ForwardReport> {
    let model = Model::build(cfg)?;
    let report = forward_report(&model)?;
    fs::create_dir_all(&cfg.out)?;
    fs::write(cfg.out.join("dn.json"), model.lambda.to_json()?)?;
    write_json(&cfg.out, "forward.json", &report)?;
    Ok(report)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TracesReport {
    pub family: String,
    pub orientable: bool,
    pub coordinates: usize,
    pub codim: usize,
    pub gap_ratio: f64,
    pub anchor_residual: f64,
    pub symmetry_defect: f64,
    /// max_k ‖η_k − w_k‖_{C⁰} against the canonical coordinates.
    pub trace_error: f64,
}

/// Writes `trace_<k>.csv`, `null_space.json` and `traces.json`.
pub fn run_traces(cfg: &ExperimentConfig) -> Result<TracesReport> {
    let model = Model::build(cfg)?;
    let spec = model.embedding(cfg.tolerances.tol_null)?;
    let handle = AdmissibleMapHandle::new(model.lambda.clone(), model.orientable);
    let basis = null_space(&handle, None, &NullSpaceConfig { seed: cfg.seed, ..NullSpaceConfig::for_handle(&handle) })?;
    let n = model.lambda.grid.node_count();
    let maps = model.canonical_maps()?;
    let mut trace_error: f64 = 0.0;
    for (eta, w) in spec.traces.iter().zip(&maps) {
        for (i, &z) in model.positions.iter().enumerate() {
            trace_error = trace_error.max((eta.values[i] - w(z)).norm());
            if !model.orientable {
                trace_error = trace_error.max((eta.values[i + n] - w(-1.0 / z.conj())).norm());
            }
        }
    }
    fs::create_dir_all(&cfg.out)?;
    for (k, eta) in spec.traces.iter().enumerate() {
        write_function_csv(eta, BufWriter::new(File::create(cfg.out.join(format!("trace_{k}.csv")))?))?;
    }
    fs::write(cfg.out.join("null_space.json"), basis.to_json()?)?;
    let report = TracesReport {
        family: model.family.name().into(),
        orientable: model.orientable,
        coordinates: spec.n(),
        codim: basis.codim(),
        gap_ratio: basis.analysis.gap_ratio,
        anchor_residual: basis.anchor_residual,
        symmetry_defect: spec.symmetry_defect(),
        trace_error,
    };
    write_json(&cfg.out, "traces.json", &report)?;
    Ok(report)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReconstructReport {
    pub family: String,
    pub points: usize,
    pub cylinders: usize,
    pub max_overlap: f64,
    pub mirror_defect: f64,
    pub quadrature_error: f64,
}

/// Writes `surface.csv` and `manifest.json`.
pub fn run_reconstruct(cfg: &ExperimentConfig) -> Result<ReconstructReport> {
    let model = Model::build(cfg)?;
    let spec = model.embedding(cfg.tolerances.tol_null)?;
    let surface = reconstruct_surface(&spec, &cfg.reconstruct_config())?;
    fs::create_dir_all(&cfg.out)?;
    surface.write_csv(BufWriter::new(File::create(cfg.out.join("surface.csv"))?))?;
    fs::write(cfg.out.join("manifest.json"), surface.manifest_json()?)?;
    Ok(ReconstructReport {
        family: model.family.name().into(),
        points: surface.points.len(),
        cylinders: surface.cover.cylinders.len(),
        max_overlap: surface.max_overlap(),
        mirror_defect: surface.mirror_defect,
        quadrature_error: surface.quadrature_error.iter().copied().fold(0.0, f64::max),
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TopologyVerdict {
    pub family: String,
    pub orientable: bool,
    pub chi: i64,
    pub residual: f64,
    pub margin: f64,
    pub codim: usize,
    pub gap_ratio: f64,
    pub singular_values: Vec<f64>,
}

pub fn topology_verdict(model: &Model, tol_orient: f64) -> Result<TopologyVerdict> {
    let l = &model.lambda;
    let probe = orientability_probe(l, &default_trials(l), &ProbeConfig { tol_orient, ..ProbeConfig::default() })?;
    let orientable = probe.verdict == Orientability::Orientable;
    let rank = if model.mesh.is_some() { RankConfig::fem() } else { RankConfig::default() };
    let euler = euler_characteristic(l, orientable, &rank)?;
    Ok(TopologyVerdict {
        family: model.family.name().into(),
        orientable,
        chi: euler.chi,
        residual: probe.residual,
        margin: probe.margin,
        codim: euler.codim,
        gap_ratio: euler.analysis.gap_ratio,
        singular_values: euler.analysis.singular_values,
    })
}

/// Writes `topology.json`.
pub fn run_topology_probe(cfg: &ExperimentConfig) -> Result<TopologyVerdict> {
    let model = Model::build(cfg)?;
    let verdict = topology_verdict(&model, cfg.tolerances.tol_orient)?;
    write_json(&cfg.out, "topology.json", &verdict)?;
    Ok(verdict)
}
