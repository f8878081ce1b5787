//! Acceptance run: one pass/fail line per criterion.
//!
//! Tolerances are pinned here rather than read from configuration so that a
//! changed default cannot silently loosen a criterion.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use surf_eit::argument_principle::{reconstruct_near_boundary, reconstruct_surface, CylinderKind, EmbeddingSpec, Location, ReconstructConfig};
use surf_eit::boundary_calculus::{BoundaryFunction, DNMatrix, ModeBasis};
use surf_eit::experiments::{fit_loglog, mode_checks, run_stability_sweep, topology_verdict, ExperimentConfig, Model, SlopeFit, SweepResult, TopologyVerdict};
use surf_eit::forward_models::{
    build_mesh, dn_annulus, dn_disk, dn_fem, dn_mobius, mesh_error_estimate, perturb_metric, AnnulusBoundary, Family, PerturbationMode, PerturbationSpec, Profile,
    DEFAULT_FEM_KMAX,
};
use surf_eit::trace_equations::{
    default_trials, frak_n, frak_q, g_map, g_relative, null_space, orientability_probe, q_terms, transfer_y, AdmissibleMapHandle, GAnchor, NullSpaceConfig, ProbeConfig,
    TransferConfig,
};

type Bf = BoundaryFunction<f64>;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Result<Outcome, String> {
    Ok(Outcome { pass, detail })
}

fn band_limited(l: &DNMatrix, kmax: usize, rng: &mut ChaCha8Rng) -> Bf {
    let basis = ModeBasis::new(l.grid.clone(), kmax);
    let coeffs: Vec<f64> = (0..basis.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    basis.synthesize(&coeffs).remove_means()
}

fn disk_mode_error(h: f64) -> Result<(f64, Duration), String> {
    let mesh = build_mesh(&Family::Disk, h).map_err(|e| e.to_string())?;
    let t0 = Instant::now();
    let l = dn_fem(&mesh, DEFAULT_FEM_KMAX).map_err(|e| e.to_string())?;
    let elapsed = t0.elapsed();
    let oracle = dn_disk(l.grid.loops[0].nodes).map_err(|e| e.to_string())?;
    Ok((mode_checks(&l, &oracle, 8).iter().map(|m| m.rel_error).fold(0.0, f64::max), elapsed))
}

/// FEM disk modes |k| ≤ 8 within 2% at h = 0.03, halving h gains ≥ 40%, under 2 min.
fn forward_accuracy() -> Result<Outcome, String> {
    let (coarse, _) = disk_mode_error(0.06)?;
    let (fine, elapsed) = disk_mode_error(0.03)?;
    let gain = 1.0 - fine / coarse;
    outcome(
        fine <= 0.02 && gain >= 0.4 && elapsed.as_secs_f64() <= 120.0,
        format!("max rel err {fine:.2e} (≤ 2e-2), coarse {coarse:.2e}, reduction {:.0}% (≥ 40%), solve {:.1}s", 100.0 * gain, elapsed.as_secs_f64()),
    )
}

/// ‖𝔇f‖/‖f‖_{C³} ≤ 1e-8 on the analytic disk and ≤ 3× mesh error with FEM.
fn orientable_trace_criterion() -> Result<Outcome, String> {
    let l = dn_disk(128).map_err(|e| e.to_string())?;
    let probe = orientability_probe(&l, &default_trials(&l), &ProbeConfig::default()).map_err(|e| e.to_string())?;
    let analytic = probe.trial_residuals.iter().copied().fold(0.0, f64::max);
    let mesh = build_mesh(&Family::Disk, 0.03).map_err(|e| e.to_string())?;
    let lf = dn_fem(&mesh, DEFAULT_FEM_KMAX).map_err(|e| e.to_string())?;
    let pf = orientability_probe(&lf, &default_trials(&lf), &ProbeConfig::default()).map_err(|e| e.to_string())?;
    let fem = pf.trial_residuals.iter().copied().fold(0.0, f64::max);
    let err = mesh_error_estimate(&mesh, DEFAULT_FEM_KMAX);
    outcome(analytic <= 1e-8 && fem <= 3.0 * err, format!("analytic {analytic:.2e} (≤ 1e-8), FEM {fem:.2e} (≤ 3×{err:.2e})"))
}

fn l2_sum(terms: &[Bf]) -> f64 {
    terms.iter().map(|t| t.norm_l2()).sum::<f64>().max(1e-300)
}

/// 𝒢(cf) = c³𝒢(f), 𝔔(f,f) = 2𝔑(f) to 1e-9; splitting identity to 1e-10.
///
/// On these maps 𝔑, 𝔇 and 𝒢 nearly cancel, so each defect is measured
/// against the sum of the magnitudes of the terms that produce it.
fn homogeneity_and_algebra() -> Result<Outcome, String> {
    let e = |e: surf_eit::SurfError| e.to_string();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut hom: f64 = 0.0;
    let mut quad: f64 = 0.0;
    let mut split: f64 = 0.0;
    let maps = [dn_mobius(2.0, 128).map_err(e)?, dn_annulus(0.5, 128, AnnulusBoundary::Both).map_err(e)?, dn_disk(128).map_err(e)?];
    for l in &maps {
        for _ in 0..4 {
            let f = band_limited(l, 6, &mut rng);
            let h = band_limited(l, 6, &mut rng);
            let a = GAnchor::new(l, &f).map_err(e)?;
            for c in [0.3, 2.0, 7.0] {
                let defect = &g_map(l, &f.scale(c)).map_err(e)? - &a.value().scale(c * c * c);
                hom = hom.max(defect.norm_l2() / (c * c * c * a.scale()));
            }
            let q = q_terms(l, &f, &f).map_err(e)?;
            let n2 = frak_n(l, &f).map_err(e)?.scale(2.0);
            quad = quad.max((&frak_q(l, &f, &f).map_err(e)? - &n2).norm_l2() / l2_sum(&q));
            let (g1, g1_scale) = a.g1_with_scale(&h).map_err(e)?;
            let ah = GAnchor::new(l, &h).map_err(e)?;
            let afh = GAnchor::new(l, &(&f + &h)).map_err(e)?;
            let rhs = a.value() + g1 + a.g2(&h).map_err(e)? + ah.value();
            split = split.max((&afh.value() - &rhs).norm_l2() / (a.scale() + g1_scale + ah.scale() + afh.scale()));
        }
    }
    outcome(
        hom <= 1e-9 && quad <= 1e-9 && split <= 1e-10,
        format!("homogeneity {hom:.1e} (≤ 1e-9), 𝔔 = 2𝔑 {quad:.1e} (≤ 1e-9), splitting {split:.1e} (≤ 1e-10)"),
    )
}

fn topology(family: Family, h: f64) -> Result<TopologyVerdict, String> {
    let mesh = build_mesh(&family, h).map_err(|e| e.to_string())?;
    let l = dn_fem(&mesh, DEFAULT_FEM_KMAX).map_err(|e| e.to_string())?;
    let model = Model::from_mesh(mesh, l, DEFAULT_FEM_KMAX);
    topology_verdict(&model, 1.3e-3).map_err(|e| e.to_string())
}

/// Möbius band: 𝒢 vanishes on band-limited f; Möbius with a hole: codim 1, gap ≥ 1e2.
fn null_set_dimension(hole: &TopologyVerdict) -> Result<Outcome, String> {
    let e = |e: surf_eit::SurfError| e.to_string();
    let tol_null = 1e-2;
    let l = dn_mobius(2.0, 128).map_err(e)?;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    for _ in 0..32 {
        worst = worst.max(g_relative(&l, &band_limited(&l, 8, &mut rng)).map_err(e)?);
    }
    let handle = AdmissibleMapHandle::new(l, false);
    let basis = null_space(&handle, None, &NullSpaceConfig::for_handle(&handle)).map_err(e)?;
    outcome(
        worst <= tol_null && basis.codim() == 0 && hole.codim == 1 && hole.gap_ratio >= 1e2,
        format!("Möbius max ‖𝒢f‖ rel {worst:.1e} (≤ {tol_null:.0e}), codim {}; with hole codim {} gap {:.1e} (≥ 1e2)", basis.codim(), hole.codim, hole.gap_ratio),
    )
}

/// (orientable, χ) for disk, annulus, Möbius, Möbius with hole, margins ≥ 10.
fn topology_probes(verdicts: &[(TopologyVerdict, bool, i64)]) -> Result<Outcome, String> {
    let mut pass = true;
    let mut parts = Vec::new();
    for (v, orientable, chi) in verdicts {
        let ok = v.orientable == *orientable && v.chi == *chi && v.margin >= 10.0;
        pass &= ok;
        parts.push(format!("{} ({}, {}) ×{:.0}", v.family, if v.orientable { "+" } else { "−" }, v.chi, v.margin));
    }
    outcome(pass, parts.join("; "))
}

fn mobius_w(z: C64) -> [C64; 2] {
    [z - 1.0 / z, C64::i() * (z + 1.0 / z)]
}

/// Exact image point over ζ: solves Σ d_k w_k(z) = ζ by Newton from z0.
fn exact_over(dir: &[C64], zeta: C64, mut z: C64) -> Option<[C64; 2]> {
    for _ in 0..50 {
        let w = mobius_w(z);
        let f = dir[0] * w[0] + dir[1] * w[1] - zeta;
        let df = dir[0] * (1.0 + 1.0 / (z * z)) + dir[1] * C64::i() * (1.0 - 1.0 / (z * z));
        let step = f / df;
        z -= step;
        if step.norm() < 1e-15 * (1.0 + z.norm()) {
            break;
        }
    }
    z.is_finite().then(|| mobius_w(z))
}

fn error_to(xi: &[C64], exact: Option<[C64; 2]>) -> f64 {
    match exact {
        Some(w) => xi.iter().zip(w).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max),
        None => f64::INFINITY,
    }
}

/// Interior to 1e-6 at curve distance ≥ 0.1, strips to 1e-5 at ρ = 0.02,
/// symmetry closure ≤ 1e-7.
fn gap_reconstruction() -> Result<Outcome, String> {
    let e = |e: surf_eit::SurfError| e.to_string();
    let spec = EmbeddingSpec::mobius_cover(2.0, 1024).map_err(e)?;
    let surface = reconstruct_surface(&spec, &ReconstructConfig::default()).map_err(e)?;
    let proj = &surface.projection;
    let dir = &proj.direction;
    let mut interior: f64 = 0.0;
    let mut counted = 0;
    for p in &surface.points {
        let zeta = p.location.zeta();
        if matches!(p.location, Location::Strip { .. }) || proj.nearest(zeta).1 < 0.1 {
            continue;
        }
        let z0 = (p.xi[0] - C64::i() * p.xi[1]) / 2.0;
        interior = interior.max(error_to(&p.xi, exact_over(dir, zeta, z0)));
        counted += 1;
    }
    let mut strip: f64 = 0.0;
    for cyl in &surface.cover.cylinders {
        let CylinderKind::Boundary { start, .. } = cyl.kind else { continue };
        let rows = reconstruct_near_boundary(proj, cyl, &[0.02]).map_err(e)?;
        for (i, row) in rows.iter().enumerate() {
            let node = start + i;
            let zeta = proj.mu[node] + proj.normal(node) * 0.02;
            let t = proj.trace_at(node);
            let z0 = (t[0] - C64::i() * t[1]) / 2.0;
            strip = strip.max(error_to(&row[0], exact_over(dir, zeta, z0)));
        }
    }
    outcome(
        interior <= 1e-6 && strip <= 1e-5 && surface.mirror_defect <= 1e-7 && counted > 0,
        format!("interior {interior:.1e} over {counted} pts (≤ 1e-6), ρ = 0.02 strips {strip:.1e} (≤ 1e-5), closure {:.1e} (≤ 1e-7)", surface.mirror_defect),
    )
}

/// Λ' = Λ: sup log K ≤ 5e-3, d_H ≤ 1e-5; conformal: d_op ≤ 3× mesh error and log K at the null level.
fn null_test(conformal: &SweepResult) -> Result<Outcome, String> {
    let null = conformal.null_run.as_ref().ok_or("Λ' = Λ run failed")?;
    let mesh_error = conformal.mesh_error.unwrap_or(0.0);
    let worst = conformal.reports().map(|r| r.sup_log_k).fold(0.0, f64::max);
    let all_rows = conformal.reports().count() == conformal.rows.len();
    outcome(
        null.sup_log_k <= 5e-3 && null.d_h <= 1e-5 && conformal.null_level <= 3.0 * mesh_error && worst <= 5e-3 && all_rows,
        format!(
            "Λ'=Λ sup log K {:.1e} (≤ 5e-3), d_H {:.1e} (≤ 1e-5); conformal d_op {:.1e} (≤ 3×{mesh_error:.1e}), sup log K {worst:.1e} (≤ 5e-3)",
            null.sup_log_k, null.d_h, conformal.null_level
        ),
    )
}

fn slope(f: &Option<surf_eit::experiments::SlopeFit>) -> f64 {
    f.as_ref().map(|f| f.slope).unwrap_or(f64::NAN)
}

/// d_T slope ≥ 0.30 (Möbius) and ≥ 0.8 (annulus), d_H slope ≥ 0.30,
/// lower-bound constant within ×3, total under 30 min.
fn scaling_laws(mobius: &SweepResult, annulus: &SweepResult, elapsed: Duration) -> Result<Outcome, String> {
    let (sm, sa) = (slope(&mobius.dt_fit), slope(&annulus.dt_fit));
    let (hm, ha) = (slope(&mobius.dh_fit), slope(&annulus.dh_fit));
    let spread = mobius.lower_bound_spread.unwrap_or(f64::INFINITY).max(annulus.lower_bound_spread.unwrap_or(f64::INFINITY));
    let minutes = elapsed.as_secs_f64() / 60.0;
    let rows = mobius.dt_fit.as_ref().map_or(0, |f| f.points).min(annulus.dt_fit.as_ref().map_or(0, |f| f.points));
    outcome(
        sm >= 0.30 && sa >= 0.8 && hm >= 0.30 && ha >= 0.30 && spread <= 3.0 && minutes <= 30.0 && mobius.within_failure_budget() && annulus.within_failure_budget(),
        format!(
            "d_T slope Möbius {sm:.2} (≥ 0.30), annulus {sa:.2} (≥ 0.8); d_H slope {hm:.2}/{ha:.2} (≥ 0.30); lower-bound spread ×{spread:.2} (≤ 3); {rows}+ fitted rows; {minutes:.1} min (≤ 30)"
        ),
    )
}

/// ‖𝔜f − f‖_{C⁴} over a shear series on the Möbius band with a hole, where
/// the null set has codimension one and the transfer is not trivial.
fn holed_band_transfer() -> Result<(SlopeFit, bool), String> {
    let e = |e: surf_eit::SurfError| e.to_string();
    let mesh = build_mesh(&Family::MobiusWithHole { r: 2.5, hole: 0.6 }, 0.05).map_err(e)?;
    let l = dn_fem(&mesh, DEFAULT_FEM_KMAX).map_err(e)?;
    let g = AdmissibleMapHandle::new(l.clone(), false);
    let ns = null_space(&g, None, &NullSpaceConfig::for_handle(&g)).map_err(e)?;
    if ns.codim() != 1 {
        return Err(format!("holed band codimension {} (expected 1)", ns.codim()));
    }
    let f = ns.kernel[0].axpy(0.7, &ns.kernel[ns.kernel.len() - 1]);
    let (mut ts, mut shifts) = (Vec::new(), Vec::new());
    for eps in [1e-3, 3.73e-3, 1.39e-2, 5.18e-2, 1e-1] {
        let spec = PerturbationSpec { epsilon: eps, mode: PerturbationMode::Shear, profile: Profile::Default, preserve_boundary: true };
        let l2 = dn_fem(&perturb_metric(&mesh, &spec).map_err(e)?, DEFAULT_FEM_KMAX).map_err(e)?;
        ts.push(l2.d_op(&l, DEFAULT_FEM_KMAX).map_err(e)?);
        let g2 = AdmissibleMapHandle::new(l2, false);
        let moved = transfer_y(&g, &g2, &ns, &f, &TransferConfig::default()).map_err(e)?;
        shifts.push((&moved.f - &f).cl_norm(4));
    }
    let monotone = shifts.windows(2).all(|w| w[1] > w[0]);
    Ok((fit_loglog(&ts, &shifts).ok_or("degenerate transfer fit")?, monotone))
}

/// ‖𝔜f − f‖_{C⁴} increases with t at slope ≥ 0.30 wherever the null set has
/// positive codimension, and 𝔜 = id when Λ' = Λ or the codimension is zero.
fn transfer_map(sweeps: &[&SweepResult]) -> Result<Outcome, String> {
    let mut pass = true;
    let mut parts = Vec::new();
    for s in sweeps {
        let null = s.null_run.as_ref().ok_or("Λ' = Λ run failed")?;
        let identity_at_null = null.transfer_c4 == 0.0 && null.trace_closeness == 0.0;
        if s.codim == 0 {
            let worst = s.reports().map(|r| r.transfer_c4).fold(0.0, f64::max);
            pass &= identity_at_null && worst == 0.0;
            parts.push(format!("{} codim 0, 𝔜 = id on every row (max shift {worst:e})", s.family));
        } else {
            let k = slope(&s.transfer_fit);
            pass &= s.transfer_monotone && k >= 0.30 && identity_at_null;
            parts.push(format!("{} slope {k:.2} monotone {} identity at Λ'=Λ {identity_at_null}", s.family, s.transfer_monotone));
        }
    }
    let (fit, monotone) = holed_band_transfer()?;
    pass &= monotone && fit.slope >= 0.30;
    parts.push(format!("mobius-with-hole slope {:.2} monotone {monotone}", fit.slope));
    outcome(pass, parts.join("; "))
}

fn sweep(config: &str, out: &str) -> Result<SweepResult, String> {
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(config);
    let mut cfg = ExperimentConfig::load(&root).map_err(|e| e.to_string())?;
    cfg.out = std::env::temp_dir().join("surf-eit-acceptance").join(out);
    run_stability_sweep(&cfg).map_err(|e| e.to_string())
}

fn report(n: usize, name: &str, r: Result<Outcome, String>) -> bool {
    let (pass, detail) = match r {
        Ok(o) => (o.pass, o.detail),
        Err(e) => (false, format!("error: {e}")),
    };
    println!("criterion {n} {:<4} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    pass
}

fn main() -> ExitCode {
    let mut all = true;
    all &= report(1, "forward accuracy", forward_accuracy());
    all &= report(2, "orientable trace criterion", orientable_trace_criterion());
    all &= report(3, "homogeneity and algebra", homogeneity_and_algebra());

    let families = [
        (Family::Disk, 0.03, true, 1),
        (Family::Annulus { rho: 0.5 }, 0.05, true, 0),
        (Family::Mobius { r: 2.0 }, 0.1, false, 0),
        (Family::MobiusWithHole { r: 2.5, hole: 0.6 }, 0.05, false, -1),
    ];
    let verdicts: Result<Vec<_>, String> = families.into_iter().map(|(f, h, o, chi)| topology(f, h).map(|v| (v, o, chi))).collect();
    match &verdicts {
        Ok(v) => {
            all &= report(4, "null-set dimension", null_set_dimension(&v[3].0));
            all &= report(5, "topology probes", topology_probes(v));
        }
        Err(e) => {
            all &= report(4, "null-set dimension", Err(e.clone()));
            all &= report(5, "topology probes", Err(e.clone()));
        }
    }
    all &= report(6, "GAP reconstruction", gap_reconstruction());

    let conformal = sweep("mobius-conformal.toml", "conformal");
    all &= report(7, "null test", conformal.as_ref().map_err(Clone::clone).and_then(null_test));
    let t0 = Instant::now();
    let mobius = sweep("mobius.toml", "mobius");
    let annulus = sweep("annulus.toml", "annulus");
    let elapsed = t0.elapsed();
    match (&mobius, &annulus) {
        (Ok(m), Ok(a)) => {
            all &= report(8, "scaling laws", scaling_laws(m, a, elapsed));
            all &= report(9, "transfer map", transfer_map(&[m, a]));
        }
        (Err(e), _) | (_, Err(e)) => {
            all &= report(8, "scaling laws", Err(e.clone()));
            all &= report(9, "transfer map", Err(e.clone()));
        }
    }
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
