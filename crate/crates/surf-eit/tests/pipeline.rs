//! Library-level runs of the experiment pipeline on small models.

use surf_eit::experiments::{run_reconstruct, run_stability_sweep, run_topology_probe, run_traces, ExperimentConfig};
use surf_eit::forward_models::PerturbationMode;

fn config(text: &str, out: &std::path::Path) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::from_toml(text).unwrap();
    cfg.out = out.to_path_buf();
    cfg
}

#[test]
fn analytic_mobius_traces_match_the_canonical_coordinates() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("[surface]\nfamily = \"mobius\"\nr = 2.0\nmodel = \"analytic\"\nnodes = 128\n", dir.path());
    let rep = run_traces(&cfg).unwrap();
    assert_eq!((rep.orientable, rep.coordinates, rep.codim), (false, 2, 0));
    assert!(rep.trace_error < 1e-10, "{}", rep.trace_error);
    assert!(rep.symmetry_defect < 1e-12);
    assert!(dir.path().join("trace_1.csv").exists() && dir.path().join("null_space.json").exists());
}

#[test]
fn fem_annulus_reconstruction_and_topology() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("[surface]\nfamily = \"annulus\"\nrho = 0.5\nh = 0.05\n[embedding]\nnodes = 256\n", dir.path());
    let verdict = run_topology_probe(&cfg).unwrap();
    assert!(verdict.orientable);
    assert_eq!(verdict.chi, 0);
    let rec = run_reconstruct(&cfg).unwrap();
    assert!(rec.points > 100);
    assert!(rec.max_overlap < 1e-6, "{}", rec.max_overlap);
    let csv = std::fs::read_to_string(dir.path().join("surface.csv")).unwrap();
    assert_eq!(csv.lines().count(), rec.points + 1);
}

#[test]
fn conformal_sweep_stays_at_the_null_level() {
    let dir = tempfile::tempdir().unwrap();
    let text = "[surface]\nfamily = \"annulus\"\nrho = 0.5\nh = 0.05\n[sweep]\nmode = \"conformal\"\nepsilons = [1e-2, 1e-1]\n\
                [embedding]\nnodes = 256\n[geodesic]\nper_loop = 32\nsteps = 32\n";
    let res = run_stability_sweep(&config(text, dir.path())).unwrap();
    assert_eq!(res.mode, PerturbationMode::Conformal);
    // A constant-per-triangle conformal factor leaves the P1 stiffness unchanged.
    assert!(res.null_level < 1e-10, "{}", res.null_level);
    for r in res.reports() {
        assert!(r.sup_log_k < 5e-3, "{}", r.sup_log_k);
        assert_eq!(r.log_k_true, Some(0.0));
    }
    assert!(res.verdicts.iter().all(|v| v.pass), "{:?}", res.verdicts);
}
