//! End-to-end runs of the `surf-eit` binary.

use std::path::Path;
use std::process::Command;

fn surf_eit(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_surf-eit")).args(args).output().expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

const SMALL_SWEEP: &str = r#"
[surface]
family = "annulus"
rho = 0.5
h = 0.05

[sweep]
mode = "shear"
epsilons = [1e-2, 1e-1]

[embedding]
nodes = 256

[geodesic]
per_loop = 32
steps = 32
"#;

#[test]
fn forward_writes_dn_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "disk.toml", "[surface]\nfamily = \"disk\"\nh = 0.08\n");
    let out = dir.path().join("out");
    let o = surf_eit(&["forward", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("dn.json").exists());
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("forward.json")).unwrap()).unwrap();
    assert!(report["max_rel_error"].as_f64().unwrap() < 0.05);
}

#[test]
fn configuration_problems_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.toml", "[surface]\nfamily = \"klein-bottle\"\n");
    let o = surf_eit(&["topology", "--config", &bad]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("unknown surface family"));
    let o = surf_eit(&["forward", "--config", dir.path().join("missing.toml").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let o = surf_eit(&["sweep", "--config", &write(dir.path(), "nosweep.toml", "[surface]\nfamily = \"disk\"\n")]);
    assert_eq!(o.status.code(), Some(2));
    let o = surf_eit(&["forward"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn numerical_failures_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    // No band-limited input passes a null-set test this strict.
    let cfg = write(dir.path(), "strict.toml", "[surface]\nfamily = \"annulus\"\nrho = 0.5\nh = 0.1\n[tolerances]\ntol_null = 1e-30\n");
    let o = surf_eit(&["traces", "--config", &cfg, "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn sweep_output_is_byte_identical_across_runs_and_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "sweep.toml", SMALL_SWEEP);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let o = surf_eit(&["sweep", "--config", &cfg, "--out", a.to_str().unwrap(), "--seed", "5", "--jobs", "1"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let o = surf_eit(&["sweep", "--config", &cfg, "--out", b.to_str().unwrap(), "--seed", "5"]);
    assert!(o.status.success());
    for f in ["sweep.csv", "sweep.json", "sweep.dat", "sweep.gp"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    let csv = std::fs::read_to_string(a.join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    assert!(csv.lines().next().unwrap().contains("tol_null"));
    assert!(String::from_utf8_lossy(&o.stdout).contains("dt_slope"));
}
