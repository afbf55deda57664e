use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use crvol::harmonics::{harmonic_basis, Part, RealField};
use crvol::hypersurface::RadialGraph;
use serde_json::Value;

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("crvol-cli-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn crvol(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_crvol")).args(args).arg("--out").arg(out).output().expect("spawn crvol")
}

fn write_graph(dir: &Path, g: &RadialGraph) -> PathBuf {
    let p = dir.join("graph.json");
    std::fs::write(&p, serde_json::to_string(&g.to_json()).unwrap()).unwrap();
    p
}

fn report(dir: &Path, sub: &str) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join(format!("{sub}.json"))).unwrap()).unwrap()
}

#[test]
fn sphere_and_scaled_sphere_reports() {
    let dir = scratch("sphere");
    let g = write_graph(&dir, &RadialGraph::sphere(2));
    let o = crvol(&["functionals", "--quick", "--level", "6", "--graph", g.to_str().unwrap()], &dir);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let r = report(&dir, "functionals");
    let f = &r["extras"]["functionals"];
    let a = f["A"].as_f64().unwrap();
    assert!((a - 2.0 * std::f64::consts::PI.powi(2)).abs() < 1e-10);
    assert_eq!(r["config"]["level"], "6");
    assert_eq!(f["rule_id"], r["extras"]["functionals"]["rule_id"]);
    let r0 = f["R"].as_f64().unwrap();

    let scaled = RadialGraph::sphere(2).shifted(2f64.ln());
    let dir2 = scratch("scaled");
    let g2 = write_graph(&dir2, &scaled);
    let o = crvol(&["functionals", "--quick", "--level", "6", "--graph", g2.to_str().unwrap()], &dir2);
    assert_eq!(o.status.code(), Some(0));
    let r1 = report(&dir2, "functionals")["extras"]["functionals"]["R"].as_f64().unwrap();
    assert!((r1 / r0 - 1.0).abs() < 1e-12);
}

#[test]
fn non_pseudoconvex_input_exits_2() {
    let dir = scratch("bad");
    let e = harmonic_basis(2, 2, 2).unwrap().elements[0].clone();
    let big = RadialGraph::new(2, vec![RealField::new(Part::Re, 3.0, e)]).unwrap();
    let g = write_graph(&dir, &big);
    let o = crvol(&["functionals", "--level", "6", "--graph", g.to_str().unwrap()], &dir);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("worst node"), "{err}");
}

#[test]
fn io_errors_exit_3() {
    let dir = scratch("io");
    let o = crvol(&["functionals", "--graph", "/nonexistent/graph.json"], &dir);
    assert_eq!(o.status.code(), Some(3));
    let cfg = dir.join("bad.cfg");
    std::fs::write(&cfg, "no-such-key = 1\n").unwrap();
    let o = crvol(&["forms", "--config", cfg.to_str().unwrap()], &dir);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn spectrum_self_test() {
    let dir = scratch("spectrum");
    let o = crvol(&["spectrum", "--quick"], &dir);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let csv = std::fs::read_to_string(dir.join("spectrum.csv")).unwrap();
    assert!(csv.starts_with("n,p,q,"));
    assert_eq!(csv.lines().count(), 1 + 9);
    let bad = scratch("spectrum-bad");
    let o = crvol(&["spectrum", "--quick", "--debug-c-norm-factor", "1.1"], &bad);
    assert_eq!(o.status.code(), Some(4));
    let r = report(&bad, "spectrum");
    assert_eq!(r["pass"], false);
    assert!(!r["extras"]["spectrum"]["flagged"].as_array().unwrap().is_empty());
}

#[test]
fn config_file_precedence() {
    let dir = scratch("config");
    let cfg = dir.join("run.cfg");
    std::fs::write(&cfg, "seed = 5\nquick = true\ntol.polarization = 1e-11\n").unwrap();
    let o = crvol(&["forms", "--config", cfg.to_str().unwrap(), "--seed", "6"], &dir);
    assert_eq!(o.status.code(), Some(0));
    let r = report(&dir, "forms");
    assert_eq!(r["config"]["seed"], "6");
    assert_eq!(r["config"]["quick"], "true");
    assert_eq!(r["tolerances"]["polarization"].as_f64(), Some(1e-11));
    assert!(r["timestamp"].as_str().unwrap().starts_with("unix:"));
}
