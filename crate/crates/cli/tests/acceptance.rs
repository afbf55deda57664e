//! Runs every acceptance criterion at full size and prints one line per criterion.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use crvol_cli::{run_suites, strip_timestamps, Criterion, RunConfig, Subcommand};

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("crvol-acceptance-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    dir
}

fn run_cli(out: &Path) -> i32 {
    let status = Command::new(env!("CARGO_BIN_EXE_crvol"))
        .args(["all", "--quick", "--seed", "7", "--out"])
        .arg(out)
        .stdout(std::process::Stdio::null())
        .status()
        .expect("spawn crvol");
    status.code().unwrap_or(-1)
}

fn read_all(dir: &Path) -> Vec<(String, String)> {
    let mut files: Vec<(String, String)> = std::fs::read_dir(dir)
        .map(|d| {
            d.filter_map(|e| e.ok())
                .map(|e| {
                    (
                        e.file_name().to_string_lossy().into_owned(),
                        std::fs::read_to_string(e.path()).unwrap_or_default(),
                    )
                })
                .collect()
        })
        .unwrap_or_default();
    files.sort();
    files
}

/// Two runs into the same directory; the first run's files are read before the second starts.
fn determinism() -> Criterion {
    let dir = scratch("repeat");
    let ca = run_cli(&dir);
    let first = read_all(&dir);
    let _ = std::fs::remove_dir_all(&dir);
    let cb = run_cli(&dir);
    let second = read_all(&dir);
    let _ = std::fs::remove_dir_all(&dir);
    let names = |v: &[(String, String)]| v.iter().map(|f| f.0.clone()).collect::<Vec<_>>();
    let differing: Vec<String> = first
        .iter()
        .zip(&second)
        .filter(|(a, b)| a.0 != b.0 || strip_timestamps(&a.1) != strip_timestamps(&b.1))
        .map(|(a, _)| a.0.clone())
        .collect();
    let files = names(&first);
    let pass = ca == cb && names(&second) == files && files.iter().any(|f| f == "all.json") && differing.is_empty();
    Criterion {
        id: 13,
        name: "determinism".into(),
        pass,
        detail: format!("exit codes {ca}/{cb}, {} files compared, differing: {differing:?}", files.len()),
        values: Default::default(),
    }
}

fn main() {
    let start = Instant::now();
    let cfg = RunConfig { out: scratch("full"), ..RunConfig::default() };
    let mut criteria = match run_suites(Subcommand::All, &cfg) {
        Ok(out) => out.criteria,
        Err(e) => {
            println!("[FAIL] suites did not run: {e}");
            std::process::exit(1);
        }
    };
    criteria.push(determinism());
    for c in &criteria {
        println!("{}", c.line());
    }
    let failed: Vec<u8> = criteria.iter().filter(|c| !c.pass).map(|c| c.id).collect();
    println!(
        "acceptance: {}/{} passed in {:.0} s",
        criteria.len() - failed.len(),
        criteria.len(),
        start.elapsed().as_secs_f64()
    );
    if criteria.len() != 13 || !failed.is_empty() {
        println!("failed: {failed:?}");
        std::process::exit(1);
    }
}
