//! Batch front end for the crvol verification suites.
//!
//! Every subcommand writes `<subcommand>.json` into the output directory,
//! plus CSV tables for anything plottable. Reports embed the configuration,
//! seed, rule ids and tolerances used.

pub mod config;
pub mod suites;

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use crvol::error::Error;
use crvol::hypersurface::{functional_report, pseudoconvexity_check, GraphJson, RadialGraph};
use crvol::quadrature::{product_rule_s3, qmc_rule, SphereRule};

pub use config::{RuleChoice, RunConfig, Sizes, Tolerances};
pub use suites::{Criterion, SuiteOutput};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_GEOMETRY: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_ACCEPTANCE: i32 = 4;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid geometry: {0}")]
    Geometry(String),
    #[error("i/o: {0}")]
    Io(String),
    #[error("config: {0}")]
    Config(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Geometry(_) => EXIT_GEOMETRY,
            Self::Io(_) | Self::Config(_) => EXIT_IO,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subcommand {
    Functionals,
    Spectrum,
    Affine,
    Reduction,
    Forms,
    All,
}

impl Subcommand {
    pub fn name(self) -> &'static str {
        match self {
            Self::Functionals => "functionals",
            Self::Spectrum => "spectrum",
            Self::Affine => "affine",
            Self::Reduction => "reduction",
            Self::Forms => "forms",
            Self::All => "all",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub subcommand: String,
    pub timestamp: String,
    pub pass: bool,
    pub config: BTreeMap<String, String>,
    pub tolerances: Tolerances,
    pub criteria: Vec<Criterion>,
    pub extras: BTreeMap<String, Value>,
}

pub fn rule_for(cfg: &RunConfig, n: usize) -> SphereRule {
    match (cfg.rule, n) {
        (RuleChoice::Product, 2) => product_rule_s3(cfg.level),
        _ => qmc_rule(n, cfg.count, cfg.seed),
    }
}

fn load_graph(cfg: &RunConfig) -> Result<RadialGraph, CliError> {
    let Some(path) = &cfg.graph else { return Ok(RadialGraph::sphere(cfg.n)) };
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let json: GraphJson = serde_json::from_str(&text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    RadialGraph::from_json(&json).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

/// Functional report of the input graph (the sphere when none is given).
pub fn cmd_functionals_report(cfg: &RunConfig) -> Result<Value, CliError> {
    let graph = load_graph(cfg)?;
    let rule = rule_for(cfg, graph.n);
    match functional_report(&graph, &rule, cfg.echo("functionals")) {
        Ok(r) => Ok(serde_json::to_value(r).unwrap_or(Value::Null)),
        Err(Error::NotPseudoconvex { node, value, .. }) => {
            let pc = pseudoconvexity_check(&graph, &rule);
            Err(CliError::Geometry(format!(
                "not pseudoconvex: worst node {node} at {:?} (min levi eigenvalue {value:.6e})",
                pc.worst_point
            )))
        }
        Err(e) => Err(CliError::Geometry(e.to_string())),
    }
}

/// Runs the suites of a subcommand.
pub fn run_suites(sub: Subcommand, cfg: &RunConfig) -> Result<SuiteOutput, CliError> {
    let mut out = SuiteOutput::default();
    let core = |out: &mut SuiteOutput| {
        out.criteria.push(suites::normalization(cfg));
        out.criteria.push(suites::scale_invariance(cfg));
        out.criteria.push(suites::route_agreement(cfg));
        out.criteria.push(suites::rescaling_invariance(cfg));
    };
    let variation = |out: &mut SuiteOutput| {
        out.criteria.push(suites::criticality(cfg));
        out.merge(suites::spectrum(cfg));
        out.merge(suites::first_variation(cfg));
    };
    match sub {
        Subcommand::Functionals => {
            out.extras.insert("functionals".into(), cmd_functionals_report(cfg)?);
            core(&mut out);
        }
        Subcommand::Spectrum => variation(&mut out),
        Subcommand::Affine => out.merge(suites::affine(cfg)),
        Subcommand::Reduction => out.merge(suites::reduction(cfg)),
        Subcommand::Forms => out.merge(suites::forms(cfg)),
        Subcommand::All => {
            out.extras.insert("functionals".into(), cmd_functionals_report(cfg)?);
            core(&mut out);
            variation(&mut out);
            out.merge(suites::affine(cfg));
            out.merge(suites::reduction(cfg));
            out.merge(suites::forms(cfg));
        }
    }
    out.criteria.sort_by_key(|c| c.id);
    Ok(out)
}

fn timestamp() -> String {
    let secs = std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    format!("unix:{secs}")
}

pub fn build_report(sub: Subcommand, cfg: &RunConfig, out: &SuiteOutput) -> Report {
    Report {
        subcommand: sub.name().to_string(),
        timestamp: timestamp(),
        pass: out.pass(),
        config: cfg.echo(sub.name()),
        tolerances: cfg.tolerances.clone(),
        criteria: out.criteria.clone(),
        extras: out.extras.clone(),
    }
}

fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

/// Writes the JSON report and tables; returns the report path.
pub fn write_outputs(report: &Report, out: &SuiteOutput, dir: &Path) -> Result<std::path::PathBuf, CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    let path = dir.join(format!("{}.json", report.subcommand));
    let text = serde_json::to_string_pretty(report).map_err(|e| CliError::Io(e.to_string()))?;
    write(&path, &(text + "\n"))?;
    for (name, csv) in &out.tables {
        write(&dir.join(name), csv)?;
    }
    Ok(path)
}

/// Full run of one subcommand; returns the process exit code.
pub fn execute(sub: Subcommand, cfg: &RunConfig) -> i32 {
    let out = match run_suites(sub, cfg) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("{e}");
            return e.exit_code();
        }
    };
    let mut stdout = std::io::stdout();
    for c in &out.criteria {
        let _ = writeln!(stdout, "{}", c.line());
    }
    let report = build_report(sub, cfg, &out);
    match write_outputs(&report, &out, &cfg.out) {
        Ok(p) => {
            let _ = writeln!(stdout, "report: {}", p.display());
        }
        Err(e) => {
            eprintln!("{e}");
            return e.exit_code();
        }
    }
    if out.pass() {
        EXIT_PASS
    } else {
        EXIT_ACCEPTANCE
    }
}

/// Drops `"timestamp"` lines so two reports can be compared byte for byte.
pub fn strip_timestamps(text: &str) -> String {
    text.lines().filter(|l| !l.trim_start().starts_with("\"timestamp\"")).collect::<Vec<_>>().join("\n")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Geometry(String::new()).exit_code(), 2);
        assert_eq!(CliError::Io(String::new()).exit_code(), 3);
    }

    #[test]
    fn strips_only_timestamp_lines() {
        let a = "{\n  \"timestamp\": \"unix:1\",\n  \"pass\": true\n}";
        let b = "{\n  \"timestamp\": \"unix:2\",\n  \"pass\": true\n}";
        assert_eq!(strip_timestamps(a), strip_timestamps(b));
        assert!(strip_timestamps(a).contains("\"pass\""));
    }

    #[test]
    fn sphere_functionals_report() {
        let cfg = RunConfig { level: 6, ..RunConfig::default() };
        let v = cmd_functionals_report(&cfg).unwrap();
        let a = v["A"].as_f64().unwrap();
        assert!((a - 2.0 * std::f64::consts::PI.powi(2)).abs() < 1e-10);
        assert_eq!(v["config"]["seed"], "1");
    }

    #[test]
    fn sign_rule() {
        assert_eq!(suites::expected_sign(2, 1), 0);
        assert_eq!(suites::expected_sign(1, 0), 0);
        assert_eq!(suites::expected_sign(3, 0), 1);
        assert_eq!(suites::expected_sign(2, 2), -1);
        for (p, q) in crvol::variation::bidegrees_up_to(6) {
            let mu = crvol::harmonics::mu_pq(2, p, q).unwrap();
            let s = if mu.abs() < 1e-12 {
                0
            } else if mu > 0.0 {
                1
            } else {
                -1
            };
            assert_eq!(s, suites::expected_sign(p, q), "({p},{q})");
        }
    }
}
