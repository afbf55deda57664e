use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use crvol_cli::{execute, RunConfig, Subcommand, EXIT_IO};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Command {
    Functionals,
    Spectrum,
    Affine,
    Reduction,
    Forms,
    All,
}

/// Runs the crvol verification suites and writes JSON reports and CSV tables.
#[derive(Debug, Parser)]
#[command(name = "crvol", version)]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// Line-oriented key=value file, applied before the flags.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    /// product | qmc
    #[arg(long)]
    rule: Option<String>,
    #[arg(long)]
    level: Option<usize>,
    #[arg(long)]
    count: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    fd_step: Option<f64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Graph JSON for `functionals`.
    #[arg(long)]
    graph: Option<PathBuf>,
    /// Small preset of every suite.
    #[arg(long)]
    quick: bool,
    /// Extra `key=value` settings, applied last.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Multiplies c_norm before the spectrum comparison.
    #[arg(long, hide = true)]
    debug_c_norm_factor: Option<f64>,
}

fn build(cli: &Cli) -> Result<RunConfig, crvol_cli::CliError> {
    let mut cfg = RunConfig::default();
    if cli.quick {
        cfg.make_quick();
    }
    if let Some(p) = &cli.config {
        cfg.apply_file(p)?;
    }
    let flag = |cfg: &mut RunConfig, k: &str, v: Option<String>| v.map_or(Ok(()), |v| cfg.apply(k, &v));
    flag(&mut cfg, "n", cli.n.map(|v| v.to_string()))?;
    flag(&mut cfg, "rule", cli.rule.clone())?;
    flag(&mut cfg, "level", cli.level.map(|v| v.to_string()))?;
    flag(&mut cfg, "count", cli.count.map(|v| v.to_string()))?;
    flag(&mut cfg, "seed", cli.seed.map(|v| v.to_string()))?;
    flag(&mut cfg, "fd-step", cli.fd_step.map(|v| v.to_string()))?;
    flag(&mut cfg, "out", cli.out.as_ref().map(|p| p.display().to_string()))?;
    flag(&mut cfg, "graph", cli.graph.as_ref().map(|p| p.display().to_string()))?;
    for kv in &cli.set {
        let (k, v) =
            kv.split_once('=').ok_or_else(|| crvol_cli::CliError::Config(format!("expected KEY=VALUE, got `{kv}`")))?;
        cfg.apply(k, v)?;
    }
    if let Some(f) = cli.debug_c_norm_factor {
        cfg.c_norm_factor = f;
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_IO } else { 0 };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    let cfg = match build(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    let sub = match cli.command {
        Command::Functionals => Subcommand::Functionals,
        Command::Spectrum => Subcommand::Spectrum,
        Command::Affine => Subcommand::Affine,
        Command::Reduction => Subcommand::Reduction,
        Command::Forms => Subcommand::Forms,
        Command::All => Subcommand::All,
    };
    ExitCode::from(execute(sub, &cfg) as u8)
}
