//! Command-line runner for latent order book experiments.

mod commands;
mod config;
mod output;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::commands::{CmdError, Options};
use crate::config::Config;

#[derive(Parser)]
#[command(name = "latentlob", version, about = "Latent order book simulator and measurement harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Experiment config (TOML, or a manifest.json from an earlier run).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Overrides run.replicas.
    #[arg(long, global = true)]
    replicas: Option<usize>,
    /// Overrides run.threads (0 = all cores).
    #[arg(long, global = true, env = "LATENTLOB_THREADS")]
    threads: Option<usize>,
    /// Overrides run.seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Also write SVG charts.
    #[arg(long, global = true)]
    svg: bool,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Background-only run: variogram, best-volume histogram, book profile.
    Simulate,
    /// Phase statistic S over a one- or two-parameter grid.
    Sweep,
    /// Meta-order impact curve, relaxation and Markov estimators.
    Impact,
    /// Analytic and Monte Carlo propagator model.
    Propagator,
    /// Markov-book identities on a stationary run.
    MarkovCheck,
}

fn run(cli: &Cli) -> Result<(), CmdError> {
    let path = cli.config.as_ref().ok_or(config::ConfigError::Invalid {
        key: "--config",
        msg: "a config file is required".into(),
    })?;
    let mut cfg = Config::load(path)?;
    if let Some(r) = cli.replicas {
        cfg.run.replicas = r;
    }
    if let Some(t) = cli.threads {
        cfg.run.threads = t;
    }
    if let Some(s) = cli.seed {
        cfg.run.seed = s;
    }
    cfg.validate()?;
    let opts = Options {
        out: cli.out.clone(),
        svg: cli.svg,
    };
    match cli.command {
        Command::Simulate => commands::simulate(&cfg, &opts),
        Command::Sweep => commands::sweep(&cfg, &opts),
        Command::Impact => commands::impact(&cfg, &opts),
        Command::Propagator => commands::propagator(&cfg, &opts),
        Command::MarkovCheck => commands::markov_check_cmd(&cfg, &opts),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
