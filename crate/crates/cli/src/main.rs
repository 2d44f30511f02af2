//! Command-line front end: sampling the equilibrium set over a control grid,
//! planning minimum-cost multi-branch paths, emitting the analytic pendulum
//! curves, running the self-verification suite, and exporting lifted graphs.

mod commands;
mod config;
mod format;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::RunConfig;

/// Exit status contract shared by every subcommand.
pub const EXIT_OK: u8 = 0;
pub const EXIT_VALIDATION: u8 = 1;
pub const EXIT_NO_PATH: u8 = 2;
pub const EXIT_VERIFICATION: u8 = 3;

#[derive(Parser)]
#[command(
    name = "quasistat",
    about = "Quasi-static manipulation planning over potential-driven systems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// Configuration file (key = value lines, # comments).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (created if missing).
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Grid resolution override, e.g. 31x31.
    #[arg(long)]
    grid: Option<String>,
    /// Also connect diagonal grid neighbors.
    #[arg(long)]
    diagonals: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Solve every fiber of the control grid and write the sample CSV.
    Sample {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Lift the grid and plan a minimum-cost path between two controls.
    Plan {
        #[command(flatten)]
        common: CommonArgs,
        /// Start control, `ux,uy` with an optional `,alpha` branch hint.
        #[arg(long)]
        start: String,
        /// Goal control, same format as --start.
        #[arg(long)]
        goal: String,
        /// Extra weight added to branch-switch edges.
        #[arg(long)]
        switch_penalty: Option<f64>,
    },
    /// Sample the closed-form optimal driving curve of the linear pendulum.
    PendulumAnalytic {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        alpha1: f64,
        #[arg(long)]
        alpha2: f64,
        #[arg(long, default_value_t = 1.0)]
        lambda1: f64,
        #[arg(long, default_value_t = 1.0)]
        lambda2: f64,
        #[arg(long, default_value_t = 101)]
        samples: usize,
    },
    /// Run the derivative, closed-form and covariance verification suite.
    Check {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Lift the grid and export it in the plain-text graph format.
    ExportGraph {
        #[command(flatten)]
        common: CommonArgs,
    },
}

fn load_config(common: &CommonArgs) -> anyhow::Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    if let Some(grid) = &common.grid {
        let (nx, ny) = parse_grid(grid)?;
        cfg.grid_nx = nx;
        cfg.grid_ny = ny;
    }
    if common.diagonals {
        cfg.diagonals = true;
    }
    Ok(cfg)
}

fn parse_grid(text: &str) -> anyhow::Result<(usize, usize)> {
    let (a, b) = text
        .split_once(['x', 'X'])
        .ok_or_else(|| anyhow::anyhow!("--grid expects NxM, got {text:?}"))?;
    Ok((a.trim().parse()?, b.trim().parse()?))
}

/// A requested path endpoint: a control point plus an optional branch hint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Endpoint {
    pub ux: f64,
    pub uy: f64,
    pub alpha: Option<f64>,
}

fn parse_endpoint(text: &str) -> anyhow::Result<Endpoint> {
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    if parts.len() != 2 && parts.len() != 3 {
        anyhow::bail!("endpoint expects ux,uy[,alpha], got {text:?}");
    }
    let mut values = Vec::with_capacity(parts.len());
    for p in &parts {
        values.push(
            p.parse::<f64>()
                .map_err(|_| anyhow::anyhow!("not a number in endpoint: {p:?}"))?,
        );
    }
    Ok(Endpoint {
        ux: values[0],
        uy: values[1],
        alpha: values.get(2).copied(),
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Sample { common } => load_config(common)
            .map_err(validation)
            .and_then(|cfg| commands::sample(&cfg, &common.out)),
        Command::Plan {
            common,
            start,
            goal,
            switch_penalty,
        } => load_config(common).map_err(validation).and_then(|mut cfg| {
            if let Some(p) = switch_penalty {
                cfg.switch_penalty = *p;
            }
            let start = parse_endpoint(start).map_err(validation)?;
            let goal = parse_endpoint(goal).map_err(validation)?;
            commands::plan(&cfg, &common.out, start, goal)
        }),
        Command::PendulumAnalytic {
            common,
            alpha1,
            alpha2,
            lambda1,
            lambda2,
            samples,
        } => load_config(common).map_err(validation).and_then(|cfg| {
            commands::pendulum_analytic(
                &cfg,
                &common.out,
                *alpha1,
                *alpha2,
                *lambda1,
                *lambda2,
                *samples,
            )
        }),
        Command::Check { common } => load_config(common)
            .map_err(validation)
            .and_then(|cfg| commands::check(&cfg)),
        Command::ExportGraph { common } => load_config(common)
            .map_err(validation)
            .and_then(|cfg| commands::export_graph(&cfg, &common.out)),
    };
    match result {
        Ok(()) => ExitCode::from(EXIT_OK),
        Err(failure) => {
            eprintln!("error: {:#}", failure.error);
            ExitCode::from(failure.code)
        }
    }
}

/// An error tagged with the exit status it maps to.
pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

pub fn validation(error: anyhow::Error) -> Failure {
    Failure {
        code: EXIT_VALIDATION,
        error,
    }
}

pub fn no_path(error: anyhow::Error) -> Failure {
    Failure {
        code: EXIT_NO_PATH,
        error,
    }
}

pub fn verification(error: anyhow::Error) -> Failure {
    Failure {
        code: EXIT_VERIFICATION,
        error,
    }
}
