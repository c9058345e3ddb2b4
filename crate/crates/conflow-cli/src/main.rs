//! `conflow` — experiment driver for the conical Ricci flow.
//!
//! Exit codes: 0 success, 1 usage or invalid input, 2 numerical failure,
//! 3 verdict undecided.

mod divisor_cmds;
mod output;
mod sweep;

use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

use conflow::flow::FlowConfig;

pub const EXIT_OK: u8 = 0;
pub const EXIT_USAGE: u8 = 1;
pub const EXIT_NUMERICAL: u8 = 2;
pub const EXIT_UNDECIDED: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "conflow", version, about = "Normalized conical Ricci flow on the marked two-sphere")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
    /// Config file (divisor / run config, or sweep spec for `sweep`).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (or file, for `report`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for `sweep` (default: available cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Rings N; the grid becomes N x 2N (axisymmetric runs: N intervals).
    #[arg(long, global = true)]
    resolution: Option<usize>,
    /// Cone smoothing ε.
    #[arg(long, global = true)]
    epsilon: Option<f64>,
    #[arg(long, global = true)]
    tmax: Option<f64>,
    #[arg(long, global = true)]
    dt: Option<f64>,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Stability class, χ, α and the predicted limit of a divisor.
    Classify {
        /// Weights, e.g. `0.3 0.3 0.6` or `1/3`; alternative to --config.
        weights: Vec<String>,
        #[arg(long)]
        json: bool,
    },
    /// μ-table of two-point solitons over all bipartitions.
    SolitonTable {
        weights: Vec<String>,
        #[arg(long)]
        json: bool,
    },
    /// Run one flow and classify its limit.
    Run,
    /// Cartesian parameter sweep over a base config.
    Sweep,
    /// Rebuild the convergence report of a run directory.
    Report {
        /// Run directory (as written by `run`).
        dir: PathBuf,
    },
}

/// Flag overrides applied on top of a config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub resolution: Option<usize>,
    pub epsilon: Option<f64>,
    pub tmax: Option<f64>,
    pub dt: Option<f64>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut FlowConfig) {
        if let Some(s) = self.seed {
            cfg.flow.seed = s;
        }
        if let Some(n) = self.resolution {
            cfg.grid.n_lat = n;
            if !cfg.is_axisymmetric() {
                cfg.grid.n_lon = 2 * n;
            }
        }
        if let Some(e) = self.epsilon {
            cfg.flow.eps = e;
        }
        if let Some(t) = self.tmax {
            cfg.flow.t_max = t;
        }
        if let Some(dt) = self.dt {
            cfg.flow.dt = dt;
        }
    }
}

/// Error carrying its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub err: anyhow::Error,
}

impl Failure {
    pub fn usage(err: impl Into<anyhow::Error>) -> Failure {
        Failure { code: EXIT_USAGE, err: err.into() }
    }
}

/// Numerical errors exit 2, anything else about the input exits 1.
pub fn code_of(e: &conflow::Error) -> u8 {
    use conflow::Error::*;
    match e {
        Numerical { .. } | Solver(_) | Positivity { .. } => EXIT_NUMERICAL,
        _ => EXIT_USAGE,
    }
}

impl From<conflow::Error> for Failure {
    fn from(e: conflow::Error) -> Failure {
        Failure { code: code_of(&e), err: e.into() }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Failure {
        Failure::usage(e)
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Failure {
        Failure::usage(e)
    }
}

pub type CmdResult = Result<u8, Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { EXIT_OK });
        }
    };
    let ov = Overrides {
        seed: cli.seed,
        resolution: cli.resolution,
        epsilon: cli.epsilon,
        tmax: cli.tmax,
        dt: cli.dt,
    };
    let res = match &cli.cmd {
        Cmd::Classify { weights, json } => divisor_cmds::classify(cli.config.as_deref(), weights, *json),
        Cmd::SolitonTable { weights, json } => {
            divisor_cmds::soliton_table(cli.config.as_deref(), weights, *json, cli.out.as_deref())
        }
        Cmd::Run => match (&cli.config, &cli.out) {
            (Some(c), Some(o)) => output::cmd_run(c, o, &ov),
            _ => Err(Failure::usage(anyhow::anyhow!("run needs --config FILE and --out DIR"))),
        },
        Cmd::Sweep => match (&cli.config, &cli.out) {
            (Some(c), Some(o)) => sweep::cmd_sweep(c, o, &ov, cli.workers),
            _ => Err(Failure::usage(anyhow::anyhow!("sweep needs --config SPEC and --out DIR"))),
        },
        Cmd::Report { dir } => output::cmd_report(dir, cli.out.as_deref()),
    };
    match res {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.err);
            ExitCode::from(f.code)
        }
    }
}
