//! Command-line front end: config parsing, command dispatch and output.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use clap::{Parser, Subcommand, ValueEnum};
use spinfactory::entanglement::{PairSelector, SweepMode, SweepRange};
use std::path::PathBuf;

pub use config::{parse_config, Config, SchemaError};
pub use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "spinfactory", version, about = "Design and analyse exactly factorized eigenstates of spin arrays")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Synthesize couplings and fields that make a product state an eigenstate
    Design {
        #[arg(long)]
        state: PathBuf,
        /// Frobenius norm of each synthesized coupling
        #[arg(long)]
        j_norm: Option<f64>,
        /// Uniform parallel field added along each spin direction
        #[arg(long, allow_hyphen_values = true)]
        h_par: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Propagate compatible spin directions along an open chain
    Infer {
        #[arg(long)]
        system: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed_site: usize,
        /// all, first, or one bit per bond (0 = + branch)
        #[arg(long, default_value = "all")]
        branches: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check that the configured product state is an eigenstate
    Verify {
        #[arg(long)]
        system: PathBuf,
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Ground-state data against the parallel field
    Spectrum {
        #[arg(long)]
        system: PathBuf,
        /// lo:hi:steps
        #[arg(long, value_parser = parse_range, allow_hyphen_values = true)]
        h_par: SweepRange,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Ground-state pair concurrences across a perturbation
    Sweep {
        #[arg(long)]
        system: PathBuf,
        #[arg(long, value_enum)]
        mode: ModeArg,
        /// lo:hi:steps
        #[arg(long, value_parser = parse_range, allow_hyphen_values = true)]
        range: SweepRange,
        /// all, or pairs as i,j;k,l
        #[arg(long, default_value = "all", value_parser = parse_pairs)]
        pairs: PairSelector,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// XXZ chain whose eigenstate is a spin spiral with Δφ = 2πk/N
    Spiral {
        #[arg(long)]
        n: usize,
        #[arg(long, allow_hyphen_values = true)]
        k: i64,
        #[arg(long, allow_hyphen_values = true)]
        theta: f64,
        #[arg(long, allow_hyphen_values = true)]
        j: f64,
        #[arg(long, allow_hyphen_values = true)]
        h_par: f64,
        /// Open chain instead of a ring
        #[arg(long)]
        open: bool,
        #[arg(long, default_value_t = 0.5)]
        spin: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Number of controlled fields and couplings for a scenario
    Complexity {
        #[arg(long)]
        scenario: String,
        #[arg(long)]
        n: usize,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    /// Shift every field along its unit perpendicular component
    Field,
    /// Shift every diagonal coupling
    Coupling,
    /// Set the parallel field strength
    Parallel,
}

impl From<ModeArg> for SweepMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Field => SweepMode::FieldPerp,
            ModeArg::Coupling => SweepMode::CouplingShift,
            ModeArg::Parallel => SweepMode::ParallelField,
        }
    }
}

pub fn parse_range(s: &str) -> Result<SweepRange, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let [lo, hi, steps] = parts[..] else {
        return Err(format!("expected lo:hi:steps, got '{s}'"));
    };
    let num = |x: &str| {
        x.trim()
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| format!("'{x}' is not a finite number"))
    };
    let steps: usize = steps
        .trim()
        .parse()
        .map_err(|_| format!("'{steps}' is not a step count"))?;
    if steps == 0 {
        return Err("steps must be at least 1".into());
    }
    Ok(SweepRange {
        lo: num(lo)?,
        hi: num(hi)?,
        steps,
    })
}

pub fn parse_pairs(s: &str) -> Result<PairSelector, String> {
    if s.trim() == "all" {
        return Ok(PairSelector::All);
    }
    s.split(';')
        .filter(|p| !p.trim().is_empty())
        .map(|p| {
            let (i, j) = p
                .split_once(',')
                .ok_or_else(|| format!("pair '{p}' is not i,j"))?;
            let idx = |x: &str| x.trim().parse::<usize>().map_err(|_| format!("bad site index '{x}'"));
            Ok((idx(i)?, idx(j)?))
        })
        .collect::<Result<Vec<_>, String>>()
        .and_then(|v| {
            if v.is_empty() {
                Err("no pairs given".into())
            } else {
                Ok(PairSelector::List(v))
            }
        })
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    use Command::*;
    match cli.command {
        Design { state, j_norm, h_par, out } => commands::design(&state, j_norm, h_par, out.as_deref()),
        Infer { system, seed_site, branches, out } => {
            commands::infer(&system, seed_site, &branches, out.as_deref())
        }
        Verify { system, tol } => commands::verify(&system, tol),
        Spectrum { system, h_par, out } => commands::spectrum(&system, h_par, out.as_deref()),
        Sweep { system, mode, range, pairs, out } => {
            commands::sweep(&system, mode.into(), range, &pairs, out.as_deref())
        }
        Spiral { n, k, theta, j, h_par, open, spin, out } => {
            commands::spiral(n, k, theta, j, h_par, open, spin, out.as_deref())
        }
        Complexity { scenario, n } => commands::complexity(&scenario, n),
    }
}
