mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "rydberg-gate", version, about = "Three-body Förster resonance Toffoli gate simulator")]
pub struct Cli {
    /// Atomic data table (TOML); overrides the bundled Rb-87 table.
    #[arg(long, global = true, env = config::ATOMIC_DATA_ENV)]
    pub atomic_data: Option<PathBuf>,

    /// TOML file with default settings; flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Output file; companion outputs share its stem.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    pub workers: Option<usize>,

    /// Overwrite existing outputs.
    #[arg(long, global = true)]
    pub force: bool,

    /// Switch off spontaneous and blackbody decay.
    #[arg(long, global = true)]
    pub no_decay: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    TwoAtom,
    ThreeAtom,
}

/// Operating-point flags shared by several commands.
#[derive(Debug, Clone, Args)]
pub struct PointArgs {
    /// Interatomic spacing in µm.
    #[arg(long = "R")]
    pub spacing: Option<f64>,
    /// Electric field in V/cm.
    #[arg(long = "E")]
    pub electric: Option<f64>,
    /// Magnetic field in G; positive is antiparallel to E.
    #[arg(long = "B", allow_hyphen_values = true)]
    pub magnetic: Option<f64>,
    /// Interaction time in µs.
    #[arg(long)]
    pub tau: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Transfer fraction f after τ over a range of electric fields.
    Scan {
        #[arg(long, value_enum, default_value = "three-atom")]
        mode: Mode,
        #[command(flatten)]
        point: PointArgs,
        #[arg(long = "E-min")]
        electric_min: Option<f64>,
        #[arg(long = "E-max")]
        electric_max: Option<f64>,
        #[arg(long)]
        points: Option<usize>,
    },
    /// Population, phase and f of the initial state over [0, τ].
    Trace {
        #[arg(long, value_enum, default_value = "three-atom")]
        mode: Mode,
        #[command(flatten)]
        point: PointArgs,
        #[arg(long, default_value_t = 600)]
        steps: usize,
    },
    /// Population and phase of each excitation pattern over [0, τ].
    Phases {
        /// One of r_r_r, r_g_r, r_r_g, g_r_r; all four when omitted.
        #[arg(long)]
        pattern: Vec<String>,
        #[command(flatten)]
        point: PointArgs,
        #[arg(long, default_value_t = 600)]
        steps: usize,
    },
    /// Output probabilities for the eight computational inputs.
    TruthTable {
        #[command(flatten)]
        point: PointArgs,
    },
    /// Average fidelity over the 216 product inputs.
    Fidelity {
        #[command(flatten)]
        point: PointArgs,
    },
    /// Search E, B and τ at a fixed spacing.
    Optimize {
        #[arg(long = "R")]
        spacing: Option<f64>,
        #[arg(long)]
        max_iterations: Option<usize>,
    },
    /// Collective basis of a pattern or scan mode.
    Basis {
        #[arg(long, value_enum, default_value = "three-atom")]
        mode: Mode,
        /// Excitation pattern; overrides --mode.
        #[arg(long)]
        pattern: Option<String>,
    },
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<rydberg_gate::Error>() {
            return if e.is_physics() {
                3
            } else if e.is_io() {
                4
            } else {
                2
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return 4;
        }
    }
    2
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
