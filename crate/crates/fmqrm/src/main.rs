use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use fmqrm::{execute, listing, resolve, Invocation};

/// Numerical experiments on the frequency-modulated quantum Rabi model.
#[derive(Parser, Debug)]
#[command(name = "fmqrm", version)]
struct Cli {
    #[command(subcommand)]
    command: Option<Command>,

    /// Config file with [run] and [params] sections.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Full-length runs at the quoted operating point (slow).
    #[arg(long, global = true)]
    long_run: bool,

    /// Named operating point.
    #[arg(long, global = true, value_name = "NAME")]
    preset: Option<String>,

    /// Highest photon number kept.
    #[arg(long, global = true, value_name = "N")]
    fock_cutoff: Option<usize>,

    /// Seed for randomised self-tests.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Parameter override, repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    sets: Vec<String>,

    /// List experiments and presets, then exit.
    #[arg(long)]
    list: bool,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Eigenvalues along a cavity-frequency sweep.
    Spectrum,
    /// Locate the three-photon avoided crossing.
    Crossing,
    /// |e,0> to |g,3> oscillation under the effective and sideband models.
    Dynamics,
    /// Snapshot fidelity versus modulation depth.
    FidelitySweep,
    /// Numeric versus analytic splitting over coupling strength.
    SplittingCompare,
    /// Output photon flux from the master equation.
    Flux,
    /// Circuit constants to model parameters.
    CircuitMap,
    /// Leakage into the third atomic level.
    ThreeLevel,
    /// Seeded numerical invariants.
    Selftest,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Spectrum => "spectrum",
            Command::Crossing => "crossing",
            Command::Dynamics => "dynamics",
            Command::FidelitySweep => "fidelity-sweep",
            Command::SplittingCompare => "splitting-compare",
            Command::Flux => "flux",
            Command::CircuitMap => "circuit-map",
            Command::ThreeLevel => "three-level",
            Command::Selftest => "selftest",
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.list {
        print!("{}", listing());
        return ExitCode::SUCCESS;
    }
    let inv = Invocation {
        experiment: cli.command.map(|c| c.name().to_string()),
        config: cli.config,
        out: cli.out,
        long_run: cli.long_run,
        preset: cli.preset,
        fock_cutoff: cli.fock_cutoff,
        seed: cli.seed,
        sets: cli.sets,
    };
    let resolved = match resolve(&inv) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    };
    match execute(&resolved) {
        Ok(report) => {
            print!("{}", report.artifacts.summary);
            println!("wrote {} files to {}", report.files.len(), resolved.output_dir.display());
            if report.artifacts.strict_failures().is_empty() {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
