//! Command-line front end: `otoc [global flags] <subcommand> [overrides]`.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use otoc::config::{RunConfig, TimeGrid};
use otoc::exec::{with_threads, Exec};
use otoc::runner::{default_config, execute, CheckKind, Command};

#[derive(Parser, Debug)]
#[command(
    name = "otoc",
    version,
    about = "Out-of-time-order correlators of collective spin models"
)]
struct Cli {
    /// TOML run configuration (figure presets and other commands have
    /// built-in defaults).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed for trajectory sampling and random start points.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory (default: runs/<subcommand>).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Cmd,
}

/// Overrides applied on top of the configuration.
#[derive(Args, Debug, Default, Clone)]
struct Overrides {
    /// Number of atoms N.
    #[arg(long)]
    atoms: Option<usize>,
    /// Last time of the grid (kicks for the kicked top), keeping its step.
    #[arg(long)]
    stop: Option<f64>,
    /// Number of quantum trajectories.
    #[arg(long)]
    n_traj: Option<usize>,
    /// Decay-time threshold on |F| and |G|.
    #[arg(long)]
    threshold: Option<f64>,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Interferometric and direct F series with the commutator identity.
    Oto(Overrides),
    /// Distinguishability protocol against |F|^2.
    Distinguish(Overrides),
    /// Time-ordered correlator G.
    TimeOrdered(Overrides),
    /// Quantum-trajectory ensemble of F and G under cavity dissipation.
    Dissipative(Overrides),
    /// Wigner-function snapshots of the evolving state.
    Wigner(Overrides),
    /// Classical Lyapunov exponents and the Ehrenfest time.
    Lyapunov(Overrides),
    /// Cavity-QED feasibility estimates.
    Feasibility(Overrides),
    /// Unitary F for N = 50 under one-axis twisting.
    Fig3(Overrides),
    /// Kicked-top |F| and |G| for N = 50..500 and their decay times.
    Fig4a(Overrides),
    /// Dissipative kicked top at N = 100 from 200 trajectories.
    Fig4b(Overrides),
}

impl Cmd {
    fn split(&self) -> (Command, &Overrides) {
        match self {
            Cmd::Oto(o) => (Command::Oto, o),
            Cmd::Distinguish(o) => (Command::Distinguish, o),
            Cmd::TimeOrdered(o) => (Command::TimeOrdered, o),
            Cmd::Dissipative(o) => (Command::Dissipative, o),
            Cmd::Wigner(o) => (Command::Wigner, o),
            Cmd::Lyapunov(o) => (Command::Lyapunov, o),
            Cmd::Feasibility(o) => (Command::Feasibility, o),
            Cmd::Fig3(o) => (Command::Fig3, o),
            Cmd::Fig4a(o) => (Command::Fig4a, o),
            Cmd::Fig4b(o) => (Command::Fig4b, o),
        }
    }
}

fn apply_overrides(cfg: &mut RunConfig, seed: Option<u64>, o: &Overrides) -> Result<(), String> {
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(n) = o.atoms {
        cfg.model.atoms = n;
    }
    if let Some(stop) = o.stop {
        let step = cfg.times.step.unwrap_or(1.0);
        cfg.times = TimeGrid::range(cfg.times.start, stop, step);
    }
    if let Some(n) = o.n_traj {
        match cfg.dissipation.as_mut() {
            Some(d) => d.n_traj = n,
            None => return Err("--n-traj needs a [dissipation] table".into()),
        }
    }
    if let Some(t) = o.threshold {
        cfg.decay.threshold = t;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, overrides) = cli.command.split();
    let mut cfg = match &cli.config {
        Some(path) => match RunConfig::load(path) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(2);
            }
        },
        None => default_config(command),
    };
    if let Err(e) = apply_overrides(&mut cfg, cli.seed, overrides) {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    let out_dir = cli
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from("runs").join(command.name()));

    let result = with_threads(cli.threads, || execute(command, &cfg, Exec::Parallel));
    let output = match result {
        Ok(o) => o,
        Err(e @ otoc::Error::Config { .. }) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    if let Err(e) = output.write(&out_dir) {
        eprintln!("error: {e}");
        return ExitCode::from(1);
    }
    for c in &output.checks {
        let kind = match c.kind {
            CheckKind::Invariant => "invariant",
            CheckKind::Claim => "claim",
        };
        let status = if c.passed { "ok" } else { "FAILED" };
        println!("{status:6} {kind:9} {}: {}", c.name, c.detail);
    }
    println!("wrote {}", out_dir.display());
    if output.invariants_hold() {
        ExitCode::SUCCESS
    } else {
        for c in output.failed_invariants() {
            eprintln!("invariant self-check failed: {}", c.name);
        }
        ExitCode::from(1)
    }
}
