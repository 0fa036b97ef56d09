mod commands;
mod config;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{Command, CommandError};
use config::RunConfig;

/// Variational solves, conservation checks, potential reconstruction and
/// monodromy, driven by TOML configurations.
#[derive(Parser, Debug)]
#[command(name = "noether", version)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides `output.directory`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Nodes per axis; convergence pairs become `[n, 2n]`.
    #[arg(long, global = true)]
    resolution_override: Option<usize>,
    /// Print only the JSON report on stdout.
    #[arg(long, global = true)]
    json_only: bool,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Sub {
    /// Kernel annihilation and Hamiltonian correspondence on the half-plane.
    KernelVerify,
    /// Solve a Dirichlet or 1D variational problem.
    Solve,
    /// Conserved currents of a solution.
    Currents,
    /// Reconstruct the potential of a dual stress tensor.
    Reconstruct,
    /// Monodromy of the potential on a cylinder or torus.
    Monodromy,
    /// Every shipped configuration.
    All,
}

impl Sub {
    fn command(self) -> Command {
        match self {
            Sub::KernelVerify => Command::KernelVerify,
            Sub::Solve => Command::Solve,
            Sub::Currents => Command::Currents,
            Sub::Reconstruct => Command::Reconstruct,
            Sub::Monodromy => Command::Monodromy,
            Sub::All => Command::All,
        }
    }
}

const USAGE: u8 = 2;

fn configure_threads() -> Result<(), String> {
    let Ok(v) = std::env::var("NOETHER_THREADS") else { return Ok(()) };
    let n: usize = v.trim().parse().map_err(|_| format!("NOETHER_THREADS must be a positive integer, got {v:?}"))?;
    if n == 0 {
        return Err("NOETHER_THREADS must be at least 1".into());
    }
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(USAGE);
    }
    let Some(path) = &cli.config else {
        eprintln!("error: --config <path> is required");
        return ExitCode::from(USAGE);
    };
    let mut cfg = match RunConfig::load(path) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(USAGE);
        }
    };
    let command = cli.command.command();
    if let (Some(n), false) = (cli.resolution_override, command == Command::All) {
        if let Err(e) = cfg.override_resolution(n) {
            eprintln!("error: {e}");
            return ExitCode::from(USAGE);
        }
    }
    let out = cli.out.clone().unwrap_or_else(|| cfg.output.directory.clone());
    let name = path.file_stem().map_or("run".into(), |s| s.to_string_lossy().into_owned());
    let result = match command {
        Command::All => commands::all(&cfg, Some(&out), cli.resolution_override),
        c => commands::run(c, &name, &cfg, Some(&out)),
    };
    let report = match result {
        Ok(r) => r,
        Err(e @ CommandError::Config(_)) => {
            eprintln!("error: {e}");
            return ExitCode::from(USAGE);
        }
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    let json = report.to_json();
    let file = out.join("report.json");
    if let Err(e) = std::fs::create_dir_all(&out).and_then(|_| std::fs::write(&file, &json)) {
        eprintln!("error: cannot write {}: {e}", file.display());
        return ExitCode::from(1);
    }
    if cli.json_only {
        println!("{json}");
    } else {
        print!("{}", report.summary());
        println!("report written to {}", file.display());
    }
    if report.pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
