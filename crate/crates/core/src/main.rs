use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use bloch_cavity::config::{self, OUT_ENV, PRESETS, THREADS_ENV};
use bloch_cavity::{output, scenario, Error};

/// Bloch oscillations of atoms in a driven optical cavity.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a configuration and write CSV output.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Use a built-in preset instead of the file's physics.
        #[arg(long)]
        preset: Option<String>,
        /// Output directory; overrides the config and the environment.
        #[arg(long, env = OUT_ENV)]
        out: Option<PathBuf>,
        /// Worker threads for sweeps.
        #[arg(long, env = THREADS_ENV)]
        threads: Option<usize>,
    },
    /// List the built-in presets.
    ListPresets,
    /// Load and validate a configuration without running it.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::ListPresets => {
            for (name, what) in PRESETS {
                println!("{name:<16} {what}");
            }
        }
        Command::Validate { config } => {
            let cfg = config::load_config(&config, None)?;
            println!("{} ok: {} point(s)", config.display(), cfg.points().len());
        }
        Command::Run {
            config,
            preset,
            out,
            threads,
        } => {
            let mut cfg = config::load_config(&config, preset.as_deref())?;
            if let Some(out) = out {
                cfg.output.dir = out;
            }
            let threads = threads.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
            let report = scenario::run_scenario(&cfg, threads)?;
            output::write_report(&cfg.output.dir, &report)?;
            println!("wrote {}", cfg.output.dir.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            // Stage errors already print their whole chain.
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
