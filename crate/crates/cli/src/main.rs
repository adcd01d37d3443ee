use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use oes_cli::{cmd_check_theorem2, cmd_gen_linear_spec, cmd_sweep_k, cmd_train, cmd_variance};

/// Evolution-strategies experiment runner: seeded training runs,
/// noise-sharing sweeps, and variance measurements, all emitted as CSV.
#[derive(Parser)]
#[command(name = "oes", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one seeded training experiment and write a per-update CSV.
    Train {
        /// Experiment config file (flat `key = value` lines).
        #[arg(long)]
        config: PathBuf,
        /// Master seed; overrides the config's `master_seed`.
        #[arg(long)]
        seed: Option<u64>,
        /// Output CSV path; overrides the config's `out`.
        #[arg(long)]
        out: Option<String>,
    },
    /// Run one training experiment per noise-sharing period in `k_list`,
    /// sharing the base seed, into one long-format CSV.
    SweepK {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<String>,
    },
    /// Measure Monte-Carlo total variance at the frozen initial
    /// parameters, next to the closed form where one exists.
    Variance {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<String>,
        /// Monte-Carlo sample count; overrides the config's `mc_samples`.
        #[arg(long)]
        mc: Option<usize>,
    },
    /// Evaluate the window-sum variance condition on a linear spec file;
    /// with --mc, also measure the paired variances it orders.
    #[command(name = "check-theorem2")]
    CheckTheorem2 {
        /// Linear loss specification file.
        spec: PathBuf,
        /// Truncation window W (must divide the spec's horizon).
        #[arg(long)]
        window: usize,
        /// Monte-Carlo sample count for the paired measurement.
        #[arg(long)]
        mc: Option<usize>,
        /// Master seed (required with --mc).
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Write a seeded random linear loss specification file.
    GenLinearSpec {
        #[arg(long)]
        horizon: usize,
        #[arg(long)]
        dim: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train { config, seed, out } => cmd_train(&config, seed, out),
        Command::SweepK { config, seed, out } => cmd_sweep_k(&config, seed, out),
        Command::Variance {
            config,
            seed,
            out,
            mc,
        } => cmd_variance(&config, seed, out, mc),
        Command::CheckTheorem2 {
            spec,
            window,
            mc,
            seed,
        } => cmd_check_theorem2(&spec, window, mc, seed).map(|report| println!("{report}")),
        Command::GenLinearSpec {
            horizon,
            dim,
            seed,
            out,
        } => cmd_gen_linear_spec(horizon, dim, seed, &out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
