//! Thin command-line front end: parse flags, load the config, apply
//! overrides, hand off to the runner, and map the outcome to an exit status
//! (0 ok, 1 invalid input, 2 runtime failure, 3 only vacuous bounds).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use spde_exit::config::ExperimentConfig;
use spde_exit::exit::ExitMode;
use spde_exit::runner::{run_experiment, Command, RunOutcome};

#[derive(Parser)]
#[command(
    name = "spde-exit",
    about = "Exit-time simulation and bound evaluation for measure-valued SPDEs",
    version
)]
struct Cli {
    /// Experiment configuration file (TOML).
    #[arg(short, long, global = true, default_value = "experiment.toml")]
    config: PathBuf,

    /// Override the output directory from the config.
    #[arg(long, global = true)]
    output_dir: Option<String>,

    /// Override the worker-thread count (0 = one per core).
    #[arg(long, global = true)]
    workers: Option<usize>,

    /// Override the random seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Override the replica count.
    #[arg(long, global = true)]
    replicas: Option<usize>,

    #[command(subcommand)]
    command: Sub,
}

/// Flags shared by the commands that read the `[exit]` block.
#[derive(Args, Default)]
struct ExitOverrides {
    /// Exit level (domain half-width or norm threshold).
    #[arg(long)]
    r: Option<f64>,

    /// Attraction neighborhood radius.
    #[arg(long)]
    delta0: Option<f64>,

    /// Deadline for the exit event.
    #[arg(long = "T")]
    t_deadline: Option<f64>,

    /// Watched condition: norm-exit, population-exit, or hitting.
    #[arg(long)]
    mode: Option<String>,
}

#[derive(Subcommand)]
enum Sub {
    /// Integrate sample paths and store the trajectory and summary.
    Simulate {
        /// Noise intensity override.
        #[arg(long)]
        epsilon: Option<f64>,

        /// Recording stride override.
        #[arg(long)]
        stride: Option<usize>,
    },
    /// Monte Carlo estimate of the exit probability before the deadline.
    ExitProb {
        #[command(flatten)]
        exit: ExitOverrides,
    },
    /// Evaluate every bound at the configured parameter point.
    Bounds {
        #[command(flatten)]
        exit: ExitOverrides,

        /// Noise intensity override.
        #[arg(long)]
        epsilon: Option<f64>,
    },
    /// Cross the `[sweep]` parameter grids, joining bounds and estimates.
    Sweep,
    /// Estimate exit probabilities along the `[scan]` noise ladder and
    /// report the `eps ln p` diagnostics.
    LdpScan,
    /// Price a stored measure path with the rate functional.
    RateEval {
        /// Path file: a measure CSV or a binary snapshot.
        path_file: PathBuf,
    },
    /// Integrate the controlled equation for a stored control.
    Skeleton {
        /// Control file (CSV with t, a, value rows).
        control_file: PathBuf,
    },
    /// Tabulate the mean squared population size against its bound.
    MeanSize,
    /// Run the built-in oracle checks and re-hash stored outputs.
    Verify,
}

fn parse_mode(s: &str) -> Result<ExitMode, String> {
    match s {
        "norm-exit" => Ok(ExitMode::NormExit),
        "population-exit" => Ok(ExitMode::PopulationExit),
        "hitting" => Ok(ExitMode::Hitting),
        other => Err(format!(
            "unknown mode {other:?} (expected norm-exit, population-exit, or hitting)"
        )),
    }
}

fn apply_exit_overrides(cfg: &mut ExperimentConfig, ov: &ExitOverrides) -> Result<(), String> {
    if ov.r.is_none() && ov.delta0.is_none() && ov.t_deadline.is_none() && ov.mode.is_none() {
        return Ok(());
    }
    let block = cfg
        .exit
        .as_mut()
        .ok_or("exit flags given but the config has no [exit] block to override")?;
    if let Some(r) = ov.r {
        block.r = r;
    }
    if let Some(d) = ov.delta0 {
        block.delta0 = d;
    }
    if let Some(t) = ov.t_deadline {
        block.t_deadline = t;
    }
    if let Some(mode) = &ov.mode {
        block.mode = parse_mode(mode)?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<RunOutcome, (u8, String)> {
    let mut cfg = ExperimentConfig::load(&cli.config)
        .map_err(|e| (1, format!("{}: {e}", cli.config.display())))?;
    if let Some(dir) = cli.output_dir {
        cfg.run.output_dir = dir;
    }
    if let Some(workers) = cli.workers {
        cfg.run.workers = workers;
    }
    if let Some(seed) = cli.seed {
        cfg.run.seed = seed;
    }
    if let Some(replicas) = cli.replicas {
        cfg.run.replicas = replicas;
    }

    let command = match &cli.command {
        Sub::Simulate { epsilon, stride } => {
            if let Some(eps) = epsilon {
                cfg.solver.epsilon = *eps;
            }
            if let Some(s) = stride {
                cfg.run.stride = *s;
            }
            Command::Simulate
        }
        Sub::ExitProb { exit } => {
            apply_exit_overrides(&mut cfg, exit).map_err(|m| (1, m))?;
            Command::ExitProb
        }
        Sub::Bounds { exit, epsilon } => {
            apply_exit_overrides(&mut cfg, exit).map_err(|m| (1, m))?;
            if let Some(eps) = epsilon {
                cfg.solver.epsilon = *eps;
            }
            Command::Bounds
        }
        Sub::Sweep => Command::Sweep,
        Sub::LdpScan => Command::LdpScan,
        Sub::RateEval { path_file } => Command::RateEval { path_file: path_file.clone() },
        Sub::Skeleton { control_file } => {
            Command::Skeleton { control_file: control_file.clone() }
        }
        Sub::MeanSize => Command::MeanSize,
        Sub::Verify => Command::Verify,
    };

    run_experiment(&cfg, &command).map_err(|e| {
        let status = if e.is_validation() { 1 } else { 2 };
        (status, e.to_string())
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(outcome) => {
            for line in &outcome.messages {
                println!("{line}");
            }
            println!("manifest: {}", outcome.manifest_path.display());
            for path in &outcome.outputs {
                println!("wrote: {}", path.display());
            }
            if outcome.vacuous_only {
                eprintln!("warning: every bound at this point is trivial or vacuous");
                ExitCode::from(3)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err((status, message)) => {
            eprintln!("error: {message}");
            ExitCode::from(status)
        }
    }
}
