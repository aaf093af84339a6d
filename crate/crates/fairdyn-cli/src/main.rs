//! `fairdyn` — long-run population dynamics of threshold lending policies.
//!
//! Scenario configs come in as JSON (with `--set path=value` overrides),
//! results go out as CSV and JSON next to the config (or under `--out-dir`).
//! Passing several `--config` files fans the runs out across worker threads
//! (sweep mode); `FAIRDYN_THREADS` caps the parallelism.
//!
//! Exit codes: 0 success, 1 invalid configuration or data, 2 numerical
//! failure. Errors are also emitted as a JSON object on stderr.

use clap::{Args, Parser, Subcommand};
use fairdyn_cli::commands;
use fairdyn_cli::config::{load_config, OutputTarget, ScenarioConfig};
use fairdyn_cli::error::CliError;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "fairdyn",
    version,
    about = "Simulate long-run population dynamics under fair lending policies"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ScenarioArgs {
    /// Scenario config file(s); several fan out across worker threads.
    #[arg(long = "config", required = true, num_args = 1..)]
    configs: Vec<PathBuf>,
    /// Override config fields, e.g. --set dynamics.beta=0.99
    #[arg(long = "set")]
    sets: Vec<String>,
    /// Output directory (defaults to each config's directory).
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Output file stem (single config only; defaults to the config stem).
    #[arg(long)]
    stem: Option<String>,
    /// Also emit gnuplot scripts next to the CSV files.
    #[arg(long)]
    gnuplot: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Evolve the groups under one policy; emits trajectory CSV + summary JSON.
    Simulate(ScenarioArgs),
    /// Fixed points across a threshold grid; emits curve CSV.
    EquilibriumCurve {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Number of thresholds in the grid.
        #[arg(long, default_value_t = 513)]
        steps: usize,
    },
    /// Solve the discounted-optimal policy; emits value-function CSV +
    /// bifurcation JSON.
    OptimalPolicy {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Initial means scanned for basins.
        #[arg(long, default_value_t = 33)]
        mu0_steps: usize,
        /// Steps each initial mean is iterated before reading its limit.
        #[arg(long, default_value_t = 4000)]
        basin_horizon: usize,
        /// Check the policy floor nu/beta implied by the reward bound.
        #[arg(long)]
        check_floor: bool,
    },
    /// Fit Beta population states from a credit-score CSV.
    Fit {
        /// Input CSV: group,score,cdf,delinquency_90d
        #[arg(long)]
        data: PathBuf,
        /// Output JSON path.
        #[arg(long, default_value = "fitted_groups.json")]
        out: PathBuf,
        /// Repayment-histogram bins.
        #[arg(long, default_value_t = 100)]
        bins: usize,
        /// Moving-average window over the CDF (odd; 1 = off).
        #[arg(long, default_value_t = 1)]
        cdf_smoothing: usize,
        /// Moving-average window over delinquency rates (odd; 1 = off).
        #[arg(long, default_value_t = 1)]
        delinquency_smoothing: usize,
        /// Average the fitted shapes across groups.
        #[arg(long)]
        equalize_shapes: bool,
    },
    /// Run every policy in the config's `policies` list; emits per-policy
    /// trajectory CSVs + a comparison JSON.
    ComparePolicies(ScenarioArgs),
    /// Verify the special-function identities and equilibrium uniqueness.
    Selfcheck {
        /// Mesh density for the uniqueness scan.
        #[arg(long, default_value_t = 1001)]
        mesh: usize,
    },
    /// Write a synthetic score table with the input CSV schema.
    GenData {
        #[arg(long, default_value = "synthetic_scores.csv")]
        out: PathBuf,
        #[arg(long, default_value_t = 200)]
        rows: usize,
        /// Group spec name:mu:c (repeatable; default two-group scenario).
        #[arg(long = "group")]
        groups: Vec<String>,
    },
}

fn main() -> ExitCode {
    configure_threads();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(args) => run_scenarios(&args, |config, path, target, gnuplot| {
            let line = commands::cmd_simulate(config, path, target, gnuplot)?;
            Ok(line)
        }),
        Command::EquilibriumCurve { scenario, steps } => {
            run_scenarios(&scenario, move |config, _path, target, gnuplot| {
                commands::cmd_equilibrium_curve(config, target, steps, gnuplot)
            })
        }
        Command::OptimalPolicy {
            scenario,
            mu0_steps,
            basin_horizon,
            check_floor,
        } => run_scenarios(&scenario, move |config, _path, target, gnuplot| {
            commands::cmd_optimal_policy(config, target, mu0_steps, basin_horizon, check_floor, gnuplot)
        }),
        Command::Fit {
            data,
            out,
            bins,
            cdf_smoothing,
            delinquency_smoothing,
            equalize_shapes,
        } => commands::cmd_fit(
            &commands::FitArgs {
                data,
                bins,
                cdf_smoothing,
                delinquency_smoothing,
                equalize_shapes,
            },
            &out,
        )
        .map(|line| vec![line]),
        Command::ComparePolicies(args) => {
            run_scenarios(&args, |config, _path, target, gnuplot| {
                commands::cmd_compare_policies(config, target, gnuplot)
            })
        }
        Command::Selfcheck { mesh } => commands::cmd_selfcheck(mesh).map(|line| vec![line]),
        Command::GenData { out, rows, groups } => {
            commands::cmd_gen_data(&commands::GenDataArgs { out, rows, groups })
                .map(|line| vec![line])
        }
    };

    match result {
        Ok(lines) => {
            for line in lines {
                println!("{line}");
            }
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("{}", err.to_json());
            ExitCode::from(err.exit_code())
        }
    }
}

/// Cap the worker pool from FAIRDYN_THREADS (parallel builds only).
fn configure_threads() {
    #[cfg(feature = "parallel")]
    if let Ok(raw) = std::env::var("FAIRDYN_THREADS") {
        if let Ok(n) = raw.parse::<usize>() {
            if n >= 1 {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
        }
    }
}

type PreparedJob<'a> = (&'a PathBuf, Result<(ScenarioConfig, OutputTarget), CliError>);

/// Load, validate and run each config; several configs run concurrently
/// (each fully isolated), and the first error wins the exit code.
fn run_scenarios<F>(args: &ScenarioArgs, run: F) -> Result<Vec<String>, CliError>
where
    F: Fn(&ScenarioConfig, &std::path::Path, &OutputTarget, bool) -> Result<String, CliError>
        + Sync,
{
    if args.configs.len() > 1 && args.stem.is_some() {
        return Err(CliError::validation(
            "--stem applies to a single config; use per-config `output.stem`",
            "--stem",
        ));
    }
    let jobs: Vec<PreparedJob> = args
        .configs
        .iter()
        .map(|path| {
            let prepared = load_config(path, &args.sets).map(|config| {
                let target = OutputTarget::resolve(&config, path, &args.out_dir, &args.stem);
                (config, target)
            });
            (path, prepared)
        })
        .collect();

    let execute = |(path, prepared): &PreparedJob| -> Result<String, CliError> {
        let (config, target) = prepared.as_ref().map_err(|e| e.clone())?;
        run(config, path, target, args.gnuplot)
    };

    #[cfg(feature = "parallel")]
    let results: Vec<Result<String, CliError>> = {
        use rayon::prelude::*;
        if jobs.len() > 1 {
            jobs.par_iter().map(execute).collect()
        } else {
            jobs.iter().map(execute).collect()
        }
    };
    #[cfg(not(feature = "parallel"))]
    let results: Vec<Result<String, CliError>> = jobs.iter().map(execute).collect();

    let mut lines = Vec::new();
    let mut first_error: Option<CliError> = None;
    for (job, result) in jobs.iter().zip(results) {
        match result {
            Ok(line) => lines.push(line),
            Err(e) => {
                eprintln!("error in {}: {e}", job.0.display());
                // Numerical failures dominate validation in the exit code.
                first_error = match first_error.take() {
                    Some(prev) if prev.exit_code() >= e.exit_code() => Some(prev),
                    _ => Some(e),
                };
            }
        }
    }
    match first_error {
        Some(e) => Err(e),
        None => Ok(lines),
    }
}
