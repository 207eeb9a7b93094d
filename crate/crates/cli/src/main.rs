//! `didpower`: variance, power and sample size for difference-in-differences
//! analyses of cluster randomized trials with loss to follow-up.

mod commands;
mod error;
mod output;
mod params;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{CliError, Result};
use crate::output::{emit, open_output, to_json, write_json, Format};
use crate::params::{merge, CheckArgs, PowerArgs, ReGridArgs, RegionArgs, SimulateArgs, SolveArgs, VarianceArgs};

#[derive(Parser)]
#[command(
    name = "didpower",
    version,
    about = "DID power and sample size for cluster randomized trials"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Output format
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,

    /// Write output to this file instead of stdout
    #[arg(long, global = true)]
    output: Option<PathBuf>,

    /// Read parameters from a JSON file; flags override its values
    #[arg(long, global = true)]
    params: Option<PathBuf>,

    /// Print the resolved parameters as JSON and exit
    #[arg(long, global = true)]
    echo_params: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Variance of the DID estimator
    Variance(VarianceArgs),
    /// Power at a design, or a power curve over cluster sizes
    Power(PowerArgs),
    /// Minimum subjects per cluster or clusters per arm for a target power
    Solve(SolveArgs),
    /// Relative efficiency over a grid of loss rates
    ReGrid(ReGridArgs),
    /// Reduced cohort versus loss without replacement
    Region(RegionArgs),
    /// Monte Carlo simulation of the mixed model
    Simulate(SimulateArgs),
    /// Closed form against the exact covariance oracle on random designs
    Check(CheckArgs),
}

fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var("DIDPOWER_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Usage(format!("DIDPOWER_THREADS must be a positive integer, got `{raw}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Output(e.to_string()))
}

fn resolve<T>(cli: &Cli, args: &T) -> Result<Option<T>>
where
    T: clap::Args + Serialize + DeserializeOwned,
{
    let merged = merge(args, cli.params.as_deref())?;
    if cli.echo_params {
        let mut out = open_output(cli.output.as_deref())?;
        write_json(&serde_json::to_value(&merged)?, &mut out)?;
        out.flush().map_err(|e| CliError::Output(e.to_string()))?;
        return Ok(None);
    }
    Ok(Some(merged))
}

fn run(cli: &Cli) -> Result<()> {
    configure_threads()?;
    let out = cli.output.as_ref();
    macro_rules! dispatch {
        ($args:expr, $f:path) => {{
            if let Some(a) = resolve(cli, $args)? {
                emit(&$f(&a)?, cli.format, out)?;
            }
            Ok(())
        }};
    }
    match &cli.command {
        Command::Variance(a) => dispatch!(a, commands::variance),
        Command::Power(a) => dispatch!(a, commands::power_cmd),
        Command::Solve(a) => dispatch!(a, commands::solve),
        Command::ReGrid(a) => dispatch!(a, commands::re_grid_cmd),
        Command::Region(a) => dispatch!(a, commands::region),
        Command::Simulate(a) => dispatch!(a, commands::simulate),
        Command::Check(a) => {
            let Some(a) = resolve(cli, a)? else {
                return Ok(());
            };
            let (artifact, failure) = commands::check(&a)?;
            emit(&artifact, cli.format, out)?;
            failure.map_or(Ok(()), Err)
        }
    }
}

fn report(err: &CliError) {
    match err {
        CliError::Core(didpower_core::Error::InvalidDesign(issues)) => {
            eprintln!("error: invalid design");
            for issue in issues {
                eprintln!("  {}: {}", issue.field, issue.message);
            }
        }
        CliError::Core(didpower_core::Error::UnattainablePower { target, supremum }) => {
            eprintln!(
                "error: target power {target} is unattainable; the most this design can reach is {}",
                to_json(supremum)
            );
        }
        other => eprintln!("error: {other}"),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            report(&e);
            ExitCode::from(e.exit_code())
        }
    }
}
