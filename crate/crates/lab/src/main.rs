use std::path::PathBuf;
use std::process::ExitCode;

use asip_lab::{parse_config, run, Command, LabError, WORKERS_ENV};
use clap::{Args, Parser, Subcommand};

/// Gaussian coupling laboratory for intermittent-map partial sums.
///
/// Outputs depend only on the config, its seed and the program version.
/// The worker count (set with ASIP_WORKERS) never changes them.
#[derive(Debug, Parser)]
#[command(name = "asip", version)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Debug, Args)]
struct RunArgs {
    /// TOML run config.
    #[arg(short, long)]
    config: PathBuf,
    /// Override `output_dir` from the config.
    #[arg(short, long)]
    output_dir: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Sub {
    /// Build the invariant density and write it as binary and CSV.
    Density(RunArgs),
    /// Simulate chain or orbit trajectories.
    Simulate(RunArgs),
    /// Evaluate the mixed moment conditions and their verdicts.
    Moments(RunArgs),
    /// Build couplings for `coupling.reps` seeds.
    Couple(RunArgs),
    /// Couple, then fit the discrepancy growth rate.
    Rates(RunArgs),
    /// Variance, W2, maximal-tail and covariance checks.
    Checks(RunArgs),
    /// Aggregate all manifests in the output directory.
    Report(RunArgs),
}

impl Sub {
    fn split(self) -> (Command, RunArgs) {
        match self {
            Self::Density(a) => (Command::Density, a),
            Self::Simulate(a) => (Command::Simulate, a),
            Self::Moments(a) => (Command::Moments, a),
            Self::Couple(a) => (Command::Couple, a),
            Self::Rates(a) => (Command::Rates, a),
            Self::Checks(a) => (Command::Checks, a),
            Self::Report(a) => (Command::Report, a),
        }
    }
}

fn workers() -> Result<Option<usize>, LabError> {
    match std::env::var(WORKERS_ENV) {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(LabError::Format(format!("{WORKERS_ENV} must be a positive integer, got `{v}`"))),
        },
    }
}

fn main_inner(cli: Cli) -> Result<(), LabError> {
    if let Some(n) = workers()? {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| LabError::Format(format!("thread pool: {e}")))?;
    }
    let (command, args) = cli.command.split();
    let mut cfg = parse_config(&args.config)?;
    if let Some(dir) = args.output_dir {
        cfg.output_dir = dir;
    }
    let out = run(command, &cfg)?;
    for line in out.lines {
        println!("{line}");
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            let msg = e.render().to_string();
            eprintln!("{}", serde_json::json!({ "error": { "kind": "usage", "message": msg.trim() } }));
            return ExitCode::from(2);
        }
    };
    match main_inner(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::FAILURE
        }
    }
}
