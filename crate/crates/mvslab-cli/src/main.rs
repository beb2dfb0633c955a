use clap::{Parser, Subcommand};
use mvslab_cli::config::{load_config, ConfigError};
use mvslab_cli::runner;
use std::path::PathBuf;
use std::process::ExitCode;

/// Numerical laboratory for mean value sets on discretized manifolds.
#[derive(Parser)]
#[command(name = "mvslab", version, about)]
struct Cli {
    /// Experiment configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory; overrides the config's output_dir.
    #[arg(long, global = true)]
    output: Option<PathBuf>,

    /// Worker threads for concurrent radius solves.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,

    /// Seed of the deterministic sampler streams.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the configured mesh and export it.
    Mesh,
    /// Solve the Green's function and audit its defining properties.
    Green,
    /// One membrane solve at the first configured radius, with a
    /// complementarity report.
    Membrane,
    /// Radius sweep: extraction, nestedness, and mean value verification.
    Sweep,
    /// Fit the curvature expansion of the distance-squared Laplacian.
    KeyEstimate,
    /// Harnack ratio ensemble for positive harmonic samples.
    Harnack,
    /// Bisection search for the maximal radius before boundary contact.
    R0,
    /// Hyperbolic boundedness probe across growing ambients.
    Nonparabolic,
    /// Full acceptance suite; writes a machine-readable verdict.
    Verify,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(
        env_logger::Env::new().filter_or("MVSETLAB_LOG", "warn"),
    )
    .init();
    let cli = Cli::parse();

    if cli.jobs > 1 {
        if let Err(e) =
            rayon::ThreadPoolBuilder::new().num_threads(cli.jobs).build_global()
        {
            eprintln!("mvslab: cannot configure {} jobs: {e}", cli.jobs);
            return ExitCode::from(2);
        }
    }

    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Config(e)) => {
            eprintln!("mvslab: {e}");
            ExitCode::from(2)
        }
        Err(Failure::Numeric(e)) => {
            eprintln!("mvslab: {e}");
            ExitCode::from(1)
        }
    }
}

enum Failure {
    Config(ConfigError),
    Numeric(mvslab::Error),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e)
    }
}

impl From<mvslab::Error> for Failure {
    fn from(e: mvslab::Error) -> Self {
        Failure::Numeric(e)
    }
}

fn run(cli: &Cli) -> Result<bool, Failure> {
    let cfg_path = cli.config.as_ref().ok_or_else(|| {
        Failure::Config(ConfigError("--config <path> is required".into()))
    })?;
    let cfg = load_config(cfg_path)?;
    let out_dir = cli
        .output
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&out_dir)
        .map_err(|e| Failure::Config(ConfigError(format!("output dir: {e}"))))?;

    let outcome = match cli.command {
        Command::Mesh => runner::run_mesh(&cfg, &out_dir)?,
        Command::Green => runner::run_green(&cfg, &out_dir)?,
        Command::Membrane => runner::run_membrane(&cfg, &out_dir)?,
        Command::Sweep => runner::run_sweep(&cfg, &out_dir, cli.jobs)?,
        Command::KeyEstimate => runner::run_key_estimate(&cfg, &out_dir)?,
        Command::Harnack => runner::run_harnack(&cfg, &out_dir, cli.seed)?,
        Command::R0 => runner::run_r0(&cfg, &out_dir)?,
        Command::Nonparabolic => runner::run_nonparabolic(&cfg, &out_dir)?,
        Command::Verify => runner::run_verify(&out_dir)?,
    };
    if !outcome.all_pass {
        eprintln!("mvslab: checks failed; report at {}", outcome.report_path.display());
    }
    Ok(outcome.all_pass)
}
