use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ots_cli::commands::{self, Target};
use ots_cli::{service, CliError, CliResult, RunConfig};

/// Particle optimal-transport surrogates for heat fields on variable domains.
///
/// Logging verbosity is read from OTS_LOG (error, warn, info, debug, trace).
/// Exit codes: 0 success, 1 internal error, 2 usage or validation error.
#[derive(Parser)]
#[command(name = "ots", version)]
struct Cli {
    /// Run configuration (TOML); built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; overrides the configuration seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate domains, a parameter plan and solved snapshots.
    Generate {
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a surrogate on a generated dataset.
    Train {
        /// Dataset directory written by `generate`.
        #[arg(long)]
        dataset: PathBuf,
        /// Output model file.
        #[arg(long)]
        out: PathBuf,
        /// Worker threads for the decomposition stages.
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Infer one field with a trained model.
    Infer {
        #[command(flatten)]
        query: Query,
        /// Output raster (.otr).
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve the heat problem on a training or blended domain of a model.
    Solve {
        #[command(flatten)]
        query: Query,
        /// Output raster (.otr).
        #[arg(long)]
        out: PathBuf,
    },
    /// Time the multi-cloud matching over increasing snapshot counts.
    Bench {
        /// Output CSV; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Serve /health, /meta and /infer over HTTP.
    Serve {
        #[arg(long)]
        model: PathBuf,
        /// Port; defaults to the configured service port.
        #[arg(long)]
        port: Option<u16>,
    },
    /// Print the default configuration.
    DefaultConfig,
}

#[derive(Args)]
struct Query {
    /// Model file.
    #[arg(long)]
    model: PathBuf,
    /// Source angle theta.
    #[arg(long, allow_hyphen_values = true)]
    theta: f64,
    /// Boundary-condition support Lambda.
    #[arg(long, allow_hyphen_values = true)]
    lambda: f64,
    /// Comma-separated barycentric weights, one per training domain.
    #[arg(long, value_delimiter = ',', conflicts_with = "geometry", allow_hyphen_values = true)]
    weights: Option<Vec<f64>>,
    /// Training domain index (same as one-hot weights).
    #[arg(long)]
    geometry: Option<usize>,
}

impl Query {
    fn target(&self) -> CliResult<Target> {
        match (&self.weights, self.geometry) {
            (Some(w), None) => Ok(Target::Weights(w.clone())),
            (None, Some(g)) => Ok(Target::Geometry(g)),
            _ => Err(CliError::Usage("pass either --weights or --geometry".into())),
        }
    }
}

fn run(cli: Cli) -> CliResult<()> {
    let mut cfg = RunConfig::load_or_default(cli.config.as_deref())?;
    let seed = cli.seed.unwrap_or(cfg.seed);
    match cli.command {
        Command::Generate { out } => commands::cmd_generate(&cfg, seed, &out).map(drop),
        Command::Train { dataset, out, threads } => {
            if let Some(t) = threads {
                cfg.surrogate.threads = t;
            }
            commands::cmd_train(&dataset, &cfg, seed, &out).map(drop)
        }
        Command::Infer { query, out } => {
            commands::cmd_infer(&query.model, query.theta, query.lambda, &query.target()?, &out).map(drop)
        }
        Command::Solve { query, out } => {
            commands::cmd_solve(&query.model, &cfg, query.theta, query.lambda, &query.target()?, &out).map(drop)
        }
        Command::Bench { out } => commands::cmd_bench(&cfg, seed, out.as_ref()).map(drop),
        Command::Serve { model, port } => service::cmd_serve(
            model,
            port.unwrap_or(cfg.service.port),
            cfg.service.workers,
            &cfg.service.cors_origin,
        ),
        Command::DefaultConfig => {
            print!("{}", RunConfig::default().to_toml());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("OTS_LOG", "warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
