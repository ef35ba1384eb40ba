//! Command-line front end for cascading-rank.
//!
//! Exit codes: 0 on success, 2 on configuration errors, 1 on runtime errors.

mod commands;
mod config;

use clap::{Parser, Subcommand};

use config::CommonFlags;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Runtime(anyhow::Error),
}

impl From<cascading_rank::Error> for CliError {
    fn from(e: cascading_rank::Error) -> Self {
        use cascading_rank::Error as E;
        match e {
            E::Config(_) | E::DuplicateBehavior(_) | E::MissingBehavior(_) => {
                CliError::Config(e.to_string())
            }
            other => CliError::Runtime(other.into()),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "cascading-rank",
    version,
    about = "Personalized ranking on cascading behavior graphs",
    propagate_version = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and deduplicate interactions; write index sidecars and counts.
    Ingest {
        #[command(flatten)]
        flags: CommonFlags,
    },
    /// Write top-k item scores for the given users.
    Rank {
        #[command(flatten)]
        flags: CommonFlags,
        /// Querying user token; repeatable.
        #[arg(long = "user")]
        users: Vec<String>,
        /// Rank every user in the log.
        #[arg(long)]
        all_users: bool,
    },
    /// Leave-one-out evaluation: HR@k and NDCG@k over the holdout.
    Evaluate {
        #[command(flatten)]
        flags: CommonFlags,
    },
    /// Evaluate the full (alpha, beta) grid.
    Sweep {
        #[command(flatten)]
        flags: CommonFlags,
        /// Grid step for alpha and beta.
        #[arg(long, default_value_t = 0.1)]
        grid_step: f64,
    },
    /// Evaluate auxiliary-behavior permutations (or suffix chains with --prefix).
    Permute {
        #[command(flatten)]
        flags: CommonFlags,
        /// Ablate the sequence by dropping earliest behaviors instead of permuting.
        #[arg(long)]
        prefix: bool,
    },
    /// Time ranking against sliced-down copies of the graph and fit a line.
    Bench {
        #[command(flatten)]
        flags: CommonFlags,
        /// Slice fractions in (0, 1]; defaults to 7 log-spaced points.
        #[arg(long, value_delimiter = ',')]
        fractions: Vec<f64>,
        /// Ranked queries per grid point.
        #[arg(long, default_value_t = 12)]
        queries: usize,
        /// Timing repeats per grid point; the minimum is kept.
        #[arg(long, default_value_t = 1)]
        repeats: usize,
    },
    /// Convergence and objective trajectories plus spectral diagnostics.
    Diagnose {
        #[command(flatten)]
        flags: CommonFlags,
        /// Querying user token.
        #[arg(long = "user")]
        users: Vec<String>,
    },
}

fn run() -> Result<(), CliError> {
    let cli = Cli::parse();
    match cli.command {
        Command::Ingest { flags } => {
            let r = config::resolve(&flags)?;
            commands::cmd_ingest(&r)
        }
        Command::Rank { flags, users, all_users } => {
            let r = config::resolve(&flags)?;
            commands::cmd_rank(&r, &users, all_users)
        }
        Command::Evaluate { flags } => {
            let r = config::resolve(&flags)?;
            commands::cmd_evaluate(&r)
        }
        Command::Sweep { flags, grid_step } => {
            let mut r = config::resolve(&flags)?;
            r.grid_step = grid_step;
            commands::cmd_sweep(&r)
        }
        Command::Permute { flags, prefix } => {
            let mut r = config::resolve(&flags)?;
            r.prefix = r.prefix || prefix;
            commands::cmd_permute(&r)
        }
        Command::Bench { flags, fractions, queries, repeats } => {
            let mut r = config::resolve(&flags)?;
            if !fractions.is_empty() {
                r.fractions = fractions;
            }
            r.queries_per_point = queries;
            r.repeats = repeats;
            commands::cmd_bench(&r)
        }
        Command::Diagnose { flags, users } => {
            let r = config::resolve(&flags)?;
            commands::cmd_diagnose(&r, &users)
        }
    }
}

fn main() {
    let code = match run() {
        Ok(()) => 0,
        Err(CliError::Config(message)) => {
            eprintln!("config error: {message}");
            2
        }
        Err(CliError::Runtime(error)) => {
            eprintln!("error: {error:#}");
            1
        }
    };
    std::process::exit(code);
}
