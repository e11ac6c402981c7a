mod commands;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mmprove::search::SearchParams;

#[derive(Parser, Debug)]
#[command(name = "mmprove", version, about = "Metamath proof search and verification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Verify the proofs of all (or the named) propositions.
    Verify {
        #[command(flatten)]
        db: DbArgs,
        /// Proposition label; repeatable. Defaults to every `$p`.
        #[arg(long = "theorem")]
        theorems: Vec<String>,
    },
    /// Search for proofs and print one summary line per theorem.
    Prove(ProveArgs),
    /// Run prove over a set and print aggregate statistics.
    Bench(ProveArgs),
    /// Write the relevance, generative and payoff datasets.
    Extract(ExtractArgs),
}

#[derive(Args, Debug, Clone)]
struct DbArgs {
    /// Metamath database file.
    #[arg(long)]
    db: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum GuidanceKind {
    Baseline,
    Oracle,
    Remote,
}

#[derive(Args, Debug, Clone)]
struct SearchArgs {
    /// Pass limit per theorem.
    #[arg(long, default_value_t = 10_000)]
    passes: u64,
    /// Wall-clock limit per theorem, in seconds.
    #[arg(long, default_value_t = 300.0)]
    timeout: f64,
    /// Beam width for substitution generation.
    #[arg(long, default_value_t = 5)]
    beam: usize,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long, default_value_t = 0.5)]
    beta: f64,
    #[arg(long, default_value_t = 3.0)]
    gamma: f64,
    /// A red node with n visits may have ceil(n / divisor) children.
    #[arg(long, default_value_t = 3)]
    child_divisor: u64,
    /// Largest substitution image size, in tokens.
    #[arg(long, default_value_t = 75)]
    token_limit: usize,
    /// Threads running passes of one search.
    #[arg(long, default_value_t = 1)]
    threads: usize,
}

impl SearchArgs {
    fn params(&self) -> Result<SearchParams, String> {
        let nonneg = |name: &str, v: f64| {
            if v.is_finite() && v >= 0.0 {
                Ok(v)
            } else {
                Err(format!("--{name} must be a finite non-negative number"))
            }
        };
        if !(self.timeout.is_finite() && self.timeout > 0.0) {
            return Err("--timeout must be positive".into());
        }
        for (name, v) in [("beam", self.beam), ("threads", self.threads), ("token-limit", self.token_limit)] {
            if v == 0 {
                return Err(format!("--{name} must be at least 1"));
            }
        }
        if self.child_divisor == 0 {
            return Err("--child-divisor must be at least 1".into());
        }
        Ok(SearchParams {
            alpha: nonneg("alpha", self.alpha)?,
            beta: nonneg("beta", self.beta)?,
            gamma: nonneg("gamma", self.gamma)?,
            child_divisor: self.child_divisor,
            pass_limit: self.passes,
            wall_clock_limit: Duration::from_secs_f64(self.timeout),
            beam_width: self.beam,
            token_limit: self.token_limit,
            threads: self.threads,
        })
    }
}

#[derive(Args, Debug, Clone)]
struct GuidanceArgs {
    #[arg(long, value_enum, default_value_t = GuidanceKind::Baseline)]
    guidance: GuidanceKind,
    /// `host:port` or `unix:/path` of a remote guidance service.
    #[arg(long)]
    endpoint: Option<String>,
    /// Per-request timeout for remote guidance, in seconds.
    #[arg(long, default_value_t = 30.0)]
    request_timeout: f64,
}

#[derive(Args, Debug, Clone)]
struct ProveArgs {
    #[command(flatten)]
    db: DbArgs,
    /// Theorem label; repeatable.
    #[arg(long = "theorem")]
    theorems: Vec<String>,
    /// Every proposition of the test split drawn with --seed.
    #[arg(long)]
    all_test: bool,
    /// Keep only the first N selected theorems.
    #[arg(long)]
    limit: Option<usize>,
    #[command(flatten)]
    search: SearchArgs,
    #[command(flatten)]
    guidance: GuidanceArgs,
    /// Seed of the train/validation/test split.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Theorems searched concurrently.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// File that receives a `$p` block per proof found.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Directory that receives one JSONL search trace per theorem.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
struct ExtractArgs {
    #[command(flatten)]
    db: DbArgs,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    threads: usize,
    /// Beam width used when predicting payoff negatives.
    #[arg(long, default_value_t = 5)]
    beam: usize,
    #[arg(long, default_value_t = 75)]
    token_limit: usize,
    #[command(flatten)]
    guidance: GuidanceArgs,
}

/// Failure kinds with their exit statuses.
#[derive(Debug)]
enum Exit {
    /// At least one theorem or proof failed.
    Failed,
    /// Bad flags, unreadable input or an unknown label.
    Usage(String),
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Verify { db, theorems } => commands::verify(&db, &theorems),
        Command::Prove(args) => commands::prove(&args, false),
        Command::Bench(args) => commands::prove(&args, true),
        Command::Extract(args) => commands::extract(&args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Exit::Failed) => ExitCode::from(1),
        Err(Exit::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
