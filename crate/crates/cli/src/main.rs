//! `fpmpc`: deal triples, run parties, train and evaluate models, and report
//! leakage budgets. Results go to stdout as JSON; logs go to stderr.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "fpmpc", version, about = "Floating-point secure multiparty computation toolkit")]
struct Cli {
    /// Defaults file with `key = value` lines; flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct ExperimentArgs {
    /// linear, logit, probit, poisson or multinomial2.
    #[arg(long)]
    pub experiment: String,
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Falls back to the config file, then FPMPC_SEED.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub iters: Option<usize>,
    #[arg(long)]
    pub minibatch: Option<usize>,
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long)]
    pub parties: Option<usize>,
}

#[derive(Args, Debug, Clone)]
pub struct DataArgs {
    /// Data file (images file for idx).
    #[arg(long)]
    pub data: PathBuf,
    /// idx, libsvm or csv.
    #[arg(long)]
    pub format: String,
    /// Labels file for idx data.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// Covariate set 0..=3 for csv count tables.
    #[arg(long, default_value_t = 3)]
    pub covariates: u8,
    /// For binary links: label value counted as the positive class.
    #[arg(long)]
    pub positive: Option<f64>,
    /// Center and scale integer-valued columns.
    #[arg(long)]
    pub normalize: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Deal per-party triple files.
    Deal {
        /// mul, square, hadamard or conv.
        #[arg(long, required_unless_present = "experiment")]
        kind: Option<String>,
        #[arg(long, default_value_t = 1)]
        count: usize,
        #[arg(long)]
        gamma: Option<f64>,
        /// Left operand dims, e.g. `8,1`.
        #[arg(long, value_delimiter = ',')]
        dims: Vec<usize>,
        /// Right operand dims; defaults to the left dims.
        #[arg(long, value_delimiter = ',')]
        right_dims: Vec<usize>,
        #[arg(long)]
        parties: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out_dir: PathBuf,
        /// Record every triple a private run of this experiment consumes.
        #[arg(long)]
        experiment: Option<String>,
        #[arg(long)]
        iters: Option<usize>,
        #[arg(long)]
        minibatch: Option<usize>,
    },
    /// Run a synthetic experiment with every party in this process.
    Simulate {
        #[command(flatten)]
        exp: ExperimentArgs,
        /// public or private.
        #[arg(long, default_value = "private")]
        mode: String,
        /// Read pre-dealt triples from this directory.
        #[arg(long)]
        triples: Option<PathBuf>,
    },
    /// Run one party of a synthetic experiment over TCP.
    RunParty {
        #[arg(long)]
        id: usize,
        /// Address of party 0, which listens there.
        #[arg(long)]
        peers: String,
        #[arg(long)]
        triples: Option<PathBuf>,
        #[command(flatten)]
        exp: ExperimentArgs,
        /// Seconds to wait for peers.
        #[arg(long, default_value_t = 30)]
        timeout: u64,
    },
    /// Train a model on a data file and write a checkpoint.
    Train {
        /// identity, logit, probit, log or multinomial.
        #[arg(long)]
        link: String,
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value = "public")]
        mode: String,
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        iters: Option<usize>,
        #[arg(long)]
        minibatch: Option<usize>,
        #[arg(long)]
        eta: Option<f64>,
        #[arg(long)]
        rho: Option<f64>,
        #[arg(long)]
        parties: Option<usize>,
        /// Checkpoint path.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate a checkpoint on a data file.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[command(flatten)]
        data: DataArgs,
    },
    /// Total the leakage bound of a planned protocol run.
    LeakageReport {
        #[arg(long)]
        plan: PathBuf,
    },
    /// Run built-in numerical checks.
    Validate {
        /// quick (seconds) or full (adds the synthetic experiments).
        #[arg(long, default_value = "quick")]
        suite: String,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .target(env_logger::Target::Stderr)
        .init();
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(value) => {
            println!("{}", serde_json::to_string_pretty(&value).expect("JSON values serialize"));
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_contract_violation() {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
