use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

mod commands;
mod settings;

use settings::Tunables;

/// Free-energy node embeddings: distances, similarities, factorization and evaluation.
#[derive(Debug, Parser)]
#[command(name = "fenode", version)]
struct Cli {
    /// Optional `key=value` settings file; flags take precedence over it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DistanceKind {
    Fe,
    Sp,
    Ct,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepTask {
    Cluster,
    Classify,
    Linkpred,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Clean an edge list: drop self-loops, keep the largest component.
    Prep {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[command(flatten)]
        tune: Tunables,
    },
    /// Compute a dissimilarity matrix (binary, or CSV for a .csv output).
    Distance {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long, value_enum, default_value = "fe")]
        kind: DistanceKind,
        #[command(flatten)]
        tune: Tunables,
    },
    /// Embed a graph, or an external similarity matrix with `--similarity external`.
    Embed {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Also write the similarity matrix here.
        #[arg(long)]
        save_similarity: Option<PathBuf>,
        #[command(flatten)]
        tune: Tunables,
    },
    /// Node clustering with k-means on the embedding.
    EvalCluster {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        /// Report path (JSON); stdout if omitted.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Evaluate this precomputed embedding instead of embedding the graph.
        #[arg(long)]
        embedding: Option<PathBuf>,
        #[command(flatten)]
        tune: Tunables,
    },
    /// Node classification with one-vs-rest logistic regression.
    EvalClassify {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long)]
        embedding: Option<PathBuf>,
        #[command(flatten)]
        tune: Tunables,
    },
    /// Link prediction on held-out edges.
    EvalLinkpred {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
        #[command(flatten)]
        tune: Tunables,
    },
    /// Reconstruct a signed random adjacency with the weighted objective and with SVD.
    ReconDemo {
        #[arg(long, default_value_t = 25)]
        n: usize,
        #[arg(long, default_value_t = 0.1)]
        p: f64,
        /// Magnitude of the signed entries.
        #[arg(long, default_value_t = 5.0)]
        value: f64,
        /// Directory for the matrices and summary.
        #[arg(long)]
        output: Option<PathBuf>,
        #[command(flatten)]
        tune: Tunables,
    },
    /// Run an evaluation once per value of one setting; writes CSV.
    Sweep {
        #[arg(long, value_enum)]
        task: SweepTask,
        /// eta, percentile, max_target, d, horizon or targets.
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        labels: Option<PathBuf>,
        #[arg(long)]
        output: Option<PathBuf>,
        #[command(flatten)]
        tune: Tunables,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
