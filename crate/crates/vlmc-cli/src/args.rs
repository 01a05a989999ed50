use clap::{Args, Parser, Subcommand, ValueEnum};
use std::path::PathBuf;

#[derive(Debug, Parser)]
#[command(name = "vlmc", version, about = "Variable length memory chains: analysis and simulation")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalOpts,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalOpts {
    /// JSON run configuration; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, env = "VLMC_SEED")]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub series_tol: Option<f64>,
    #[arg(long, global = true)]
    pub solver_tol: Option<f64>,
    /// Cascade levels per series.
    #[arg(long, global = true)]
    pub levels: Option<usize>,
    /// Maximal size of the alpha-LIS index.
    #[arg(long, global = true)]
    pub trunc: Option<usize>,
    /// Length up to which alpha-LIS and fibers are enumerated.
    #[arg(long, global = true)]
    pub fiber_depth: Option<usize>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Write the JSON summary to this file instead of stderr.
    #[arg(long, global = true)]
    pub summary: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

/// A probabilised tree: a JSON file, or `zoo:NAME[:key=value,...]` with uniform `q`.
#[derive(Debug, Args)]
pub struct TreeArg {
    pub tree: String,
    /// Replace `q` by seeded random positive distributions.
    #[arg(long)]
    pub random_q: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Tree description, stability and node classes up to a depth.
    Tree {
        #[command(flatten)]
        tree: TreeArg,
        #[arg(long, default_value_t = 4)]
        depth: usize,
    },
    /// Alpha-LIS decomposition of words, or the alpha-LIS set with `--set`.
    Lis {
        #[command(flatten)]
        tree: TreeArg,
        words: Vec<String>,
        #[arg(long)]
        set: bool,
    },
    /// Cascades of words.
    Cascade {
        #[command(flatten)]
        tree: TreeArg,
        #[arg(required = true)]
        words: Vec<String>,
    },
    /// Cascade series of alpha-LIS (all of the index when none is given).
    Kappa {
        #[command(flatten)]
        tree: TreeArg,
        alpha_lis: Vec<String>,
        /// Emit one row per level instead of totals.
        #[arg(long)]
        per_level: bool,
    },
    /// The alpha-LIS matrix.
    Q {
        #[command(flatten)]
        tree: TreeArg,
        #[arg(long, value_enum, default_value_t = Order::LengthLex)]
        order: Order,
    },
    /// Existence and uniqueness of a stationary probability measure.
    Stationary {
        #[command(flatten)]
        tree: TreeArg,
    },
    /// Stationary measure of cylinders.
    Measure {
        #[command(flatten)]
        tree: TreeArg,
        words: Vec<String>,
        /// Evaluate every word of this length.
        #[arg(long)]
        all: Option<usize>,
        /// Run the consistency audit up to this depth.
        #[arg(long)]
        audit: Option<usize>,
    },
    /// Simulate the chain.
    Simulate {
        #[command(flatten)]
        tree: TreeArg,
        #[arg(long)]
        steps: u64,
        #[arg(long, value_enum, default_value_t = Emit::Letters)]
        emit: Emit,
        /// Window length for `--emit cylinders`.
        #[arg(long, default_value_t = 3)]
        depth: usize,
        #[arg(long, default_value_t = 1000)]
        burn_in: u64,
        /// Initial context (stable trees); default is a uniformly chosen context.
        #[arg(long, conflicts_with = "prefix")]
        context: Option<String>,
        /// Periodic seed `prefix · period^∞`.
        #[arg(long, requires = "period")]
        prefix: Option<String>,
        #[arg(long)]
        period: Option<String>,
        #[arg(long, default_value_t = 1_000_000)]
        history_cap: usize,
    },
    /// Semi-Markov kernels and their comb embedding.
    Smc {
        #[command(subcommand)]
        command: SmcCommand,
    },
    /// Registered parametric trees.
    Zoo {
        #[command(subcommand)]
        command: ZooCommand,
    },
    /// Numeric check of the transient matrix of the stabilised arithmetic tree.
    Appendix {
        #[arg(long, default_value_t = 0.3)]
        r: f64,
        #[arg(long, default_value_t = 0.09)]
        s: f64,
        #[arg(long, default_value_t = 200)]
        n: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Order {
    LengthLex,
    /// Increasing length, reverse lexicographic within a length.
    Appendix,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Emit {
    Letters,
    Contexts,
    Renewal,
    Cylinders,
}

#[derive(Debug, Subcommand)]
pub enum SmcCommand {
    /// The b-comb probabilised by the kernel (true jumps applied first).
    ToVlmc { kernel: PathBuf },
    /// Mean sojourn times and the limit-distribution verdict.
    Limit { kernel: PathBuf },
    /// Direct vs comb simulation, cascade series vs mean sojourns, verdict agreement.
    Roundtrip {
        kernel: PathBuf,
        #[arg(long, default_value_t = 1_000_000)]
        steps: u64,
        #[arg(long, default_value_t = 3)]
        window: usize,
    },
}

#[derive(Debug, Subcommand)]
pub enum ZooCommand {
    List,
    /// JSON description of a zoo tree.
    Show {
        name: String,
        /// Parameters as `key=value`.
        #[arg(long = "param")]
        params: Vec<String>,
    },
}
