use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use latbound::planner::BalanceCheck;

#[derive(Parser, Debug)]
#[command(
    name = "latbound",
    version,
    about = "Latency-bound replication planning for sharded graph data"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Compute a replication scheme and resharding map for a workload.
    Plan(PlanArgs),
    /// Check a replication scheme against every constraint.
    Validate(ValidateArgs),
    /// Apply a batch of vertex moves to a planned deployment.
    Reshard(ReshardArgs),
    /// Write generated instances.
    #[command(subcommand)]
    Gen(GenCommand),
    /// Exhaustive solvers for tiny instances.
    #[command(subcommand)]
    Oracle(OracleCommand),
}

#[derive(Args, Debug)]
#[group(required = true, multiple = false)]
pub struct Placement {
    /// Sharding file (`#shard v1`).
    #[arg(long)]
    pub shard: Option<PathBuf>,
    /// Hash-partition vertices instead of reading a sharding file.
    #[arg(long)]
    pub hash_seed: Option<u64>,
}

#[derive(Args, Debug)]
pub struct Deployment {
    #[arg(long)]
    pub graph: PathBuf,
    #[arg(long)]
    pub servers: PathBuf,
    #[command(flatten)]
    pub placement: Placement,
    /// Overrides the servers file: `abs:<v>`, `rel:<v>` or `inf`.
    #[arg(long)]
    pub epsilon: Option<String>,
}

#[derive(Args, Debug)]
pub struct PlanArgs {
    #[command(flatten)]
    pub deployment: Deployment,
    #[arg(long)]
    pub workload: PathBuf,
    /// One bound for every query type; a comma list runs a sweep.
    #[arg(long)]
    pub t_override: Option<String>,
    #[arg(long, default_value_t = BalanceCheck::PerCandidate)]
    pub balance_check: BalanceCheck,
    /// Defaults to the available hardware parallelism.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Single worker, stable path order.
    #[arg(long)]
    pub deterministic: bool,
    /// Plan every path, including redundant ones.
    #[arg(long)]
    pub no_prune: bool,
    /// Keep the cheapest feasible candidate in one pass instead of ranking first.
    #[arg(long)]
    pub single_pass: bool,
    /// Write the `t,overhead,worst_latency,status` table here.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Args, Debug)]
pub struct ValidateArgs {
    #[command(flatten)]
    pub deployment: Deployment,
    #[arg(long)]
    pub workload: PathBuf,
    #[arg(long)]
    pub scheme: PathBuf,
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Args, Debug)]
pub struct ReshardArgs {
    #[command(flatten)]
    pub deployment: Deployment,
    #[arg(long)]
    pub scheme: PathBuf,
    #[arg(long)]
    pub rmap: PathBuf,
    #[arg(long)]
    pub moves: PathBuf,
    /// Re-validate the result against this workload.
    #[arg(long)]
    pub workload: Option<PathBuf>,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Args, Debug)]
#[group(required = true, multiple = false)]
pub struct GraphSource {
    /// `cycle:N`, `path:N`, `complete:N`, `star:N`, `prism:K`,
    /// `hypercube:D` or `bipartite:A,B`.
    #[arg(long)]
    pub family: Option<String>,
    /// Graph file read as undirected.
    #[arg(long)]
    pub input: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum GenCommand {
    Random {
        #[arg(long, default_value_t = 50)]
        vertices: usize,
        #[arg(long, default_value_t = 4)]
        servers: usize,
        #[arg(long, default_value_t = 3)]
        query_types: usize,
        #[arg(long, default_value_t = 2.0)]
        degree: f64,
        #[arg(long, default_value_t = 3)]
        max_hops: usize,
        /// Bounds drawn per query type.
        #[arg(long, default_value = "0,1,2")]
        bounds: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    SnbToy {
        #[arg(long, default_value_t = 40)]
        persons: usize,
        #[arg(long, default_value_t = 4)]
        servers: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Replication instance that is feasible iff the graph has a bisection
    /// with at most K bridge vertices per side.
    BridgeReduction {
        #[command(flatten)]
        source: GraphSource,
        #[arg(long)]
        k: usize,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// 3-regular graph whose bridge value equals the input's bisection width.
    TripleGadget {
        #[command(flatten)]
        source: GraphSource,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Routing {
    Pinned,
    AnyCopy,
}

#[derive(Subcommand, Debug)]
pub enum OracleCommand {
    /// Cheapest scheme meeting every constraint.
    Optimal {
        #[command(flatten)]
        deployment: Deployment,
        #[arg(long)]
        workload: PathBuf,
        #[arg(long)]
        t_override: Option<String>,
        /// Also write the optimal scheme as `scheme.txt` here.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Whether any scheme meets every constraint.
    Feasible {
        #[command(flatten)]
        deployment: Deployment,
        #[arg(long)]
        workload: PathBuf,
        #[arg(long, value_enum, default_value_t = Routing::Pinned)]
        routing: Routing,
    },
    /// Balanced split with at most K bridge vertices per side.
    Bisection {
        #[command(flatten)]
        source: GraphSource,
        #[arg(long)]
        k: usize,
    },
}
