use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;

/// Analyse layered-network architectures written as recursion formulas.
#[derive(Debug, Parser)]
#[command(name = "recur", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse formulas and print their canonical form.
    Parse {
        #[command(flatten)]
        specs: SpecArgs,
        #[command(flatten)]
        out: FormatArg,
    },
    /// Unroll X[L] over the input, or expand dX[L]/dX[j] with --wrt.
    Expand {
        #[command(flatten)]
        specs: SpecArgs,
        #[command(flatten)]
        depth: DepthArg,
        /// Differentiate with respect to X[j] instead of unrolling.
        #[arg(long, value_name = "J")]
        wrt: Option<u32>,
        /// Derivative route: backward recurrence or the forward oracle.
        #[arg(long, value_enum, default_value_t = Method::Backward)]
        method: Method,
        #[command(flatten)]
        out: FormatArg,
    },
    /// Histogram of dX[L]/dX[j] paths by length, optionally checked.
    Census {
        #[command(flatten)]
        specs: SpecArgs,
        #[command(flatten)]
        depth: DepthArg,
        /// Source state X[j].
        #[arg(long, value_name = "J", default_value_t = 0)]
        wrt: u32,
        /// Structural law to check; exit 1 on any violation.
        #[arg(long, value_enum)]
        check: Option<CheckArg>,
        #[command(flatten)]
        out: FormatArg,
    },
    /// Compare two formulas by value (unrolled X[L]) and optionally by graph structure.
    Equiv {
        #[command(flatten)]
        specs: SpecArgs,
        #[command(flatten)]
        depth: DepthArg,
        /// Also require the architecture graphs to be isomorphic.
        #[arg(long)]
        structural: bool,
        #[command(flatten)]
        out: FormatArg,
    },
    /// Compile a formula into its architecture graph.
    Graph {
        #[command(flatten)]
        specs: SpecArgs,
        #[command(flatten)]
        depth: DepthArg,
        /// Graph encoding; with --report, json selects a JSON report.
        #[arg(long, value_enum, default_value_t = GraphFormat::Dot)]
        format: GraphFormat,
        /// Print the direct-propagation report instead of the graph.
        #[arg(long)]
        report: bool,
    },
    /// Check symbolic derivatives against Jacobians of random matrix networks.
    Verify {
        #[command(flatten)]
        specs: SpecArgs,
        #[command(flatten)]
        depth: DepthArg,
        /// Check only dX[L]/dX[j]; default is every j in 0..=L.
        #[arg(long, value_name = "J")]
        wrt: Option<u32>,
        /// Block matrix dimension d.
        #[arg(long, value_name = "D", default_value_t = 4)]
        dim: usize,
        /// First RNG seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Number of consecutive seeds to sweep.
        #[arg(long, value_name = "N", default_value_t = 1)]
        seeds: u64,
        /// Error tolerance [default: 1e-10, or 1e-4 with tanh].
        #[arg(long)]
        tol: Option<f64>,
        /// `tanh` runs the finite-difference check on chain formulas.
        #[arg(long, value_enum, default_value_t = ActivationArg::None)]
        activation: ActivationArg,
        /// Central-difference step for the tanh check.
        #[arg(long, default_value_t = 1e-5)]
        epsilon: f64,
        #[command(flatten)]
        out: FormatArg,
    },
    /// Check dX[m]/dX[m-2] = dX[m]/dX[m-1]*(1 + W[m-1]) - W[m-1] for m = 2..=L.
    ChainIdentity {
        #[command(flatten)]
        specs: SpecArgs,
        #[command(flatten)]
        depth: DepthArg,
        #[command(flatten)]
        out: FormatArg,
    },
    /// Friedman test and Nemenyi post-hoc on an accuracy table.
    Stats {
        /// CSV with header `method,<dataset>,...`.
        #[arg(
            value_name = "CSV",
            required_unless_present = "table",
            conflicts_with = "table"
        )]
        csv: Option<PathBuf>,
        /// Use a shipped table instead of a file.
        #[arg(long, value_enum)]
        table: Option<TableArg>,
        /// Significance level (0.05 or 0.10).
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        /// Also write Friedman-graph data to this file.
        #[arg(long, value_name = "PATH")]
        graph_json: Option<PathBuf>,
        #[command(flatten)]
        out: FormatArg,
    },
}

#[derive(Debug, Args)]
struct SpecArgs {
    /// Formula files; builtins are appended after them.
    #[arg(value_name = "FILE")]
    files: Vec<PathBuf>,
    /// Shipped formula (repeatable).
    #[arg(long = "builtin", value_enum, value_name = "NAME")]
    builtins: Vec<BuiltinArg>,
}

#[derive(Debug, Args)]
struct DepthArg {
    /// Network depth L.
    #[arg(long, value_name = "L", default_value_t = 6)]
    depth: u32,
}

#[derive(Debug, Args)]
struct FormatArg {
    /// Output encoding.
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum GraphFormat {
    Dot,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Method {
    Backward,
    Forward,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CheckArg {
    Binomial,
    SinglePath,
    Widest,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ActivationArg {
    None,
    Tanh,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum BuiltinArg {
    Resnet,
    Chain,
    Newarch,
    Eq22,
    AppendixEx1,
    AppendixEx2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum TableArg {
    Table1,
    Table2,
}

/// What a successful run found: whether every requested check held.
pub enum Status {
    Ok,
    CheckFailed,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli.command) {
        Ok((output, status)) => {
            print!("{output}");
            match status {
                Status::Ok => ExitCode::SUCCESS,
                Status::CheckFailed => ExitCode::from(1),
            }
        }
        Err(e) => {
            eprintln!("recur: error: {e:#}");
            ExitCode::from(2)
        }
    }
}
