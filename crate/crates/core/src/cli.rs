//! The `dcd` command-line tool.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::dcd::{DcdConfig, DEFAULT_FLOOR};
use crate::error::{Error, Result};
use crate::eval::{purity, GroundTruth, HardClustering};
use crate::graph::knn_graph;
use crate::init::{multi_start, MultiStartConfig, DEFAULT_EPS};
use crate::io::{self, ClusterResultFile};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_BAD_INPUT: i32 = 2;
pub const EXIT_ALL_CANDIDATES_FAILED: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "dcd",
    version,
    about = "Graph clustering by low-rank doubly stochastic matrix decomposition"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a symmetrized, binarized KNN graph from a CSV feature file.
    BuildGraph(BuildGraphArgs),
    /// Cluster a MatrixMarket similarity graph.
    Cluster(ClusterArgs),
    /// Score a clustering result against ground-truth labels.
    Eval(EvalArgs),
}

#[derive(Debug, Args)]
pub struct BuildGraphArgs {
    /// Feature CSV, one sample per row.
    pub input: PathBuf,
    /// Number of nearest neighbours per sample.
    #[arg(short = 'k', long = "neighbors")]
    pub k: usize,
    /// Output MatrixMarket file.
    #[arg(short, long)]
    pub output: PathBuf,
    /// Skip the first line of the CSV.
    #[arg(long)]
    pub header: bool,
}

#[derive(Debug, Args)]
pub struct ClusterArgs {
    /// MatrixMarket similarity graph.
    pub graph: PathBuf,
    /// Number of clusters r.
    #[arg(short = 'r', long)]
    pub clusters: usize,
    /// Result JSON path; printed to stdout when omitted.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long, default_value_t = 10_000)]
    pub max_iters: usize,
    /// Dirichlet concentrations of the prior-seeded candidates.
    #[arg(long, value_delimiter = ',', default_values_t = vec![1.2, 2.0, 5.0])]
    pub alphas: Vec<f64>,
    /// Perturbation added to the Ncut indicator.
    #[arg(long, default_value_t = DEFAULT_EPS)]
    pub eps: f64,
    #[arg(long, default_value_t = 1e-9)]
    pub rel_tol: f64,
    /// Include the soft assignment matrix in the result.
    #[arg(long)]
    pub soft: bool,
    /// Write per-iteration traces of every candidate as JSON lines.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Worker threads for running candidates concurrently.
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Result JSON written by `dcd cluster`.
    pub result: PathBuf,
    /// Ground-truth class ids, one per line.
    pub truth: PathBuf,
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit code.
pub fn main_with_args<I, T, O, E>(args: I, stdout: &mut O, stderr: &mut E) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
    O: Write,
    E: Write,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() {
                EXIT_BAD_INPUT
            } else {
                EXIT_OK
            };
            let rendered = e.render().to_string();
            if e.use_stderr() {
                let _ = write!(stderr, "{rendered}");
            } else {
                let _ = write!(stdout, "{rendered}");
            }
            return code;
        }
    };
    let outcome = match &cli.command {
        Command::BuildGraph(args) => cmd_build_graph(args, stdout, stderr),
        Command::Cluster(args) => cmd_cluster(args, stdout, stderr),
        Command::Eval(args) => cmd_eval(args, stdout),
    };
    match outcome {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(error: &Error) -> i32 {
    match error {
        Error::Io(_)
        | Error::Parse { .. }
        | Error::InvalidInput(_)
        | Error::InvalidParameter(_)
        | Error::IsolatedNode { .. } => EXIT_BAD_INPUT,
        Error::AllCandidatesFailed { .. } => EXIT_ALL_CANDIDATES_FAILED,
        Error::DegenerateCluster { .. } | Error::NumericDegeneracy(_) | Error::EigenSolver(_) => {
            EXIT_FAILURE
        }
    }
}

pub fn cmd_build_graph<O: Write, E: Write>(
    args: &BuildGraphArgs,
    stdout: &mut O,
    _stderr: &mut E,
) -> Result<()> {
    let features = io::read_features_csv(&args.input, args.header)?;
    let graph = knn_graph(&features, args.k)?;
    io::write_matrix_market_file(&graph, &args.output)?;
    let degrees: Vec<usize> = (0..graph.n()).map(|i| graph.degree(i)).collect();
    writeln!(stdout, "n: {}", graph.n())?;
    writeln!(stdout, "nnz: {}", graph.nnz())?;
    writeln!(stdout, "min_degree: {}", degrees.iter().min().unwrap())?;
    writeln!(stdout, "max_degree: {}", degrees.iter().max().unwrap())?;
    Ok(())
}

pub fn cmd_cluster<O: Write, E: Write>(
    args: &ClusterArgs,
    stdout: &mut O,
    stderr: &mut E,
) -> Result<()> {
    let graph = io::read_matrix_market_file(&args.graph)?;
    let components = graph
        .connected_components()
        .into_iter()
        .max()
        .map_or(0, |c| c + 1);
    if components > 1 {
        writeln!(
            stderr,
            "warning: graph has {components} connected components"
        )?;
    }
    let config = MultiStartConfig {
        dcd: DcdConfig {
            alpha: 1.0,
            max_iters: args.max_iters,
            rel_tol: args.rel_tol,
            floor: DEFAULT_FLOOR,
            seed: args.seed,
        },
        prior_alphas: args.alphas.clone(),
        eps: args.eps,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.threads.max(1))
        .build()
        .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
    let result = pool.install(|| multi_start(&graph, args.clusters, &config))?;

    for cand in &result.candidates {
        if let Err(reason) = &cand.outcome {
            writeln!(
                stderr,
                "warning: candidate {} dropped: {reason}",
                cand.source
            )?;
        }
    }

    let file = ClusterResultFile::new(&result, &config, args.soft);
    match &args.output {
        Some(path) => std::fs::write(path, file.to_json())?,
        None => stdout.write_all(file.to_json().as_bytes())?,
    }
    if let Some(path) = &args.trace {
        io::write_traces(&result, BufWriter::new(File::create(path)?))?;
    }
    Ok(())
}

pub fn cmd_eval<O: Write>(args: &EvalArgs, stdout: &mut O) -> Result<()> {
    let result = ClusterResultFile::read(&args.result)?;
    let truth = GroundTruth::new(io::read_labels(&args.truth)?);
    let pred = HardClustering::new(result.labels, result.r)?;
    let score = purity(&pred, &truth)?;
    writeln!(stdout, "purity: {score:.4}")?;
    Ok(())
}
