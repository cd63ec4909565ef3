//! Command-line driver for `locppr`.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod error;
pub mod input;
pub mod report;

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use locppr::aesp::InitStrategy;
use locppr::{Method, SolveOptions};

use crate::commands::{
    bench, convert, error_reference, execute, parse_methods, stats_report, truth, write_json,
    write_trace_files, write_truth, BenchPlan, RunRequest,
};
use crate::error::{CliResult, EXIT_ARGUMENT, EXIT_OK};
use crate::input::{EpsSpec, GraphInput, SourceSpec};

#[derive(Debug, Parser)]
#[command(
    name = "locppr",
    version,
    about = "Local personalized PageRank solvers"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print size and degree statistics after preprocessing.
    Stats {
        #[arg(long)]
        graph: String,
    },
    /// Solve one PPR instance and print a JSON summary.
    Solve(SolveArgs),
    /// Write a reference PPR vector as CSV.
    Truth {
        #[arg(long)]
        graph: String,
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        source: u64,
        /// Residual target for the fixed-point fallback.
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Store a preprocessed graph in the binary cache format.
    Convert {
        #[arg(long)]
        graph: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a method x alpha x eps x source sweep.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum InitArg {
    Y,
    X,
    Zero,
}

impl From<InitArg> for InitStrategy {
    fn from(a: InitArg) -> Self {
        match a {
            InitArg::Y => InitStrategy::MomentumY,
            InitArg::X => InitStrategy::PreviousX,
            InitArg::Zero => InitStrategy::Zero,
        }
    }
}

#[derive(Debug, Args)]
pub struct AccelArgs {
    #[arg(long, value_enum, default_value = "y")]
    pub init: InitArg,
    /// Shift parameter; defaults to 1 - 2 alpha.
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long)]
    pub adaptive_eps: bool,
    /// Upper limit on outer iterations.
    #[arg(long)]
    pub t_cap: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[arg(long)]
    pub graph: String,
    #[arg(long)]
    pub method: Method,
    #[arg(long)]
    pub alpha: f64,
    /// Absolute precision or `<c>/n`.
    #[arg(long)]
    pub eps: EpsSpec,
    #[arg(long)]
    pub source: u64,
    #[command(flatten)]
    pub accel: AccelArgs,
    /// Measure err_inf against a fixed-point reference.
    #[arg(long)]
    pub oracle: bool,
    /// Inner trace CSV; the outer trace goes next to it as `*.outer.csv`.
    #[arg(long)]
    pub trace_out: Option<PathBuf>,
    /// Recompute gradients from scratch and report the drift.
    #[arg(long)]
    pub verify: bool,
    /// Write the JSON summary here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long = "graph", required = true)]
    pub graphs: Vec<String>,
    /// Comma separated method names or `all`.
    #[arg(long, default_value = "")]
    pub method: String,
    #[arg(long = "alpha", value_delimiter = ',', required = true)]
    pub alphas: Vec<f64>,
    #[arg(long = "eps", value_delimiter = ',', required = true)]
    pub epsilons: Vec<EpsSpec>,
    /// `random:K` or a comma separated id list.
    #[arg(long, default_value = "random:5")]
    pub sources: SourceSpec,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value = "bench-out")]
    pub out_dir: PathBuf,
    #[arg(long)]
    pub oracle: bool,
    #[command(flatten)]
    pub accel: AccelArgs,
}

impl AccelArgs {
    fn options(&self, verify: bool) -> SolveOptions {
        SolveOptions {
            init: self.init.into(),
            eta: self.eta,
            adaptive_eps: self.adaptive_eps,
            t_cap: self.t_cap,
            verify,
        }
    }
}

fn open_out(path: &Option<PathBuf>) -> CliResult<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(std::io::stdout().lock())),
    })
}

fn solve(a: &SolveArgs) -> CliResult<()> {
    let input = GraphInput::load(&a.graph)?;
    let source = input.dense_id(a.source)?;
    let eps = a.eps.resolve(input.graph.n());
    let req = RunRequest {
        method: a.method,
        alpha: a.alpha,
        eps,
        source,
        opts: a.accel.options(a.verify),
        seed: None,
    };
    let reference = if a.oracle {
        Some(error_reference(&input, a.alpha, eps, source)?)
    } else {
        None
    };
    let out = execute(&input, &req, reference.as_ref())?;
    if let Some(path) = &a.trace_out {
        write_trace_files(&out.trace, path)?;
    }
    for w in &out.summary.warnings {
        eprintln!("warning: {w}");
    }
    match &a.out {
        Some(path) => write_json(&out.summary, path)?,
        None => println!("{}", serde_json::to_string_pretty(&out.summary)?),
    }
    Ok(())
}

fn dispatch(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Stats { graph } => {
            let input = GraphInput::load(&graph)?;
            print!("{}", stats_report(&input));
        }
        Command::Solve(a) => solve(&a)?,
        Command::Truth {
            graph,
            alpha,
            source,
            tol,
            out,
        } => {
            let input = GraphInput::load(&graph)?;
            let s = input.dense_id(source)?;
            let pi = truth(&input, alpha, s, tol)?;
            write_truth(&input, &pi, open_out(&out)?)?;
        }
        Command::Convert { graph, out } => convert(&GraphInput::load(&graph)?, &out)?,
        Command::Bench(a) => {
            let plan = BenchPlan {
                graphs: a.graphs,
                methods: parse_methods(&a.method)?,
                alphas: a.alphas,
                epsilons: a.epsilons,
                sources: a.sources,
                seed: a.seed,
                out_dir: a.out_dir,
                oracle: a.oracle,
                init: a.accel.init.into(),
                eta: a.accel.eta,
                adaptive_eps: a.accel.adaptive_eps,
                t_cap: a.accel.t_cap,
            };
            let report = bench(&plan)?;
            for f in &report.failures {
                eprintln!("run {} failed (exit {}): {}", f.run, f.exit_code, f.error);
            }
            println!(
                "{} runs ok, {} failed; results in {}",
                report.rows.len(),
                report.failures.len(),
                report.results_path.display()
            );
        }
    }
    Ok(())
}

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                EXIT_ARGUMENT
            } else {
                EXIT_OK
            };
        }
    };
    match dispatch(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn parse_errors_and_help_codes() {
        assert_eq!(run(["locppr", "--help"]), EXIT_OK);
        assert_eq!(run(["locppr", "solve", "--graph", "x"]), EXIT_ARGUMENT);
        assert_eq!(
            run([
                "locppr",
                "solve",
                "--graph",
                "gen:path:3",
                "--method",
                "pagerank",
                "--alpha",
                "0.1",
                "--eps",
                "1e-3",
                "--source",
                "0"
            ]),
            EXIT_ARGUMENT
        );
    }

    #[test]
    fn bench_parses_lists() {
        let cli = Cli::try_parse_from([
            "locppr",
            "bench",
            "--graph",
            "a",
            "--graph",
            "b",
            "--method",
            "appr,locgd",
            "--alpha",
            "0.1,0.2",
            "--eps",
            "1e-4,0.1/n",
            "--sources",
            "random:3",
        ])
        .unwrap();
        let Command::Bench(b) = cli.command else {
            panic!()
        };
        assert_eq!(b.graphs, ["a", "b"]);
        assert_eq!(b.alphas, [0.1, 0.2]);
        assert_eq!(b.epsilons[1], EpsSpec::PerNode(0.1));
        assert_eq!(b.sources, SourceSpec::Random(3));
    }

    #[test]
    fn solve_writes_summary_and_traces() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("s.json");
        let trace = dir.path().join("t.csv");
        let code = run([
            "locppr",
            "solve",
            "--graph",
            "gen:grid:5:5",
            "--method",
            "aesp-locgd",
            "--alpha",
            "0.2",
            "--eps",
            "1e-5",
            "--source",
            "3",
            "--oracle",
            "--verify",
            "--out",
            out.to_str().unwrap(),
            "--trace-out",
            trace.to_str().unwrap(),
        ]);
        assert_eq!(code, EXIT_OK);
        let s: report::RunSummary =
            serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
        assert!(s.err_inf.unwrap() <= 1e-5);
        assert!(s.max_grad_drift.unwrap() < 1e-9);
        assert!(trace.exists());
        assert!(dir.path().join("t.outer.csv").exists());
    }
}
