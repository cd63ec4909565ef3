//! Subcommand implementations. Each returns data; printing is left to the
//! caller so the commands can be driven from tests.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use locppr::aesp::InitStrategy;
use locppr::graph::io::save_binary;
use locppr::oracle::{dense_solve_ppr, fixed_point_ppr, ErrorEvaluator, DEFAULT_DENSE_CAP};
use locppr::trace::{write_csv, write_outer_csv, ErrSampling, RunMeta, RunTrace, TraceRecorder};
use locppr::{run_method, Method, NodeId, SolveOptions};
use rayon::prelude::*;

use crate::error::{CliError, CliResult};
use crate::input::{EpsSpec, GraphInput, SourceSpec};
use crate::report::{write_results, ResultRow, RunSummary};

/// Graphs up to this size get an error sample after every sweep; larger
/// ones only after every outer iteration.
pub const PER_SWEEP_ERR_MAX_N: usize = 100_000;

pub fn stats_report(input: &GraphInput) -> String {
    let g = &input.graph;
    let mut out = format!(
        "graph: {}\nn: {}\nm: {}\nmax_degree: {}\nmin_degree: {}\n",
        input.name,
        g.n(),
        g.m(),
        g.max_degree(),
        g.min_degree()
    );
    if let Some(s) = &input.stats {
        out.push_str(&format!(
            "raw_nodes: {}\nraw_edges: {}\nself_loops_removed: {}\nduplicate_edges_removed: {}\n\
             nodes_outside_largest_component: {}\nedges_outside_largest_component: {}\n\
             discarded_columns: {}\n",
            s.raw_nodes,
            s.raw_edges,
            s.self_loops,
            s.duplicate_edges,
            s.dropped_nodes,
            s.raw_edges - s.self_loops - s.duplicate_edges - g.m(),
            s.discarded_columns
        ));
    }
    out
}

/// Node cap for the dense oracle, overridable through `LOCPPR_DENSE_CAP`.
pub fn dense_cap() -> CliResult<usize> {
    match std::env::var("LOCPPR_DENSE_CAP") {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| CliError::arg(format!("LOCPPR_DENSE_CAP must be an integer, got {v:?}"))),
        Err(_) => Ok(DEFAULT_DENSE_CAP),
    }
}

/// Reference vector: dense solve when the graph fits under the cap,
/// fixed-point iteration to `tol` otherwise.
pub fn truth(input: &GraphInput, alpha: f64, source: NodeId, tol: f64) -> CliResult<Vec<f64>> {
    let g = &input.graph;
    let cap = dense_cap()?;
    let res = if g.n() <= cap {
        dense_solve_ppr(g, alpha, source, cap)?
    } else {
        fixed_point_ppr(g, alpha, source, tol)?
    };
    Ok(res.pi)
}

pub fn write_truth<W: Write>(input: &GraphInput, pi: &[f64], mut w: W) -> std::io::Result<()> {
    writeln!(w, "node,pi")?;
    for (v, p) in pi.iter().enumerate() {
        writeln!(w, "{},{:.17e}", input.external_id(v as NodeId), p)?;
    }
    w.flush()
}

pub fn convert(input: &GraphInput, out: &Path) -> CliResult<()> {
    save_binary(&input.graph, out)?;
    Ok(())
}

/// Reference used to measure `err_inf` for a solve at precision `eps`.
pub fn error_reference(
    input: &GraphInput,
    alpha: f64,
    eps: f64,
    source: NodeId,
) -> CliResult<ErrorEvaluator> {
    let g = &input.graph;
    let pi = fixed_point_ppr(g, alpha, source, eps / 100.0)?.pi;
    Ok(ErrorEvaluator::new(g, pi))
}

#[derive(Debug, Clone)]
pub struct RunRequest {
    pub method: Method,
    pub alpha: f64,
    pub eps: f64,
    pub source: NodeId,
    pub opts: SolveOptions,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub summary: RunSummary,
    pub trace: RunTrace,
}

pub fn execute(
    input: &GraphInput,
    req: &RunRequest,
    reference: Option<&ErrorEvaluator>,
) -> CliResult<RunOutput> {
    let g = &input.graph;
    if req.source as usize >= g.n() {
        return Err(CliError::arg(format!("source {} out of range", req.source)));
    }
    let eta = if req.method.is_accelerated() {
        req.opts.eta.unwrap_or(1.0 - 2.0 * req.alpha)
    } else {
        0.0
    };
    let meta = RunMeta {
        graph: input.name.clone(),
        n: g.n(),
        m: g.m(),
        method: req.method.name().to_string(),
        alpha: req.alpha,
        epsilon: req.eps,
        eta,
        init: req.opts.init.name().to_string(),
        seed: req.seed,
        source: req.source,
    };
    let mut rec = TraceRecorder::new(g, meta);
    if let Some(r) = reference {
        let sampling = if g.n() <= PER_SWEEP_ERR_MAX_N {
            ErrSampling::PerSweep
        } else {
            ErrSampling::PerOuter
        };
        rec = rec.with_oracle(r, sampling);
    }
    let start = Instant::now();
    let res = run_method(
        g, req.method, req.alpha, req.eps, req.source, &req.opts, &mut rec,
    )?;
    let wall_ms = start.elapsed().as_secs_f64() * 1e3;
    let mut trace = rec.into_trace();
    trace.meta.eta = res.eta;
    let summary = RunSummary {
        meta: trace.meta.clone(),
        source_id: input.external_id(req.source),
        ops_total: res.ops_total,
        pushes_total: res.pushes_total,
        t_used: res.t_used,
        t_max: res.t_max,
        early_stopped: res.early_stopped,
        r: res.r,
        err_inf: reference.map(|r| r.eval_pi(g, &res.pi_hat)),
        pi_l1: res.pi_hat.l1(),
        support: res.pi_hat.len(),
        wall_ms,
        max_grad_drift: res.max_grad_drift,
        adaptive_fallbacks: res.adaptive_fallbacks,
        warnings: res.warnings,
    };
    Ok(RunOutput { summary, trace })
}

/// Companion path for the outer-iteration CSV of a trace file.
pub fn outer_trace_path(inner: &Path) -> PathBuf {
    inner.with_extension("outer.csv")
}

pub fn write_trace_files(trace: &RunTrace, inner: &Path) -> CliResult<()> {
    write_csv(trace, BufWriter::new(File::create(inner)?))?;
    write_outer_csv(
        trace,
        BufWriter::new(File::create(outer_trace_path(inner))?),
    )?;
    Ok(())
}

pub fn write_json<T: serde::Serialize>(value: &T, path: &Path) -> CliResult<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

/// Parses a comma separated method list; `all` selects every method.
pub fn parse_methods(list: &str) -> CliResult<Vec<Method>> {
    let mut out = Vec::new();
    for tok in list.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        let picked = if tok == "all" {
            Method::ALL.to_vec()
        } else {
            vec![tok.parse::<Method>().map_err(CliError::Argument)?]
        };
        for m in picked {
            if !out.contains(&m) {
                out.push(m);
            }
        }
    }
    if out.is_empty() {
        return Err(CliError::arg("method list is empty"));
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct BenchPlan {
    pub graphs: Vec<String>,
    pub methods: Vec<Method>,
    pub alphas: Vec<f64>,
    pub epsilons: Vec<EpsSpec>,
    pub sources: SourceSpec,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub oracle: bool,
    pub init: InitStrategy,
    pub eta: Option<f64>,
    pub adaptive_eps: bool,
    pub t_cap: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct BenchFailure {
    pub run: String,
    pub error: String,
    pub exit_code: i32,
}

#[derive(Debug, Clone)]
pub struct BenchReport {
    pub rows: Vec<ResultRow>,
    pub failures: Vec<BenchFailure>,
    pub results_path: PathBuf,
}

struct Job {
    graph: usize,
    method: Method,
    alpha: f64,
    eps: f64,
    source: NodeId,
    reference: Option<usize>,
}

fn run_name(input: &GraphInput, job: &Job) -> String {
    format!(
        "{}__{}__a{}__e{:e}__s{}",
        input.name,
        job.method,
        job.alpha,
        job.eps,
        input.external_id(job.source)
    )
}

/// Runs the cross product of a plan. Runs execute in parallel; the result
/// table is ordered by graph, method, alpha, eps and source regardless of
/// scheduling.
pub fn bench(plan: &BenchPlan) -> CliResult<BenchReport> {
    if plan.methods.is_empty() {
        return Err(CliError::arg("method list is empty"));
    }
    if plan.graphs.is_empty() || plan.alphas.is_empty() || plan.epsilons.is_empty() {
        return Err(CliError::arg(
            "bench needs at least one graph, alpha and eps",
        ));
    }
    let inputs = plan
        .graphs
        .iter()
        .map(|g| GraphInput::load(g))
        .collect::<CliResult<Vec<_>>>()?;
    let runs_dir = plan.out_dir.join("runs");
    fs::create_dir_all(&runs_dir)?;

    let mut jobs = Vec::new();
    let mut ref_keys: Vec<(usize, f64, f64, NodeId)> = Vec::new();
    for (gi, input) in inputs.iter().enumerate() {
        let sources = plan.sources.resolve(input, plan.seed)?;
        let n = input.graph.n();
        for &method in &plan.methods {
            for &alpha in &plan.alphas {
                for spec in &plan.epsilons {
                    let eps = spec.resolve(n);
                    for &source in &sources {
                        let reference = plan.oracle.then(|| {
                            let key = (gi, alpha, eps, source);
                            match ref_keys.iter().position(|k| *k == key) {
                                Some(i) => i,
                                None => {
                                    ref_keys.push(key);
                                    ref_keys.len() - 1
                                }
                            }
                        });
                        jobs.push(Job {
                            graph: gi,
                            method,
                            alpha,
                            eps,
                            source,
                            reference,
                        });
                    }
                }
            }
        }
    }

    let references: Vec<CliResult<ErrorEvaluator>> = ref_keys
        .par_iter()
        .map(|&(gi, alpha, eps, s)| error_reference(&inputs[gi], alpha, eps, s))
        .collect();

    let outcomes: Vec<(String, CliResult<ResultRow>)> = jobs
        .par_iter()
        .map(|job| {
            let input = &inputs[job.graph];
            let name = run_name(input, job);
            let dir = runs_dir.join(&name);
            let result = (|| {
                let reference = match job.reference {
                    Some(i) => match &references[i] {
                        Ok(r) => Some(r),
                        Err(e) => return Err(CliError::Numerical(format!("reference: {e}"))),
                    },
                    None => None,
                };
                let req = RunRequest {
                    method: job.method,
                    alpha: job.alpha,
                    eps: job.eps,
                    source: job.source,
                    opts: SolveOptions {
                        init: plan.init,
                        eta: plan.eta,
                        adaptive_eps: plan.adaptive_eps,
                        t_cap: plan.t_cap,
                        verify: false,
                    },
                    seed: Some(plan.seed),
                };
                let out = execute(input, &req, reference)?;
                fs::create_dir_all(&dir)?;
                write_json(&out.summary, &dir.join("summary.json"))?;
                write_trace_files(&out.trace, &dir.join("trace.csv"))?;
                Ok(ResultRow::from(&out.summary))
            })();
            if let Err(e) = &result {
                let record =
                    serde_json::json!({ "error": e.to_string(), "exit_code": e.exit_code() });
                let _ = fs::create_dir_all(&dir)
                    .and_then(|_| fs::write(dir.join("error.json"), format!("{record:#}\n")));
            }
            (name, result)
        })
        .collect();

    let mut rows = Vec::new();
    let mut failures = Vec::new();
    let mut first_err = None;
    for (name, res) in outcomes {
        match res {
            Ok(row) => rows.push(row),
            Err(e) => {
                failures.push(BenchFailure {
                    run: name,
                    error: e.to_string(),
                    exit_code: e.exit_code(),
                });
                first_err.get_or_insert(e);
            }
        }
    }
    if rows.is_empty() {
        let e = first_err.unwrap_or_else(|| CliError::arg("plan has no runs"));
        let msg = format!("all {} runs failed; first error: {e}", failures.len());
        return Err(match e {
            CliError::Io(_) => CliError::Io(msg),
            CliError::Convergence(_) => CliError::Convergence(msg),
            CliError::Numerical(_) => CliError::Numerical(msg),
            CliError::Argument(_) => CliError::Argument(msg),
        });
    }
    let results_path = plan.out_dir.join("results.csv");
    write_results(&rows, BufWriter::new(File::create(&results_path)?))?;
    Ok(BenchReport {
        rows,
        failures,
        results_path,
    })
}
