//! Run instrumentation: records, aggregation, CSV and JSON serialization.
//!
//! Inner CSV header: `t,k,vol_S,gamma,grad_l1_scaled,ops_cum,err_inf`.
//! Outer CSV header: `t,phi_t,eps_t,K_t,vol_mean,gamma_mean,c0_t,ops_cum,grad_f_linf_scaled,err_inf`.
//! Floats are written with 17 significant digits so a round trip is exact;
//! unmeasured or undefined values are empty fields.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Result, SolverError};
use crate::graph::Graph;
use crate::local_solver::SweepRecord;
use crate::oracle::ErrorEvaluator;
use crate::sparse::SparseVector;

pub const INNER_HEADER: &str = "t,k,vol_S,gamma,grad_l1_scaled,ops_cum,err_inf";
pub const OUTER_HEADER: &str =
    "t,phi_t,eps_t,K_t,vol_mean,gamma_mean,c0_t,ops_cum,grad_f_linf_scaled,err_inf";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub graph: String,
    pub n: usize,
    pub m: usize,
    pub method: String,
    pub alpha: f64,
    pub epsilon: f64,
    pub eta: f64,
    pub init: String,
    pub seed: Option<u64>,
    pub source: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InnerRecord {
    pub t: usize,
    pub k: usize,
    pub vol_s: u64,
    pub gamma: f64,
    pub grad_l1_scaled: f64,
    pub ops_cum: u64,
    pub err_inf: Option<f64>,
    pub grad_l1_before: f64,
    pub contraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OuterTraceRecord {
    pub t: usize,
    /// `None` for the non-accelerated baselines.
    pub phi_t: Option<f64>,
    /// `None` when the subproblem started at its optimum.
    pub eps_t: Option<f64>,
    pub k_t: usize,
    pub vol_mean: f64,
    pub gamma_mean: f64,
    pub c0_t: f64,
    pub ops_cum: u64,
    pub grad_f_linf_scaled: f64,
    pub err_inf: Option<f64>,
}

/// Receives the instrumentation stream of one solver run.
pub trait TraceSink {
    fn on_sweep(&mut self, _t: usize, _rec: &SweepRecord, _ops_cum: u64, _z: &SparseVector) {}
    /// Returns the measured error of `x` if this sink measures one.
    fn on_outer(&mut self, _rec: &OuterTraceRecord, _x: &SparseVector) -> Option<f64> {
        None
    }
}

impl TraceSink for () {}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunTrace {
    pub meta: RunMeta,
    pub inner: Vec<InnerRecord>,
    pub outer: Vec<OuterTraceRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ErrSampling {
    #[default]
    Off,
    PerSweep,
    PerOuter,
}

/// Sink that builds a [`RunTrace`], measuring error against a reference
/// vector when one is supplied.
pub struct TraceRecorder<'a> {
    g: &'a Graph,
    oracle: Option<&'a ErrorEvaluator>,
    sampling: ErrSampling,
    pub trace: RunTrace,
}

impl<'a> TraceRecorder<'a> {
    pub fn new(g: &'a Graph, meta: RunMeta) -> Self {
        Self {
            g,
            oracle: None,
            sampling: ErrSampling::Off,
            trace: RunTrace {
                meta,
                ..Default::default()
            },
        }
    }

    pub fn with_oracle(mut self, oracle: &'a ErrorEvaluator, sampling: ErrSampling) -> Self {
        self.oracle = Some(oracle);
        self.sampling = sampling;
        self
    }

    pub fn into_trace(self) -> RunTrace {
        self.trace
    }
}

impl TraceSink for TraceRecorder<'_> {
    fn on_sweep(&mut self, t: usize, rec: &SweepRecord, ops_cum: u64, z: &SparseVector) {
        let err_inf = match (self.oracle, self.sampling) {
            (Some(o), ErrSampling::PerSweep) => Some(o.eval_x(self.g, z)),
            _ => None,
        };
        self.trace.inner.push(InnerRecord {
            t,
            k: rec.k,
            vol_s: rec.vol,
            gamma: rec.gamma,
            grad_l1_scaled: rec.grad_l1_scaled,
            ops_cum,
            err_inf,
            grad_l1_before: rec.grad_l1_before,
            contraction: rec.contraction,
        });
    }

    fn on_outer(&mut self, rec: &OuterTraceRecord, x: &SparseVector) -> Option<f64> {
        let mut rec = rec.clone();
        if self.sampling != ErrSampling::Off {
            rec.err_inf = self.oracle.map(|o| o.eval_x(self.g, x));
        }
        let err = rec.err_inf;
        self.trace.outer.push(rec);
        err
    }
}

/// Per-outer-iteration means over a set of sweeps. An empty set yields
/// `vol_mean = 0` and `gamma_mean = 1`.
pub fn sweep_means<I: IntoIterator<Item = (u64, f64)>>(sweeps: I) -> (usize, f64, f64) {
    let mut k = 0usize;
    let (mut vol, mut gamma) = (0.0, 0.0);
    for (v, g) in sweeps {
        k += 1;
        vol += v as f64;
        gamma += g;
    }
    if k == 0 {
        (0, 0.0, 1.0)
    } else {
        (k, vol / k as f64, gamma / k as f64)
    }
}

/// `max_t c0_t / c0_1`.
pub fn constant_r(c0: &[f64]) -> Result<f64> {
    match c0.first() {
        Some(&first) if first > 0.0 => Ok(c0.iter().fold(0.0f64, |m, &c| m.max(c)) / first),
        _ => Err(SolverError::UndefinedR),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OuterSummary {
    pub t: usize,
    pub k_t: usize,
    pub vol_mean: f64,
    pub gamma_mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceSummary {
    pub ops_total: u64,
    pub t_used: usize,
    pub r: Option<f64>,
    pub per_t: Vec<OuterSummary>,
    pub vol_over_gamma_max: f64,
}

/// Recomputes the headline quantities from the inner and outer records.
pub fn aggregate(run: &RunTrace) -> Result<TraceSummary> {
    let ops_total: u64 = run.inner.iter().map(|r| r.vol_s).sum();
    let mut per_t = Vec::with_capacity(run.outer.len());
    let mut ratio_max = 0.0f64;
    for o in &run.outer {
        let (k_t, vol_mean, gamma_mean) = sweep_means(
            run.inner
                .iter()
                .filter(|r| r.t == o.t)
                .map(|r| (r.vol_s, r.gamma)),
        );
        if gamma_mean <= 0.0 && vol_mean > 0.0 {
            return Err(SolverError::Numerical(format!(
                "inconsistent trace: zero gamma with positive volume at t = {}",
                o.t
            )));
        }
        if vol_mean > 0.0 {
            ratio_max = ratio_max.max(vol_mean / gamma_mean);
        }
        per_t.push(OuterSummary {
            t: o.t,
            k_t,
            vol_mean,
            gamma_mean,
        });
    }
    let c0: Vec<f64> = run.outer.iter().map(|o| o.c0_t).collect();
    Ok(TraceSummary {
        ops_total,
        t_used: run.outer.len(),
        r: constant_r(&c0).ok(),
        per_t,
        vol_over_gamma_max: ratio_max,
    })
}

/// Violations of the structural guarantees of a trace.
pub fn check_invariants(run: &RunTrace, m: usize, tol: f64) -> Vec<String> {
    let mut issues = Vec::new();
    let mut ops_prev = 0u64;
    let mut ops_sum = 0u64;
    for (i, r) in run.inner.iter().enumerate() {
        ops_sum += r.vol_s;
        if r.ops_cum < ops_prev {
            issues.push(format!("ops_cum decreases at record {i}"));
        }
        if r.ops_cum != ops_sum {
            issues.push(format!(
                "ops_cum {} != running volume {ops_sum} at record {i}",
                r.ops_cum
            ));
        }
        ops_prev = r.ops_cum;
        let bound = r.contraction * r.grad_l1_before + tol * r.grad_l1_before.max(1.0);
        if r.grad_l1_scaled > bound {
            issues.push(format!(
                "contraction violated at t={} k={}: {} > {}",
                r.t, r.k, r.grad_l1_scaled, bound
            ));
        }
        if r.grad_l1_scaled > r.grad_l1_before + tol * r.grad_l1_before.max(1.0) {
            issues.push(format!("scaled gradient grew at t={} k={}", r.t, r.k));
        }
    }
    for w in run.outer.windows(2) {
        if w[1].ops_cum < w[0].ops_cum {
            issues.push(format!("outer ops_cum decreases at t={}", w[1].t));
        }
    }
    if let Some(last) = run.outer.last() {
        if last.ops_cum != ops_sum {
            issues.push(format!(
                "ops_total {} != sum of volumes {ops_sum}",
                last.ops_cum
            ));
        }
    }
    match aggregate(run) {
        Ok(s) => {
            for p in &s.per_t {
                if p.vol_mean > 0.0 && p.vol_mean / p.gamma_mean > 2.0 * m as f64 * (1.0 + tol) {
                    issues.push(format!(
                        "vol_mean/gamma_mean = {} exceeds 2m at t={}",
                        p.vol_mean / p.gamma_mean,
                        p.t
                    ));
                }
            }
            for (o, p) in run.outer.iter().zip(&s.per_t) {
                if o.k_t != p.k_t
                    || (o.vol_mean - p.vol_mean).abs() > tol * p.vol_mean.max(1.0)
                    || (o.gamma_mean - p.gamma_mean).abs() > tol
                {
                    issues.push(format!("outer record t={} disagrees with its sweeps", o.t));
                }
            }
        }
        Err(e) => issues.push(e.to_string()),
    }
    issues
}

fn fmt_f(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f).unwrap_or_default()
}

pub fn write_csv<W: Write>(run: &RunTrace, mut w: W) -> std::io::Result<()> {
    writeln!(w, "{INNER_HEADER}")?;
    for r in &run.inner {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            r.t,
            r.k,
            r.vol_s,
            fmt_f(r.gamma),
            fmt_f(r.grad_l1_scaled),
            r.ops_cum,
            fmt_opt(r.err_inf)
        )?;
    }
    w.flush()
}

pub fn write_outer_csv<W: Write>(run: &RunTrace, mut w: W) -> std::io::Result<()> {
    writeln!(w, "{OUTER_HEADER}")?;
    for o in &run.outer {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{}",
            o.t,
            fmt_opt(o.phi_t),
            fmt_opt(o.eps_t),
            o.k_t,
            fmt_f(o.vol_mean),
            fmt_f(o.gamma_mean),
            fmt_f(o.c0_t),
            o.ops_cum,
            fmt_f(o.grad_f_linf_scaled),
            fmt_opt(o.err_inf)
        )?;
    }
    w.flush()
}

fn csv_err(line: usize, msg: impl std::fmt::Display) -> SolverError {
    SolverError::InvalidArgument(format!("trace csv line {line}: {msg}"))
}

fn parse<T: std::str::FromStr>(field: &str, line: usize) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    field
        .parse()
        .map_err(|e| csv_err(line, format!("{field:?}: {e}")))
}

fn parse_opt(field: &str, line: usize) -> Result<Option<f64>> {
    if field.is_empty() {
        Ok(None)
    } else {
        parse(field, line).map(Some)
    }
}

fn read_rows<R: BufRead>(r: R, header: &str, width: usize) -> Result<Vec<(usize, Vec<String>)>> {
    let mut rows = Vec::new();
    let mut lines = r.lines().enumerate();
    match lines.next() {
        Some((_, Ok(h))) if h.trim_end() == header => {}
        Some((_, Ok(h))) => return Err(csv_err(1, format!("unexpected header {h:?}"))),
        Some((_, Err(e))) => return Err(csv_err(1, e)),
        None => return Err(csv_err(1, "missing header")),
    }
    for (i, line) in lines {
        let line = line.map_err(|e| csv_err(i + 1, e))?;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<String> = line.split(',').map(str::to_owned).collect();
        if fields.len() != width {
            return Err(csv_err(i + 1, format!("expected {width} fields")));
        }
        rows.push((i + 1, fields));
    }
    Ok(rows)
}

/// Parses the inner CSV. Columns absent from the file (`contraction`,
/// `grad_l1_before`) are filled with `1` and the record's own norm.
pub fn read_csv<R: BufRead>(r: R) -> Result<Vec<InnerRecord>> {
    read_rows(r, INNER_HEADER, 7)?
        .into_iter()
        .map(|(ln, f)| {
            let grad_l1_scaled = parse(&f[4], ln)?;
            Ok(InnerRecord {
                t: parse(&f[0], ln)?,
                k: parse(&f[1], ln)?,
                vol_s: parse(&f[2], ln)?,
                gamma: parse(&f[3], ln)?,
                grad_l1_scaled,
                ops_cum: parse(&f[5], ln)?,
                err_inf: parse_opt(&f[6], ln)?,
                grad_l1_before: grad_l1_scaled,
                contraction: 1.0,
            })
        })
        .collect()
}

pub fn read_outer_csv<R: BufRead>(r: R) -> Result<Vec<OuterTraceRecord>> {
    read_rows(r, OUTER_HEADER, 10)?
        .into_iter()
        .map(|(ln, f)| {
            Ok(OuterTraceRecord {
                t: parse(&f[0], ln)?,
                phi_t: parse_opt(&f[1], ln)?,
                eps_t: parse_opt(&f[2], ln)?,
                k_t: parse(&f[3], ln)?,
                vol_mean: parse(&f[4], ln)?,
                gamma_mean: parse(&f[5], ln)?,
                c0_t: parse(&f[6], ln)?,
                ops_cum: parse(&f[7], ln)?,
                grad_f_linf_scaled: parse(&f[8], ln)?,
                err_inf: parse_opt(&f[9], ln)?,
            })
        })
        .collect()
}
