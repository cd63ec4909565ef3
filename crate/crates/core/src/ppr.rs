//! One entry point for every solver variant.

use std::fmt;
use std::str::FromStr;

use crate::aesp::{aesp, aesp_ppr, AespConfig, AespOptions, InitStrategy};
use crate::error::{invalid, Result};
use crate::graph::{Graph, NodeId};
use crate::local_solver::{InnerSolver, ShiftedProblem, SweepObserver, SweepRecord};
use crate::sparse::SparseVector;
use crate::trace::{constant_r, sweep_means, OuterTraceRecord, TraceSink};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    /// Push with unit step.
    Appr,
    /// Push with step `2/(1+α)`.
    ApprOpt,
    LocGd,
    LocAppr,
    AespLocGd,
    AespLocAppr,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Appr,
        Method::ApprOpt,
        Method::LocGd,
        Method::LocAppr,
        Method::AespLocGd,
        Method::AespLocAppr,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Appr => "appr",
            Method::ApprOpt => "appr-opt",
            Method::LocGd => "locgd",
            Method::LocAppr => "locappr",
            Method::AespLocGd => "aesp-locgd",
            Method::AespLocAppr => "aesp-locappr",
        }
    }

    pub fn is_accelerated(self) -> bool {
        matches!(self, Method::AespLocGd | Method::AespLocAppr)
    }

    pub fn inner(self) -> InnerSolver {
        match self {
            Method::LocGd | Method::AespLocGd => InnerSolver::LocGd,
            _ => InnerSolver::LocAppr,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Method::ALL.iter().map(|m| m.name()).collect();
                format!("unknown method {s:?}; expected one of {}", names.join(", "))
            })
    }
}

#[derive(Debug, Clone, Default)]
pub struct SolveOptions {
    pub init: InitStrategy,
    /// Shift for the accelerated methods; `1 − 2α` when absent.
    pub eta: Option<f64>,
    pub adaptive_eps: bool,
    pub t_cap: Option<usize>,
    pub verify: bool,
}

#[derive(Debug, Clone)]
pub struct PprResult {
    pub method: Method,
    pub alpha: f64,
    pub epsilon: f64,
    pub source: NodeId,
    pub eta: f64,
    /// `D^{1/2} x`.
    pub pi_hat: SparseVector,
    pub x: SparseVector,
    pub ops_total: u64,
    pub pushes_total: u64,
    pub t_used: usize,
    /// Worst-case outer iteration count; 1 for the baselines.
    pub t_max: usize,
    pub early_stopped: bool,
    pub r: Option<f64>,
    pub outer: Vec<OuterTraceRecord>,
    pub max_grad_drift: Option<f64>,
    pub adaptive_fallbacks: usize,
    pub warnings: Vec<String>,
}

struct Forward<'s, S: TraceSink + ?Sized> {
    sink: &'s mut S,
}

impl<S: TraceSink + ?Sized> SweepObserver for Forward<'_, S> {
    fn on_sweep(&mut self, rec: &SweepRecord, z: &SparseVector, _grad: &SparseVector) {
        self.sink.on_sweep(1, rec, rec.ops_cum, z);
    }
}

/// Runs `method` for source `s` to precision `epsilon`.
pub fn run_method<S: TraceSink + ?Sized>(
    g: &Graph,
    method: Method,
    alpha: f64,
    epsilon: f64,
    s: NodeId,
    opts: &SolveOptions,
    sink: &mut S,
) -> Result<PprResult> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(invalid(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(invalid(format!("epsilon must be positive, got {epsilon}")));
    }
    if s as usize >= g.n() {
        return Err(invalid(format!(
            "source {s} out of range for n = {}",
            g.n()
        )));
    }
    if method.is_accelerated() {
        run_accelerated(g, method, alpha, epsilon, s, opts, sink)
    } else {
        run_baseline(g, method, alpha, epsilon, s, opts, sink)
    }
}

fn run_accelerated<S: TraceSink + ?Sized>(
    g: &Graph,
    method: Method,
    alpha: f64,
    epsilon: f64,
    s: NodeId,
    opts: &SolveOptions,
    sink: &mut S,
) -> Result<PprResult> {
    let aopts = AespOptions {
        inner: method.inner(),
        init: opts.init,
        adaptive_eps: opts.adaptive_eps,
        t_cap: opts.t_cap,
        verify: opts.verify,
    };
    let default_eta = 1.0 - 2.0 * alpha;
    let out = match opts.eta {
        Some(eta) if eta != default_eta => {
            let cfg = AespConfig {
                epsilon,
                alpha,
                eta,
                b: SparseVector::unit(s, 1.0),
                opts: aopts,
            };
            aesp(g, &cfg, sink)?
        }
        _ => aesp_ppr(g, epsilon, alpha, s, aopts, sink)?.1,
    };
    let c0: Vec<f64> = out.outer.iter().map(|o| o.c0_t).collect();
    Ok(PprResult {
        method,
        alpha,
        epsilon,
        source: s,
        eta: out.schedule.eta,
        pi_hat: out.x.scale_by_sqrt_degree(g),
        ops_total: out.ops_total,
        pushes_total: out.pushes_total,
        t_used: out.t_used,
        t_max: out.schedule.t_max,
        early_stopped: out.early_stopped,
        r: constant_r(&c0).ok(),
        outer: out.outer,
        max_grad_drift: out.max_grad_drift,
        adaptive_fallbacks: out.adaptive_fallbacks,
        warnings: out.warnings,
        x: out.x,
    })
}

fn run_baseline<S: TraceSink + ?Sized>(
    g: &Graph,
    method: Method,
    alpha: f64,
    epsilon: f64,
    s: NodeId,
    opts: &SolveOptions,
    sink: &mut S,
) -> Result<PprResult> {
    let b_eff = SparseVector::unit(s, alpha / g.sqrt_degree(s));
    let p = match method {
        Method::Appr => ShiftedProblem::with_step(alpha, 0.0, 1.0, b_eff)?,
        _ => ShiftedProblem::new(alpha, 0.0, b_eff)?,
    };
    let mut grad0 = SparseVector::new();
    grad0.axpy(-1.0, &p.b_eff);
    let eps_hat = alpha * epsilon;
    let mut fwd = Forward { sink: &mut *sink };
    let sol = method
        .inner()
        .solve(g, &p, SparseVector::new(), grad0, eps_hat, &mut fwd)?;
    let mut drift = None;
    if opts.verify {
        let fresh = crate::local_solver::compute_gradient(g, &p, &sol.z);
        drift = Some(fresh.linf_distance(&sol.grad) / alpha.max(1.0));
    }
    let (k_t, vol_mean, gamma_mean) =
        sweep_means(sol.stats.sweeps.iter().map(|r| (r.vol, r.gamma)));
    let rec = OuterTraceRecord {
        t: 1,
        phi_t: None,
        eps_t: Some(eps_hat),
        k_t,
        vol_mean,
        gamma_mean,
        c0_t: sol.stats.c0,
        ops_cum: sol.stats.ops,
        grad_f_linf_scaled: sol.grad.inv_scaled_linf(g),
        err_inf: None,
    };
    let err = sink.on_outer(&rec, &sol.z);
    let rec = OuterTraceRecord {
        err_inf: err,
        ..rec
    };
    Ok(PprResult {
        method,
        alpha,
        epsilon,
        source: s,
        eta: 0.0,
        pi_hat: sol.z.scale_by_sqrt_degree(g),
        ops_total: sol.stats.ops,
        pushes_total: sol.stats.pushes,
        t_used: 1,
        t_max: 1,
        early_stopped: true,
        r: constant_r(&[rec.c0_t]).ok(),
        outer: vec![rec],
        max_grad_drift: drift,
        adaptive_fallbacks: 0,
        warnings: Vec::new(),
        x: sol.z,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::generators;
    use crate::oracle::{error_inf_deg, fixed_point_ppr};

    #[test]
    fn names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert!("pagerank".parse::<Method>().is_err());
    }

    #[test]
    fn every_method_meets_tolerance_on_a_grid() {
        let g = generators::grid(8, 8);
        let eps = 1e-5;
        let reference = fixed_point_ppr(&g, 0.1, 27, eps / 100.0).unwrap().pi;
        for m in Method::ALL {
            let r = run_method(
                &g,
                m,
                0.1,
                eps,
                27,
                &SolveOptions {
                    verify: true,
                    ..Default::default()
                },
                &mut (),
            )
            .unwrap();
            let err = error_inf_deg(&g, &r.pi_hat, &reference);
            assert!(err <= eps, "{m}: {err}");
            assert!(r.max_grad_drift.unwrap() < 1e-9);
            assert!(r.ops_total > 0);
        }
    }

    #[test]
    fn appr_opt_is_no_slower_than_appr_here() {
        let g = generators::barabasi_albert(500, 3, 2);
        let opts = SolveOptions::default();
        let a = run_method(&g, Method::Appr, 0.1, 1e-5, 0, &opts, &mut ()).unwrap();
        let b = run_method(&g, Method::ApprOpt, 0.1, 1e-5, 0, &opts, &mut ()).unwrap();
        assert!(
            b.ops_total <= a.ops_total,
            "{} > {}",
            b.ops_total,
            a.ops_total
        );
    }

    #[test]
    fn argument_errors() {
        let g = generators::path(4);
        let opts = SolveOptions::default();
        assert!(run_method(&g, Method::AespLocAppr, 0.6, 1e-4, 0, &opts, &mut ()).is_err());
        assert!(run_method(&g, Method::Appr, 0.1, 0.0, 0, &opts, &mut ()).is_err());
        assert!(run_method(&g, Method::Appr, 0.1, 1e-3, 4, &opts, &mut ()).is_err());
    }

    #[test]
    fn custom_eta_uses_general_driver() {
        let g = generators::grid(5, 5);
        let eps = 1e-5;
        let reference = fixed_point_ppr(&g, 0.2, 12, eps / 100.0).unwrap().pi;
        let opts = SolveOptions {
            eta: Some(0.3),
            ..Default::default()
        };
        let r = run_method(&g, Method::AespLocGd, 0.2, eps, 12, &opts, &mut ()).unwrap();
        assert_eq!(r.eta, 0.3);
        assert!(error_inf_deg(&g, &r.pi_hat, &reference) <= eps);
    }
}
