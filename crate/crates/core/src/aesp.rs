//! Accelerated outer loop around the local solvers.
//!
//! Each outer iteration `t` approximately minimizes
//! `h_t(z) = f(z) + (η/2)‖z − y⁽ᵗ⁻¹⁾‖²` to accuracy `φ_t`, then takes a
//! momentum step. `∇f` is carried across iterations incrementally, so no
//! step touches more than the supports involved.

use crate::error::{invalid, Result};
use crate::graph::{Graph, NodeId};
use crate::local_solver::{
    compute_gradient, epsilon_inner, InnerSolution, InnerSolver, InnerStats, ShiftedProblem,
    SweepObserver, SweepRecord,
};
use crate::sparse::SparseVector;
use crate::trace::{sweep_means, OuterTraceRecord, TraceSink};

/// Smoothness constant of `f`.
pub const L: f64 = 1.0;

#[derive(Debug, Clone, PartialEq)]
pub struct OuterSchedule {
    pub t_max: usize,
    pub c: f64,
    pub phi0_scale: f64,
    pub mu: f64,
    pub eta: f64,
    pub l: f64,
    pub q: f64,
    pub rho: f64,
    pub beta: f64,
    pub epsilon: f64,
}

impl OuterSchedule {
    /// Schedule for an arbitrary source vector with `‖b‖₁ = b_l1`.
    pub fn general(alpha: f64, eta: f64, epsilon: f64, b_l1: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) || !(eta >= 0.0) || !(epsilon > 0.0) || !(b_l1 > 0.0) {
            return Err(invalid(format!(
                "schedule needs alpha in (0,1), eta >= 0, epsilon > 0, |b|_1 > 0; got \
                 alpha={alpha}, eta={eta}, epsilon={epsilon}, |b|_1={b_l1}"
            )));
        }
        let mu = alpha;
        let q = mu / (mu + eta);
        let rho = 0.9 * q.sqrt();
        let gap = q.sqrt() - rho;
        let arg = 4.0 * (L + mu) * b_l1 * b_l1 / (mu * epsilon * epsilon * gap * gap);
        Ok(Self {
            t_max: ceil_iterations(arg.ln() / rho),
            c: 1.0 - rho,
            phi0_scale: (L + mu) * b_l1 * b_l1 / 18.0,
            mu,
            eta,
            l: L,
            q,
            rho,
            beta: momentum_coefficient(mu, eta),
            epsilon,
        })
    }

    /// Closed-form schedule for `b = e_s`, `η = 1 − 2α`.
    pub fn aesp_ppr(alpha: f64, epsilon: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 0.5) {
            return Err(invalid(format!(
                "AESP-PPR requires alpha in (0, 1/2), got {alpha}"
            )));
        }
        if !(epsilon > 0.0) {
            return Err(invalid(format!("epsilon must be positive, got {epsilon}")));
        }
        let ratio = alpha / (1.0 - alpha);
        let t = (10.0 / 9.0)
            * ((1.0 - alpha) / alpha).sqrt()
            * (400.0 * (1.0 - alpha * alpha) / (alpha * alpha * epsilon * epsilon)).ln();
        let q = ratio;
        Ok(Self {
            t_max: ceil_iterations(t),
            c: 1.0 - 0.9 * ratio.sqrt(),
            phi0_scale: (1.0 + alpha) / 18.0,
            mu: alpha,
            eta: 1.0 - 2.0 * alpha,
            l: L,
            q,
            rho: 0.9 * q.sqrt(),
            beta: momentum_coefficient(alpha, 1.0 - 2.0 * alpha),
            epsilon,
        })
    }

    pub fn phi(&self, t: usize) -> f64 {
        self.phi0_scale * self.c.powi(t as i32)
    }

    /// Smallest `T` with `(1−ρ)^{T+1} ≤ μ ε² (√q−ρ)² / (4(L+μ)‖b‖₁²)`, the
    /// iteration count the accuracy argument needs. `t_max` over-estimates
    /// it because `ρ ≤ −ln(1−ρ)`.
    pub fn t_minimal(&self) -> usize {
        let gap = self.q.sqrt() - self.rho;
        let b_sq = self.phi0_scale * 18.0 / (self.l + self.mu);
        let x =
            self.mu * self.epsilon * self.epsilon * gap * gap / (4.0 * (self.l + self.mu) * b_sq);
        let t = (x.ln() / self.c.ln()).ceil() as i64 - 1;
        t.max(0) as usize
    }

    /// `μ ε² (√q − ρ)² / 72`, a lower bound on `φ_t` for `t ≤` [`Self::t_minimal`].
    pub fn phi_floor(&self) -> f64 {
        let gap = self.q.sqrt() - self.rho;
        self.mu * self.epsilon * self.epsilon * gap * gap / 72.0
    }
}

fn ceil_iterations(x: f64) -> usize {
    if x.is_finite() && x > 1.0 {
        x.ceil() as usize
    } else {
        1
    }
}

/// `(√(μ+η) − √μ) / (√(μ+η) + √μ)`.
pub fn momentum_coefficient(mu: f64, eta: f64) -> f64 {
    let a = (mu + eta).sqrt();
    let b = mu.sqrt();
    (a - b) / (a + b)
}

/// True when no node satisfies `εα√d_v ≤ |∇_v f|`.
pub fn early_stop_check(g: &Graph, grad_f: &SparseVector, epsilon: f64, alpha: f64) -> bool {
    grad_f
        .iter()
        .all(|(v, x)| x.abs() < epsilon * alpha * g.sqrt_degree(v))
}

/// `Q v` with `Q = ((1+α)/2) I − ((1−α)/2) D^{-1/2} A D^{-1/2}`.
pub fn apply_q(g: &Graph, alpha: f64, v: &SparseVector) -> SparseVector {
    let mut out = SparseVector::with_capacity(v.len() * 4);
    for (u, x) in v.sorted_entries() {
        out.add(u, (1.0 + alpha) / 2.0 * x);
        let share = (1.0 - alpha) / 2.0 * x / g.sqrt_degree(u);
        for &w in g.neighbors(u) {
            out.add(w, -share / g.sqrt_degree(w));
        }
    }
    out
}

/// `αD^{-1/2} b`.
pub fn scaled_source(g: &Graph, alpha: f64, b: &SparseVector) -> SparseVector {
    b.iter()
        .map(|(v, x)| (v, alpha * x / g.sqrt_degree(v)))
        .collect()
}

/// `∇f(x)` from scratch.
pub fn f_gradient(
    g: &Graph,
    alpha: f64,
    b: &SparseVector,
    x: &SparseVector,
) -> Result<SparseVector> {
    let p = ShiftedProblem::new(alpha, 0.0, scaled_source(g, alpha, b))?;
    Ok(compute_gradient(g, &p, x))
}

/// Carries `∇f` through one outer iteration.
///
/// Returns `(∇f(x⁽ᵗ⁾), ∇f(y⁽ᵗ⁾))` using `∇h_t(z) = ∇f(z) + η(z − y⁽ᵗ⁻¹⁾)`
/// and `y⁽ᵗ⁾ = x⁽ᵗ⁾ + β(x⁽ᵗ⁾ − x⁽ᵗ⁻¹⁾)`.
#[allow(clippy::too_many_arguments)]
pub fn maintain_f_gradient(
    g: &Graph,
    alpha: f64,
    grad_h_end: &SparseVector,
    z_end: &SparseVector,
    y_prev: &SparseVector,
    eta: f64,
    beta: f64,
    x_prev: &SparseVector,
) -> (SparseVector, SparseVector) {
    let mut grad_x = grad_h_end.clone();
    if eta != 0.0 {
        grad_x.axpy(-eta, &z_end.sub(y_prev));
    }
    let mut grad_y = grad_x.clone();
    if beta != 0.0 {
        let dx = z_end.sub(x_prev);
        if !dx.is_empty() {
            grad_y.axpy(beta, &apply_q(g, alpha, &dx));
        }
    }
    (grad_x, grad_y)
}

/// Start point of each proximal subproblem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InitStrategy {
    /// `z⁽⁰⁾ = y⁽ᵗ⁻¹⁾`.
    #[default]
    MomentumY,
    /// `z⁽⁰⁾ = x⁽ᵗ⁻¹⁾`.
    PreviousX,
    Zero,
}

impl InitStrategy {
    pub fn name(self) -> &'static str {
        match self {
            InitStrategy::MomentumY => "y",
            InitStrategy::PreviousX => "x",
            InitStrategy::Zero => "zero",
        }
    }
}

#[derive(Debug, Clone)]
pub struct AespOptions {
    pub inner: InnerSolver,
    pub init: InitStrategy,
    pub adaptive_eps: bool,
    pub t_cap: Option<usize>,
    /// Recompute gradients from scratch after every outer iteration and
    /// record the largest disagreement.
    pub verify: bool,
}

impl Default for AespOptions {
    fn default() -> Self {
        Self {
            inner: InnerSolver::LocAppr,
            init: InitStrategy::MomentumY,
            adaptive_eps: false,
            t_cap: None,
            verify: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct AespConfig {
    pub epsilon: f64,
    pub alpha: f64,
    pub eta: f64,
    pub b: SparseVector,
    pub opts: AespOptions,
}

#[derive(Debug, Clone)]
pub struct AespOutput {
    pub x: SparseVector,
    /// `∇f(x)`.
    pub grad_f: SparseVector,
    pub schedule: OuterSchedule,
    pub t_used: usize,
    pub early_stopped: bool,
    pub outer: Vec<OuterTraceRecord>,
    pub ops_total: u64,
    pub pushes_total: u64,
    /// Largest ℓ∞ gap between maintained and recomputed gradients.
    pub max_grad_drift: Option<f64>,
    /// Outer iterations where no adaptive level certified the subproblem.
    pub adaptive_fallbacks: usize,
    pub warnings: Vec<String>,
}

/// Forwards sweep records to a [`TraceSink`] with run-global numbering.
struct Forward<'s, S: TraceSink + ?Sized> {
    sink: &'s mut S,
    t: usize,
    ops_base: u64,
    k_base: usize,
}

impl<S: TraceSink + ?Sized> SweepObserver for Forward<'_, S> {
    fn on_sweep(&mut self, rec: &SweepRecord, z: &SparseVector, _grad: &SparseVector) {
        let mut r = rec.clone();
        r.k += self.k_base;
        r.ops_cum += self.ops_base;
        self.sink.on_sweep(self.t, &r, r.ops_cum, z);
    }
}

/// Merges the stats of a continuation stage into `acc`.
fn absorb(acc: &mut InnerStats, next: InnerStats) {
    let (k0, ops0) = (acc.sweeps.len(), acc.ops);
    acc.sweeps.extend(next.sweeps.into_iter().map(|mut r| {
        r.k += k0;
        r.ops_cum += ops0;
        r
    }));
    acc.pushes += next.pushes;
    acc.ops += next.ops;
    acc.c_final = next.c_final;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AdaptiveOutcome {
    /// Precision levels run before the ℓ2 certificate held.
    pub stages_run: u32,
    /// No level certified the subproblem and the fixed threshold was used.
    pub fallback: bool,
}

/// Runs the inner solver at successively finer thresholds
/// `√((η+α)φ / 2^s)`, down to `√((η+α)φ / m)`, stopping as soon as
/// `‖∇h‖₂ ≤ √(2(η+α)φ)`, which certifies `h − h* ≤ φ`. Each stage
/// continues from the previous iterate. If the finest level still fails the
/// certificate, the solve finishes at `fallback_eps`.
#[allow(clippy::too_many_arguments)]
pub fn adaptive_epsilon<O: SweepObserver>(
    phi: f64,
    g: &Graph,
    p: &ShiftedProblem,
    solver: InnerSolver,
    z0: SparseVector,
    grad0: SparseVector,
    fallback_eps: f64,
    obs: &mut O,
) -> Result<(InnerSolution, AdaptiveOutcome)> {
    if !(phi > 0.0) {
        return Err(invalid(format!("phi must be positive, got {phi}")));
    }
    let strength = p.eta + p.alpha;
    let target = (2.0 * strength * phi).sqrt();
    let m = g.m() as f64;
    let c0 = grad0.scaled_l1(g);
    let mut sol = InnerSolution {
        z: z0,
        grad: grad0,
        stats: InnerStats {
            c0,
            c_final: c0,
            ..Default::default()
        },
    };
    let mut stages = 0u32;
    let mut divisor = 1.0f64;
    loop {
        if sol.grad.l2() <= target {
            return Ok((
                sol,
                AdaptiveOutcome {
                    stages_run: stages,
                    fallback: false,
                },
            ));
        }
        if divisor >= m {
            break;
        }
        divisor = (divisor * 2.0).min(m);
        let eps = (strength * phi / divisor).sqrt();
        let mut relay = Relay {
            inner: &mut *obs,
            k_base: sol.stats.sweeps.len(),
            ops_base: sol.stats.ops,
        };
        let next = solver.solve(g, p, sol.z, sol.grad, eps, &mut relay)?;
        sol.z = next.z;
        sol.grad = next.grad;
        absorb(&mut sol.stats, next.stats);
        stages += 1;
    }
    let mut relay = Relay {
        inner: &mut *obs,
        k_base: sol.stats.sweeps.len(),
        ops_base: sol.stats.ops,
    };
    let next = solver.solve(g, p, sol.z, sol.grad, fallback_eps, &mut relay)?;
    sol.z = next.z;
    sol.grad = next.grad;
    absorb(&mut sol.stats, next.stats);
    Ok((
        sol,
        AdaptiveOutcome {
            stages_run: stages,
            fallback: true,
        },
    ))
}

/// Renumbers records of a continuation stage before passing them on.
struct Relay<'o, O: SweepObserver> {
    inner: &'o mut O,
    k_base: usize,
    ops_base: u64,
}

impl<O: SweepObserver> SweepObserver for Relay<'_, O> {
    fn on_sweep(&mut self, rec: &SweepRecord, z: &SparseVector, grad: &SparseVector) {
        let mut r = rec.clone();
        r.k += self.k_base;
        r.ops_cum += self.ops_base;
        self.inner.on_sweep(&r, z, grad);
    }
}

/// Accelerated solve of `min f` for an arbitrary source vector `b`.
pub fn aesp<S: TraceSink + ?Sized>(
    g: &Graph,
    cfg: &AespConfig,
    sink: &mut S,
) -> Result<AespOutput> {
    let b_l1 = cfg.b.l1();
    if b_l1 == 0.0 {
        return Ok(empty_output(cfg));
    }
    let schedule = OuterSchedule::general(cfg.alpha, cfg.eta, cfg.epsilon, b_l1)?;
    run(g, cfg, schedule, Vec::new(), sink)
}

fn empty_output(cfg: &AespConfig) -> AespOutput {
    AespOutput {
        x: SparseVector::new(),
        grad_f: SparseVector::new(),
        schedule: OuterSchedule::general(
            cfg.alpha.clamp(1e-12, 0.5),
            cfg.eta.max(0.0),
            cfg.epsilon.max(1e-300),
            1.0,
        )
        .expect("clamped schedule arguments are valid"),
        t_used: 0,
        early_stopped: true,
        outer: Vec::new(),
        ops_total: 0,
        pushes_total: 0,
        max_grad_drift: None,
        adaptive_fallbacks: 0,
        warnings: Vec::new(),
    }
}

/// PPR of source `s` with `η = 1 − 2α`; returns `π̂ = D^{1/2} x̂`.
pub fn aesp_ppr<S: TraceSink + ?Sized>(
    g: &Graph,
    epsilon: f64,
    alpha: f64,
    s: NodeId,
    opts: AespOptions,
    sink: &mut S,
) -> Result<(SparseVector, AespOutput)> {
    let schedule = OuterSchedule::aesp_ppr(alpha, epsilon)?;
    if s as usize >= g.n() {
        return Err(invalid(format!(
            "source {s} out of range for n = {}",
            g.n()
        )));
    }
    let mut warnings = Vec::new();
    if epsilon >= 1.0 / f64::from(g.degree(s)) {
        warnings.push(format!(
            "epsilon {epsilon} >= 1/d_s = {}; the error guarantee's precondition fails",
            1.0 / f64::from(g.degree(s))
        ));
    }
    let cfg = AespConfig {
        epsilon,
        alpha,
        eta: schedule.eta,
        b: SparseVector::unit(s, 1.0),
        opts,
    };
    let out = run(g, &cfg, schedule, warnings, sink)?;
    Ok((out.x.scale_by_sqrt_degree(g), out))
}

fn run<S: TraceSink + ?Sized>(
    g: &Graph,
    cfg: &AespConfig,
    schedule: OuterSchedule,
    mut warnings: Vec<String>,
    sink: &mut S,
) -> Result<AespOutput> {
    let (alpha, eta, eps) = (cfg.alpha, cfg.eta, cfg.epsilon);
    if let Some(bad) = cfg.b.support().find(|&v| v as usize >= g.n()) {
        return Err(invalid(format!("source vector entry {bad} out of range")));
    }
    if !cfg
        .b
        .iter()
        .any(|(v, x)| x.abs() >= eps * f64::from(g.degree(v)))
        && warnings.is_empty()
    {
        warnings.push(format!(
            "no entry of b satisfies |b_i| >= epsilon * d_i at epsilon = {eps}"
        ));
    }
    let source = scaled_source(g, alpha, &cfg.b);
    let beta = schedule.beta;
    let t_last = cfg
        .opts
        .t_cap
        .map_or(schedule.t_max, |c| c.min(schedule.t_max));
    let drift_scale = 1.0f64.max(alpha * cfg.b.linf());

    let mut x_prev = SparseVector::new();
    let mut y_prev = SparseVector::new();
    let mut grad_f_x = source.clone();
    grad_f_x.axpy(-2.0, &source);
    let mut grad_f_y = grad_f_x.clone();
    let mut outer = Vec::new();
    let mut ops_total = 0u64;
    let mut pushes_total = 0u64;
    let mut drift: Option<f64> = None;
    let mut fallbacks = 0usize;
    let mut early_stopped = false;
    let mut t_used = 0;

    for t in 1..=t_last {
        t_used = t;
        let phi = schedule.phi(t);
        let mut b_eff = source.clone();
        b_eff.axpy(eta, &y_prev);
        let p = ShiftedProblem::new(alpha, eta, b_eff)?;
        let (z0, grad0) = match cfg.opts.init {
            InitStrategy::MomentumY => (y_prev.clone(), grad_f_y.clone()),
            InitStrategy::PreviousX => {
                let mut gr = grad_f_x.clone();
                gr.axpy(eta, &x_prev.sub(&y_prev));
                (x_prev.clone(), gr)
            }
            InitStrategy::Zero => {
                let mut gr = SparseVector::new();
                gr.axpy(-1.0, &p.b_eff);
                (SparseVector::new(), gr)
            }
        };
        let c0 = grad0.scaled_l1(g);
        let mut fwd = Forward {
            sink: &mut *sink,
            t,
            ops_base: ops_total,
            k_base: 0,
        };
        let (sol, eps_t) = if c0 == 0.0 {
            let stats = InnerStats::default();
            (
                InnerSolution {
                    z: z0,
                    grad: grad0,
                    stats,
                },
                None,
            )
        } else {
            let eps_t = epsilon_inner(phi, g.m(), alpha, eta, alpha, c0)?;
            if cfg.opts.adaptive_eps {
                let (sol, outcome) =
                    adaptive_epsilon(phi, g, &p, cfg.opts.inner, z0, grad0, eps_t, &mut fwd)?;
                if outcome.fallback {
                    fallbacks += 1;
                }
                (sol, Some(eps_t))
            } else {
                (
                    cfg.opts.inner.solve(g, &p, z0, grad0, eps_t, &mut fwd)?,
                    Some(eps_t),
                )
            }
        };
        ops_total += sol.stats.ops;
        pushes_total += sol.stats.pushes;

        let (gx, gy) =
            maintain_f_gradient(g, alpha, &sol.grad, &sol.z, &y_prev, eta, beta, &x_prev);
        if cfg.opts.verify {
            let scratch_h = compute_gradient(g, &p, &sol.z);
            let scratch_x = f_gradient(g, alpha, &cfg.b, &sol.z)?;
            let d = scratch_h
                .linf_distance(&sol.grad)
                .max(scratch_x.linf_distance(&gx))
                / drift_scale;
            drift = Some(drift.map_or(d, |m: f64| m.max(d)));
        }
        if !gx.all_finite() || !sol.z.all_finite() {
            return Err(crate::error::SolverError::Numerical(format!(
                "non-finite iterate at outer iteration {t}"
            )));
        }
        let (k_t, vol_mean, gamma_mean) =
            sweep_means(sol.stats.sweeps.iter().map(|r| (r.vol, r.gamma)));
        let rec = OuterTraceRecord {
            t,
            phi_t: Some(phi),
            eps_t,
            k_t,
            vol_mean,
            gamma_mean,
            c0_t: c0,
            ops_cum: ops_total,
            grad_f_linf_scaled: gx.inv_scaled_linf(g),
            err_inf: None,
        };
        let stop = early_stop_check(g, &gx, eps, alpha);
        let x_t = sol.z;
        let err = sink.on_outer(&rec, &x_t);
        outer.push(OuterTraceRecord {
            err_inf: err,
            ..rec
        });
        if stop {
            early_stopped = true;
            grad_f_x = gx;
            x_prev = x_t;
            break;
        }
        let mut y = x_t.clone();
        if beta != 0.0 {
            y.axpy(beta, &x_t.sub(&x_prev));
        }
        if cfg.opts.verify {
            let scratch_y = f_gradient(g, alpha, &cfg.b, &y)?;
            let d = scratch_y.linf_distance(&gy) / drift_scale;
            drift = Some(drift.map_or(d, |m: f64| m.max(d)));
        }
        grad_f_x = gx;
        grad_f_y = gy;
        x_prev = x_t;
        y_prev = y;
    }

    Ok(AespOutput {
        x: x_prev,
        grad_f: grad_f_x,
        schedule,
        t_used,
        early_stopped,
        outer,
        ops_total,
        pushes_total,
        max_grad_drift: drift,
        adaptive_fallbacks: fallbacks,
        warnings,
    })
}
