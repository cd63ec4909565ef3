//! Shifted quadratic subproblems and the localized push solvers.
//!
//! Every inner problem has the form
//!
//! ```text
//! h(z) = ½ zᵀ Q̃ z − b_effᵀ z,   Q̃ = ((1+α+2η)/2) I − ((1−α)/2) D^{-1/2} A D^{-1/2}
//! ```
//!
//! LocGD updates every queued node at once per sweep; LocAPPR pushes one
//! node at a time. Both keep the gradient exact under every update so the
//! stopping test `|∇_u h| < ε̂ √d_u` needs no recomputation.

use std::collections::VecDeque;

use rustc_hash::FxHashSet;

use crate::error::{invalid, Result, SolverError};
use crate::graph::{Graph, NodeId};
use crate::sparse::{CompensatedSum, SparseVector};

/// Inner quadratic `h` with its step size.
#[derive(Debug, Clone)]
pub struct ShiftedProblem {
    pub alpha: f64,
    pub eta: f64,
    pub step: f64,
    pub b_eff: SparseVector,
    cancels: bool,
}

impl ShiftedProblem {
    /// Uses the step `2/(1+α+2η)`, which zeroes a pushed node's gradient.
    pub fn new(alpha: f64, eta: f64, b_eff: SparseVector) -> Result<Self> {
        Self::check(alpha, eta)?;
        let step = Self::optimal_step(alpha, eta);
        Ok(Self {
            alpha,
            eta,
            step,
            b_eff,
            cancels: true,
        })
    }

    pub fn with_step(alpha: f64, eta: f64, step: f64, b_eff: SparseVector) -> Result<Self> {
        Self::check(alpha, eta)?;
        let opt = Self::optimal_step(alpha, eta);
        if !(step > 0.0 && step <= opt * (1.0 + 1e-15)) {
            return Err(invalid(format!("step {step} outside (0, {opt}]")));
        }
        Ok(Self {
            alpha,
            eta,
            step,
            b_eff,
            cancels: step == opt,
        })
    }

    fn check(alpha: f64, eta: f64) -> Result<()> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(invalid(format!("alpha must lie in (0, 1), got {alpha}")));
        }
        if !(eta >= 0.0 && eta.is_finite()) {
            return Err(invalid(format!(
                "eta must be a finite value >= 0, got {eta}"
            )));
        }
        Ok(())
    }

    pub fn optimal_step(alpha: f64, eta: f64) -> f64 {
        2.0 / (1.0 + alpha + 2.0 * eta)
    }

    /// Diagonal of `Q̃`.
    #[inline]
    pub fn diag(&self) -> f64 {
        (1.0 + self.alpha + 2.0 * self.eta) / 2.0
    }

    /// Magnitude of the off-diagonal factor `(1−α)/2`.
    #[inline]
    pub fn off(&self) -> f64 {
        (1.0 - self.alpha) / 2.0
    }

    /// Per-unit contraction of the scaled ℓ1 gradient norm; equals
    /// `2(α+η)/(1+α+2η)` at the optimal step.
    pub fn tau(&self) -> f64 {
        if self.cancels {
            2.0 * (self.alpha + self.eta) / (1.0 + self.alpha + 2.0 * self.eta)
        } else {
            self.step * (self.alpha + self.eta)
        }
    }

    /// Whether a push leaves exactly zero gradient at the pushed node.
    pub fn cancels_diagonal(&self) -> bool {
        self.cancels
    }

    /// Fraction of the gradient left at a pushed node.
    #[inline]
    fn remainder(&self) -> f64 {
        if self.cancels {
            0.0
        } else {
            1.0 - self.step * self.diag()
        }
    }

    /// `h(z)`, evaluated from scratch.
    pub fn objective(&self, g: &Graph, z: &SparseVector) -> f64 {
        let grad = compute_gradient(g, self, z);
        // h(z) = ½ zᵀ(∇h + b) − bᵀz = ½ zᵀ∇h − ½ bᵀz
        z.iter()
            .map(|(v, x)| 0.5 * x * (grad.get(v) - self.b_eff.get(v)))
            .sum()
    }
}

/// `Q̃ z − b_eff` from scratch.
pub fn compute_gradient(g: &Graph, p: &ShiftedProblem, z: &SparseVector) -> SparseVector {
    let mut grad = SparseVector::with_capacity(z.len() * 4 + p.b_eff.len());
    let diag = p.diag();
    let off = p.off();
    for (u, x) in z.sorted_entries() {
        grad.add(u, diag * x);
        let share = off * x / g.sqrt_degree(u);
        for &v in g.neighbors(u) {
            grad.add(v, -share / g.sqrt_degree(v));
        }
    }
    for (v, b) in p.b_eff.sorted_entries() {
        grad.add(v, -b);
    }
    grad
}

/// `‖D^{1/2} grad‖₁`.
pub fn scaled_grad_l1(g: &Graph, grad: &SparseVector) -> f64 {
    grad.scaled_l1(g)
}

/// Gradient threshold guaranteeing `h(z) − h* ≤ φ` once no node is active.
///
/// `c0` is `‖D^{1/2}∇h(z⁽⁰⁾)‖₁`; a zero `c0` means the start point is
/// already optimal and the caller should not run a solver at all.
pub fn epsilon_inner(phi: f64, m: usize, mu: f64, eta: f64, alpha: f64, c0: f64) -> Result<f64> {
    if !(phi > 0.0 && phi.is_finite()) {
        return Err(invalid(format!("phi must be positive, got {phi}")));
    }
    if m == 0 || !(mu > 0.0) || !(c0 > 0.0) {
        return Err(invalid("epsilon_inner needs m >= 1, mu > 0 and c0 > 0"));
    }
    let by_volume = ((mu + eta) * phi / m as f64).sqrt();
    let by_mass = 2.0 * (eta + alpha) * phi / c0;
    Ok(by_volume.max(by_mass))
}

/// Instrumentation for one sweep of a local solver.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRecord {
    /// Zero-based sweep index within this solve.
    pub k: usize,
    /// Total degree of the nodes pushed in the sweep.
    pub vol: u64,
    /// Active gradient ratio; for LocAPPR the sum of the per-push ratios.
    pub gamma: f64,
    /// Guaranteed factor: `1 − τγ` for LocGD, `Π(1 − τγ_i)` for LocAPPR.
    pub contraction: f64,
    pub grad_l1_before: f64,
    pub grad_l1_scaled: f64,
    pub pushes: u64,
    pub ops_cum: u64,
}

/// Receives each sweep record together with the current iterate.
pub trait SweepObserver {
    fn on_sweep(&mut self, rec: &SweepRecord, z: &SparseVector, grad: &SparseVector);
}

impl SweepObserver for () {
    fn on_sweep(&mut self, _: &SweepRecord, _: &SparseVector, _: &SparseVector) {}
}

impl<F: FnMut(&SweepRecord, &SparseVector, &SparseVector)> SweepObserver for F {
    fn on_sweep(&mut self, rec: &SweepRecord, z: &SparseVector, grad: &SparseVector) {
        self(rec, z, grad)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct InnerStats {
    pub sweeps: Vec<SweepRecord>,
    pub pushes: u64,
    pub ops: u64,
    /// `‖D^{1/2}∇h‖₁` at the start point.
    pub c0: f64,
    /// Same quantity on return, recomputed exactly.
    pub c_final: f64,
}

impl InnerStats {
    pub fn iterations(&self) -> usize {
        self.sweeps.len()
    }
}

#[derive(Debug, Clone)]
pub struct InnerSolution {
    pub z: SparseVector,
    pub grad: SparseVector,
    pub stats: InnerStats,
}

/// Which local operator to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum InnerSolver {
    LocGd,
    LocAppr,
}

impl InnerSolver {
    pub fn solve<O: SweepObserver>(
        self,
        g: &Graph,
        p: &ShiftedProblem,
        z0: SparseVector,
        grad0: SparseVector,
        eps_hat: f64,
        obs: &mut O,
    ) -> Result<InnerSolution> {
        match self {
            InnerSolver::LocGd => loc_gd(g, p, z0, grad0, eps_hat, obs),
            InnerSolver::LocAppr => loc_appr(g, p, z0, grad0, eps_hat, obs),
        }
    }
}

struct Engine<'a> {
    g: &'a Graph,
    p: &'a ShiftedProblem,
    z: SparseVector,
    grad: SparseVector,
    queue: VecDeque<NodeId>,
    in_queue: FxHashSet<NodeId>,
    norm: CompensatedSum,
    eps_hat: f64,
    ops: u64,
    pushes: u64,
}

impl<'a> Engine<'a> {
    fn new(
        g: &'a Graph,
        p: &'a ShiftedProblem,
        z: SparseVector,
        grad: SparseVector,
        eps_hat: f64,
    ) -> Result<Self> {
        if !(eps_hat > 0.0) {
            return Err(invalid(format!("eps_hat must be positive, got {eps_hat}")));
        }
        if !z.all_finite() || !grad.all_finite() {
            return Err(SolverError::Numerical("non-finite start point".into()));
        }
        let n = g.n();
        if let Some(bad) = z.support().chain(grad.support()).find(|&v| v as usize >= n) {
            return Err(invalid(format!("node {bad} out of range for n = {n}")));
        }
        let mut seeds: Vec<NodeId> = Vec::new();
        for (v, x) in grad.iter() {
            if x.abs() >= eps_hat * g.sqrt_degree(v) {
                seeds.push(v);
            }
        }
        seeds.sort_unstable();
        let norm = CompensatedSum::new(grad.scaled_l1(g));
        Ok(Self {
            g,
            p,
            z,
            grad,
            in_queue: seeds.iter().copied().collect(),
            queue: seeds.into(),
            norm,
            eps_hat,
            ops: 0,
            pushes: 0,
        })
    }

    #[inline]
    fn is_active(&self, v: NodeId) -> bool {
        self.grad.get(v).abs() >= self.eps_hat * self.g.sqrt_degree(v)
    }

    #[inline]
    fn enqueue_if_active(&mut self, v: NodeId) {
        if !self.in_queue.contains(&v) && self.is_active(v) {
            self.in_queue.insert(v);
            self.queue.push_back(v);
        }
    }

    #[inline]
    fn add_grad(&mut self, v: NodeId, delta: f64) {
        let (old, new) = self.grad.add(v, delta);
        self.norm
            .add(self.g.sqrt_degree(v) * (new.abs() - old.abs()));
    }

    /// Moves `z_u` against `δ` and resets `∇_u` to its post-push remainder.
    fn update_node(&mut self, u: NodeId, delta: f64) -> Result<()> {
        let (_, zu) = self.z.add(u, -self.p.step * delta);
        if !zu.is_finite() {
            return Err(SolverError::Numerical(format!(
                "non-finite estimate at node {u}"
            )));
        }
        let old = self.grad.get(u);
        let new = self.p.remainder() * delta;
        self.grad.set(u, new);
        self.norm
            .add(self.g.sqrt_degree(u) * (new.abs() - old.abs()));
        self.ops += u64::from(self.g.degree(u));
        self.pushes += 1;
        Ok(())
    }

    fn spread(&mut self, u: NodeId, delta: f64) {
        let share = self.p.step * self.p.off() * delta / self.g.sqrt_degree(u);
        for &v in self.g.neighbors(u) {
            self.add_grad(v, share / self.g.sqrt_degree(v));
            self.enqueue_if_active(v);
        }
    }

    fn norm(&self) -> f64 {
        self.norm.value().max(0.0)
    }

    fn finish(self, c0: f64, sweeps: Vec<SweepRecord>) -> Result<InnerSolution> {
        if !self.norm.value().is_finite() {
            return Err(SolverError::Numerical("gradient norm overflowed".into()));
        }
        let c_final = self.grad.scaled_l1(self.g);
        Ok(InnerSolution {
            stats: InnerStats {
                sweeps,
                pushes: self.pushes,
                ops: self.ops,
                c0,
                c_final,
            },
            z: self.z,
            grad: self.grad,
        })
    }
}

/// Node-by-node push solver.
///
/// Sweeps group the pushes made while draining the queue length observed
/// at the start of the sweep; sweeps without a push are not recorded.
pub fn loc_appr<O: SweepObserver>(
    g: &Graph,
    p: &ShiftedProblem,
    z0: SparseVector,
    grad0: SparseVector,
    eps_hat: f64,
    obs: &mut O,
) -> Result<InnerSolution> {
    let mut e = Engine::new(g, p, z0, grad0, eps_hat)?;
    let c0 = e.norm();
    let tau = p.tau();
    let mut sweeps = Vec::new();
    while !e.queue.is_empty() {
        let before = e.norm();
        let ops_start = e.ops;
        let pushes_start = e.pushes;
        let mut gamma = 0.0;
        let mut contraction = 1.0;
        for _ in 0..e.queue.len() {
            let u = e.queue.pop_front().expect("queue length checked");
            e.in_queue.remove(&u);
            if !e.is_active(u) {
                continue;
            }
            let delta = e.grad.get(u);
            let current = e.norm();
            let gi = if current > 0.0 {
                (g.sqrt_degree(u) * delta.abs() / current).min(1.0)
            } else {
                1.0
            };
            gamma += gi;
            contraction *= 1.0 - tau * gi;
            e.update_node(u, delta)?;
            e.spread(u, delta);
            e.enqueue_if_active(u);
        }
        if e.pushes == pushes_start {
            continue;
        }
        let rec = SweepRecord {
            k: sweeps.len(),
            vol: e.ops - ops_start,
            gamma,
            contraction,
            grad_l1_before: before,
            grad_l1_scaled: e.norm(),
            pushes: e.pushes - pushes_start,
            ops_cum: e.ops,
        };
        obs.on_sweep(&rec, &e.z, &e.grad);
        sweeps.push(rec);
    }
    e.finish(c0, sweeps)
}

/// Batch solver: every queued node is updated from the same snapshot of
/// the gradient, then all neighbor increments are applied.
pub fn loc_gd<O: SweepObserver>(
    g: &Graph,
    p: &ShiftedProblem,
    z0: SparseVector,
    grad0: SparseVector,
    eps_hat: f64,
    obs: &mut O,
) -> Result<InnerSolution> {
    let mut e = Engine::new(g, p, z0, grad0, eps_hat)?;
    let c0 = e.norm();
    let tau = p.tau();
    let mut sweeps = Vec::new();
    let mut batch: Vec<(NodeId, f64)> = Vec::new();
    while !e.queue.is_empty() {
        let before = e.norm();
        let ops_start = e.ops;
        batch.clear();
        while let Some(u) = e.queue.pop_front() {
            e.in_queue.remove(&u);
            batch.push((u, e.grad.get(u)));
        }
        let mass: f64 = batch.iter().map(|&(u, d)| g.sqrt_degree(u) * d.abs()).sum();
        let gamma = if before > 0.0 {
            (mass / before).min(1.0)
        } else {
            1.0
        };
        for &(u, delta) in &batch {
            e.update_node(u, delta)?;
        }
        for &(u, delta) in &batch {
            e.spread(u, delta);
        }
        if !p.cancels_diagonal() {
            for &(u, _) in &batch {
                e.enqueue_if_active(u);
            }
        }
        let rec = SweepRecord {
            k: sweeps.len(),
            vol: e.ops - ops_start,
            gamma,
            contraction: 1.0 - tau * gamma,
            grad_l1_before: before,
            grad_l1_scaled: e.norm(),
            pushes: batch.len() as u64,
            ops_cum: e.ops,
        };
        obs.on_sweep(&rec, &e.z, &e.grad);
        sweeps.push(rec);
    }
    e.finish(c0, sweeps)
}
