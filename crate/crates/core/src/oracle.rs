//! Reference PPR vectors and error metrics.
//!
//! Two independent routes: a dense LU solve for small graphs and the
//! lazy-walk fixed point `π ← α e_s + (1−α) W π` with `W = (I + AD⁻¹)/2`
//! for anything larger. The dense helpers for shifted problems build their
//! matrices straight from the adjacency rows and share no code with the
//! push solvers.

use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, Result, SolverError};
use crate::graph::{Graph, NodeId};
use crate::local_solver::ShiftedProblem;
use crate::sparse::SparseVector;

pub const DEFAULT_DENSE_CAP: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleMethod {
    DenseLu,
    FixedPoint,
}

#[derive(Debug, Clone)]
pub struct OracleResult {
    pub pi: Vec<f64>,
    pub method: OracleMethod,
    /// Upper bound on `‖e_s − Π_α⁻¹ π‖₁`, which also bounds `‖π − π_exact‖₁`.
    pub certified_residual: f64,
    pub iterations: usize,
}

fn check_alpha_source(g: &Graph, alpha: f64, s: NodeId) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(invalid(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    if s as usize >= g.n() {
        return Err(invalid(format!(
            "source {s} out of range for n = {}",
            g.n()
        )));
    }
    Ok(())
}

/// `W π` with `W = (I + AD⁻¹)/2`.
fn lazy_walk(g: &Graph, pi: &[f64], out: &mut [f64]) {
    for (v, o) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for &u in g.neighbors(v as NodeId) {
            acc += pi[u as usize] / f64::from(g.degree(u));
        }
        *o = 0.5 * (pi[v] + acc);
    }
}

/// `‖e_s − Π_α⁻¹ π‖₁` where `Π_α⁻¹ = (I − (1−α)W)/α`.
pub fn ppr_residual_l1(g: &Graph, alpha: f64, s: NodeId, pi: &[f64]) -> f64 {
    let mut w = vec![0.0; g.n()];
    lazy_walk(g, pi, &mut w);
    let mut r = 0.0;
    for v in 0..g.n() {
        let applied = (pi[v] - (1.0 - alpha) * w[v]) / alpha;
        let target = if v == s as usize { 1.0 } else { 0.0 };
        r += (target - applied).abs();
    }
    r
}

/// Direct LU solve of `((1+α)/2 I − (1−α)/2 AD⁻¹) π = α e_s`.
pub fn dense_solve_ppr(g: &Graph, alpha: f64, s: NodeId, cap: usize) -> Result<OracleResult> {
    check_alpha_source(g, alpha, s)?;
    let n = g.n();
    if n > cap {
        return Err(SolverError::TooLarge { n, cap });
    }
    let mut m = DMatrix::<f64>::identity(n, n) * ((1.0 + alpha) / 2.0);
    for u in 0..n {
        let du = f64::from(g.degree(u as NodeId));
        for &v in g.neighbors(u as NodeId) {
            m[(v as usize, u)] -= (1.0 - alpha) / 2.0 / du;
        }
    }
    let mut rhs = DVector::<f64>::zeros(n);
    rhs[s as usize] = alpha;
    let pi = m
        .lu()
        .solve(&rhs)
        .ok_or_else(|| SolverError::Numerical("singular PPR matrix".into()))?;
    let pi: Vec<f64> = pi.iter().copied().collect();
    let certified_residual = ppr_residual_l1(g, alpha, s, &pi);
    Ok(OracleResult {
        pi,
        method: OracleMethod::DenseLu,
        certified_residual,
        iterations: 0,
    })
}

/// Fixed-point iteration from `π⁰ = α e_s`.
///
/// For iterate `πᵏ` the residual `e_s − Π_α⁻¹ πᵏ` equals
/// `(πᵏ⁺¹ − πᵏ)/α` exactly, so the returned iterate carries a certified
/// residual without an extra pass.
pub fn fixed_point_ppr(g: &Graph, alpha: f64, s: NodeId, tol_l1: f64) -> Result<OracleResult> {
    check_alpha_source(g, alpha, s)?;
    if !(tol_l1 > 0.0) {
        return Err(invalid(format!("tolerance must be positive, got {tol_l1}")));
    }
    let n = g.n();
    let cap = (((1.0 / tol_l1).ln().max(1.0) / alpha).ceil() as usize) * 4;
    let mut pi = vec![0.0; n];
    pi[s as usize] = alpha;
    let mut next = vec![0.0; n];
    for k in 0..=cap {
        lazy_walk(g, &pi, &mut next);
        let mut diff = 0.0;
        for v in 0..n {
            let mut x = (1.0 - alpha) * next[v];
            if v == s as usize {
                x += alpha;
            }
            diff += (x - pi[v]).abs();
            next[v] = x;
        }
        let residual = diff / alpha;
        if residual <= tol_l1 {
            return Ok(OracleResult {
                pi,
                method: OracleMethod::FixedPoint,
                certified_residual: residual,
                iterations: k,
            });
        }
        std::mem::swap(&mut pi, &mut next);
    }
    Err(SolverError::Convergence(format!(
        "fixed point did not reach residual {tol_l1} within {cap} iterations"
    )))
}

/// `max_v |π̂_v − π_v| / d_v`.
pub fn error_inf_deg(g: &Graph, pi_hat: &SparseVector, pi_ref: &[f64]) -> f64 {
    let mut err = 0.0f64;
    for (v, &p) in pi_ref.iter().enumerate() {
        let d = f64::from(g.degree(v as NodeId));
        err = err.max((pi_hat.get(v as NodeId) - p).abs() / d);
    }
    err
}

/// Evaluates [`error_inf_deg`] in time proportional to the estimate's
/// support, for repeated measurements against one reference.
#[derive(Debug, Clone)]
pub struct ErrorEvaluator {
    pi: Vec<f64>,
    /// Nodes by decreasing `π_v / d_v`.
    order: Vec<NodeId>,
}

impl ErrorEvaluator {
    pub fn new(g: &Graph, pi: Vec<f64>) -> Self {
        let mut order: Vec<NodeId> = (0..g.n() as NodeId).collect();
        let key = |v: NodeId| pi[v as usize].abs() / f64::from(g.degree(v));
        order.sort_by(|&a, &b| key(b).total_cmp(&key(a)).then(a.cmp(&b)));
        Self { pi, order }
    }

    pub fn reference(&self) -> &[f64] {
        &self.pi
    }

    /// Error of `π̂ = D^{1/2} x`.
    pub fn eval_x(&self, g: &Graph, x: &SparseVector) -> f64 {
        let mut err = 0.0f64;
        for (v, xv) in x.iter() {
            let d = f64::from(g.degree(v));
            err = err.max((g.sqrt_degree(v) * xv - self.pi[v as usize]).abs() / d);
        }
        if let Some(&v) = self.order.iter().find(|&&v| x.get(v) == 0.0) {
            err = err.max(self.pi[v as usize].abs() / f64::from(g.degree(v)));
        }
        err
    }

    pub fn eval_pi(&self, g: &Graph, pi_hat: &SparseVector) -> f64 {
        let mut err = 0.0f64;
        for (v, p) in pi_hat.iter() {
            err = err.max((p - self.pi[v as usize]).abs() / f64::from(g.degree(v)));
        }
        if let Some(&v) = self.order.iter().find(|&&v| pi_hat.get(v) == 0.0) {
            err = err.max(self.pi[v as usize].abs() / f64::from(g.degree(v)));
        }
        err
    }
}

/// Dense `Q̃ = ((1+α+2η)/2) I − ((1−α)/2) D^{-1/2} A D^{-1/2}`.
pub fn dense_q_tilde(g: &Graph, alpha: f64, eta: f64) -> DMatrix<f64> {
    let n = g.n();
    let mut q = DMatrix::<f64>::identity(n, n) * ((1.0 + alpha + 2.0 * eta) / 2.0);
    for (u, v) in g.edges() {
        let w = (1.0 - alpha) / 2.0 / (f64::from(g.degree(u)) * f64::from(g.degree(v))).sqrt();
        q[(u as usize, v as usize)] -= w;
        q[(v as usize, u as usize)] -= w;
    }
    q
}

/// Exact minimizer of a shifted problem by Cholesky factorization.
pub fn dense_shifted_solve(g: &Graph, p: &ShiftedProblem) -> Result<Vec<f64>> {
    let q = dense_q_tilde(g, p.alpha, p.eta);
    let b = DVector::from_vec(p.b_eff.to_dense(g.n()));
    let chol = q
        .cholesky()
        .ok_or_else(|| SolverError::Numerical("shifted matrix not positive definite".into()))?;
    Ok(chol.solve(&b).iter().copied().collect())
}

/// `h(z) − h*` as `½ (z − z*)ᵀ Q̃ (z − z*)`, which avoids cancelling two
/// nearly equal objective values.
pub fn dense_objective_gap(g: &Graph, p: &ShiftedProblem, z: &SparseVector) -> Result<f64> {
    let q = dense_q_tilde(g, p.alpha, p.eta);
    let star = dense_shifted_solve(g, p)?;
    let d = DVector::from_vec(z.to_dense(g.n())) - DVector::from_vec(star);
    Ok(0.5 * d.dot(&(&q * &d)))
}

/// Dense `∇f(x) = Q x − α D^{-1/2} b`.
pub fn dense_f_gradient(g: &Graph, alpha: f64, b: &SparseVector, x: &SparseVector) -> Vec<f64> {
    let q = dense_q_tilde(g, alpha, 0.0);
    let xd = DVector::from_vec(x.to_dense(g.n()));
    let mut out: Vec<f64> = (&q * &xd).iter().copied().collect();
    for (v, bv) in b.iter() {
        out[v as usize] -= alpha * bv / g.sqrt_degree(v);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::generators;

    fn k2() -> Graph {
        Graph::from_edges([(0, 1)]).unwrap()
    }

    #[test]
    fn dense_k2_closed_form() {
        let r = dense_solve_ppr(&k2(), 0.2, 0, DEFAULT_DENSE_CAP).unwrap();
        assert!((r.pi[0] - 0.6).abs() < 1e-15 && (r.pi[1] - 0.4).abs() < 1e-15);
        assert!(r.certified_residual < 1e-14);
    }

    #[test]
    fn dense_sums_to_one_and_is_positive() {
        for g in [
            generators::grid(6, 7),
            generators::barabasi_albert(200, 3, 1),
        ] {
            let r = dense_solve_ppr(&g, 0.05, 3, DEFAULT_DENSE_CAP).unwrap();
            let sum: f64 = r.pi.iter().sum();
            assert!((sum - 1.0).abs() < 1e-12);
            assert!(r.pi.iter().all(|&p| p > 0.0));
        }
    }

    #[test]
    fn dense_k3_symmetry() {
        let r = dense_solve_ppr(&generators::complete(3), 0.1, 0, DEFAULT_DENSE_CAP).unwrap();
        assert!(r.pi[0] > r.pi[1]);
        assert!((r.pi[1] - r.pi[2]).abs() < 1e-15);
    }

    #[test]
    fn dense_respects_cap() {
        let g = generators::path(10);
        assert!(matches!(
            dense_solve_ppr(&g, 0.1, 0, 5),
            Err(SolverError::TooLarge { n: 10, cap: 5 })
        ));
    }

    #[test]
    fn fixed_point_k2() {
        let r = fixed_point_ppr(&k2(), 0.2, 0, 1e-12).unwrap();
        assert!((r.pi[0] - 0.6).abs() < 1e-12 && (r.pi[1] - 0.4).abs() < 1e-12);
        assert_eq!(r.method, OracleMethod::FixedPoint);
    }

    #[test]
    fn fixed_point_certificate_is_exact() {
        let g = generators::path(10);
        let r = fixed_point_ppr(&g, 0.1, 0, 1e-3).unwrap();
        assert!(r.certified_residual <= 1e-3);
        let direct = ppr_residual_l1(&g, 0.1, 0, &r.pi);
        assert!((direct - r.certified_residual).abs() < 1e-12);
    }

    #[test]
    fn oracles_agree() {
        for (g, s) in [
            (generators::grid(8, 8), 9),
            (generators::barabasi_albert(300, 2, 5), 17),
            (generators::random_connected(40, 0.1, 3), 0),
        ] {
            for alpha in [0.01, 0.2] {
                let a = dense_solve_ppr(&g, alpha, s, DEFAULT_DENSE_CAP).unwrap();
                let b = fixed_point_ppr(&g, alpha, s, 1e-12).unwrap();
                let diff =
                    a.pi.iter()
                        .zip(&b.pi)
                        .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
                assert!(diff <= 1e-10, "diff {diff}");
            }
        }
    }

    #[test]
    fn fixed_point_reports_cap() {
        let g = generators::path(4);
        assert!(fixed_point_ppr(&g, 0.1, 0, 0.0).is_err());
        assert!(fixed_point_ppr(&g, 0.1, 9, 1e-3).is_err());
    }

    #[test]
    fn error_metric_examples() {
        let g = k2();
        let hat = SparseVector::from_dense(&[0.6, 0.41]);
        assert!((error_inf_deg(&g, &hat, &[0.6, 0.4]) - 0.01).abs() < 1e-15);
        let exact = SparseVector::from_dense(&[0.6, 0.4]);
        assert_eq!(error_inf_deg(&g, &exact, &[0.6, 0.4]), 0.0);

        let star = Graph::from_edges([(0, 1), (0, 2), (0, 3), (0, 4)]).unwrap();
        let reference = [0.4, 0.15, 0.15, 0.15, 0.15];
        let hat = SparseVector::from_dense(&[0.44, 0.15, 0.15, 0.15, 0.15]);
        assert!((error_inf_deg(&star, &hat, &reference) - 0.01).abs() < 1e-15);
    }

    #[test]
    fn evaluator_matches_full_scan() {
        let g = generators::barabasi_albert(150, 2, 9);
        let pi = fixed_point_ppr(&g, 0.1, 4, 1e-10).unwrap().pi;
        let ev = ErrorEvaluator::new(&g, pi.clone());
        let mut x = SparseVector::new();
        for v in [4u32, 0, 1, 2, 30] {
            x.set(v, pi[v as usize] / g.sqrt_degree(v) * 0.9);
        }
        let pi_hat = x.scale_by_sqrt_degree(&g);
        let full = error_inf_deg(&g, &pi_hat, &pi);
        assert!((ev.eval_x(&g, &x) - full).abs() < 1e-16);
        assert!((ev.eval_pi(&g, &pi_hat) - full).abs() < 1e-16);
    }

    #[test]
    fn shifted_dense_helpers_on_k2() {
        let g = k2();
        let p = ShiftedProblem::new(0.2, 0.6, SparseVector::unit(0, 0.2)).unwrap();
        let q = dense_q_tilde(&g, 0.2, 0.6);
        assert!((q[(0, 0)] - 1.2).abs() < 1e-15 && (q[(0, 1)] + 0.4).abs() < 1e-15);
        let star = dense_shifted_solve(&g, &p).unwrap();
        // [[1.2, -0.4], [-0.4, 1.2]]⁻¹ (0.2, 0) = (0.1875, 0.0625)
        assert!((star[0] - 0.1875).abs() < 1e-15 && (star[1] - 0.0625).abs() < 1e-15);
        let at_star = SparseVector::from_dense(&star);
        assert!(dense_objective_gap(&g, &p, &at_star).unwrap() < 1e-30);
        let gap = dense_objective_gap(&g, &p, &SparseVector::new()).unwrap();
        assert!((gap + p.objective(&g, &at_star)).abs() < 1e-15);
    }
}
