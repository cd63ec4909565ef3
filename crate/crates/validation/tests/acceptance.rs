//! Acceptance criteria 1-10. Runs as a plain binary and prints one line per
//! criterion; exits nonzero if any criterion fails.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::time::Instant;

use locppr::aesp::{aesp_ppr, momentum_coefficient, AespOptions, OuterSchedule};
use locppr::graph::generators;
use locppr::local_solver::{
    compute_gradient, epsilon_inner, InnerSolver, ShiftedProblem, SweepRecord,
};
use locppr::oracle::{
    dense_objective_gap, dense_shifted_solve, dense_solve_ppr, error_inf_deg, fixed_point_ppr,
    DEFAULT_DENSE_CAP,
};
use locppr::trace::{check_invariants, RunMeta, TraceRecorder};
use locppr::{run_method, Graph, Method, NodeId, SolveOptions, SparseVector};
use locppr_cli::commands::{bench, BenchPlan};
use locppr_cli::input::{EpsSpec, GraphInput, SourceSpec};
use locppr_cli::report::strip_wall_ms;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn k2() -> Graph {
    Graph::from_edges([(0, 1)]).unwrap()
}

fn c1_closed_form() -> Outcome {
    let g = k2();
    let exact = [0.6, 0.4];
    let oracle = dense_solve_ppr(&g, 0.2, 0, DEFAULT_DENSE_CAP).unwrap().pi;
    let oracle_err = oracle
        .iter()
        .zip(exact)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let mut best = f64::INFINITY;
    let mut err = f64::INFINITY;
    for _ in 0..20 {
        let start = Instant::now();
        let (pi, _) = aesp_ppr(&g, 1e-4, 0.2, 0, AespOptions::default(), &mut ()).unwrap();
        best = best.min(start.elapsed().as_secs_f64());
        err = error_inf_deg(&g, &pi, &exact);
    }
    let pass = err <= 1e-4 && oracle_err <= 1e-12 && best < 1e-3;
    outcome(
        pass,
        format!(
            "err_inf {err:.3e}, oracle error {oracle_err:.1e}, runtime {:.1} us",
            best * 1e6
        ),
    )
}

struct SuiteRun {
    graph: &'static str,
    method: Method,
    alpha: f64,
    eps: f64,
    err: f64,
    mass: f64,
    m: usize,
    drift: f64,
    problems: Vec<String>,
    phis: Vec<f64>,
    floor: Option<f64>,
}

fn suite_graphs() -> Vec<(&'static str, Graph)> {
    vec![
        ("K2", k2()),
        ("K3", generators::complete(3)),
        ("path-10", generators::path(10)),
        ("grid-32x32", generators::grid(32, 32)),
        ("ba-1000-3-7", generators::barabasi_albert(1000, 3, 7)),
    ]
}

const SUITE_ALPHAS: [f64; 6] = [0.01, 0.05, 0.1, 0.2, 0.3, 0.49];
const SUITE_EPS: [f64; 2] = [1e-4, 1e-6];

fn run_suite() -> Vec<SuiteRun> {
    let mut runs = Vec::new();
    for (name, g) in suite_graphs() {
        let mut sources = vec![0 as NodeId, (g.n() / 2) as NodeId];
        sources.dedup();
        for &alpha in &SUITE_ALPHAS {
            for &eps in &SUITE_EPS {
                for &s in &sources {
                    let reference = fixed_point_ppr(&g, alpha, s, eps / 100.0).unwrap().pi;
                    for method in Method::ALL {
                        let opts = SolveOptions {
                            verify: true,
                            ..Default::default()
                        };
                        let mut rec = TraceRecorder::new(&g, RunMeta::default());
                        let r = run_method(&g, method, alpha, eps, s, &opts, &mut rec).unwrap();
                        let trace = rec.into_trace();
                        let floor = method
                            .is_accelerated()
                            .then(|| OuterSchedule::aesp_ppr(alpha, eps).unwrap().phi_floor());
                        runs.push(SuiteRun {
                            graph: name,
                            method,
                            alpha,
                            eps,
                            err: error_inf_deg(&g, &r.pi_hat, &reference),
                            mass: r.pi_hat.l1(),
                            m: g.m(),
                            drift: r.max_grad_drift.unwrap_or(0.0),
                            problems: check_invariants(&trace, g.m(), 1e-10),
                            phis: trace.outer.iter().filter_map(|o| o.phi_t).collect(),
                            floor,
                        });
                    }
                }
            }
        }
    }
    runs
}

fn c2_error_guarantee(runs: &[SuiteRun], elapsed: f64) -> Outcome {
    let bad: Vec<_> = runs
        .iter()
        .filter(|r| r.err.is_nan() || r.err > r.eps)
        .collect();
    let worst = runs.iter().map(|r| r.err / r.eps).fold(0.0, f64::max);
    let mut detail = format!(
        "{} runs, {} over epsilon, worst err/eps {worst:.3}, {elapsed:.1} s",
        runs.len(),
        bad.len()
    );
    if let Some(b) = bad.first() {
        let _ = write!(
            detail,
            "; first: {} {} a={} e={} err={:.3e}",
            b.graph, b.method, b.alpha, b.eps, b.err
        );
    }
    outcome(bad.is_empty() && elapsed < 120.0, detail)
}

fn c3_contraction(runs: &[SuiteRun]) -> Outcome {
    let contraction_issues: Vec<&String> = runs
        .iter()
        .flat_map(|r| r.problems.iter())
        .filter(|p| p.contains("contraction") || p.contains("increased"))
        .collect();
    let tau_err = SUITE_ALPHAS
        .iter()
        .map(|&a| {
            let p = ShiftedProblem::new(a, 1.0 - 2.0 * a, SparseVector::new()).unwrap();
            (p.tau() - 2.0 / 3.0).abs()
        })
        .fold(0.0, f64::max);
    let mut detail = format!(
        "{} violations, max |tau - 2/3| = {tau_err:.1e}",
        contraction_issues.len()
    );
    if let Some(p) = contraction_issues.first() {
        let _ = write!(detail, "; first: {p}");
    }
    outcome(contraction_issues.is_empty() && tau_err <= 1e-15, detail)
}

/// Random connected graphs with `n <= 30` plus a shifted right-hand side.
fn small_cases() -> Vec<(Graph, f64, NodeId, SparseVector)> {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    (0..20)
        .map(|_| {
            let n = rng.random_range(2..=30);
            let p = rng.random_range(0.1..0.5);
            let g = generators::random_connected(n, p, rng.random());
            let alpha = rng.random_range(0.01..0.49);
            let s = rng.random_range(0..n) as NodeId;
            let mut y = SparseVector::new();
            for _ in 0..rng.random_range(0..5) {
                y.add(
                    rng.random_range(0..n) as NodeId,
                    rng.random_range(-0.5..0.5),
                );
            }
            (g, alpha, s, y)
        })
        .collect()
}

fn shifted(g: &Graph, alpha: f64, s: NodeId, y: &SparseVector) -> ShiftedProblem {
    let eta = 1.0 - 2.0 * alpha;
    let mut b = SparseVector::unit(s, alpha / g.sqrt_degree(s));
    b.axpy(eta, y);
    ShiftedProblem::new(alpha, eta, b).unwrap()
}

fn c4_dense_equivalence() -> Outcome {
    let mut worst = 0.0f64;
    for (g, alpha, s, y) in small_cases() {
        let p = shifted(&g, alpha, s, &y);
        let z_star = SparseVector::from_dense(&dense_shifted_solve(&g, &p).unwrap());
        for solver in [InnerSolver::LocGd, InnerSolver::LocAppr] {
            let mut grad0 = SparseVector::new();
            grad0.axpy(-1.0, &p.b_eff);
            let sol = solver
                .solve(&g, &p, SparseVector::new(), grad0, 1e-14, &mut ())
                .unwrap();
            worst = worst.max(sol.z.linf_distance(&z_star));
        }
    }
    outcome(
        worst <= 1e-8,
        format!("40 solves, max linf gap {worst:.2e}"),
    )
}

fn c5_certificate() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let (mut checks, mut lemma_fail, mut product_fail) = (0, 0, 0);
    let mut worst_ratio = 0.0f64;
    for (g, alpha, s, _) in small_cases() {
        for _ in 0..10 {
            let phi = 10f64.powf(rng.random_range(-10.0..-1.0));
            let mut y = SparseVector::new();
            for _ in 0..rng.random_range(0..6) {
                y.add(
                    rng.random_range(0..g.n()) as NodeId,
                    rng.random_range(-0.5..0.5),
                );
            }
            let p = shifted(&g, alpha, s, &y);
            let grad0 = compute_gradient(&g, &p, &y);
            let c0 = grad0.scaled_l1(&g);
            if c0 == 0.0 {
                continue;
            }
            let eps = epsilon_inner(phi, g.m(), alpha, p.eta, alpha, c0).unwrap();
            for solver in [InnerSolver::LocGd, InnerSolver::LocAppr] {
                let mut product = 1.0;
                let mut obs = |r: &SweepRecord, _: &SparseVector, _: &SparseVector| {
                    product *= r.contraction * r.contraction
                };
                let sol = solver
                    .solve(&g, &p, y.clone(), grad0.clone(), eps, &mut obs)
                    .unwrap();
                let gap = dense_objective_gap(&g, &p, &sol.z).unwrap();
                checks += 1;
                worst_ratio = worst_ratio.max(gap / phi);
                if gap > phi * (1.0 + 1e-9) + 1e-15 {
                    lemma_fail += 1;
                }
                let bound = c0 * c0 / (1.0 - alpha) * product;
                if gap > bound * (1.0 + 1e-9) + 1e-15 {
                    product_fail += 1;
                }
            }
        }
    }
    outcome(
        lemma_fail == 0 && product_fail == 0,
        format!(
            "{checks} solves, {lemma_fail} above phi, {product_fail} above product bound, max gap/phi {worst_ratio:.3e}"
        ),
    )
}

fn c6_schedule(runs: &[SuiteRun]) -> Outcome {
    let s = OuterSchedule::aesp_ppr(0.1, 1e-6).unwrap();
    let phi1 = s.phi(1);
    let closed = 1.1 / 18.0 * (1.0 - 0.9 * (0.1f64 / 0.9).sqrt());
    let phi_ok = (phi1 - closed).abs() <= 1e-9 && (phi1 - 0.0427778).abs() <= 5e-8;
    let beta = momentum_coefficient(0.01, 0.98);
    let beta_ok = (beta - 0.817349).abs() <= 1e-6;
    let floor = s.phi_floor();
    let floor_breaks: Vec<usize> = (1..=s.t_max)
        .filter(|&t| s.phi(t) < floor * (1.0 - 1e-12))
        .collect();
    let emitted_breaks = runs
        .iter()
        .filter_map(|r| r.floor.map(|f| (f, &r.phis)))
        .filter(|(f, phis)| phis.iter().any(|p| *p < f * (1.0 - 1e-12)))
        .count();
    let pass = s.t_max == 128 && phi_ok && beta_ok && floor_breaks.is_empty();
    let mut detail = format!(
        "T_max {}, phi_1 {phi1:.10}, beta {beta:.7}, floor {floor:.3e}: ",
        s.t_max
    );
    if floor_breaks.is_empty() {
        detail.push_str("floor holds for all t <= T_max");
    } else {
        let _ = write!(
            detail,
            "floor fails for t in {}..={} (phi_T_max/floor = {:.2e}; holds through t = {}); \
             floor holds on every emitted phi_t of the suite runs ({emitted_breaks} breaks)",
            floor_breaks[0],
            floor_breaks[floor_breaks.len() - 1],
            s.phi(s.t_max) / floor,
            s.t_minimal()
        );
    }
    outcome(pass, detail)
}

fn mean_ops(g: &Graph, method: Method, alpha: f64, eps: f64, sources: &[NodeId]) -> f64 {
    let opts = SolveOptions::default();
    let total: u64 = sources
        .iter()
        .map(|&s| {
            run_method(g, method, alpha, eps, s, &opts, &mut ())
                .unwrap()
                .ops_total
        })
        .sum();
    total as f64 / sources.len() as f64
}

fn com_dblp_path() -> Option<PathBuf> {
    if let Ok(p) = std::env::var("LOCPPR_COM_DBLP") {
        return Some(PathBuf::from(p));
    }
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..");
    ["data/com-dblp.ungraph.txt", "data/com-dblp.txt"]
        .iter()
        .map(|f| root.join(f))
        .find(|p| p.exists())
}

fn c7_acceleration() -> Outcome {
    let start = Instant::now();
    if let Some(path) = com_dblp_path() {
        let input = match GraphInput::load(path.to_str().unwrap_or_default()) {
            Ok(i) => i,
            Err(e) => return outcome(false, format!("cannot load {}: {e}", path.display())),
        };
        let sources = SourceSpec::Random(5).resolve(&input, 1).unwrap();
        let appr = mean_ops(&input.graph, Method::Appr, 0.1, 1e-6, &sources);
        let aesp = mean_ops(&input.graph, Method::AespLocAppr, 0.1, 1e-6, &sources);
        let ratio = aesp / appr;
        let secs = start.elapsed().as_secs_f64();
        return outcome(
            ratio <= 0.5 && secs < 300.0,
            format!(
                "com-dblp n={} m={}: appr {appr:.3e}, aesp-locappr {aesp:.3e}, ratio {ratio:.3}, {secs:.1} s",
                input.graph.n(),
                input.graph.m()
            ),
        );
    }
    let input = GraphInput::load("gen:ba:300000:3:7").unwrap();
    let sources = SourceSpec::Random(5).resolve(&input, 1).unwrap();
    let mut pass = true;
    let mut detail = format!(
        "com-dblp not found; BA n={} m={}",
        input.graph.n(),
        input.graph.m()
    );
    for alpha in [0.05, 0.01] {
        let appr = mean_ops(&input.graph, Method::Appr, alpha, 1e-6, &sources);
        let aesp = mean_ops(&input.graph, Method::AespLocAppr, alpha, 1e-6, &sources);
        let ratio = aesp / appr;
        pass &= ratio < 1.0;
        let _ = write!(detail, "; alpha {alpha}: ratio {ratio:.3}");
    }
    let secs = start.elapsed().as_secs_f64();
    let _ = write!(detail, "; {secs:.1} s");
    outcome(pass && secs < 300.0, detail)
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

fn c8_speedup_trend() -> Outcome {
    let input = GraphInput::load("gen:ba:1000:3:7").unwrap();
    let g = &input.graph;
    let eps = EpsSpec::PerNode(0.1).resolve(g.n());
    let sources = SourceSpec::Random(50).resolve(&input, 1).unwrap();
    let opts = SolveOptions::default();
    let speedup = |alpha: f64| {
        median(
            sources
                .iter()
                .map(|&s| {
                    let base =
                        run_method(g, Method::LocAppr, alpha, eps, s, &opts, &mut ()).unwrap();
                    let acc =
                        run_method(g, Method::AespLocAppr, alpha, eps, s, &opts, &mut ()).unwrap();
                    base.ops_total as f64 / acc.ops_total as f64
                })
                .collect(),
        )
    };
    let low = speedup(0.001);
    let high = speedup(0.1);
    outcome(
        low > high,
        format!("eps {eps:e}, median speedup {low:.3} at alpha 0.001 vs {high:.3} at alpha 0.1"),
    )
}

fn c9_trace_integrity(runs: &[SuiteRun]) -> Outcome {
    let mut issues = Vec::new();
    for r in runs {
        let tag = format!("{} {} a={} e={}", r.graph, r.method, r.alpha, r.eps);
        for p in &r.problems {
            issues.push(format!("{tag}: {p}"));
        }
        let slack = 2.0 * r.m as f64 * r.eps;
        if !(r.mass >= 1.0 - slack && r.mass <= 1.0 + slack) {
            issues.push(format!("{tag}: mass {}", r.mass));
        }
        if r.drift.is_nan() || r.drift > 1e-9 {
            issues.push(format!("{tag}: gradient drift {:.3e}", r.drift));
        }
    }
    let drift = runs.iter().map(|r| r.drift).fold(0.0, f64::max);
    let mut detail = format!(
        "{} runs, {} issues, max drift {drift:.1e}",
        runs.len(),
        issues.len()
    );
    if let Some(i) = issues.first() {
        let _ = write!(detail, "; first: {i}");
    }
    outcome(issues.is_empty(), detail)
}

fn c10_determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let plan = |out: PathBuf| BenchPlan {
        graphs: vec!["gen:ba:500:3:7".into(), "gen:grid:10:10".into()],
        methods: Method::ALL.to_vec(),
        alphas: vec![0.05, 0.2],
        epsilons: vec![EpsSpec::Absolute(1e-5), EpsSpec::PerNode(0.1)],
        sources: SourceSpec::Random(4),
        seed: 1,
        out_dir: out,
        oracle: true,
        init: Default::default(),
        eta: None,
        adaptive_eps: false,
        t_cap: None,
    };
    let a = bench(&plan(dir.path().join("a"))).unwrap();
    let b = bench(&plan(dir.path().join("b"))).unwrap();
    let ta = std::fs::read_to_string(&a.results_path).unwrap();
    let tb = std::fs::read_to_string(&b.results_path).unwrap();
    let same_results = strip_wall_ms(&ta) == strip_wall_ms(&tb);
    let mut traces_differ = 0;
    for entry in std::fs::read_dir(dir.path().join("a/runs")).unwrap() {
        let run = entry.unwrap().path();
        let other = dir.path().join("b/runs").join(run.file_name().unwrap());
        for f in ["trace.csv", "trace.outer.csv"] {
            if std::fs::read(run.join(f)).ok() != std::fs::read(other.join(f)).ok() {
                traces_differ += 1;
            }
        }
    }
    outcome(
        same_results && traces_differ == 0 && a.failures.is_empty(),
        format!(
            "{} rows, results.csv identical modulo wall_ms: {same_results}, differing trace files: {traces_differ}",
            a.rows.len()
        ),
    )
}

fn main() {
    let mut results: Vec<(u32, &str, Outcome)> = Vec::new();
    let mut report = |n: u32, name: &'static str, o: Outcome| {
        println!(
            "criterion {n:>2} [{}] {name}: {}",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
        results.push((n, name, o));
    };

    report(1, "closed-form correctness", c1_closed_form());
    let start = Instant::now();
    let runs = run_suite();
    let suite_secs = start.elapsed().as_secs_f64();
    report(
        2,
        "error guarantee suite",
        c2_error_guarantee(&runs, suite_secs),
    );
    report(3, "contraction invariant", c3_contraction(&runs));
    report(4, "dense equivalence", c4_dense_equivalence());
    report(5, "inner certificate", c5_certificate());
    report(6, "schedule formulas", c6_schedule(&runs));
    report(7, "acceleration at desk scale", c7_acceleration());
    report(8, "speedup trend in alpha", c8_speedup_trend());
    report(9, "trace integrity", c9_trace_integrity(&runs));
    report(10, "bench determinism", c10_determinism());

    let failed: Vec<u32> = results.iter().filter(|r| !r.2.pass).map(|r| r.0).collect();
    println!(
        "acceptance: {} of {} criteria pass",
        results.len() - failed.len(),
        results.len()
    );
    if !failed.is_empty() {
        println!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
