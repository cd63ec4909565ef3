//! Deterministic synthetic graphs used by tests, benchmarks and examples.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::Graph;

fn build(edges: Vec<(u64, u64)>) -> Graph {
    Graph::from_edges(edges).expect("generator produced a degenerate graph")
}

/// Complete graph `K_n`, `n >= 2`.
pub fn complete(n: usize) -> Graph {
    assert!(n >= 2);
    let mut edges = Vec::with_capacity(n * (n - 1) / 2);
    for u in 0..n as u64 {
        for v in u + 1..n as u64 {
            edges.push((u, v));
        }
    }
    build(edges)
}

/// Path `0 - 1 - ... - (n-1)`, `n >= 2`.
pub fn path(n: usize) -> Graph {
    assert!(n >= 2);
    build((1..n as u64).map(|v| (v - 1, v)).collect())
}

/// `rows x cols` 4-neighbor lattice; node `r * cols + c`.
pub fn grid(rows: usize, cols: usize) -> Graph {
    assert!(rows * cols >= 2);
    let id = |r: usize, c: usize| (r * cols + c) as u64;
    let mut edges = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            if c + 1 < cols {
                edges.push((id(r, c), id(r, c + 1)));
            }
            if r + 1 < rows {
                edges.push((id(r, c), id(r + 1, c)));
            }
        }
    }
    build(edges)
}

/// Barabási–Albert preferential attachment.
///
/// Starts from a star on `m0 + 1` nodes; every later node attaches to `m0`
/// distinct existing nodes drawn proportionally to degree. The result has
/// `m0 * (n - m0)` edges.
pub fn barabasi_albert(n: usize, m0: usize, seed: u64) -> Graph {
    assert!(m0 >= 1 && n > m0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges: Vec<(u64, u64)> = Vec::with_capacity(m0 * (n - m0));
    // every endpoint occurrence, so uniform sampling here is degree-biased
    let mut endpoints: Vec<u64> = Vec::with_capacity(2 * m0 * (n - m0));
    for v in 1..=m0 as u64 {
        edges.push((0, v));
        endpoints.extend([0, v]);
    }
    let mut targets: Vec<u64> = Vec::with_capacity(m0);
    for new in (m0 + 1) as u64..n as u64 {
        targets.clear();
        while targets.len() < m0 {
            let t = endpoints[rng.random_range(0..endpoints.len())];
            if !targets.contains(&t) {
                targets.push(t);
            }
        }
        for &t in &targets {
            edges.push((t, new));
            endpoints.extend([t, new]);
        }
    }
    build(edges)
}

/// Random connected graph: a uniformly shuffled spanning tree plus each
/// remaining pair independently with probability `extra_p`.
pub fn random_connected(n: usize, extra_p: f64, seed: u64) -> Graph {
    assert!(n >= 2);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<u64> = (0..n as u64).collect();
    order.shuffle(&mut rng);
    let mut edges = Vec::new();
    for i in 1..n {
        let parent = order[rng.random_range(0..i)];
        edges.push((parent, order[i]));
    }
    for u in 0..n as u64 {
        for v in u + 1..n as u64 {
            if rng.random_bool(extra_p) {
                edges.push((u, v));
            }
        }
    }
    build(edges)
}
