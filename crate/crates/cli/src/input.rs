//! Graph sources, precision and source-node specifications.

use std::path::Path;
use std::str::FromStr;

use locppr::graph::io::load_graph_file;
use locppr::graph::{generators, PreprocessStats};
use locppr::{Graph, NodeId};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{CliError, CliResult};

/// A loaded graph plus everything needed to talk about it in input ids.
#[derive(Debug, Clone)]
pub struct GraphInput {
    pub name: String,
    pub graph: Graph,
    /// Input id of each dense node; `None` when ids are already dense.
    pub original_ids: Option<Vec<u64>>,
    pub stats: Option<PreprocessStats>,
}

impl GraphInput {
    /// Loads a file (edge list or binary cache) or builds a synthetic graph
    /// from a `gen:` spec:
    ///
    /// * `gen:ba:<n>:<m0>:<seed>`
    /// * `gen:grid:<rows>:<cols>`
    /// * `gen:path:<n>`
    /// * `gen:complete:<n>`
    /// * `gen:random:<n>:<p>:<seed>`
    pub fn load(spec: &str) -> CliResult<Self> {
        if let Some(rest) = spec.strip_prefix("gen:") {
            let graph = generate(rest)?;
            return Ok(Self {
                name: spec.replace(':', "-"),
                graph,
                original_ids: None,
                stats: None,
            });
        }
        let path = Path::new(spec);
        let loaded = load_graph_file(path)?;
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| spec.to_string());
        Ok(Self {
            name,
            graph: loaded.graph,
            original_ids: loaded.original_ids,
            stats: loaded.stats,
        })
    }

    /// Dense id for an id as the user wrote it.
    pub fn dense_id(&self, id: u64) -> CliResult<NodeId> {
        let dense = match &self.original_ids {
            Some(ids) => ids.binary_search(&id).ok().map(|i| i as NodeId),
            None => (id < self.graph.n() as u64).then_some(id as NodeId),
        };
        dense.ok_or_else(|| {
            CliError::arg(format!(
                "node {id} is not part of the preprocessed graph {}",
                self.name
            ))
        })
    }

    /// Id as the user would write it.
    pub fn external_id(&self, v: NodeId) -> u64 {
        match &self.original_ids {
            Some(ids) => ids[v as usize],
            None => u64::from(v),
        }
    }
}

fn num<T: FromStr>(tok: Option<&str>, what: &str) -> CliResult<T> {
    tok.and_then(|t| t.parse().ok())
        .ok_or_else(|| CliError::arg(format!("generator spec needs a valid {what}")))
}

fn generate(spec: &str) -> CliResult<Graph> {
    let mut parts = spec.split(':');
    let kind = parts.next().unwrap_or_default();
    let g = match kind {
        "ba" => {
            let n: usize = num(parts.next(), "node count")?;
            let m0: usize = num(parts.next(), "attachment count")?;
            let seed: u64 = num(parts.next(), "seed")?;
            if m0 == 0 || n <= m0 {
                return Err(CliError::arg("ba generator needs 1 <= m0 < n"));
            }
            generators::barabasi_albert(n, m0, seed)
        }
        "grid" => {
            let r: usize = num(parts.next(), "row count")?;
            let c: usize = num(parts.next(), "column count")?;
            if r * c < 2 {
                return Err(CliError::arg("grid needs at least two nodes"));
            }
            generators::grid(r, c)
        }
        "path" | "complete" => {
            let n: usize = num(parts.next(), "node count")?;
            if n < 2 {
                return Err(CliError::arg("generator needs at least two nodes"));
            }
            if kind == "path" {
                generators::path(n)
            } else {
                generators::complete(n)
            }
        }
        "random" => {
            let n: usize = num(parts.next(), "node count")?;
            let p: f64 = num(parts.next(), "edge probability")?;
            let seed: u64 = num(parts.next(), "seed")?;
            if n < 2 || !(0.0..=1.0).contains(&p) {
                return Err(CliError::arg(
                    "random generator needs n >= 2 and p in [0, 1]",
                ));
            }
            generators::random_connected(n, p, seed)
        }
        other => return Err(CliError::arg(format!("unknown generator {other:?}"))),
    };
    if parts.next().is_some() {
        return Err(CliError::arg(format!(
            "trailing fields in generator spec {spec:?}"
        )));
    }
    Ok(g)
}

/// Precision, either absolute or as a multiple of `1/n` resolved after
/// preprocessing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EpsSpec {
    Absolute(f64),
    PerNode(f64),
}

impl EpsSpec {
    pub fn resolve(self, n: usize) -> f64 {
        match self {
            EpsSpec::Absolute(e) => e,
            EpsSpec::PerNode(c) => c / n as f64,
        }
    }
}

impl FromStr for EpsSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let (value, per_node) = match s.strip_suffix("/n") {
            Some(c) => (c, true),
            None => (s, false),
        };
        let x: f64 = value
            .parse()
            .map_err(|_| format!("cannot parse precision {s:?}"))?;
        if !(x > 0.0 && x.is_finite()) {
            return Err(format!("precision must be positive, got {s:?}"));
        }
        Ok(if per_node {
            EpsSpec::PerNode(x)
        } else {
            EpsSpec::Absolute(x)
        })
    }
}

impl std::fmt::Display for EpsSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            EpsSpec::Absolute(x) => write!(f, "{x}"),
            EpsSpec::PerNode(c) => write!(f, "{c}/n"),
        }
    }
}

/// Explicit source ids or `random:K`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SourceSpec {
    List(Vec<u64>),
    Random(usize),
}

impl FromStr for SourceSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if let Some(k) = s.strip_prefix("random:") {
            let k: usize = k
                .parse()
                .map_err(|_| format!("bad source count in {s:?}"))?;
            if k == 0 {
                return Err("random:K needs K >= 1".into());
            }
            return Ok(SourceSpec::Random(k));
        }
        let ids: Result<Vec<u64>, _> = s.split(',').map(|t| t.trim().parse::<u64>()).collect();
        match ids {
            Ok(ids) if !ids.is_empty() => Ok(SourceSpec::List(ids)),
            _ => Err(format!(
                "expected random:K or comma separated node ids, got {s:?}"
            )),
        }
    }
}

impl SourceSpec {
    /// Dense source ids. Random selection is uniform without replacement
    /// and depends only on `seed` and `n`; the result is sorted.
    pub fn resolve(&self, input: &GraphInput, seed: u64) -> CliResult<Vec<NodeId>> {
        match self {
            SourceSpec::List(ids) => ids.iter().map(|&id| input.dense_id(id)).collect(),
            SourceSpec::Random(k) => {
                let n = input.graph.n();
                if *k > n {
                    return Err(CliError::arg(format!(
                        "cannot draw {k} distinct sources from {n} nodes"
                    )));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let mut picked: Vec<NodeId> = rand::seq::index::sample(&mut rng, n, *k)
                    .into_iter()
                    .map(|v| v as NodeId)
                    .collect();
                picked.sort_unstable();
                Ok(picked)
            }
        }
    }
}
