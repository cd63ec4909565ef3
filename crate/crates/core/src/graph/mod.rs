//! Immutable undirected simple graphs in compressed sparse row form.
//!
//! Graphs are built from raw edge lists by [`preprocess`], which drops
//! self-loops, symmetrizes, removes duplicate edges, keeps the largest
//! connected component and relabels the surviving nodes densely. Every
//! [`Graph`] handed out by this module is connected, has no isolated nodes
//! and has sorted neighbor rows.

pub mod generators;
pub mod io;

use std::collections::VecDeque;
use std::io::BufRead;

use thiserror::Error;

/// Dense node identifier, `0..n`.
pub type NodeId = u32;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("line {line}: cannot parse {token:?} as a node id")]
    Parse { line: usize, token: String },
    #[error("line {line}: expected at least two node ids")]
    MissingToken { line: usize },
    #[error("edge list is empty")]
    EmptyInput,
    #[error("graph is degenerate after preprocessing ({nodes} node(s), no edges)")]
    Degenerate { nodes: usize },
    #[error("node id {id} out of range for a graph with {n} nodes")]
    OutOfBounds { id: usize, n: usize },
    #[error("malformed binary graph: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Edge pairs exactly as read from the input, with the original node ids.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RawEdges {
    pub edges: Vec<(u64, u64)>,
    /// Number of lines that carried tokens beyond the two endpoints
    /// (weights, timestamps); those tokens are dropped.
    pub discarded_columns: usize,
}

impl RawEdges {
    pub fn from_pairs<I: IntoIterator<Item = (u64, u64)>>(pairs: I) -> Self {
        Self {
            edges: pairs.into_iter().collect(),
            discarded_columns: 0,
        }
    }
}

/// Parses a SNAP-style whitespace separated edge list.
///
/// Lines starting with `#` or `%` and blank lines are skipped. Only the
/// first two tokens of a line are used.
pub fn load_edge_list<R: BufRead>(reader: R) -> Result<RawEdges, GraphError> {
    let mut raw = RawEdges::default();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        let trimmed = line.trim_start();
        if trimmed.is_empty() || trimmed.starts_with('#') || trimmed.starts_with('%') {
            continue;
        }
        let mut tokens = trimmed.split_whitespace();
        let mut next_id = || -> Result<u64, GraphError> {
            let tok = tokens
                .next()
                .ok_or(GraphError::MissingToken { line: lineno })?;
            tok.parse::<u64>().map_err(|_| GraphError::Parse {
                line: lineno,
                token: tok.to_string(),
            })
        };
        let u = next_id()?;
        let v = next_id()?;
        if tokens.next().is_some() {
            raw.discarded_columns += 1;
        }
        raw.edges.push((u, v));
    }
    if raw.edges.is_empty() {
        return Err(GraphError::EmptyInput);
    }
    Ok(raw)
}

/// Convenience wrapper around [`load_edge_list`] for in-memory text.
pub fn parse_edge_list(text: &str) -> Result<RawEdges, GraphError> {
    load_edge_list(text.as_bytes())
}

/// Counters describing what [`preprocess`] removed.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PreprocessStats {
    pub raw_edges: usize,
    pub self_loops: usize,
    /// Edge pairs dropped because the same undirected edge was already seen.
    pub duplicate_edges: usize,
    pub raw_nodes: usize,
    pub dropped_nodes: usize,
    pub discarded_columns: usize,
}

/// A preprocessed graph together with the map back to input ids.
#[derive(Debug, Clone)]
pub struct Preprocessed {
    pub graph: Graph,
    /// `original_ids[v]` is the input id of dense node `v`; ascending.
    pub original_ids: Vec<u64>,
    pub stats: PreprocessStats,
}

impl Preprocessed {
    /// Dense id of an original node id, if it survived preprocessing.
    pub fn dense_id(&self, original: u64) -> Option<NodeId> {
        self.original_ids
            .binary_search(&original)
            .ok()
            .map(|i| i as NodeId)
    }
}

/// Turns raw edges into a connected simple [`Graph`].
///
/// The largest connected component is kept; among equally large components
/// the one containing the smallest original id wins. Survivors are relabeled
/// to `0..n` in ascending order of original id.
pub fn preprocess(raw: &RawEdges) -> Result<Preprocessed, GraphError> {
    if raw.edges.is_empty() {
        return Err(GraphError::EmptyInput);
    }
    let mut stats = PreprocessStats {
        raw_edges: raw.edges.len(),
        discarded_columns: raw.discarded_columns,
        ..Default::default()
    };

    let mut ids: Vec<u64> = raw.edges.iter().flat_map(|&(u, v)| [u, v]).collect();
    ids.sort_unstable();
    ids.dedup();
    stats.raw_nodes = ids.len();
    let index = |id: u64| ids.binary_search(&id).expect("id collected above");

    let mut pairs: Vec<(usize, usize)> = Vec::with_capacity(raw.edges.len());
    for &(u, v) in &raw.edges {
        if u == v {
            stats.self_loops += 1;
            continue;
        }
        let (a, b) = (index(u), index(v));
        pairs.push((a.min(b), a.max(b)));
    }
    let before = pairs.len();
    pairs.sort_unstable();
    pairs.dedup();
    stats.duplicate_edges = before - pairs.len();

    let full = Graph::from_canonical_pairs(ids.len(), &pairs);

    // Components are discovered in ascending id order, so keeping the first
    // strictly larger one implements the smallest-id tie-break.
    let mut comp = vec![usize::MAX; full.n()];
    let mut best: Option<(usize, usize)> = None; // (component, size)
    let mut ncomp = 0;
    let mut queue = VecDeque::new();
    for start in 0..full.n() {
        if comp[start] != usize::MAX || full.degree(start as NodeId) == 0 {
            continue;
        }
        let mut size = 0;
        comp[start] = ncomp;
        queue.push_back(start);
        while let Some(u) = queue.pop_front() {
            size += 1;
            for &v in full.neighbors(u as NodeId) {
                if comp[v as usize] == usize::MAX {
                    comp[v as usize] = ncomp;
                    queue.push_back(v as usize);
                }
            }
        }
        if best.is_none_or(|(_, s)| size > s) {
            best = Some((ncomp, size));
        }
        ncomp += 1;
    }

    let Some((keep, size)) = best else {
        return Err(GraphError::Degenerate { nodes: 0 });
    };
    if size < 2 {
        return Err(GraphError::Degenerate { nodes: size });
    }

    let mut relabel = vec![u32::MAX; full.n()];
    let mut original_ids = Vec::with_capacity(size);
    for v in 0..full.n() {
        if comp[v] == keep {
            relabel[v] = original_ids.len() as u32;
            original_ids.push(ids[v]);
        }
    }
    let kept: Vec<(usize, usize)> = pairs
        .iter()
        .filter(|&&(a, _)| comp[a] == keep)
        .map(|&(a, b)| (relabel[a] as usize, relabel[b] as usize))
        .collect();
    stats.dropped_nodes = ids.len() - size;

    Ok(Preprocessed {
        graph: Graph::from_canonical_pairs(size, &kept),
        original_ids,
        stats,
    })
}

/// Undirected simple graph in CSR layout.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    offsets: Vec<usize>,
    neighbors: Vec<NodeId>,
    degrees: Vec<u32>,
    sqrt_degrees: Vec<f64>,
}

impl Graph {
    /// Builds from sorted, deduplicated `(a, b)` pairs with `a < b`.
    fn from_canonical_pairs(n: usize, pairs: &[(usize, usize)]) -> Self {
        let mut degrees = vec![0u32; n];
        for &(a, b) in pairs {
            degrees[a] += 1;
            degrees[b] += 1;
        }
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0);
        for &d in &degrees {
            offsets.push(offsets.last().unwrap() + d as usize);
        }
        let mut fill = offsets[..n].to_vec();
        let mut neighbors = vec![0 as NodeId; 2 * pairs.len()];
        // Sorted (a, b) input fills every row in ascending order: smaller
        // neighbors arrive as the `b` side of earlier pairs.
        for &(a, b) in pairs {
            neighbors[fill[a]] = b as NodeId;
            fill[a] += 1;
            neighbors[fill[b]] = a as NodeId;
            fill[b] += 1;
        }
        Self::from_parts_unchecked(offsets, neighbors)
    }

    pub(crate) fn from_parts_unchecked(offsets: Vec<usize>, neighbors: Vec<NodeId>) -> Self {
        let degrees: Vec<u32> = offsets.windows(2).map(|w| (w[1] - w[0]) as u32).collect();
        let sqrt_degrees = degrees.iter().map(|&d| (d as f64).sqrt()).collect();
        Self {
            offsets,
            neighbors,
            degrees,
            sqrt_degrees,
        }
    }

    /// Preprocesses an arbitrary edge list; shorthand for tests and generators.
    pub fn from_edges<I: IntoIterator<Item = (u64, u64)>>(edges: I) -> Result<Self, GraphError> {
        preprocess(&RawEdges::from_pairs(edges)).map(|p| p.graph)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.degrees.len()
    }

    /// Number of undirected edges.
    #[inline]
    pub fn m(&self) -> usize {
        self.neighbors.len() / 2
    }

    #[inline]
    pub fn degree(&self, v: NodeId) -> u32 {
        self.degrees[v as usize]
    }

    #[inline]
    pub fn sqrt_degree(&self, v: NodeId) -> f64 {
        self.sqrt_degrees[v as usize]
    }

    #[inline]
    pub fn neighbors(&self, v: NodeId) -> &[NodeId] {
        let v = v as usize;
        &self.neighbors[self.offsets[v]..self.offsets[v + 1]]
    }

    pub fn degrees(&self) -> &[u32] {
        &self.degrees
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn neighbor_array(&self) -> &[NodeId] {
        &self.neighbors
    }

    pub fn max_degree(&self) -> u32 {
        self.degrees.iter().copied().max().unwrap_or(0)
    }

    pub fn min_degree(&self) -> u32 {
        self.degrees.iter().copied().min().unwrap_or(0)
    }

    /// Sum of degrees over `nodes`.
    pub fn volume(&self, nodes: &[NodeId]) -> Result<u64, GraphError> {
        nodes.iter().try_fold(0u64, |acc, &v| {
            if (v as usize) < self.n() {
                Ok(acc + self.degrees[v as usize] as u64)
            } else {
                Err(GraphError::OutOfBounds {
                    id: v as usize,
                    n: self.n(),
                })
            }
        })
    }

    /// `vol(V) = 2m`.
    pub fn total_volume(&self) -> u64 {
        self.neighbors.len() as u64
    }

    #[inline]
    pub fn has_edge(&self, u: NodeId, v: NodeId) -> bool {
        self.neighbors(u).binary_search(&v).is_ok()
    }

    /// Each undirected edge once, as `(u, v)` with `u < v`.
    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        (0..self.n() as NodeId).flat_map(move |u| {
            self.neighbors(u)
                .iter()
                .filter(move |&&v| u < v)
                .map(move |&v| (u, v))
        })
    }

    /// Full structural check: CSR shape, sorted rows, no loops or
    /// duplicates, symmetry, no isolated nodes, connectivity.
    pub fn validate(&self) -> Result<(), String> {
        let n = self.n();
        if self.offsets.len() != n + 1 || self.offsets[0] != 0 {
            return Err("offsets must have length n+1 and start at 0".into());
        }
        if *self.offsets.last().unwrap() != self.neighbors.len()
            || !self.neighbors.len().is_multiple_of(2)
        {
            return Err("offsets[n] must equal 2m".into());
        }
        if self.degrees.iter().map(|&d| d as u64).sum::<u64>() != self.total_volume() {
            return Err("degree sum differs from 2m".into());
        }
        for u in 0..n as NodeId {
            let row = self.neighbors(u);
            if row.is_empty() {
                return Err(format!("node {u} is isolated"));
            }
            if row.windows(2).any(|w| w[0] >= w[1]) {
                return Err(format!("row {u} is not strictly ascending"));
            }
            for &v in row {
                if v == u {
                    return Err(format!("self-loop at {u}"));
                }
                if v as usize >= n {
                    return Err(format!("neighbor {v} of {u} out of range"));
                }
                if !self.has_edge(v, u) {
                    return Err(format!("edge ({u},{v}) has no reverse"));
                }
            }
        }
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0 as NodeId]);
        seen[0] = true;
        let mut reached = 1;
        while let Some(u) = queue.pop_front() {
            for &v in self.neighbors(u) {
                if !seen[v as usize] {
                    seen[v as usize] = true;
                    reached += 1;
                    queue.push_back(v);
                }
            }
        }
        if reached != n {
            return Err(format!("only {reached} of {n} nodes reachable from 0"));
        }
        Ok(())
    }
}
