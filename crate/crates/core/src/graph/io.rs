//! File loading and the binary graph cache.
//!
//! Cache layout, all integers little-endian:
//!
//! | bytes            | content                                  |
//! |------------------|------------------------------------------|
//! | 5                | magic `LPPR1`                            |
//! | 8                | `n` as u64                               |
//! | 8                | `m` as u64 (undirected edges)            |
//! | 8 · (n + 1)      | row offsets as u64                       |
//! | 4 · 2m           | neighbor ids as u32, rows sorted         |
//!
//! A cache holds an already preprocessed graph, so original node ids are
//! not stored; loading validates the full structure.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{load_edge_list, preprocess, Graph, GraphError, NodeId, PreprocessStats};

pub const MAGIC: &[u8; 5] = b"LPPR1";

pub fn write_binary<W: Write>(graph: &Graph, mut w: W) -> Result<(), GraphError> {
    w.write_all(MAGIC)?;
    w.write_all(&(graph.n() as u64).to_le_bytes())?;
    w.write_all(&(graph.m() as u64).to_le_bytes())?;
    for &o in graph.offsets() {
        w.write_all(&(o as u64).to_le_bytes())?;
    }
    for &v in graph.neighbor_array() {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64, GraphError> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(u64::from_le_bytes(buf))
}

/// Reads a cache written by [`write_binary`], magic included.
pub fn read_binary<R: Read>(mut r: R) -> Result<Graph, GraphError> {
    let mut magic = [0u8; 5];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(GraphError::Format("bad magic".into()));
    }
    read_binary_body(r)
}

fn read_binary_body<R: Read>(mut r: R) -> Result<Graph, GraphError> {
    let n = read_u64(&mut r)? as usize;
    let m = read_u64(&mut r)? as usize;
    let mut offsets = Vec::with_capacity(n + 1);
    for _ in 0..=n {
        offsets.push(read_u64(&mut r)? as usize);
    }
    let mut neighbors = Vec::with_capacity(2 * m);
    let mut buf = [0u8; 4];
    for _ in 0..2 * m {
        r.read_exact(&mut buf)?;
        neighbors.push(NodeId::from_le_bytes(buf));
    }
    if offsets.last() != Some(&(2 * m)) || offsets.windows(2).any(|w| w[0] > w[1]) {
        return Err(GraphError::Format("offsets inconsistent with m".into()));
    }
    if neighbors.iter().any(|&v| v as usize >= n) {
        return Err(GraphError::Format("neighbor id out of range".into()));
    }
    let graph = Graph::from_parts_unchecked(offsets, neighbors);
    graph.validate().map_err(GraphError::Format)?;
    Ok(graph)
}

/// Graph loaded from disk plus whatever preprocessing information exists.
#[derive(Debug, Clone)]
pub struct LoadedGraph {
    pub graph: Graph,
    /// `None` for binary caches.
    pub original_ids: Option<Vec<u64>>,
    pub stats: Option<PreprocessStats>,
}

/// Loads either a binary cache (detected by its magic) or a text edge list.
pub fn load_graph_file<P: AsRef<Path>>(path: P) -> Result<LoadedGraph, GraphError> {
    let mut reader = BufReader::new(File::open(path)?);
    let mut head = [0u8; 5];
    let mut filled = 0;
    while filled < head.len() {
        match reader.read(&mut head[filled..])? {
            0 => break,
            k => filled += k,
        }
    }
    if filled == head.len() && &head == MAGIC {
        let graph = read_binary_body(reader)?;
        return Ok(LoadedGraph {
            graph,
            original_ids: None,
            stats: None,
        });
    }
    let chained = std::io::Cursor::new(head[..filled].to_vec()).chain(reader);
    let raw = load_edge_list(BufReader::new(chained))?;
    let p = preprocess(&raw)?;
    Ok(LoadedGraph {
        graph: p.graph,
        original_ids: Some(p.original_ids),
        stats: Some(p.stats),
    })
}

pub fn save_binary<P: AsRef<Path>>(graph: &Graph, path: P) -> Result<(), GraphError> {
    write_binary(graph, BufWriter::new(File::create(path)?))
}
