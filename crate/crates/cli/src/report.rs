//! Run summaries and the combined `results.csv` table.

use std::io::{BufRead, Write};

use locppr::trace::RunMeta;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// JSON summary of one solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub meta: RunMeta,
    /// Source id as given on the command line.
    pub source_id: u64,
    pub ops_total: u64,
    pub pushes_total: u64,
    #[serde(rename = "T_used")]
    pub t_used: usize,
    #[serde(rename = "T_max")]
    pub t_max: usize,
    pub early_stopped: bool,
    #[serde(rename = "R")]
    pub r: Option<f64>,
    pub err_inf: Option<f64>,
    pub pi_l1: f64,
    pub support: usize,
    pub wall_ms: f64,
    pub max_grad_drift: Option<f64>,
    pub adaptive_fallbacks: usize,
    pub warnings: Vec<String>,
}

pub const RESULTS_HEADER: &str = "method,graph,alpha,eps,source,ops_total,T_used,R,err_inf,wall_ms";

/// One row of `results.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub method: String,
    pub graph: String,
    pub alpha: f64,
    pub eps: f64,
    pub source: u64,
    pub ops_total: u64,
    pub t_used: usize,
    pub r: Option<f64>,
    pub err_inf: Option<f64>,
    pub wall_ms: f64,
}

impl From<&RunSummary> for ResultRow {
    fn from(s: &RunSummary) -> Self {
        Self {
            method: s.meta.method.clone(),
            graph: s.meta.graph.clone(),
            alpha: s.meta.alpha,
            eps: s.meta.epsilon,
            source: s.source_id,
            ops_total: s.ops_total,
            t_used: s.t_used,
            r: s.r,
            err_inf: s.err_inf,
            wall_ms: s.wall_ms,
        }
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| format!("{v:e}")).unwrap_or_default()
}

impl ResultRow {
    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{:e},{},{},{},{},{},{:.3}",
            self.method,
            self.graph,
            self.alpha,
            self.eps,
            self.source,
            self.ops_total,
            self.t_used,
            opt(self.r),
            opt(self.err_inf),
            self.wall_ms
        )
    }

    pub fn parse(line: &str, lineno: usize) -> CliResult<Self> {
        let bad = |col: &str| CliError::Io(format!("results.csv line {lineno}: bad {col} column"));
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 10 {
            return Err(CliError::Io(format!(
                "results.csv line {lineno}: expected 10 columns, found {}",
                f.len()
            )));
        }
        let float = |i: usize, col: &str| f[i].parse::<f64>().map_err(|_| bad(col));
        let opt_float = |i: usize, col: &str| -> CliResult<Option<f64>> {
            if f[i].is_empty() {
                Ok(None)
            } else {
                float(i, col).map(Some)
            }
        };
        Ok(Self {
            method: f[0].to_string(),
            graph: f[1].to_string(),
            alpha: float(2, "alpha")?,
            eps: float(3, "eps")?,
            source: f[4].parse().map_err(|_| bad("source"))?,
            ops_total: f[5].parse().map_err(|_| bad("ops_total"))?,
            t_used: f[6].parse().map_err(|_| bad("T_used"))?,
            r: opt_float(7, "R")?,
            err_inf: opt_float(8, "err_inf")?,
            wall_ms: float(9, "wall_ms")?,
        })
    }
}

pub fn write_results<W: Write>(rows: &[ResultRow], mut w: W) -> std::io::Result<()> {
    writeln!(w, "{RESULTS_HEADER}")?;
    for r in rows {
        writeln!(w, "{}", r.to_csv())?;
    }
    w.flush()
}

pub fn read_results<R: BufRead>(r: R) -> CliResult<Vec<ResultRow>> {
    let mut lines = r.lines();
    let header = lines.next().transpose()?.unwrap_or_default();
    if header.trim_end() != RESULTS_HEADER {
        return Err(CliError::Io("results.csv: missing or wrong header".into()));
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        rows.push(ResultRow::parse(line.trim_end(), i + 2)?);
    }
    Ok(rows)
}

/// `results.csv` contents with the `wall_ms` column removed, for
/// reproducibility comparisons.
pub fn strip_wall_ms(csv: &str) -> String {
    csv.lines()
        .map(|l| l.rsplit_once(',').map_or(l, |(head, _)| head))
        .collect::<Vec<_>>()
        .join("\n")
}
