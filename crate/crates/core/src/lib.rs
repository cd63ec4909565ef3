//! Local and accelerated personalized PageRank solvers.
//!
//! The PPR vector of source `s` solves `(I − (1−α)(I + AD⁻¹)/2) π = α e_s`.
//! Substituting `π = D^{1/2} x` turns this into the strongly convex
//! quadratic `f(x) = ½ xᵀQx − α xᵀD^{-1/2} e_s`, which the solvers in this
//! crate minimize with queue-driven local pushes, optionally wrapped in an
//! accelerated proximal outer loop.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod aesp;
pub mod error;
pub mod graph;
pub mod local_solver;
pub mod oracle;
pub mod ppr;
pub mod sparse;
pub mod trace;

pub use error::{Result, SolverError};
pub use graph::{Graph, GraphError, NodeId};
pub use ppr::{run_method, Method, PprResult, SolveOptions};
pub use sparse::SparseVector;
