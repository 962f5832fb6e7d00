//! Curvature-driven coarsening of weighted, attributed graphs.
//!
//! This crate computes discrete Ollivier-Ricci curvature on graph edges,
//! evolves edge weights under a discrete Ricci flow, and uses the resulting
//! *curvature-adjusted adjacency* to drive a select/reduce/connect pooling
//! pipeline with both a spectral solver and a trained soft-assignment solver
//! of the relaxed minimum-cut objective.
//!
//! # Pipeline
//!
//! ```text
//!   Graph ──ricci_flow(T)──▶ C_T ──select──▶ S ──reduce/connect──▶ coarse Graph
//!            (curvature)          (spectral │ trained)
//! ```
//!
//! * [`curvature`] — per-edge Ollivier-Ricci curvature
//!   `κ_uv = 1 − W₁(p_u, p_v) / w_uv`, where `p_v` is a one-hop neighborhood
//!   measure and `W₁` the Wasserstein-1 (earth mover's) distance. Three
//!   back ends: exact min-cost flow, entropic (Sinkhorn) approximation, and
//!   a combinatorial upper/lower-bound average.
//! * [`flow`] — discrete Ricci flow `w ← (1 − κ_uv) · d_G(u, v)` with
//!   per-iteration normalization; after `T` iterations the edge weights form
//!   the curvature-adjusted adjacency `C_T`.
//! * [`pooling`] — the relaxed min-cut objective on `C_T`, solved either
//!   spectrally (top-K eigenvectors + k-means) or by gradient descent on a
//!   softmax head; reduction `SᵀX` and connection `SᵀAS`; hierarchical
//!   stacking.
//! * [`metrics`] — weighted modularity and normalized mutual information,
//!   each in two documented conventions.
//! * [`theory`] — closed-form machinery for the hub-connected clique family
//!   `G_{a,b}`: the 3×3 weight-evolution matrix `F(a, b)`, its eigenvalues,
//!   analytic weight trajectories, and modularity series.
//!
//! # Conventions
//!
//! * Graphs are undirected, self-loop free, with strictly positive edge
//!   weights; edges are keyed canonically as `(min(u, v), max(u, v))`.
//! * Neighborhood measures place mass `α` at the anchor (default `α = 0`)
//!   and distribute the rest over one-hop neighbors proportional to
//!   `e^{−w}`.
//! * All randomized routines take explicit seeds and are deterministic
//!   across runs and worker counts.
//!
//! # Example
//!
//! ```
//! use orcpool::graph::{generate_dumbbell};
//! use orcpool::curvature::{orc_all, CurvatureMethod};
//!
//! let (g, _labels) = generate_dumbbell(10, 1).unwrap();
//! let curv = orc_all(&g, 0.0, CurvatureMethod::Exact, 1).unwrap();
//! // The bridge joining the two cliques is the most negatively curved edge.
//! let (bridge_idx, _) = g.edge_index(0, 10).unwrap();
//! let min = curv
//!     .values
//!     .iter()
//!     .enumerate()
//!     .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
//!     .unwrap();
//! assert_eq!(min.0, bridge_idx);
//! ```

#![forbid(unsafe_code)]
#![warn(missing_docs)]

pub mod curvature;
pub mod flow;
pub mod graph;
pub mod io;
pub mod linalg;
pub mod metrics;
pub mod pooling;
pub mod theory;
pub mod transport;

/// Errors produced by graph construction, curvature computation, flow,
/// pooling, and I/O.
///
/// The variants mirror how a front end should report failures: everything
/// except [`Error::Numeric`] is a problem with the caller's input
/// (validation), while `Numeric` indicates a solver that could not reach its
/// contract on valid input.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Structurally invalid input: self-loops, nonpositive weights,
    /// duplicate edges, shape mismatches, malformed files.
    #[error("validation error: {0}")]
    Validation(String),

    /// A parameter outside its documented domain (e.g. `a < b` in the model
    /// family, non-decreasing coarsening sizes).
    #[error("parameter error: {0}")]
    Parameter(String),

    /// An operation that requires state the graph does not carry
    /// (e.g. attribute-derived weights on an unattributed graph).
    #[error("state error: {0}")]
    State(String),

    /// A numeric failure: infeasible transport marginals, eigensolver
    /// non-convergence, non-finite loss.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// An underlying I/O failure while reading or writing files.
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for errors that should map to a validation exit status in a
    /// front end (every variant except `Numeric`).
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::Numeric(_))
    }
}

/// Crate-wide result type.
pub type Result<T> = std::result::Result<T, Error>;
