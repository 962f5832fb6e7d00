//! Discrete Ricci flow on edge weights.
//!
//! Each step recomputes every edge curvature on the current weighted
//! graph, then updates
//!
//! ```text
//! w_uv ← (1 − κ_uv) · d_G(u, v)
//! ```
//!
//! where `d_G` is the *current* weighted shortest-path distance between
//! the endpoints (which may undercut the direct edge weight), floors the
//! result at `1e-8`, and rescales so the total edge weight equals `|E|`
//! (a uniform unit-weight graph is scale-stationary under this choice).
//! Negatively curved bridge edges grow; positively curved intra-cluster
//! edges shrink.
//!
//! After `T` iterations the evolved weights form the curvature-adjusted
//! adjacency `C_T`, the edge-importance matrix consumed by pooling.

use crate::curvature::{orc_all_with_options, CurvatureMethod, EdgeCurvatures, SinkhornOptions};
use crate::graph::{shortest_paths_to_targets, Graph};
use crate::{Error, Result};

/// Weights are floored here before rescaling, so a κ → 1 edge cannot
/// destroy the metric.
pub const WEIGHT_FLOOR: f64 = 1e-8;

/// How weights are rescaled after each step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Normalization {
    /// Rescale so the weights total `|E|` (default; unit weights are a
    /// fixed point of the normalization).
    #[default]
    Sum,
    /// Rescale so the largest weight is 1.
    Max,
}

/// Tuning for a flow run.
#[derive(Debug, Clone)]
pub struct FlowOptions {
    /// Curvature back end used at every step.
    pub method: CurvatureMethod,
    /// Laziness parameter of the neighborhood measures.
    pub alpha: f64,
    /// Worker threads for the per-edge curvature pass.
    pub workers: usize,
    /// Sinkhorn knobs (only read by the sinkhorn back end).
    pub sinkhorn: SinkhornOptions,
    /// Post-step rescaling scheme.
    pub normalization: Normalization,
    /// When false, approximate `d_G(u, v) ≈ w_uv` instead of re-solving
    /// shortest paths each step — cheaper, documented as an approximation.
    pub exact_distances: bool,
    /// Record a weight snapshot after every iteration.
    pub record_history: bool,
}

impl Default for FlowOptions {
    fn default() -> Self {
        FlowOptions {
            method: CurvatureMethod::Exact,
            alpha: 0.0,
            workers: 1,
            sinkhorn: SinkhornOptions::default(),
            normalization: Normalization::Sum,
            exact_distances: true,
            record_history: false,
        }
    }
}

/// The flow's state after some number of iterations.
#[derive(Debug, Clone)]
pub struct FlowState {
    /// Iterations applied so far.
    pub t: usize,
    /// Current (normalized) edge weights, canonical edge order.
    pub weights: Vec<f64>,
    /// The most recent update's weights *before* rescaling — i.e.
    /// `(1 − κ)·d_G` after flooring. Equal to `weights` at `t = 0`.
    pub raw_weights: Vec<f64>,
    /// Curvatures of the weighted graph the last step saw (`None` at
    /// `t = 0`).
    pub curvatures: Option<EdgeCurvatures>,
    /// Per-iteration normalized snapshots including `t = 0`, when
    /// recording is on.
    pub history: Option<Vec<Vec<f64>>>,
}

/// Fresh state at `t = 0` for a graph's current weights.
pub fn initial_flow_state(g: &Graph, record_history: bool) -> FlowState {
    let weights = g.edge_weights();
    FlowState {
        t: 0,
        raw_weights: weights.clone(),
        history: record_history.then(|| vec![weights.clone()]),
        weights,
        curvatures: None,
    }
}

/// The curvature-adjusted adjacency `C_T`: the input graph with evolved
/// edge weights (same sparsity pattern, symmetric, positive), plus the
/// iteration count that produced it.
#[derive(Debug, Clone)]
pub struct CurvatureAdjustedAdjacency {
    /// The graph whose edge weights are the evolved importance scores;
    /// attributes and labels ride along untouched.
    pub graph: Graph,
    /// Number of flow iterations applied.
    pub t: usize,
}

impl CurvatureAdjustedAdjacency {
    /// Dense symmetric matrix form, row-major `n × n`.
    pub fn dense(&self) -> Vec<f64> {
        self.graph.dense_adjacency()
    }
}

/// Exact weighted shortest-path distance per edge, batched one Dijkstra
/// per source node (targets = that node's higher-id neighbors).
fn per_edge_shortest_paths(g: &Graph) -> Vec<f64> {
    let mut d = vec![0.0; g.edge_count()];
    for u in 0..g.node_count() {
        let targets: Vec<usize> = g
            .neighbors(u)
            .iter()
            .filter(|&&(v, _)| v > u)
            .map(|&(v, _)| v)
            .collect();
        if targets.is_empty() {
            continue;
        }
        let dist = shortest_paths_to_targets(g, u, &targets);
        for (&v, &dv) in targets.iter().zip(&dist) {
            let (e, _) = g.edge_index(u, v).expect("target is a neighbor");
            d[e] = dv;
        }
    }
    d
}

/// Advance the flow by one step.
///
/// Curvatures and shortest paths are computed on the graph carrying
/// `state.weights`; the update is `(1 − κ_uv)·d_G(u, v)`, floored at
/// [`WEIGHT_FLOOR`], then rescaled per the configured normalization.
/// κ ≤ 1 keeps the pre-floor update nonnegative.
pub fn ricci_flow_step(state: &FlowState, g: &Graph, opts: &FlowOptions) -> Result<FlowState> {
    let current = g.with_edge_weights(&state.weights)?;
    let curvatures = orc_all_with_options(
        &current,
        opts.alpha,
        opts.method,
        opts.workers,
        &opts.sinkhorn,
    )?;
    let d_g = if opts.exact_distances {
        per_edge_shortest_paths(&current)
    } else {
        state.weights.clone()
    };
    let raw: Vec<f64> = curvatures
        .values
        .iter()
        .zip(&d_g)
        .map(|(&kappa, &d)| ((1.0 - kappa) * d).max(WEIGHT_FLOOR))
        .collect();
    let scale = match opts.normalization {
        Normalization::Sum => {
            let total: f64 = raw.iter().sum();
            g.edge_count() as f64 / total
        }
        Normalization::Max => {
            let max = raw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            1.0 / max
        }
    };
    if !scale.is_finite() || scale <= 0.0 {
        return Err(Error::Numeric(format!(
            "flow normalization produced scale factor {}",
            scale
        )));
    }
    let weights: Vec<f64> = raw.iter().map(|&w| w * scale).collect();
    let mut history = state.history.clone();
    if let Some(h) = history.as_mut() {
        h.push(weights.clone());
    }
    Ok(FlowState {
        t: state.t + 1,
        weights,
        raw_weights: raw,
        curvatures: Some(curvatures),
        history,
    })
}

/// Run `t_iterations` of Ricci flow and return the curvature-adjusted
/// adjacency together with the final state (which carries the history
/// when requested).
///
/// `t_iterations = 0` returns the input weights bitwise-unchanged, so
/// downstream pooling degrades to the classical min-cut objective on the
/// raw adjacency.
pub fn ricci_flow(
    g: &Graph,
    t_iterations: usize,
    opts: &FlowOptions,
) -> Result<(CurvatureAdjustedAdjacency, FlowState)> {
    let mut state = initial_flow_state(g, opts.record_history);
    for _ in 0..t_iterations {
        state = ricci_flow_step(&state, g, opts)?;
    }
    let graph = g.with_edge_weights(&state.weights)?;
    Ok((
        CurvatureAdjustedAdjacency {
            graph,
            t: t_iterations,
        },
        state,
    ))
}
