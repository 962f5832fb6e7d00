//! Curvature-guided pooling: select supernodes by a relaxed min-cut on
//! the curvature-adjusted adjacency, then reduce attributes and
//! reconnect.
//!
//! The selection problem is the trace-ratio relaxation of the K-way
//! normalized cut. Two solvers are provided:
//!
//! * **spectral** — top-K eigenvectors of the degree-normalized
//!   curvature-adjusted adjacency `Ĉ = D^{−1/2} C_T D^{−1/2}`, clustered
//!   row-wise by seeded k-means ([`spectral_select`]);
//! * **trained** — a small differentiable head optimized against the
//!   min-cut loss plus an orthogonality penalty ([`train::train_soft_assignment`]).
//!
//! Reduction sums attributes per supernode (`X^P = SᵀX`) and connection
//! pools the *original* adjacency (`A^P = SᵀAS`), dropping intra-cluster
//! diagonal mass from the coarse edge set while reporting it. With zero
//! flow iterations the curvature-adjusted adjacency equals the raw
//! adjacency and the whole pipeline degrades to classical spectral
//! min-cut pooling.

pub mod train;

use log::warn;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::flow::{ricci_flow, CurvatureAdjustedAdjacency, FlowOptions};
use crate::graph::{attribute_similarity_weights, build_graph, Graph};
use crate::linalg::symmetric_eigen;
use crate::{Error, Result};

pub use train::{
    train_soft_assignment, train_soft_assignment_with_features, FeatureMode, TrainState,
    TrainingProblem,
};

/// Tolerance on assignment row sums.
pub const ROW_SUM_TOL: f64 = 1e-9;

/// Default number of k-means restarts in spectral selection.
pub const DEFAULT_KMEANS_RESTARTS: usize = 10;

/// Lloyd iteration cap per k-means restart.
pub const KMEANS_MAX_ITER: usize = 100;

/// A cluster-assignment matrix: `n` rows, `k` columns, rows summing to
/// one. Hard assignments are one-hot rows; soft assignments are
/// nonnegative row distributions.
#[derive(Debug, Clone)]
pub struct Assignment {
    /// Number of nodes (rows).
    pub n: usize,
    /// Number of clusters (columns).
    pub k: usize,
    /// Row-major `n × k` matrix.
    pub s: Vec<f64>,
    /// Whether every row is one-hot.
    pub hard: bool,
}

impl Assignment {
    /// Hard assignment from per-node cluster labels (each `< k`).
    pub fn from_labels(labels: &[usize], k: usize) -> Result<Assignment> {
        if k == 0 {
            return Err(Error::Parameter(
                "an assignment needs at least one cluster".to_string(),
            ));
        }
        let mut s = vec![0.0; labels.len() * k];
        for (i, &c) in labels.iter().enumerate() {
            if c >= k {
                return Err(Error::Validation(format!(
                    "label {} of node {} is out of range for {} clusters",
                    c, i, k
                )));
            }
            s[i * k + c] = 1.0;
        }
        Ok(Assignment {
            n: labels.len(),
            k,
            s,
            hard: true,
        })
    }

    /// Soft assignment from a row-major buffer; validates shape and row
    /// sums.
    pub fn from_soft(s: Vec<f64>, n: usize, k: usize) -> Result<Assignment> {
        let a = Assignment { n, k, s, hard: false };
        a.validate()?;
        Ok(a)
    }

    /// Check the invariants: shape, nonnegative entries, row sums one
    /// (within [`ROW_SUM_TOL`]), one-hot rows when hard.
    pub fn validate(&self) -> Result<()> {
        if self.s.len() != self.n * self.k {
            return Err(Error::Validation(format!(
                "assignment buffer has {} entries, expected {}",
                self.s.len(),
                self.n * self.k
            )));
        }
        for i in 0..self.n {
            let row = &self.s[i * self.k..(i + 1) * self.k];
            let mut sum = 0.0;
            let mut nonzero = 0;
            for &x in row {
                if !(x >= 0.0) {
                    return Err(Error::Validation(format!(
                        "assignment row {} has a negative or non-finite entry {}",
                        i, x
                    )));
                }
                if x != 0.0 {
                    nonzero += 1;
                }
                sum += x;
            }
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::Validation(format!(
                    "assignment row {} sums to {}, expected 1",
                    i, sum
                )));
            }
            if self.hard && nonzero != 1 {
                return Err(Error::Validation(format!(
                    "hard assignment row {} has {} nonzero entries",
                    i, nonzero
                )));
            }
        }
        Ok(())
    }

    /// Per-row argmax labels, ties toward the lower cluster index.
    pub fn labels(&self) -> Vec<usize> {
        (0..self.n)
            .map(|i| {
                let row = &self.s[i * self.k..(i + 1) * self.k];
                let mut best = 0;
                for (j, &x) in row.iter().enumerate() {
                    if x > row[best] {
                        best = j;
                    }
                }
                best
            })
            .collect()
    }
}

/// Symmetric degree normalization `D^{−1/2} M D^{−1/2}` of a dense
/// nonnegative matrix, row-major `n × n`.
///
/// Rows with zero mass (isolated supernodes) are replaced by identity
/// rows so the normalization stays finite; the spectrum then lies in
/// `[−1, 1]`.
pub fn normalized_adjacency(m: &[f64], n: usize) -> Result<Vec<f64>> {
    if m.len() != n * n {
        return Err(Error::Validation(format!(
            "matrix buffer has {} entries, expected {} for n = {}",
            m.len(),
            n * n,
            n
        )));
    }
    for i in 0..n {
        for j in 0..n {
            let x = m[i * n + j];
            if !(x >= 0.0) {
                return Err(Error::Validation(format!(
                    "adjacency entry ({}, {}) is negative or non-finite: {}",
                    i, j, x
                )));
            }
            if (x - m[j * n + i]).abs() > 1e-12 * x.abs().max(1.0) {
                return Err(Error::Validation(format!(
                    "adjacency is not symmetric at ({}, {})",
                    i, j
                )));
            }
        }
    }
    let mut inv_sqrt = vec![0.0; n];
    let mut isolated = vec![false; n];
    for i in 0..n {
        let row_sum: f64 = m[i * n..(i + 1) * n].iter().sum();
        if row_sum > 0.0 {
            inv_sqrt[i] = 1.0 / row_sum.sqrt();
        } else {
            isolated[i] = true;
            inv_sqrt[i] = 1.0;
        }
    }
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        if isolated[i] {
            out[i * n + i] = 1.0;
            continue;
        }
        for j in 0..n {
            if isolated[j] {
                continue;
            }
            out[i * n + j] = m[i * n + j] * inv_sqrt[i] * inv_sqrt[j];
        }
    }
    Ok(out)
}

/// Row sums of a dense matrix — the degree vector of `Ĉ` used in the
/// min-cut denominator.
pub(crate) fn degree_vector(m: &[f64], n: usize) -> Vec<f64> {
    (0..n).map(|i| m[i * n..(i + 1) * n].iter().sum()).collect()
}

/// Numerator and denominator of the min-cut trace ratio:
/// `tr(SᵀĈS)` and `tr(SᵀD̂S)`.
pub(crate) fn trace_ratio_parts(
    s: &[f64],
    n: usize,
    k: usize,
    c_hat: &[f64],
    d_hat: &[f64],
) -> (f64, f64) {
    let mut numerator = 0.0;
    for i in 0..n {
        for j in 0..n {
            let c = c_hat[i * n + j];
            if c == 0.0 {
                continue;
            }
            let mut dot = 0.0;
            for l in 0..k {
                dot += s[i * k + l] * s[j * k + l];
            }
            numerator += c * dot;
        }
    }
    let mut denominator = 0.0;
    for i in 0..n {
        let mut row_sq = 0.0;
        for l in 0..k {
            row_sq += s[i * k + l] * s[i * k + l];
        }
        denominator += d_hat[i] * row_sq;
    }
    (numerator, denominator)
}

/// The relaxed min-cut loss `−tr(SᵀĈS) / tr(SᵀD̂S)` of an assignment
/// against a curvature-adjusted adjacency.
///
/// `Ĉ` is the degree-normalized adjacency and `D̂` its own degree
/// vector, so `D̂ − Ĉ` is diagonally dominant and the value always lies
/// in `[−1, 0]`.
pub fn mincut_loss(s: &Assignment, c: &CurvatureAdjustedAdjacency) -> Result<f64> {
    s.validate()?;
    let n = c.graph.node_count();
    if s.n != n {
        return Err(Error::Parameter(format!(
            "assignment has {} rows but the graph has {} nodes",
            s.n, n
        )));
    }
    let c_hat = normalized_adjacency(&c.dense(), n)?;
    let d_hat = degree_vector(&c_hat, n);
    let (p, q) = trace_ratio_parts(&s.s, n, s.k, &c_hat, &d_hat);
    if q.abs() < 1e-300 {
        return Err(Error::Numeric(
            "min-cut denominator tr(SᵀD̂S) is zero".to_string(),
        ));
    }
    Ok(-p / q)
}

/// Penalty `‖SᵀS/‖SᵀS‖_F − I_K/√K‖_F` pushing clusters toward
/// orthogonality and balanced sizes. Ranges over `[0, 2]`; zero exactly
/// when `SᵀS` is proportional to the identity.
pub fn orthogonality_penalty(s: &Assignment) -> f64 {
    orthogonality_penalty_raw(&s.s, s.n, s.k)
}

pub(crate) fn orthogonality_penalty_raw(s: &[f64], n: usize, k: usize) -> f64 {
    let mut m = vec![0.0; k * k];
    for i in 0..n {
        for a in 0..k {
            let sa = s[i * k + a];
            if sa == 0.0 {
                continue;
            }
            for b in 0..k {
                m[a * k + b] += sa * s[i * k + b];
            }
        }
    }
    let f: f64 = m.iter().map(|x| x * x).sum::<f64>().sqrt();
    debug_assert!(f > 0.0, "assignment rows sum to 1, so SᵀS cannot vanish");
    let inv_sqrt_k = 1.0 / (k as f64).sqrt();
    let mut sq = 0.0;
    for a in 0..k {
        for b in 0..k {
            let target = if a == b { inv_sqrt_k } else { 0.0 };
            let d = m[a * k + b] / f - target;
            sq += d * d;
        }
    }
    sq.sqrt()
}

/// Deterministic k-means with k-means++ seeding.
///
/// `points` is row-major `n × dim`. Each restart draws fresh seeds from
/// the same RNG stream, runs Lloyd iterations (at most
/// [`KMEANS_MAX_ITER`]), and the restart with the lowest within-cluster
/// SSE wins (earlier restart on exact ties). Distance ties during
/// assignment go to the lower cluster index; a cluster left empty keeps
/// its previous center.
pub fn kmeans(
    points: &[f64],
    n: usize,
    dim: usize,
    k: usize,
    restarts: usize,
    seed: u64,
) -> (Vec<usize>, f64) {
    assert!(k >= 1 && k <= n, "k must be in 1..=n");
    assert!(restarts >= 1, "at least one restart is required");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dist_sq = |p: usize, center: &[f64]| -> f64 {
        let row = &points[p * dim..(p + 1) * dim];
        row.iter()
            .zip(center)
            .map(|(&x, &c)| (x - c) * (x - c))
            .sum()
    };
    let mut best_labels = vec![0usize; n];
    let mut best_sse = f64::INFINITY;
    for _ in 0..restarts {
        // k-means++ seeding: first center uniform, the rest sampled
        // with probability proportional to squared distance from the
        // chosen set. If every remaining point coincides with a center
        // the draw falls back to uniform.
        let mut centers: Vec<Vec<f64>> = Vec::with_capacity(k);
        let first = rng.gen_range(0..n);
        centers.push(points[first * dim..(first + 1) * dim].to_vec());
        let mut min_d: Vec<f64> = (0..n).map(|p| dist_sq(p, &centers[0])).collect();
        while centers.len() < k {
            let total: f64 = min_d.iter().sum();
            let idx = if total > 0.0 {
                let mut draw = rng.gen::<f64>() * total;
                let mut chosen = n - 1;
                for (p, &d) in min_d.iter().enumerate() {
                    if draw < d {
                        chosen = p;
                        break;
                    }
                    draw -= d;
                }
                chosen
            } else {
                rng.gen_range(0..n)
            };
            let center = points[idx * dim..(idx + 1) * dim].to_vec();
            for p in 0..n {
                let d = dist_sq(p, &center);
                if d < min_d[p] {
                    min_d[p] = d;
                }
            }
            centers.push(center);
        }

        // Lloyd iterations.
        let mut labels = vec![0usize; n];
        for _ in 0..KMEANS_MAX_ITER {
            let mut changed = false;
            for p in 0..n {
                let mut best = 0;
                let mut best_d = dist_sq(p, &centers[0]);
                for (c, center) in centers.iter().enumerate().skip(1) {
                    let d = dist_sq(p, center);
                    if d < best_d {
                        best_d = d;
                        best = c;
                    }
                }
                if labels[p] != best {
                    labels[p] = best;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
            let mut sums = vec![vec![0.0; dim]; k];
            let mut counts = vec![0usize; k];
            for p in 0..n {
                counts[labels[p]] += 1;
                for d in 0..dim {
                    sums[labels[p]][d] += points[p * dim + d];
                }
            }
            for c in 0..k {
                if counts[c] > 0 {
                    for d in 0..dim {
                        centers[c][d] = sums[c][d] / counts[c] as f64;
                    }
                }
            }
        }
        let sse: f64 = (0..n).map(|p| dist_sq(p, &centers[labels[p]])).sum();
        if sse < best_sse {
            best_sse = sse;
            best_labels = labels;
        }
    }
    (best_labels, best_sse)
}

/// The spectral relaxation of the min-cut selection: the normalized
/// matrix, its leading eigenvalues, and the relaxed optimizer rows
/// (top-K eigenvector matrix) that k-means clusters.
#[derive(Debug, Clone)]
pub struct SpectralSolution {
    /// Number of nodes.
    pub n: usize,
    /// Number of requested clusters.
    pub k: usize,
    /// Dense `n × n` normalized adjacency `Ĉ`.
    pub normalized: Vec<f64>,
    /// Top-K eigenvalues in descending order.
    pub eigenvalues: Vec<f64>,
    /// Row-major `n × k` relaxed optimizer (top-K eigenvector columns).
    pub relaxed: Vec<f64>,
}

/// Solve the relaxed selection problem for `C_T` without rounding.
pub fn spectral_solution(c: &CurvatureAdjustedAdjacency, k: usize) -> Result<SpectralSolution> {
    let n = c.graph.node_count();
    if k < 2 || k > n {
        return Err(Error::Parameter(format!(
            "spectral selection needs 2 ≤ K ≤ {}, got K = {}",
            n, k
        )));
    }
    let normalized = normalized_adjacency(&c.dense(), n)?;
    let eigen = symmetric_eigen(&normalized, n)?;
    Ok(SpectralSolution {
        n,
        k,
        relaxed: eigen.top_k(k),
        eigenvalues: eigen.values[..k].to_vec(),
        normalized,
    })
}

/// Spectral selection: cluster the rows of the relaxed optimizer with
/// seeded k-means and return the hard assignment.
pub fn spectral_select(
    c: &CurvatureAdjustedAdjacency,
    k: usize,
    kmeans_restarts: usize,
    seed: u64,
) -> Result<Assignment> {
    let solution = spectral_solution(c, k)?;
    let (labels, _) = kmeans(&solution.relaxed, solution.n, k, k, kmeans_restarts, seed);
    Assignment::from_labels(&labels, k)
}

/// Round a soft assignment to a hard one by per-row argmax (ties to the
/// lower cluster index). Returns the hard assignment together with the
/// indices of clusters that received no node.
pub fn harden(s: &Assignment) -> Result<(Assignment, Vec<usize>)> {
    s.validate()?;
    let labels = s.labels();
    let hard = Assignment::from_labels(&labels, s.k)?;
    let mut seen = vec![false; s.k];
    for &c in &labels {
        seen[c] = true;
    }
    let empty: Vec<usize> = (0..s.k).filter(|&c| !seen[c]).collect();
    if !empty.is_empty() {
        warn!(
            "hardened assignment left {} of {} clusters empty: {:?}",
            empty.len(),
            s.k,
            empty
        );
    }
    Ok((hard, empty))
}

/// A pooled graph: supernodes, their summed attributes, the pooled
/// adjacency, and the assignment that produced it.
#[derive(Debug, Clone)]
pub struct CoarsenedGraph {
    /// The coarse graph. Superedges link supernodes with positive
    /// pooled mass; their weights are re-initialized from supernode
    /// attribute similarity when attributes exist, else 1. Pooled
    /// attributes `X^P = SᵀX` ride on this graph.
    pub graph: Graph,
    /// Dense `k × k` pooled adjacency `SᵀAS` including the diagonal.
    pub pooled_adjacency: Vec<f64>,
    /// Intra-cluster mass (the diagonal of `SᵀAS`), dropped from the
    /// coarse edge set but reported here.
    pub intra_cluster_mass: Vec<f64>,
    /// Number of supernodes after dropping empty clusters.
    pub k: usize,
    /// The (hard, relabeled after drops) assignment of input nodes to
    /// supernodes.
    pub assignment: Assignment,
}

/// Reduce attributes and reconnect: `X^P = SᵀX`, `A^P = SᵀAS` on the
/// original adjacency, diagonal mass dropped from the coarse edge set.
///
/// Clusters without any node are dropped with a warning and the
/// remaining clusters are renumbered in order.
pub fn reduce_and_connect(s: &Assignment, g: &Graph) -> Result<CoarsenedGraph> {
    s.validate()?;
    if !s.hard {
        return Err(Error::Parameter(
            "reduction needs a hard (or hardened) assignment".to_string(),
        ));
    }
    if s.n != g.node_count() {
        return Err(Error::Parameter(format!(
            "assignment has {} rows but the graph has {} nodes",
            s.n,
            g.node_count()
        )));
    }
    let labels = s.labels();
    let mut counts = vec![0usize; s.k];
    for &c in &labels {
        counts[c] += 1;
    }
    let mut remap = vec![usize::MAX; s.k];
    let mut k_eff = 0;
    for c in 0..s.k {
        if counts[c] > 0 {
            remap[c] = k_eff;
            k_eff += 1;
        }
    }
    if k_eff < s.k {
        warn!(
            "dropping {} empty supernodes ({} remain)",
            s.k - k_eff,
            k_eff
        );
    }
    let coarse_labels: Vec<usize> = labels.iter().map(|&c| remap[c]).collect();

    // Pooled adjacency: every ordered incidence of an edge lands in its
    // cluster bucket, so the total mass of SᵀAS equals the total mass
    // of A before the diagonal is removed.
    let mut pooled = vec![0.0; k_eff * k_eff];
    for e in g.edges() {
        let cu = coarse_labels[e.u];
        let cv = coarse_labels[e.v];
        pooled[cu * k_eff + cv] += e.w;
        pooled[cv * k_eff + cu] += e.w;
    }
    let intra: Vec<f64> = (0..k_eff).map(|c| pooled[c * k_eff + c]).collect();

    let mut coarse_edges = Vec::new();
    for a in 0..k_eff {
        for b in (a + 1)..k_eff {
            if pooled[a * k_eff + b] > 0.0 {
                coarse_edges.push((a, b, 1.0));
            }
        }
    }
    let pooled_attributes = g.attributes().map(|attrs| {
        let m = attrs[0].len();
        let mut xp = vec![vec![0.0; m]; k_eff];
        for (v, row) in attrs.iter().enumerate() {
            let c = coarse_labels[v];
            for (d, &x) in row.iter().enumerate() {
                xp[c][d] += x;
            }
        }
        xp
    });
    let mut coarse = build_graph(&coarse_edges, k_eff, pooled_attributes)?;
    if coarse.attributes().is_some() && coarse.edge_count() > 0 {
        coarse = attribute_similarity_weights(&coarse)?;
    }
    let assignment = Assignment::from_labels(&coarse_labels, k_eff)?;
    Ok(CoarsenedGraph {
        graph: coarse,
        pooled_adjacency: pooled,
        intra_cluster_mass: intra,
        k: k_eff,
        assignment,
    })
}

/// Which selection solver [`pool`] runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PoolMode {
    /// Eigenvectors plus k-means.
    #[default]
    Spectral,
    /// Gradient-trained soft assignment, hardened.
    Trained,
}

impl PoolMode {
    /// Lowercase name for reports and CLI flags.
    pub fn as_str(self) -> &'static str {
        match self {
            PoolMode::Spectral => "spectral",
            PoolMode::Trained => "trained",
        }
    }
}

/// Tuning for the full pooling pipeline.
#[derive(Debug, Clone)]
pub struct PoolConfig {
    /// Seed for selection randomness (k-means or training init).
    pub seed: u64,
    /// k-means restarts in spectral mode.
    pub kmeans_restarts: usize,
    /// Flow options used to build the curvature-adjusted adjacency.
    pub flow: FlowOptions,
    /// Training epochs in trained mode.
    pub epochs: usize,
    /// Learning rate in trained mode.
    pub lr: f64,
    /// Feature construction in trained mode.
    pub features: FeatureMode,
}

impl Default for PoolConfig {
    fn default() -> Self {
        PoolConfig {
            seed: 0,
            kmeans_restarts: DEFAULT_KMEANS_RESTARTS,
            flow: FlowOptions::default(),
            epochs: 500,
            lr: train::DEFAULT_LEARNING_RATE,
            features: FeatureMode::Auto,
        }
    }
}

/// The full operator: run `t` flow iterations, select `k` supernodes in
/// the chosen mode, then reduce and connect. `k = 1` needs no solver —
/// everything lands in one supernode.
pub fn pool(
    g: &Graph,
    k: usize,
    t: usize,
    mode: PoolMode,
    config: &PoolConfig,
) -> Result<CoarsenedGraph> {
    if k < 1 {
        return Err(Error::Parameter(
            "pooling needs at least one target cluster".to_string(),
        ));
    }
    let (c, _) = ricci_flow(g, t, &config.flow)?;
    let assignment = if k == 1 {
        Assignment::from_labels(&vec![0; g.node_count()], 1)?
    } else {
        match mode {
            PoolMode::Spectral => spectral_select(&c, k, config.kmeans_restarts, config.seed)?,
            PoolMode::Trained => {
                let (soft, _) = train_soft_assignment_with_features(
                    g,
                    &c,
                    k,
                    config.epochs,
                    config.lr,
                    config.seed,
                    config.features,
                )?;
                let (hard, _) = harden(&soft)?;
                hard
            }
        }
    };
    reduce_and_connect(&assignment, g)
}

/// Pool repeatedly through a strictly decreasing sequence of target
/// sizes, re-running the flow on each coarse graph.
pub fn hierarchical_pool(
    g: &Graph,
    ks: &[usize],
    t: usize,
    mode: PoolMode,
    config: &PoolConfig,
) -> Result<Vec<CoarsenedGraph>> {
    if ks.is_empty() {
        return Err(Error::Parameter(
            "hierarchical pooling needs at least one level".to_string(),
        ));
    }
    for w in ks.windows(2) {
        if w[1] >= w[0] {
            return Err(Error::Parameter(format!(
                "cluster counts must strictly decrease, got {} then {}",
                w[0], w[1]
            )));
        }
    }
    if ks[ks.len() - 1] < 1 {
        return Err(Error::Parameter(
            "every level needs at least one cluster".to_string(),
        ));
    }
    let mut levels = Vec::with_capacity(ks.len());
    let mut current = g.clone();
    for &k in ks {
        let coarse = pool(&current, k, t, mode, config)?;
        current = coarse.graph.clone();
        levels.push(coarse);
    }
    Ok(levels)
}
