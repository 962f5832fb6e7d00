//! Graph representation, synthetic generators, and shortest-path machinery.
//!
//! A [`Graph`] is an undirected, weighted, optionally attributed graph in
//! compressed sparse form. Edges are stored once under the canonical key
//! `(min(u, v), max(u, v))`, sorted lexicographically, so every routine in
//! this crate sees edges in the same deterministic order.
//!
//! Generators:
//!
//! * [`generate_gab`] — the hub-connected clique family `G_{a,b}`: `b`
//!   cliques of `a + 1` nodes whose designated hubs form a `K_b`.
//! * [`generate_sbm`] — a seeded two-parameter stochastic block model.
//! * [`generate_dumbbell`] — two cliques joined by disjoint bridge edges.
//!
//! Shortest paths use Dijkstra's algorithm with optional radius truncation;
//! [`attribute_similarity_weights`] re-initializes edge weights from node
//! attributes.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

/// Default tolerance for deciding that two real-valued attribute
/// coordinates differ (see [`attribute_similarity_weights`]).
pub const DEFAULT_ATTRIBUTE_TOLERANCE: f64 = 1e-9;

/// One undirected edge in canonical orientation (`u < v`) with a strictly
/// positive weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    /// Smaller endpoint.
    pub u: usize,
    /// Larger endpoint.
    pub v: usize,
    /// Edge weight, strictly positive.
    pub w: f64,
}

/// An undirected, weighted, optionally attributed graph.
///
/// Immutable after construction; all mutating pipelines (Ricci flow,
/// pooling) produce new graphs. Edges are stored canonically: `u < v`,
/// sorted by `(u, v)`, and the per-node adjacency lists reference edges by
/// index so edge-parallel algorithms can write results positionally.
#[derive(Debug, Clone)]
pub struct Graph {
    n: usize,
    edges: Vec<Edge>,
    /// adjacency[v] = sorted list of (neighbor, edge index).
    adj: Vec<Vec<(usize, usize)>>,
    attributes: Option<Vec<Vec<f64>>>,
    labels: Option<Vec<usize>>,
}

impl Graph {
    /// Number of nodes.
    pub fn node_count(&self) -> usize {
        self.n
    }

    /// Number of undirected edges.
    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// All edges in canonical order (`u < v`, sorted by `(u, v)`).
    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Neighbors of `v` as `(neighbor, edge index)`, sorted by neighbor id.
    pub fn neighbors(&self, v: usize) -> &[(usize, usize)] {
        &self.adj[v]
    }

    /// Unweighted degree (number of incident edges).
    pub fn degree(&self, v: usize) -> usize {
        self.adj[v].len()
    }

    /// Weighted degree: sum of incident edge weights.
    pub fn strength(&self, v: usize) -> f64 {
        self.adj[v].iter().map(|&(_, e)| self.edges[e].w).sum()
    }

    /// Weighted degrees of all nodes.
    pub fn strengths(&self) -> Vec<f64> {
        (0..self.n).map(|v| self.strength(v)).collect()
    }

    /// Index and weight of the edge joining `u` and `v`, if present.
    pub fn edge_index(&self, u: usize, v: usize) -> Option<(usize, f64)> {
        if u >= self.n || v >= self.n {
            return None;
        }
        self.adj[u]
            .iter()
            .find(|&&(nbr, _)| nbr == v)
            .map(|&(_, e)| (e, self.edges[e].w))
    }

    /// Node attribute matrix (one row per node), if present.
    pub fn attributes(&self) -> Option<&[Vec<f64>]> {
        self.attributes.as_deref()
    }

    /// Ground-truth node labels, if present.
    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    /// Attach ground-truth labels (one per node).
    pub fn with_labels(mut self, labels: Vec<usize>) -> Result<Self> {
        if labels.len() != self.n {
            return Err(Error::Validation(format!(
                "label vector has {} entries but graph has {} nodes",
                labels.len(),
                self.n
            )));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    /// Attach a node attribute matrix (one row per node, rectangular).
    pub fn with_attributes(mut self, attributes: Vec<Vec<f64>>) -> Result<Self> {
        validate_attributes(&attributes, self.n)?;
        self.attributes = Some(attributes);
        Ok(self)
    }

    /// A copy of this graph with the same structure, attributes, and labels
    /// but new edge weights (given in canonical edge order).
    pub fn with_edge_weights(&self, weights: &[f64]) -> Result<Self> {
        if weights.len() != self.edges.len() {
            return Err(Error::Validation(format!(
                "weight vector has {} entries but graph has {} edges",
                weights.len(),
                self.edges.len()
            )));
        }
        for (i, &w) in weights.iter().enumerate() {
            if !(w > 0.0) {
                return Err(Error::Validation(format!(
                    "nonpositive weight {} for edge ({}, {})",
                    w, self.edges[i].u, self.edges[i].v
                )));
            }
        }
        let mut out = self.clone();
        for (e, &w) in out.edges.iter_mut().zip(weights) {
            e.w = w;
        }
        Ok(out)
    }

    /// Edge weights in canonical edge order.
    pub fn edge_weights(&self) -> Vec<f64> {
        self.edges.iter().map(|e| e.w).collect()
    }

    /// Dense symmetric adjacency matrix, row-major `n × n`.
    pub fn dense_adjacency(&self) -> Vec<f64> {
        let n = self.n;
        let mut a = vec![0.0; n * n];
        for e in &self.edges {
            a[e.u * n + e.v] = e.w;
            a[e.v * n + e.u] = e.w;
        }
        a
    }
}

fn validate_attributes(attributes: &[Vec<f64>], n: usize) -> Result<()> {
    if attributes.len() != n {
        return Err(Error::Validation(format!(
            "attribute matrix has {} rows but graph has {} nodes",
            attributes.len(),
            n
        )));
    }
    if let Some(first) = attributes.first() {
        let m = first.len();
        for (i, row) in attributes.iter().enumerate() {
            if row.len() != m {
                return Err(Error::Validation(format!(
                    "attribute row {} has {} columns, expected {}",
                    i,
                    row.len(),
                    m
                )));
            }
        }
    }
    Ok(())
}

/// Build a graph from an edge list.
///
/// Edges may be given in either orientation; they are stored canonically
/// (`min, max`) and sorted. Self-loops, nonpositive weights, out-of-range
/// endpoints, and duplicate undirected edges are rejected with an error
/// naming the offending edge.
pub fn build_graph(
    edges: &[(usize, usize, f64)],
    n: usize,
    attributes: Option<Vec<Vec<f64>>>,
) -> Result<Graph> {
    let mut canon: Vec<Edge> = Vec::with_capacity(edges.len());
    for &(u, v, w) in edges {
        if u >= n || v >= n {
            return Err(Error::Validation(format!(
                "edge ({}, {}) references a node outside 0..{}",
                u, v, n
            )));
        }
        if u == v {
            return Err(Error::Validation(format!("self-loop at node {}", u)));
        }
        if !(w > 0.0) || !w.is_finite() {
            return Err(Error::Validation(format!(
                "nonpositive or non-finite weight {} on edge ({}, {})",
                w, u, v
            )));
        }
        let (a, b) = if u < v { (u, v) } else { (v, u) };
        canon.push(Edge { u: a, v: b, w });
    }
    canon.sort_by(|x, y| (x.u, x.v).cmp(&(y.u, y.v)));
    for pair in canon.windows(2) {
        if pair[0].u == pair[1].u && pair[0].v == pair[1].v {
            return Err(Error::Validation(format!(
                "duplicate undirected edge ({}, {})",
                pair[0].u, pair[0].v
            )));
        }
    }

    let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    for (i, e) in canon.iter().enumerate() {
        adj[e.u].push((e.v, i));
        adj[e.v].push((e.u, i));
    }
    for list in &mut adj {
        list.sort_unstable_by_key(|&(nbr, _)| nbr);
    }

    if let Some(ref attrs) = attributes {
        validate_attributes(attrs, n)?;
    }

    Ok(Graph {
        n,
        edges: canon,
        adj,
        attributes,
        labels: None,
    })
}

/// Generate the hub-connected clique family `G_{a,b}`: `b` cliques of
/// `a + 1` nodes, one designated hub per clique, hubs pairwise connected.
///
/// Nodes `c(a+1) .. (c+1)(a+1)` form clique `c`; its hub is the first of
/// them. All weights are 1. Returns the graph, per-node cluster labels,
/// and per-edge types in canonical edge order:
///
/// * type 1 — hub–hub bridge (`b(b−1)/2` edges),
/// * type 2 — hub–internal edge inside a clique (`ab` edges),
/// * type 3 — internal–internal edge inside a clique (`a(a−1)b/2` edges).
///
/// Requires `a ≥ b ≥ 2`.
pub fn generate_gab(a: usize, b: usize) -> Result<(Graph, Vec<usize>, Vec<u8>)> {
    if b < 2 || a < b {
        return Err(Error::Parameter(format!(
            "model family requires a >= b >= 2, got a={}, b={}",
            a, b
        )));
    }
    let n = b * (a + 1);
    let mut edges = Vec::new();
    // Intra-clique edges.
    for c in 0..b {
        let lo = c * (a + 1);
        let hi = lo + a + 1;
        for u in lo..hi {
            for v in (u + 1)..hi {
                edges.push((u, v, 1.0));
            }
        }
    }
    // Hub bridges.
    for c in 0..b {
        for d in (c + 1)..b {
            edges.push((c * (a + 1), d * (a + 1), 1.0));
        }
    }
    let labels: Vec<usize> = (0..n).map(|v| v / (a + 1)).collect();
    let g = build_graph(&edges, n, None)?.with_labels(labels.clone())?;

    let is_hub = |v: usize| v % (a + 1) == 0;
    let types: Vec<u8> = g
        .edges()
        .iter()
        .map(|e| match (is_hub(e.u), is_hub(e.v)) {
            (true, true) => 1,
            (true, false) | (false, true) => 2,
            (false, false) => 3,
        })
        .collect();
    Ok((g, labels, types))
}

/// Sample a stochastic block model: intra-block pairs are connected with
/// probability `p_in`, inter-block pairs with `p_out`, all weights 1.
///
/// Deterministic given `seed`. Returns the graph, per-node block labels,
/// and the (possibly empty) list of isolated nodes as a diagnostic;
/// isolated nodes are permitted but worth knowing about because curvature
/// is only defined on edges.
///
/// Requires `0 ≤ p_out ≤ p_in ≤ 1` and a nonempty list of positive block
/// sizes.
pub fn generate_sbm(
    block_sizes: &[usize],
    p_in: f64,
    p_out: f64,
    seed: u64,
) -> Result<(Graph, Vec<usize>, Vec<usize>)> {
    if block_sizes.is_empty() {
        return Err(Error::Parameter("block size list is empty".into()));
    }
    if block_sizes.iter().any(|&s| s == 0) {
        return Err(Error::Parameter("block sizes must be positive".into()));
    }
    if !(0.0..=1.0).contains(&p_out) || !(0.0..=1.0).contains(&p_in) || p_out > p_in {
        return Err(Error::Parameter(format!(
            "probabilities must satisfy 0 <= p_out <= p_in <= 1, got p_in={}, p_out={}",
            p_in, p_out
        )));
    }
    let n: usize = block_sizes.iter().sum();
    let mut labels = Vec::with_capacity(n);
    for (block, &size) in block_sizes.iter().enumerate() {
        labels.extend(std::iter::repeat(block).take(size));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for u in 0..n {
        for v in (u + 1)..n {
            let p = if labels[u] == labels[v] { p_in } else { p_out };
            if rng.gen::<f64>() < p {
                edges.push((u, v, 1.0));
            }
        }
    }
    let g = build_graph(&edges, n, None)?.with_labels(labels.clone())?;
    let isolated: Vec<usize> = (0..n).filter(|&v| g.degree(v) == 0).collect();
    if !isolated.is_empty() {
        log::warn!(
            "stochastic block model produced {} isolated node(s): {:?}",
            isolated.len(),
            isolated
        );
    }
    Ok((g, labels, isolated))
}

/// Generate a dumbbell: two cliques of `clique_size` nodes joined by
/// `bridge_count` disjoint bridge edges, all weights 1.
///
/// Nodes `0..clique_size` form the first clique, the rest the second;
/// bridge `i` joins node `i` to node `clique_size + i`. Labels give clique
/// membership. Requires `clique_size ≥ 2` and
/// `1 ≤ bridge_count ≤ clique_size`.
pub fn generate_dumbbell(clique_size: usize, bridge_count: usize) -> Result<(Graph, Vec<usize>)> {
    if clique_size < 2 {
        return Err(Error::Parameter(format!(
            "clique size must be at least 2, got {}",
            clique_size
        )));
    }
    if bridge_count == 0 || bridge_count > clique_size {
        return Err(Error::Parameter(format!(
            "bridge count must be in 1..={}, got {}",
            clique_size, bridge_count
        )));
    }
    let m = clique_size;
    let mut edges = Vec::new();
    for base in [0, m] {
        for u in 0..m {
            for v in (u + 1)..m {
                edges.push((base + u, base + v, 1.0));
            }
        }
    }
    for i in 0..bridge_count {
        edges.push((i, m + i, 1.0));
    }
    let labels: Vec<usize> = (0..2 * m).map(|v| v / m).collect();
    let g = build_graph(&edges, 2 * m, None)?.with_labels(labels.clone())?;
    Ok((g, labels))
}

#[derive(Copy, Clone, PartialEq)]
struct HeapEntry {
    dist: f64,
    node: usize,
}

impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        // Reversed: BinaryHeap is a max-heap, we want the closest node first.
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Single-source weighted shortest-path distances (Dijkstra).
///
/// Returns `node → distance` for every node reachable from `source`;
/// unreachable nodes are omitted, as is any node whose distance exceeds
/// `radius` when one is given. The source itself is always present with
/// distance 0.
pub fn shortest_path_distances(
    g: &Graph,
    source: usize,
    radius: Option<f64>,
) -> BTreeMap<usize, f64> {
    debug_assert!(source < g.node_count());
    let mut dist = vec![f64::INFINITY; g.node_count()];
    let mut out = BTreeMap::new();
    let mut heap = std::collections::BinaryHeap::new();
    dist[source] = 0.0;
    heap.push(HeapEntry {
        dist: 0.0,
        node: source,
    });
    while let Some(HeapEntry { dist: d, node: u }) = heap.pop() {
        if d > dist[u] {
            continue;
        }
        if let Some(r) = radius {
            if d > r {
                continue;
            }
        }
        out.insert(u, d);
        for &(v, e) in g.neighbors(u) {
            let nd = d + g.edges()[e].w;
            if nd < dist[v] {
                dist[v] = nd;
                heap.push(HeapEntry { dist: nd, node: v });
            }
        }
    }
    out
}

/// Weighted shortest-path distances from `source` to each of `targets`,
/// stopping as soon as every target is settled.
///
/// Unreachable targets get `f64::INFINITY`. Used to assemble ground
/// metrics over measure supports without exploring the whole graph.
pub(crate) fn shortest_paths_to_targets(g: &Graph, source: usize, targets: &[usize]) -> Vec<f64> {
    let mut dist = vec![f64::INFINITY; g.node_count()];
    let mut want = vec![false; g.node_count()];
    let mut remaining = 0usize;
    for &t in targets {
        if !want[t] {
            want[t] = true;
            remaining += 1;
        }
    }
    let mut heap = std::collections::BinaryHeap::new();
    dist[source] = 0.0;
    heap.push(HeapEntry {
        dist: 0.0,
        node: source,
    });
    while let Some(HeapEntry { dist: d, node: u }) = heap.pop() {
        if d > dist[u] {
            continue;
        }
        if want[u] {
            want[u] = false;
            remaining -= 1;
            if remaining == 0 {
                break;
            }
        }
        for &(v, e) in g.neighbors(u) {
            let nd = d + g.edges()[e].w;
            if nd < dist[v] {
                dist[v] = nd;
                heap.push(HeapEntry { dist: nd, node: v });
            }
        }
    }
    targets.iter().map(|&t| dist[t]).collect()
}

/// Re-initialize every edge weight from node-attribute similarity with the
/// default real-comparison tolerance of `1e-9`.
///
/// See [`attribute_similarity_weights_with_tolerance`].
pub fn attribute_similarity_weights(g: &Graph) -> Result<Graph> {
    attribute_similarity_weights_with_tolerance(g, DEFAULT_ATTRIBUTE_TOLERANCE)
}

/// Re-initialize every edge weight as `(1 + mismatches) / (m + 1)`, where
/// `mismatches` counts attribute coordinates of the two endpoints that
/// differ by more than `tolerance` and `m` is the attribute width.
///
/// The `+1` offset keeps weights strictly positive (minimum `1/(m+1)` for
/// identical attributes, maximum 1 when all coordinates differ), so the
/// result is still a metric-compatible weighting. Errors if the graph
/// carries no attributes.
pub fn attribute_similarity_weights_with_tolerance(g: &Graph, tolerance: f64) -> Result<Graph> {
    let attrs = g.attributes().ok_or_else(|| {
        Error::State("attribute-derived weights require node attributes".into())
    })?;
    let m = attrs.first().map_or(0, |row| row.len());
    let weights: Vec<f64> = g
        .edges()
        .iter()
        .map(|e| {
            let mismatches = attrs[e.u]
                .iter()
                .zip(&attrs[e.v])
                .filter(|(a, b)| (*a - *b).abs() > tolerance)
                .count();
            (1.0 + mismatches as f64) / (m as f64 + 1.0)
        })
        .collect();
    g.with_edge_weights(&weights)
}
