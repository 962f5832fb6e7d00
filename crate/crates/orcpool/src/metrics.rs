//! Clustering quality measures: weighted modularity and normalized
//! mutual information.
//!
//! Modularity compares intra-cluster edge mass against a
//! degree-preserving null model. Two pair-counting conventions are
//! exposed: the *ordered* convention (standard Newman–Girvan, summing
//! over ordered node pairs so every edge contributes twice and the
//! diagonal null terms are included) and the *unordered* convention
//! (each unordered pair counted once, no self-pairs), which matches the
//! edge accounting used by the closed-form model analysis in
//! [`crate::theory`].
//!
//! NMI likewise comes in two variants: *standard* (mutual information
//! over the arithmetic mean of the entropies, natural log — always in
//! [0, 1]) and the *conditional-entropy* form `1 − ½(H(S|S′) + H(S′|S))`
//! with entropies in bits, which is only bounded above by 1 and can
//! leave [0, 1] for unbalanced partitions. Defaults are the standard
//! convention in each case.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::graph::Graph;
use crate::{Error, Result};

/// Pair-counting convention for modularity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ModularityConvention {
    /// Sum over ordered pairs, diagonal null terms included
    /// (Newman–Girvan; Σw is twice the total edge weight).
    #[default]
    Ordered,
    /// Sum each unordered pair once, self-pairs excluded (the model
    /// analysis convention; Σw is the total edge weight).
    Unordered,
}

impl ModularityConvention {
    /// Lowercase name used in reports and CLI flags.
    pub fn as_str(self) -> &'static str {
        match self {
            ModularityConvention::Ordered => "ordered",
            ModularityConvention::Unordered => "unordered",
        }
    }
}

/// Normalization variant for NMI.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NmiVariant {
    /// Mutual information normalized by the arithmetic mean of the two
    /// entropies, natural log. Always in [0, 1].
    #[default]
    Standard,
    /// `1 − ½(H(S|S′) + H(S′|S))` with entropies in bits. Bounded above
    /// by 1 but not below by 0.
    ConditionalEntropy,
}

impl NmiVariant {
    /// Lowercase name used in reports and CLI flags.
    pub fn as_str(self) -> &'static str {
        match self {
            NmiVariant::Standard => "standard",
            NmiVariant::ConditionalEntropy => "conditional-entropy",
        }
    }
}

/// A computed metric with enough context to be interpreted on its own.
#[derive(Debug, Clone, Serialize)]
pub struct MetricReport {
    /// Which measure was computed ("modularity" or "nmi").
    pub metric: String,
    /// The value.
    pub value: f64,
    /// Convention or variant the value was computed under.
    pub convention: String,
    /// Free-form description of the inputs (file names, generator).
    pub inputs: String,
}

/// Weighted modularity of a labeled partition of `g`.
///
/// Ordered convention: `Q = (1/D) Σ_{u,v} (w_uv − d_u d_v / D) δ(c_u, c_v)`
/// over ordered pairs including `u = v`, with `D = Σ_v d_v`. Unordered
/// convention: `Q = (1/W) Σ_{u<v} (w_uv − d_u d_v / W) δ(c_u, c_v)` with
/// `W` the total edge weight and no self-pairs.
pub fn modularity(g: &Graph, labels: &[usize], convention: ModularityConvention) -> Result<f64> {
    let n = g.node_count();
    if labels.len() != n {
        return Err(Error::Parameter(format!(
            "labels length {} does not match node count {}",
            labels.len(),
            n
        )));
    }
    let total: f64 = g.edges().iter().map(|e| e.w).sum();
    if total <= 0.0 {
        return Err(Error::Parameter(
            "modularity is undefined on a graph with no edge weight".to_string(),
        ));
    }
    let degrees = g.strengths();
    match convention {
        ModularityConvention::Ordered => {
            // Edge term over ordered pairs: each edge twice.
            let d_total = 2.0 * total;
            let mut edge_mass = 0.0;
            for e in g.edges() {
                if labels[e.u] == labels[e.v] {
                    edge_mass += 2.0 * e.w;
                }
            }
            // Null term over ordered pairs including the diagonal:
            // Σ_{c} (Σ_{u∈c} d_u)² / D.
            let mut cluster_degree: BTreeMap<usize, f64> = BTreeMap::new();
            for (v, &c) in labels.iter().enumerate() {
                *cluster_degree.entry(c).or_insert(0.0) += degrees[v];
            }
            let null: f64 = cluster_degree.values().map(|&d| d * d / d_total).sum();
            Ok((edge_mass - null) / d_total)
        }
        ModularityConvention::Unordered => {
            let mut edge_mass = 0.0;
            for e in g.edges() {
                if labels[e.u] == labels[e.v] {
                    edge_mass += e.w;
                }
            }
            // Null term over unordered same-cluster pairs u < v:
            // Σ_{u<v, same} d_u d_v = Σ_c ((Σd)² − Σd²)/2.
            let mut cluster_degree: BTreeMap<usize, f64> = BTreeMap::new();
            let mut cluster_degree_sq: BTreeMap<usize, f64> = BTreeMap::new();
            for (v, &c) in labels.iter().enumerate() {
                *cluster_degree.entry(c).or_insert(0.0) += degrees[v];
                *cluster_degree_sq.entry(c).or_insert(0.0) += degrees[v] * degrees[v];
            }
            let mut null = 0.0;
            for (c, &d) in &cluster_degree {
                null += (d * d - cluster_degree_sq[c]) / 2.0 / total;
            }
            Ok((edge_mass - null) / total)
        }
    }
}

fn entropy_nats(counts: &BTreeMap<usize, usize>, n: f64) -> f64 {
    counts
        .values()
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum()
}

/// Normalized mutual information between two label vectors.
///
/// Cluster ids need not be contiguous; only the induced partitions
/// matter. Two partitions that are both trivial (single cluster each)
/// are identical up to relabeling and score 1.0.
pub fn nmi(p1: &[usize], p2: &[usize], variant: NmiVariant) -> Result<f64> {
    if p1.len() != p2.len() {
        return Err(Error::Parameter(format!(
            "partition lengths differ: {} vs {}",
            p1.len(),
            p2.len()
        )));
    }
    if p1.is_empty() {
        return Err(Error::Parameter(
            "NMI is undefined on empty partitions".to_string(),
        ));
    }
    let n = p1.len() as f64;
    let mut joint: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    let mut m1: BTreeMap<usize, usize> = BTreeMap::new();
    let mut m2: BTreeMap<usize, usize> = BTreeMap::new();
    for (&a, &b) in p1.iter().zip(p2) {
        *joint.entry((a, b)).or_insert(0) += 1;
        *m1.entry(a).or_insert(0) += 1;
        *m2.entry(b).or_insert(0) += 1;
    }
    let h1 = entropy_nats(&m1, n);
    let h2 = entropy_nats(&m2, n);
    let mut joint_entropy = 0.0;
    let mut mutual = 0.0;
    for (&(a, b), &c) in &joint {
        let p = c as f64 / n;
        joint_entropy -= p * p.ln();
        let pa = m1[&a] as f64 / n;
        let pb = m2[&b] as f64 / n;
        mutual += p * (p / (pa * pb)).ln();
    }
    match variant {
        NmiVariant::Standard => {
            let mean = 0.5 * (h1 + h2);
            if mean == 0.0 {
                // Both partitions are single clusters: identical.
                return Ok(1.0);
            }
            // Clamp away the tiny negative round-off MI can pick up.
            Ok((mutual / mean).clamp(0.0, 1.0))
        }
        NmiVariant::ConditionalEntropy => {
            // H(S|S′) = H(S,S′) − H(S′), converted to bits.
            let cond1 = (joint_entropy - h2) / std::f64::consts::LN_2;
            let cond2 = (joint_entropy - h1) / std::f64::consts::LN_2;
            Ok(1.0 - 0.5 * (cond1 + cond2))
        }
    }
}

/// Package a modularity value as a [`MetricReport`].
pub fn modularity_report(
    g: &Graph,
    labels: &[usize],
    convention: ModularityConvention,
    inputs: &str,
) -> Result<MetricReport> {
    Ok(MetricReport {
        metric: "modularity".to_string(),
        value: modularity(g, labels, convention)?,
        convention: convention.as_str().to_string(),
        inputs: inputs.to_string(),
    })
}

/// Package an NMI value as a [`MetricReport`].
pub fn nmi_report(
    p1: &[usize],
    p2: &[usize],
    variant: NmiVariant,
    inputs: &str,
) -> Result<MetricReport> {
    Ok(MetricReport {
        metric: "nmi".to_string(),
        value: nmi(p1, p2, variant)?,
        convention: variant.as_str().to_string(),
        inputs: inputs.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_graph, generate_sbm};
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn two_triangles() -> Graph {
        build_graph(
            &[
                (0, 1, 1.0),
                (1, 2, 1.0),
                (0, 2, 1.0),
                (3, 4, 1.0),
                (4, 5, 1.0),
                (3, 5, 1.0),
            ],
            6,
            None,
        )
        .unwrap()
    }

    #[test]
    fn two_triangles_component_labels_score_half() {
        let g = two_triangles();
        let labels = [0, 0, 0, 1, 1, 1];
        let q = modularity(&g, &labels, ModularityConvention::Ordered).unwrap();
        assert_abs_diff_eq!(q, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn two_triangles_unordered_convention() {
        // Per cluster: 3 unit edges minus null 3·(2·2)/6 over pairs,
        // so Q = (6 − 2·Σ_{u<v} d_u d_v / W) / W = (6 − 4)/6 = 1/3.
        let g = two_triangles();
        let labels = [0, 0, 0, 1, 1, 1];
        let q = modularity(&g, &labels, ModularityConvention::Unordered).unwrap();
        assert_abs_diff_eq!(q, 1.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn single_edge_in_one_cluster_scores_zero() {
        let g = build_graph(&[(0, 1, 1.0)], 2, None).unwrap();
        let q = modularity(&g, &[0, 0], ModularityConvention::Ordered).unwrap();
        assert_abs_diff_eq!(q, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn singletons_score_negative() {
        let g = build_graph(&[(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)], 3, None).unwrap();
        let q = modularity(&g, &[0, 1, 2], ModularityConvention::Ordered).unwrap();
        // Only the diagonal null terms survive: −3·(2/6)² = −1/3.
        assert_abs_diff_eq!(q, -1.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn dyadic_weight_scaling_is_exact() {
        let (g, labels, _) = generate_sbm(&[8, 8], 0.8, 0.1, 11).unwrap();
        let q = modularity(&g, &labels, ModularityConvention::Ordered).unwrap();
        for c in [2.0, 0.5, 1024.0] {
            let scaled: Vec<f64> = g.edge_weights().iter().map(|w| w * c).collect();
            let gc = g.with_edge_weights(&scaled).unwrap();
            let qc = modularity(&gc, &labels, ModularityConvention::Ordered).unwrap();
            assert_eq!(q, qc, "scaling by {} changed modularity", c);
            let qu = modularity(&g, &labels, ModularityConvention::Unordered).unwrap();
            let quc = modularity(&gc, &labels, ModularityConvention::Unordered).unwrap();
            assert_eq!(qu, quc);
        }
        // Non-dyadic factors hit rounding, so the equality is only
        // near-exact there.
        let scaled: Vec<f64> = g.edge_weights().iter().map(|w| w * 3.7).collect();
        let gc = g.with_edge_weights(&scaled).unwrap();
        let qc = modularity(&gc, &labels, ModularityConvention::Ordered).unwrap();
        assert_abs_diff_eq!(q, qc, epsilon = 1e-12);
    }

    #[test]
    fn label_length_mismatch_is_a_parameter_error() {
        let g = build_graph(&[(0, 1, 1.0)], 2, None).unwrap();
        assert!(modularity(&g, &[0], ModularityConvention::Ordered).is_err());
    }

    #[test]
    fn identical_partitions_score_one_in_both_variants() {
        let p = [0usize, 0, 1, 1, 2, 2];
        assert_abs_diff_eq!(nmi(&p, &p, NmiVariant::Standard).unwrap(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(nmi(&p, &p, NmiVariant::ConditionalEntropy).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn label_swap_scores_one() {
        let p1 = [0usize, 0, 1, 1];
        let p2 = [1usize, 1, 0, 0];
        assert_abs_diff_eq!(nmi(&p1, &p2, NmiVariant::Standard).unwrap(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(nmi(&p1, &p2, NmiVariant::ConditionalEntropy).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn independent_partitions_score_zero() {
        // Joint distribution equals the product of marginals, so the
        // mutual information vanishes; in the conditional-entropy form
        // both conditionals are a full bit.
        let p1 = [0usize, 0, 1, 1];
        let p2 = [0usize, 1, 0, 1];
        assert_abs_diff_eq!(nmi(&p1, &p2, NmiVariant::Standard).unwrap(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(nmi(&p1, &p2, NmiVariant::ConditionalEntropy).unwrap(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn trivial_partitions_take_the_convention_values() {
        let flat = [7usize, 7, 7, 7];
        let split = [0usize, 1, 0, 1];
        assert_abs_diff_eq!(nmi(&flat, &flat, NmiVariant::Standard).unwrap(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(nmi(&flat, &split, NmiVariant::Standard).unwrap(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn nmi_is_symmetric_and_bounded_on_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..100 {
            let n = rng.gen_range(2..40);
            let k1 = rng.gen_range(1..5usize);
            let k2 = rng.gen_range(1..5usize);
            let p1: Vec<usize> = (0..n).map(|_| rng.gen_range(0..k1)).collect();
            let p2: Vec<usize> = (0..n).map(|_| rng.gen_range(0..k2)).collect();
            for variant in [NmiVariant::Standard, NmiVariant::ConditionalEntropy] {
                let ab = nmi(&p1, &p2, variant).unwrap();
                let ba = nmi(&p2, &p1, variant).unwrap();
                assert_abs_diff_eq!(ab, ba, epsilon = 1e-12);
                assert!(ab <= 1.0 + 1e-12);
                if variant == NmiVariant::Standard {
                    assert!(ab >= 0.0);
                }
            }
        }
    }

    #[test]
    fn nmi_ignores_cluster_relabeling() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let p1: Vec<usize> = (0..30).map(|_| rng.gen_range(0..4usize)).collect();
        let p2: Vec<usize> = (0..30).map(|_| rng.gen_range(0..3usize)).collect();
        let relabeled: Vec<usize> = p2.iter().map(|&c| [9, 2, 5][c]).collect();
        for variant in [NmiVariant::Standard, NmiVariant::ConditionalEntropy] {
            assert_abs_diff_eq!(
                nmi(&p1, &p2, variant).unwrap(),
                nmi(&p1, &relabeled, variant).unwrap(),
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn nmi_rejects_mismatched_or_empty_inputs() {
        assert!(nmi(&[0, 1], &[0], NmiVariant::Standard).is_err());
        assert!(nmi(&[], &[], NmiVariant::Standard).is_err());
    }

    #[test]
    fn reports_carry_convention_and_inputs() {
        let g = two_triangles();
        let labels = [0, 0, 0, 1, 1, 1];
        let r = modularity_report(&g, &labels, ModularityConvention::Ordered, "planted").unwrap();
        assert_eq!(r.metric, "modularity");
        assert_eq!(r.convention, "ordered");
        let json = serde_json::to_string(&r).unwrap();
        assert!(json.contains("\"value\":0.5"));
        assert!(json.contains("\"inputs\":\"planted\""));
    }
}
