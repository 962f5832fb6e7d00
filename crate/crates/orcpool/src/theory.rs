//! Closed-form machinery for the hub-connected clique family and
//! numerical verification of its flow-dynamics claims.
//!
//! The family `G_{a,b}` (see [`crate::graph::generate_gab`]) has only
//! three edge types — hub–hub bridges, hub–internal spokes, and
//! internal–internal clique edges — and a linear model of the flow
//! update acts on the per-type weight vector `w = (w₁, w₂, w₃)` as
//! `w^{t+1} = F(a, b) · w^t`. This module builds `F`, its spectrum, the
//! analytic weight trajectory from `w⁰ = (1, 1, 1)`, and the analytic
//! modularity series of the natural clique partition, alongside an
//! empirical series that runs the real flow on the generated graph.
//!
//! Everything here reports rather than asserts: claim checks return
//! detailed pass/fail records with numeric evidence, so a claim that
//! fails numerically is surfaced instead of silently patched.

use serde::Serialize;

use crate::flow::{ricci_flow, FlowOptions};
use crate::graph::generate_gab;
use crate::metrics::{modularity, ModularityConvention};
use crate::{Error, Result};

fn check_parameters(a: usize, b: usize) -> Result<()> {
    if b < 2 || a < b {
        return Err(Error::Parameter(format!(
            "the clique family needs a ≥ b ≥ 2, got a = {}, b = {}",
            a, b
        )));
    }
    Ok(())
}

/// The 3×3 linear flow model `F(a, b)` acting on per-type weights
/// (bridge, spoke, clique-internal).
///
/// Every entry is an exact rational evaluated with a single floating
/// division, so hand-substituted tables match bitwise.
pub fn flow_matrix(a: usize, b: usize) -> Result<[[f64; 3]; 3]> {
    check_parameters(a, b)?;
    let af = a as f64;
    let bf = b as f64;
    let apb = (a + b) as f64;
    Ok([
        [(af - 1.0) / apb, 2.0 * af / apb, 0.0],
        [
            bf / apb,
            ((a * b - a - b) as f64) / ((a * (a + b)) as f64),
            1.0 / apb,
        ],
        [0.0, 0.0, 1.0 / af],
    ])
}

/// Per-type weight trajectory `w^t = F(a, b)^t · (1, 1, 1)ᵀ` for
/// `t = 0..=t_max`, by repeated multiplication.
///
/// The third component decays exactly geometrically: the last row of
/// `F` is `(0, 0, 1/a)`, so `w₃^t = (1/a)^t`.
pub fn analytic_weight_evolution(a: usize, b: usize, t_max: usize) -> Result<Vec<[f64; 3]>> {
    let f = flow_matrix(a, b)?;
    let mut out = Vec::with_capacity(t_max + 1);
    let mut w = [1.0f64, 1.0, 1.0];
    out.push(w);
    for _ in 0..t_max {
        let mut next = [0.0f64; 3];
        for (i, row) in f.iter().enumerate() {
            next[i] = row[0] * w[0] + row[1] * w[1] + row[2] * w[2];
        }
        w = next;
        out.push(w);
    }
    Ok(out)
}

/// The flow model with its full (real) spectrum.
///
/// `F` is block-triangular: the last row decouples and contributes the
/// eigenvalue `1/a`, while the upper-left 2×2 block has two real
/// eigenvalues (its off-diagonal product is positive, so the
/// discriminant cannot go negative).
#[derive(Debug, Clone, Serialize)]
pub struct TheoryModel {
    /// Clique size parameter (each clique has `a` internal nodes).
    pub a: usize,
    /// Number of cliques.
    pub b: usize,
    /// The flow matrix.
    pub f: [[f64; 3]; 3],
    /// Eigenvalues in descending order.
    pub eigenvalues: [f64; 3],
    /// Unit eigenvectors, `eigenvectors[i]` paired with
    /// `eigenvalues[i]`, first significant component positive.
    pub eigenvectors: [[f64; 3]; 3],
}

impl TheoryModel {
    /// Build the model for `a ≥ b ≥ 2`.
    pub fn new(a: usize, b: usize) -> Result<Self> {
        let f = flow_matrix(a, b)?;
        // Upper 2×2 block eigenvalues from the quadratic formula.
        let tr = f[0][0] + f[1][1];
        let det = f[0][0] * f[1][1] - f[0][1] * f[1][0];
        let disc = tr * tr - 4.0 * det;
        debug_assert!(disc >= 0.0, "block discriminant cannot be negative");
        let root = disc.sqrt();
        let lam_plus = 0.5 * (tr + root);
        let lam_minus = 0.5 * (tr - root);
        let lam_dec = 1.0 / a as f64;

        // Block eigenvectors live in the (w₁, w₂) plane; f₁₂ > 0 keeps
        // the leading component positive.
        let block_vector = |lam: f64| -> [f64; 3] {
            let v = [f[0][1], lam - f[0][0], 0.0];
            normalize(v)
        };
        // The decoupled eigenvalue's vector has a nonzero third
        // component; the same closed form covers the degenerate case
        // f₁₁ = 1/a (where the second component vanishes).
        let dec_vector = || -> [f64; 3] {
            let v1 = f[0][1];
            let v2 = lam_dec - f[0][0];
            let v3 = -(f[1][0] * v1 + (f[1][1] - lam_dec) * v2) / f[1][2];
            normalize([v1, v2, v3])
        };

        let mut pairs = [
            (lam_plus, block_vector(lam_plus)),
            (lam_dec, dec_vector()),
            (lam_minus, block_vector(lam_minus)),
        ];
        pairs.sort_by(|x, y| y.0.total_cmp(&x.0));
        Ok(TheoryModel {
            a,
            b,
            f,
            eigenvalues: [pairs[0].0, pairs[1].0, pairs[2].0],
            eigenvectors: [pairs[0].1, pairs[1].1, pairs[2].1],
        })
    }
}

fn normalize(v: [f64; 3]) -> [f64; 3] {
    let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    let mut out = [v[0] / norm, v[1] / norm, v[2] / norm];
    for &x in &out {
        if x.abs() > 1e-12 {
            if x < 0.0 {
                for y in &mut out {
                    *y = -*y;
                }
            }
            break;
        }
    }
    out
}

/// One verified claim with its numeric evidence.
#[derive(Debug, Clone, Serialize)]
pub struct ClaimCheck {
    /// Human-readable statement of the claim.
    pub claim: String,
    /// Whether the numbers support it.
    pub passed: bool,
    /// The observed values backing the verdict.
    pub evidence: String,
}

/// Outcome of checking the spectral claims for one `(a, b)`.
#[derive(Debug, Clone, Serialize)]
pub struct EigenstructureReport {
    /// Clique size parameter.
    pub a: usize,
    /// Number of cliques.
    pub b: usize,
    /// Eigenvalues in descending order.
    pub eigenvalues: [f64; 3],
    /// Per-claim verdicts with evidence.
    pub claims: Vec<ClaimCheck>,
    /// True only when every claim passed.
    pub all_passed: bool,
}

/// Numerically check the spectral claims for `F(a, b)`: the leading
/// eigenvalue exceeds 1, the middle one equals `1/a` (±1e−10), and the
/// trailing one is negative.
///
/// A failing claim is reported with evidence, never silently dropped —
/// some small parameter pairs genuinely violate the leading-eigenvalue
/// claim (for example `(3, 3)`, whose leading eigenvalue is ≈0.962).
pub fn verify_eigenstructure(a: usize, b: usize) -> Result<EigenstructureReport> {
    let model = TheoryModel::new(a, b)?;
    let [l1, l2, l3] = model.eigenvalues;
    let inv_a = 1.0 / a as f64;
    let claims = vec![
        ClaimCheck {
            claim: "leading eigenvalue exceeds 1".to_string(),
            passed: l1 > 1.0,
            evidence: format!("λ₁ = {:.12}", l1),
        },
        ClaimCheck {
            claim: "middle eigenvalue equals 1/a within 1e-10".to_string(),
            passed: (l2 - inv_a).abs() < 1e-10,
            evidence: format!("λ₂ = {:.12}, 1/a = {:.12}", l2, inv_a),
        },
        ClaimCheck {
            claim: "trailing eigenvalue is negative".to_string(),
            passed: l3 < 0.0,
            evidence: format!("λ₃ = {:.12}", l3),
        },
    ];
    let all_passed = claims.iter().all(|c| c.passed);
    Ok(EigenstructureReport {
        a,
        b,
        eigenvalues: model.eigenvalues,
        claims,
        all_passed,
    })
}

/// Where a modularity series comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeriesSource {
    /// Evaluate the closed-form per-type trajectory with the exact
    /// edge-count and degree formulas of the clique family.
    Analytic,
    /// Run the real flow on the generated graph and score the evolved
    /// weights (scale-free, so normalization does not matter).
    Empirical,
}

impl SeriesSource {
    /// Lowercase name for reports.
    pub fn as_str(self) -> &'static str {
        match self {
            SeriesSource::Analytic => "analytic",
            SeriesSource::Empirical => "empirical",
        }
    }
}

/// Unordered-convention modularity of the natural clique partition,
/// evaluated directly from per-type weights.
///
/// Counts: `b(b−1)/2` bridges, `ab` spokes, `ab(a−1)/2` clique-internal
/// edges. Degrees: hubs carry `(b−1)w₁ + a·w₂`, internals `w₂ +
/// (a−1)w₃`. Bridges cross the partition, so only spoke and internal
/// mass counts as intra-cluster.
fn analytic_partition_modularity(a: usize, b: usize, w: &[f64; 3]) -> f64 {
    let af = a as f64;
    let bf = b as f64;
    let n1 = bf * (bf - 1.0) / 2.0;
    let n2 = af * bf;
    let n3 = af * (af - 1.0) * bf / 2.0;
    let sigma = n1 * w[0] + n2 * w[1] + n3 * w[2];
    let intra = n2 * w[1] + n3 * w[2];
    let d_hub = (bf - 1.0) * w[0] + af * w[1];
    let d_int = w[1] + (af - 1.0) * w[2];
    let null = bf * (af * d_hub * d_int + af * (af - 1.0) / 2.0 * d_int * d_int);
    intra / sigma - null / (sigma * sigma)
}

/// Modularity of the natural clique partition along the flow,
/// `t = 0..=t_max`, from either the analytic trajectory or a real flow
/// run.
pub fn gab_modularity_series(
    a: usize,
    b: usize,
    t_max: usize,
    source: SeriesSource,
) -> Result<Vec<f64>> {
    check_parameters(a, b)?;
    if t_max < 1 {
        return Err(Error::Parameter(
            "the modularity series needs at least one flow step".to_string(),
        ));
    }
    match source {
        SeriesSource::Analytic => {
            let trajectory = analytic_weight_evolution(a, b, t_max)?;
            Ok(trajectory
                .iter()
                .map(|w| analytic_partition_modularity(a, b, w))
                .collect())
        }
        SeriesSource::Empirical => {
            let (g, labels, _) = generate_gab(a, b)?;
            let opts = FlowOptions {
                record_history: true,
                ..FlowOptions::default()
            };
            let (_, state) = ricci_flow(&g, t_max, &opts)?;
            let history = state.history.expect("history was requested");
            history
                .iter()
                .map(|weights| {
                    let gt = g.with_edge_weights(weights)?;
                    modularity(&gt, &labels, ModularityConvention::Unordered)
                })
                .collect()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn flow_matrix_matches_the_hand_table_at_3_3() {
        let f = flow_matrix(3, 3).unwrap();
        let expected = [
            [1.0 / 3.0, 1.0, 0.0],
            [0.5, 1.0 / 6.0, 1.0 / 6.0],
            [0.0, 0.0, 1.0 / 3.0],
        ];
        assert_eq!(f, expected);
    }

    #[test]
    fn flow_matrix_matches_the_hand_table_at_4_3() {
        let f = flow_matrix(4, 3).unwrap();
        let expected = [
            [3.0 / 7.0, 8.0 / 7.0, 0.0],
            [3.0 / 7.0, 5.0 / 28.0, 1.0 / 7.0],
            [0.0, 0.0, 0.25],
        ];
        assert_eq!(f, expected);
    }

    #[test]
    fn bottom_right_entry_is_the_reciprocal_of_a() {
        for a in 2..=10usize {
            for b in 2..=a {
                let f = flow_matrix(a, b).unwrap();
                assert_eq!(f[2][2], 1.0 / a as f64);
                assert_eq!(f[2][0], 0.0);
                assert_eq!(f[2][1], 0.0);
                assert_eq!(f[0][2], 0.0);
            }
        }
    }

    #[test]
    fn parameters_below_the_family_range_are_rejected() {
        assert!(flow_matrix(2, 3).is_err());
        assert!(flow_matrix(3, 1).is_err());
        assert!(gab_modularity_series(3, 3, 0, SeriesSource::Analytic).is_err());
    }

    #[test]
    fn evolution_starts_at_ones_and_matches_the_one_step_product() {
        let traj = analytic_weight_evolution(3, 3, 1).unwrap();
        assert_eq!(traj[0], [1.0, 1.0, 1.0]);
        assert_abs_diff_eq!(traj[1][0], 4.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(traj[1][1], 5.0 / 6.0, epsilon = 1e-15);
        assert_abs_diff_eq!(traj[1][2], 1.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn third_component_decays_exactly_geometrically() {
        for (a, b) in [(3usize, 3usize), (4, 3), (7, 2), (10, 10)] {
            let traj = analytic_weight_evolution(a, b, 30).unwrap();
            let step = 1.0 / a as f64;
            let mut expected = 1.0;
            for w in &traj {
                assert_eq!(w[2], expected, "third component drifted at ({}, {})", a, b);
                expected *= step;
            }
            for (t, w) in traj.iter().enumerate() {
                assert_abs_diff_eq!(w[2], step.powi(t as i32), epsilon = 1e-12);
            }
        }
    }

    /// Characteristic-polynomial oracle: every reported eigenvalue must
    /// zero det(F − λI), evaluated independently by cofactor expansion.
    #[test]
    fn eigenvalues_zero_the_characteristic_polynomial() {
        for a in 2..=10usize {
            for b in 2..=a {
                let m = TheoryModel::new(a, b).unwrap();
                for &lam in &m.eigenvalues {
                    let g = |i: usize, j: usize| m.f[i][j] - if i == j { lam } else { 0.0 };
                    let det = g(0, 0) * (g(1, 1) * g(2, 2) - g(1, 2) * g(2, 1))
                        - g(0, 1) * (g(1, 0) * g(2, 2) - g(1, 2) * g(2, 0))
                        + g(0, 2) * (g(1, 0) * g(2, 1) - g(1, 1) * g(2, 0));
                    assert!(
                        det.abs() <= 1e-10,
                        "det(F − λI) = {} for λ = {} at ({}, {})",
                        det,
                        lam,
                        a,
                        b
                    );
                }
                assert!(m.eigenvalues[0] >= m.eigenvalues[1]);
                assert!(m.eigenvalues[1] >= m.eigenvalues[2]);
            }
        }
    }

    #[test]
    fn eigenvector_equations_hold_across_the_grid() {
        for a in 2..=10usize {
            for b in 2..=a {
                let m = TheoryModel::new(a, b).unwrap();
                for (lam, v) in m.eigenvalues.iter().zip(&m.eigenvectors) {
                    for i in 0..3 {
                        let fv: f64 = (0..3).map(|j| m.f[i][j] * v[j]).sum();
                        assert_abs_diff_eq!(fv, lam * v[i], epsilon = 1e-10);
                    }
                    let norm: f64 = v.iter().map(|x| x * x).sum::<f64>();
                    assert_abs_diff_eq!(norm, 1.0, epsilon = 1e-12);
                }
            }
        }
    }

    /// Spectrum of F(3, 3) by hand: the upper block has trace 1/2 and
    /// determinant −4/9, so λ = (1/2 ± √73/6)/2, and the decoupled
    /// eigenvalue is 1/3 with eigenvector ∝ (1, 0, −3).
    #[test]
    fn hand_derived_spectrum_at_3_3() {
        let m = TheoryModel::new(3, 3).unwrap();
        let root = 73.0f64.sqrt() / 6.0;
        assert_abs_diff_eq!(m.eigenvalues[0], (0.5 + root) / 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(m.eigenvalues[1], 1.0 / 3.0, epsilon = 1e-14);
        assert_abs_diff_eq!(m.eigenvalues[2], (0.5 - root) / 2.0, epsilon = 1e-14);
        let s = 10.0f64.sqrt();
        assert_abs_diff_eq!(m.eigenvectors[1][0], 1.0 / s, epsilon = 1e-12);
        assert_abs_diff_eq!(m.eigenvectors[1][1], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(m.eigenvectors[1][2], -3.0 / s, epsilon = 1e-12);
    }

    /// The leading-eigenvalue claim fails on four small parameter pairs
    /// — their λ₁ sits just below 1 — and holds elsewhere on the grid.
    /// The report must flag exactly the leading claim there and keep
    /// the other two claims green.
    #[test]
    fn eigenstructure_reports_flag_the_subcritical_pairs() {
        let subcritical = [(2usize, 2usize), (3, 2), (4, 2), (3, 3)];
        for a in 2..=10usize {
            for b in 2..=a {
                let report = verify_eigenstructure(a, b).unwrap();
                let expect_fail = subcritical.contains(&(a, b));
                assert_eq!(
                    report.all_passed, !expect_fail,
                    "unexpected verdict at ({}, {}): {:?}",
                    a, b, report.eigenvalues
                );
                assert_eq!(report.claims[0].passed, !expect_fail);
                assert!(report.claims[1].passed, "middle claim failed at ({a}, {b})");
                assert!(report.claims[2].passed, "trailing claim failed at ({a}, {b})");
                assert!(report.claims[0].evidence.contains("λ₁"));
            }
        }
    }

    #[test]
    fn analytic_series_matches_direct_modularity_at_unit_weights() {
        for (a, b) in [(3usize, 3usize), (4, 3), (5, 5), (2, 2)] {
            let series = gab_modularity_series(a, b, 1, SeriesSource::Analytic).unwrap();
            let (g, labels, _) = generate_gab(a, b).unwrap();
            let direct = modularity(&g, &labels, ModularityConvention::Unordered).unwrap();
            assert_abs_diff_eq!(series[0], direct, epsilon = 1e-12);
        }
    }

    /// Hand-derived series values at (3, 3): Q₀ = 18/49 on unit weights
    /// and Q₁ = 249/841 after one model step. The trailing negative
    /// eigenvalue injects a decaying alternating mode, so the early
    /// series oscillates (Q₃ < Q₂) while settling toward its limit with
    /// a clear net increase over the first step.
    #[test]
    fn analytic_series_values_and_shape_at_3_3() {
        let q = gab_modularity_series(3, 3, 15, SeriesSource::Analytic).unwrap();
        assert_eq!(q.len(), 16);
        assert_abs_diff_eq!(q[0], 18.0 / 49.0, epsilon = 1e-12);
        assert_abs_diff_eq!(q[1], 249.0 / 841.0, epsilon = 1e-12);
        assert!(q[2] > q[1]);
        assert!(q[3] < q[2], "the alternating mode should dip at t = 3");
        assert!((q[15] - q[14]).abs() < 1e-3, "series should be settling");
        let tail_min = q[5..].iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(tail_min > q[1], "net increase over the first step");
    }

    /// The empirical series starts at the same unit-weight value as the
    /// analytic one, and its t = 1 entry matches the hand-derived
    /// one-step curvatures of the real flow (raw per-type weights
    /// 8/5, 2/3, 1/3), which give Q₁ = 1145/4761.
    #[test]
    fn empirical_series_matches_hand_values_at_3_3() {
        let q = gab_modularity_series(3, 3, 4, SeriesSource::Empirical).unwrap();
        assert_abs_diff_eq!(q[0], 18.0 / 49.0, epsilon = 1e-12);
        assert_abs_diff_eq!(q[1], 1145.0 / 4761.0, epsilon = 1e-9);
    }

    #[test]
    fn reports_serialize_with_evidence() {
        let report = verify_eigenstructure(4, 3).unwrap();
        assert!(report.all_passed);
        let json = serde_json::to_string(&report).unwrap();
        assert!(json.contains("\"claims\""));
        assert!(json.contains("evidence"));
    }
}
