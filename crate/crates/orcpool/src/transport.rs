//! Optimal transport between discrete measures: an exact min-cost-flow
//! solver and an entropic (Sinkhorn) approximation.
//!
//! Both solvers work on the raw transportation problem — two nonnegative
//! marginals `a` (length `p`) and `b` (length `q`) with equal total mass,
//! and a row-major `p × q` ground-cost matrix. The curvature module wraps
//! them with neighborhood-measure bookkeeping.
//!
//! The exact solver runs successive shortest paths with Johnson potentials
//! on the bipartite flow network, which is exact for the transportation
//! polytope and fast at neighborhood-support sizes. The approximate solver
//! is plain log-domain Sinkhorn: numerically safe at small regularization
//! without any stabilization schedule.

use crate::{Error, Result};

/// Default entropic regularization strength for [`sinkhorn_transport`].
pub const SINKHORN_DEFAULT_EPSILON: f64 = 1e-3;
/// Default marginal-violation tolerance for [`sinkhorn_transport`].
pub const SINKHORN_DEFAULT_TOL: f64 = 1e-9;
/// Default iteration cap for [`sinkhorn_transport`].
pub const SINKHORN_DEFAULT_MAX_ITER: usize = 10_000;

/// Marginal sums may disagree by at most this much before the problem is
/// declared infeasible.
const FEASIBILITY_TOL: f64 = 1e-9;
/// Residual capacities below this are treated as exhausted; guards the
/// augmentation loop against denormal leftovers.
const BOTTLENECK_TOL: f64 = 1e-15;

fn validate_marginals(a: &[f64], b: &[f64], cost: &[f64]) -> Result<()> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Numeric("transport marginal is empty".into()));
    }
    if cost.len() != a.len() * b.len() {
        return Err(Error::Numeric(format!(
            "ground cost has {} entries, expected {}x{}",
            cost.len(),
            a.len(),
            b.len()
        )));
    }
    if a.iter().chain(b.iter()).any(|&m| m < 0.0 || !m.is_finite()) {
        return Err(Error::Numeric(
            "transport marginals must be nonnegative and finite".into(),
        ));
    }
    if cost.iter().any(|c| !c.is_finite()) {
        return Err(Error::Numeric(
            "ground metric contains non-finite distances".into(),
        ));
    }
    let sum_a: f64 = a.iter().sum();
    let sum_b: f64 = b.iter().sum();
    if (sum_a - sum_b).abs() > FEASIBILITY_TOL {
        return Err(Error::Numeric(format!(
            "infeasible transport marginals: masses sum to {} and {}",
            sum_a, sum_b
        )));
    }
    Ok(())
}

/// One directed arc of the residual network.
struct Arc {
    to: usize,
    rev: usize,
    cap: f64,
    cost: f64,
}

struct FlowNetwork {
    adj: Vec<Vec<Arc>>,
}

impl FlowNetwork {
    fn new(nodes: usize) -> Self {
        FlowNetwork {
            adj: (0..nodes).map(|_| Vec::new()).collect(),
        }
    }

    fn add_arc(&mut self, from: usize, to: usize, cap: f64, cost: f64) {
        let rev_from = self.adj[to].len();
        let rev_to = self.adj[from].len();
        self.adj[from].push(Arc {
            to,
            rev: rev_from,
            cap,
            cost,
        });
        self.adj[to].push(Arc {
            to: from,
            rev: rev_to,
            cap: 0.0,
            cost: -cost,
        });
    }
}

/// Solve the transportation problem exactly.
///
/// Returns the optimal cost and the optimal plan (row-major `p × q`).
/// Zero-mass marginal entries are legal and simply receive no flow.
///
/// Uses successive shortest paths: repeatedly augment along a cheapest
/// residual path from the supply side to the demand side, with node
/// potentials keeping all reduced costs nonnegative so Dijkstra stays
/// valid after augmentation. Every augmentation saturates at least one
/// arc exactly (the bottleneck subtraction is exact in floating point),
/// so the loop terminates after at most one pass per arc.
pub fn min_cost_transport(a: &[f64], b: &[f64], cost: &[f64]) -> Result<(f64, Vec<f64>)> {
    validate_marginals(a, b, cost)?;
    let p = a.len();
    let q = b.len();
    let source = p + q;
    let sink = p + q + 1;
    let mut net = FlowNetwork::new(p + q + 2);
    for (i, &ai) in a.iter().enumerate() {
        if ai > 0.0 {
            net.add_arc(source, i, ai, 0.0);
        }
    }
    for (j, &bj) in b.iter().enumerate() {
        if bj > 0.0 {
            net.add_arc(p + j, sink, bj, 0.0);
        }
    }
    for i in 0..p {
        if a[i] <= 0.0 {
            continue;
        }
        for j in 0..q {
            if b[j] <= 0.0 {
                continue;
            }
            net.add_arc(i, p + j, f64::INFINITY, cost[i * q + j]);
        }
    }

    let nodes = p + q + 2;
    let mut potential = vec![0.0_f64; nodes];
    // (arc owner, arc index) of the tree arc reaching each node.
    let mut parent: Vec<(usize, usize)> = vec![(usize::MAX, usize::MAX); nodes];
    let total: f64 = a.iter().sum();
    let mut pushed = 0.0_f64;

    loop {
        // Dijkstra over reduced costs.
        let mut dist = vec![f64::INFINITY; nodes];
        let mut done = vec![false; nodes];
        dist[source] = 0.0;
        let mut heap = std::collections::BinaryHeap::new();
        heap.push(std::cmp::Reverse((ordered(0.0), source)));
        while let Some(std::cmp::Reverse((d, u))) = heap.pop() {
            let d = d.0;
            if done[u] || d > dist[u] {
                continue;
            }
            done[u] = true;
            for (k, arc) in net.adj[u].iter().enumerate() {
                if arc.cap <= BOTTLENECK_TOL {
                    continue;
                }
                // Roundoff can push a reduced cost a hair below zero;
                // clamping keeps Dijkstra's invariant intact.
                let rc = (arc.cost + potential[u] - potential[arc.to]).max(0.0);
                let nd = d + rc;
                if nd < dist[arc.to] {
                    dist[arc.to] = nd;
                    parent[arc.to] = (u, k);
                    heap.push(std::cmp::Reverse((ordered(nd), arc.to)));
                }
            }
        }
        if !dist[sink].is_finite() {
            break;
        }
        for v in 0..nodes {
            if dist[v].is_finite() {
                potential[v] += dist[v];
            }
        }
        // Bottleneck along the path.
        let mut bottleneck = f64::INFINITY;
        let mut v = sink;
        while v != source {
            let (u, k) = parent[v];
            bottleneck = bottleneck.min(net.adj[u][k].cap);
            v = u;
        }
        if bottleneck <= BOTTLENECK_TOL {
            break;
        }
        let mut v = sink;
        while v != source {
            let (u, k) = parent[v];
            let rev = net.adj[u][k].rev;
            net.adj[u][k].cap -= bottleneck;
            net.adj[v][rev].cap += bottleneck;
            v = u;
        }
        pushed += bottleneck;
    }

    if (total - pushed).abs() > FEASIBILITY_TOL {
        return Err(Error::Numeric(format!(
            "transport routed mass {} of {}",
            pushed, total
        )));
    }

    // Read the plan off the reverse arcs of source→sink edges.
    let mut plan = vec![0.0; p * q];
    let mut value = 0.0;
    for i in 0..p {
        for arc in &net.adj[i] {
            if arc.to >= p && arc.to < p + q && arc.cost >= 0.0 {
                // Forward arc: flow = capacity moved to the reverse arc.
                let flow = net.adj[arc.to][arc.rev].cap;
                if flow > 0.0 {
                    let j = arc.to - p;
                    plan[i * q + j] = flow;
                    value += flow * cost[i * q + j];
                }
            }
        }
    }
    Ok((value, plan))
}

/// Total-order wrapper so `f64` path lengths can live in a binary heap.
#[derive(PartialEq, PartialOrd)]
struct Ordered(f64);
impl Eq for Ordered {}
impl Ord for Ordered {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}
fn ordered(x: f64) -> Ordered {
    Ordered(x)
}

/// How a Sinkhorn run ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SinkhornStatus {
    /// Marginal violation dropped below the tolerance.
    Converged,
    /// The iteration cap was reached first; the best iterate seen is
    /// returned and a warning is logged.
    MaxIterations,
}

/// Result of an entropic-transport run.
#[derive(Debug, Clone)]
pub struct SinkhornResult {
    /// Transport cost `⟨P, C⟩` of the returned plan (without the entropy
    /// term), which approaches the exact cost from above as `ε → 0`.
    pub cost: f64,
    /// The transport plan, row-major `p × q`.
    pub plan: Vec<f64>,
    /// Iterations actually used.
    pub iterations: usize,
    /// Convergence status.
    pub status: SinkhornStatus,
    /// Final `‖P1 − a‖₁ + ‖Pᵀ1 − b‖₁`.
    pub marginal_violation: f64,
}

/// Log-sum-exp with a max shift; `-∞` entries (zero masses) drop out.
fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let s: f64 = values.map(|v| (v - m).exp()).sum();
    m + s.ln()
}

/// Entropic-regularized transport via log-domain Sinkhorn iterations.
///
/// Alternates the dual updates
///
/// ```text
/// f_i ← ε·(ln a_i − LSE_j((g_j − C_ij)/ε))
/// g_j ← ε·(ln b_j − LSE_i((f_i − C_ij)/ε))
/// ```
///
/// and stops when the plan `P_ij = exp((f_i + g_j − C_ij)/ε)` violates the
/// marginals by less than `tol` (in total ℓ₁), or at `max_iter`, whichever
/// comes first. Non-convergence is not an error: the best iterate seen is
/// returned with [`SinkhornStatus::MaxIterations`] and a logged warning.
/// Zero-mass marginal entries are handled exactly (their potential is
/// `-∞`, their plan row/column identically zero).
pub fn sinkhorn_transport(
    a: &[f64],
    b: &[f64],
    cost: &[f64],
    epsilon: f64,
    max_iter: usize,
    tol: f64,
) -> Result<SinkhornResult> {
    validate_marginals(a, b, cost)?;
    if !(epsilon > 0.0) {
        return Err(Error::Parameter(format!(
            "regularization strength must be positive, got {}",
            epsilon
        )));
    }
    let p = a.len();
    let q = b.len();
    let ln_a: Vec<f64> = a.iter().map(|&x| x.ln()).collect(); // ln 0 = -inf
    let ln_b: Vec<f64> = b.iter().map(|&x| x.ln()).collect();
    let mut f = vec![0.0_f64; p];
    let mut g = vec![0.0_f64; q];
    for (i, &ai) in a.iter().enumerate() {
        if ai == 0.0 {
            f[i] = f64::NEG_INFINITY;
        }
    }
    for (j, &bj) in b.iter().enumerate() {
        if bj == 0.0 {
            g[j] = f64::NEG_INFINITY;
        }
    }

    let build_plan = |f: &[f64], g: &[f64]| -> Vec<f64> {
        let mut plan = vec![0.0; p * q];
        for i in 0..p {
            if f[i] == f64::NEG_INFINITY {
                continue;
            }
            for j in 0..q {
                if g[j] == f64::NEG_INFINITY {
                    continue;
                }
                plan[i * q + j] = ((f[i] + g[j] - cost[i * q + j]) / epsilon).exp();
            }
        }
        plan
    };
    let violation = |plan: &[f64]| -> f64 {
        let mut v = 0.0;
        for i in 0..p {
            let row: f64 = plan[i * q..(i + 1) * q].iter().sum();
            v += (row - a[i]).abs();
        }
        for j in 0..q {
            let col: f64 = (0..p).map(|i| plan[i * q + j]).sum();
            v += (col - b[j]).abs();
        }
        v
    };

    let mut best: Option<(f64, Vec<f64>, Vec<f64>)> = None;
    let mut iterations = 0;
    let mut status = SinkhornStatus::MaxIterations;
    while iterations < max_iter {
        iterations += 1;
        for i in 0..p {
            if a[i] == 0.0 {
                continue;
            }
            let lse = log_sum_exp((0..q).map(|j| (g[j] - cost[i * q + j]) / epsilon));
            f[i] = epsilon * (ln_a[i] - lse);
        }
        for j in 0..q {
            if b[j] == 0.0 {
                continue;
            }
            let lse = log_sum_exp((0..p).map(|i| (f[i] - cost[i * q + j]) / epsilon));
            g[j] = epsilon * (ln_b[j] - lse);
        }
        let plan = build_plan(&f, &g);
        let viol = violation(&plan);
        let improved = match &best {
            None => viol.is_finite(),
            Some((bv, _, _)) => viol.is_finite() && viol < *bv,
        };
        if improved {
            best = Some((viol, f.clone(), g.clone()));
        }
        if viol < tol {
            status = SinkhornStatus::Converged;
            break;
        }
    }

    let (viol, f, g) = best.ok_or_else(|| {
        Error::Numeric("entropic transport produced no finite iterate".into())
    })?;
    if status == SinkhornStatus::MaxIterations {
        log::warn!(
            "entropic transport stopped at {} iterations with marginal violation {:.3e} (tolerance {:.3e})",
            iterations,
            viol,
            tol
        );
    }
    let plan = build_plan(&f, &g);
    let cost_value: f64 = plan.iter().zip(cost).map(|(x, c)| x * c).sum();
    Ok(SinkhornResult {
        cost: cost_value,
        plan,
        iterations,
        status,
        marginal_violation: viol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn identical_measures_cost_zero() {
        let a = [0.5, 0.5];
        let cost = [0.0, 1.0, 1.0, 0.0];
        let (value, plan) = min_cost_transport(&a, &a, &cost).unwrap();
        assert_abs_diff_eq!(value, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(plan[0], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(plan[3], 0.5, epsilon = 1e-12);
    }

    #[test]
    fn point_masses_cost_the_distance() {
        let (value, plan) = min_cost_transport(&[1.0], &[1.0], &[2.5]).unwrap();
        assert_abs_diff_eq!(value, 2.5, epsilon = 1e-12);
        assert_abs_diff_eq!(plan[0], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn split_two_ways_costs_unit() {
        let (value, _) = min_cost_transport(&[1.0], &[0.5, 0.5], &[1.0, 1.0]).unwrap();
        assert_abs_diff_eq!(value, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn hand_solved_three_by_three() {
        // Same instance as the oracle's self-test, optimum 1.2 with the
        // dual certificate u = (0, -1, -2), v = (1, 2, 3).
        let a = [0.4, 0.3, 0.3];
        let b = [0.2, 0.5, 0.3];
        let cost = [1.0, 2.0, 3.0, 2.0, 1.0, 2.0, 3.0, 2.0, 1.0];
        let (value, plan) = min_cost_transport(&a, &b, &cost).unwrap();
        assert_abs_diff_eq!(value, 1.2, epsilon = 1e-10);
        for i in 0..3 {
            let row: f64 = plan[i * 3..(i + 1) * 3].iter().sum();
            assert_abs_diff_eq!(row, a[i], epsilon = 1e-10);
        }
        for j in 0..3 {
            let col: f64 = (0..3).map(|i| plan[i * 3 + j]).sum();
            assert_abs_diff_eq!(col, b[j], epsilon = 1e-10);
        }
    }

    #[test]
    fn zero_mass_entries_receive_no_flow() {
        let a = [0.0, 1.0];
        let b = [1.0, 0.0];
        let cost = [9.0, 9.0, 3.0, 9.0];
        let (value, plan) = min_cost_transport(&a, &b, &cost).unwrap();
        assert_abs_diff_eq!(value, 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(plan[2], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(plan[0] + plan[1] + plan[3], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn mismatched_masses_are_a_numeric_error() {
        let err = min_cost_transport(&[1.0], &[0.5], &[1.0]).unwrap_err();
        assert!(matches!(err, crate::Error::Numeric(_)));
    }

    #[test]
    fn non_finite_ground_cost_rejected() {
        let err = min_cost_transport(&[1.0], &[1.0], &[f64::INFINITY]).unwrap_err();
        assert!(matches!(err, crate::Error::Numeric(_)));
    }

    #[test]
    fn sinkhorn_identical_measures_near_zero() {
        let a = [0.5, 0.5];
        let cost = [0.0, 1.0, 1.0, 0.0];
        let r = sinkhorn_transport(&a, &a, &cost, 1e-3, 10_000, 1e-9).unwrap();
        assert!(r.cost <= 1e-2, "cost {} not near zero", r.cost);
    }

    #[test]
    fn sinkhorn_point_mass_pair_near_exact() {
        let r = sinkhorn_transport(&[1.0], &[1.0], &[1.0], 1e-3, 10_000, 1e-9).unwrap();
        assert!((r.cost - 1.0).abs() <= 1e-2);
        assert_eq!(r.status, SinkhornStatus::Converged);
    }

    #[test]
    fn sinkhorn_approaches_exact_from_above_as_epsilon_shrinks() {
        let a = [0.6, 0.4];
        let b = [0.3, 0.7];
        let cost = [0.5, 2.0, 1.0, 0.25];
        let (exact, _) = min_cost_transport(&a, &b, &cost).unwrap();
        let mut previous = f64::INFINITY;
        for eps in [1e-1, 1e-2, 1e-3] {
            let r = sinkhorn_transport(&a, &b, &cost, eps, 1_000_000, 1e-12).unwrap();
            assert!(
                r.cost <= previous + 1e-9,
                "cost not monotone: {} then {}",
                previous,
                r.cost
            );
            assert!(r.cost >= exact - 1e-9);
            previous = r.cost;
        }
        assert!((previous - exact).abs() < 1e-3);
    }

    #[test]
    fn sinkhorn_reports_non_convergence() {
        let a = [0.6, 0.4];
        let b = [0.3, 0.7];
        let cost = [0.5, 2.0, 1.0, 0.25];
        let r = sinkhorn_transport(&a, &b, &cost, 1e-3, 1, 1e-12).unwrap();
        assert_eq!(r.status, SinkhornStatus::MaxIterations);
        assert_eq!(r.iterations, 1);
        assert!(r.marginal_violation.is_finite());
    }

    #[test]
    fn sinkhorn_handles_zero_mass_entries() {
        let a = [0.0, 1.0];
        let b = [1.0, 0.0];
        let cost = [9.0, 9.0, 3.0, 9.0];
        let r = sinkhorn_transport(&a, &b, &cost, 1e-2, 100_000, 1e-9).unwrap();
        assert!((r.cost - 3.0).abs() < 1e-2);
        assert_abs_diff_eq!(r.plan[0], 0.0, epsilon = 1e-15);
    }

    #[test]
    fn sinkhorn_rejects_nonpositive_epsilon() {
        let err = sinkhorn_transport(&[1.0], &[1.0], &[1.0], 0.0, 10, 1e-9).unwrap_err();
        assert!(matches!(err, crate::Error::Parameter(_)));
    }
}
