//! Test-only oracles and generators shared by the orcpool test suites.
//!
//! Nothing here ships in the library proper. The point of this crate is
//! *independence*: the transportation-LP oracle below shares no code with
//! the production min-cost-flow solver, so agreement between the two is
//! meaningful evidence of correctness rather than a tautology.
//!
//! Contents:
//!
//! * [`transport_lp`] — a dense two-phase primal simplex solver for the
//!   transportation polytope, used as the brute-force Wasserstein-1 oracle.
//! * [`erdos_renyi`] / [`random_connected_graph`] — seeded random-graph
//!   builders for property tests.
//! * [`finite_difference_gradient`] — central-difference gradients for
//!   checking analytic backpropagation.

#![forbid(unsafe_code)]

use orcpool::graph::{build_graph, Graph};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Solve the dense transportation LP
///
/// ```text
/// minimize    Σ_ij cost[i][j] · x[i][j]
/// subject to  Σ_j x[i][j] = a[i]   for every source i
///             Σ_i x[i][j] = b[j]   for every sink j
///             x ≥ 0
/// ```
///
/// by a two-phase primal simplex on the full tableau, with Bland's rule
/// (so it cannot cycle) and one redundant marginal constraint dropped.
/// `cost` is row-major with `a.len()` rows and `b.len()` columns. Returns
/// the optimal cost and the optimal plan (row-major).
///
/// This is deliberately the most literal textbook method available —
/// O((pq)² · (p+q)) per pivot round and happy about it — because its only
/// job is to be an independently trustworthy oracle at tiny sizes.
pub fn transport_lp(a: &[f64], b: &[f64], cost: &[f64]) -> Result<(f64, Vec<f64>), String> {
    let p = a.len();
    let q = b.len();
    if p == 0 || q == 0 {
        return Err("empty marginal".into());
    }
    if cost.len() != p * q {
        return Err(format!(
            "cost matrix has {} entries, expected {}x{}",
            cost.len(),
            p,
            q
        ));
    }
    let sum_a: f64 = a.iter().sum();
    let sum_b: f64 = b.iter().sum();
    if (sum_a - sum_b).abs() > 1e-9 {
        return Err(format!(
            "marginal sums differ: {} vs {}",
            sum_a, sum_b
        ));
    }
    if a.iter().chain(b.iter()).any(|&m| m < -1e-12) {
        return Err("negative mass in a marginal".into());
    }

    // Standard form: n structural variables x_ij (column i*q + j), then
    // m artificial variables, one per retained constraint. The last sink
    // constraint is redundant (marginals balance) and is dropped.
    let n = p * q;
    let m = p + q - 1;
    let width = n + m + 1; // + rhs column
    let mut t = vec![0.0_f64; m * width];

    // Source rows.
    for i in 0..p {
        for j in 0..q {
            t[i * width + (i * q + j)] = 1.0;
        }
        t[i * width + n + i] = 1.0;
        t[i * width + n + m] = a[i].max(0.0);
    }
    // Sink rows, excluding the last sink.
    for j in 0..q - 1 {
        let r = p + j;
        for i in 0..p {
            t[r * width + (i * q + j)] = 1.0;
        }
        t[r * width + n + r] = 1.0;
        t[r * width + n + m] = b[j].max(0.0);
    }

    let mut basis: Vec<usize> = (n..n + m).collect();

    const PIVOT_TOL: f64 = 1e-11;

    // One Bland pivot round: pick the lowest-index improving column among
    // `allowed`, ratio-test, pivot. Returns false when optimal.
    let pivot_round = |t: &mut Vec<f64>, basis: &mut Vec<usize>, z: &[f64]| -> Result<bool, String> {
        // Reduced costs: z_j - Σ_r z[basis[r]] * t[r][j].
        let mut entering = None;
        for col in 0..n + m {
            if basis.contains(&col) {
                continue;
            }
            let mut reduced = z[col];
            for r in 0..m {
                reduced -= z[basis[r]] * t[r * width + col];
            }
            if reduced < -PIVOT_TOL {
                entering = Some(col);
                break; // Bland: smallest index.
            }
        }
        let Some(col) = entering else {
            return Ok(false);
        };
        // Ratio test; Bland ties toward the smallest basis index.
        let mut leave: Option<(usize, f64)> = None;
        for r in 0..m {
            let coef = t[r * width + col];
            if coef > PIVOT_TOL {
                let ratio = t[r * width + n + m] / coef;
                match leave {
                    None => leave = Some((r, ratio)),
                    Some((lr, lratio)) => {
                        if ratio < lratio - PIVOT_TOL
                            || (ratio < lratio + PIVOT_TOL && basis[r] < basis[lr])
                        {
                            leave = Some((r, ratio));
                        }
                    }
                }
            }
        }
        let Some((row, _)) = leave else {
            return Err("transportation LP unbounded (cannot happen on valid input)".into());
        };
        // Gaussian pivot on (row, col).
        let pivot = t[row * width + col];
        for c in 0..width {
            t[row * width + c] /= pivot;
        }
        for r in 0..m {
            if r != row {
                let factor = t[r * width + col];
                if factor != 0.0 {
                    for c in 0..width {
                        t[r * width + c] -= factor * t[row * width + c];
                    }
                }
            }
        }
        basis[row] = col;
        Ok(true)
    };

    // Phase 1: minimize the sum of artificials.
    let mut z1 = vec![0.0; n + m];
    for c in n..n + m {
        z1[c] = 1.0;
    }
    let mut guard = 0;
    while pivot_round(&mut t, &mut basis, &z1)? {
        guard += 1;
        if guard > 200_000 {
            return Err("phase-1 simplex exceeded its pivot budget".into());
        }
    }
    let phase1: f64 = basis
        .iter()
        .enumerate()
        .filter(|(_, &col)| col >= n)
        .map(|(r, _)| t[r * width + n + m])
        .sum();
    if phase1 > 1e-9 {
        return Err(format!("infeasible marginals (phase-1 objective {})", phase1));
    }
    // Drive any degenerate artificial out of the basis.
    for r in 0..m {
        if basis[r] >= n {
            if let Some(col) = (0..n).find(|&c| t[r * width + c].abs() > PIVOT_TOL) {
                let pivot = t[r * width + col];
                for c in 0..width {
                    t[r * width + c] /= pivot;
                }
                for r2 in 0..m {
                    if r2 != r {
                        let factor = t[r2 * width + col];
                        if factor != 0.0 {
                            for c in 0..width {
                                t[r2 * width + c] -= factor * t[r * width + c];
                            }
                        }
                    }
                }
                basis[r] = col;
            }
        }
    }

    // Phase 2: minimize the true cost; artificial columns are barred by
    // giving them +∞-like cost via exclusion (they are basic only in rows
    // that could not be repaired, which do not occur here).
    let mut z2 = vec![0.0; n + m];
    z2[..n].copy_from_slice(cost);
    for c in n..n + m {
        z2[c] = 1e30; // effectively forbidden
    }
    guard = 0;
    while pivot_round(&mut t, &mut basis, &z2)? {
        guard += 1;
        if guard > 200_000 {
            return Err("phase-2 simplex exceeded its pivot budget".into());
        }
    }

    let mut plan = vec![0.0; n];
    for (r, &col) in basis.iter().enumerate() {
        if col < n {
            plan[col] = t[r * width + n + m].max(0.0);
        }
    }
    let value: f64 = plan.iter().zip(cost).map(|(x, c)| x * c).sum();
    Ok((value, plan))
}

/// Sample a seeded Erdős–Rényi graph `G(n, p)` with unit weights, or with
/// weights drawn uniformly from `[0.5, 2.0]` when `unit_weights` is false.
pub fn erdos_renyi(n: usize, p: f64, unit_weights: bool, seed: u64) -> Graph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for u in 0..n {
        for v in (u + 1)..n {
            if rng.gen::<f64>() < p {
                let w = if unit_weights {
                    1.0
                } else {
                    rng.gen_range(0.5..2.0)
                };
                edges.push((u, v, w));
            }
        }
    }
    build_graph(&edges, n, None).expect("generated edges are valid by construction")
}

fn is_connected(g: &Graph) -> bool {
    let n = g.node_count();
    if n == 0 {
        return true;
    }
    let mut seen = vec![false; n];
    let mut stack = vec![0usize];
    seen[0] = true;
    let mut count = 1;
    while let Some(u) = stack.pop() {
        for &(v, _) in g.neighbors(u) {
            if !seen[v] {
                seen[v] = true;
                count += 1;
                stack.push(v);
            }
        }
    }
    count == n
}

/// Sample a *connected* seeded Erdős–Rényi graph by rejection, panicking
/// after an absurd number of failures (test-only code; choose `p` sensibly).
pub fn random_connected_graph(n: usize, p: f64, unit_weights: bool, seed: u64) -> Graph {
    for attempt in 0..10_000u64 {
        let g = erdos_renyi(n, p, unit_weights, seed.wrapping_mul(0x9E37_79B9).wrapping_add(attempt));
        if is_connected(&g) {
            return g;
        }
    }
    panic!("no connected G({}, {}) found in 10000 attempts", n, p);
}

/// Central finite-difference gradient of `f` at `x` with step `h`.
pub fn finite_difference_gradient<F>(mut f: F, x: &[f64], h: f64) -> Vec<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    let mut grad = Vec::with_capacity(x.len());
    let mut probe = x.to_vec();
    for i in 0..x.len() {
        probe[i] = x[i] + h;
        let up = f(&probe);
        probe[i] = x[i] - h;
        let down = f(&probe);
        probe[i] = x[i];
        grad.push((up - down) / (2.0 * h));
    }
    grad
}
