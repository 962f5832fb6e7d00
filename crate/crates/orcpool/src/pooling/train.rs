//! Gradient-trained soft assignments.
//!
//! A small embedding-plus-head network maps node features to a K-way
//! soft assignment: one graph-convolution layer `X̃ = ELU(Â X θ)` of
//! width 8 over the *raw* normalized adjacency, a hidden ELU layer of
//! width 16, and a K-way softmax. The loss is the relaxed min-cut ratio
//! evaluated on the *curvature-adjusted* adjacency plus the
//! orthogonality penalty, so the flow steers the objective while the
//! propagation stays on the input graph.
//!
//! All gradients are analytic (hand-derived backpropagation, checked
//! against central finite differences in the test suite) and the
//! optimizer is Adam. Training is deterministic for a fixed seed.
//!
//! Graphs without attributes get one-hot identity features by default:
//! a constant dummy feature makes the forward pass commute with every
//! graph automorphism, so mirror-symmetric nodes provably receive
//! identical assignment rows and symmetric partitions can never be
//! separated. The constant convention remains available as
//! [`FeatureMode::ConstantOne`].

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{degree_vector, normalized_adjacency, orthogonality_penalty_raw, trace_ratio_parts, Assignment};
use crate::flow::CurvatureAdjustedAdjacency;
use crate::graph::Graph;
use crate::linalg::{frobenius_norm, mat_mul, tmat_mul};
use crate::{Error, Result};

/// Width of the graph-convolution embedding.
pub const EMBED_WIDTH: usize = 8;

/// Width of the hidden head layer.
pub const HIDDEN_WIDTH: usize = 16;

/// Default Adam learning rate.
pub const DEFAULT_LEARNING_RATE: f64 = 1e-3;

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

/// Slack allowed when checking the loss-term bounds each epoch.
const BOUND_SLACK: f64 = 1e-6;

/// How node features are built when training the assignment network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FeatureMode {
    /// Use graph attributes when present, else one-hot identity
    /// features.
    #[default]
    Auto,
    /// Force one-hot identity features.
    Identity,
    /// A single constant 1.0 feature per node. Kept for comparison:
    /// with it the network is automorphism-equivariant and cannot split
    /// symmetric graphs.
    ConstantOne,
}

impl FeatureMode {
    /// Lowercase name for reports and CLI flags.
    pub fn as_str(self) -> &'static str {
        match self {
            FeatureMode::Auto => "auto",
            FeatureMode::Identity => "identity",
            FeatureMode::ConstantOne => "constant",
        }
    }
}

/// Final state of a training run.
#[derive(Debug, Clone)]
pub struct TrainState {
    /// Loss before each update plus the final loss — length
    /// `epochs + 1`.
    pub loss_trace: Vec<f64>,
    /// Flat parameter vector after training (layout: θ, W₁, b₁, W₂, b₂).
    pub parameters: Vec<f64>,
    /// Number of clusters.
    pub k: usize,
    /// Number of optimizer steps taken.
    pub epochs_run: usize,
    /// The feature construction that was actually used
    /// (`"attributes"`, `"identity"` or `"constant"`).
    pub feature_mode: &'static str,
}

/// Snapshot of one loss-and-gradient evaluation.
#[derive(Debug, Clone)]
pub struct GradientEvaluation {
    /// Total loss (min-cut term plus penalty).
    pub loss: f64,
    /// The min-cut trace-ratio term, in `[−1, 0]`.
    pub mincut_term: f64,
    /// The orthogonality penalty, in `[0, 2]`.
    pub penalty_term: f64,
    /// Gradient of the total loss in flat parameter layout.
    pub gradient: Vec<f64>,
}

/// The training objective with its fixed data: propagated features,
/// normalized curvature-adjusted adjacency and its degree vector.
///
/// Exposes the loss and its analytic gradient as functions of a flat
/// parameter vector so optimizers and finite-difference checks can
/// drive it directly.
#[derive(Debug, Clone)]
pub struct TrainingProblem {
    n: usize,
    m: usize,
    k: usize,
    /// `Â X`, row-major `n × m`.
    propagated: Vec<f64>,
    c_hat: Vec<f64>,
    d_hat: Vec<f64>,
    feature_mode: &'static str,
}

struct Forward {
    a0: Vec<f64>,
    xt: Vec<f64>,
    a1: Vec<f64>,
    h: Vec<f64>,
    s: Vec<f64>,
}

fn elu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        x.exp() - 1.0
    }
}

fn elu_prime(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        x.exp()
    }
}

/// `a · bᵀ` where `a` is `n × k` and `b` is `m × k`; result `n × m`.
fn mat_mul_bt(a: &[f64], b: &[f64], n: usize, k: usize, m: usize) -> Vec<f64> {
    debug_assert_eq!(a.len(), n * k);
    debug_assert_eq!(b.len(), m * k);
    let mut out = vec![0.0; n * m];
    for i in 0..n {
        for j in 0..m {
            let mut acc = 0.0;
            for l in 0..k {
                acc += a[i * k + l] * b[j * k + l];
            }
            out[i * m + j] = acc;
        }
    }
    out
}

impl TrainingProblem {
    /// Assemble the objective for graph `g`, curvature-adjusted
    /// adjacency `c` and `k` clusters.
    pub fn new(
        g: &Graph,
        c: &CurvatureAdjustedAdjacency,
        k: usize,
        features: FeatureMode,
    ) -> Result<TrainingProblem> {
        let n = g.node_count();
        if k < 2 || k > n {
            return Err(Error::Parameter(format!(
                "trained selection needs 2 ≤ K ≤ {}, got K = {}",
                n, k
            )));
        }
        if c.graph.node_count() != n {
            return Err(Error::Parameter(format!(
                "curvature-adjusted adjacency has {} nodes but the graph has {}",
                c.graph.node_count(),
                n
            )));
        }
        let (x, m, feature_mode): (Vec<f64>, usize, &'static str) = match (features, g.attributes())
        {
            (FeatureMode::Auto, Some(attrs)) => {
                let m = attrs[0].len();
                let mut x = vec![0.0; n * m];
                for (v, row) in attrs.iter().enumerate() {
                    x[v * m..(v + 1) * m].copy_from_slice(row);
                }
                (x, m, "attributes")
            }
            (FeatureMode::Auto, None) | (FeatureMode::Identity, _) => {
                let mut x = vec![0.0; n * n];
                for v in 0..n {
                    x[v * n + v] = 1.0;
                }
                (x, n, "identity")
            }
            (FeatureMode::ConstantOne, _) => (vec![1.0; n], 1, "constant"),
        };
        let a_hat = normalized_adjacency(&g.dense_adjacency(), n)?;
        let propagated = mat_mul(&a_hat, &x, n, n, m);
        let c_hat = normalized_adjacency(&c.dense(), n)?;
        let d_hat = degree_vector(&c_hat, n);
        Ok(TrainingProblem {
            n,
            m,
            k,
            propagated,
            c_hat,
            d_hat,
            feature_mode,
        })
    }

    /// Which feature construction the problem resolved to.
    pub fn feature_label(&self) -> &'static str {
        self.feature_mode
    }

    /// Total number of trainable parameters.
    pub fn parameter_count(&self) -> usize {
        self.m * EMBED_WIDTH
            + EMBED_WIDTH * HIDDEN_WIDTH
            + HIDDEN_WIDTH
            + HIDDEN_WIDTH * self.k
            + self.k
    }

    fn check_len(&self, params: &[f64]) -> Result<()> {
        if params.len() != self.parameter_count() {
            return Err(Error::Parameter(format!(
                "parameter vector has {} entries, expected {}",
                params.len(),
                self.parameter_count()
            )));
        }
        Ok(())
    }

    /// Glorot-uniform initial parameters (biases zero), deterministic
    /// for a fixed seed.
    pub fn initial_parameters(&self, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = vec![0.0; self.parameter_count()];
        let mut fill = |block: &mut [f64], fan_in: usize, fan_out: usize| {
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for p in block.iter_mut() {
                *p = rng.gen::<f64>() * 2.0 * limit - limit;
            }
        };
        let mut offset = 0;
        fill(
            &mut params[offset..offset + self.m * EMBED_WIDTH],
            self.m,
            EMBED_WIDTH,
        );
        offset += self.m * EMBED_WIDTH;
        fill(
            &mut params[offset..offset + EMBED_WIDTH * HIDDEN_WIDTH],
            EMBED_WIDTH,
            HIDDEN_WIDTH,
        );
        offset += EMBED_WIDTH * HIDDEN_WIDTH + HIDDEN_WIDTH; // b₁ stays zero.
        fill(
            &mut params[offset..offset + HIDDEN_WIDTH * self.k],
            HIDDEN_WIDTH,
            self.k,
        );
        params
    }

    fn split<'a>(&self, params: &'a [f64]) -> (&'a [f64], &'a [f64], &'a [f64], &'a [f64], &'a [f64]) {
        let (m, k) = (self.m, self.k);
        let mut o = 0;
        let theta = &params[o..o + m * EMBED_WIDTH];
        o += m * EMBED_WIDTH;
        let w1 = &params[o..o + EMBED_WIDTH * HIDDEN_WIDTH];
        o += EMBED_WIDTH * HIDDEN_WIDTH;
        let b1 = &params[o..o + HIDDEN_WIDTH];
        o += HIDDEN_WIDTH;
        let w2 = &params[o..o + HIDDEN_WIDTH * k];
        o += HIDDEN_WIDTH * k;
        let b2 = &params[o..o + k];
        (theta, w1, b1, w2, b2)
    }

    fn forward(&self, params: &[f64]) -> Forward {
        let (theta, w1, b1, w2, b2) = self.split(params);
        let (n, k) = (self.n, self.k);
        let a0 = mat_mul(&self.propagated, theta, n, self.m, EMBED_WIDTH);
        let xt: Vec<f64> = a0.iter().map(|&x| elu(x)).collect();
        let mut a1 = mat_mul(&xt, w1, n, EMBED_WIDTH, HIDDEN_WIDTH);
        for i in 0..n {
            for j in 0..HIDDEN_WIDTH {
                a1[i * HIDDEN_WIDTH + j] += b1[j];
            }
        }
        let h: Vec<f64> = a1.iter().map(|&x| elu(x)).collect();
        let mut z = mat_mul(&h, w2, n, HIDDEN_WIDTH, k);
        for i in 0..n {
            for j in 0..k {
                z[i * k + j] += b2[j];
            }
        }
        let mut s = z;
        for i in 0..n {
            let row = &mut s[i * k..(i + 1) * k];
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for x in row.iter_mut() {
                *x = (*x - max).exp();
                sum += *x;
            }
            for x in row.iter_mut() {
                *x /= sum;
            }
        }
        Forward { a0, xt, a1, h, s }
    }

    fn loss_terms(&self, s: &[f64]) -> Result<(f64, f64)> {
        let (p, q) = trace_ratio_parts(s, self.n, self.k, &self.c_hat, &self.d_hat);
        if q.abs() < 1e-300 {
            return Err(Error::Numeric(
                "min-cut denominator tr(SᵀD̂S) is zero".to_string(),
            ));
        }
        Ok((-p / q, orthogonality_penalty_raw(s, self.n, self.k)))
    }

    /// The min-cut term and penalty term at `params`.
    pub fn loss_components(&self, params: &[f64]) -> Result<(f64, f64)> {
        self.check_len(params)?;
        self.loss_terms(&self.forward(params).s)
    }

    /// Total loss at `params`.
    pub fn loss(&self, params: &[f64]) -> Result<f64> {
        let (l1, l2) = self.loss_components(params)?;
        Ok(l1 + l2)
    }

    /// The soft assignment the network produces at `params`.
    pub fn assignment(&self, params: &[f64]) -> Result<Assignment> {
        self.check_len(params)?;
        Assignment::from_soft(self.forward(params).s, self.n, self.k)
    }

    /// Loss and its analytic gradient at `params`.
    ///
    /// The chain runs loss → S → softmax logits → head → embedding:
    /// with `P = tr(SᵀĈS)` and `Q = tr(SᵀD̂S)`,
    /// `∂L₁/∂S = −(2/Q) ĈS + (2P/Q²) D̂S`; with `M = SᵀS`,
    /// `f = ‖M‖_F`, `R = M/f − I/√K` and `B = R/‖R‖_F`,
    /// `∂L₂/∂S = 2S (B/f − (⟨B,M⟩/f³) M)`; the softmax row backward is
    /// `∂L/∂z_i = s_i ⊙ (g_i − (g_i·s_i)𝟙)`.
    pub fn loss_and_gradient(&self, params: &[f64]) -> Result<GradientEvaluation> {
        self.check_len(params)?;
        let (_, w1, _, w2, _) = self.split(params);
        let (n, k) = (self.n, self.k);
        let fwd = self.forward(params);
        let s = &fwd.s;
        let (p, q) = trace_ratio_parts(s, n, k, &self.c_hat, &self.d_hat);
        if q.abs() < 1e-300 {
            return Err(Error::Numeric(
                "min-cut denominator tr(SᵀD̂S) is zero".to_string(),
            ));
        }
        let mincut_term = -p / q;

        // ∂L₁/∂S.
        let cs = mat_mul(&self.c_hat, s, n, n, k);
        let mut g_s = vec![0.0; n * k];
        for i in 0..n {
            for l in 0..k {
                g_s[i * k + l] = -(2.0 / q) * cs[i * k + l]
                    + (2.0 * p / (q * q)) * self.d_hat[i] * s[i * k + l];
            }
        }

        // ∂L₂/∂S.
        let m_gram = tmat_mul(s, s, n, k, k);
        let f = frobenius_norm(&m_gram);
        let inv_sqrt_k = 1.0 / (k as f64).sqrt();
        let mut r = vec![0.0; k * k];
        for a in 0..k {
            for b in 0..k {
                let target = if a == b { inv_sqrt_k } else { 0.0 };
                r[a * k + b] = m_gram[a * k + b] / f - target;
            }
        }
        let penalty_term = frobenius_norm(&r);
        if penalty_term > 1e-14 {
            let bm: f64 = r
                .iter()
                .zip(&m_gram)
                .map(|(&b, &m)| b * m / penalty_term)
                .sum();
            let mut g_m = vec![0.0; k * k];
            for idx in 0..k * k {
                g_m[idx] = r[idx] / (penalty_term * f) - bm / (f * f * f) * m_gram[idx];
            }
            let sg = mat_mul(s, &g_m, n, k, k);
            for idx in 0..n * k {
                g_s[idx] += 2.0 * sg[idx];
            }
        }

        // Softmax backward, row by row.
        let mut dz = vec![0.0; n * k];
        for i in 0..n {
            let srow = &s[i * k..(i + 1) * k];
            let grow = &g_s[i * k..(i + 1) * k];
            let dot: f64 = srow.iter().zip(grow).map(|(&a, &b)| a * b).sum();
            for l in 0..k {
                dz[i * k + l] = srow[l] * (grow[l] - dot);
            }
        }

        // Head backward.
        let d_w2 = tmat_mul(&fwd.h, &dz, n, HIDDEN_WIDTH, k);
        let mut d_b2 = vec![0.0; k];
        for i in 0..n {
            for l in 0..k {
                d_b2[l] += dz[i * k + l];
            }
        }
        let dh = mat_mul_bt(&dz, w2, n, k, HIDDEN_WIDTH);
        let mut da1 = dh;
        for (d, &a) in da1.iter_mut().zip(&fwd.a1) {
            *d *= elu_prime(a);
        }
        let d_w1 = tmat_mul(&fwd.xt, &da1, n, EMBED_WIDTH, HIDDEN_WIDTH);
        let mut d_b1 = vec![0.0; HIDDEN_WIDTH];
        for i in 0..n {
            for j in 0..HIDDEN_WIDTH {
                d_b1[j] += da1[i * HIDDEN_WIDTH + j];
            }
        }
        let dxt = mat_mul_bt(&da1, w1, n, HIDDEN_WIDTH, EMBED_WIDTH);
        let mut da0 = dxt;
        for (d, &a) in da0.iter_mut().zip(&fwd.a0) {
            *d *= elu_prime(a);
        }
        let d_theta = tmat_mul(&self.propagated, &da0, n, self.m, EMBED_WIDTH);

        let mut gradient = Vec::with_capacity(self.parameter_count());
        gradient.extend_from_slice(&d_theta);
        gradient.extend_from_slice(&d_w1);
        gradient.extend_from_slice(&d_b1);
        gradient.extend_from_slice(&d_w2);
        gradient.extend_from_slice(&d_b2);
        Ok(GradientEvaluation {
            loss: mincut_term + penalty_term,
            mincut_term,
            penalty_term,
            gradient,
        })
    }

    fn norm_summary(&self, params: &[f64]) -> String {
        let (theta, w1, b1, w2, b2) = self.split(params);
        format!(
            "|theta| = {:.3e}, |W1| = {:.3e}, |b1| = {:.3e}, |W2| = {:.3e}, |b2| = {:.3e}",
            frobenius_norm(theta),
            frobenius_norm(w1),
            frobenius_norm(b1),
            frobenius_norm(w2),
            frobenius_norm(b2)
        )
    }
}

fn check_terms(problem: &TrainingProblem, eval_loss: f64, l1: f64, l2: f64, epoch: usize, params: &[f64]) -> Result<()> {
    if !eval_loss.is_finite() {
        return Err(Error::Numeric(format!(
            "training diverged at epoch {}: loss = {}; {}",
            epoch,
            eval_loss,
            problem.norm_summary(params)
        )));
    }
    if !(-1.0 - BOUND_SLACK..=BOUND_SLACK).contains(&l1) {
        return Err(Error::Numeric(format!(
            "min-cut term {} left [−1, 0] at epoch {}",
            l1, epoch
        )));
    }
    if !(-BOUND_SLACK..=2.0 + BOUND_SLACK).contains(&l2) {
        return Err(Error::Numeric(format!(
            "orthogonality penalty {} left [0, 2] at epoch {}",
            l2, epoch
        )));
    }
    Ok(())
}

/// Train the soft assignment with default feature construction
/// (attributes when present, else one-hot identity).
pub fn train_soft_assignment(
    g: &Graph,
    c: &CurvatureAdjustedAdjacency,
    k: usize,
    epochs: usize,
    lr: f64,
    seed: u64,
) -> Result<(Assignment, TrainState)> {
    train_soft_assignment_with_features(g, c, k, epochs, lr, seed, FeatureMode::Auto)
}

/// Train the soft assignment with an explicit feature construction.
///
/// Runs `epochs` Adam steps from a Glorot-uniform start; the loss trace
/// has `epochs + 1` entries (the value before each step plus the final
/// value). Both loss terms are bound-checked every epoch and a
/// non-finite loss aborts with the epoch and parameter norms.
pub fn train_soft_assignment_with_features(
    g: &Graph,
    c: &CurvatureAdjustedAdjacency,
    k: usize,
    epochs: usize,
    lr: f64,
    seed: u64,
    features: FeatureMode,
) -> Result<(Assignment, TrainState)> {
    if !(lr.is_finite() && lr > 0.0) {
        return Err(Error::Parameter(format!(
            "learning rate must be positive and finite, got {}",
            lr
        )));
    }
    let problem = TrainingProblem::new(g, c, k, features)?;
    let mut params = problem.initial_parameters(seed);
    let count = params.len();
    let mut adam_m = vec![0.0; count];
    let mut adam_v = vec![0.0; count];
    let mut trace = Vec::with_capacity(epochs + 1);
    for epoch in 0..epochs {
        let eval = problem.loss_and_gradient(&params)?;
        check_terms(&problem, eval.loss, eval.mincut_term, eval.penalty_term, epoch, &params)?;
        trace.push(eval.loss);
        let t = (epoch + 1) as i32;
        let bias1 = 1.0 - ADAM_BETA1.powi(t);
        let bias2 = 1.0 - ADAM_BETA2.powi(t);
        for i in 0..count {
            let g_i = eval.gradient[i];
            adam_m[i] = ADAM_BETA1 * adam_m[i] + (1.0 - ADAM_BETA1) * g_i;
            adam_v[i] = ADAM_BETA2 * adam_v[i] + (1.0 - ADAM_BETA2) * g_i * g_i;
            params[i] -= lr * (adam_m[i] / bias1) / ((adam_v[i] / bias2).sqrt() + ADAM_EPS);
        }
    }
    let (l1, l2) = problem.loss_components(&params)?;
    check_terms(&problem, l1 + l2, l1, l2, epochs, &params)?;
    trace.push(l1 + l2);
    let assignment = problem.assignment(&params)?;
    Ok((
        assignment,
        TrainState {
            loss_trace: trace,
            parameters: params,
            k,
            epochs_run: epochs,
            feature_mode: problem.feature_label(),
        },
    ))
}
