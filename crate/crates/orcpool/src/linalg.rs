//! Dense symmetric linear algebra for the pooling pipeline.
//!
//! Everything operates on row-major `Vec<f64>` buffers with explicit
//! dimensions — the matrices involved (normalized adjacencies,
//! assignment blocks) are small and dense, and keeping the storage
//! explicit makes the eigensolver and the training gradients easy to
//! audit.
//!
//! The eigensolver is a cyclic Jacobi iteration: slower than
//! tridiagonalization-based methods but unconditionally stable,
//! deterministic, and accurate to near machine precision on the
//! desk-scale matrices that pooling produces. Every returned pair is
//! re-verified against the input matrix before it leaves this module.

use crate::{Error, Result};

/// Off-diagonal mass (relative to the Frobenius norm) below which the
/// Jacobi sweep is considered converged.
pub const JACOBI_TOL: f64 = 1e-14;

/// Maximum number of full Jacobi sweeps before giving up. Convergence
/// is quadratic once rotations are small; well-conditioned matrices
/// finish in under fifteen sweeps.
pub const JACOBI_MAX_SWEEPS: usize = 100;

/// Residual and orthogonality budget each returned eigenpair must meet.
pub const EIGEN_CHECK_TOL: f64 = 1e-8;

/// Components at or below this magnitude are treated as zero when
/// picking the sign-fixing component of an eigenvector.
pub const SIGN_TOL: f64 = 1e-12;

/// Row-major matrix product: `a` is `n × m`, `b` is `m × k`, result is
/// `n × k`.
pub fn mat_mul(a: &[f64], b: &[f64], n: usize, m: usize, k: usize) -> Vec<f64> {
    debug_assert_eq!(a.len(), n * m);
    debug_assert_eq!(b.len(), m * k);
    let mut out = vec![0.0; n * k];
    for i in 0..n {
        for l in 0..m {
            let ail = a[i * m + l];
            if ail == 0.0 {
                continue;
            }
            for j in 0..k {
                out[i * k + j] += ail * b[l * k + j];
            }
        }
    }
    out
}

/// Transposed product `aᵀ · b`: `a` is `m × n`, `b` is `m × k`, result
/// is `n × k`.
pub fn tmat_mul(a: &[f64], b: &[f64], m: usize, n: usize, k: usize) -> Vec<f64> {
    debug_assert_eq!(a.len(), m * n);
    debug_assert_eq!(b.len(), m * k);
    let mut out = vec![0.0; n * k];
    for l in 0..m {
        for i in 0..n {
            let ali = a[l * n + i];
            if ali == 0.0 {
                continue;
            }
            for j in 0..k {
                out[i * k + j] += ali * b[l * k + j];
            }
        }
    }
    out
}

/// Frobenius norm of a dense buffer.
pub fn frobenius_norm(a: &[f64]) -> f64 {
    a.iter().map(|&x| x * x).sum::<f64>().sqrt()
}

/// Eigendecomposition of a symmetric matrix.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    /// Dimension of the matrix.
    pub n: usize,
    /// Eigenvalues in descending order.
    pub values: Vec<f64>,
    /// Row-major `n × n` buffer whose *column* `j` is the unit
    /// eigenvector of `values[j]`, sign-fixed so its first component
    /// larger than [`SIGN_TOL`] in magnitude is positive.
    pub vectors: Vec<f64>,
}

impl SymmetricEigen {
    /// The first `k` eigenvector columns as a row-major `n × k` buffer
    /// (one row per node), ready for k-means.
    pub fn top_k(&self, k: usize) -> Vec<f64> {
        assert!(k <= self.n, "requested {} columns of an {}-dimensional basis", k, self.n);
        let mut out = vec![0.0; self.n * k];
        for i in 0..self.n {
            for j in 0..k {
                out[i * k + j] = self.vectors[i * self.n + j];
            }
        }
        out
    }
}

fn off_diagonal_norm(a: &[f64], n: usize) -> f64 {
    let mut s = 0.0;
    for p in 0..n {
        for q in (p + 1)..n {
            s += 2.0 * a[p * n + q] * a[p * n + q];
        }
    }
    s.sqrt()
}

/// Full eigendecomposition of the symmetric matrix `a` (row-major,
/// `n × n`) by cyclic Jacobi rotations.
///
/// Errors with a validation message if the input is not symmetric, and
/// with a numeric message carrying iteration diagnostics if the sweep
/// fails to converge or a returned pair misses the residual or
/// orthogonality budget of [`EIGEN_CHECK_TOL`].
pub fn symmetric_eigen(a: &[f64], n: usize) -> Result<SymmetricEigen> {
    if a.len() != n * n {
        return Err(Error::Validation(format!(
            "matrix buffer has {} entries, expected {} for n = {}",
            a.len(),
            n * n,
            n
        )));
    }
    let scale = frobenius_norm(a).max(1.0);
    for p in 0..n {
        for q in (p + 1)..n {
            let diff = (a[p * n + q] - a[q * n + p]).abs();
            if diff > 1e-12 * scale {
                return Err(Error::Validation(format!(
                    "matrix is not symmetric: entries ({p}, {q}) and ({q}, {p}) differ by {diff}"
                )));
            }
        }
    }
    if !a.iter().all(|x| x.is_finite()) {
        return Err(Error::Numeric(
            "matrix contains non-finite entries".to_string(),
        ));
    }

    let mut work = a.to_vec();
    let mut vecs = vec![0.0; n * n];
    for i in 0..n {
        vecs[i * n + i] = 1.0;
    }

    let tol = JACOBI_TOL * scale;
    let mut sweeps = 0;
    while off_diagonal_norm(&work, n) > tol {
        if sweeps >= JACOBI_MAX_SWEEPS {
            return Err(Error::Numeric(format!(
                "Jacobi eigensolver did not converge: off-diagonal norm {} above {} after {} sweeps on a {}x{} matrix",
                off_diagonal_norm(&work, n),
                tol,
                sweeps,
                n,
                n
            )));
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = work[p * n + q];
                if apq.abs() <= tol / (n as f64) {
                    continue;
                }
                let app = work[p * n + p];
                let aqq = work[q * n + q];
                let tau = (aqq - app) / (2.0 * apq);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                // Rotate rows and columns p, q of the working matrix.
                for i in 0..n {
                    let aip = work[i * n + p];
                    let aiq = work[i * n + q];
                    work[i * n + p] = c * aip - s * aiq;
                    work[i * n + q] = s * aip + c * aiq;
                }
                for j in 0..n {
                    let apj = work[p * n + j];
                    let aqj = work[q * n + j];
                    work[p * n + j] = c * apj - s * aqj;
                    work[q * n + j] = s * apj + c * aqj;
                }
                // Accumulate the rotation into the eigenvector columns.
                for i in 0..n {
                    let vip = vecs[i * n + p];
                    let viq = vecs[i * n + q];
                    vecs[i * n + p] = c * vip - s * viq;
                    vecs[i * n + q] = s * vip + c * viq;
                }
            }
        }
        sweeps += 1;
    }

    // Sort eigenpairs by descending eigenvalue.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| work[j * n + j].total_cmp(&work[i * n + i]));
    let values: Vec<f64> = order.iter().map(|&i| work[i * n + i]).collect();
    let mut vectors = vec![0.0; n * n];
    for (new_col, &old_col) in order.iter().enumerate() {
        // Sign convention: first component with magnitude above SIGN_TOL
        // is made positive, so the basis is reproducible across runs and
        // node relabelings.
        let mut flip = 1.0;
        for i in 0..n {
            let x = vecs[i * n + old_col];
            if x.abs() > SIGN_TOL {
                if x < 0.0 {
                    flip = -1.0;
                }
                break;
            }
        }
        for i in 0..n {
            vectors[i * n + new_col] = flip * vecs[i * n + old_col];
        }
    }

    // Re-verify every pair against the input before handing it out.
    for j in 0..n {
        let mut residual = 0.0;
        for i in 0..n {
            let mut av = 0.0;
            for l in 0..n {
                av += a[i * n + l] * vectors[l * n + j];
            }
            let r = av - values[j] * vectors[i * n + j];
            residual += r * r;
        }
        let residual = residual.sqrt();
        if residual > EIGEN_CHECK_TOL * scale {
            return Err(Error::Numeric(format!(
                "eigenpair {} failed the residual check: ‖Av − λv‖ = {} after {} sweeps",
                j, residual, sweeps
            )));
        }
        for j2 in j..n {
            let mut dot = 0.0;
            for i in 0..n {
                dot += vectors[i * n + j] * vectors[i * n + j2];
            }
            let target = if j == j2 { 1.0 } else { 0.0 };
            if (dot - target).abs() > EIGEN_CHECK_TOL {
                return Err(Error::Numeric(format!(
                    "eigenvectors {} and {} failed the orthonormality check: inner product {} after {} sweeps",
                    j, j2, dot, sweeps
                )));
            }
        }
    }

    Ok(SymmetricEigen {
        n,
        values,
        vectors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn two_by_two_with_known_pairs() {
        // [[2, 1], [1, 2]] has eigenvalues 3 and 1 with eigenvectors
        // (1, 1)/√2 and (1, −1)/√2 under the positive-first convention.
        let e = symmetric_eigen(&[2.0, 1.0, 1.0, 2.0], 2).unwrap();
        assert_abs_diff_eq!(e.values[0], 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(e.values[1], 1.0, epsilon = 1e-12);
        let r = 0.5f64.sqrt();
        assert_abs_diff_eq!(e.vectors[0], r, epsilon = 1e-12); // v1[0]
        assert_abs_diff_eq!(e.vectors[2], r, epsilon = 1e-12); // v1[1]
        assert_abs_diff_eq!(e.vectors[1], r, epsilon = 1e-12); // v2[0]
        assert_abs_diff_eq!(e.vectors[3], -r, epsilon = 1e-12); // v2[1]
    }

    #[test]
    fn diagonal_matrix_sorts_descending_with_sign_fix() {
        let e = symmetric_eigen(&[1.0, 0.0, 0.0, 2.0], 2).unwrap();
        assert_eq!(e.values, vec![2.0, 1.0]);
        // First eigenvector is e_2: its first component is zero, so the
        // sign is fixed on the second component.
        assert_abs_diff_eq!(e.vectors[0], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(e.vectors[2], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(e.vectors[1], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(e.vectors[3], 0.0, epsilon = 1e-15);
    }

    #[test]
    fn triangle_normalized_adjacency_spectrum() {
        // Â of K_3 is (J − I)/2 with spectrum {1, −1/2, −1/2}.
        let a = vec![0.0, 0.5, 0.5, 0.5, 0.0, 0.5, 0.5, 0.5, 0.0];
        let e = symmetric_eigen(&a, 3).unwrap();
        assert_abs_diff_eq!(e.values[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(e.values[1], -0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(e.values[2], -0.5, epsilon = 1e-12);
        // Leading eigenvector is the normalized all-ones vector.
        let r = (1.0f64 / 3.0).sqrt();
        for i in 0..3 {
            assert_abs_diff_eq!(e.vectors[i * 3], r, epsilon = 1e-12);
        }
    }

    #[test]
    fn random_matrices_reconstruct_and_stay_orthonormal() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in [3usize, 8, 20] {
            let mut a = vec![0.0; n * n];
            for i in 0..n {
                for j in i..n {
                    let x: f64 = rng.gen_range(-1.0..1.0);
                    a[i * n + j] = x;
                    a[j * n + i] = x;
                }
            }
            let e = symmetric_eigen(&a, n).unwrap();
            // Trace is preserved by similarity transforms.
            let trace: f64 = (0..n).map(|i| a[i * n + i]).sum();
            assert_abs_diff_eq!(trace, e.values.iter().sum::<f64>(), epsilon = 1e-10);
            // Reconstruct A = V Λ Vᵀ.
            for i in 0..n {
                for j in 0..n {
                    let mut s = 0.0;
                    for l in 0..n {
                        s += e.vectors[i * n + l] * e.values[l] * e.vectors[j * n + l];
                    }
                    assert_abs_diff_eq!(s, a[i * n + j], epsilon = 1e-10);
                }
            }
            for w in e.values.windows(2) {
                assert!(w[0] >= w[1], "eigenvalues out of order");
            }
        }
    }

    #[test]
    fn top_k_extracts_leading_columns() {
        let e = symmetric_eigen(&[2.0, 1.0, 1.0, 2.0], 2).unwrap();
        let u = e.top_k(1);
        let r = 0.5f64.sqrt();
        assert_eq!(u.len(), 2);
        assert_abs_diff_eq!(u[0], r, epsilon = 1e-12);
        assert_abs_diff_eq!(u[1], r, epsilon = 1e-12);
    }

    #[test]
    fn asymmetric_input_is_rejected() {
        let err = symmetric_eigen(&[1.0, 2.0, 0.0, 1.0], 2).unwrap_err();
        assert!(err.is_validation());
        assert!(err.to_string().contains("not symmetric"));
    }

    #[test]
    fn single_entry_matrix() {
        let e = symmetric_eigen(&[4.25], 1).unwrap();
        assert_eq!(e.values, vec![4.25]);
        assert_eq!(e.vectors, vec![1.0]);
    }

    #[test]
    fn matrix_products_agree_with_hand_results() {
        // a = [[1, 2], [3, 4], [5, 6]] (3×2), b = [[1, 0], [0, 1]].
        let a = vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let b = vec![1.0, 0.0, 0.0, 1.0];
        assert_eq!(mat_mul(&a, &b, 3, 2, 2), a);
        // aᵀ·a = [[35, 44], [44, 56]].
        let ata = tmat_mul(&a, &a, 3, 2, 2);
        assert_eq!(ata, vec![35.0, 44.0, 44.0, 56.0]);
        assert_abs_diff_eq!(frobenius_norm(&b), 2.0f64.sqrt(), epsilon = 1e-15);
    }
}
