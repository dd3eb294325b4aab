//! Eigenvalues of largest magnitude of a dense symmetric matrix.
//!
//! Lanczos iteration with full reorthogonalization from a fixed start vector.
//! The eigenvalues of largest magnitude sit at the two ends of the spectrum,
//! which is where Ritz values converge first, so a Krylov space a few times
//! larger than the requested count is usually enough. A Ritz value `theta`
//! with Ritz vector residual `r` is within `r` of an eigenvalue, and the
//! iteration stops once every requested Ritz value has a residual below
//! `RESIDUAL_TOL * max|theta|`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

const RESIDUAL_TOL: f64 = 1e-11;
const BREAKDOWN_TOL: f64 = 1e-13;
const CHECK_EVERY: usize = 4;

/// All eigenvalues of a symmetric matrix; only the lower triangle is read.
pub fn dense_eigenvalues(a: &DMatrix<f64>) -> Result<Vec<f64>> {
    let vals = a.symmetric_eigenvalues();
    if vals.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite eigenvalue".into()));
    }
    Ok(vals.iter().copied().collect())
}

/// Outcome of a Lanczos run that did not need the dense fallback.
pub(crate) enum Lanczos {
    Converged(Vec<f64>),
    /// The Krylov space became invariant or exhausted before convergence.
    Breakdown,
}

/// Deterministic, well-spread vectors from a splitmix64 stream.
struct StartVectors {
    state: u64,
}

impl StartVectors {
    fn new() -> Self {
        StartVectors {
            state: 0x9E37_79B9_7F4A_7C15,
        }
    }

    fn next(&mut self, n: usize) -> DVector<f64> {
        DVector::from_iterator(
            n,
            (0..n).map(|_| {
                self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
                let mut z = self.state;
                z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
                z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
                z ^= z >> 31;
                (z >> 11) as f64 / (1u64 << 53) as f64 - 0.5
            }),
        )
    }
}

fn orthogonalize(w: &mut DVector<f64>, basis: &[DVector<f64>]) {
    // Two passes of classical Gram-Schmidt.
    for _ in 0..2 {
        for v in basis {
            let c = v.dot(w);
            w.axpy(-c, v, 1.0);
        }
    }
}

fn tridiagonal(alphas: &[f64], betas: &[f64]) -> DMatrix<f64> {
    let k = alphas.len();
    let mut t = DMatrix::zeros(k, k);
    for i in 0..k {
        t[(i, i)] = alphas[i];
        if i + 1 < k {
            t[(i + 1, i)] = betas[i];
            t[(i, i + 1)] = betas[i];
        }
    }
    t
}

/// Indices of the `count` entries of largest magnitude, ties broken by the
/// larger signed value.
pub(crate) fn top_by_magnitude(values: &[f64], count: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&i, &j| {
        values[j]
            .abs()
            .total_cmp(&values[i].abs())
            .then(values[j].total_cmp(&values[i]))
    });
    idx.truncate(count);
    idx
}

fn top_ritz(alphas: &[f64], betas: &[f64], count: usize) -> Vec<f64> {
    let ritz: Vec<f64> = tridiagonal(alphas, betas).symmetric_eigenvalues().iter().copied().collect();
    let mut top: Vec<f64> = top_by_magnitude(&ritz, count).iter().map(|&i| ritz[i]).collect();
    top.resize(count, 0.0);
    top
}

/// Top-`count` eigenvalues by magnitude.
///
/// When the Krylov space becomes invariant the iteration restarts from a
/// fresh vector orthogonal to the basis, so repeated eigenvalues are found
/// block by block. If `A` maps that fresh vector to (numerically) zero, the
/// unexplored complement is null and the missing eigenvalues are zero.
pub(crate) fn lanczos_top(a: &DMatrix<f64>, count: usize) -> Lanczos {
    let n = a.nrows();
    let min_steps = (2 * count + 20).min(n);
    let mut starts = StartVectors::new();
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(min_steps + 16);
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut q = starts.next(n);
    q /= q.norm();
    let mut w = DVector::zeros(n);
    let mut scale = 0.0f64;

    while basis.len() < n {
        w.gemv(1.0, a, &q, 0.0);
        let alpha = q.dot(&w);
        basis.push(q.clone());
        alphas.push(alpha);
        orthogonalize(&mut w, &basis);
        let beta = w.norm();
        let k = basis.len();
        scale = scale.max(alpha.abs()).max(beta);

        if beta <= BREAKDOWN_TOL * scale.max(f64::MIN_POSITIVE) {
            if k == n {
                break;
            }
            let mut fresh = starts.next(n);
            orthogonalize(&mut fresh, &basis);
            let norm = fresh.norm();
            if norm <= BREAKDOWN_TOL {
                return Lanczos::Breakdown;
            }
            fresh /= norm;
            w.gemv(1.0, a, &fresh, 0.0);
            if w.norm() <= BREAKDOWN_TOL * scale.max(f64::MIN_POSITIVE) {
                return Lanczos::Converged(top_ritz(&alphas, &betas, count));
            }
            betas.push(0.0);
            q = fresh;
            continue;
        }

        if k >= min_steps && (k - min_steps) % CHECK_EVERY == 0 {
            let eig = SymmetricEigen::new(tridiagonal(&alphas, &betas));
            let ritz: Vec<f64> = eig.eigenvalues.iter().copied().collect();
            let chosen = top_by_magnitude(&ritz, count);
            let top = ritz[chosen[0]].abs();
            let converged = chosen
                .iter()
                .all(|&i| (beta * eig.eigenvectors[(k - 1, i)]).abs() <= RESIDUAL_TOL * top);
            if converged {
                return Lanczos::Converged(chosen.iter().map(|&i| ritz[i]).collect());
            }
        }

        betas.push(beta);
        q = &w / beta;
    }
    if basis.len() == n {
        return Lanczos::Converged(top_ritz(&alphas, &betas, count));
    }
    Lanczos::Breakdown
}
