//! Small dense helpers and a Lanczos eigensolver for symmetric operators.

use faer::{Mat, Side};
use rand_distr::{Distribution, StandardNormal};

use crate::error::{DiscError, Result};

/// Flips `v` so that its largest-magnitude entry is positive (first such entry on ties).
pub fn fix_sign(v: &mut [f64]) {
    let mut best = 0usize;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v.get(best).is_some_and(|&x| x < 0.0) {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

pub fn fix_column_signs(m: &mut Mat<f64>) {
    for j in 0..m.ncols() {
        fix_sign(m.col_as_slice_mut(j));
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

/// Largest singular value.
pub fn spectral_norm(m: &Mat<f64>) -> Result<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Ok(0.0);
    }
    let s = m
        .singular_values()
        .map_err(|e| DiscError::Numeric(format!("SVD failed: {e:?}")))?;
    Ok(s.first().copied().unwrap_or(0.0))
}

/// Max absolute entry of `a - b`.
pub fn max_abs_diff(a: &Mat<f64>, b: &Mat<f64>) -> f64 {
    assert_eq!((a.nrows(), a.ncols()), (b.nrows(), b.ncols()));
    let mut m = 0.0f64;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            m = m.max((a[(i, j)] - b[(i, j)]).abs());
        }
    }
    m
}

/// Eigenpairs of a dense symmetric matrix in descending eigenvalue order.
pub fn sym_eigen_desc(m: &Mat<f64>) -> Result<(Vec<f64>, Mat<f64>)> {
    let n = m.nrows();
    let evd = m
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| DiscError::Numeric(format!("eigensolver failed: {e:?}")))?;
    let vals = evd.S().column_vector();
    let u = evd.U();
    let values = (0..n).rev().map(|i| vals[i]).collect();
    let vectors = Mat::from_fn(n, n, |i, j| u[(i, n - 1 - j)]);
    Ok((values, vectors))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Which {
    /// Algebraically largest eigenvalues.
    Largest,
    /// Eigenvalues of largest absolute value.
    LargestMagnitude,
}

#[derive(Debug, Clone, Copy)]
pub struct LanczosOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 400,
            seed: 0x5eed,
        }
    }
}

/// `k` extremal eigenpairs of the symmetric operator `apply(x, y): y = A x`.
///
/// Plain Lanczos with full reorthogonalization; the Krylov space grows until
/// every wanted Ritz pair has residual below `tol * max(1, |theta|)`. The start
/// vector is derived from `opts.seed`, so results are deterministic.
pub fn lanczos<F>(
    n: usize,
    k: usize,
    which: Which,
    opts: LanczosOptions,
    apply: F,
) -> Result<(Vec<f64>, Mat<f64>)>
where
    F: Fn(&[f64], &mut [f64]),
{
    if k == 0 || k > n {
        return Err(DiscError::Parameter(format!(
            "cannot compute {k} eigenpairs of an order-{n} operator"
        )));
    }
    let max_dim = opts.max_iter.min(n).max(k);
    let mut rng = crate::rng::stream_rng(opts.seed, n as u64);
    let mut q: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
    let nq = norm2(&q);
    q.iter_mut().for_each(|x| *x /= nq);

    let mut basis: Vec<Vec<f64>> = vec![q];
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut w = vec![0.0; n];

    loop {
        let j = basis.len() - 1;
        apply(&basis[j], &mut w);
        let a = dot(&w, &basis[j]);
        alpha.push(a);
        // Two passes of classical Gram-Schmidt against the whole basis.
        for _ in 0..2 {
            for b in &basis {
                let c = dot(&w, b);
                w.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
            }
        }
        let b = norm2(&w);
        let m = alpha.len();

        let done_space = b <= 1e-14 * alpha.iter().fold(1.0f64, |acc, x| acc.max(x.abs()));
        let check = m >= k && (m >= max_dim || done_space || m % 5 == 0 || m == k);
        if check {
            let (theta, y) = tridiag_eigen(&alpha, &beta)?;
            let order = select(&theta, k, which);
            let converged = done_space
                || order.iter().all(|&i| {
                    let res = (b * y[(m - 1, i)]).abs();
                    res <= opts.tol * theta[i].abs().max(1.0)
                });
            if converged || m >= max_dim {
                if !converged {
                    return Err(DiscError::Numeric(format!(
                        "Lanczos did not converge in {m} iterations"
                    )));
                }
                let mut vecs = Mat::zeros(n, k);
                for (c, &i) in order.iter().enumerate() {
                    let col = vecs.col_as_slice_mut(c);
                    for (t, bv) in basis.iter().enumerate() {
                        let coef = y[(t, i)];
                        col.iter_mut().zip(bv).for_each(|(x, v)| *x += coef * v);
                    }
                    let nc = norm2(col);
                    col.iter_mut().for_each(|x| *x /= nc);
                }
                return Ok((order.iter().map(|&i| theta[i]).collect(), vecs));
            }
        }
        if done_space {
            // Invariant subspace found before k pairs were available.
            return Err(DiscError::Numeric(
                "Krylov space exhausted before enough eigenpairs were found".into(),
            ));
        }
        beta.push(b);
        let next: Vec<f64> = w.iter().map(|x| x / b).collect();
        basis.push(next);
    }
}

fn tridiag_eigen(alpha: &[f64], beta: &[f64]) -> Result<(Vec<f64>, Mat<f64>)> {
    let m = alpha.len();
    let t = Mat::from_fn(m, m, |i, j| {
        if i == j {
            alpha[i]
        } else if i == j + 1 {
            beta[j]
        } else if j == i + 1 {
            beta[i]
        } else {
            0.0
        }
    });
    sym_eigen_desc(&t)
}

fn select(theta: &[f64], k: usize, which: Which) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..theta.len()).collect();
    match which {
        Which::Largest => idx.sort_by(|&a, &b| theta[b].total_cmp(&theta[a])),
        Which::LargestMagnitude => {
            idx.sort_by(|&a, &b| theta[b].abs().total_cmp(&theta[a].abs()))
        }
    }
    idx.truncate(k);
    idx
}

/// Dense symmetric matrix-vector product `y = A x` (column-major, so `A^T x`).
pub fn sym_matvec(a: &Mat<f64>, x: &[f64], y: &mut [f64]) {
    use rayon::prelude::*;
    if y.len() >= 512 {
        y.par_iter_mut()
            .enumerate()
            .for_each(|(j, yj)| *yj = dot(a.col_as_slice(j), x));
    } else {
        for (j, yj) in y.iter_mut().enumerate() {
            *yj = dot(a.col_as_slice(j), x);
        }
    }
}

/// Least-squares slope of `y` against `x`.
pub fn ls_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}
