//! Small dense kernels: Cholesky solves and power iteration.

use ndarray::{Array1, Array2, ArrayView2};

/// Lower Cholesky factor of a symmetric positive definite matrix, or `None`
/// when a pivot is not comfortably positive.
pub fn cholesky(a: ArrayView2<f64>) -> Option<Array2<f64>> {
    let n = a.nrows();
    debug_assert_eq!(n, a.ncols());
    let scale = (0..n)
        .map(|i| a[[i, i]].abs())
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    let mut l = Array2::<f64>::zeros((n, n));
    for j in 0..n {
        let mut diag = a[[j, j]];
        for p in 0..j {
            diag -= l[[j, p]] * l[[j, p]];
        }
        if diag.is_nan() || diag <= 1e-13 * scale {
            return None;
        }
        let ljj = diag.sqrt();
        l[[j, j]] = ljj;
        for i in j + 1..n {
            let mut s = a[[i, j]];
            for p in 0..j {
                s -= l[[i, p]] * l[[j, p]];
            }
            l[[i, j]] = s / ljj;
        }
    }
    Some(l)
}

/// Solve `L L^T x = b` for each column of `b`, in place.
pub fn cholesky_solve_in_place(l: &Array2<f64>, b: &mut Array2<f64>) {
    let n = l.nrows();
    for c in 0..b.ncols() {
        for i in 0..n {
            let mut s = b[[i, c]];
            for p in 0..i {
                s -= l[[i, p]] * b[[p, c]];
            }
            b[[i, c]] = s / l[[i, i]];
        }
        for i in (0..n).rev() {
            let mut s = b[[i, c]];
            for p in i + 1..n {
                s -= l[[p, i]] * b[[p, c]];
            }
            b[[i, c]] = s / l[[i, i]];
        }
    }
}

/// Largest eigenvalue of a symmetric positive semidefinite matrix by power
/// iteration, stopping early once the Rayleigh quotient settles to `rel_tol`.
pub fn largest_eigenvalue(a: ArrayView2<f64>, max_iter: usize, rel_tol: f64) -> f64 {
    let n = a.nrows();
    if n == 0 {
        return 0.0;
    }
    // slightly uneven start so it is never orthogonal to a symmetric top eigenvector
    let mut v = Array1::from_shape_fn(n, |i| 1.0 + 0.01 * (i as f64 + 1.0).sqrt());
    let norm = v.dot(&v).sqrt();
    v /= norm;
    let mut estimate = 0.0;
    for _ in 0..max_iter {
        let w = a.dot(&v);
        let next = v.dot(&w);
        let wn = w.dot(&w).sqrt();
        if wn == 0.0 {
            return 0.0;
        }
        v = w / wn;
        let settled = (next - estimate).abs() <= rel_tol * next.abs();
        estimate = next;
        if settled {
            break;
        }
    }
    estimate
}
