//! Minimal dense linear algebra for the closed-form and Newton fits: a
//! Cholesky solve for small symmetric positive-definite systems.

use crate::scalar::Real;

/// Solve `A x = b` in place for symmetric positive-definite `A` (row-major
/// `n × n`). On success `b` holds the solution and `a` is overwritten with
/// its Cholesky factor. Returns `false` when `A` is not positive definite.
pub(crate) fn cholesky_solve_in_place<R: Real>(a: &mut [R], b: &mut [R], n: usize) -> bool {
    debug_assert_eq!(a.len(), n * n);
    debug_assert_eq!(b.len(), n);

    // Factor A = L Lᵀ, storing L in the lower triangle.
    for j in 0..n {
        let mut diag = a[j * n + j];
        for k in 0..j {
            diag = diag - a[j * n + k] * a[j * n + k];
        }
        if diag <= R::zero() || !diag.is_finite() {
            return false;
        }
        let root = diag.sqrt();
        a[j * n + j] = root;
        for i in (j + 1)..n {
            let mut v = a[i * n + j];
            for k in 0..j {
                v = v - a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = v / root;
        }
    }
    // Forward solve L y = b.
    for i in 0..n {
        let mut v = b[i];
        for k in 0..i {
            v = v - a[i * n + k] * b[k];
        }
        b[i] = v / a[i * n + i];
    }
    // Back solve Lᵀ x = y.
    for i in (0..n).rev() {
        let mut v = b[i];
        for k in (i + 1)..n {
            v = v - a[k * n + i] * b[k];
        }
        b[i] = v / a[i * n + i];
    }
    true
}
