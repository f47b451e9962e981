//! Tridiagonal kernels behind every linear solve in the crate.

use alloc::vec;
use alloc::vec::Vec;

/// `(L v)_i = (2 v_i - v_{i-1} - v_{i+1}) / h^2` with zero Dirichlet ghosts.
pub(crate) fn apply_neg_laplacian(h: f64, v: &[f64], out: &mut [f64]) {
    let n = v.len();
    let inv_h2 = 1.0 / (h * h);
    for i in 0..n {
        let left = if i > 0 { v[i - 1] } else { 0.0 };
        let right = if i + 1 < n { v[i + 1] } else { 0.0 };
        out[i] = (2.0 * v[i] - left - right) * inv_h2;
    }
}

/// Thomas factorization of `alpha * I + beta * L` for fixed coefficients,
/// reused across many right-hand sides (one per micro step).
#[derive(Debug, Clone)]
pub(crate) struct ShiftedLaplacian {
    off: f64,
    c_prime: Vec<f64>,
    inv_denom: Vec<f64>,
}

impl ShiftedLaplacian {
    /// Requires `alpha >= 0`, `beta >= 0`, not both zero (SPD).
    pub(crate) fn new(n: usize, h: f64, alpha: f64, beta: f64) -> Self {
        let inv_h2 = 1.0 / (h * h);
        let diag = alpha + 2.0 * beta * inv_h2;
        let off = -beta * inv_h2;
        let mut c_prime = vec![0.0; n];
        let mut inv_denom = vec![0.0; n];
        let mut prev_c = 0.0;
        for i in 0..n {
            let denom = diag - off * prev_c;
            inv_denom[i] = 1.0 / denom;
            c_prime[i] = off * inv_denom[i];
            prev_c = c_prime[i];
        }
        Self { off, c_prime, inv_denom }
    }

    pub(crate) fn solve_in_place(&self, rhs: &mut [f64]) {
        let n = rhs.len();
        debug_assert_eq!(n, self.c_prime.len());
        let mut prev = 0.0;
        for (r, inv) in rhs.iter_mut().zip(&self.inv_denom) {
            *r = (*r - self.off * prev) * inv;
            prev = *r;
        }
        for i in (0..n.saturating_sub(1)).rev() {
            rhs[i] -= self.c_prime[i] * rhs[i + 1];
        }
    }
}

/// General tridiagonal solve without pivoting; callers only pass
/// diagonally dominant (row or column) systems from the Newton Jacobians.
/// `sub[0]` and `sup[n-1]` are ignored.
pub(crate) fn solve_general(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut c_prime = vec![0.0; n];
    let mut x = vec![0.0; n];
    let mut prev_c = 0.0;
    let mut prev_d = 0.0;
    for i in 0..n {
        let a = if i > 0 { sub[i] } else { 0.0 };
        let denom = diag[i] - a * prev_c;
        let c = if i + 1 < n { sup[i] / denom } else { 0.0 };
        let d = (rhs[i] - a * prev_d) / denom;
        c_prime[i] = c;
        x[i] = d;
        prev_c = c;
        prev_d = d;
    }
    for i in (0..n.saturating_sub(1)).rev() {
        x[i] -= c_prime[i] * x[i + 1];
    }
    x
}

/// Largest eigenvalue of the symmetric tridiagonal matrix with diagonal
/// `diag` and off-diagonal `off` (`off[i]` couples `i` and `i + 1`), by
/// Sturm-sequence bisection inside the Gershgorin interval.
pub(crate) fn sym_max_eigenvalue(diag: &[f64], off: &[f64]) -> f64 {
    let n = diag.len();
    let radius = |i: usize| {
        let l = if i > 0 { off[i - 1].abs() } else { 0.0 };
        let r = if i + 1 < n { off[i].abs() } else { 0.0 };
        l + r
    };
    let mut lo = (0..n).map(|i| diag[i] - radius(i)).fold(f64::INFINITY, f64::min);
    let mut hi = (0..n).map(|i| diag[i] + radius(i)).fold(f64::NEG_INFINITY, f64::max);
    // number of eigenvalues strictly below x
    let count_below = |x: f64| {
        let mut count = 0;
        let mut q = 1.0;
        for i in 0..n {
            let o2 = if i > 0 { off[i - 1] * off[i - 1] } else { 0.0 };
            q = diag[i] - x - if i > 0 { o2 / q } else { 0.0 };
            if q == 0.0 {
                q = -f64::EPSILON * (x.abs() + 1.0);
            }
            if q < 0.0 {
                count += 1;
            }
        }
        count
    };
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if count_below(mid) < n {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}
