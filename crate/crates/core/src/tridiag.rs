//! Thomas algorithm for tridiagonal systems.

/// Solve `a_i x_{i-1} + b_i x_i + c_i x_{i+1} = d_i` in place; `a[0]` and
/// `c[n-1]` are ignored. The solution overwrites `d`. `scratch` must hold
/// `n` values.
pub fn solve(a: &[f64], b: &[f64], c: &[f64], d: &mut [f64], scratch: &mut [f64]) {
    let n = d.len();
    debug_assert!(a.len() == n && b.len() == n && c.len() == n && scratch.len() >= n);
    scratch[0] = c[0] / b[0];
    d[0] /= b[0];
    for i in 1..n {
        let m = b[i] - a[i] * scratch[i - 1];
        scratch[i] = c[i] / m;
        d[i] = (d[i] - a[i] * d[i - 1]) / m;
    }
    for i in (0..n - 1).rev() {
        d[i] -= scratch[i] * d[i + 1];
    }
}
