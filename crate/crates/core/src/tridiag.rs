//! Symmetric and general tridiagonal kernels.

/// Solve `T x = rhs` for a general tridiagonal `T` given by its sub-, main
/// and super-diagonals, with partial pivoting. Returns `None` on an exactly
/// singular pivot.
pub fn solve(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Option<Vec<f64>> {
    let n = diag.len();
    assert!(sub.len() + 1 == n && sup.len() + 1 == n && rhs.len() == n);
    if n == 0 {
        return Some(Vec::new());
    }
    // Row j of the eliminated upper factor: d[j], u1[j] (j+1), u2[j] (j+2).
    let mut d = diag.to_vec();
    let mut u1: Vec<f64> = sup.iter().cloned().chain(std::iter::once(0.0)).collect();
    let mut u2 = vec![0.0; n];
    let mut l: Vec<f64> = sub.to_vec();
    let mut b = rhs.to_vec();
    for j in 0..n - 1 {
        if l[j].abs() > d[j].abs() {
            // Swap rows j and j+1.
            let (dj, u1j, u2j, bj) = (d[j], u1[j], u2[j], b[j]);
            d[j] = l[j];
            u1[j] = d[j + 1];
            u2[j] = u1[j + 1];
            b[j] = b[j + 1];
            let f = dj / d[j];
            d[j + 1] = u1j - f * u1[j];
            u1[j + 1] = u2j - f * u2[j];
            b[j + 1] = bj - f * b[j];
            l[j] = f;
        } else {
            if d[j] == 0.0 {
                return None;
            }
            let f = l[j] / d[j];
            d[j + 1] -= f * u1[j];
            if j + 1 < n - 1 {
                u1[j + 1] -= f * u2[j];
            }
            b[j + 1] -= f * b[j];
            l[j] = f;
        }
    }
    if d[n - 1] == 0.0 {
        return None;
    }
    let mut x = vec![0.0; n];
    for j in (0..n).rev() {
        let mut s = b[j];
        if j + 1 < n {
            s -= u1[j] * x[j + 1];
        }
        if j + 2 < n {
            s -= u2[j] * x[j + 2];
        }
        x[j] = s / d[j];
    }
    Some(x)
}

/// Number of eigenvalues of the symmetric tridiagonal `(diag, off)` strictly
/// below `x`.
pub fn sturm_count(diag: &[f64], off: &[f64], x: f64) -> usize {
    let mut count = 0;
    let mut q = 1.0;
    for j in 0..diag.len() {
        let e2 = if j == 0 { 0.0 } else { off[j - 1] * off[j - 1] };
        q = diag[j] - x - if j == 0 { 0.0 } else { e2 / q };
        if q == 0.0 {
            q = f64::EPSILON * (diag[j].abs() + x.abs()).max(f64::MIN_POSITIVE);
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

fn gershgorin(diag: &[f64], off: &[f64]) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for j in 0..diag.len() {
        let r = if j > 0 { off[j - 1].abs() } else { 0.0 }
            + if j < off.len() { off[j].abs() } else { 0.0 };
        lo = lo.min(diag[j] - r);
        hi = hi.max(diag[j] + r);
    }
    (lo, hi)
}

/// The `k` smallest eigenvalues by Sturm bisection, ascending.
pub fn lowest_eigenvalues(diag: &[f64], off: &[f64], k: usize) -> Vec<f64> {
    let (lo0, hi0) = gershgorin(diag, off);
    let scale = lo0.abs().max(hi0.abs()).max(f64::MIN_POSITIVE);
    (0..k.min(diag.len()))
        .map(|i| {
            let (mut lo, mut hi) = (lo0 - scale * 1e-12, hi0 + scale * 1e-12);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if sturm_count(diag, off, mid) > i {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            0.5 * (lo + hi)
        })
        .collect()
}

/// Eigenvector for an eigenvalue estimate by shifted inverse iteration,
/// normalized to unit Euclidean length. `None` if the shifted system is
/// singular at every perturbation tried.
pub fn inverse_iteration(diag: &[f64], off: &[f64], lambda: f64) -> Option<Vec<f64>> {
    let n = diag.len();
    let (lo, hi) = gershgorin(diag, off);
    let scale = lo.abs().max(hi.abs()).max(1.0);
    let mut x: Vec<f64> = (0..n).map(|j| 1.0 + 0.01 * ((j * 7919) % 101) as f64).collect();
    let mut shift = lambda + scale * 1e-14;
    for _ in 0..4 {
        let shifted: Vec<f64> = diag.iter().map(|d| d - shift).collect();
        match solve(off, &shifted, off, &x) {
            Some(y) => {
                let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
                if !norm.is_finite() || norm == 0.0 {
                    return None;
                }
                x = y.into_iter().map(|v| v / norm).collect();
            }
            None => shift += scale * 1e-12,
        }
    }
    Some(x)
}
