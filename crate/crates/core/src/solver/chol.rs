//! Dense Cholesky factorization for the descent preconditioner.

/// In-place lower Cholesky factor of the row-major n×n matrix `a`. Returns
/// `false` if a pivot is not positive.
pub(super) fn factor(a: &mut [f64], n: usize) -> bool {
    for j in 0..n {
        let row_j = &mut a[j * n..(j + 1) * n];
        let mut d = row_j[j];
        for k in 0..j {
            d -= row_j[k] * row_j[k];
        }
        if !(d > 0.0) {
            return false;
        }
        let d = libm::sqrt(d);
        row_j[j] = d;
        for i in (j + 1)..n {
            let (upper, lower) = a.split_at_mut(i * n);
            let lj = &upper[j * n..j * n + j];
            let row_i = &mut lower[..n];
            let mut s = row_i[j];
            for k in 0..j {
                s -= row_i[k] * lj[k];
            }
            row_i[j] = s / d;
        }
    }
    true
}

/// Solves L Lᵀ x = b in place using a factor from [`factor`].
pub(super) fn solve(l: &[f64], n: usize, b: &mut [f64]) {
    for i in 0..n {
        let row = &l[i * n..i * n + i];
        let s: f64 = row.iter().zip(&b[..i]).map(|(a, x)| a * x).sum();
        b[i] = (b[i] - s) / l[i * n + i];
    }
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in (i + 1)..n {
            s -= l[k * n + i] * b[k];
        }
        b[i] = s / l[i * n + i];
    }
}
