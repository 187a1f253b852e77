//! Small dense linear algebra on row-major square matrices.
//!
//! Every matrix handled by this crate is at most a few hundred rows wide,
//! usually under a dozen, so plain `Vec<f64>` storage with textbook loops is
//! all we need.

/// Where a Cholesky factorization broke down.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PivotFailure {
    /// Row whose pivot fell at or below the tolerance.
    pub index: usize,
    /// The offending pivot, before taking the square root.
    pub pivot: f64,
}

/// Lower Cholesky factor `L` of the symmetric matrix `a` (only the lower
/// triangle is read), such that `a = L Lᵀ`.
///
/// Fails as soon as a pivot `a_jj - Σ_k L_jk²` is not strictly greater than
/// `tol`, or is not finite.
pub fn cholesky(a: &[f64], n: usize, tol: f64) -> Result<Vec<f64>, PivotFailure> {
    debug_assert_eq!(a.len(), n * n);
    let mut l = vec![0.0; n * n];
    for j in 0..n {
        let mut pivot = a[j * n + j];
        for k in 0..j {
            pivot -= l[j * n + k] * l[j * n + k];
        }
        if !(pivot > tol) || !pivot.is_finite() {
            return Err(PivotFailure { index: j, pivot });
        }
        let d = pivot.sqrt();
        l[j * n + j] = d;
        for i in (j + 1)..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            l[i * n + j] = s / d;
        }
    }
    Ok(l)
}

/// `log det(a)` from its lower Cholesky factor.
pub fn log_det_from_cholesky(l: &[f64], n: usize) -> f64 {
    (0..n).map(|i| l[i * n + i].ln()).sum::<f64>() * 2.0
}

/// Determinant by LU decomposition with partial pivoting.
pub fn lu_determinant(a: &[f64], n: usize) -> f64 {
    let mut m = a.to_vec();
    let mut det = 1.0;
    for col in 0..n {
        let mut best = col;
        for row in (col + 1)..n {
            if m[row * n + col].abs() > m[best * n + col].abs() {
                best = row;
            }
        }
        if m[best * n + col] == 0.0 {
            return 0.0;
        }
        if best != col {
            for k in 0..n {
                m.swap(col * n + k, best * n + k);
            }
            det = -det;
        }
        let p = m[col * n + col];
        det *= p;
        for row in (col + 1)..n {
            let factor = m[row * n + col] / p;
            if factor != 0.0 {
                for k in col..n {
                    m[row * n + k] -= factor * m[col * n + k];
                }
            }
        }
    }
    det
}

/// Solves `L x = b` in place for lower-triangular `L`.
pub fn forward_substitute(l: &[f64], n: usize, b: &mut [f64]) {
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * n + k] * b[k];
        }
        b[i] = s / l[i * n + i];
    }
}

/// Solves `Lᵀ x = b` in place for lower-triangular `L`.
pub fn backward_substitute_transpose(l: &[f64], n: usize, b: &mut [f64]) {
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in (i + 1)..n {
            s -= l[k * n + i] * b[k];
        }
        b[i] = s / l[i * n + i];
    }
}

/// Inverse of a symmetric positive definite matrix given its Cholesky factor.
pub fn inverse_from_cholesky(l: &[f64], n: usize) -> Vec<f64> {
    let mut inv = vec![0.0; n * n];
    let mut col = vec![0.0; n];
    for j in 0..n {
        col.iter_mut().for_each(|c| *c = 0.0);
        col[j] = 1.0;
        forward_substitute(l, n, &mut col);
        backward_substitute_transpose(l, n, &mut col);
        for i in 0..n {
            inv[i * n + j] = col[i];
        }
    }
    inv
}

/// `L Lᵀ` for a lower-triangular `L`.
pub fn outer_lower(l: &[f64], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = (0..=j).map(|k| l[i * n + k] * l[j * n + k]).sum();
            out[i * n + j] = s;
            out[j * n + i] = s;
        }
    }
    out
}

/// Multiplies lower-triangular `L` by a vector.
pub fn lower_mul_vec(l: &[f64], n: usize, v: &[f64]) -> Vec<f64> {
    (0..n)
        .map(|i| (0..=i).map(|k| l[i * n + k] * v[k]).sum())
        .collect()
}
