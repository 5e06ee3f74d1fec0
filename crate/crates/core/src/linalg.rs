//! Small complex linear-algebra helpers shared by the modules.
//!
//! Matrices are `nalgebra` column-major, so `vec(X)` is simply the backing
//! slice: column `k` of an `N x K` matrix occupies `k*N .. (k+1)*N`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

/// Column-major vectorisation.
pub fn vec_of(x: &CMat) -> CVec {
    CVec::from_column_slice(x.as_slice())
}

/// Inverse of [`vec_of`].
pub fn unvec(v: &CVec, rows: usize, cols: usize) -> CMat {
    assert_eq!(v.len(), rows * cols, "unvec: length mismatch");
    CMat::from_column_slice(rows, cols, v.as_slice())
}

/// Element-wise (Hadamard) product.
pub fn hadamard(a: &CMat, b: &CMat) -> CMat {
    a.component_mul(b)
}

/// `diag(vec(A))` as a dense square matrix.
pub fn diag_of_vec(a: &CMat) -> CMat {
    CMat::from_diagonal(&vec_of(a))
}

/// Kronecker product of two vectors, `a ⊗ b`, with `b` varying fastest.
pub fn kron(a: &CVec, b: &CVec) -> CVec {
    let mut out = CVec::zeros(a.len() * b.len());
    for (i, ai) in a.iter().enumerate() {
        for (j, bj) in b.iter().enumerate() {
            out[i * b.len() + j] = ai * bj;
        }
    }
    out
}

/// `x^H y`.
pub fn inner(x: &[C64], y: &[C64]) -> C64 {
    x.iter().zip(y).map(|(a, b)| a.conj() * b).sum()
}

pub fn norm_sqr(x: &[C64]) -> f64 {
    x.iter().map(|z| z.norm_sqr()).sum()
}

pub fn frobenius_sqr(x: &CMat) -> f64 {
    norm_sqr(x.as_slice())
}

pub fn all_finite(x: &CMat) -> bool {
    x.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// Squared norm of row `n`.
pub fn row_norm_sqr(x: &CMat, n: usize) -> f64 {
    x.row(n).iter().map(|z| z.norm_sqr()).sum()
}

pub fn unit_phase(angle: f64) -> C64 {
    C64::from_polar(1.0, angle)
}
