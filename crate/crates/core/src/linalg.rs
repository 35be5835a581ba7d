//! Complex linear-algebra helpers shared by the channel and precoding code.

use nalgebra::{Complex, DMatrix, DVector, SymmetricEigen};

pub type C64 = Complex<f64>;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Largest eigenvalue and its unit eigenvector of a Hermitian matrix.
///
/// Only the Hermitian part of `m` is used.
pub fn dominant_hermitian_eigen(m: &CMatrix) -> (f64, CVector) {
    let herm = hermitian_part(m);
    let eig = SymmetricEigen::new(herm);
    let (idx, &val) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty matrix");
    let v = eig.eigenvectors.column(idx).into_owned();
    (val, normalize_phase(v))
}

/// `(m + m^H) / 2`
pub fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * C64::new(0.5, 0.0)
}

/// Rescales `v` to unit norm and rotates it so that its largest-magnitude
/// entry is real and positive. A zero vector is returned unchanged.
pub fn normalize_phase(mut v: CVector) -> CVector {
    let norm = v.norm();
    if norm == 0.0 || !norm.is_finite() {
        return v;
    }
    v /= C64::new(norm, 0.0);
    let pivot = v
        .iter()
        .copied()
        .max_by(|a, b| a.norm_sqr().total_cmp(&b.norm_sqr()))
        .unwrap_or(C64::new(1.0, 0.0));
    let rot = pivot.conj() / pivot.norm();
    v * rot
}

/// Squared Euclidean norm of `m * v`.
pub fn apply_norm_sqr(m: &CMatrix, v: &CVector) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    (m * v).norm_squared()
}

/// Vertically stacks the given blocks, which must share a column count.
pub fn vstack(blocks: &[&CMatrix], ncols: usize) -> CMatrix {
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = CMatrix::zeros(rows, ncols);
    let mut at = 0;
    for b in blocks {
        debug_assert_eq!(b.ncols(), ncols);
        out.view_mut((at, 0), (b.nrows(), ncols)).copy_from(*b);
        at += b.nrows();
    }
    out
}

pub fn all_finite(m: &CMatrix) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}
