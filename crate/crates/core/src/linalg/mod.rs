//! Linear-algebra kernels: a small CSR type, the dense Padé exponential and
//! the Krylov exponential-times-vector.

mod expm;
mod krylov;
mod sparse;

pub use expm::{expm, norm1};
pub use krylov::{expm_multiply, KrylovOptions, LinearOperator};
pub use sparse::CsrMatrix;

use nalgebra::DMatrix;

use crate::C64;

// nalgebra's Hermitian eigensolver can return NaN on valid density matrices
// with many exactly-zero couplings; faer's is robust there.
fn to_faer(m: &DMatrix<C64>) -> faer::Mat<C64> {
    faer::Mat::from_fn(m.nrows(), m.ncols(), |i, j| 0.5 * (m[(i, j)] + m[(j, i)].conj()))
}

/// Eigenvalues of the Hermitian part of `m`, ascending.
pub fn hermitian_eigenvalues(m: &DMatrix<C64>) -> Vec<f64> {
    let mut e = to_faer(m)
        .self_adjoint_eigenvalues(faer::Side::Lower)
        .unwrap_or_else(|_| vec![f64::NAN; m.nrows()]);
    e.sort_by(f64::total_cmp);
    e
}

/// Eigen-decomposition `(λ, U)` of the Hermitian part of `m`, with the
/// eigenvectors as the columns of `U`.
pub fn hermitian_eigen(m: &DMatrix<C64>) -> (Vec<f64>, DMatrix<C64>) {
    let n = m.nrows();
    match to_faer(m).self_adjoint_eigen(faer::Side::Lower) {
        Ok(evd) => {
            let s = evd.S().column_vector();
            let u = evd.U();
            ((0..n).map(|i| s[i].re).collect(), DMatrix::from_fn(n, n, |i, j| u[(i, j)]))
        }
        Err(_) => (vec![f64::NAN; n], DMatrix::from_element(n, n, C64::new(f64::NAN, 0.0))),
    }
}

/// Smallest eigenvalue of the Hermitian part of `m`.
pub fn min_hermitian_eigenvalue(m: &DMatrix<C64>) -> f64 {
    hermitian_eigenvalues(m).first().copied().unwrap_or(f64::INFINITY)
}
