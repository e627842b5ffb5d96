//! Hermitian eigenproblems, solved with faer. Matrices stay in nalgebra
//! containers elsewhere in the crate.

use faer::complex_native::c64;
use faer::{Mat, Side};
use nalgebra::DMatrix;
use num_complex::Complex64;

/// Eigenvalues and orthonormal eigenvectors (as columns), eigenvalues ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseEigen {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: DMatrix<f64>,
}

/// Full decomposition of a real symmetric matrix. Only the lower triangle is read.
pub fn symmetric_eigen(m: &DMatrix<f64>) -> DenseEigen {
    let n = m.nrows();
    let a = Mat::<f64>::from_fn(n, n, |i, j| m[(i, j)]);
    let evd = a.selfadjoint_eigendecomposition(Side::Lower);
    let s = evd.s().column_vector();
    let u = evd.u();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| s.read(x).total_cmp(&s.read(y)));
    DenseEigen {
        eigenvalues: order.iter().map(|&k| s.read(k)).collect(),
        eigenvectors: DMatrix::from_fn(n, n, |i, j| u.read(i, order[j])),
    }
}

/// Eigenvalues of a real symmetric matrix, ascending.
pub fn symmetric_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let n = m.nrows();
    let a = Mat::<f64>::from_fn(n, n, |i, j| m[(i, j)]);
    let mut ev = a.selfadjoint_eigenvalues(Side::Lower);
    ev.sort_by(f64::total_cmp);
    ev
}

/// Eigenvalues of a Hermitian matrix, ascending. Only the lower triangle is read.
pub fn hermitian_eigenvalues(m: &DMatrix<Complex64>) -> Vec<f64> {
    let n = m.nrows();
    let a = Mat::<c64>::from_fn(n, n, |i, j| {
        let z = m[(i, j)];
        c64::new(z.re, z.im)
    });
    let mut ev = a.selfadjoint_eigenvalues(Side::Lower);
    ev.sort_by(f64::total_cmp);
    ev
}
