//! Dense eigen and norm helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::C64;

/// Eigenpairs of a Hermitian matrix, eigenvalues ascending.
pub(crate) struct Eigen<T: nalgebra::Scalar> {
    pub values: Vec<f64>,
    pub vectors: DMatrix<T>,
}

impl<T: nalgebra::Scalar + Copy> Eigen<T> {
    pub fn vector(&self, k: usize) -> DVector<T> {
        self.vectors.column(k).into_owned()
    }
}

pub(crate) fn symmetric_eigen(m: &DMatrix<f64>) -> Eigen<f64> {
    let n = m.nrows();
    if n == 0 {
        return Eigen {
            values: Vec::new(),
            vectors: DMatrix::zeros(0, 0),
        };
    }
    let eig = SymmetricEigen::new(m.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    Eigen {
        values: order.iter().map(|&k| eig.eigenvalues[k]).collect(),
        vectors: DMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]),
    }
}

/// Eigenpairs of a Hermitian matrix; real input takes the real solver.
pub(crate) fn hermitian_eigen(m: &DMatrix<C64>) -> Eigen<C64> {
    let n = m.nrows();
    if m.iter().all(|z| z.im == 0.0) {
        let real = symmetric_eigen(&m.map(|z| z.re));
        return Eigen {
            values: real.values,
            vectors: real.vectors.map(|x| C64::new(x, 0.0)),
        };
    }
    if n == 0 {
        return Eigen {
            values: Vec::new(),
            vectors: DMatrix::zeros(0, 0),
        };
    }
    let eig = SymmetricEigen::new(m.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    Eigen {
        values: order.iter().map(|&k| eig.eigenvalues[k]).collect(),
        vectors: DMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]),
    }
}

/// `(M + M*) / 2`.
pub(crate) fn hermitian_part(m: &DMatrix<C64>) -> DMatrix<C64> {
    let n = m.nrows();
    DMatrix::from_fn(n, n, |i, j| (m[(i, j)] + m[(j, i)].conj()) * 0.5)
}

/// Largest singular value.
pub(crate) fn spectral_norm(m: &DMatrix<C64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().svd(false, false).singular_values.max()
}

/// `z* M z` (real part).
pub(crate) fn quadratic_form(m: &DMatrix<C64>, z: &DVector<C64>) -> f64 {
    (z.adjoint() * m * z)[(0, 0)].re
}

pub(crate) fn max_abs(m: &DMatrix<C64>) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}
