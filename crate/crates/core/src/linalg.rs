//! Dense complex linear algebra helpers shared by the operator and semigroup code.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};
use num_complex::Complex64;

pub type CMatrix = DMatrix<Complex64>;
/// Coordinates of a vector in an operator's working basis.
pub type Coefficients = DVector<Complex64>;

pub(crate) const ZERO: Complex64 = Complex64::new(0.0, 0.0);

pub fn real_vector(values: &[f64]) -> Coefficients {
    DVector::from_iterator(values.len(), values.iter().map(|&v| Complex64::new(v, 0.0)))
}

pub fn real_matrix(rows: usize, cols: usize, row_major: &[f64]) -> CMatrix {
    DMatrix::from_row_iterator(rows, cols, row_major.iter().map(|&v| Complex64::new(v, 0.0)))
}

pub fn diagonal(values: &[f64]) -> CMatrix {
    let mut m = CMatrix::zeros(values.len(), values.len());
    for (i, &v) in values.iter().enumerate() {
        m[(i, i)] = Complex64::new(v, 0.0);
    }
    m
}

pub fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).scale(0.5)
}

/// Largest entry of `m - m^*` relative to the largest entry of `m`.
pub fn hermitian_defect(m: &CMatrix) -> f64 {
    let scale = max_abs(m).max(f64::MIN_POSITIVE);
    max_abs(&(m - m.adjoint())) / scale
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Ascending eigenvalues of a Hermitian matrix.
pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    let eig = SymmetricEigen::new(hermitian_part(m));
    let mut values: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    values.sort_by(f64::total_cmp);
    values
}

pub(crate) fn cholesky(m: &CMatrix) -> Option<Cholesky<Complex64, Dyn>> {
    hermitian_part(m).cholesky()
}

/// `L^{-1} A L^{-*}` where `B = L L^*`; the Hermitian eigenvalues of the result
/// are the eigenvalues of the pencil `(A, B)`.
pub(crate) fn whiten(a: &CMatrix, chol: &Cholesky<Complex64, Dyn>) -> CMatrix {
    let l = chol.l();
    let left = l
        .solve_lower_triangular(a)
        .expect("Cholesky factor has a non-zero diagonal");
    let both = l
        .solve_lower_triangular(&left.adjoint())
        .expect("Cholesky factor has a non-zero diagonal");
    both.adjoint()
}

/// Ascending eigenvalues of the Hermitian pencil `(A, B)` with `B` positive definite.
pub(crate) fn pencil_eigenvalues(a: &CMatrix, chol: &Cholesky<Complex64, Dyn>) -> Vec<f64> {
    hermitian_eigenvalues(&whiten(&hermitian_part(a), chol))
}

/// `Re(x^* G x)`, clamped at zero against rounding.
pub fn quadratic_form(gram: &CMatrix, x: &Coefficients) -> f64 {
    x.dotc(&(gram * x)).re.max(0.0)
}

pub fn euclidean_norm(x: &Coefficients) -> f64 {
    x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn matrix_one_norm(m: &CMatrix) -> f64 {
    (0..m.ncols())
        .map(|j| m.column(j).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}
