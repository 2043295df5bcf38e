//! Small dense linear-algebra helpers shared by the solvers.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
pub use num_complex::Complex64 as C64;

use crate::{Error, Result};

pub type CMatrix = DMatrix<C64>;
pub type RMatrix = DMatrix<f64>;

pub fn complexify(m: &RMatrix) -> CMatrix {
    m.map(|x| C64::new(x, 0.0))
}

/// Largest entry in absolute value, `‖M‖_max`.
pub fn max_abs_real(m: &RMatrix) -> f64 {
    m.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0_f64, |acc, x| acc.max(x.norm()))
}

/// Eigen-decomposition of a Hermitian matrix: ascending eigenvalues and the
/// matching unitary eigenvector matrix.
pub fn hermitian_eigen(m: &CMatrix) -> Result<(Vec<f64>, CMatrix)> {
    let n = m.nrows();
    if n == 1 {
        return Ok((vec![m[(0, 0)].re], CMatrix::identity(1, 1)));
    }
    let eig = SymmetricEigen::try_new(m.clone(), f64::EPSILON, 1000 * n.max(1)).ok_or(Error::EigenFailure)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = CMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    Ok((values, vectors))
}

/// Largest eigenvalue of a Hermitian matrix.
pub fn hermitian_max_eigenvalue(m: &CMatrix) -> Result<f64> {
    let (values, _) = hermitian_eigen(m)?;
    Ok(*values.last().expect("non-empty matrix"))
}

/// `exp(-i G h)` for Hermitian `G`, assembled from its eigen-decomposition.
pub fn hermitian_propagator(g: &CMatrix, h: f64) -> Result<CMatrix> {
    let (values, vectors) = hermitian_eigen(g)?;
    let phases = DVector::from_iterator(
        values.len(),
        values.iter().map(|&lambda| C64::from_polar(1.0, -lambda * h)),
    );
    let scaled = CMatrix::from_fn(vectors.nrows(), vectors.ncols(), |r, c| vectors[(r, c)] * phases[c]);
    Ok(scaled * vectors.adjoint())
}

/// `e^{A}` by scaling and squaring with Padé approximants.
pub fn expm(a: &RMatrix) -> RMatrix {
    a.exp()
}

/// Returns `(e^{A h}, h φ₁(A h))` where `φ₁(z) = (e^z − 1)/z`.
///
/// Both blocks come from one exponential of the augmented matrix
/// `[[A, I], [0, 0]] h`, so singular `A` needs no special casing.
pub fn exp_and_phi1(a: &RMatrix, h: f64) -> (RMatrix, RMatrix) {
    let d = a.nrows();
    let mut aug = RMatrix::zeros(2 * d, 2 * d);
    aug.view_mut((0, 0), (d, d)).copy_from(&(a * h));
    for i in 0..d {
        aug[(i, d + i)] = h;
    }
    let e = aug.exp();
    (e.view((0, 0), (d, d)).into_owned(), e.view((0, d), (d, d)).into_owned())
}

/// Frobenius norm of the commutator `XY − YX`.
pub fn commutator_norm(x: &RMatrix, y: &RMatrix) -> f64 {
    (x * y - y * x).norm()
}

/// Neumaier-compensated sum.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0_f64;
    let mut comp = 0.0_f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}
