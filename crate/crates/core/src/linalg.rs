//! Small dense helpers shared by the quantizer and estimator.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::{CMatrix, Error, Result};

/// `U·v`: running sum, `U` being the lower-triangular all-ones matrix.
pub(crate) fn accumulate<T: Copy + std::ops::Add<Output = T> + Default>(v: &[T]) -> Vec<T> {
    let mut acc = T::default();
    v.iter()
        .map(|&x| {
            acc = acc + x;
            acc
        })
        .collect()
}

/// `U⁻¹·v`: first difference, `v[0]` passed through.
pub(crate) fn first_difference<T: Copy + std::ops::Sub<Output = T>>(v: &[T]) -> Vec<T> {
    let mut out = Vec::with_capacity(v.len());
    for (i, &x) in v.iter().enumerate() {
        out.push(if i == 0 { x } else { x - v[i - 1] });
    }
    out
}

/// Lower-triangular all-ones matrix.
pub(crate) fn accumulator_matrix(n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |i, j| if j <= i { 1.0 } else { 0.0 })
}

/// Inverse of [`accumulator_matrix`]: `+1` on the diagonal, `-1` on the first
/// subdiagonal.
pub(crate) fn accumulator_inverse(n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            1.0
        } else if i == j + 1 {
            -1.0
        } else {
            0.0
        }
    })
}

pub(crate) fn to_complex(m: &DMatrix<f64>) -> CMatrix {
    m.map(|x| Complex64::new(x, 0.0))
}

/// Hermitian principal inverse square root of a real symmetric positive
/// definite matrix.
pub(crate) fn principal_inverse_sqrt(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eig = SymmetricEigen::new(m.clone());
    if let Some(bad) = eig.eigenvalues.iter().find(|&&l| l.is_nan() || l <= 0.0) {
        return Err(Error::Numerical(format!(
            "matrix is not positive definite (eigenvalue {bad})"
        )));
    }
    let scale = DVector::from_iterator(
        eig.eigenvalues.len(),
        eig.eigenvalues.iter().map(|l| l.sqrt().recip()),
    );
    let v = &eig.eigenvectors;
    Ok(v * DMatrix::from_diagonal(&scale) * v.transpose())
}

/// Extends the orthonormal columns of `thin` (n × k) to an n × n unitary
/// matrix whose first k columns are `thin` itself.
pub(crate) fn complete_unitary(thin: &CMatrix) -> CMatrix {
    let (n, k) = thin.shape();
    let mut work = thin.clone();
    let mut q = CMatrix::identity(n, n);
    for j in 0..k.min(n) {
        let x = work.view((j, j), (n - j, 1)).clone_owned();
        let norm = x.norm();
        if norm == 0.0 {
            continue;
        }
        let x0 = x[0];
        let phase = if x0.norm() > 0.0 {
            x0 / x0.norm()
        } else {
            Complex64::new(1.0, 0.0)
        };
        let mut v = x;
        v[0] += phase * norm;
        let vnorm_sq = v.norm_squared();
        if vnorm_sq == 0.0 {
            continue;
        }
        let two = Complex64::new(2.0 / vnorm_sq, 0.0);

        // work[j.., j..] <- (I - 2vvᴴ/vᴴv) work[j.., j..]
        let mut block = work.view_mut((j, j), (n - j, k - j));
        let proj = v.adjoint() * &block;
        block -= &v * proj * two;

        // q[:, j..] <- q[:, j..] (I - 2vvᴴ/vᴴv)
        let mut qblock = q.view_mut((0, j), (n, n - j));
        let qv = &qblock * &v;
        qblock -= qv * v.adjoint() * two;
    }
    q.view_mut((0, 0), (n, k)).copy_from(thin);
    q
}

pub(crate) fn frobenius_sq(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum()
}
