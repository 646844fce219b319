//! Small dense helpers over `faer` matrices.

use faer::{Mat, MatRef, Side};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = Mat<Complex64>;

pub const I: Complex64 = Complex64::new(0.0, 1.0);

/// Spectrum of a Hermitian matrix, eigenvalues ascending.
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

pub fn hermitian_eigen(m: MatRef<'_, Complex64>) -> Result<HermitianEigen> {
    let evd = m
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Eigen(format!("{e:?}")))?;
    let values = evd.S().column_vector().iter().map(|z| z.re).collect();
    Ok(HermitianEigen {
        values,
        vectors: evd.U().to_owned(),
    })
}

pub fn hermitian_eigenvalues(m: MatRef<'_, Complex64>) -> Result<Vec<f64>> {
    m.self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::Eigen(format!("{e:?}")))
}

pub fn trace(m: MatRef<'_, Complex64>) -> Complex64 {
    (0..m.nrows().min(m.ncols())).map(|i| m[(i, i)]).sum()
}

/// Largest entrywise deviation `|m - m^dagger|`.
pub fn hermitian_deviation(m: MatRef<'_, Complex64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for j in 0..n {
        for i in j..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn hermitize(m: &mut CMatrix) {
    let n = m.nrows();
    for j in 0..n {
        m[(j, j)] = Complex64::new(m[(j, j)].re, 0.0);
        for i in (j + 1)..n {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)].conj());
            m[(i, j)] = avg;
            m[(j, i)] = avg.conj();
        }
    }
}

pub fn scale(m: MatRef<'_, Complex64>, c: Complex64) -> CMatrix {
    CMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] * c)
}

pub fn commutator(a: MatRef<'_, Complex64>, b: MatRef<'_, Complex64>) -> CMatrix {
    a * b - b * a
}

pub fn frobenius_norm(m: MatRef<'_, Complex64>) -> f64 {
    let mut acc = 0.0;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            acc += m[(i, j)].norm_sqr();
        }
    }
    acc.sqrt()
}

pub(crate) fn check_square(m: MatRef<'_, Complex64>, expected: usize) -> Result<()> {
    if m.nrows() != expected || m.ncols() != expected {
        return Err(Error::DimensionMismatch {
            expected,
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    Ok(())
}

/// Copies a column-major buffer into an owned matrix.
pub(crate) fn from_column_major(data: &[Complex64], n: usize) -> CMatrix {
    MatRef::from_column_major_slice(data, n, n).to_owned()
}

pub(crate) fn to_column_major(m: MatRef<'_, Complex64>, out: &mut [Complex64]) {
    let n = m.nrows();
    for j in 0..m.ncols() {
        for i in 0..n {
            out[j * n + i] = m[(i, j)];
        }
    }
}
