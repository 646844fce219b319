//! Quantum Fisher information estimators and reference bounds.
//!
//! Two independent routes are provided: the spectral formula
//! `F = 2 sum_{kl} |<k| d rho |l>|^2 / (l_k + l_l)` and the Bures expansion
//! `Fid(rho_g, rho_{g+dg}) ~ 1 - F dg^2 / 8` of the Uhlmann fidelity.

use faer::MatRef;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, HermitianEigen};
use crate::spin::DensityMatrix;

/// Pairs with `l_k + l_l` at or below this are skipped.
pub const DENOMINATOR_CUTOFF: f64 = 1e-12;
/// Hermiticity tolerance on estimator inputs.
pub const HERMITIAN_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QfiValue {
    pub value: f64,
    /// Eigenvalue pairs that passed the denominator cutoff.
    pub n_terms_kept: usize,
}

pub fn qfi_spectral(rho: &DensityMatrix, drho: MatRef<'_, Complex64>) -> Result<QfiValue> {
    linalg::check_square(drho, rho.dim())?;
    let dev = linalg::hermitian_deviation(rho.as_ref()).max(linalg::hermitian_deviation(drho));
    if dev > HERMITIAN_TOL {
        return Err(Error::NotHermitian(dev));
    }
    let eig = linalg::hermitian_eigen(rho.as_ref())?;
    qfi_from_eigen(&eig, drho)
}

/// Spectral QFI given an eigendecomposition of `rho`.
pub fn qfi_from_eigen(eig: &HermitianEigen, drho: MatRef<'_, Complex64>) -> Result<QfiValue> {
    let n = eig.values.len();
    linalg::check_square(drho, n)?;
    let lambda: Vec<f64> = eig.values.iter().map(|&l| l.max(0.0)).collect();
    // Only eigenvectors whose partner can pass the cutoff matter.
    let u = eig.vectors.as_ref();
    let in_basis: CMatrix = u.adjoint() * drho * u;
    let mut value = 0.0;
    let mut kept = 0;
    for l in 0..n {
        for k in 0..n {
            let denom = lambda[k] + lambda[l];
            if denom > DENOMINATOR_CUTOFF {
                value += in_basis[(k, l)].norm_sqr() / denom;
                kept += 1;
            }
        }
    }
    Ok(QfiValue {
        value: 2.0 * value,
        n_terms_kept: kept,
    })
}

/// `U diag(sqrt(max(l, 0))) U^dagger`.
fn psd_sqrt(m: MatRef<'_, Complex64>) -> Result<CMatrix> {
    let eig = linalg::hermitian_eigen(m)?;
    let n = eig.values.len();
    let u = eig.vectors.as_ref();
    let scaled = CMatrix::from_fn(n, n, |i, j| u[(i, j)] * eig.values[j].max(0.0).sqrt());
    Ok(scaled * u.adjoint())
}

/// Uhlmann fidelity `Tr sqrt(sqrt(a) b sqrt(a))`.
///
/// Evaluated as the nuclear norm of `sqrt(a) sqrt(b)`, whose singular values
/// are the square roots of the spectrum of `sqrt(a) b sqrt(a)`. Taking singular
/// values directly keeps near-zero modes accurate to machine precision
/// instead of `sqrt(eps)`, which matters when `1 - F` is itself tiny.
pub fn fidelity(rho_a: &DensityMatrix, rho_b: &DensityMatrix) -> Result<f64> {
    linalg::check_square(rho_b.as_ref(), rho_a.dim())?;
    let product = psd_sqrt(rho_a.as_ref())? * psd_sqrt(rho_b.as_ref())?;
    let sv = product
        .singular_values()
        .map_err(|e| Error::Eigen(format!("{e:?}")))?;
    Ok(sv.iter().sum::<f64>().clamp(0.0, 1.0))
}

/// QFI from the Bures expansion: `8 (1 - Fid) / dg^2`.
pub fn qfi_fidelity(rho_g: &DensityMatrix, rho_g_plus: &DensityMatrix, dg: f64) -> Result<f64> {
    if !(dg > 0.0) || !dg.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "displacement dg must be positive, got {dg}"
        )));
    }
    let fid = fidelity(rho_g, rho_g_plus)?;
    Ok(8.0 * (1.0 - fid) / (dg * dg))
}

/// Quantum Cramer-Rao bound on the field uncertainty.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Uncertainty {
    Finite(f64),
    /// Zero QFI: the measurement carries no information on `g`.
    Infinite,
}

impl Uncertainty {
    pub fn value(self) -> f64 {
        match self {
            Uncertainty::Finite(v) => v,
            Uncertainty::Infinite => f64::INFINITY,
        }
    }
}

/// `dg >= 1 / sqrt(M F)`.
pub fn cramer_rao(qfi: f64, n_measurements: u64) -> Result<Uncertainty> {
    if n_measurements == 0 {
        return Err(Error::InvalidParameter("n_measurements must be at least 1".into()));
    }
    if !(qfi >= 0.0) || !qfi.is_finite() {
        return Err(Error::InvalidParameter(format!("QFI must be non-negative, got {qfi}")));
    }
    if qfi == 0.0 {
        return Ok(Uncertainty::Infinite);
    }
    Ok(Uncertainty::Finite(1.0 / (n_measurements as f64 * qfi).sqrt()))
}

/// Reference QFI scalings in spin number and time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    /// `N t`
    pub classical: f64,
    /// `N t^2`, separable probes with coherence.
    pub coherent: f64,
    /// `N^2 t^2`
    pub heisenberg: f64,
}

pub fn bounds(n_spins: usize, t: f64) -> BoundReport {
    let n = n_spins as f64;
    BoundReport {
        classical: n * t,
        coherent: n * t * t,
        heisenberg: n * n * t * t,
    }
}
