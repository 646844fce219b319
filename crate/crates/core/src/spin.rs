//! Collective spin operators and states in the symmetric (Dicke) sector.
//!
//! Basis index `j = 0..=N` labels `|S, m>` with `S = N/2` and `m = S - j`, so
//! index 0 is the fully polarized "up" state and `S^-` lives on the first
//! subdiagonal.

use faer::MatRef;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Dense collective spin operators for `N` spin-1/2 particles.
#[derive(Debug, Clone)]
pub struct SpinOperators {
    pub n_spins: usize,
    pub dim: usize,
    pub sx: CMatrix,
    pub sy: CMatrix,
    pub sz: CMatrix,
    pub s_plus: CMatrix,
    pub s_minus: CMatrix,
    /// `m` for each basis index.
    pub m_values: Vec<f64>,
    /// `ladder[j] = <j+1| S^- |j>`; the last entry is zero.
    pub ladder: Vec<f64>,
}

impl SpinOperators {
    /// Total spin `S = N/2`.
    pub fn spin(&self) -> f64 {
        self.n_spins as f64 / 2.0
    }

    pub fn identity(&self) -> CMatrix {
        CMatrix::from_fn(self.dim, self.dim, |i, j| {
            if i == j {
                Complex64::new(1.0, 0.0)
            } else {
                ZERO
            }
        })
    }
}

pub fn build_spin_operators(n_spins: usize) -> Result<SpinOperators> {
    if n_spins == 0 {
        return Err(Error::InvalidParameter("n_spins must be at least 1".into()));
    }
    let dim = n_spins + 1;
    let s = n_spins as f64 / 2.0;
    let m_values: Vec<f64> = (0..dim).map(|j| s - j as f64).collect();
    let ladder: Vec<f64> = m_values
        .iter()
        .map(|&m| (s * (s + 1.0) - m * (m - 1.0)).max(0.0).sqrt())
        .collect();

    let mut s_minus = CMatrix::zeros(dim, dim);
    for j in 0..dim - 1 {
        s_minus[(j + 1, j)] = Complex64::new(ladder[j], 0.0);
    }
    let s_plus = s_minus.adjoint().to_owned();
    let half = Complex64::new(0.5, 0.0);
    let sx = CMatrix::from_fn(dim, dim, |i, j| half * (s_plus[(i, j)] + s_minus[(i, j)]));
    let sy = CMatrix::from_fn(dim, dim, |i, j| {
        (s_plus[(i, j)] - s_minus[(i, j)]) / Complex64::new(0.0, 2.0)
    });
    let sz = CMatrix::from_fn(dim, dim, |i, j| {
        if i == j {
            Complex64::new(m_values[i], 0.0)
        } else {
            ZERO
        }
    });

    Ok(SpinOperators {
        n_spins,
        dim,
        sx,
        sy,
        sz,
        s_plus,
        s_minus,
        m_values,
        ladder,
    })
}

/// A density matrix in the Dicke basis.
#[derive(Debug, Clone)]
pub struct DensityMatrix {
    data: CMatrix,
}

impl DensityMatrix {
    pub const HERMITIAN_TOL: f64 = 1e-10;
    pub const TRACE_TOL: f64 = 1e-10;
    pub const EIGEN_TOL: f64 = 1e-9;

    /// Validates Hermiticity, unit trace and positivity.
    pub fn new(data: CMatrix) -> Result<Self> {
        if data.nrows() != data.ncols() {
            return Err(Error::DimensionMismatch {
                expected: data.nrows(),
                rows: data.nrows(),
                cols: data.ncols(),
            });
        }
        let dev = linalg::hermitian_deviation(data.as_ref());
        if dev > Self::HERMITIAN_TOL {
            return Err(Error::NotHermitian(dev));
        }
        let tr = linalg::trace(data.as_ref());
        if (tr - Complex64::new(1.0, 0.0)).norm() > Self::TRACE_TOL {
            return Err(Error::InvalidState(format!("trace {tr} differs from 1")));
        }
        let min_eig = linalg::hermitian_eigenvalues(data.as_ref())?
            .into_iter()
            .fold(f64::INFINITY, f64::min);
        if min_eig < -Self::EIGEN_TOL {
            return Err(Error::InvalidState(format!(
                "negative eigenvalue {min_eig:.3e}"
            )));
        }
        Ok(Self { data })
    }

    /// Wraps a matrix without checking the density-matrix invariants.
    pub fn from_matrix_unchecked(data: CMatrix) -> Self {
        Self { data }
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn as_ref(&self) -> MatRef<'_, Complex64> {
        self.data.as_ref()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.data
    }

    pub fn into_matrix(self) -> CMatrix {
        self.data
    }

    /// Pure state `|psi><psi|` from a (not necessarily normalized) amplitude vector.
    pub fn from_pure(amplitudes: &[Complex64]) -> Result<Self> {
        let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if norm <= 0.0 {
            return Err(Error::InvalidParameter("zero state vector".into()));
        }
        let n = amplitudes.len();
        Ok(Self {
            data: CMatrix::from_fn(n, n, |i, j| amplitudes[i] * amplitudes[j].conj() / norm),
        })
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        let p = Complex64::new(1.0 / dim as f64, 0.0);
        Self {
            data: CMatrix::from_fn(dim, dim, |i, j| if i == j { p } else { ZERO }),
        }
    }
}

fn check_n(n_spins: usize) -> Result<()> {
    if n_spins == 0 {
        Err(Error::InvalidParameter("n_spins must be at least 1".into()))
    } else {
        Ok(())
    }
}

/// `|S, S><S, S|`, all spins up along z.
pub fn polarized_up_state(n_spins: usize) -> Result<DensityMatrix> {
    check_n(n_spins)?;
    let dim = n_spins + 1;
    let mut data = CMatrix::zeros(dim, dim);
    data[(0, 0)] = Complex64::new(1.0, 0.0);
    Ok(DensityMatrix { data })
}

/// Amplitudes of `exp(-i theta S^y) |S, S>` in the Dicke basis.
///
/// These are the Wigner small-d elements `d^S_{m,S}(theta)`, all real and
/// non-negative for `theta` in `[0, pi]`.
pub fn rotated_up_amplitudes(n_spins: usize, theta: f64) -> Result<Vec<Complex64>> {
    check_n(n_spins)?;
    let (c, s) = ((theta / 2.0).cos(), (theta / 2.0).sin());
    let mut ln_binom = 0.0f64;
    let mut out = Vec::with_capacity(n_spins + 1);
    for j in 0..=n_spins {
        if j > 0 {
            ln_binom += ((n_spins - j + 1) as f64).ln() - (j as f64).ln();
        }
        let up = (n_spins - j) as i32;
        let down = j as i32;
        let amp = if (c == 0.0 && up > 0) || (s == 0.0 && down > 0) {
            0.0
        } else {
            let mag = 0.5 * ln_binom
                + if up > 0 { up as f64 * c.abs().ln() } else { 0.0 }
                + if down > 0 { down as f64 * s.abs().ln() } else { 0.0 };
            let sign = c.signum().powi(up) * s.signum().powi(down);
            sign * mag.exp()
        };
        out.push(Complex64::new(amp, 0.0));
    }
    Ok(out)
}

/// Spin coherent state obtained by rotating `|S, S>` by `theta` about y.
pub fn rotated_up_state(n_spins: usize, theta: f64) -> Result<DensityMatrix> {
    DensityMatrix::from_pure(&rotated_up_amplitudes(n_spins, theta)?)
}

/// `Tr(op rho)`.
pub fn expectation(op: MatRef<'_, Complex64>, rho: &DensityMatrix) -> Result<Complex64> {
    let n = rho.dim();
    linalg::check_square(op, n)?;
    let r = rho.as_ref();
    let mut acc = ZERO;
    for j in 0..n {
        for i in 0..n {
            acc += op[(i, j)] * r[(j, i)];
        }
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::commutator;

    fn max_abs_diff(a: MatRef<'_, Complex64>, b: MatRef<'_, Complex64>) -> f64 {
        let mut worst = 0.0f64;
        for j in 0..a.ncols() {
            for i in 0..a.nrows() {
                worst = worst.max((a[(i, j)] - b[(i, j)]).norm());
            }
        }
        worst
    }

    #[test]
    fn spin_one_sz_and_ladder() {
        let ops = build_spin_operators(2).unwrap();
        for (j, m) in [1.0, 0.0, -1.0].iter().enumerate() {
            assert_eq!(ops.sz[(j, j)], Complex64::new(*m, 0.0));
        }
        for j in 0..3 {
            for i in 0..3 {
                let v = ops.s_minus[(i, j)];
                if i == j + 1 {
                    assert!((v.re - 2f64.sqrt()).abs() < 1e-15 && v.im == 0.0);
                } else {
                    assert_eq!(v, ZERO);
                }
            }
        }
    }

    #[test]
    fn spin_half_sx_is_half_pauli() {
        let ops = build_spin_operators(1).unwrap();
        let half = Complex64::new(0.5, 0.0);
        assert_eq!(ops.sx[(0, 1)], half);
        assert_eq!(ops.sx[(1, 0)], half);
        assert_eq!(ops.sx[(0, 0)], ZERO);
        assert_eq!(ops.sx[(1, 1)], ZERO);
    }

    #[test]
    fn zero_spins_rejected() {
        assert!(matches!(
            build_spin_operators(0),
            Err(Error::InvalidParameter(_))
        ));
        assert!(polarized_up_state(0).is_err());
    }

    #[test]
    fn algebra_holds_up_to_64_spins() {
        for n in 1..=64 {
            let ops = build_spin_operators(n).unwrap();
            let s = ops.spin();
            let comm = commutator(ops.sx.as_ref(), ops.sy.as_ref());
            let isz = linalg::scale(ops.sz.as_ref(), Complex64::new(0.0, 1.0));
            assert!(max_abs_diff(comm.as_ref(), isz.as_ref()) < 1e-12, "N={n}");

            let casimir = &ops.sx * &ops.sx + &ops.sy * &ops.sy + &ops.sz * &ops.sz;
            let target = linalg::scale(ops.identity().as_ref(), Complex64::new(s * (s + 1.0), 0.0));
            let tol = 1e-12 * (1.0 + s * (s + 1.0));
            assert!(max_abs_diff(casimir.as_ref(), target.as_ref()) < tol, "N={n}");

            let adj = ops.s_minus.adjoint().to_owned();
            assert_eq!(max_abs_diff(adj.as_ref(), ops.s_plus.as_ref()), 0.0);
            // top state is annihilated by S^+
            for i in 0..ops.dim {
                assert_eq!(ops.s_plus[(i, 0)], ZERO);
            }
        }
    }

    #[test]
    fn polarized_state_and_expectations() {
        let rho = polarized_up_state(4).unwrap();
        assert_eq!(rho.dim(), 5);
        for j in 0..5 {
            for i in 0..5 {
                let want = if i == 0 && j == 0 { 1.0 } else { 0.0 };
                assert_eq!(rho.as_ref()[(i, j)], Complex64::new(want, 0.0));
            }
        }
        let ops8 = build_spin_operators(8).unwrap();
        let up8 = polarized_up_state(8).unwrap();
        assert_eq!(expectation(ops8.sz.as_ref(), &up8).unwrap().re, 4.0);
        assert_eq!(
            expectation(ops8.identity().as_ref(), &up8).unwrap().re,
            1.0
        );
        let ops2 = build_spin_operators(2).unwrap();
        let up2 = polarized_up_state(2).unwrap();
        assert_eq!(expectation(ops2.sx.as_ref(), &up2).unwrap().norm(), 0.0);
        assert!(matches!(
            expectation(ops2.sx.as_ref(), &up8),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn polarized_sz_is_half_n() {
        for n in [1usize, 2, 5, 17, 64] {
            let ops = build_spin_operators(n).unwrap();
            let rho = polarized_up_state(n).unwrap();
            let sz = expectation(ops.sz.as_ref(), &rho).unwrap().re;
            assert_eq!(sz, n as f64 / 2.0);
            assert!(DensityMatrix::new(rho.into_matrix()).is_ok());
        }
    }

    #[test]
    fn rotated_state_points_along_x() {
        for n in [1usize, 4, 16, 33] {
            let ops = build_spin_operators(n).unwrap();
            let rho = rotated_up_state(n, std::f64::consts::FRAC_PI_2).unwrap();
            let sx = expectation(ops.sx.as_ref(), &rho).unwrap().re;
            let sz = expectation(ops.sz.as_ref(), &rho).unwrap().re;
            let sz2 = expectation((&ops.sz * &ops.sz).as_ref(), &rho).unwrap().re;
            assert!((sx - n as f64 / 2.0).abs() < 1e-12);
            assert!(sz.abs() < 1e-12);
            assert!((sz2 - n as f64 / 4.0).abs() < 1e-11);
        }
    }

    #[test]
    fn validation_rejects_bad_states() {
        let mut m = CMatrix::zeros(2, 2);
        m[(0, 0)] = Complex64::new(1.0, 0.0);
        m[(0, 1)] = Complex64::new(0.0, 0.1);
        assert!(matches!(DensityMatrix::new(m.clone()), Err(Error::NotHermitian(_))));
        m[(0, 1)] = ZERO;
        m[(1, 1)] = Complex64::new(0.5, 0.0);
        assert!(matches!(DensityMatrix::new(m.clone()), Err(Error::InvalidState(_))));
        m[(0, 0)] = Complex64::new(1.5, 0.0);
        m[(1, 1)] = Complex64::new(-0.5, 0.0);
        assert!(matches!(DensityMatrix::new(m), Err(Error::InvalidState(_))));
    }
}
