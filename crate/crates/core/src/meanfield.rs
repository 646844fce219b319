//! Mean-field dynamics of the total spin and the QFI of the factorized state.
//!
//! Second-order cumulants are closed, `<S^a S^b> = <S^a><S^b>`, which gives a
//! norm-conserving flow on the Bloch sphere of radius `N/2`. The product state
//! built from it has QFI `N` times that of one spin.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dynamics::SimParams;
use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::ode::{self, OdeSystem, StepControl};
use crate::qfi;
use crate::spin::DensityMatrix;

pub const DEFAULT_DG: f64 = 0.01;
/// Slack allowed on `|b| <= N/2` when building a single-spin state.
pub const BLOCH_SLACK: f64 = 1e-6;
/// Tolerance caps for the three-variable flow, which is cheap enough to run
/// well below the accuracy of the exact solver.
pub const MF_RTOL: f64 = 1e-11;
pub const MF_ATOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BlochVector {
    pub sx: f64,
    pub sy: f64,
    pub sz: f64,
}

impl BlochVector {
    pub fn new(sx: f64, sy: f64, sz: f64) -> Self {
        Self { sx, sy, sz }
    }

    pub fn norm(&self) -> f64 {
        (self.sx * self.sx + self.sy * self.sy + self.sz * self.sz).sqrt()
    }

    fn to_array(self) -> [f64; 3] {
        [self.sx, self.sy, self.sz]
    }

    fn from_slice(v: &[f64]) -> Self {
        Self::new(v[0], v[1], v[2])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlochTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<BlochVector>,
    pub g_value: f64,
}

/// Mean-field equations of motion with `S = N/2`.
pub fn mf_rhs(t: f64, b: &BlochVector, params: &SimParams) -> BlochVector {
    let s = params.n_spins as f64 / 2.0;
    let k = params.kappa / s;
    let drive = params.g * params.ac_envelope(t);
    BlochVector {
        sx: k * b.sx * b.sz - drive * b.sy,
        sy: -params.omega0 * b.sz + k * b.sy * b.sz + drive * b.sx,
        sz: params.omega0 * b.sy - k * (b.sx * b.sx + b.sy * b.sy),
    }
}

struct MeanField<'a> {
    params: &'a SimParams,
}

fn norm3(v: &[f64]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

impl OdeSystem<f64> for MeanField<'_> {
    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]) {
        let d = mf_rhs(t, &BlochVector::from_slice(y), self.params);
        dy.copy_from_slice(&d.to_array());
    }

    fn error_norm(&self, err: &[f64], y_old: &[f64], y_new: &[f64]) -> f64 {
        let atol = self.params.atol.min(MF_ATOL);
        let rtol = self.params.rtol.min(MF_RTOL);
        let scale = atol + rtol * norm3(y_old).max(norm3(y_new));
        norm3(err) / scale
    }
}

/// Integrates from `(0, 0, N/2)` at field strength `g_value` on the output
/// grid of `params`.
pub fn mf_integrate(params: &SimParams, g_value: f64) -> Result<BlochTrajectory> {
    params.validate()?;
    let mut p = params.clone();
    p.g = g_value;
    let sys = MeanField { params: &p };
    let times = p.output_times();
    let mut states = Vec::with_capacity(times.len());
    let y0 = vec![0.0, 0.0, p.n_spins as f64 / 2.0];
    ode::integrate(&sys, y0, 0.0, &times, StepControl::default(), |_, _, y| {
        states.push(BlochVector::from_slice(y));
        Ok(())
    })?;
    Ok(BlochTrajectory {
        times,
        states,
        g_value,
    })
}

/// Single-spin state `I/2 + (b . sigma) / N`.
pub fn mf_reduced_state(b: &BlochVector, n_spins: usize) -> Result<DensityMatrix> {
    if n_spins == 0 {
        return Err(Error::InvalidParameter("n_spins must be at least 1".into()));
    }
    let n = n_spins as f64;
    let max = n / 2.0;
    let length = b.norm();
    if !(length <= max + BLOCH_SLACK) {
        return Err(Error::UnphysicalBloch { length, max });
    }
    let c = |re: f64, im: f64| Complex64::new(re, im);
    let entries = [
        [c(0.5 + b.sz / n, 0.0), c(b.sx / n, -b.sy / n)],
        [c(b.sx / n, b.sy / n), c(0.5 - b.sz / n, 0.0)],
    ];
    Ok(DensityMatrix::from_matrix_unchecked(CMatrix::from_fn(
        2,
        2,
        |i, j| entries[i][j],
    )))
}

/// Mean-field QFI `N F(rho_i)` at each output time, with the single-spin QFI
/// from the fidelity between runs at `g = 0` and `g = dg`.
pub fn mf_qfi_series(params: &SimParams, dg: f64) -> Result<Vec<(f64, f64)>> {
    if !(dg > 0.0) {
        return Err(Error::InvalidParameter(format!("dg must be positive, got {dg}")));
    }
    let base = mf_integrate(params, 0.0)?;
    let shifted = mf_integrate(params, dg)?;
    let n = params.n_spins;
    base.times
        .iter()
        .zip(base.states.iter().zip(&shifted.states))
        .map(|(&t, (a, b))| {
            let ra = mf_reduced_state(a, n)?;
            let rb = mf_reduced_state(b, n)?;
            Ok((t, n as f64 * qfi::qfi_fidelity(&ra, &rb, dg)?))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(n: usize, omega0: f64) -> SimParams {
        let mut p = SimParams::resonant(n, 4.0).unwrap();
        p.omega0 = omega0;
        p
    }

    #[test]
    fn drive_vanishes_at_zero_phase() {
        let mut p = params(10, 4.0);
        p.g = 0.7;
        let t = -p.phi / p.omega_ac;
        let b = BlochVector::new(1.0, -2.0, 3.0);
        let with = mf_rhs(t, &b, &p);
        p.g = 0.0;
        let without = mf_rhs(t, &b, &p);
        assert!((with.sx - without.sx).abs() < 1e-15);
        assert!((with.sy - without.sy).abs() < 1e-15);
    }

    #[test]
    fn fixed_point_below_transition() {
        for (n, w) in [(10usize, 0.5), (40, 0.3), (7, 0.9)] {
            let mut p = params(n, w);
            p.kappa = 1.0;
            let s = n as f64 / 2.0;
            let b = BlochVector::new(0.0, w * s, -s * (1.0 - w * w).sqrt());
            let d = mf_rhs(0.3, &b, &p);
            assert!(d.sx.abs() < 1e-12 && d.sy.abs() < 1e-12 && d.sz.abs() < 1e-12);
        }
    }

    #[test]
    fn radial_velocity_vanishes() {
        let mut p = params(12, 4.0);
        p.g = 0.37;
        for (i, b) in [(1.0, 2.0, -3.0), (-4.0, 0.5, 1.5), (0.0, 6.0, 0.0)].iter().enumerate() {
            let b = BlochVector::new(b.0, b.1, b.2);
            let d = mf_rhs(0.1 * i as f64, &b, &p);
            let radial = b.sx * d.sx + b.sy * d.sy + b.sz * d.sz;
            assert!(radial.abs() < 1e-12);
        }
    }

    #[test]
    fn reduced_state_cases() {
        let n = 8;
        let up = mf_reduced_state(&BlochVector::new(0.0, 0.0, 4.0), n).unwrap();
        assert_eq!(up.as_ref()[(0, 0)].re, 1.0);
        assert_eq!(up.as_ref()[(1, 1)].re, 0.0);
        let mixed = mf_reduced_state(&BlochVector::default(), n).unwrap();
        assert_eq!(mixed.as_ref()[(0, 0)].re, 0.5);
        assert_eq!(mixed.as_ref()[(0, 1)].norm(), 0.0);
        let tilted = mf_reduced_state(&BlochVector::new(2.0, 0.0, 0.0), n).unwrap();
        assert_eq!(tilted.as_ref()[(0, 1)], Complex64::new(0.25, 0.0));
        assert_eq!(tilted.as_ref()[(1, 0)], Complex64::new(0.25, 0.0));
        assert_eq!(tilted.as_ref()[(0, 0)].re, 0.5);
        assert!(matches!(
            mf_reduced_state(&BlochVector::new(0.0, 0.0, 4.1), n),
            Err(Error::UnphysicalBloch { .. })
        ));
        // valid density matrix for any admissible vector
        for b in [(3.9, 0.1, -0.5), (0.0, -4.0, 0.0), (1.0, 1.0, 1.0)] {
            let s = mf_reduced_state(&BlochVector::new(b.0, b.1, b.2), n).unwrap();
            assert!(DensityMatrix::new(s.into_matrix()).is_ok());
        }
    }

    #[test]
    fn norm_conserved_with_field() {
        let mut p = params(20, 4.0);
        p.t_max = 20.0;
        p.n_out = 400;
        for g in [0.0, 0.05, 1.0] {
            let traj = mf_integrate(&p, g).unwrap();
            for b in &traj.states {
                assert!((b.norm() - 10.0).abs() < 1e-8 * 10.0, "g={g} norm={}", b.norm());
            }
        }
    }

    #[test]
    fn relaxes_to_fixed_point_below_transition() {
        let mut p = params(16, 0.5);
        p.kappa = 1.0;
        p.t_max = 50.0;
        p.n_out = 11;
        let traj = mf_integrate(&p, 0.0).unwrap();
        let last = traj.states.last().unwrap();
        let s = 8.0;
        assert!(last.sx.abs() < 1e-6);
        assert!((last.sy - 0.5 * s).abs() < 1e-6);
        assert!((last.sz + s * (0.75f64).sqrt()).abs() < 1e-6);
    }

    #[test]
    fn series_starts_at_zero_and_is_additive() {
        let mut p = params(16, 4.0);
        p.t_max = 3.0;
        p.n_out = 31;
        let a = mf_qfi_series(&p, DEFAULT_DG).unwrap();
        assert_eq!(a[0], (0.0, 0.0));
        let mut p2 = p.clone();
        p2.n_spins = 32;
        let b = mf_qfi_series(&p2, DEFAULT_DG).unwrap();
        for ((t, fa), (_, fb)) in a.iter().zip(&b).skip(1) {
            assert!((fb - 2.0 * fa).abs() <= 1e-6 * fb.abs().max(1e-12), "t={t} {fa} {fb}");
        }
        assert!(mf_qfi_series(&p, 0.0).is_err());
    }

    #[test]
    fn fidelity_route_matches_pure_bloch_formula() {
        // For pure qubit states F = |d r / dg|^2 with r the unit Bloch vector.
        let mut p = params(10, 4.0);
        p.t_max = 2.0;
        p.n_out = 5;
        let dg = 1e-4;
        let a = mf_integrate(&p, 0.0).unwrap();
        let b = mf_integrate(&p, dg).unwrap();
        for (sa, sb) in a.states.iter().zip(&b.states).skip(1) {
            let ra = mf_reduced_state(sa, 10).unwrap();
            let rb = mf_reduced_state(sb, 10).unwrap();
            let fid = qfi::qfi_fidelity(&ra, &rb, dg).unwrap();
            let dr = [(sb.sx - sa.sx) / 5.0, (sb.sy - sa.sy) / 5.0, (sb.sz - sa.sz) / 5.0];
            let bloch = (dr[0] * dr[0] + dr[1] * dr[1] + dr[2] * dr[2]) / (dg * dg);
            assert!((fid - bloch).abs() <= 1e-3 * bloch, "{fid} {bloch}");
        }
    }
}
