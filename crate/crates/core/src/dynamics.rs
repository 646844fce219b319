//! Collective-decay Liouvillian with an AC field along z, integrated jointly
//! with the field derivative of the state.
//!
//! The state `rho` obeys
//!
//! ```text
//! d rho/dt = L_B[rho] - i g sin(w_ac t + phi) [S^z, rho]
//! L_B[x]   = -i w0 [S^x, x] + (kappa / (N/2)) (S^- x S^+ - {S^+ S^-, x} / 2)
//! ```
//!
//! and `d rho / dg` follows the differentiated equation
//! `L_B[drho] - i sin(w_ac t + phi) [S^z, rho + g drho]`, which at `g = 0` is
//! exact linear response.

use faer::MatRef;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, I};
use crate::ode::{self, IntegrationStats, OdeSystem, StepControl};
use crate::qfi;
use crate::spin::{self, DensityMatrix, SpinOperators};

pub const DEFAULT_RTOL: f64 = 1e-8;
pub const DEFAULT_ATOL: f64 = 1e-10;
pub const DEFAULT_N_OUT: usize = 2000;
/// Default observation window is `DEFAULT_WINDOW_FACTOR * N / kappa`.
pub const DEFAULT_WINDOW_FACTOR: f64 = 1.5;

/// Physical and numerical parameters of one run. Frequencies are in units of
/// `kappa` by convention.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimParams {
    pub n_spins: usize,
    pub omega0: f64,
    pub kappa: f64,
    /// Field strength; `0` is exact linear response.
    pub g: f64,
    pub omega_ac: f64,
    pub phi: f64,
    pub t_max: f64,
    pub n_out: usize,
    pub rtol: f64,
    pub atol: f64,
    /// When false the AC term is dropped from both equations.
    #[serde(default = "default_true")]
    pub ac_enabled: bool,
}

fn default_true() -> bool {
    true
}

impl SimParams {
    /// Resonant drive for `omega0 > kappa = 1` with default window and tolerances.
    pub fn resonant(n_spins: usize, omega0: f64) -> Result<Self> {
        Self::resonant_with_kappa(n_spins, omega0, 1.0)
    }

    pub fn resonant_with_kappa(n_spins: usize, omega0: f64, kappa: f64) -> Result<Self> {
        let (omega_ac, phi) = crate::runner::resonance_defaults(omega0, kappa)?;
        Ok(Self {
            n_spins,
            omega0,
            kappa,
            g: 0.0,
            omega_ac,
            phi,
            t_max: DEFAULT_WINDOW_FACTOR * n_spins as f64 / kappa,
            n_out: DEFAULT_N_OUT,
            rtol: DEFAULT_RTOL,
            atol: DEFAULT_ATOL,
            ac_enabled: true,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidParameter(msg.to_string()));
        if self.n_spins == 0 {
            return bad("n_spins must be at least 1");
        }
        if !(self.kappa >= 0.0) {
            return bad("kappa must be non-negative");
        }
        if !(self.t_max > 0.0) || !self.t_max.is_finite() {
            return bad("t_max must be positive and finite");
        }
        if self.n_out < 2 {
            return bad("n_out must be at least 2");
        }
        if !(self.rtol > 0.0) || !(self.atol > 0.0) {
            return bad("tolerances must be positive");
        }
        for (name, v) in [
            ("omega0", self.omega0),
            ("g", self.g),
            ("omega_ac", self.omega_ac),
            ("phi", self.phi),
        ] {
            if !v.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} must be finite")));
            }
        }
        Ok(())
    }

    /// `n_out` uniformly spaced sample times in `[0, t_max]`.
    pub fn output_times(&self) -> Vec<f64> {
        let last = (self.n_out - 1) as f64;
        (0..self.n_out)
            .map(|i| {
                if i + 1 == self.n_out {
                    self.t_max
                } else {
                    self.t_max * i as f64 / last
                }
            })
            .collect()
    }

    /// Collective decay rate `kappa / (N/2)`.
    pub fn decay_rate(&self) -> f64 {
        self.kappa / (self.n_spins as f64 / 2.0)
    }

    pub fn ac_envelope(&self, t: f64) -> f64 {
        if self.ac_enabled {
            (self.omega_ac * t + self.phi).sin()
        } else {
            0.0
        }
    }
}

/// A state together with its field derivative.
#[derive(Debug, Clone)]
pub struct JointState {
    pub rho: CMatrix,
    pub drho_dg: CMatrix,
}

/// Observables sampled at one output time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObservableRecord {
    pub t: f64,
    pub qfi: f64,
    pub sy: f64,
    pub sz: f64,
    pub var_sz: f64,
    pub entropy: f64,
    pub purity: f64,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub params: SimParams,
    pub records: Vec<ObservableRecord>,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.t).collect()
    }

    pub fn qfi(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.qfi).collect()
    }

    /// Sample with the largest QFI.
    pub fn peak(&self) -> Option<&ObservableRecord> {
        self.records
            .iter()
            .max_by(|a, b| a.qfi.total_cmp(&b.qfi))
    }
}

fn check_dims(ops: &SpinOperators, x: MatRef<'_, Complex64>) -> Result<()> {
    linalg::check_square(x, ops.dim)
}

/// `L_B[x]` evaluated with the banded structure of the collective operators.
pub fn btc_liouvillian_apply(
    params: &SimParams,
    ops: &SpinOperators,
    rho: MatRef<'_, Complex64>,
) -> Result<CMatrix> {
    check_dims(ops, rho)?;
    let n = ops.dim;
    let kernel = Kernel::new(params, ops);
    let mut x = vec![Complex64::default(); n * n];
    linalg::to_column_major(rho, &mut x);
    let mut out = vec![Complex64::default(); n * n];
    kernel.apply(&x, None, 0.0, &mut out);
    Ok(linalg::from_column_major(&out, n))
}

/// `-i sin(w_ac t + phi) [S^z, x]`, without the factor `g`.
pub fn ac_term_apply(
    t: f64,
    params: &SimParams,
    ops: &SpinOperators,
    x: MatRef<'_, Complex64>,
) -> Result<CMatrix> {
    check_dims(ops, x)?;
    let s = params.ac_envelope(t);
    Ok(CMatrix::from_fn(ops.dim, ops.dim, |j, k| {
        -I * (s * (ops.m_values[j] - ops.m_values[k])) * x[(j, k)]
    }))
}

/// Time derivative of the joint state `(rho, d rho / dg)`.
pub fn joint_rhs(
    t: f64,
    y: &JointState,
    params: &SimParams,
    ops: &SpinOperators,
) -> Result<JointState> {
    check_dims(ops, y.rho.as_ref())?;
    check_dims(ops, y.drho_dg.as_ref())?;
    let n = ops.dim;
    let sys = JointSystem::new(params, ops);
    let mut flat = vec![Complex64::default(); 2 * n * n];
    linalg::to_column_major(y.rho.as_ref(), &mut flat[..n * n]);
    linalg::to_column_major(y.drho_dg.as_ref(), &mut flat[n * n..]);
    let mut dflat = vec![Complex64::default(); 2 * n * n];
    sys.rhs(t, &flat, &mut dflat);
    Ok(JointState {
        rho: linalg::from_column_major(&dflat[..n * n], n),
        drho_dg: linalg::from_column_major(&dflat[n * n..], n),
    })
}

/// Stencil coefficients of the Liouvillian in the Dicke basis.
struct Kernel {
    n: usize,
    /// `-i w0 / 2`
    coherent: Complex64,
    rate: f64,
    /// `ladder[j] = <j+1|S^-|j>`
    ladder: Vec<f64>,
    /// `rate * ladder^2 / 2`, half the diagonal of the anticommutator term.
    half_loss: Vec<f64>,
}

impl Kernel {
    fn new(params: &SimParams, ops: &SpinOperators) -> Self {
        let rate = if params.kappa == 0.0 {
            0.0
        } else {
            params.decay_rate()
        };
        Self {
            n: ops.dim,
            coherent: -I * (0.5 * params.omega0),
            rate,
            ladder: ops.ladder.clone(),
            half_loss: ops.ladder.iter().map(|c| 0.5 * rate * c * c).collect(),
        }
    }

    /// Writes `L_B[x] + ac * (m_j - m_k) * src_jk` into `out`, where
    /// `ac = -i sin(...)` has been folded into `ac_scale`. `src` defaults to
    /// nothing when `None`.
    fn apply(&self, x: &[Complex64], src: Option<(&[Complex64], &[Complex64], f64)>, ac_scale: f64, out: &mut [Complex64]) {
        let n = self.n;
        let c = &self.ladder;
        let zero = Complex64::default();
        for k in 0..n {
            let col = &x[k * n..(k + 1) * n];
            let prev = if k > 0 { Some(&x[(k - 1) * n..k * n]) } else { None };
            let next = if k + 1 < n {
                Some(&x[(k + 1) * n..(k + 2) * n])
            } else {
                None
            };
            let out_col = &mut out[k * n..(k + 1) * n];
            let ck_prev = if k > 0 { c[k - 1] } else { 0.0 };
            let ck = c[k];
            for j in 0..n {
                // [S^x, x] = (S^+ x + S^- x - x S^+ - x S^-) / 2
                let mut comm = zero;
                if j + 1 < n {
                    comm += col[j + 1] * c[j];
                }
                if j > 0 {
                    comm += col[j - 1] * c[j - 1];
                }
                if let Some(p) = prev {
                    comm -= p[j] * ck_prev;
                }
                if let Some(nx) = next {
                    comm -= nx[j] * ck;
                }
                let mut v = self.coherent * comm;
                if self.rate != 0.0 {
                    let mut gain = zero;
                    if j > 0 {
                        if let Some(p) = prev {
                            gain = p[j - 1] * (c[j - 1] * ck_prev * self.rate);
                        }
                    }
                    v += gain - col[j] * (self.half_loss[j] + self.half_loss[k]);
                }
                if let Some((a, b, g)) = src {
                    let s = a[k * n + j] + b[k * n + j] * g;
                    // -i sin(.) (m_j - m_k) with m_j - m_k = k - j
                    v += Complex64::new(0.0, -ac_scale * (k as f64 - j as f64)) * s;
                }
                out_col[j] = v;
            }
        }
    }
}

impl Kernel {
    /// [`Kernel::apply`] for Hermitian `x` and sources: only the lower
    /// triangle is evaluated and the upper one is mirrored, which is exact
    /// because both terms preserve Hermiticity.
    fn apply_hermitian(
        &self,
        x: &[Complex64],
        src: Option<(&[Complex64], &[Complex64], f64)>,
        ac_scale: f64,
        out: &mut [Complex64],
    ) {
        match src {
            Some(src) => self.lower::<true>(x, src, ac_scale, out),
            None => self.lower::<false>(x, (x, x, 0.0), 0.0, out),
        }
        let n = self.n;
        for k in 0..n {
            out[k * n + k].im = 0.0;
            for j in (k + 1)..n {
                out[j * n + k] = out[k * n + j].conj();
            }
        }
    }

    fn lower<const AC: bool>(
        &self,
        x: &[Complex64],
        (a, b, g): (&[Complex64], &[Complex64], f64),
        ac_scale: f64,
        out: &mut [Complex64],
    ) {
        let n = self.n;
        if n < 3 {
            // too small for the interior loop; fall back to the full sweep
            let src = AC.then_some((a, b, g));
            return self.apply(x, src, ac_scale, out);
        }
        let c = &self.ladder;
        // coherent = -i w with w = w0/2, so coherent * z = (w z.im, -w z.re)
        let w = -self.coherent.im;
        let ac_term = |j: usize, k: usize| -> Complex64 {
            let idx = k * n + j;
            let s = a[idx] + b[idx] * g;
            // -i sin(.) (m_j - m_k) s with m_j - m_k = k - j
            let f = ac_scale * (k as f64 - j as f64);
            Complex64::new(f * s.im, -f * s.re)
        };
        let edge = |j: usize, k: usize| -> Complex64 {
            let col = &x[k * n..(k + 1) * n];
            let mut comm = Complex64::default();
            if j + 1 < n {
                comm += col[j + 1] * c[j];
            }
            if j > 0 {
                comm += col[j - 1] * c[j - 1];
            }
            if k > 0 {
                comm -= x[(k - 1) * n + j] * c[k - 1];
            }
            if k + 1 < n {
                comm -= x[(k + 1) * n + j] * c[k];
            }
            let mut v = self.coherent * comm;
            if j > 0 && k > 0 {
                v += x[(k - 1) * n + j - 1] * (c[j - 1] * c[k - 1] * self.rate);
            }
            v -= col[j] * (self.half_loss[j] + self.half_loss[k]);
            if AC {
                v += ac_term(j, k);
            }
            v
        };
        for k in 0..n {
            if k == 0 || k + 1 == n {
                for j in k..n {
                    out[k * n + j] = edge(j, k);
                }
                continue;
            }
            let col = &x[k * n..(k + 1) * n];
            let prev = &x[(k - 1) * n..k * n];
            let next = &x[(k + 1) * n..(k + 2) * n];
            let (ckp, ck) = (c[k - 1], c[k]);
            let gain = self.rate * ckp;
            let loss_k = self.half_loss[k];
            let out_col = &mut out[k * n..(k + 1) * n];
            for j in k..n - 1 {
                let comm = col[j + 1] * c[j] + col[j - 1] * c[j - 1] - prev[j] * ckp - next[j] * ck;
                let mut v = Complex64::new(w * comm.im, -w * comm.re)
                    + prev[j - 1] * (gain * c[j - 1])
                    - col[j] * (self.half_loss[j] + loss_k);
                if AC {
                    v += ac_term(j, k);
                }
                out_col[j] = v;
            }
            out_col[n - 1] = edge(n - 1, k);
        }
    }
}

/// The joint `(rho, d rho/dg)` system over a flat column-major buffer.
struct JointSystem<'a> {
    params: &'a SimParams,
    kernel: Kernel,
}

impl<'a> JointSystem<'a> {
    fn new(params: &'a SimParams, ops: &SpinOperators) -> Self {
        Self {
            params,
            kernel: Kernel::new(params, ops),
        }
    }

    fn block(&self) -> usize {
        self.kernel.n * self.kernel.n
    }
}

fn frobenius(x: &[Complex64]) -> f64 {
    x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn hermitize_flat(x: &mut [Complex64], n: usize) {
    for k in 0..n {
        x[k * n + k].im = 0.0;
        for j in (k + 1)..n {
            let avg = 0.5 * (x[k * n + j] + x[j * n + k].conj());
            x[k * n + j] = avg;
            x[j * n + k] = avg.conj();
        }
    }
}

impl OdeSystem<Complex64> for JointSystem<'_> {
    fn rhs(&self, t: f64, y: &[Complex64], dy: &mut [Complex64]) {
        let b = self.block();
        let (rho, drho) = y.split_at(b);
        let (d_rho, d_drho) = dy.split_at_mut(b);
        let s = self.params.ac_envelope(t);
        let g = self.params.g;
        if g != 0.0 {
            // g * (-i s [S^z, rho])
            self.kernel.apply_hermitian(rho, Some((rho, drho, 0.0)), g * s, d_rho);
        } else {
            self.kernel.apply_hermitian(rho, None, 0.0, d_rho);
        }
        self.kernel.apply_hermitian(drho, Some((rho, drho, g)), s, d_drho);
    }

    fn error_norm(&self, err: &[Complex64], y_old: &[Complex64], y_new: &[Complex64]) -> f64 {
        let b = self.block();
        let (rtol, atol) = (self.params.rtol, self.params.atol);
        let scaled = |range: std::ops::Range<usize>| {
            let scale = atol + rtol * frobenius(&y_old[range.clone()]).max(frobenius(&y_new[range.clone()]));
            frobenius(&err[range]) / scale
        };
        scaled(0..b).max(scaled(b..2 * b))
    }

    fn project(&self, y: &mut [Complex64]) {
        let (n, b) = (self.kernel.n, self.block());
        hermitize_flat(&mut y[..b], n);
        hermitize_flat(&mut y[b..], n);
    }
}

/// Integrates from `initial` (with zero field derivative), calling `observe`
/// at each output time of `params`.
pub fn evolve<F>(
    params: &SimParams,
    ops: &SpinOperators,
    initial: &DensityMatrix,
    mut observe: F,
) -> Result<IntegrationStats>
where
    F: FnMut(f64, &JointState) -> Result<()>,
{
    params.validate()?;
    if ops.n_spins != params.n_spins {
        return Err(Error::InvalidParameter(format!(
            "operators built for N = {} but params have N = {}",
            ops.n_spins, params.n_spins
        )));
    }
    check_dims(ops, initial.as_ref())?;
    let n = ops.dim;
    let sys = JointSystem::new(params, ops);
    let mut y0 = vec![Complex64::default(); 2 * n * n];
    linalg::to_column_major(initial.as_ref(), &mut y0[..n * n]);
    let times = params.output_times();
    ode::integrate(&sys, y0, 0.0, &times, StepControl::default(), |_, t, y| {
        let state = JointState {
            rho: linalg::from_column_major(&y[..n * n], n),
            drho_dg: linalg::from_column_major(&y[n * n..], n),
        };
        observe(t, &state)
    })
}

/// Runs from the polarized-up state and records observables at every sample.
pub fn integrate(params: &SimParams) -> Result<Trajectory> {
    let initial = spin::polarized_up_state(params.n_spins)?;
    integrate_from(params, &initial)
}

pub fn integrate_from(params: &SimParams, initial: &DensityMatrix) -> Result<Trajectory> {
    let mut records = Vec::with_capacity(params.n_out);
    record_into(params, initial, &mut records)?;
    Ok(Trajectory {
        params: params.clone(),
        records,
    })
}

/// Like [`integrate_from`] but appends to `records` as it goes, so the samples
/// reached before a failure survive it.
pub fn record_into(
    params: &SimParams,
    initial: &DensityMatrix,
    records: &mut Vec<ObservableRecord>,
) -> Result<IntegrationStats> {
    let ops = spin::build_spin_operators(params.n_spins)?;
    evolve(params, &ops, initial, |t, state| {
        let rho = DensityMatrix::from_matrix_unchecked(state.rho.clone());
        records.push(observables(&rho, state.drho_dg.as_ref(), &ops, t)?);
        Ok(())
    })
}

/// Eigenvalues below this are treated as zero in the entropy.
const ENTROPY_CLAMP: f64 = 1e-14;

pub fn observables(
    rho: &DensityMatrix,
    drho: MatRef<'_, Complex64>,
    ops: &SpinOperators,
    t: f64,
) -> Result<ObservableRecord> {
    let r = rho.as_ref();
    check_dims(ops, r)?;
    check_dims(ops, drho)?;
    let eig = linalg::hermitian_eigen(r)?;
    let qfi = qfi::qfi_from_eigen(&eig, drho)?.value;

    let entropy = eig
        .values
        .iter()
        .filter(|&&l| l >= ENTROPY_CLAMP)
        .map(|&l| -l * l.ln())
        .sum::<f64>()
        .max(0.0);
    let sy = spin::expectation(ops.sy.as_ref(), rho)?.re;
    let (mut sz, mut sz2) = (0.0, 0.0);
    for (j, m) in ops.m_values.iter().enumerate() {
        let p = r[(j, j)].re;
        sz += m * p;
        sz2 += m * m * p;
    }
    let var_sz = (sz2 - sz * sz).max(0.0);
    let purity = linalg::frobenius_norm(r).powi(2);
    Ok(ObservableRecord {
        t,
        qfi,
        sy,
        sz,
        var_sz,
        entropy,
        purity,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::commutator;
    use crate::spin::build_spin_operators;

    fn params(n: usize, omega0: f64, kappa: f64) -> SimParams {
        SimParams {
            n_spins: n,
            omega0,
            kappa,
            g: 0.0,
            omega_ac: 1.3,
            phi: 0.4,
            t_max: 1.0,
            n_out: 11,
            rtol: DEFAULT_RTOL,
            atol: DEFAULT_ATOL,
            ac_enabled: true,
        }
    }

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn max_diff(a: MatRef<'_, Complex64>, b: MatRef<'_, Complex64>) -> f64 {
        let mut worst = 0.0f64;
        for j in 0..a.ncols() {
            for i in 0..a.nrows() {
                worst = worst.max((a[(i, j)] - b[(i, j)]).norm());
            }
        }
        worst
    }

    /// Liouvillian from dense matrix products, independent of the stencil.
    fn dense_liouvillian(p: &SimParams, ops: &SpinOperators, x: MatRef<'_, Complex64>) -> CMatrix {
        let coh = linalg::scale(commutator(ops.sx.as_ref(), x).as_ref(), -I * p.omega0);
        let spsm = &ops.s_plus * &ops.s_minus;
        let jump = &ops.s_minus * x * &ops.s_plus;
        let anti = &spsm * x + x * &spsm;
        let rate = p.kappa / (p.n_spins as f64 / 2.0);
        coh + linalg::scale((jump - linalg::scale(anti.as_ref(), c(0.5, 0.0))).as_ref(), c(rate, 0.0))
    }

    fn random_hermitian(n: usize, seed: u64) -> CMatrix {
        use rand::{Rng, SeedableRng};
        let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
        let a = CMatrix::from_fn(n, n, |_, _| c(rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5)));
        let mut h = &a + a.adjoint();
        linalg::hermitize(&mut h);
        h
    }

    #[test]
    fn hermitian_sweep_matches_full_sweep() {
        for n in [1usize, 2, 3, 4, 9, 20] {
            let ops = build_spin_operators(n).unwrap();
            let d = ops.dim;
            let p = params(n, 2.7, 0.8);
            let kernel = Kernel::new(&p, &ops);
            let flat = |m: &CMatrix| {
                let mut v = vec![Complex64::default(); d * d];
                linalg::to_column_major(m.as_ref(), &mut v);
                v
            };
            let x = flat(&random_hermitian(d, 3 + n as u64));
            let a = flat(&random_hermitian(d, 40 + n as u64));
            let b = flat(&random_hermitian(d, 90 + n as u64));
            for src in [None, Some((&a[..], &b[..], 0.35))] {
                let mut full = vec![Complex64::default(); d * d];
                let mut half = full.clone();
                kernel.apply(&x, src, -0.6, &mut full);
                kernel.apply_hermitian(&x, src, -0.6, &mut half);
                let worst = full.iter().zip(&half).map(|(u, v)| (u - v).norm()).fold(0.0, f64::max);
                assert!(worst < 1e-12, "n={n} diff={worst}");
            }
        }
    }

    #[test]
    fn stencil_matches_dense_products() {
        for n in [1usize, 2, 5, 12] {
            let ops = build_spin_operators(n).unwrap();
            let p = params(n, 2.7, 0.8);
            let x = random_hermitian(n + 1, n as u64);
            let fast = btc_liouvillian_apply(&p, &ops, x.as_ref()).unwrap();
            let slow = dense_liouvillian(&p, &ops, x.as_ref());
            assert!(max_diff(fast.as_ref(), slow.as_ref()) < 1e-12, "N={n}");
            assert!(linalg::trace(fast.as_ref()).norm() < 1e-12);
            assert!(linalg::hermitian_deviation(fast.as_ref()) < 1e-12);
        }
    }

    #[test]
    fn decay_of_top_state_for_spin_one() {
        let ops = build_spin_operators(2).unwrap();
        let p = params(2, 0.0, 1.0);
        let rho = spin::polarized_up_state(2).unwrap();
        let out = btc_liouvillian_apply(&p, &ops, rho.as_ref()).unwrap();
        let mut want = CMatrix::zeros(3, 3);
        want[(0, 0)] = c(-2.0, 0.0);
        want[(1, 1)] = c(2.0, 0.0);
        assert!(max_diff(out.as_ref(), want.as_ref()) < 1e-14);
    }

    #[test]
    fn down_state_is_dark() {
        let ops = build_spin_operators(1).unwrap();
        let p = params(1, 0.0, 1.0);
        let mut rho = CMatrix::zeros(2, 2);
        rho[(1, 1)] = c(1.0, 0.0);
        let out = btc_liouvillian_apply(&p, &ops, rho.as_ref()).unwrap();
        assert_eq!(linalg::frobenius_norm(out.as_ref()), 0.0);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let ops = build_spin_operators(3).unwrap();
        let p = params(3, 1.0, 1.0);
        let x = CMatrix::zeros(3, 3);
        assert!(matches!(
            btc_liouvillian_apply(&p, &ops, x.as_ref()),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(ac_term_apply(0.0, &p, &ops, x.as_ref()).is_err());
    }

    #[test]
    fn ac_term_cases() {
        let ops = build_spin_operators(3).unwrap();
        let p = params(3, 1.0, 1.0);
        let diag = CMatrix::from_fn(4, 4, |i, j| if i == j { c(i as f64, 0.0) } else { c(0.0, 0.0) });
        let out = ac_term_apply(0.37, &p, &ops, diag.as_ref()).unwrap();
        assert_eq!(linalg::frobenius_norm(out.as_ref()), 0.0);

        let x = random_hermitian(4, 7);
        let t0 = -p.phi / p.omega_ac;
        let out = ac_term_apply(t0, &p, &ops, x.as_ref()).unwrap();
        assert!(linalg::frobenius_norm(out.as_ref()) < 1e-15);

        // -i [S^z, S^x] = S^y at sin = 1
        let ops1 = build_spin_operators(1).unwrap();
        let mut p1 = params(1, 0.0, 1.0);
        p1.omega_ac = 0.0;
        p1.phi = std::f64::consts::FRAC_PI_2;
        let out = ac_term_apply(0.0, &p1, &ops1, ops1.sx.as_ref()).unwrap();
        assert!(max_diff(out.as_ref(), ops1.sy.as_ref()) < 1e-15);
        assert!((out[(0, 1)] - c(0.0, -0.5)).norm() < 1e-15);
    }

    #[test]
    fn joint_rhs_matches_dense_route() {
        let n = 4;
        let ops = build_spin_operators(n).unwrap();
        let mut p = params(n, 3.0, 1.0);
        p.g = 0.3;
        let rho = random_hermitian(n + 1, 11);
        let drho = random_hermitian(n + 1, 12);
        let t = 0.71;
        let y = JointState {
            rho: rho.clone(),
            drho_dg: drho.clone(),
        };
        let d = joint_rhs(t, &y, &p, &ops).unwrap();
        let s = (p.omega_ac * t + p.phi).sin();
        let ac = |x: &CMatrix| linalg::scale(commutator(ops.sz.as_ref(), x.as_ref()).as_ref(), -I * s);
        let want_rho = dense_liouvillian(&p, &ops, rho.as_ref()) + linalg::scale(ac(&rho).as_ref(), c(p.g, 0.0));
        let shifted = &rho + linalg::scale(drho.as_ref(), c(p.g, 0.0));
        let want_drho = dense_liouvillian(&p, &ops, drho.as_ref()) + ac(&shifted);
        assert!(max_diff(d.rho.as_ref(), want_rho.as_ref()) < 1e-12);
        assert!(max_diff(d.drho_dg.as_ref(), want_drho.as_ref()) < 1e-12);
        assert!(linalg::trace(d.rho.as_ref()).norm() < 1e-12);
        assert!(linalg::trace(d.drho_dg.as_ref()).norm() < 1e-12);
    }

    #[test]
    fn joint_rhs_source_vanishes_for_diagonal_state() {
        let ops = build_spin_operators(2).unwrap();
        let mut p = SimParams::resonant(2, 4.0).unwrap();
        p.t_max = 1.0;
        let y = JointState {
            rho: spin::polarized_up_state(2).unwrap().into_matrix(),
            drho_dg: CMatrix::zeros(3, 3),
        };
        let d = joint_rhs(0.0, &y, &p, &ops).unwrap();
        assert_eq!(linalg::frobenius_norm(d.drho_dg.as_ref()), 0.0);
    }

    #[test]
    fn single_spin_decay_is_analytic() {
        let mut p = params(1, 0.0, 1.0);
        p.t_max = 5.0;
        p.n_out = 101;
        let traj = integrate(&p).unwrap();
        assert_eq!(traj.records.len(), 101);
        for r in &traj.records {
            let want = (-2.0 * r.t).exp() - 0.5;
            assert!((r.sz - want).abs() < 1e-8, "t={} sz={} want={want}", r.t, r.sz);
        }
    }

    #[test]
    fn disabled_field_carries_no_information() {
        let mut p = SimParams::resonant(6, 4.0).unwrap();
        p.ac_enabled = false;
        p.t_max = 2.0;
        p.n_out = 21;
        let traj = integrate(&p).unwrap();
        assert!(traj.records.iter().all(|r| r.qfi == 0.0));
    }

    #[test]
    fn trace_and_positivity_preserved() {
        let mut p = SimParams::resonant(10, 4.0).unwrap();
        p.n_out = 41;
        let ops = build_spin_operators(10).unwrap();
        let init = spin::polarized_up_state(10).unwrap();
        evolve(&p, &ops, &init, |_, s| {
            assert!((linalg::trace(s.rho.as_ref()) - c(1.0, 0.0)).norm() < 1e-8);
            assert!(linalg::trace(s.drho_dg.as_ref()).norm() < 1e-8);
            let min = linalg::hermitian_eigenvalues(s.rho.as_ref())?
                .into_iter()
                .fold(f64::INFINITY, f64::min);
            assert!(min > -1e-7);
            Ok(())
        })
        .unwrap();
    }

    #[test]
    fn observables_of_pure_and_mixed_states() {
        let n = 5;
        let ops = build_spin_operators(n).unwrap();
        let zero = CMatrix::zeros(n + 1, n + 1);
        let up = spin::polarized_up_state(n).unwrap();
        let rec = observables(&up, zero.as_ref(), &ops, 0.0).unwrap();
        assert_eq!(rec.entropy, 0.0);
        assert!((rec.purity - 1.0).abs() < 1e-15);
        assert_eq!(rec.var_sz, 0.0);
        assert_eq!(rec.sy, 0.0);
        assert_eq!(rec.qfi, 0.0);
        assert_eq!(rec.sz, 2.5);

        let mixed = DensityMatrix::maximally_mixed(n + 1);
        let rec = observables(&mixed, zero.as_ref(), &ops, 0.0).unwrap();
        assert!((rec.entropy - ((n + 1) as f64).ln()).abs() < 1e-12);
        assert!((rec.purity - 1.0 / (n + 1) as f64).abs() < 1e-15);
    }

    #[test]
    fn output_grid_is_uniform_and_closed() {
        let mut p = params(2, 1.0, 1.0);
        p.t_max = 3.0;
        p.n_out = 4;
        assert_eq!(p.output_times(), vec![0.0, 1.0, 2.0, 3.0]);
    }

    #[test]
    fn invalid_params_rejected() {
        let mut p = params(2, 1.0, 1.0);
        p.n_out = 1;
        assert!(p.validate().is_err());
        let mut p = params(2, 1.0, 1.0);
        p.t_max = 0.0;
        assert!(p.validate().is_err());
        let mut p = params(2, 1.0, 1.0);
        p.kappa = -1.0;
        assert!(p.validate().is_err());
        assert!(SimParams::resonant(4, 1.0).is_err());
    }
}
