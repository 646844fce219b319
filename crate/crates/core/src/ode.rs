//! Adaptive Dormand-Prince 5(4) integration with exact stops at output times.

use std::ops::{Add, Mul};

use crate::error::{Error, Result};

/// Element type of an ODE state vector.
pub trait Scalar: Copy + Default + Add<Output = Self> + Mul<f64, Output = Self> {}

impl<T> Scalar for T where T: Copy + Default + Add<Output = T> + Mul<f64, Output = T> {}

pub trait OdeSystem<T: Scalar> {
    fn rhs(&self, t: f64, y: &[T], dy: &mut [T]);

    /// Error of a step scaled by the tolerance; the step is accepted when `<= 1`.
    fn error_norm(&self, err: &[T], y_old: &[T], y_new: &[T]) -> f64;

    /// Applied in place to every accepted state and to its derivative.
    fn project(&self, _y: &mut [T]) {}
}

#[derive(Debug, Clone, Copy)]
pub struct StepControl {
    pub safety: f64,
    pub fac_min: f64,
    pub fac_max: f64,
    /// Steps below `min_step_factor * span` abort the integration.
    pub min_step_factor: f64,
    pub max_steps: usize,
}

impl Default for StepControl {
    fn default() -> Self {
        Self {
            safety: 0.9,
            fac_min: 0.2,
            fac_max: 10.0,
            min_step_factor: 1e-14,
            max_steps: 50_000_000,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct IntegrationStats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
}

// Dormand & Prince tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

struct Workspace<T> {
    k: [Vec<T>; 7],
    stage: Vec<T>,
    y_new: Vec<T>,
    err: Vec<T>,
}

impl<T: Scalar> Workspace<T> {
    fn new(n: usize) -> Self {
        Self {
            k: std::array::from_fn(|_| vec![T::default(); n]),
            stage: vec![T::default(); n],
            y_new: vec![T::default(); n],
            err: vec![T::default(); n],
        }
    }
}

/// Integrates `sys` from `t0`, calling `observe(index, t, y)` at every entry of
/// `output_times` (ascending, all `>= t0`). Steps are shortened to land on the
/// output times exactly.
pub fn integrate<T, S, F>(
    sys: &S,
    mut y: Vec<T>,
    t0: f64,
    output_times: &[f64],
    control: StepControl,
    mut observe: F,
) -> Result<IntegrationStats>
where
    T: Scalar,
    S: OdeSystem<T>,
    F: FnMut(usize, f64, &[T]) -> Result<()>,
{
    let mut stats = IntegrationStats::default();
    let Some(&t_end) = output_times.last() else {
        return Ok(stats);
    };
    if output_times.windows(2).any(|w| w[1] < w[0]) || output_times[0] < t0 {
        return Err(Error::InvalidParameter(
            "output times must be ascending and not precede t0".into(),
        ));
    }
    let n = y.len();
    let span = (t_end - t0).max(f64::MIN_POSITIVE);
    let h_min = control.min_step_factor * span;
    let mut ws = Workspace::new(n);

    sys.project(&mut y);
    sys.rhs(t0, &y, &mut ws.k[0]);
    stats.rhs_evals += 1;

    let mut t = t0;
    let mut next_out = 0;
    while next_out < output_times.len() && output_times[next_out] <= t0 {
        observe(next_out, t0, &y)?;
        next_out += 1;
    }
    if next_out == output_times.len() {
        return Ok(stats);
    }

    let mut h = initial_step(sys, t0, &y, &mut ws, span);
    stats.rhs_evals += 1;

    while next_out < output_times.len() {
        if stats.accepted + stats.rejected >= control.max_steps {
            return Err(Error::IntegrationFailure { t_last: t, step: h });
        }
        let target = output_times[next_out];
        let remaining = target - t;
        let clipped = h >= remaining;
        let h_try = if clipped { remaining } else { h };
        if h_try < h_min && !clipped {
            return Err(Error::IntegrationFailure {
                t_last: t,
                step: h_try,
            });
        }

        step(sys, t, h_try, &y, &mut ws);
        stats.rhs_evals += 6;
        let err = sys.error_norm(&ws.err, &y, &ws.y_new);

        if err <= 1.0 && err.is_finite() {
            stats.accepted += 1;
            t = if clipped { target } else { t + h_try };
            std::mem::swap(&mut y, &mut ws.y_new);
            sys.project(&mut y);
            // FSAL: the last stage is the derivative at the new point.
            ws.k.swap(0, 6);
            sys.project(&mut ws.k[0]);
            let fac = if err == 0.0 {
                control.fac_max
            } else {
                (control.safety * err.powf(-0.2)).clamp(control.fac_min, control.fac_max)
            };
            let h_next = h_try * fac;
            h = if clipped { h.max(h_next) } else { h_next };
            while next_out < output_times.len() && output_times[next_out] <= t {
                observe(next_out, t, &y)?;
                next_out += 1;
            }
        } else {
            stats.rejected += 1;
            let fac = if err.is_finite() {
                (control.safety * err.powf(-0.2)).clamp(control.fac_min, 1.0)
            } else {
                control.fac_min
            };
            h = h_try * fac;
            if h < h_min {
                return Err(Error::IntegrationFailure { t_last: t, step: h });
            }
        }
    }
    Ok(stats)
}

fn step<T: Scalar, S: OdeSystem<T>>(sys: &S, t: f64, h: f64, y: &[T], ws: &mut Workspace<T>) {
    let n = y.len();
    let Workspace { k, stage, y_new, err } = ws;
    let [k1, k2, k3, k4, k5, k6, k7] = k;

    for i in 0..n {
        stage[i] = y[i] + k1[i] * (h * A21);
    }
    sys.rhs(t + C2 * h, stage, k2);
    for i in 0..n {
        stage[i] = y[i] + (k1[i] * A31 + k2[i] * A32) * h;
    }
    sys.rhs(t + C3 * h, stage, k3);
    for i in 0..n {
        stage[i] = y[i] + (k1[i] * A41 + k2[i] * A42 + k3[i] * A43) * h;
    }
    sys.rhs(t + C4 * h, stage, k4);
    for i in 0..n {
        stage[i] = y[i] + (k1[i] * A51 + k2[i] * A52 + k3[i] * A53 + k4[i] * A54) * h;
    }
    sys.rhs(t + C5 * h, stage, k5);
    for i in 0..n {
        stage[i] = y[i]
            + (k1[i] * A61 + k2[i] * A62 + k3[i] * A63 + k4[i] * A64 + k5[i] * A65) * h;
    }
    sys.rhs(t + h, stage, k6);
    for i in 0..n {
        y_new[i] = y[i] + (k1[i] * B1 + k3[i] * B3 + k4[i] * B4 + k5[i] * B5 + k6[i] * B6) * h;
    }
    sys.rhs(t + h, y_new, k7);
    for i in 0..n {
        err[i] = (k1[i] * E1
            + k3[i] * E3
            + k4[i] * E4
            + k5[i] * E5
            + k6[i] * E6
            + k7[i] * E7)
            * h;
    }
}

/// Starting step size following Hairer, Norsett & Wanner (II.4).
fn initial_step<T: Scalar, S: OdeSystem<T>>(
    sys: &S,
    t0: f64,
    y0: &[T],
    ws: &mut Workspace<T>,
    span: f64,
) -> f64 {
    let d0 = sys.error_norm(y0, y0, y0);
    let d1 = sys.error_norm(&ws.k[0], y0, y0);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    };
    let h0 = h0.min(span);
    for ((s, &y), &k) in ws.stage.iter_mut().zip(y0).zip(&ws.k[0]) {
        *s = y + k * h0;
    }
    sys.rhs(t0 + h0, &ws.stage, &mut ws.k[1]);
    for i in 0..y0.len() {
        ws.err[i] = (ws.k[1][i] + ws.k[0][i] * -1.0) * (1.0 / h0);
    }
    let d2 = sys.error_norm(&ws.err, y0, y0);
    let dmax = d1.max(d2);
    let h1 = if dmax <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / dmax).powf(0.2)
    };
    (100.0 * h0).min(h1).min(span)
}
