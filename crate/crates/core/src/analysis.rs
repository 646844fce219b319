//! Envelope extraction and fits of the growth/decay ansatz
//! `F(t) = C t^alpha exp(-gamma t)` and of its scaling with `N`.
//!
//! The ansatz is linear in `(ln C, alpha, gamma)` after taking logarithms, so
//! every fit here is an ordinary least-squares problem solved by QR, except the
//! asymptote `alpha(N) = a exp(-b N) + alpha_inf` which is separable: linear in
//! `(a, alpha_inf)` for fixed `b`.

use faer::linalg::solvers::SolveLstsq;
use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::dynamics::Trajectory;
use crate::error::{Error, Result};

pub const DEFAULT_THRESHOLD_FRACTION: f64 = 0.01;
/// `gamma` below this after an unconstrained fit triggers a refit with `gamma = 0`.
pub const NEGATIVE_GAMMA_TOL: f64 = -1e-6;
/// Search interval for `ln b` in the asymptote fit.
pub const LOG_B_RANGE: (f64, f64) = (-6.0, 1.0);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnsatzFit {
    pub c_amp: f64,
    pub alpha: f64,
    pub gamma: f64,
    pub rms_log_residual: f64,
    pub n_points: usize,
}

impl AnsatzFit {
    pub fn evaluate(&self, t: f64) -> f64 {
        self.c_amp * t.powf(self.alpha) * (-self.gamma * t).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScalingFit {
    /// `gamma = prefactor * N^exponent`
    GammaPowerLaw {
        prefactor: f64,
        exponent: f64,
        rms_residual: f64,
    },
    /// `alpha = a exp(-b N) + alpha_inf`
    AlphaAsymptote {
        a: f64,
        b: f64,
        alpha_inf: f64,
        rms_residual: f64,
        /// Constant input: `a = 0` and `b` carries no information.
        degenerate: bool,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakSummary {
    /// `alpha / gamma`; `None` when the fitted decay rate is zero.
    pub t_star: Option<f64>,
    pub f_star: Option<f64>,
    pub t_star_empirical: f64,
    pub f_star_empirical: f64,
}

/// Interior strict local maxima above `threshold_fraction * max`, falling
/// back to every point above the threshold when fewer than three maxima exist.
pub fn extract_envelope(traj: &Trajectory, threshold_fraction: f64) -> Result<Vec<(f64, f64)>> {
    let series: Vec<(f64, f64)> = traj.records.iter().map(|r| (r.t, r.qfi)).collect();
    envelope_of(&series, threshold_fraction)
}

/// [`extract_envelope`] on a bare `(t, F)` series.
pub fn envelope_of(series: &[(f64, f64)], threshold_fraction: f64) -> Result<Vec<(f64, f64)>> {
    if !(threshold_fraction > 0.0 && threshold_fraction < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "threshold fraction must lie in (0, 1), got {threshold_fraction}"
        )));
    }
    let max = series.iter().map(|p| p.1).fold(0.0f64, f64::max);
    if !(max > 0.0) {
        return Err(Error::EmptyEnvelope);
    }
    let positive = series.iter().filter(|p| p.1 > 0.0).count();
    if positive < 5 {
        return Err(Error::InvalidParameter(format!(
            "need at least 5 samples with positive QFI, got {positive}"
        )));
    }
    let floor = threshold_fraction * max;
    let keep = |p: &(f64, f64)| p.0 > 0.0 && p.1 >= floor;
    let maxima: Vec<(f64, f64)> = series
        .windows(3)
        .filter(|w| w[1].1 > w[0].1 && w[1].1 > w[2].1)
        .map(|w| w[1])
        .filter(keep)
        .collect();
    if maxima.len() >= 3 {
        Ok(maxima)
    } else {
        Ok(series.iter().copied().filter(keep).collect())
    }
}

/// Least squares `design * x ~ y` via QR of the column-normalized design.
fn least_squares(design: &Mat<f64>, y: &[f64]) -> Result<Vec<f64>> {
    let (m, k) = (design.nrows(), design.ncols());
    if m < k {
        return Err(Error::FitFailure(format!("{m} points for {k} unknowns")));
    }
    let scales: Vec<f64> = (0..k)
        .map(|j| (0..m).map(|i| design[(i, j)].powi(2)).sum::<f64>().sqrt())
        .collect();
    if scales.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
        return Err(Error::FitFailure("degenerate design column".into()));
    }
    let scaled = Mat::<f64>::from_fn(m, k, |i, j| design[(i, j)] / scales[j]);
    let qr = scaled.qr();
    let r = qr.thin_R();
    let rmax = (0..k).map(|j| r[(j, j)].abs()).fold(0.0f64, f64::max);
    if (0..k).any(|j| r[(j, j)].abs() <= 1e-10 * rmax) {
        return Err(Error::FitFailure("rank-deficient design".into()));
    }
    let rhs = Mat::<f64>::from_fn(m, 1, |i, _| y[i]);
    let sol = qr.solve_lstsq(&rhs);
    Ok((0..k).map(|j| sol[(j, 0)] / scales[j]).collect())
}

fn rms(residuals: impl Iterator<Item = f64>) -> f64 {
    let (mut acc, mut n) = (0.0, 0usize);
    for r in residuals {
        acc += r * r;
        n += 1;
    }
    if n == 0 {
        0.0
    } else {
        (acc / n as f64).sqrt()
    }
}

/// Fits `ln F = ln C + alpha ln t - gamma t`.
pub fn fit_ansatz(points: &[(f64, f64)]) -> Result<AnsatzFit> {
    if points.len() < 3 {
        return Err(Error::FitFailure(format!(
            "need at least 3 points, got {}",
            points.len()
        )));
    }
    if let Some(p) = points.iter().find(|p| !(p.0 > 0.0) || !(p.1 > 0.0)) {
        return Err(Error::FitFailure(format!(
            "points must have t > 0 and F > 0, got {p:?}"
        )));
    }
    let m = points.len();
    let log_f: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let design = Mat::<f64>::from_fn(m, 3, |i, j| match j {
        0 => 1.0,
        1 => points[i].0.ln(),
        _ => -points[i].0,
    });
    let x = least_squares(&design, &log_f)?;
    let (log_c, alpha, gamma) = if x[2] < NEGATIVE_GAMMA_TOL {
        let design = Mat::<f64>::from_fn(m, 2, |i, j| if j == 0 { 1.0 } else { points[i].0.ln() });
        let x = least_squares(&design, &log_f)?;
        (x[0], x[1], 0.0)
    } else {
        (x[0], x[1], x[2].max(0.0))
    };
    let rms_log_residual = rms(
        points
            .iter()
            .zip(&log_f)
            .map(|(p, lf)| lf - (log_c + alpha * p.0.ln() - gamma * p.0)),
    );
    Ok(AnsatzFit {
        c_amp: log_c.exp(),
        alpha,
        gamma,
        rms_log_residual,
        n_points: m,
    })
}

pub fn peak_summary(fit: &AnsatzFit, traj: &Trajectory) -> PeakSummary {
    let series: Vec<(f64, f64)> = traj.records.iter().map(|r| (r.t, r.qfi)).collect();
    peak_summary_of(fit, &series)
}

/// [`peak_summary`] on a bare `(t, F)` series.
pub fn peak_summary_of(fit: &AnsatzFit, series: &[(f64, f64)]) -> PeakSummary {
    let (t_emp, f_emp) = series
        .iter()
        .copied()
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap_or((f64::NAN, f64::NAN));
    let (t_star, f_star) = fitted_peak(fit);
    PeakSummary {
        t_star,
        f_star,
        t_star_empirical: t_emp,
        f_star_empirical: f_emp,
    }
}

/// `t* = alpha / gamma`, `F* = C t*^alpha e^-alpha`.
pub fn fitted_peak(fit: &AnsatzFit) -> (Option<f64>, Option<f64>) {
    if fit.gamma > 0.0 {
        let t = fit.alpha / fit.gamma;
        (Some(t), Some(fit.c_amp * t.powf(fit.alpha) * (-fit.alpha).exp()))
    } else {
        (None, None)
    }
}

/// Mean `dS/dt` over `[0, t_end]`, from the last sample at or before `t_end`.
pub fn mean_entropy_rate(traj: &Trajectory, t_end: f64) -> Option<f64> {
    let first = traj.records.first()?;
    let last = traj.records.iter().take_while(|r| r.t <= t_end).last()?;
    let span = last.t - first.t;
    (span > 0.0).then(|| (last.entropy - first.entropy) / span)
}

/// Power law `y = prefactor * x^exponent` by a log-log line fit; returns
/// `(prefactor, exponent, rms log residual)`.
pub fn power_law_fit(points: &[(f64, f64)]) -> Result<(f64, f64, f64)> {
    if let Some(p) = points.iter().find(|p| !(p.0 > 0.0) || !(p.1 > 0.0)) {
        return Err(Error::FitFailure(format!("power law needs positive data, got {p:?}")));
    }
    let m = points.len();
    if m < 2 {
        return Err(Error::FitFailure("need at least 2 points".into()));
    }
    let design = Mat::<f64>::from_fn(m, 2, |i, j| if j == 0 { 1.0 } else { points[i].0.ln() });
    let ly: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let x = least_squares(&design, &ly)?;
    let res = rms(points.iter().zip(&ly).map(|(p, l)| l - x[0] - x[1] * p.0.ln()));
    Ok((x[0].exp(), x[1], res))
}

fn distinct_count(xs: impl Iterator<Item = f64>) -> usize {
    let mut v: Vec<f64> = xs.collect();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v.len()
}

pub fn fit_gamma_scaling(data: &[(f64, f64)]) -> Result<ScalingFit> {
    if distinct_count(data.iter().map(|d| d.0)) < 3 {
        return Err(Error::FitFailure("need at least 3 distinct N".into()));
    }
    if let Some(d) = data.iter().find(|d| !(d.1 > 0.0)) {
        return Err(Error::FitFailure(format!("gamma must be positive, got {} at N = {}", d.1, d.0)));
    }
    let (prefactor, exponent, rms_residual) = power_law_fit(data)?;
    Ok(ScalingFit::GammaPowerLaw {
        prefactor,
        exponent,
        rms_residual,
    })
}

/// Best `(a, alpha_inf)` and the sum of squared residuals at fixed `b`.
fn asymptote_inner(data: &[(f64, f64)], b: f64) -> (f64, f64, f64) {
    let m = data.len();
    let design = Mat::<f64>::from_fn(m, 2, |i, j| if j == 0 { (-b * data[i].0).exp() } else { 1.0 });
    let y: Vec<f64> = data.iter().map(|d| d.1).collect();
    let (a, c) = match least_squares(&design, &y) {
        Ok(x) => (x[0], x[1]),
        Err(_) => (0.0, y.iter().sum::<f64>() / m as f64),
    };
    let sse = data
        .iter()
        .map(|&(n, al)| (al - a * (-b * n).exp() - c).powi(2))
        .sum();
    (a, c, sse)
}

pub fn fit_alpha_asymptote(data: &[(f64, f64)]) -> Result<ScalingFit> {
    if distinct_count(data.iter().map(|d| d.0)) < 4 {
        return Err(Error::FitFailure("need at least 4 distinct N".into()));
    }
    if data.iter().any(|d| !d.0.is_finite() || !d.1.is_finite()) {
        return Err(Error::FitFailure("non-finite input".into()));
    }
    let mean = data.iter().map(|d| d.1).sum::<f64>() / data.len() as f64;
    let spread = data.iter().map(|d| (d.1 - mean).abs()).fold(0.0, f64::max);
    if spread <= 1e-12 * mean.abs().max(1.0) {
        return Ok(ScalingFit::AlphaAsymptote {
            a: 0.0,
            b: 1.0,
            alpha_inf: mean,
            rms_residual: 0.0,
            degenerate: true,
        });
    }

    let objective = |log_b: f64| asymptote_inner(data, log_b.exp()).2;
    // bracket on a coarse grid, then refine by golden section
    let (lo, hi) = LOG_B_RANGE;
    let steps = 280;
    let grid: Vec<f64> = (0..=steps).map(|i| lo + (hi - lo) * i as f64 / steps as f64).collect();
    let values: Vec<f64> = grid.iter().map(|&x| objective(x)).collect();
    let best = (0..grid.len())
        .min_by(|&i, &j| values[i].total_cmp(&values[j]))
        .unwrap_or(0);
    let mut a = grid[best.saturating_sub(1)];
    let mut b = grid[(best + 1).min(steps)];
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - inv_phi * (b - a);
    let mut x2 = a + inv_phi * (b - a);
    let (mut f1, mut f2) = (objective(x1), objective(x2));
    for _ in 0..200 {
        if (b - a).abs() < 1e-13 {
            break;
        }
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = objective(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = objective(x2);
        }
    }
    let mut log_b = 0.5 * (a + b);
    if values[best] < objective(log_b) {
        log_b = grid[best];
    }
    let b_fit = log_b.exp();
    let (amp, alpha_inf, sse) = asymptote_inner(data, b_fit);
    Ok(ScalingFit::AlphaAsymptote {
        a: amp,
        b: b_fit,
        alpha_inf,
        rms_residual: (sse / data.len() as f64).sqrt(),
        degenerate: false,
    })
}
