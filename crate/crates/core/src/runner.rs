//! Run configuration, orchestration of single runs and parameter scans, and
//! CSV/JSON output.
//!
//! Every CSV float is written with 17 significant digits so files round-trip
//! exactly, and every file is written to a temporary sibling and renamed into
//! place.

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{self, AnsatzFit, PeakSummary, ScalingFit};
use crate::dynamics::{self, ObservableRecord, SimParams, Trajectory};
use crate::error::{Error, Result};
use crate::meanfield;
use crate::spin;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// `(omega_BTC, phi_BTC) = (sqrt(omega0^2 - kappa^2), asin(kappa / omega0))`.
pub fn resonance_defaults(omega0: f64, kappa: f64) -> Result<(f64, f64)> {
    resonance_with_reference(omega0, kappa, omega0)
}

/// Same as [`resonance_defaults`] with `asin(kappa / reference)` for the phase.
pub fn resonance_with_reference(omega0: f64, kappa: f64, reference: f64) -> Result<(f64, f64)> {
    if !(kappa >= 0.0) || !(omega0 > kappa) {
        return Err(Error::NoResonance { omega0, kappa });
    }
    if !(reference >= kappa) || reference == 0.0 {
        return Err(Error::InvalidParameter(format!(
            "phase reference {reference} must be at least kappa = {kappa}"
        )));
    }
    Ok(((omega0 * omega0 - kappa * kappa).sqrt(), (kappa / reference).asin()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    #[default]
    Simulate,
    SweepResonance,
    ScanN,
    ScanKappa,
    CompareMf,
    Fit,
}

impl Mode {
    pub const ALL: [Mode; 6] = [
        Mode::Simulate,
        Mode::SweepResonance,
        Mode::ScanN,
        Mode::ScanKappa,
        Mode::CompareMf,
        Mode::Fit,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Mode::Simulate => "simulate",
            Mode::SweepResonance => "sweep-resonance",
            Mode::ScanN => "scan-n",
            Mode::ScanKappa => "scan-kappa",
            Mode::CompareMf => "compare-mf",
            Mode::Fit => "fit",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Mode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown mode `{s}`")))
    }
}

/// Physical parameters as written in a config file. Resonance values and the
/// window are filled in by [`ParamsConfig::resolve`] when absent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParamsConfig {
    pub n_spins: usize,
    pub omega0: f64,
    pub kappa: f64,
    pub g: f64,
    pub omega_ac: Option<f64>,
    pub phi: Option<f64>,
    /// Frequency in `phi_BTC = asin(kappa / reference)`; `omega0` when unset.
    pub phase_reference: Option<f64>,
    pub t_max: Option<f64>,
    /// Window `t_max = window_factor * N / kappa` when `t_max` is unset.
    pub window_factor: f64,
    pub n_out: usize,
    pub rtol: f64,
    pub atol: f64,
    pub ac_enabled: bool,
}

impl Default for ParamsConfig {
    fn default() -> Self {
        Self {
            n_spins: 32,
            omega0: 4.0,
            kappa: 1.0,
            g: 0.0,
            omega_ac: None,
            phi: None,
            phase_reference: None,
            t_max: None,
            window_factor: dynamics::DEFAULT_WINDOW_FACTOR,
            n_out: dynamics::DEFAULT_N_OUT,
            rtol: dynamics::DEFAULT_RTOL,
            atol: dynamics::DEFAULT_ATOL,
            ac_enabled: true,
        }
    }
}

impl ParamsConfig {
    pub fn with_n(&self, n_spins: usize) -> Self {
        Self {
            n_spins,
            ..self.clone()
        }
    }

    pub fn resolve(&self) -> Result<SimParams> {
        let (omega_ac, phi) = match (self.omega_ac, self.phi) {
            (Some(w), Some(p)) => (w, p),
            (w, p) => {
                let reference = self.phase_reference.unwrap_or(self.omega0);
                let (w0, p0) = resonance_with_reference(self.omega0, self.kappa, reference)?;
                (w.unwrap_or(w0), p.unwrap_or(p0))
            }
        };
        let t_max = match self.t_max {
            Some(t) => t,
            None if self.kappa > 0.0 => self.window_factor * self.n_spins as f64 / self.kappa,
            None => return Err(Error::Config("t_max is required when kappa = 0".into())),
        };
        let params = SimParams {
            n_spins: self.n_spins,
            omega0: self.omega0,
            kappa: self.kappa,
            g: self.g,
            omega_ac,
            phi,
            t_max,
            n_out: self.n_out,
            rtol: self.rtol,
            atol: self.atol,
            ac_enabled: self.ac_enabled,
        };
        params.validate()?;
        Ok(params)
    }
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub mode: Mode,
    pub params: ParamsConfig,
    /// System sizes for `scan-n`, `scan-kappa` and `compare-mf`.
    pub n_grid: Vec<usize>,
    /// Frequency detunings in units of `kappa`.
    pub delta_omega_grid: Vec<f64>,
    /// Phase detunings in units of `pi`.
    pub delta_phi_grid: Vec<f64>,
    /// Values of `kappa / omega0` for `scan-kappa`; `kappa` is held fixed.
    pub kappa_ratio_grid: Vec<f64>,
    pub threshold_fraction: f64,
    pub mf_dg: f64,
    /// Trajectory CSV read by `fit`; `output_dir/trajectory.csv` when unset.
    pub fit_input: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub n_workers: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Simulate,
            params: ParamsConfig::default(),
            n_grid: vec![16, 32, 64, 128],
            delta_omega_grid: linspace(-0.5, 0.5, 9),
            delta_phi_grid: linspace(-0.2, 0.2, 9),
            kappa_ratio_grid: vec![0.5, 0.2, 0.1, 0.05],
            threshold_fraction: analysis::DEFAULT_THRESHOLD_FRACTION,
            mf_dg: meanfield::DEFAULT_DG,
            fit_input: None,
            output_dir: PathBuf::from("out"),
            n_workers: 1,
        }
    }
}

/// Command-line overrides; each replaces the config field of the same name.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub mode: Option<Mode>,
    pub n_spins: Option<usize>,
    pub omega0: Option<f64>,
    pub kappa: Option<f64>,
    pub t_max: Option<f64>,
    pub rtol: Option<f64>,
    pub output_dir: Option<PathBuf>,
    pub n_workers: Option<usize>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        // an unreadable config is a config problem, not an output failure
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(m) = o.mode {
            self.mode = m;
        }
        if let Some(n) = o.n_spins {
            self.params.n_spins = n;
        }
        if let Some(w) = o.omega0 {
            self.params.omega0 = w;
        }
        if let Some(k) = o.kappa {
            self.params.kappa = k;
        }
        if let Some(t) = o.t_max {
            self.params.t_max = Some(t);
        }
        if let Some(r) = o.rtol {
            self.params.rtol = r;
        }
        if let Some(d) = &o.output_dir {
            self.output_dir = d.clone();
        }
        if let Some(w) = o.n_workers {
            self.n_workers = w;
        }
    }

    pub fn validate(&self) -> Result<()> {
        let cfg = |msg: String| Err(Error::Config(msg));
        if self.n_workers == 0 {
            return cfg("n_workers must be positive".into());
        }
        if !(self.threshold_fraction > 0.0 && self.threshold_fraction < 1.0) {
            return cfg(format!("threshold_fraction {} outside (0, 1)", self.threshold_fraction));
        }
        if !(self.mf_dg > 0.0) {
            return cfg(format!("mf_dg must be positive, got {}", self.mf_dg));
        }
        let needs_n = matches!(self.mode, Mode::ScanN | Mode::ScanKappa | Mode::CompareMf);
        if needs_n && self.n_grid.is_empty() {
            return cfg(format!("n_grid is empty for mode {}", self.mode));
        }
        if self.n_grid.contains(&0) {
            return cfg("n_grid entries must be positive".into());
        }
        if self.mode == Mode::SweepResonance
            && (self.delta_omega_grid.is_empty() || self.delta_phi_grid.is_empty())
        {
            return cfg("detuning grids are empty".into());
        }
        if self.mode == Mode::ScanKappa {
            if self.kappa_ratio_grid.is_empty() {
                return cfg("kappa_ratio_grid is empty".into());
            }
            if let Some(r) = self.kappa_ratio_grid.iter().find(|&&r| !(r > 0.0 && r < 1.0)) {
                return cfg(format!("kappa / omega0 = {r} outside (0, 1)"));
            }
        }
        if self.mode != Mode::ScanKappa {
            self.params.resolve()?;
        }
        Ok(())
    }
}

/// Process exit status for an error: 1 config, 2 numerical, 3 I/O.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::InvalidParameter(_) | Error::NoResonance { .. } => 1,
        Error::Io { .. } | Error::Csv(_) | Error::Json(_) => 3,
        _ => 2,
    }
}

fn fmt_f(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.16e}")
    }
}

fn fmt_opt(x: Option<f64>) -> String {
    fmt_f(x.unwrap_or(f64::NAN))
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |e| Error::io(path, e)
}

/// Writes via a temporary file in the same directory and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err(dir))?;
    tmp.write_all(bytes).map_err(io_err(path))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

fn csv_bytes(header: &[String], rows: &[Vec<String>]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.into_inner().map_err(|e| Error::Csv(e.into_error().into()))
}

fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let header: Vec<String> = header.iter().map(|s| s.to_string()).collect();
    write_atomic(path, &csv_bytes(&header, rows)?)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_vec_pretty(value)?;
    text.push(b'\n');
    write_atomic(path, &text)
}

fn pool(n_workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(n_workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))
}

/// Maps `f` over `items` on `n_workers` threads, keeping input order.
fn parallel_map<T, R, F>(n_workers: usize, items: &[T], f: F) -> Result<Vec<R>>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    Ok(pool(n_workers)?.install(|| items.par_iter().map(f).collect()))
}

pub const TRAJECTORY_HEADER: [&str; 9] = [
    "t",
    "qfi",
    "qfi_over_n",
    "sy",
    "sz",
    "var_sz",
    "var_sz_over_n",
    "entropy",
    "purity",
];

fn trajectory_rows(n_spins: usize, records: &[ObservableRecord]) -> Vec<Vec<String>> {
    let n = n_spins as f64;
    records
        .iter()
        .map(|r| {
            [r.t, r.qfi, r.qfi / n, r.sy, r.sz, r.var_sz, r.var_sz / n, r.entropy, r.purity]
                .into_iter()
                .map(fmt_f)
                .collect()
        })
        .collect()
}

pub fn write_trajectory_csv(path: &Path, n_spins: usize, records: &[ObservableRecord]) -> Result<()> {
    write_csv(path, &TRAJECTORY_HEADER, &trajectory_rows(n_spins, records))
}

#[derive(Debug, Serialize)]
struct RunMetadata<'a> {
    version: &'static str,
    mode: Mode,
    status: String,
    complete: bool,
    wall_time_s: f64,
    resolved_params: Option<SimParams>,
    config: &'a RunConfig,
}

/// Paths written by one call of [`run`].
#[derive(Debug, Clone, Default)]
pub struct RunOutput {
    pub files: Vec<PathBuf>,
}

/// Runs `config.mode`, writing its outputs and `run.json` under `output_dir`.
pub fn run(config: &RunConfig) -> Result<RunOutput> {
    config.validate()?;
    let start = Instant::now();
    let dir = &config.output_dir;
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    info!("mode {} -> {}", config.mode, dir.display());
    let result = match config.mode {
        Mode::Simulate => run_simulate(config),
        Mode::SweepResonance => run_sweep_resonance(config),
        Mode::ScanN => run_scan_n(config),
        Mode::ScanKappa => run_scan_kappa(config),
        Mode::CompareMf => run_compare_mf(config),
        Mode::Fit => run_fit(config),
    };
    let meta = RunMetadata {
        version: VERSION,
        mode: config.mode,
        status: match &result {
            Ok(_) => "ok".into(),
            Err(e) => format!("failed: {e}"),
        },
        complete: result.is_ok(),
        wall_time_s: start.elapsed().as_secs_f64(),
        resolved_params: config.params.resolve().ok(),
        config,
    };
    let meta_path = dir.join("run.json");
    write_json(&meta_path, &meta)?;
    let mut out = result?;
    out.files.push(meta_path);
    Ok(out)
}

/// Single trajectory from the polarized state. On integration failure the
/// samples reached so far are still written before the error is returned.
pub fn run_simulate(config: &RunConfig) -> Result<RunOutput> {
    let params = config.params.resolve()?;
    let initial = spin::polarized_up_state(params.n_spins)?;
    let mut records = Vec::with_capacity(params.n_out);
    let result = dynamics::record_into(&params, &initial, &mut records);
    let path = config.output_dir.join("trajectory.csv");
    write_trajectory_csv(&path, params.n_spins, &records)?;
    let stats = result?;
    info!(
        "N = {}: {} steps accepted, {} rejected",
        params.n_spins, stats.accepted, stats.rejected
    );
    Ok(RunOutput { files: vec![path] })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeatmapRow {
    pub delta_phi: f64,
    pub delta_omega: f64,
    pub max_qfi: f64,
    pub t_of_max: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeatmapResult {
    pub n_spins: usize,
    /// Row-major in `(delta_phi, delta_omega)` grid order.
    pub rows: Vec<HeatmapRow>,
    /// `(row index, message)` for points whose integration failed.
    pub failures: Vec<(usize, String)>,
}

impl HeatmapResult {
    /// Row with the largest finite `max_qfi`.
    pub fn argmax(&self) -> Option<&HeatmapRow> {
        self.rows
            .iter()
            .filter(|r| r.max_qfi.is_finite())
            .max_by(|a, b| a.max_qfi.total_cmp(&b.max_qfi))
    }
}

/// Maximum QFI over the window for every detuning pair, with
/// `omega_ac = omega_BTC + kappa * delta_omega` and `phi = phi_BTC + pi * delta_phi`.
pub fn resonance_heatmap(
    params: &ParamsConfig,
    delta_phi: &[f64],
    delta_omega: &[f64],
    n_workers: usize,
) -> Result<HeatmapResult> {
    let base = params.resolve()?;
    let points: Vec<(f64, f64)> = delta_phi
        .iter()
        .flat_map(|&dp| delta_omega.iter().map(move |&dw| (dp, dw)))
        .collect();
    let results = parallel_map(n_workers, &points, |&(dp, dw)| {
        let mut p = base.clone();
        p.omega_ac += base.kappa * dw;
        p.phi += std::f64::consts::PI * dp;
        dynamics::integrate(&p).map(|traj| {
            traj.peak()
                .map(|r| (r.qfi, r.t))
                .unwrap_or((f64::NAN, f64::NAN))
        })
    })?;
    let mut rows = Vec::with_capacity(points.len());
    let mut failures = Vec::new();
    for (i, (&(dp, dw), res)) in points.iter().zip(results).enumerate() {
        let (max_qfi, t_of_max) = res.unwrap_or_else(|e| {
            warn!("heatmap point delta_phi = {dp}, delta_omega = {dw} failed: {e}");
            failures.push((i, e.to_string()));
            (f64::NAN, f64::NAN)
        });
        rows.push(HeatmapRow {
            delta_phi: dp,
            delta_omega: dw,
            max_qfi,
            t_of_max,
        });
    }
    Ok(HeatmapResult {
        n_spins: base.n_spins,
        rows,
        failures,
    })
}

pub fn heatmap_csv(result: &HeatmapResult) -> Result<Vec<u8>> {
    let header: Vec<String> = ["delta_phi", "delta_omega", "max_qfi", "t_of_max"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let rows: Vec<Vec<String>> = result
        .rows
        .iter()
        .map(|r| [r.delta_phi, r.delta_omega, r.max_qfi, r.t_of_max].into_iter().map(fmt_f).collect())
        .collect();
    csv_bytes(&header, &rows)
}

pub fn run_sweep_resonance(config: &RunConfig) -> Result<RunOutput> {
    let result = resonance_heatmap(
        &config.params,
        &config.delta_phi_grid,
        &config.delta_omega_grid,
        config.n_workers,
    )?;
    write_heatmap(&config.output_dir, &result)
}

/// Writes `heatmap.csv`, plus `heatmap_errors.log` when any point failed.
pub fn write_heatmap(dir: &Path, result: &HeatmapResult) -> Result<RunOutput> {
    let path = dir.join("heatmap.csv");
    write_atomic(&path, &heatmap_csv(result)?)?;
    let mut files = vec![path];
    if !result.failures.is_empty() {
        let log_path = dir.join("heatmap_errors.log");
        let text: String = result
            .failures
            .iter()
            .map(|(i, msg)| {
                let r = &result.rows[*i];
                format!("delta_phi={} delta_omega={}: {msg}\n", r.delta_phi, r.delta_omega)
            })
            .collect();
        write_atomic(&log_path, text.as_bytes())?;
        files.push(log_path);
    }
    Ok(RunOutput { files })
}

/// Fit results for one system size of an N-scan.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanRow {
    pub n_spins: usize,
    pub fit: Option<AnsatzFit>,
    pub peak: Option<PeakSummary>,
    /// Mean `dS/dt` over `[0, t*]` with the empirical `t*`.
    pub entropy_rate: Option<f64>,
    pub status: String,
}

#[derive(Debug, Clone)]
pub struct ScanResult {
    pub rows: Vec<ScanRow>,
    /// Trajectories that completed, in grid order.
    pub trajectories: Vec<Trajectory>,
}

impl ScanResult {
    pub fn row(&self, n_spins: usize) -> Option<&ScanRow> {
        self.rows.iter().find(|r| r.n_spins == n_spins)
    }

    pub fn trajectory(&self, n_spins: usize) -> Option<&Trajectory> {
        self.trajectories.iter().find(|t| t.params.n_spins == n_spins)
    }

    fn fitted(&self, value: impl Fn(&AnsatzFit) -> f64) -> Vec<(f64, f64)> {
        self.rows
            .iter()
            .filter_map(|r| r.fit.as_ref().map(|f| (r.n_spins as f64, value(f))))
            .collect()
    }

    pub fn gamma_scaling(&self) -> Result<ScalingFit> {
        analysis::fit_gamma_scaling(&self.fitted(|f| f.gamma))
    }

    pub fn alpha_asymptote(&self) -> Result<ScalingFit> {
        analysis::fit_alpha_asymptote(&self.fitted(|f| f.alpha))
    }
}

fn scan_row(traj: &Trajectory, threshold: f64) -> ScanRow {
    let n_spins = traj.params.n_spins;
    let peak_t = traj.peak().map(|r| r.t);
    let entropy_rate = peak_t.and_then(|t| analysis::mean_entropy_rate(traj, t));
    let fitted = analysis::extract_envelope(traj, threshold).and_then(|env| analysis::fit_ansatz(&env));
    match fitted {
        Ok(fit) => ScanRow {
            n_spins,
            peak: Some(analysis::peak_summary(&fit, traj)),
            fit: Some(fit),
            entropy_rate,
            status: "ok".into(),
        },
        Err(e) => ScanRow {
            n_spins,
            fit: None,
            peak: None,
            entropy_rate,
            status: format!("fit failed: {e}"),
        },
    }
}

/// Integrates each size at the configured drive and fits the ansatz to its
/// QFI envelope.
pub fn scan_n(params: &ParamsConfig, n_grid: &[usize], threshold: f64, n_workers: usize) -> Result<ScanResult> {
    let resolved: Vec<SimParams> = n_grid
        .iter()
        .map(|&n| params.with_n(n).resolve())
        .collect::<Result<_>>()?;
    let runs = parallel_map(n_workers, &resolved, |p| {
        info!("integrating N = {}, omega0 = {}", p.n_spins, p.omega0);
        dynamics::integrate(p)
    })?;
    let mut rows = Vec::new();
    let mut trajectories = Vec::new();
    for (p, run) in resolved.iter().zip(runs) {
        match run {
            Ok(traj) => {
                rows.push(scan_row(&traj, threshold));
                trajectories.push(traj);
            }
            Err(e) => {
                warn!("N = {} failed: {e}", p.n_spins);
                rows.push(ScanRow {
                    n_spins: p.n_spins,
                    fit: None,
                    peak: None,
                    entropy_rate: None,
                    status: format!("integration failed: {e}"),
                });
            }
        }
    }
    Ok(ScanResult { rows, trajectories })
}

pub const SCALING_HEADER: [&str; 12] = [
    "n_spins",
    "c_amp",
    "alpha",
    "gamma",
    "t_star",
    "f_star",
    "t_star_empirical",
    "f_star_empirical",
    "rms_log_residual",
    "n_envelope",
    "entropy_rate",
    "status",
];

fn scaling_row(r: &ScanRow) -> Vec<String> {
    let f = r.fit.as_ref();
    let p = r.peak.as_ref();
    vec![
        r.n_spins.to_string(),
        fmt_opt(f.map(|f| f.c_amp)),
        fmt_opt(f.map(|f| f.alpha)),
        fmt_opt(f.map(|f| f.gamma)),
        fmt_opt(p.and_then(|p| p.t_star)),
        fmt_opt(p.and_then(|p| p.f_star)),
        fmt_opt(p.map(|p| p.t_star_empirical)),
        fmt_opt(p.map(|p| p.f_star_empirical)),
        fmt_opt(f.map(|f| f.rms_log_residual)),
        f.map(|f| f.n_points).unwrap_or(0).to_string(),
        fmt_opt(r.entropy_rate),
        r.status.clone(),
    ]
}

#[derive(Debug, Clone, Serialize)]
pub struct ScalingFits {
    pub omega0: f64,
    pub kappa: f64,
    pub gamma: Option<ScalingFit>,
    pub alpha: Option<ScalingFit>,
    pub errors: Vec<String>,
}

fn scaling_fits(result: &ScanResult, omega0: f64, kappa: f64) -> ScalingFits {
    let mut errors = Vec::new();
    let mut keep = |r: Result<ScalingFit>, what: &str| {
        r.map_err(|e| errors.push(format!("{what}: {e}"))).ok()
    };
    let gamma = keep(result.gamma_scaling(), "gamma");
    let alpha = keep(result.alpha_asymptote(), "alpha");
    ScalingFits {
        omega0,
        kappa,
        gamma,
        alpha,
        errors,
    }
}

pub fn run_scan_n(config: &RunConfig) -> Result<RunOutput> {
    let result = scan_n(&config.params, &config.n_grid, config.threshold_fraction, config.n_workers)?;
    write_scan(&config.output_dir, &result, config.params.omega0, config.params.kappa)
}

/// Writes one trajectory CSV per size, `scaling.csv` and `scaling_fits.json`.
pub fn write_scan(dir: &Path, result: &ScanResult, omega0: f64, kappa: f64) -> Result<RunOutput> {
    let mut files = Vec::new();
    for traj in &result.trajectories {
        let path = dir.join(format!("trajectory_n{}.csv", traj.params.n_spins));
        write_trajectory_csv(&path, traj.params.n_spins, &traj.records)?;
        files.push(path);
    }
    let path = dir.join("scaling.csv");
    let rows: Vec<Vec<String>> = result.rows.iter().map(scaling_row).collect();
    write_csv(&path, &SCALING_HEADER, &rows)?;
    files.push(path);
    let path = dir.join("scaling_fits.json");
    write_json(&path, &scaling_fits(result, omega0, kappa))?;
    files.push(path);
    Ok(RunOutput { files })
}

/// One point of the `alpha_inf(kappa)` curve.
#[derive(Debug)]
pub struct AlphaKappaPoint {
    pub kappa_over_omega0: f64,
    pub omega0: f64,
    pub kappa: f64,
    pub scan: ScanResult,
    pub asymptote: Result<ScalingFit>,
}

impl AlphaKappaPoint {
    pub fn alpha_inf(&self) -> Option<f64> {
        match self.asymptote {
            Ok(ScalingFit::AlphaAsymptote { alpha_inf, .. }) => Some(alpha_inf),
            _ => None,
        }
    }
}

/// N-scans at `omega0 = kappa / ratio` for each ratio, each reduced to the
/// asymptotic growth exponent.
pub fn scan_kappa(
    params: &ParamsConfig,
    ratios: &[f64],
    n_grid: &[usize],
    threshold: f64,
    n_workers: usize,
) -> Result<Vec<AlphaKappaPoint>> {
    let configs: Vec<ParamsConfig> = ratios
        .iter()
        .map(|&r| ParamsConfig {
            omega0: params.kappa / r,
            omega_ac: None,
            phi: None,
            ..params.clone()
        })
        .collect();
    // flatten so the pool sees every (ratio, N) task at once
    let tasks: Vec<(usize, ParamsConfig)> = configs
        .iter()
        .enumerate()
        .flat_map(|(i, c)| n_grid.iter().map(move |&n| (i, c.with_n(n))))
        .collect();
    let runs = parallel_map(n_workers, &tasks, |(_, c)| {
        c.resolve().and_then(|p| {
            info!("integrating N = {}, omega0 = {}", p.n_spins, p.omega0);
            dynamics::integrate(&p)
        })
    })?;
    let mut points: Vec<AlphaKappaPoint> = ratios
        .iter()
        .zip(&configs)
        .map(|(&r, c)| AlphaKappaPoint {
            kappa_over_omega0: r,
            omega0: c.omega0,
            kappa: c.kappa,
            scan: ScanResult {
                rows: Vec::new(),
                trajectories: Vec::new(),
            },
            asymptote: Err(Error::FitFailure("not fitted".into())),
        })
        .collect();
    for ((i, c), run) in tasks.iter().zip(runs) {
        let scan = &mut points[*i].scan;
        match run {
            Ok(traj) => {
                scan.rows.push(scan_row(&traj, threshold));
                scan.trajectories.push(traj);
            }
            Err(e) => scan.rows.push(ScanRow {
                n_spins: c.n_spins,
                fit: None,
                peak: None,
                entropy_rate: None,
                status: format!("integration failed: {e}"),
            }),
        }
    }
    for p in &mut points {
        p.asymptote = p.scan.alpha_asymptote();
    }
    Ok(points)
}

pub fn run_scan_kappa(config: &RunConfig) -> Result<RunOutput> {
    let points = scan_kappa(
        &config.params,
        &config.kappa_ratio_grid,
        &config.n_grid,
        config.threshold_fraction,
        config.n_workers,
    )?;
    write_kappa_scan(&config.output_dir, &points)
}

/// Writes `scaling_kappa.csv` (every fitted size) and `alpha_kappa.csv`.
pub fn write_kappa_scan(dir: &Path, points: &[AlphaKappaPoint]) -> Result<RunOutput> {
    let mut header = vec!["kappa_over_omega0"];
    header.extend(SCALING_HEADER);
    let rows: Vec<Vec<String>> = points
        .iter()
        .flat_map(|p| {
            p.scan.rows.iter().map(move |r| {
                let mut row = vec![fmt_f(p.kappa_over_omega0)];
                row.extend(scaling_row(r));
                row
            })
        })
        .collect();
    let scaling_path = dir.join("scaling_kappa.csv");
    write_csv(&scaling_path, &header, &rows)?;

    let rows: Vec<Vec<String>> = points
        .iter()
        .map(|p| {
            let (a, b, inf, rms, degenerate, status) = match &p.asymptote {
                Ok(ScalingFit::AlphaAsymptote { a, b, alpha_inf, rms_residual, degenerate }) => {
                    (*a, *b, *alpha_inf, *rms_residual, *degenerate, "ok".to_string())
                }
                Ok(other) => (f64::NAN, f64::NAN, f64::NAN, f64::NAN, false, format!("unexpected fit {other:?}")),
                Err(e) => (f64::NAN, f64::NAN, f64::NAN, f64::NAN, false, e.to_string()),
            };
            vec![
                fmt_f(p.kappa_over_omega0),
                fmt_f(p.omega0),
                fmt_f(p.kappa),
                fmt_f(inf),
                fmt_f(a),
                fmt_f(b),
                fmt_f(rms),
                degenerate.to_string(),
                status,
            ]
        })
        .collect();
    let path = dir.join("alpha_kappa.csv");
    write_csv(
        &path,
        &["kappa_over_omega0", "omega0", "kappa", "alpha_inf", "a", "b", "rms_residual", "degenerate", "status"],
        &rows,
    )?;
    Ok(RunOutput {
        files: vec![scaling_path, path],
    })
}

/// Exact `F/N` for each size next to the mean-field `F/N` on a shared grid.
#[derive(Debug, Clone, PartialEq)]
pub struct MfComparison {
    pub times: Vec<f64>,
    pub n_grid: Vec<usize>,
    /// `exact[k][i]` is `F/N` for `n_grid[k]` at `times[i]`.
    pub exact: Vec<Vec<f64>>,
    pub mean_field: Vec<f64>,
}

/// Builds the comparison from finished trajectories, which must share a time grid.
pub fn mf_comparison(trajectories: &[Trajectory], dg: f64) -> Result<MfComparison> {
    let first = trajectories
        .first()
        .ok_or_else(|| Error::InvalidParameter("no trajectories to compare".into()))?;
    let times = first.times();
    if let Some(t) = trajectories.iter().find(|t| t.times() != times) {
        return Err(Error::InvalidParameter(format!(
            "trajectory for N = {} is on a different time grid",
            t.params.n_spins
        )));
    }
    let mut mf_params = first.params.clone();
    mf_params.g = 0.0;
    let mean_field = meanfield::mf_qfi_series(&mf_params, dg)?
        .into_iter()
        .map(|(_, f)| f / mf_params.n_spins as f64)
        .collect();
    Ok(MfComparison {
        times,
        n_grid: trajectories.iter().map(|t| t.params.n_spins).collect(),
        exact: trajectories
            .iter()
            .map(|t| t.records.iter().map(|r| r.qfi / t.params.n_spins as f64).collect())
            .collect(),
        mean_field,
    })
}

pub fn run_compare_mf(config: &RunConfig) -> Result<RunOutput> {
    // shared window sized for the largest system
    let n_max = config.n_grid.iter().copied().max().unwrap_or(config.params.n_spins);
    let t_max = config.params.with_n(n_max).resolve()?.t_max;
    let base = ParamsConfig {
        t_max: Some(t_max),
        ..config.params.clone()
    };
    let resolved: Vec<SimParams> = config
        .n_grid
        .iter()
        .map(|&n| base.with_n(n).resolve())
        .collect::<Result<_>>()?;
    let trajectories = parallel_map(config.n_workers, &resolved, dynamics::integrate)?
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let cmp = mf_comparison(&trajectories, config.mf_dg)?;
    write_mf_comparison(&config.output_dir, &cmp)
}

pub fn write_mf_comparison(dir: &Path, cmp: &MfComparison) -> Result<RunOutput> {
    let mut header: Vec<String> = vec!["t".into()];
    header.extend(cmp.n_grid.iter().map(|n| format!("qfi_exact_over_n_N{n}")));
    header.push("qfi_mf_over_n".into());
    let rows: Vec<Vec<String>> = (0..cmp.times.len())
        .map(|i| {
            let mut row = vec![fmt_f(cmp.times[i])];
            row.extend(cmp.exact.iter().map(|col| fmt_f(col[i])));
            row.push(fmt_f(cmp.mean_field[i]));
            row
        })
        .collect();
    let path = dir.join("mf_compare.csv");
    write_atomic(&path, &csv_bytes(&header, &rows)?)?;
    Ok(RunOutput { files: vec![path] })
}

#[derive(Debug, Clone, Serialize)]
pub struct FitReport {
    pub input: PathBuf,
    pub threshold_fraction: f64,
    pub envelope_points: usize,
    pub fit: AnsatzFit,
    pub peak: PeakSummary,
}

/// Reads the `t` and `qfi` columns of a trajectory CSV.
pub fn read_qfi_series(path: &Path) -> Result<Vec<(f64, f64)>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Config(format!("{}: {other:?}", path.display())),
    })?;
    let headers = reader.headers()?.clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Config(format!("{} has no `{name}` column", path.display())))
    };
    let (it, iq) = (column("t")?, column("qfi")?);
    let mut series = Vec::new();
    for record in reader.records() {
        let record = record?;
        let parse = |i: usize| {
            record[i]
                .parse::<f64>()
                .map_err(|e| Error::Config(format!("{}: bad number `{}`: {e}", path.display(), &record[i])))
        };
        series.push((parse(it)?, parse(iq)?));
    }
    Ok(series)
}

pub fn run_fit(config: &RunConfig) -> Result<RunOutput> {
    let input = config
        .fit_input
        .clone()
        .unwrap_or_else(|| config.output_dir.join("trajectory.csv"));
    let series = read_qfi_series(&input)?;
    let envelope = analysis::envelope_of(&series, config.threshold_fraction)?;
    let fit = analysis::fit_ansatz(&envelope)?;
    let report = FitReport {
        input,
        threshold_fraction: config.threshold_fraction,
        envelope_points: envelope.len(),
        peak: analysis::peak_summary_of(&fit, &series),
        fit,
    };
    let path = config.output_dir.join("fit.json");
    write_json(&path, &report)?;
    Ok(RunOutput { files: vec![path] })
}
