//! QFI dynamics of a resonantly driven boundary time crystal, with the ansatz
//! fitted to the envelope. Usage: `resonant_qfi [N] [omega0] [window factor]`.

use std::time::Instant;

use btc_sense::{analysis, dynamics, spin};
use btc_sense::{SimParams, Trajectory};

pub fn run_example_with(n_spins: usize, omega0: f64, window: f64) -> btc_sense::Result<()> {
    let mut params = SimParams::resonant(n_spins, omega0)?;
    params.t_max = window * n_spins as f64 / params.kappa;
    let start = Instant::now();
    let initial = spin::polarized_up_state(n_spins)?;
    let mut records = Vec::new();
    let stats = dynamics::record_into(&params, &initial, &mut records)?;
    let elapsed = start.elapsed().as_secs_f64();
    let traj = Trajectory { params: params.clone(), records };

    let env = analysis::extract_envelope(&traj, analysis::DEFAULT_THRESHOLD_FRACTION)?;
    let fit = analysis::fit_ansatz(&env)?;
    let peak = analysis::peak_summary(&fit, &traj);
    println!(
        "N = {n_spins}, omega0 = {omega0}, t_max = {:.1}: {elapsed:.2} s, {} steps ({} rejected)",
        params.t_max, stats.accepted, stats.rejected
    );
    println!(
        "fit: C = {:.4e}  alpha = {:.4}  gamma = {:.4e}  rms = {:.3}  ({} envelope points)",
        fit.c_amp, fit.alpha, fit.gamma, fit.rms_log_residual, fit.n_points
    );
    println!(
        "peak: t* = {:?} (sampled {:.3}), F*/N = {:?} (sampled {:.4})",
        peak.t_star,
        peak.t_star_empirical,
        peak.f_star.map(|f| f / n_spins as f64),
        peak.f_star_empirical / n_spins as f64
    );
    let stride = (traj.records.len() / 10).max(1);
    println!("{:>8} {:>12} {:>10} {:>10}", "t", "F/N", "<Sz>/N", "S");
    for r in traj.records.iter().step_by(stride) {
        println!("{:8.3} {:12.5e} {:10.5} {:10.5}", r.t, r.qfi / n_spins as f64, r.sz / n_spins as f64, r.entropy);
    }
    Ok(())
}

pub fn run_example() -> btc_sense::Result<()> {
    run_example_with(8, 4.0, 1.0)
}

fn main() -> btc_sense::Result<()> {
    let mut args = std::env::args().skip(1);
    let n = args.next().and_then(|a| a.parse().ok()).unwrap_or(16);
    let w = args.next().and_then(|a| a.parse().ok()).unwrap_or(4.0);
    let c = args.next().and_then(|a| a.parse().ok()).unwrap_or(1.0);
    run_example_with(n, w, c)
}
