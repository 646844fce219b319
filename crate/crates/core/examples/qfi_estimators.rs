//! The spectral QFI from the propagated derivative against the fidelity
//! estimate from two runs a small field step apart, and the resulting
//! Cramer-Rao bound.

use btc_sense::dynamics::{evolve, JointState};
use btc_sense::qfi::{cramer_rao, qfi_fidelity, qfi_spectral};
use btc_sense::spin::{build_spin_operators, polarized_up_state};
use btc_sense::{DensityMatrix, SimParams};

fn states(params: &SimParams) -> btc_sense::Result<Vec<(f64, JointState)>> {
    let ops = build_spin_operators(params.n_spins)?;
    let mut out = Vec::new();
    evolve(params, &ops, &polarized_up_state(params.n_spins)?, |t, s| {
        out.push((t, s.clone()));
        Ok(())
    })?;
    Ok(out)
}

pub fn run_example() -> btc_sense::Result<()> {
    let dg = 1e-4;
    let mut params = SimParams::resonant(8, 4.0)?;
    params.g = 0.05;
    params.t_max = 8.0;
    params.n_out = 5;
    params.rtol = 1e-11;
    params.atol = 1e-13;
    let base = states(&params)?;
    let mut shifted_params = params.clone();
    shifted_params.g += dg;
    let shifted = states(&shifted_params)?;
    for ((t, a), (_, b)) in base.iter().zip(&shifted).skip(1) {
        let rho = DensityMatrix::new(a.rho.clone())?;
        let spectral = qfi_spectral(&rho, a.drho_dg.as_ref())?.value;
        let fidelity = qfi_fidelity(&rho, &DensityMatrix::new(b.rho.clone())?, dg)?;
        let sigma = cramer_rao(spectral, 1000)?.value();
        println!(
            "t = {t:4.1}: spectral {spectral:10.6}  fidelity {fidelity:10.6}  rel. diff {:.2e}  delta g (1000 shots) >= {sigma:.3e}",
            (spectral - fidelity).abs() / spectral
        );
    }
    Ok(())
}

fn main() -> btc_sense::Result<()> {
    run_example()
}
