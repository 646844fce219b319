//! Mean-field QFI per spin against exact dynamics. Usage: `mean_field [N]`.

use btc_sense::runner::mf_comparison;
use btc_sense::{integrate, meanfield, SimParams};

pub fn run_example_with(n_spins: usize) -> btc_sense::Result<()> {
    let params = SimParams::resonant(n_spins, 4.0)?;
    let traj = integrate(&params)?;
    let cmp = mf_comparison(&[traj], meanfield::DEFAULT_DG)?;
    println!("{:>8} {:>14} {:>14}", "t", "exact F/N", "mean-field F/N");
    let stride = (cmp.times.len() / 12).max(1);
    for i in (0..cmp.times.len()).step_by(stride) {
        println!("{:8.3} {:14.6} {:14.6}", cmp.times[i], cmp.exact[0][i], cmp.mean_field[i]);
    }
    Ok(())
}

pub fn run_example() -> btc_sense::Result<()> {
    run_example_with(8)
}

fn main() -> btc_sense::Result<()> {
    let n = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(32);
    run_example_with(n)
}
