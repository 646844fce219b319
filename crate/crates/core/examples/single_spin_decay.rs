//! One spin decaying from the up state: `<S^z>(t) = e^{-2 kappa t} - 1/2`.

use btc_sense::{integrate, SimParams};

pub fn run_example() -> btc_sense::Result<()> {
    let params = SimParams {
        n_spins: 1,
        omega0: 0.0,
        kappa: 1.0,
        g: 0.0,
        omega_ac: 0.0,
        phi: 0.0,
        t_max: 5.0,
        n_out: 11,
        rtol: 1e-10,
        atol: 1e-12,
        ac_enabled: false,
    };
    let traj = integrate(&params)?;
    let mut worst = 0.0f64;
    println!("{:>5} {:>14} {:>14}", "t", "<Sz>", "analytic");
    for r in &traj.records {
        let exact = (-2.0 * r.t).exp() - 0.5;
        worst = worst.max((r.sz - exact).abs());
        println!("{:5.2} {:14.10} {:14.10}", r.t, r.sz, exact);
    }
    println!("max deviation {worst:.2e}");
    Ok(())
}

fn main() -> btc_sense::Result<()> {
    run_example()
}
