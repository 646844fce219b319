//! Without decay a product state along x under a static z-field gains
//! information at the coherent rate, `F = N t^2`.

use btc_sense::dynamics::integrate_from;
use btc_sense::qfi::bounds;
use btc_sense::spin::rotated_up_state;
use btc_sense::SimParams;

pub fn run_example() -> btc_sense::Result<()> {
    for n in [4, 16] {
        // sin(0 t + pi/2) = 1 gives a static field
        let params = SimParams {
            n_spins: n,
            omega0: 0.0,
            kappa: 0.0,
            g: 0.0,
            omega_ac: 0.0,
            phi: std::f64::consts::FRAC_PI_2,
            t_max: 10.0,
            n_out: 6,
            rtol: 1e-10,
            atol: 1e-12,
            ac_enabled: true,
        };
        let initial = rotated_up_state(n, std::f64::consts::FRAC_PI_2)?;
        let traj = integrate_from(&params, &initial)?;
        for r in traj.records.iter().skip(1) {
            let b = bounds(n, r.t);
            println!(
                "N = {n:>2} t = {:4.1}: F = {:12.6} coherent bound {:12.6} (rel. diff {:.1e}), Heisenberg {:10.1}",
                r.t,
                r.qfi,
                b.coherent,
                (r.qfi - b.coherent).abs() / b.coherent,
                b.heisenberg
            );
        }
    }
    Ok(())
}

fn main() -> btc_sense::Result<()> {
    run_example()
}
