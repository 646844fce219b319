//! The growth/decay ansatz and the scaling laws fitted to synthetic data.

use btc_sense::analysis::{envelope_of, fit_alpha_asymptote, fit_ansatz, fit_gamma_scaling, fitted_peak};

pub fn run_example() -> btc_sense::Result<()> {
    // an oscillating curve under C t^alpha e^{-gamma t}
    let (c, alpha, gamma) = (2.0, 1.5, 0.1);
    let series: Vec<(f64, f64)> = (0..4000)
        .map(|i| {
            let t = i as f64 * 0.01;
            let envelope = c * t.powf(alpha) * (-gamma * t).exp();
            (t, envelope * (0.75 + 0.25 * (6.0 * t).cos()))
        })
        .collect();
    let env = envelope_of(&series, 0.01)?;
    let fit = fit_ansatz(&env)?;
    let (t_star, f_star) = fitted_peak(&fit);
    println!(
        "ansatz from {} maxima: C = {:.4} alpha = {:.4} gamma = {:.4}, t* = {:.3?}, F* = {:.3?}",
        fit.n_points, fit.c_amp, fit.alpha, fit.gamma, t_star, f_star
    );

    let gammas: Vec<(f64, f64)> = [16.0, 32.0, 64.0, 128.0].iter().map(|&n| (n, 5.0 / n)).collect();
    println!("gamma = 5/N: {:?}", fit_gamma_scaling(&gammas)?);
    let alphas: Vec<(f64, f64)> = [8.0, 16.0, 32.0, 64.0, 128.0, 256.0]
        .iter()
        .map(|&n: &f64| (n, 0.5 * (-0.05 * n).exp() + 1.2))
        .collect();
    println!("alpha = 0.5 e^(-0.05 N) + 1.2: {:?}", fit_alpha_asymptote(&alphas)?);
    Ok(())
}

fn main() -> btc_sense::Result<()> {
    run_example()
}
