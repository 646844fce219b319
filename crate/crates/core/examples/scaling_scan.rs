//! Ansatz parameters across system sizes, and the two scaling fits.
//! Usage: `scaling_scan [omega0] [N ...]`.

use btc_sense::runner::{scan_n, ParamsConfig};

pub fn run_example_with(omega0: f64, n_grid: &[usize]) -> btc_sense::Result<()> {
    let params = ParamsConfig { omega0, ..Default::default() };
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get());
    let scan = scan_n(&params, n_grid, 0.01, workers)?;
    println!("{:>5} {:>8} {:>10} {:>9} {:>10}  status", "N", "alpha", "gamma", "t*", "F*/N");
    for r in &scan.rows {
        let (alpha, gamma) = r.fit.map_or((f64::NAN, f64::NAN), |f| (f.alpha, f.gamma));
        let (t, f) = r.peak.map_or((f64::NAN, f64::NAN), |p| (p.t_star_empirical, p.f_star_empirical));
        println!("{:5} {alpha:8.4} {gamma:10.4e} {t:9.3} {:10.4}  {}", r.n_spins, f / r.n_spins as f64, r.status);
    }
    match scan.gamma_scaling() {
        Ok(fit) => println!("gamma scaling: {fit:?}"),
        Err(e) => println!("gamma scaling: {e}"),
    }
    match scan.alpha_asymptote() {
        Ok(fit) => println!("alpha asymptote: {fit:?}"),
        Err(e) => println!("alpha asymptote: {e}"),
    }
    Ok(())
}

pub fn run_example() -> btc_sense::Result<()> {
    run_example_with(4.0, &[4, 6, 8, 10])
}

fn main() -> btc_sense::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let omega0 = args.first().and_then(|a| a.parse().ok()).unwrap_or(4.0);
    let grid: Vec<usize> = args.iter().skip(1).filter_map(|a| a.parse().ok()).collect();
    let grid = if grid.is_empty() { vec![8, 16, 32, 64] } else { grid };
    run_example_with(omega0, &grid)
}
