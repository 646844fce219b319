//! Maximum QFI over a grid of frequency and phase detunings from resonance.
//! Usage: `resonance_heatmap [N] [points per axis]`.

use btc_sense::runner::{resonance_heatmap, ParamsConfig};

fn grid(half_width: f64, points: usize) -> Vec<f64> {
    (0..points)
        .map(|i| -half_width + 2.0 * half_width * i as f64 / (points - 1) as f64)
        .collect()
}

pub fn run_example_with(n_spins: usize, points: usize) -> btc_sense::Result<()> {
    let params = ParamsConfig { n_spins, window_factor: 1.0, ..Default::default() };
    let (dphi, domega) = (grid(0.2, points), grid(0.5, points));
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get());
    let map = resonance_heatmap(&params, &dphi, &domega, workers)?;
    print!("{:>8}", "dphi\\dw");
    for w in &domega {
        print!("{w:>9.3}");
    }
    println!();
    for (i, p) in dphi.iter().enumerate() {
        print!("{p:>8.3}");
        for r in &map.rows[i * domega.len()..(i + 1) * domega.len()] {
            print!("{:>9.3}", r.max_qfi / n_spins as f64);
        }
        println!();
    }
    if let Some(best) = map.argmax() {
        println!("max F/N at delta_phi = {}, delta_omega = {}", best.delta_phi, best.delta_omega);
    }
    Ok(())
}

pub fn run_example() -> btc_sense::Result<()> {
    run_example_with(6, 3)
}

fn main() -> btc_sense::Result<()> {
    let mut args = std::env::args().skip(1);
    let n = args.next().and_then(|a| a.parse().ok()).unwrap_or(16);
    let points = args.next().and_then(|a| a.parse().ok()).unwrap_or(5);
    run_example_with(n, points)
}
