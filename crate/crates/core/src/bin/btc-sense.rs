use std::path::PathBuf;
use std::process::ExitCode;

use btc_sense::runner::{self, Mode, Overrides, RunConfig};
use clap::Parser;

/// Boundary-time-crystal AC sensing simulator.
#[derive(Parser, Debug)]
#[command(name = "btc-sense", version)]
struct Cli {
    /// simulate | sweep-resonance | scan-n | scan-kappa | compare-mf | fit
    mode: Option<Mode>,
    /// JSON run configuration; defaults are used for absent fields
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long = "mode", value_name = "MODE")]
    mode_flag: Option<Mode>,
    #[arg(long)]
    n_spins: Option<usize>,
    #[arg(long)]
    omega0: Option<f64>,
    #[arg(long)]
    kappa: Option<f64>,
    #[arg(long)]
    t_max: Option<f64>,
    #[arg(long)]
    rtol: Option<f64>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    #[arg(long)]
    n_workers: Option<usize>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    // clap exits with 2 on bad arguments; that code means integration failure here
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let mut config = match &cli.config {
        Some(path) => match RunConfig::load(path) {
            Ok(c) => c,
            Err(e) => return fail(&e),
        },
        None => RunConfig::default(),
    };
    config.apply(&Overrides {
        mode: cli.mode_flag.or(cli.mode),
        n_spins: cli.n_spins,
        omega0: cli.omega0,
        kappa: cli.kappa,
        t_max: cli.t_max,
        rtol: cli.rtol,
        output_dir: cli.output_dir,
        n_workers: cli.n_workers,
    });
    match runner::run(&config) {
        Ok(out) => {
            for f in out.files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => fail(&e),
    }
}

fn fail(e: &btc_sense::Error) -> ExitCode {
    eprintln!("btc-sense: {e}");
    ExitCode::from(runner::exit_code(e) as u8)
}
