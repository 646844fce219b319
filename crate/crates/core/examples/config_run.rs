//! Driving a run from a JSON configuration, as the command-line tool does.
//! Usage: `config_run [config.json]`; a small built-in config otherwise.

use btc_sense::runner::{self, RunConfig};

const DEFAULT_CONFIG: &str = r#"{
    "mode": "simulate",
    "params": { "n_spins": 6, "omega0": 4.0, "kappa": 1.0, "n_out": 200 }
}"#;

pub fn run_example_with(text: &str, output_dir: &std::path::Path) -> btc_sense::Result<()> {
    let mut config = RunConfig::from_json(text)?;
    config.output_dir = output_dir.to_path_buf();
    let out = runner::run(&config)?;
    for f in &out.files {
        let size = std::fs::metadata(f).map(|m| m.len()).unwrap_or(0);
        println!("{} ({size} bytes)", f.display());
    }
    Ok(())
}

pub fn run_example() -> btc_sense::Result<()> {
    let dir = std::env::temp_dir().join(format!("btc-sense-example-{}", std::process::id()));
    let result = run_example_with(DEFAULT_CONFIG, &dir);
    let _ = std::fs::remove_dir_all(&dir);
    result
}

fn main() -> btc_sense::Result<()> {
    match std::env::args().nth(1) {
        Some(path) => {
            let text = std::fs::read_to_string(&path).map_err(|e| btc_sense::Error::Config(format!("{path}: {e}")))?;
            run_example_with(&text, std::path::Path::new("out"))
        }
        None => run_example(),
    }
}
