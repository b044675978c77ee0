//! Runs any experiment by name from a config file and writes its CSVs.
//!
//! `cargo run --release --example experiment_report -- hitting configs/k2_symmetric.toml /tmp/out`
use mobnet::experiments::{run_named, Config};
use std::path::Path;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().collect();
    let name = args.get(1).map_or("mixing", String::as_str);
    let config = match args.get(2) {
        Some(p) => Config::load(Path::new(p))?,
        None => Config::from_toml("[mobility]\nq = [[-1.0, 1.0], [1.0, -1.0]]\n[rng]\nseed = 1\n")?,
    };
    let report = run_named(name, &config)?;
    report.write_verdicts(std::io::stdout())?;
    if let Some(dir) = args.get(3) {
        for f in report.write_dir(Path::new(dir))? {
            println!("wrote {f}");
        }
    }
    Ok(())
}
