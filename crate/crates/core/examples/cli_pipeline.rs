//! Drive the command-line pipeline from code with a shipped config.

use std::path::Path;

use spectrum_access::cli::{execute, Command, CommonArgs, RunConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/fixed_operating_point.toml");
    let mut cfg = RunConfig::load(&path)?;
    cfg.output_dir = std::env::temp_dir().join("spectrum-access-example");
    cfg.simulate.slots = 100_000;
    for command in [
        Command::Region(CommonArgs::default()),
        Command::Optimize(CommonArgs::default()),
        Command::Simulate(CommonArgs::default()),
    ] {
        for file in execute(&command, &cfg)? {
            println!("wrote {}", file.display());
        }
    }
    Ok(())
}
