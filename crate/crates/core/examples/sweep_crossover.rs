//! Sweep sensing time and load to find where blind access wins.

use spectrum_access::cli::{find_crossovers, run_sweep, GridSpec, RunConfig};
use spectrum_access::{SensingMode, Variant};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut cfg = RunConfig::default();
    cfg.phy.primary_success = Some(0.6609);
    cfg.sensing = SensingMode::FixedPfa { value: 0.2 };
    cfg.sweep.targets = vec![0.1, 0.2];
    cfg.sweep.schemes = vec![Variant::S2, Variant::S0];
    cfg.grids.lambda_p = GridSpec::Range {
        start: 0.0,
        stop: 0.6,
        points: 13,
        log: false,
    };
    cfg.grids.tau = Some(GridSpec::Range {
        start: 1e-6,
        stop: 5e-4,
        points: 12,
        log: true,
    });

    let rows = run_sweep(&cfg)?;
    println!("{} cells", rows.len());
    for c in find_crossovers(&rows) {
        println!(
            "P_FA target {}: sensing tau in [{:.1e}, {:.1e}]",
            c.target, c.tau_min, c.tau_max
        );
        println!(
            "  shortest beats longest sensing at lambda_p {:?}",
            c.short_sensing_wins
        );
        println!(
            "  blind access beats longest sensing at lambda_p {:?}",
            c.no_sensing_beats_long
        );
        println!(
            "  blind access beats every sensing time at lambda_p {:?}",
            c.no_sensing_beats_all
        );
    }
    Ok(())
}
