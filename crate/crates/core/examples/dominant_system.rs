//! The dominant system, where the secondary sends dummy packets when empty,
//! never has shorter queues than the original.

use spectrum_access::phy::SensingPoint;
use spectrum_access::schemes::SchemeConfig;
use spectrum_access::sim::{compare_dominant, SimConfig};
use spectrum_access::PhyParams;

fn main() -> spectrum_access::Result<()> {
    let phy = PhyParams::default();
    let scheme = SchemeConfig::s2(0.6, 0.5, SensingPoint::new(1e-4, 0.1, 0.2)?);
    for (lambda_p, lambda_s) in [(0.2, 0.1), (0.4, 0.2), (0.3, 1.0)] {
        let cfg = SimConfig {
            record_traces: true,
            ..SimConfig::new(100_000, 7, lambda_p, lambda_s, scheme, phy)
        };
        let report = compare_dominant(&cfg)?;
        println!(
            "lambda = ({lambda_p}, {lambda_s}): dominates = {}, identical at saturation = {}",
            report.dominant_ge_original, report.saturation_indistinguishable
        );
    }
    Ok(())
}
