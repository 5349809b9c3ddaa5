//! Learn the primary load from overheard feedback, then transmit with a margin.

use spectrum_access::estimator::{learning_then_regular, EndToEndConfig, EstimatorMode};
use spectrum_access::phy::pmd_for_target_pfa;
use spectrum_access::{PhyParams, Variant};

fn main() -> spectrum_access::Result<()> {
    let phy = PhyParams::default().with_primary_success(0.9)?;
    let sensing = pmd_for_target_pfa(&phy, 0.1, 1e-4)?;
    for lp in [1_000u64, 10_000, 100_000] {
        let truth = EndToEndConfig {
            seed: 5,
            feedback_error: 0.1,
            estimator_mode: EstimatorMode::Unbiased,
            ..EndToEndConfig::new(0.5, 0.0, phy, Variant::S1, sensing)
        };
        let r = learning_then_regular(lp, 20 * lp.max(10_000), &truth)?;
        println!(
            "N = {lp:>6}: lambda_p ~ {:.4} (+- {:.4}), margin {:.4}, lambda_s {:.4} of {:.4}, stable {}",
            r.estimation.lambda_p_est,
            r.estimation.error_bound,
            r.margin,
            r.analytic_lambda_s,
            r.oracle_lambda_s,
            r.rp_stability.stable
        );
    }
    Ok(())
}
