//! Longer sensing buys detector accuracy at the cost of secondary rate.

use spectrum_access::phy::{pmd_for_target_pfa, secondary_success_prob, tx_rate};
use spectrum_access::PhyParams;

fn main() -> spectrum_access::Result<()> {
    let phy = PhyParams::default();
    println!(
        "{:>10} {:>10} {:>12} {:>12}",
        "tau (s)", "P_MD", "rate (b/s)", "P_succ s"
    );
    for tau in [1e-6, 5e-6, 1e-5, 5e-5, 1e-4, 2e-4, 4e-4, 8e-4] {
        let point = pmd_for_target_pfa(&phy, 0.1, tau)?;
        println!(
            "{tau:>10.1e} {:>10.4} {:>12.0} {:>12.4}",
            point.p_md,
            tx_rate(&phy, tau)?,
            secondary_success_prob(&phy, tau)?
        );
    }
    Ok(())
}
