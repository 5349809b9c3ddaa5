//! Slotted simulation of the two interacting queues against the analytic rates.

use spectrum_access::phy::{primary_success_prob, secondary_success_prob, SensingPoint};
use spectrum_access::schemes::{service_rates, LinkSuccess, SchemeConfig};
use spectrum_access::sim::{self, measure_stability, SimConfig, SimMode};
use spectrum_access::PhyParams;

fn main() -> spectrum_access::Result<()> {
    let tau = 1e-6;
    let phy = PhyParams::default()
        .with_primary_success(0.9)?
        .with_secondary_success(0.8, tau)?;
    let scheme = SchemeConfig::s2(0.7, 0.3, SensingPoint::new(tau, 0.2, 0.3)?);
    let links = LinkSuccess {
        p_bar_p_pd: primary_success_prob(&phy),
        p_bar_s_sd: secondary_success_prob(&phy, tau)?,
    };
    let lambda_p = 0.3;
    let rates = service_rates(&scheme, &links, lambda_p)?;

    let cfg = SimConfig {
        mode: SimMode::Dominant,
        ..SimConfig::new(1_000_000, 42, lambda_p, 0.1, scheme, phy)
    };
    let r = sim::run(&cfg)?;
    let mu_p = r.empirical_mu_p.unwrap();
    let mu_s = r.empirical_mu_s.unwrap();
    println!(
        "mu_p    analytic {:.4}  simulated {:.4} +- {:.4}",
        rates.mu_p, mu_p.value, mu_p.std_error
    );
    println!(
        "mu_s    analytic {:.4}  simulated {:.4} +- {:.4}",
        rates.mu_s, mu_s.value, mu_s.std_error
    );
    println!(
        "P(Qp=0) analytic {:.4}  simulated {:.4}",
        rates.p_empty, r.empirical_p_empty.value
    );
    println!("mean primary delay {:?} slots", r.mean_primary_delay);

    for lambda_s in [0.1, rates.mu_s * 1.1] {
        let report = measure_stability(&SimConfig { lambda_s, ..cfg }, 200_000)?;
        println!(
            "lambda_s {lambda_s:.4}: stable = {}, drift = {:.2e}",
            report.stable, report.secondary_drift
        );
    }
    Ok(())
}
