//! Jointly optimize sensing time and access probabilities at one load.

use spectrum_access::optimizer::{optimize_with_margin, primary_delay, OptimizationRequest};
use spectrum_access::{optimize, PhyParams, SensingMode, Variant};

fn main() -> spectrum_access::Result<()> {
    let phy = PhyParams::default().with_primary_success(0.9)?;
    let sensing = SensingMode::FixedPfa { value: 0.1 };
    let lambda_p = 0.7;

    for variant in [Variant::Sc, Variant::S1, Variant::S2, Variant::S0] {
        let r = optimize(&OptimizationRequest::new(variant, lambda_p, sensing, &phy), &phy)?;
        match r.best {
            Some(best) => println!(
                "{variant}: lambda_s = {:.4} at tau = {:.2e}, a_s = {:.4}, b_s = {:.3}",
                r.lambda_s_max, best.sensing.tau, best.a_s, best.b_s
            ),
            None => println!("{variant}: infeasible"),
        }
    }

    // a margin caps primary delay and only costs throughput once it binds a_s
    let mut req = OptimizationRequest::new(Variant::S2, lambda_p, sensing, &phy);
    for margin in [0.0, 0.02, 0.05, 0.1] {
        req.margin = margin;
        let r = optimize_with_margin(&req, &phy)?;
        let delay = primary_delay(lambda_p, lambda_p + margin).ok();
        let (tau, a_s) = r.best.map_or((0.0, 0.0), |b| (b.sensing.tau, b.a_s));
        println!(
            "margin {margin:.2}: lambda_s = {:.4} at tau {tau:.2e}, a_s {a_s:.4}, delay bound {delay:.1?}",
            r.lambda_s_max
        );
    }
    Ok(())
}
