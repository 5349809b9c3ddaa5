//! Secondary stable-throughput curves for every scheme and their union.

use spectrum_access::optimizer::{linspace, trace_region, OptimizationRequest, RegionScheme};
use spectrum_access::{PhyParams, SensingMode, Variant};

fn main() -> spectrum_access::Result<()> {
    let phy = PhyParams::default().with_primary_success(0.9)?;
    let sensing = SensingMode::FixedPfa { value: 0.1 };
    let template = OptimizationRequest::new(Variant::S2, 0.0, sensing, &phy);
    let lambdas = linspace(0.0, 0.85, 18);

    let schemes = [
        RegionScheme::Sc,
        RegionScheme::S1,
        RegionScheme::S2,
        RegionScheme::S0,
        RegionScheme::Union,
    ];
    let mut curves = Vec::new();
    for scheme in schemes {
        curves.push(trace_region(scheme, &lambdas, &template, &phy)?);
    }
    print!("{:>8}", "lambda_p");
    for s in schemes {
        print!("{:>9}", s.as_str());
    }
    println!();
    for (i, l) in lambdas.iter().enumerate() {
        print!("{l:>8.3}");
        for c in &curves {
            print!("{:>9.4}", c.curve.points[i].lambda_s);
        }
        println!();
    }

    let union = curves.last().unwrap();
    for e in &union.policy.entries {
        if let Some(v) = e.chosen {
            println!("lambda_p {:.3}: run {v}", e.lambda_p);
        }
    }
    Ok(())
}
