//! Gaussian tail function and its inverse.

use spectrum_access::mathcore::{q_func, q_inv};

fn main() -> spectrum_access::Result<()> {
    println!("{:>6} {:>24} {:>12}", "z", "Q(z)", "roundtrip");
    for z in [-3.0, -1.0, 0.0, 0.5, 1.0, 2.0, 3.0, 5.0] {
        let q = q_func(z)?;
        println!("{z:>6} {q:>24.17e} {:>12.3e}", (q_inv(q)? - z).abs());
    }
    // tail probabilities of a few detector targets
    for p in [0.1, 0.01, 1e-6] {
        println!("Q^-1({p}) = {:.12}", q_inv(p)?);
    }
    Ok(())
}
