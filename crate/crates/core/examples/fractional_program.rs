//! Closed-form maximizer of `(a x + f)/(c x - d) + K x` on a clipped interval.

use spectrum_access::mathcore::{solve_fractional, FractionalProgram};

fn main() -> spectrum_access::Result<()> {
    let prog = FractionalProgram {
        a: 0.8,
        f: 0.1,
        c: 0.3,
        d: 0.9,
        k: 1.5,
        w: 0.2,
    };
    let sol = solve_fractional(&prog)?;
    println!("x* = {:.6}, objective = {:.6}", sol.x_star, sol.objective);
    println!("feasible interval [0, {:.6}]", prog.upper_bound());

    // brute-force check
    let hi = prog.upper_bound();
    let best = (0..=10_000)
        .map(|i| hi * i as f64 / 10_000.0)
        .map(|x| (x, prog.objective(x)))
        .fold((0.0, f64::NEG_INFINITY), |acc, v| if v.1 > acc.1 { v } else { acc });
    println!("grid  x = {:.6}, objective = {:.6}", best.0, best.1);
    Ok(())
}
