//! Numerical primitives: the Gaussian tail function, its inverse, and the
//! closed-form maximizer of a concave linear-fractional-plus-linear program.
//!
//! The complementary error function is a port of the FreeBSD `s_erf.c`
//! rational approximations (via Go's `math.Erfc`), accurate to about one ulp.
//!
//! ```text
//! ====================================================
//! Copyright (C) 1993 by Sun Microsystems, Inc. All rights reserved.
//!
//! Developed at SunPro, a Sun Microsystems, Inc. business.
//! Permission to use, copy, modify, and distribute this
//! software is freely granted, provided that this notice
//! is preserved.
//! ====================================================
//! ```

// erfc coefficients are kept digit-for-digit from the reference implementation
#![allow(clippy::excessive_precision)]

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const ERX: f64 = 8.45062911510467529297e-01;

// erf in [0, 0.84375]
const PP0: f64 = 1.28379167095512558561e-01;
const PP1: f64 = -3.25042107247001499370e-01;
const PP2: f64 = -2.84817495755985104766e-02;
const PP3: f64 = -5.77027029648944159157e-03;
const PP4: f64 = -2.37630166566501626084e-05;
const QQ1: f64 = 3.97917223959155352819e-01;
const QQ2: f64 = 6.50222499887672944485e-02;
const QQ3: f64 = 5.08130628187576562776e-03;
const QQ4: f64 = 1.32494738004321644526e-04;
const QQ5: f64 = -3.96022827877536812320e-06;

// erf in [0.84375, 1.25]
const PA0: f64 = -2.36211856075265944077e-03;
const PA1: f64 = 4.14856118683748331666e-01;
const PA2: f64 = -3.72207876035701323847e-01;
const PA3: f64 = 3.18346619901161753674e-01;
const PA4: f64 = -1.10894694282396677476e-01;
const PA5: f64 = 3.54783043256182359371e-02;
const PA6: f64 = -2.16637559486879084300e-03;
const QA1: f64 = 1.06420880400844228286e-01;
const QA2: f64 = 5.40397917702171048937e-01;
const QA3: f64 = 7.18286544141962662868e-02;
const QA4: f64 = 1.26171219808761642112e-01;
const QA5: f64 = 1.36370839120290507362e-02;
const QA6: f64 = 1.19844998467991074170e-02;

// erfc in [1.25, 1/0.35]
const RA0: f64 = -9.86494403484714822705e-03;
const RA1: f64 = -6.93858572707181764372e-01;
const RA2: f64 = -1.05586262253232909814e+01;
const RA3: f64 = -6.23753324503260060396e+01;
const RA4: f64 = -1.62396669462573470355e+02;
const RA5: f64 = -1.84605092906711035994e+02;
const RA6: f64 = -8.12874355063065934246e+01;
const RA7: f64 = -9.81432934416914548592e+00;
const SA1: f64 = 1.96512716674392571292e+01;
const SA2: f64 = 1.37657754143519042600e+02;
const SA3: f64 = 4.34565877475229228821e+02;
const SA4: f64 = 6.45387271733267880336e+02;
const SA5: f64 = 4.29008140027567833386e+02;
const SA6: f64 = 1.08635005541779435134e+02;
const SA7: f64 = 6.57024977031928170135e+00;
const SA8: f64 = -6.04244152148580987438e-02;

// erfc in [1/0.35, 28]
const RB0: f64 = -9.86494292470009928597e-03;
const RB1: f64 = -7.99283237680523006574e-01;
const RB2: f64 = -1.77579549177547519889e+01;
const RB3: f64 = -1.60636384855821916062e+02;
const RB4: f64 = -6.37566443368389627722e+02;
const RB5: f64 = -1.02509513161107724954e+03;
const RB6: f64 = -4.83519191608651397019e+02;
const SB1: f64 = 3.03380607434824582924e+01;
const SB2: f64 = 3.25792512996573918826e+02;
const SB3: f64 = 1.53672958608443695994e+03;
const SB4: f64 = 3.19985821950859553908e+03;
const SB5: f64 = 2.55305040643316442583e+03;
const SB6: f64 = 4.74528541206955367215e+02;
const SB7: f64 = -2.24409524465858183362e+01;

// 2**-56
const TINY: f64 = 1.387_778_780_781_445_7e-17;

/// Complementary error function.
pub fn erfc(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x == f64::INFINITY {
        return 0.0;
    }
    if x == f64::NEG_INFINITY {
        return 2.0;
    }
    let negative = x < 0.0;
    let x = x.abs();

    if x < 0.84375 {
        let temp = if x < TINY {
            x
        } else {
            let z = x * x;
            let r = PP0 + z * (PP1 + z * (PP2 + z * (PP3 + z * PP4)));
            let s = 1.0 + z * (QQ1 + z * (QQ2 + z * (QQ3 + z * (QQ4 + z * QQ5))));
            let y = r / s;
            if x < 0.25 {
                x + x * y
            } else {
                0.5 + (x * y + (x - 0.5))
            }
        };
        return if negative { 1.0 + temp } else { 1.0 - temp };
    }
    if x < 1.25 {
        let s = x - 1.0;
        let p = PA0 + s * (PA1 + s * (PA2 + s * (PA3 + s * (PA4 + s * (PA5 + s * PA6)))));
        let q = 1.0 + s * (QA1 + s * (QA2 + s * (QA3 + s * (QA4 + s * (QA5 + s * QA6)))));
        return if negative { 1.0 + ERX + p / q } else { 1.0 - ERX - p / q };
    }
    if x < 28.0 {
        let s = 1.0 / (x * x);
        let (r, q) = if x < 1.0 / 0.35 {
            (
                RA0 + s * (RA1 + s * (RA2 + s * (RA3 + s * (RA4 + s * (RA5 + s * (RA6 + s * RA7)))))),
                1.0 + s * (SA1 + s * (SA2 + s * (SA3 + s * (SA4 + s * (SA5 + s * (SA6 + s * (SA7 + s * SA8))))))),
            )
        } else {
            if negative && x > 6.0 {
                return 2.0;
            }
            (
                RB0 + s * (RB1 + s * (RB2 + s * (RB3 + s * (RB4 + s * (RB5 + s * RB6))))),
                1.0 + s * (SB1 + s * (SB2 + s * (SB3 + s * (SB4 + s * (SB5 + s * (SB6 + s * SB7)))))),
            )
        };
        // z keeps the top 32 bits of x so that -z*z is exact.
        let z = f64::from_bits(x.to_bits() & 0xffff_ffff_0000_0000);
        let tail = (-z * z - 0.5625).exp() * ((z - x) * (z + x) + r / q).exp();
        return if negative { 2.0 - tail / x } else { tail / x };
    }
    if negative {
        2.0
    } else {
        0.0
    }
}

/// Standard Gaussian tail probability `Pr{N(0,1) > z}`.
pub fn q_func(z: f64) -> Result<f64> {
    if !z.is_finite() {
        return Err(Error::Domain {
            what: "q_func argument",
            value: z,
        });
    }
    Ok(0.5 * erfc(z / std::f64::consts::SQRT_2))
}

const Q_INV_BRACKET: f64 = 10.0;
const Q_INV_TOL: f64 = 1e-15;

/// Inverse of [`q_func`] by bisection on `[0, 10]`, using `Q(-z) = 1 - Q(z)`
/// for `p > 0.5`.
pub fn q_inv(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain {
            what: "q_inv probability",
            value: p,
        });
    }
    // Q(-z) = 1 - Q(z); bisect in the tail where Q is resolved to full relative precision.
    if p > 0.5 {
        return Ok(-bisect_tail(1.0 - p));
    }
    Ok(bisect_tail(p))
}

fn bisect_tail(p: f64) -> f64 {
    let q = |z: f64| 0.5 * erfc(z / std::f64::consts::SQRT_2);
    let (mut lo, mut hi) = (0.0, Q_INV_BRACKET);
    while hi - lo > Q_INV_TOL {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if q(mid) > p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if (q(lo) - p).abs() <= (q(hi) - p).abs() {
        lo
    } else {
        hi
    }
}

/// `max_x (a x + f)/(c x - d) + K x` subject to `0 <= x <= (d - w)/c`, `x <= 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FractionalProgram {
    pub a: f64,
    pub f: f64,
    pub c: f64,
    pub d: f64,
    pub k: f64,
    pub w: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FractionalSolution {
    pub x_star: f64,
    pub objective: f64,
}

impl FractionalProgram {
    pub fn objective(&self, x: f64) -> f64 {
        (self.a * x + self.f) / (self.c * x - self.d) + self.k * x
    }

    /// Upper end of the feasible interval, `min(1, (d - w)/c)`.
    pub fn upper_bound(&self) -> f64 {
        ((self.d - self.w) / self.c).min(1.0)
    }

    pub fn second_derivative(&self, x: f64) -> f64 {
        let gap = self.c * x - self.d;
        2.0 * self.c * (self.a * self.d + self.c * self.f) / (gap * gap * gap)
    }

    fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("a", self.a),
            ("f", self.f),
            ("c", self.c),
            ("d", self.d),
            ("K", self.k),
            ("w", self.w),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "fractional program constant {name} must be finite and positive, got {v}"
                )));
            }
        }
        if self.d < self.w {
            return Err(Error::Infeasible(format!("d = {} < w = {}", self.d, self.w)));
        }
        if self.c > self.d {
            return Err(Error::Precondition(format!(
                "concavity requires c <= d (c = {}, d = {})",
                self.c, self.d
            )));
        }
        Ok(())
    }
}

/// Closed-form maximizer: the smaller stationary root projected onto the
/// feasible interval.
pub fn solve_fractional(prog: &FractionalProgram) -> Result<FractionalSolution> {
    prog.validate()?;
    let x_star = clipped_root(prog.a, prog.f, prog.c, prog.d, prog.k, prog.w);
    Ok(FractionalSolution {
        x_star,
        objective: prog.objective(x_star),
    })
}

/// Same closed form without the strict-positivity checks; `f = 0` is allowed.
/// Callers guarantee `c > 0`, `K > 0`, `a d + c f > 0` and `d >= w`.
pub(crate) fn clipped_root(a: f64, f: f64, c: f64, d: f64, k: f64, w: f64) -> f64 {
    let root = (d - ((a * d + c * f) / k).sqrt()) / c;
    root.min((d - w) / c).min(1.0).max(0.0)
}
