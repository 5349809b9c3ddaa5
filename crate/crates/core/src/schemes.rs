//! Service rates of the four access schemes and the Loynes stability test.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{check_probability, Error, Result};
use crate::phy::SensingPoint;

/// Slack allowed when checking `lambda_p <= mu_p` on computed optima.
pub const FEASIBILITY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// Conventional sensing: transmit with probability one when sensed idle.
    Sc,
    /// Random access after an idle sensing outcome.
    S1,
    /// Random access after either sensing outcome (`a_s` idle, `b_s` busy).
    S2,
    /// Random access without sensing.
    S0,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Sc, Variant::S1, Variant::S2, Variant::S0];

    pub fn as_str(&self) -> &'static str {
        match self {
            Variant::Sc => "sc",
            Variant::S1 => "s1",
            Variant::S2 => "s2",
            Variant::S0 => "s0",
        }
    }

    pub fn senses(&self) -> bool {
        !matches!(self, Variant::S0)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sc" => Ok(Variant::Sc),
            "s1" => Ok(Variant::S1),
            "s2" => Ok(Variant::S2),
            "s0" => Ok(Variant::S0),
            other => Err(Error::InvalidParameter(format!("unknown scheme '{other}'"))),
        }
    }
}

/// A scheme together with its access probabilities and detector operating point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchemeConfig {
    pub variant: Variant,
    pub a_s: f64,
    pub b_s: f64,
    pub sensing: SensingPoint,
}

impl SchemeConfig {
    pub fn conventional(sensing: SensingPoint) -> Self {
        SchemeConfig {
            variant: Variant::Sc,
            a_s: 1.0,
            b_s: 0.0,
            sensing,
        }
    }

    pub fn s1(a_s: f64, sensing: SensingPoint) -> Self {
        SchemeConfig {
            variant: Variant::S1,
            a_s,
            b_s: 0.0,
            sensing,
        }
    }

    pub fn s2(a_s: f64, b_s: f64, sensing: SensingPoint) -> Self {
        SchemeConfig {
            variant: Variant::S2,
            a_s,
            b_s,
            sensing,
        }
    }

    pub fn s0(a_s: f64) -> Self {
        SchemeConfig {
            variant: Variant::S0,
            a_s,
            b_s: 0.0,
            sensing: SensingPoint::none(),
        }
    }

    /// The secondary never transmits.
    pub fn silent() -> Self {
        SchemeConfig::s0(0.0)
    }

    pub fn validate(&self) -> Result<()> {
        check_probability("a_s", self.a_s)?;
        check_probability("b_s", self.b_s)?;
        self.sensing.validate()?;
        match self.variant {
            Variant::Sc if self.a_s != 1.0 || self.b_s != 0.0 => Err(Error::InvalidParameter(
                "conventional sensing requires a_s = 1 and b_s = 0".into(),
            )),
            Variant::S1 if self.b_s != 0.0 => Err(Error::InvalidParameter("S1 requires b_s = 0".into())),
            Variant::S0 if self.sensing.tau != 0.0 => {
                Err(Error::InvalidParameter("S0 does not sense (tau must be 0)".into()))
            }
            _ => Ok(()),
        }
    }
}

/// Success probabilities of the two links at the configuration's sensing time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkSuccess {
    pub p_bar_p_pd: f64,
    pub p_bar_s_sd: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ServiceRates {
    pub mu_p: f64,
    pub mu_s: f64,
    pub p_empty: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatePair {
    pub lambda_p: f64,
    pub lambda_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stability {
    pub primary: bool,
    pub secondary: bool,
}

impl Stability {
    pub fn both(&self) -> bool {
        self.primary && self.secondary
    }
}

/// Primary service rate; independent of the primary arrival rate.
pub fn primary_service_rate(cfg: &SchemeConfig, p_bar_p_pd: f64) -> f64 {
    let p_md = cfg.sensing.p_md;
    match cfg.variant {
        Variant::Sc => p_bar_p_pd * (1.0 - p_md),
        Variant::S1 => p_bar_p_pd * (1.0 - cfg.a_s * p_md),
        // b_s = 0 is S1 exactly
        Variant::S2 if cfg.b_s == 0.0 => p_bar_p_pd * (1.0 - cfg.a_s * p_md),
        Variant::S2 => p_md * (1.0 - cfg.a_s) * p_bar_p_pd + (1.0 - p_md) * (1.0 - cfg.b_s) * p_bar_p_pd,
        Variant::S0 => (1.0 - cfg.a_s) * p_bar_p_pd,
    }
}

/// Secondary service rate while the primary queue is empty.
pub fn secondary_idle_service_rate(cfg: &SchemeConfig, p_bar_s_sd: f64) -> f64 {
    let p_fa = cfg.sensing.p_fa;
    match cfg.variant {
        Variant::Sc => p_bar_s_sd * (1.0 - p_fa),
        Variant::S1 => cfg.a_s * p_bar_s_sd * (1.0 - p_fa),
        Variant::S2 if cfg.b_s == 0.0 => cfg.a_s * p_bar_s_sd * (1.0 - p_fa),
        Variant::S2 => cfg.a_s * p_bar_s_sd * (1.0 - p_fa) + cfg.b_s * p_bar_s_sd * p_fa,
        Variant::S0 => cfg.a_s * p_bar_s_sd,
    }
}

/// Probability that the primary queue is empty, `1 - lambda_p / mu_p`.
fn empty_probability(lambda_p: f64, mu_p: f64) -> f64 {
    if lambda_p == 0.0 {
        return 1.0;
    }
    if lambda_p >= mu_p {
        return 0.0;
    }
    (1.0 - lambda_p / mu_p).clamp(0.0, 1.0)
}

/// Service rates of both queues under `cfg` (the secondary backlogged).
///
/// Fails with [`Error::PrimaryUnstable`] when `lambda_p > mu_p` (beyond
/// [`FEASIBILITY_TOL`]). On the boundary the value `mu_s = 0` is returned.
pub fn service_rates(cfg: &SchemeConfig, links: &LinkSuccess, lambda_p: f64) -> Result<ServiceRates> {
    check_probability("lambda_p", lambda_p)?;
    let mu_p = primary_service_rate(cfg, links.p_bar_p_pd);
    if lambda_p > mu_p + FEASIBILITY_TOL {
        return Err(Error::PrimaryUnstable { lambda_p, mu_p });
    }
    let p_empty = empty_probability(lambda_p, mu_p);
    let mu_s = secondary_idle_service_rate(cfg, links.p_bar_s_sd) * p_empty;
    Ok(ServiceRates { mu_p, mu_s, p_empty })
}

/// Secondary stability-region boundary of random access without sensing.
pub fn s0_boundary(lambda_p: f64, p_bar_p_pd: f64, p_bar_s_sd: f64) -> f64 {
    if lambda_p > p_bar_p_pd || lambda_p < 0.0 {
        return 0.0;
    }
    let gap = 1.0 - (lambda_p / p_bar_p_pd).sqrt();
    p_bar_s_sd * gap * gap
}

/// Loynes: a queue is stable iff its arrival rate is strictly below its service rate.
pub fn is_stable(rates: &ServiceRates, arrivals: &RatePair) -> Stability {
    Stability {
        primary: arrivals.lambda_p < rates.mu_p,
        secondary: arrivals.lambda_s < rates.mu_s,
    }
}

/// Whether S2 with busy-access probability `b_s` can keep the primary stable.
pub fn s2_feasible(lambda_p: f64, p_md: f64, b_s: f64, p_bar_p_pd: f64) -> bool {
    if lambda_p <= 0.0 {
        return true;
    }
    let capacity = if b_s == 0.0 {
        1.0
    } else {
        p_md + (1.0 - p_md) * (1.0 - b_s)
    };
    capacity + FEASIBILITY_TOL >= lambda_p / p_bar_p_pd
}
