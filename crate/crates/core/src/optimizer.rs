//! Throughput-maximizing access policies subject to primary stability.
//!
//! For a fixed sensing time the optimal access probabilities have closed
//! forms (S1, S0) or reduce to the concave fractional program solved in
//! [`crate::mathcore`] (S2, for each busy-access probability `b_s`). The
//! sensing time and `b_s` are searched over explicit grids, so every result
//! is deterministic. Ties go to the smaller sensing time, then the smaller
//! `b_s`.
//!
//! A protection margin `mu_pe` tightens the primary constraint to
//! `mu_p >= lambda_p + mu_pe`; the emptiness factor in the secondary rate
//! keeps the true `lambda_p`.

use serde::{Deserialize, Serialize};

use crate::error::{check_probability, Error, Result};
use crate::mathcore::clipped_root;
use crate::phy::{primary_success_prob, secondary_success_prob, PhyParams, SensingMode, SensingPoint};
use crate::schemes::{service_rates, LinkSuccess, SchemeConfig, Variant, FEASIBILITY_TOL};

/// Sensing times are kept inside `[delta T, (1 - delta) T]`.
pub const TAU_EDGE_FRACTION: f64 = 1e-3;
pub const DEFAULT_TAU_POINTS: usize = 64;
pub const DEFAULT_B_S_POINTS: usize = 33;

pub fn linspace(start: f64, stop: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![start],
        n => (0..n)
            .map(|i| {
                if i == n - 1 {
                    stop
                } else {
                    start + (stop - start) * i as f64 / (n - 1) as f64
                }
            })
            .collect(),
    }
}

pub fn logspace(start: f64, stop: f64, points: usize) -> Vec<f64> {
    let (ls, le) = (start.ln(), stop.ln());
    linspace(ls, le, points)
        .into_iter()
        .enumerate()
        .map(|(i, v)| {
            if i == 0 {
                start
            } else if i == points - 1 {
                stop
            } else {
                v.exp()
            }
        })
        .collect()
}

/// `delta T` followed by 64 log-spaced points on `[2 delta T, (1 - delta) T]`.
pub fn default_tau_grid(slot_duration: f64) -> Vec<f64> {
    let delta = TAU_EDGE_FRACTION * slot_duration;
    let mut grid = vec![delta];
    grid.extend(logspace(2.0 * delta, slot_duration - delta, DEFAULT_TAU_POINTS));
    grid
}

pub fn default_b_s_grid() -> Vec<f64> {
    linspace(0.0, 1.0, DEFAULT_B_S_POINTS)
}

fn check_rate(what: &'static str, lambda: f64) -> Result<()> {
    check_probability(what, lambda)
}

fn check_link(p_bar_p_pd: f64) -> Result<()> {
    if p_bar_p_pd > 0.0 && p_bar_p_pd <= 1.0 {
        Ok(())
    } else {
        Err(Error::Domain {
            what: "primary link success probability",
            value: p_bar_p_pd,
        })
    }
}

// --- closed forms ----------------------------------------------------------
//
// `lambda_obj` enters the secondary objective; `lambda_con` (= lambda_p + margin)
// enters the primary constraint.

fn s1_access(lambda_obj: f64, lambda_con: f64, p_md: f64, p_bar_p_pd: f64) -> Option<f64> {
    if lambda_con > p_bar_p_pd + FEASIBILITY_TOL {
        return None;
    }
    if p_md == 0.0 {
        // mu_p does not depend on a_s
        return Some(1.0);
    }
    let root = (1.0 - (lambda_obj / p_bar_p_pd).sqrt()) / p_md;
    let cap = (1.0 - lambda_con / p_bar_p_pd) / p_md;
    Some(root.min(cap).min(1.0).max(0.0))
}

fn s2_access(b_s: f64, lambda_obj: f64, lambda_con: f64, p_md: f64, p_fa: f64, p_bar_p_pd: f64) -> Option<f64> {
    if b_s == 0.0 {
        return s1_access(lambda_obj, lambda_con, p_md, p_bar_p_pd);
    }
    let d = p_md + (1.0 - p_md) * (1.0 - b_s);
    let w = lambda_con / p_bar_p_pd;
    if d + FEASIBILITY_TOL < w {
        return None;
    }
    if p_md == 0.0 {
        return Some(1.0);
    }
    let load = lambda_obj / p_bar_p_pd;
    let cap = ((d - w) / p_md).min(1.0).max(0.0);
    if load == 0.0 {
        // objective increasing in a_s
        return Some(cap);
    }
    if p_fa == 1.0 {
        // idle-sensed access earns nothing and only hurts the primary
        return Some(0.0);
    }
    Some(clipped_root(1.0 - p_fa, b_s * p_fa, p_md, d, (1.0 - p_fa) / load, w))
}

fn s0_access(lambda_obj: f64, lambda_con: f64, p_bar_p_pd: f64) -> Option<f64> {
    if lambda_con > p_bar_p_pd + FEASIBILITY_TOL {
        return None;
    }
    let root = 1.0 - (lambda_obj / p_bar_p_pd).sqrt();
    let cap = 1.0 - lambda_con / p_bar_p_pd;
    Some(root.min(cap).min(1.0).max(0.0))
}

/// Optimal idle-access probability of S1.
pub fn optimal_as_s1(lambda_p: f64, p_md: f64, p_bar_p_pd: f64) -> Result<f64> {
    check_rate("lambda_p", lambda_p)?;
    check_probability("p_md", p_md)?;
    check_link(p_bar_p_pd)?;
    s1_access(lambda_p, lambda_p, p_md, p_bar_p_pd).ok_or_else(|| {
        Error::Infeasible(format!(
            "lambda_p = {lambda_p} exceeds primary link success {p_bar_p_pd}"
        ))
    })
}

/// Optimal idle-access probability of S2 for a given busy-access probability.
pub fn optimal_as_s2_given(b_s: f64, lambda_p: f64, p_md: f64, p_fa: f64, p_bar_p_pd: f64) -> Result<f64> {
    check_probability("b_s", b_s)?;
    check_rate("lambda_p", lambda_p)?;
    check_probability("p_md", p_md)?;
    check_probability("p_fa", p_fa)?;
    check_link(p_bar_p_pd)?;
    s2_access(b_s, lambda_p, lambda_p, p_md, p_fa, p_bar_p_pd).ok_or_else(|| {
        Error::Infeasible(format!(
            "b_s = {b_s} cannot keep the primary stable at lambda_p = {lambda_p}"
        ))
    })
}

/// Optimal access probability of random access without sensing.
pub fn optimal_as_s0(lambda_p: f64, p_bar_p_pd: f64) -> Result<f64> {
    check_rate("lambda_p", lambda_p)?;
    check_link(p_bar_p_pd)?;
    s0_access(lambda_p, lambda_p, p_bar_p_pd).ok_or_else(|| {
        Error::Infeasible(format!(
            "lambda_p = {lambda_p} exceeds primary link success {p_bar_p_pd}"
        ))
    })
}

/// Primary queueing delay `(1 - lambda_p) / (mu_p - lambda_p)` in slots.
pub fn primary_delay(lambda_p: f64, mu_p: f64) -> Result<f64> {
    check_rate("lambda_p", lambda_p)?;
    if lambda_p >= mu_p {
        return Err(Error::UnboundedDelay { lambda_p, mu_p });
    }
    Ok((1.0 - lambda_p) / (mu_p - lambda_p))
}

/// Delay guaranteed by a protection margin: `(1 - lambda_p) / mu_pe`.
pub fn designed_delay_bound(lambda_p: f64, margin: f64) -> Result<f64> {
    check_rate("lambda_p", lambda_p)?;
    if !(margin.is_finite() && margin > 0.0) {
        return Err(Error::Domain {
            what: "protection margin",
            value: margin,
        });
    }
    Ok((1.0 - lambda_p) / margin)
}

// --- single operating point ------------------------------------------------

/// Detector operating point and link success probabilities at one sensing time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    pub sensing: SensingPoint,
    pub links: LinkSuccess,
}

impl OperatingPoint {
    /// Operating point of `variant` at sensing time `tau` (ignored for S0).
    pub fn derive(phy: &PhyParams, mode: &SensingMode, variant: Variant, tau: f64) -> Result<Self> {
        let p_bar_p_pd = primary_success_prob(phy);
        if !variant.senses() {
            return Ok(OperatingPoint {
                sensing: SensingPoint::none(),
                links: LinkSuccess {
                    p_bar_p_pd,
                    p_bar_s_sd: secondary_success_prob(phy, 0.0)?,
                },
            });
        }
        let sensing = mode.point(phy, tau)?;
        Ok(OperatingPoint {
            sensing,
            links: LinkSuccess {
                p_bar_p_pd,
                p_bar_s_sd: secondary_success_prob(phy, tau)?,
            },
        })
    }
}

/// Best configuration of `variant` at a single operating point, with its
/// secondary boundary rate. `None` when no configuration keeps the primary
/// stable with the requested margin.
pub fn best_at_point(
    variant: Variant,
    lambda_p: f64,
    margin: f64,
    point: &OperatingPoint,
    b_s_grid: &[f64],
) -> Option<(SchemeConfig, f64)> {
    let lambda_con = lambda_p + margin;
    let p_bar_p_pd = point.links.p_bar_p_pd;
    let sensing = point.sensing;
    let evaluate = |cfg: SchemeConfig| -> Option<(SchemeConfig, f64)> {
        let rates = service_rates(&cfg, &point.links, lambda_p).ok()?;
        if rates.mu_p + FEASIBILITY_TOL < lambda_con {
            return None;
        }
        Some((cfg, rates.mu_s))
    };
    match variant {
        Variant::Sc => evaluate(SchemeConfig::conventional(sensing)),
        Variant::S1 => {
            let a = s1_access(lambda_p, lambda_con, sensing.p_md, p_bar_p_pd)?;
            evaluate(SchemeConfig::s1(a, sensing))
        }
        Variant::S0 => {
            let a = s0_access(lambda_p, lambda_con, p_bar_p_pd)?;
            evaluate(SchemeConfig::s0(a))
        }
        Variant::S2 => {
            let mut best: Option<(SchemeConfig, f64)> = None;
            for &b in b_s_grid {
                let Some(a) = s2_access(b, lambda_p, lambda_con, sensing.p_md, sensing.p_fa, p_bar_p_pd) else {
                    continue;
                };
                let Some(candidate) = evaluate(SchemeConfig::s2(a, b, sensing)) else {
                    continue;
                };
                if best.is_none_or(|(_, v)| candidate.1 > v) {
                    best = Some(candidate);
                }
            }
            best
        }
    }
}

/// The S2 problem in vector form: `C.T + lambda_p C.T / (D.T - P_pd)` with
/// `T = (a_s, b_s)`, subject to `D.T + F <= 0`, `F = lambda_p - P_pd`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct S2VectorForm {
    pub c: [f64; 2],
    pub d: [f64; 2],
    pub f: f64,
    pub lambda_p: f64,
    pub p_bar_p_pd: f64,
}

impl S2VectorForm {
    pub fn new(point: &OperatingPoint, lambda_p: f64) -> Self {
        let OperatingPoint { sensing, links } = *point;
        S2VectorForm {
            c: [links.p_bar_s_sd * (1.0 - sensing.p_fa), links.p_bar_s_sd * sensing.p_fa],
            d: [sensing.p_md * links.p_bar_p_pd, (1.0 - sensing.p_md) * links.p_bar_p_pd],
            f: lambda_p - links.p_bar_p_pd,
            lambda_p,
            p_bar_p_pd: links.p_bar_p_pd,
        }
    }

    fn dot(u: [f64; 2], t: [f64; 2]) -> f64 {
        u[0] * t[0] + u[1] * t[1]
    }

    pub fn constraint(&self, a_s: f64, b_s: f64) -> f64 {
        Self::dot(self.d, [a_s, b_s]) + self.f
    }

    pub fn objective(&self, a_s: f64, b_s: f64) -> f64 {
        let t = [a_s, b_s];
        let ct = Self::dot(self.c, t);
        ct + self.lambda_p * ct / (Self::dot(self.d, t) - self.p_bar_p_pd)
    }
}

// --- grid search over sensing time and b_s ----------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationRequest {
    pub variant: Variant,
    pub lambda_p: f64,
    pub sensing: SensingMode,
    pub tau_grid: Vec<f64>,
    pub b_s_grid: Vec<f64>,
    /// Protection margin `mu_pe`, packets per slot.
    pub margin: f64,
}

impl OptimizationRequest {
    /// Request with the default sensing-time and `b_s` grids and no margin.
    pub fn new(variant: Variant, lambda_p: f64, sensing: SensingMode, phy: &PhyParams) -> Self {
        OptimizationRequest {
            variant,
            lambda_p,
            sensing,
            tau_grid: default_tau_grid(phy.slot_duration),
            b_s_grid: default_b_s_grid(),
            margin: 0.0,
        }
    }

    pub fn validate(&self, phy: &PhyParams) -> Result<()> {
        check_rate("lambda_p", self.lambda_p)?;
        if !(self.margin.is_finite() && self.margin >= 0.0) {
            return Err(Error::Domain {
                what: "protection margin",
                value: self.margin,
            });
        }
        if self.variant.senses() {
            validate_grid("tau_grid", &self.tau_grid, |t| t > 0.0 && t < phy.slot_duration)?;
        }
        if self.variant == Variant::S2 {
            validate_grid("b_s_grid", &self.b_s_grid, |b| (0.0..=1.0).contains(&b))?;
        }
        Ok(())
    }
}

fn validate_grid(name: &str, grid: &[f64], in_range: impl Fn(f64) -> bool) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter(format!("{name} is empty")));
    }
    if let Some(v) = grid.iter().find(|v| !in_range(**v)) {
        return Err(Error::InvalidParameter(format!("{name} value {v} out of range")));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter(format!("{name} must be strictly increasing")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TauResult {
    pub tau: f64,
    pub p_fa: f64,
    pub p_md: f64,
    pub p_bar_s_sd: f64,
    pub feasible: bool,
    pub a_s: Option<f64>,
    pub b_s: Option<f64>,
    pub lambda_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationResult {
    pub variant: Variant,
    pub lambda_p: f64,
    pub margin: f64,
    pub feasible: bool,
    pub best: Option<SchemeConfig>,
    pub lambda_s_max: f64,
    pub per_tau: Vec<TauResult>,
    /// `(1 - lambda_p) / mu_pe` when a positive margin is requested.
    pub designed_delay_bound: Option<f64>,
}

/// Maximizes the secondary service rate over the request's grids.
pub fn optimize(req: &OptimizationRequest, phy: &PhyParams) -> Result<OptimizationResult> {
    phy.validate()?;
    req.validate(phy)?;
    let taus: &[f64] = if req.variant.senses() { &req.tau_grid } else { &[0.0] };

    let mut per_tau = Vec::with_capacity(taus.len());
    let mut best: Option<(SchemeConfig, f64)> = None;
    for &tau in taus {
        let point = OperatingPoint::derive(phy, &req.sensing, req.variant, tau)?;
        let found = best_at_point(req.variant, req.lambda_p, req.margin, &point, &req.b_s_grid);
        per_tau.push(TauResult {
            tau,
            p_fa: point.sensing.p_fa,
            p_md: point.sensing.p_md,
            p_bar_s_sd: point.links.p_bar_s_sd,
            feasible: found.is_some(),
            a_s: found.map(|(c, _)| c.a_s),
            b_s: found.map(|(c, _)| c.b_s),
            lambda_s: found.map_or(0.0, |(_, v)| v),
        });
        if let Some(candidate) = found {
            if best.is_none_or(|(_, v)| candidate.1 > v) {
                best = Some(candidate);
            }
        }
    }

    let designed_delay_bound = if req.margin > 0.0 {
        Some(designed_delay_bound(req.lambda_p, req.margin)?)
    } else {
        None
    };
    Ok(OptimizationResult {
        variant: req.variant,
        lambda_p: req.lambda_p,
        margin: req.margin,
        feasible: best.is_some(),
        best: best.map(|(c, _)| c),
        lambda_s_max: best.map_or(0.0, |(_, v)| v),
        per_tau,
        designed_delay_bound,
    })
}

fn with_variant(req: &OptimizationRequest, variant: Variant) -> OptimizationRequest {
    OptimizationRequest { variant, ..req.clone() }
}

pub fn optimize_sc(req: &OptimizationRequest, phy: &PhyParams) -> Result<OptimizationResult> {
    optimize(&with_variant(req, Variant::Sc), phy)
}

pub fn optimize_s1(req: &OptimizationRequest, phy: &PhyParams) -> Result<OptimizationResult> {
    optimize(&with_variant(req, Variant::S1), phy)
}

pub fn optimize_s2(req: &OptimizationRequest, phy: &PhyParams) -> Result<OptimizationResult> {
    optimize(&with_variant(req, Variant::S2), phy)
}

pub fn optimize_s0(req: &OptimizationRequest, phy: &PhyParams) -> Result<OptimizationResult> {
    optimize(&with_variant(req, Variant::S0), phy)
}

/// [`optimize`] with a protection margin; requires `lambda_p + mu_pe <= 1`.
pub fn optimize_with_margin(req: &OptimizationRequest, phy: &PhyParams) -> Result<OptimizationResult> {
    if req.lambda_p + req.margin > 1.0 {
        return Err(Error::Precondition(format!(
            "lambda_p + mu_pe = {} exceeds one packet per slot",
            req.lambda_p + req.margin
        )));
    }
    optimize(req, phy)
}

// --- region tracing ----------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RegionScheme {
    Sc,
    S1,
    S2,
    S0,
    /// Pointwise best of S0 and optimized S2.
    Union,
}

impl RegionScheme {
    pub fn as_str(&self) -> &'static str {
        match self {
            RegionScheme::Sc => "sc",
            RegionScheme::S1 => "s1",
            RegionScheme::S2 => "s2",
            RegionScheme::S0 => "s0",
            RegionScheme::Union => "union",
        }
    }

    fn constituents(&self) -> Vec<Variant> {
        match self {
            RegionScheme::Sc => vec![Variant::Sc],
            RegionScheme::S1 => vec![Variant::S1],
            RegionScheme::S2 => vec![Variant::S2],
            RegionScheme::S0 => vec![Variant::S0],
            RegionScheme::Union => vec![Variant::S0, Variant::S2],
        }
    }
}

impl From<Variant> for RegionScheme {
    fn from(v: Variant) -> Self {
        match v {
            Variant::Sc => RegionScheme::Sc,
            Variant::S1 => RegionScheme::S1,
            Variant::S2 => RegionScheme::S2,
            Variant::S0 => RegionScheme::S0,
        }
    }
}

/// One boundary sample; the configuration fields are empty where no policy
/// keeps the primary stable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionPoint {
    pub lambda_p: f64,
    pub lambda_s: f64,
    pub scheme: Option<Variant>,
    pub tau: Option<f64>,
    pub a_s: Option<f64>,
    pub b_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionMetadata {
    pub sensing: SensingMode,
    pub tau_points: usize,
    pub b_s_points: usize,
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionCurve {
    pub scheme: RegionScheme,
    pub points: Vec<RegionPoint>,
    pub metadata: RegionMetadata,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwitchEntry {
    pub lambda_p: f64,
    pub chosen: Option<Variant>,
    pub config: Option<SchemeConfig>,
    pub lambda_s: f64,
}

/// Which scheme to run at each primary arrival rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwitchPolicy {
    pub entries: Vec<SwitchEntry>,
}

impl SwitchPolicy {
    pub fn choose(&self, lambda_p: f64) -> Option<&SwitchEntry> {
        self.entries.iter().find(|e| e.lambda_p == lambda_p)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionTrace {
    pub curve: RegionCurve,
    pub policy: SwitchPolicy,
}

/// Traces the secondary stability boundary over `lambda_grid`. The request
/// supplies sensing mode, grids and margin; its variant and rate are ignored.
pub fn trace_region(
    scheme: RegionScheme,
    lambda_grid: &[f64],
    template: &OptimizationRequest,
    phy: &PhyParams,
) -> Result<RegionTrace> {
    validate_grid("lambda_p grid", lambda_grid, |l| (0.0..=1.0).contains(&l))?;
    let mut points = Vec::with_capacity(lambda_grid.len());
    let mut entries = Vec::with_capacity(lambda_grid.len());
    for &lambda_p in lambda_grid {
        let mut best: Option<(SchemeConfig, f64)> = None;
        for variant in scheme.constituents() {
            let req = OptimizationRequest {
                variant,
                lambda_p,
                ..template.clone()
            };
            let result = optimize(&req, phy)?;
            if let Some(cfg) = result.best {
                if best.is_none_or(|(_, v)| result.lambda_s_max > v) {
                    best = Some((cfg, result.lambda_s_max));
                }
            }
        }
        points.push(RegionPoint {
            lambda_p,
            lambda_s: best.map_or(0.0, |(_, v)| v),
            scheme: best.map(|(c, _)| c.variant),
            tau: best.map(|(c, _)| c.sensing.tau),
            a_s: best.map(|(c, _)| c.a_s),
            b_s: best.map(|(c, _)| c.b_s),
        });
        entries.push(SwitchEntry {
            lambda_p,
            chosen: best.map(|(c, _)| c.variant),
            config: best.map(|(c, _)| c),
            lambda_s: best.map_or(0.0, |(_, v)| v),
        });
    }
    Ok(RegionTrace {
        curve: RegionCurve {
            scheme,
            points,
            metadata: RegionMetadata {
                sensing: template.sensing,
                tau_points: template.tau_grid.len(),
                b_s_points: template.b_s_grid.len(),
                margin: template.margin,
            },
        },
        policy: SwitchPolicy { entries },
    })
}
