//! Primary-parameter estimation from overheard ACK/NACK feedback, and the
//! learn-then-access pipeline built on it.
//!
//! The estimates assume a silent secondary and a stable primary during
//! learning, so the ACK rate equals the arrival rate.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optimizer::{best_at_point, default_b_s_grid, OperatingPoint};
use crate::phy::{primary_success_prob, secondary_success_prob, PhyParams, SensingPoint};
use crate::schemes::{service_rates, LinkSuccess, SchemeConfig, Variant};
use crate::sim::{self, measure_stability, Feedback, FeedbackCounts, SimConfig, SimMode, StabilityReport, TraceRow};

/// Standard errors used for the estimation-error bound.
pub const ERROR_BOUND_SIGMAS: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeedbackLog {
    /// Learning slots `N`.
    pub n: u64,
    /// Feedback messages heard `M`.
    pub m: u64,
    /// ACKs heard `A`.
    pub a: u64,
    /// Decoding-error probability assumed when correcting for erasures.
    pub p_e_assumed: f64,
}

impl FeedbackLog {
    pub fn new(n: u64, m: u64, a: u64, p_e_assumed: f64) -> Result<Self> {
        let log = FeedbackLog { n, m, a, p_e_assumed };
        log.validate()?;
        Ok(log)
    }

    pub fn from_counts(counts: &FeedbackCounts, p_e_assumed: f64) -> Result<Self> {
        Self::new(counts.slots, counts.feedback_heard, counts.acks_heard, p_e_assumed)
    }

    /// Counts heard feedback in a simulator trace.
    pub fn from_trace(rows: &[TraceRow], p_e_assumed: f64) -> Result<Self> {
        let heard = rows.iter().filter(|r| r.has(sim::event::FEEDBACK_HEARD));
        let (m, a) = heard.fold((0, 0), |(m, a), r| (m + 1, a + (r.feedback == Feedback::Ack) as u64));
        Self::new(rows.len() as u64, m, a, p_e_assumed)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a <= self.m && self.m <= self.n) {
            return Err(Error::InvalidParameter(format!(
                "feedback counts must satisfy A <= M <= N, got A={} M={} N={}",
                self.a, self.m, self.n
            )));
        }
        if !(0.0..1.0).contains(&self.p_e_assumed) {
            return Err(Error::Domain {
                what: "assumed feedback error probability",
                value: self.p_e_assumed,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorMode {
    /// `lambda = A (1 - P_e) / N`: heard ACKs scaled down by the decoding probability.
    Scaled,
    /// `lambda = A / (N (1 - P_e))`, unbiased when `A` counts heard ACKs.
    #[default]
    Unbiased,
}

impl std::str::FromStr for EstimatorMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "scaled" => Ok(EstimatorMode::Scaled),
            "unbiased" => Ok(EstimatorMode::Unbiased),
            other => Err(Error::InvalidParameter(format!("unknown estimator mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimationReport {
    pub estimator_mode: EstimatorMode,
    pub lambda_p_est: f64,
    /// Binomial standard error of `lambda_p_est`.
    pub lambda_p_std_error: f64,
    /// `A / M`; absent when no feedback was heard.
    pub p_bar_p_pd_est: Option<f64>,
    /// Primary service rate with a silent secondary, equal to `p_bar_p_pd_est`.
    pub mu_p_est: Option<f64>,
    pub p_nonempty_est: f64,
    /// `ERROR_BOUND_SIGMAS` standard errors of `lambda_p_est`.
    pub error_bound: f64,
    pub recommended_mu_pe: f64,
}

pub fn estimate(log: &FeedbackLog, mode: EstimatorMode) -> Result<EstimationReport> {
    log.validate()?;
    if log.n == 0 {
        return Err(Error::Precondition("no learning slots".into()));
    }
    let n = log.n as f64;
    let keep = 1.0 - log.p_e_assumed;
    let scale = match mode {
        EstimatorMode::Scaled => keep,
        EstimatorMode::Unbiased => 1.0 / keep,
    };
    let ack_rate = log.a as f64 / n;
    let lambda_p_est = (ack_rate * scale).min(1.0);
    let lambda_p_std_error = (ack_rate * (1.0 - ack_rate) / n).sqrt() * scale;

    let p_bar_p_pd_est = (log.m > 0).then(|| log.a as f64 / log.m as f64);
    let p_nonempty_est = match p_bar_p_pd_est {
        Some(mu) if mu > 0.0 => lambda_p_est / mu,
        _ => log.m as f64 / n * scale,
    }
    .min(1.0);

    let error_bound = error_bound(lambda_p_std_error);
    Ok(EstimationReport {
        estimator_mode: mode,
        lambda_p_est,
        lambda_p_std_error,
        p_bar_p_pd_est,
        mu_p_est: p_bar_p_pd_est,
        p_nonempty_est,
        error_bound,
        recommended_mu_pe: recommend_margin(error_bound)?,
    })
}

/// Bound on the positive estimation error of the arrival rate.
pub fn error_bound(std_error: f64) -> f64 {
    ERROR_BOUND_SIGMAS * std_error
}

/// Smallest protection margin covering an arrival-rate error of `error_bound`.
pub fn recommend_margin(error_bound: f64) -> Result<f64> {
    if !(error_bound.is_finite() && error_bound >= 0.0) {
        return Err(Error::Domain {
            what: "estimation error bound",
            value: error_bound,
        });
    }
    Ok(error_bound)
}

/// Ground truth and options for [`learning_then_regular`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndToEndConfig {
    pub seed: u64,
    pub lambda_p: f64,
    pub lambda_s: f64,
    pub phy: PhyParams,
    pub variant: Variant,
    /// Detector operating point for the sensing schemes (ignored by S0).
    pub sensing: SensingPoint,
    pub feedback_error: f64,
    pub estimator_mode: EstimatorMode,
    /// Apply the recommended margin; otherwise optimize with none.
    pub use_margin: bool,
    pub b_s_grid: Vec<f64>,
}

impl EndToEndConfig {
    pub fn new(lambda_p: f64, lambda_s: f64, phy: PhyParams, variant: Variant, sensing: SensingPoint) -> Self {
        EndToEndConfig {
            seed: 0,
            lambda_p,
            lambda_s,
            phy,
            variant,
            sensing,
            feedback_error: 0.0,
            estimator_mode: EstimatorMode::Unbiased,
            use_margin: true,
            b_s_grid: default_b_s_grid(),
        }
    }

    fn operating_point(&self, p_bar_p_pd: f64) -> Result<OperatingPoint> {
        let (sensing, tau) = if self.variant.senses() {
            (self.sensing, self.sensing.tau)
        } else {
            (SensingPoint::none(), 0.0)
        };
        Ok(OperatingPoint {
            sensing,
            links: LinkSuccess {
                p_bar_p_pd,
                p_bar_s_sd: secondary_success_prob(&self.phy, tau)?,
            },
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndToEndReport {
    pub log: FeedbackLog,
    pub estimation: EstimationReport,
    pub margin: f64,
    pub policy: SchemeConfig,
    /// The estimated problem was infeasible and the secondary stayed silent.
    pub fell_back: bool,
    /// Secondary rate of the chosen policy under the true parameters.
    pub analytic_lambda_s: f64,
    /// Secondary rate of the policy optimized with the true parameters.
    pub oracle_lambda_s: f64,
    /// Regular-phase dominant-system secondary service rate.
    pub rp_mu_s: Option<f64>,
    pub rp_mu_p: Option<f64>,
    pub rp_stability: StabilityReport,
}

/// Learns the primary parameters with a silent secondary for `lp_slots`,
/// optimizes the access policy on the estimates, then runs `rp_slots` of
/// regular access in the dominant system and checks primary stability.
pub fn learning_then_regular(lp_slots: u64, rp_slots: u64, truth: &EndToEndConfig) -> Result<EndToEndReport> {
    if lp_slots == 0 || rp_slots < 10 * lp_slots {
        return Err(Error::Precondition(format!(
            "regular phase ({rp_slots}) must be at least ten times the learning phase ({lp_slots})"
        )));
    }
    let learning = SimConfig {
        feedback_error: truth.feedback_error,
        ..SimConfig::new(
            lp_slots,
            truth.seed,
            truth.lambda_p,
            0.0,
            SchemeConfig::silent(),
            truth.phy,
        )
    };
    let lp = sim::run(&learning)?;
    let log = FeedbackLog::from_counts(&lp.feedback_counts, truth.feedback_error)?;
    let estimation = estimate(&log, truth.estimator_mode)?;
    let margin = if truth.use_margin {
        estimation.recommended_mu_pe
    } else {
        0.0
    };

    let chosen = match estimation.p_bar_p_pd_est {
        Some(p) if p > 0.0 && estimation.lambda_p_est + margin <= 1.0 => {
            let point = truth.operating_point(p)?;
            best_at_point(truth.variant, estimation.lambda_p_est, margin, &point, &truth.b_s_grid)
        }
        _ => None,
    };
    let (policy, fell_back) = match chosen {
        Some((cfg, _)) => (cfg, false),
        None => (SchemeConfig::silent(), true),
    };

    let true_point = truth.operating_point(primary_success_prob(&truth.phy))?;
    let analytic_lambda_s = service_rates(&policy, &true_point.links, truth.lambda_p).map_or(0.0, |r| r.mu_s);
    let oracle_lambda_s =
        best_at_point(truth.variant, truth.lambda_p, 0.0, &true_point, &truth.b_s_grid).map_or(0.0, |(_, v)| v);

    let regular = SimConfig {
        mode: SimMode::Dominant,
        feedback_error: truth.feedback_error,
        ..SimConfig::new(
            rp_slots,
            truth.seed.wrapping_add(1),
            truth.lambda_p,
            0.0,
            policy,
            truth.phy,
        )
    };
    let rp = sim::run(&regular)?;
    let window = (rp_slots / 2).max(sim::MIN_STABILITY_WINDOW).min(rp_slots);
    let rp_stability = measure_stability(&regular, window)?;

    Ok(EndToEndReport {
        log,
        estimation,
        margin,
        policy,
        fell_back,
        analytic_lambda_s,
        oracle_lambda_s,
        rp_mu_s: rp.empirical_mu_s.map(|e| e.value),
        rp_mu_p: rp.empirical_mu_p.map(|e| e.value),
        rp_stability,
    })
}
