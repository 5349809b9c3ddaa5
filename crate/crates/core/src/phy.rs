//! Physical layer: rate under a shortened transmission window, Rayleigh
//! outage, and the energy-detector ROC.
//!
//! All SNRs are linear. Conversion from dB happens at the configuration
//! boundary ([`db_to_linear`]).

use serde::{Deserialize, Serialize};

use crate::error::{check_probability, Error, Result};
use crate::mathcore::{q_func, q_inv};

/// Slot, bandwidth, link and detector parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhyParams {
    /// Bits per packet.
    pub bits_per_packet: f64,
    /// Slot duration `T`, seconds.
    pub slot_duration: f64,
    /// Channel bandwidth `W`, Hz.
    pub bandwidth: f64,
    /// Detector sampling frequency, Hz.
    pub sampling_frequency: f64,
    /// Received primary SNR at the secondary's detector.
    pub sensing_snr: f64,
    /// Noise variance at the detector.
    pub noise_variance: f64,
    /// Secondary link SNR at unit channel gain.
    pub secondary_snr: f64,
    /// Mean channel gain of the secondary link.
    pub secondary_gain: f64,
    /// Primary link SNR at unit channel gain.
    pub primary_snr: f64,
    /// Mean channel gain of the primary link.
    pub primary_gain: f64,
}

impl PhyParams {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("bits_per_packet", self.bits_per_packet),
            ("slot_duration", self.slot_duration),
            ("bandwidth", self.bandwidth),
            ("sampling_frequency", self.sampling_frequency),
            ("sensing_snr", self.sensing_snr),
            ("noise_variance", self.noise_variance),
            ("secondary_snr", self.secondary_snr),
            ("secondary_gain", self.secondary_gain),
            ("primary_snr", self.primary_snr),
            ("primary_gain", self.primary_gain),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be finite and positive, got {v}"
                )));
            }
        }
        if !self.spectral_load().is_finite() {
            return Err(Error::InvalidParameter("b/(T W) is not finite".into()));
        }
        Ok(())
    }

    /// `b / (T W)`: bits per second per Hz needed with a full transmission window.
    pub fn spectral_load(&self) -> f64 {
        self.bits_per_packet / (self.slot_duration * self.bandwidth)
    }

    /// Minimum channel gain for a packet sent at `rate` to get through a link
    /// with unit-gain SNR `snr`.
    pub fn gain_threshold(&self, rate: f64, snr: f64) -> f64 {
        ((rate / self.bandwidth).exp2() - 1.0) / snr
    }

    /// Sets the primary link SNR so that the primary success probability equals `target`.
    pub fn with_primary_success(mut self, target: f64) -> Result<Self> {
        check_open_probability("primary success target", target)?;
        let needed = self.spectral_load().exp2() - 1.0;
        self.primary_snr = needed / (-target.ln() * self.primary_gain);
        Ok(self)
    }

    /// Sets the secondary link SNR so that the secondary success probability
    /// at sensing time `tau` equals `target`.
    pub fn with_secondary_success(mut self, target: f64, tau: f64) -> Result<Self> {
        check_open_probability("secondary success target", target)?;
        let rate = tx_rate(&self, tau)?;
        let needed = (rate / self.bandwidth).exp2() - 1.0;
        self.secondary_snr = needed / (-target.ln() * self.secondary_gain);
        Ok(self)
    }
}

impl Default for PhyParams {
    /// One-millisecond slots over 1 MHz with 1000-bit packets (`b/(T W) = 1`),
    /// a 6 MHz detector at -15 dB and unit-gain links at 10 dB.
    fn default() -> Self {
        PhyParams {
            bits_per_packet: 1000.0,
            slot_duration: 1e-3,
            bandwidth: 1e6,
            sampling_frequency: 6e6,
            sensing_snr: db_to_linear(-15.0),
            noise_variance: 1.0,
            secondary_snr: db_to_linear(10.0),
            secondary_gain: 1.0,
            primary_snr: db_to_linear(10.0),
            primary_gain: 1.0,
        }
    }
}

fn check_open_probability(what: &'static str, p: f64) -> Result<()> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain { what, value: p })
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}

/// A detector operating point. `tau = 0` denotes the no-sensing scheme; the
/// scheme layer assigns its probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensingPoint {
    pub tau: f64,
    pub p_fa: f64,
    pub p_md: f64,
}

impl SensingPoint {
    pub fn new(tau: f64, p_fa: f64, p_md: f64) -> Result<Self> {
        let point = SensingPoint { tau, p_fa, p_md };
        point.validate()?;
        Ok(point)
    }

    /// Placeholder point carried by the no-sensing scheme.
    pub fn none() -> Self {
        SensingPoint {
            tau: 0.0,
            p_fa: 0.0,
            p_md: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau.is_finite() && self.tau >= 0.0) {
            return Err(Error::Domain {
                what: "sensing time",
                value: self.tau,
            });
        }
        check_probability("p_fa", self.p_fa)?;
        check_probability("p_md", self.p_md)
    }

    pub fn validate_for(&self, phy: &PhyParams) -> Result<()> {
        self.validate()?;
        if self.tau > phy.slot_duration {
            return Err(Error::Domain {
                what: "sensing time above slot duration",
                value: self.tau,
            });
        }
        Ok(())
    }
}

fn check_tau(params: &PhyParams, tau: f64) -> Result<()> {
    if !(tau.is_finite() && tau >= 0.0) {
        return Err(Error::Domain {
            what: "sensing time",
            value: tau,
        });
    }
    if tau >= params.slot_duration {
        return Err(Error::Domain {
            what: "sensing time leaves no transmission time",
            value: tau,
        });
    }
    Ok(())
}

/// Transmission rate `b / (T - tau)` in bits per second.
pub fn tx_rate(params: &PhyParams, tau: f64) -> Result<f64> {
    check_tau(params, tau)?;
    Ok(params.bits_per_packet / (params.slot_duration - tau))
}

fn rayleigh_success(params: &PhyParams, rate: f64, snr: f64, gain: f64) -> f64 {
    (-params.gain_threshold(rate, snr) / gain).exp()
}

/// Probability that a secondary packet sent after `tau` seconds of sensing
/// is not in outage. Returns 0 once `tau` reaches the slot duration.
pub fn secondary_success_prob(params: &PhyParams, tau: f64) -> Result<f64> {
    if tau.is_finite() && tau >= params.slot_duration {
        return Ok(0.0);
    }
    let rate = tx_rate(params, tau)?;
    Ok(rayleigh_success(
        params,
        rate,
        params.secondary_snr,
        params.secondary_gain,
    ))
}

/// Probability that a primary packet (full-slot transmission) is not in outage.
pub fn primary_success_prob(params: &PhyParams) -> f64 {
    let rate = params.bits_per_packet / params.slot_duration;
    rayleigh_success(params, rate, params.primary_snr, params.primary_gain)
}

fn samples(params: &PhyParams, tau: f64) -> Result<f64> {
    if !(tau.is_finite() && tau > 0.0) {
        return Err(Error::Domain {
            what: "detector sensing time",
            value: tau,
        });
    }
    Ok(tau * params.sampling_frequency)
}

/// Energy-detector operating point for threshold `epsilon` and sensing time `tau`.
pub fn roc_from_threshold(params: &PhyParams, epsilon: f64, tau: f64) -> Result<SensingPoint> {
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(Error::Domain {
            what: "detection threshold",
            value: epsilon,
        });
    }
    let n = samples(params, tau)?;
    let gamma = params.sensing_snr;
    let normalized = epsilon / params.noise_variance;
    let p_fa = q_func((normalized - 1.0) * n.sqrt())?;
    let p_md = 1.0 - q_func((normalized - gamma - 1.0) * (n / (2.0 * gamma + 1.0)).sqrt())?;
    Ok(SensingPoint { tau, p_fa, p_md })
}

/// False-alarm probability achieved at a target misdetection probability.
pub fn pfa_for_target_pmd(params: &PhyParams, p_md_target: f64, tau: f64) -> Result<SensingPoint> {
    let n = samples(params, tau)?;
    let gamma = params.sensing_snr;
    let z = q_inv(1.0 - p_md_target).map_err(|_| Error::Domain {
        what: "target misdetection probability",
        value: p_md_target,
    })?;
    let p_fa = q_func((2.0 * gamma + 1.0).sqrt() * z + n.sqrt() * gamma)?;
    Ok(SensingPoint {
        tau,
        p_fa,
        p_md: p_md_target,
    })
}

/// Misdetection probability achieved at a target false-alarm probability.
pub fn pmd_for_target_pfa(params: &PhyParams, p_fa_target: f64, tau: f64) -> Result<SensingPoint> {
    let n = samples(params, tau)?;
    let gamma = params.sensing_snr;
    let z = q_inv(p_fa_target).map_err(|_| Error::Domain {
        what: "target false-alarm probability",
        value: p_fa_target,
    })?;
    let p_md = 1.0 - q_func((z - n.sqrt() * gamma) / (2.0 * gamma + 1.0).sqrt())?;
    Ok(SensingPoint {
        tau,
        p_fa: p_fa_target,
        p_md,
    })
}

/// How the detector operating point is chosen as the sensing time varies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum SensingMode {
    /// Hold the false-alarm probability; misdetection follows from `tau`.
    FixedPfa { value: f64 },
    /// Hold the misdetection probability; false alarm follows from `tau`.
    FixedPmd { value: f64 },
    /// Hold the energy threshold; both probabilities follow from `tau`.
    FixedThreshold { epsilon: f64 },
    /// A fixed operating point independent of `tau`.
    Fixed { p_fa: f64, p_md: f64 },
}

impl SensingMode {
    pub fn point(&self, params: &PhyParams, tau: f64) -> Result<SensingPoint> {
        match *self {
            SensingMode::FixedPfa { value } => pmd_for_target_pfa(params, value, tau),
            SensingMode::FixedPmd { value } => pfa_for_target_pmd(params, value, tau),
            SensingMode::FixedThreshold { epsilon } => roc_from_threshold(params, epsilon, tau),
            SensingMode::Fixed { p_fa, p_md } => SensingPoint::new(tau, p_fa, p_md),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            SensingMode::FixedPfa { .. } => "fixed_pfa",
            SensingMode::FixedPmd { .. } => "fixed_pmd",
            SensingMode::FixedThreshold { .. } => "fixed_threshold",
            SensingMode::Fixed { .. } => "fixed",
        }
    }

    /// The value held fixed by the mode (threshold, target, or false alarm for `Fixed`).
    pub fn target(&self) -> f64 {
        match *self {
            SensingMode::FixedPfa { value } | SensingMode::FixedPmd { value } => value,
            SensingMode::FixedThreshold { epsilon } => epsilon,
            SensingMode::Fixed { p_fa, .. } => p_fa,
        }
    }

    /// Same mode with its held value replaced.
    pub fn with_target(&self, target: f64) -> SensingMode {
        match *self {
            SensingMode::FixedPfa { .. } => SensingMode::FixedPfa { value: target },
            SensingMode::FixedPmd { .. } => SensingMode::FixedPmd { value: target },
            SensingMode::FixedThreshold { .. } => SensingMode::FixedThreshold { epsilon: target },
            SensingMode::Fixed { p_md, .. } => SensingMode::Fixed { p_fa: target, p_md },
        }
    }
}
