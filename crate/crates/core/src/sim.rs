//! Slotted Monte Carlo simulation of the primary and secondary queues.
//!
//! Every slot draws the same random variates in the same order whatever the
//! queue state, one ChaCha stream per source. Two runs with the same seed
//! therefore see identical arrivals, sensing noise, coin tosses, fading and
//! feedback erasures, which is what the dominant-system comparison needs.

use std::collections::VecDeque;
use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::error::{check_probability, Error, Result};
use crate::phy::PhyParams;
use crate::schemes::{primary_service_rate, secondary_idle_service_rate, SchemeConfig};

/// Drift above which a queue counts as growing, packets per slot.
pub const DRIFT_EPSILON: f64 = 1e-3;
/// Terminal primary queue must stay below this multiple of `sqrt(window)`.
pub const TERMINAL_BOUND_FACTOR: f64 = 10.0;
/// Smallest window accepted by [`measure_stability`].
pub const MIN_STABILITY_WINDOW: u64 = 10_000;
const BATCHES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SimMode {
    #[default]
    Original,
    /// The secondary sends dummy packets whenever its queue is empty.
    Dominant,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub slots: u64,
    pub seed: u64,
    pub lambda_p: f64,
    pub lambda_s: f64,
    pub scheme: SchemeConfig,
    pub phy: PhyParams,
    pub mode: SimMode,
    /// Probability `P_e` that the secondary fails to decode a feedback message.
    pub feedback_error: f64,
    pub record_traces: bool,
}

impl SimConfig {
    pub fn new(slots: u64, seed: u64, lambda_p: f64, lambda_s: f64, scheme: SchemeConfig, phy: PhyParams) -> Self {
        SimConfig {
            slots,
            seed,
            lambda_p,
            lambda_s,
            scheme,
            phy,
            mode: SimMode::Original,
            feedback_error: 0.0,
            record_traces: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.slots == 0 {
            return Err(Error::InvalidParameter("slots must be at least 1".into()));
        }
        check_probability("lambda_p", self.lambda_p)?;
        check_probability("lambda_s", self.lambda_s)?;
        if !(0.0..1.0).contains(&self.feedback_error) {
            return Err(Error::Domain {
                what: "feedback error probability",
                value: self.feedback_error,
            });
        }
        self.phy.validate()?;
        self.scheme.validate()?;
        self.scheme.sensing.validate_for(&self.phy)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Feedback {
    Ack,
    Nack,
    #[default]
    None,
}

/// Event bits of [`SlotOutcome::events`].
pub mod event {
    pub const PRIMARY_NONEMPTY: u16 = 1 << 0;
    pub const SENSED_BUSY: u16 = 1 << 1;
    pub const PRIMARY_TX: u16 = 1 << 2;
    pub const SECONDARY_TX: u16 = 1 << 3;
    pub const COLLISION: u16 = 1 << 4;
    pub const PRIMARY_SUCCESS: u16 = 1 << 5;
    pub const SECONDARY_SUCCESS: u16 = 1 << 6;
    pub const FEEDBACK_HEARD: u16 = 1 << 7;
    pub const DUMMY: u16 = 1 << 8;
    pub const PRIMARY_ARRIVAL: u16 = 1 << 9;
    pub const SECONDARY_ARRIVAL: u16 = 1 << 10;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SlotOutcome {
    pub primary_nonempty: bool,
    pub sensed_busy: bool,
    pub primary_tx: bool,
    pub secondary_tx: bool,
    /// The secondary transmission carried a dummy packet.
    pub dummy: bool,
    pub collision: bool,
    pub primary_success: bool,
    pub secondary_success: bool,
    pub feedback: Feedback,
    pub feedback_heard: bool,
    pub primary_arrival: bool,
    pub secondary_arrival: bool,
}

impl SlotOutcome {
    pub fn events(&self) -> u16 {
        use event::*;
        [
            (self.primary_nonempty, PRIMARY_NONEMPTY),
            (self.sensed_busy, SENSED_BUSY),
            (self.primary_tx, PRIMARY_TX),
            (self.secondary_tx, SECONDARY_TX),
            (self.collision, COLLISION),
            (self.primary_success, PRIMARY_SUCCESS),
            (self.secondary_success, SECONDARY_SUCCESS),
            (self.feedback_heard, FEEDBACK_HEARD),
            (self.dummy, DUMMY),
            (self.primary_arrival, PRIMARY_ARRIVAL),
            (self.secondary_arrival, SECONDARY_ARRIVAL),
        ]
        .iter()
        .filter(|(on, _)| *on)
        .fold(0, |acc, (_, bit)| acc | bit)
    }
}

/// One trace row: queue lengths at the end of `slot`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceRow {
    pub slot: u64,
    #[serde(rename = "Qp")]
    pub qp: u64,
    #[serde(rename = "Qs")]
    pub qs: u64,
    pub events: u16,
    pub feedback: Feedback,
}

impl TraceRow {
    pub fn has(&self, bit: u16) -> bool {
        self.events & bit != 0
    }
}

pub fn write_trace_csv<W: Write>(rows: &[TraceRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for row in rows {
        w.serialize(row)
            .map_err(|e| Error::InvalidParameter(format!("trace write: {e}")))?;
    }
    w.flush()
        .map_err(|e| Error::InvalidParameter(format!("trace write: {e}")))?;
    Ok(())
}

pub fn read_trace_csv<R: Read>(reader: R) -> Result<Vec<TraceRow>> {
    csv::Reader::from_reader(reader)
        .deserialize()
        .collect::<std::result::Result<Vec<TraceRow>, _>>()
        .map_err(|e| Error::InvalidParameter(format!("trace read: {e}")))
}

/// Replays the queue recursion `Q' = (Q - U)^+ + A` from empty queues and
/// checks it against the stored lengths.
pub fn replay_matches(rows: &[TraceRow], mode: SimMode) -> bool {
    let (mut qp, mut qs) = (0u64, 0u64);
    for row in rows {
        let up = row.has(event::PRIMARY_SUCCESS) as u64;
        let real_secondary = row.has(event::SECONDARY_SUCCESS) && !row.has(event::DUMMY);
        let us = real_secondary as u64;
        qp = qp.saturating_sub(up) + row.has(event::PRIMARY_ARRIVAL) as u64;
        qs = qs.saturating_sub(us) + row.has(event::SECONDARY_ARRIVAL) as u64;
        if (qp, qs) != (row.qp, row.qs) {
            return false;
        }
        if mode == SimMode::Original && row.has(event::DUMMY) {
            return false;
        }
    }
    true
}

/// A ratio estimate with a batch-means standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
    /// Denominator count (slots contributing to the estimate).
    pub samples: u64,
}

impl Estimate {
    pub fn within(&self, target: f64, k: f64) -> bool {
        (self.value - target).abs() <= k * self.std_error
    }
}

#[derive(Debug, Clone)]
struct RatioBatches {
    num: Vec<f64>,
    den: Vec<f64>,
}

impl RatioBatches {
    fn new() -> Self {
        RatioBatches {
            num: vec![0.0; BATCHES],
            den: vec![0.0; BATCHES],
        }
    }

    fn add(&mut self, batch: usize, num: bool, den: bool) {
        if den {
            self.den[batch] += 1.0;
            if num {
                self.num[batch] += 1.0;
            }
        }
    }

    fn estimate(&self) -> Option<Estimate> {
        let total_den: f64 = self.den.iter().sum();
        if total_den == 0.0 {
            return None;
        }
        let total_num: f64 = self.num.iter().sum();
        let ratio = total_num / total_den;
        let used: Vec<usize> = (0..BATCHES).filter(|&b| self.den[b] > 0.0).collect();
        let k = used.len() as f64;
        let std_error = if used.len() < 2 {
            0.0
        } else {
            let mean_den = total_den / k;
            let ss: f64 = used.iter().map(|&b| (self.num[b] - ratio * self.den[b]).powi(2)).sum();
            (ss / (k * (k - 1.0))).sqrt() / mean_den
        };
        Some(Estimate {
            value: ratio,
            std_error,
            samples: total_den as u64,
        })
    }
}

/// Feedback overheard by the secondary: `acks <= heard <= slots`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FeedbackCounts {
    pub acks_heard: u64,
    pub feedback_heard: u64,
    pub slots: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub slots: u64,
    pub mode: SimMode,
    /// Primary successes per slot with a non-empty primary queue.
    pub empirical_mu_p: Option<Estimate>,
    /// Secondary successes per slot in which it had a packet (real or dummy).
    pub empirical_mu_s: Option<Estimate>,
    pub empirical_p_empty: Estimate,
    /// Mean departure slot minus arrival slot of delivered primary packets.
    pub mean_primary_delay: Option<f64>,
    pub primary_departures: u64,
    pub secondary_departures: u64,
    pub final_qp: u64,
    pub final_qs: u64,
    pub feedback_counts: FeedbackCounts,
    pub traces: Option<Vec<TraceRow>>,
}

const STREAM_ARRIVAL_P: u64 = 1;
const STREAM_ARRIVAL_S: u64 = 2;
const STREAM_SENSING: u64 = 3;
const STREAM_ACCESS: u64 = 4;
const STREAM_CHANNEL: u64 = 5;
const STREAM_FEEDBACK: u64 = 6;

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Slot-by-slot simulator state.
#[derive(Debug, Clone)]
pub struct Simulator {
    cfg: SimConfig,
    arrivals_p: ChaCha8Rng,
    arrivals_s: ChaCha8Rng,
    sensing: ChaCha8Rng,
    access: ChaCha8Rng,
    channel: ChaCha8Rng,
    feedback: ChaCha8Rng,
    primary_threshold: f64,
    secondary_threshold: f64,
    qp: u64,
    qs: u64,
    primary_fifo: VecDeque<u64>,
    slot: u64,
    delay_sum: u128,
    primary_departures: u64,
    secondary_departures: u64,
}

impl Simulator {
    pub fn new(cfg: &SimConfig) -> Result<Self> {
        cfg.validate()?;
        let phy = &cfg.phy;
        let primary_rate = phy.bits_per_packet / phy.slot_duration;
        let secondary_rate = phy.bits_per_packet / (phy.slot_duration - cfg.scheme.sensing.tau);
        Ok(Simulator {
            cfg: *cfg,
            arrivals_p: stream(cfg.seed, STREAM_ARRIVAL_P),
            arrivals_s: stream(cfg.seed, STREAM_ARRIVAL_S),
            sensing: stream(cfg.seed, STREAM_SENSING),
            access: stream(cfg.seed, STREAM_ACCESS),
            channel: stream(cfg.seed, STREAM_CHANNEL),
            feedback: stream(cfg.seed, STREAM_FEEDBACK),
            primary_threshold: phy.gain_threshold(primary_rate, phy.primary_snr) / phy.primary_gain,
            secondary_threshold: phy.gain_threshold(secondary_rate, phy.secondary_snr) / phy.secondary_gain,
            qp: 0,
            qs: 0,
            primary_fifo: VecDeque::new(),
            slot: 0,
            delay_sum: 0,
            primary_departures: 0,
            secondary_departures: 0,
        })
    }

    pub fn queues(&self) -> (u64, u64) {
        (self.qp, self.qs)
    }

    pub fn slot(&self) -> u64 {
        self.slot
    }

    /// Advances one slot; departures are resolved before arrivals join.
    pub fn step(&mut self) -> SlotOutcome {
        let u_arr_p: f64 = self.arrivals_p.random();
        let u_arr_s: f64 = self.arrivals_s.random();
        let u_sense: f64 = self.sensing.random();
        let u_access: f64 = self.access.random();
        let g_p: f64 = self.channel.sample(Exp1);
        let g_s: f64 = self.channel.sample(Exp1);
        let u_feedback: f64 = self.feedback.random();

        let scheme = &self.cfg.scheme;
        let mut o = SlotOutcome {
            primary_nonempty: self.qp > 0,
            ..Default::default()
        };
        o.primary_tx = o.primary_nonempty;

        let sensing = scheme.variant.senses();
        o.sensed_busy = sensing
            && if o.primary_tx {
                u_sense >= scheme.sensing.p_md
            } else {
                u_sense < scheme.sensing.p_fa
            };
        let access_prob = if o.sensed_busy { scheme.b_s } else { scheme.a_s };
        let has_packet = self.qs > 0;
        let backlogged = has_packet || self.cfg.mode == SimMode::Dominant;
        o.secondary_tx = backlogged && u_access < access_prob;
        o.dummy = o.secondary_tx && !has_packet;

        o.collision = o.primary_tx && o.secondary_tx;
        o.primary_success = o.primary_tx && !o.collision && g_p >= self.primary_threshold;
        o.secondary_success = o.secondary_tx && !o.collision && g_s >= self.secondary_threshold;

        if o.primary_tx {
            o.feedback = if o.primary_success {
                Feedback::Ack
            } else {
                Feedback::Nack
            };
            o.feedback_heard = u_feedback >= self.cfg.feedback_error;
        }

        if o.primary_success {
            self.qp -= 1;
            let arrived = self.primary_fifo.pop_front().expect("primary queue non-empty");
            self.delay_sum += u128::from(self.slot - arrived);
            self.primary_departures += 1;
        }
        if o.secondary_success && !o.dummy {
            self.qs -= 1;
            self.secondary_departures += 1;
        }

        o.primary_arrival = u_arr_p < self.cfg.lambda_p;
        o.secondary_arrival = u_arr_s < self.cfg.lambda_s;
        if o.primary_arrival {
            self.qp += 1;
            self.primary_fifo.push_back(self.slot);
        }
        if o.secondary_arrival {
            self.qs += 1;
        }
        self.slot += 1;
        o
    }
}

/// Runs `cfg.slots` slots from empty queues.
pub fn run(cfg: &SimConfig) -> Result<SimResult> {
    let mut sim = Simulator::new(cfg)?;
    let mut mu_p = RatioBatches::new();
    let mut mu_s = RatioBatches::new();
    let mut p_empty = RatioBatches::new();
    let mut counts = FeedbackCounts {
        slots: cfg.slots,
        ..Default::default()
    };
    let mut traces = cfg.record_traces.then(|| Vec::with_capacity(cfg.slots as usize));
    let batch_len = cfg.slots.div_ceil(BATCHES as u64);

    for t in 0..cfg.slots {
        let batch = (t / batch_len) as usize;
        let secondary_eligible = sim.qs > 0 || cfg.mode == SimMode::Dominant;
        let o = sim.step();
        mu_p.add(batch, o.primary_success, o.primary_nonempty);
        mu_s.add(batch, o.secondary_success, secondary_eligible);
        p_empty.add(batch, !o.primary_nonempty, true);
        if o.feedback_heard {
            counts.feedback_heard += 1;
            if o.feedback == Feedback::Ack {
                counts.acks_heard += 1;
            }
        }
        if let Some(rows) = traces.as_mut() {
            rows.push(TraceRow {
                slot: t,
                qp: sim.qp,
                qs: sim.qs,
                events: o.events(),
                feedback: o.feedback,
            });
        }
    }

    Ok(SimResult {
        slots: cfg.slots,
        mode: cfg.mode,
        empirical_mu_p: mu_p.estimate(),
        empirical_mu_s: mu_s.estimate(),
        empirical_p_empty: p_empty.estimate().expect("at least one slot"),
        mean_primary_delay: (sim.primary_departures > 0).then(|| sim.delay_sum as f64 / sim.primary_departures as f64),
        primary_departures: sim.primary_departures,
        secondary_departures: sim.secondary_departures,
        final_qp: sim.qp,
        final_qs: sim.qs,
        feedback_counts: counts,
        traces,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    /// Empirical and (where available) analytic verdicts agree on stability.
    pub stable: bool,
    /// Least-squares slope of the primary queue over the window.
    pub drift: f64,
    pub secondary_drift: f64,
    pub terminal_qp: u64,
    pub terminal_qs: u64,
    /// Slopes at most [`DRIFT_EPSILON`] and terminal queues below the bound.
    pub empirical_stable: bool,
    /// Strict Loynes check against the closed-form rates; dominant mode only,
    /// where the service rates do not depend on the queue state.
    pub analytic_stable: Option<bool>,
}

/// Runs `cfg.slots` slots and judges stability from the last `window` slots.
pub fn measure_stability(cfg: &SimConfig, window: u64) -> Result<StabilityReport> {
    if window < MIN_STABILITY_WINDOW {
        return Err(Error::Precondition(format!(
            "window {window} below {MIN_STABILITY_WINDOW} slots"
        )));
    }
    if window > cfg.slots {
        return Err(Error::Precondition(format!(
            "window {window} exceeds {} slots",
            cfg.slots
        )));
    }
    let mut sim = Simulator::new(cfg)?;
    let start = cfg.slots - window;
    let mut fit_p = SlopeFit::default();
    let mut fit_s = SlopeFit::default();
    for t in 0..cfg.slots {
        sim.step();
        if t >= start {
            let x = (t - start) as f64;
            fit_p.add(x, sim.qp as f64);
            fit_s.add(x, sim.qs as f64);
        }
    }
    let drift = fit_p.slope();
    let secondary_drift = fit_s.slope();
    let bound = TERMINAL_BOUND_FACTOR * (window as f64).sqrt();
    let empirical_stable = drift <= DRIFT_EPSILON
        && secondary_drift <= DRIFT_EPSILON
        && (sim.qp as f64) < bound
        && (sim.qs as f64) < bound;
    let analytic_stable = (cfg.mode == SimMode::Dominant).then(|| {
        let p_bar_p_pd = crate::phy::primary_success_prob(&cfg.phy);
        let mu_p = primary_service_rate(&cfg.scheme, p_bar_p_pd);
        let primary = cfg.lambda_p < mu_p;
        let secondary = cfg.lambda_s == 0.0 || {
            let p_bar_s_sd = crate::phy::secondary_success_prob(&cfg.phy, cfg.scheme.sensing.tau).unwrap_or(0.0);
            let idle = secondary_idle_service_rate(&cfg.scheme, p_bar_s_sd);
            primary && cfg.lambda_s < idle * (1.0 - cfg.lambda_p / mu_p)
        };
        primary && secondary
    });
    Ok(StabilityReport {
        stable: empirical_stable && analytic_stable.unwrap_or(true),
        drift,
        secondary_drift,
        terminal_qp: sim.qp,
        terminal_qs: sim.qs,
        empirical_stable,
        analytic_stable,
    })
}

#[derive(Debug, Default, Clone, Copy)]
struct SlopeFit {
    n: f64,
    sx: f64,
    sy: f64,
    sxx: f64,
    sxy: f64,
}

impl SlopeFit {
    fn add(&mut self, x: f64, y: f64) {
        self.n += 1.0;
        self.sx += x;
        self.sy += y;
        self.sxx += x * x;
        self.sxy += x * y;
    }

    fn slope(&self) -> f64 {
        let denom = self.n * self.sxx - self.sx * self.sx;
        if denom == 0.0 {
            return 0.0;
        }
        (self.n * self.sxy - self.sx * self.sy) / denom
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DominanceReport {
    /// `Q^dominant >= Q^original` slotwise for both queues.
    pub dominant_ge_original: bool,
    /// With the secondary saturated (`lambda_s = 1`) the two runs produce
    /// identical queue traces.
    pub saturation_indistinguishable: bool,
    pub first_violation: Option<u64>,
}

/// Runs the original and dominant systems on the same random streams.
pub fn compare_dominant(cfg: &SimConfig) -> Result<DominanceReport> {
    if !cfg.record_traces {
        return Err(Error::Precondition("compare_dominant needs record_traces".into()));
    }
    let pair = |c: &SimConfig| -> Result<(Vec<TraceRow>, Vec<TraceRow>)> {
        let orig = run(&SimConfig {
            mode: SimMode::Original,
            ..*c
        })?;
        let dom = run(&SimConfig {
            mode: SimMode::Dominant,
            ..*c
        })?;
        Ok((orig.traces.unwrap_or_default(), dom.traces.unwrap_or_default()))
    };
    let (orig, dom) = pair(cfg)?;
    let first_violation = orig
        .iter()
        .zip(&dom)
        .find(|(o, d)| d.qp < o.qp || d.qs < o.qs)
        .map(|(o, _)| o.slot);

    let (sat_orig, sat_dom) = pair(&SimConfig { lambda_s: 1.0, ..*cfg })?;
    let saturation_indistinguishable = sat_orig.iter().zip(&sat_dom).all(|(o, d)| (o.qp, o.qs) == (d.qp, d.qs));

    Ok(DominanceReport {
        dominant_ge_original: first_violation.is_none(),
        saturation_indistinguishable,
        first_violation,
    })
}
