//! Command-line front end: `region`, `optimize`, `simulate`, `estimate`, `sweep`.
//!
//! Every command reads one TOML document (unknown keys rejected, SNRs in dB),
//! writes its CSV/JSON files under the output directory and prints the paths.
//! Exit codes: 0 success, 2 configuration error, 3 internal error.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::Error;
use crate::estimator::{learning_then_regular, EndToEndConfig, EstimatorMode};
use crate::optimizer::{
    best_at_point, default_b_s_grid, default_tau_grid, linspace, logspace, optimize, primary_delay, trace_region,
    OperatingPoint, OptimizationRequest, OptimizationResult, RegionCurve, RegionScheme,
};
use crate::phy::{db_to_linear, primary_success_prob, secondary_success_prob, PhyParams, SensingMode};
use crate::schemes::{service_rates, LinkSuccess, SchemeConfig, Variant};
use crate::sim::{self, measure_stability, SimConfig, SimMode};

pub const REGION_SCHEMA: &str = "region/v1";
pub const OPTIMIZE_SCHEMA: &str = "optimize/v1";
pub const SIMULATE_SCHEMA: &str = "simulate/v1";
pub const ESTIMATE_SCHEMA: &str = "estimate/v1";
pub const SWEEP_SCHEMA: &str = "sweep/v1";
pub const TRACE_SCHEMA: &str = "trace/v1";
/// Largest sweep accepted, in evaluated cells.
pub const MAX_SWEEP_CELLS: u64 = 10_000_000;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_INTERNAL: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Internal(_) => EXIT_INTERNAL,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Domain { .. } | Error::InvalidParameter(_) | Error::Precondition(_) => {
                CliError::Config(e.to_string())
            }
            _ => CliError::Internal(e.to_string()),
        }
    }
}

fn io_error(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Internal(format!("{}: {e}", path.display()))
}

// --- configuration document ------------------------------------------------

/// A grid given either explicitly or as `{ start, stop, points, log }`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GridSpec {
    List(Vec<f64>),
    Range {
        start: f64,
        stop: f64,
        points: usize,
        #[serde(default)]
        log: bool,
    },
}

impl GridSpec {
    pub fn values(&self) -> Vec<f64> {
        match self {
            GridSpec::List(v) => v.clone(),
            GridSpec::Range {
                start,
                stop,
                points,
                log: false,
            } => linspace(*start, *stop, *points),
            GridSpec::Range {
                start,
                stop,
                points,
                log: true,
            } => logspace(*start, *stop, *points),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhyConfig {
    pub bits_per_packet: f64,
    pub slot_duration: f64,
    pub bandwidth: f64,
    pub sampling_frequency: f64,
    pub sensing_snr_db: f64,
    pub noise_variance: f64,
    pub secondary_snr_db: f64,
    pub secondary_gain: f64,
    pub primary_snr_db: f64,
    pub primary_gain: f64,
    /// When set, the primary SNR is recalibrated to give this success probability.
    pub primary_success: Option<f64>,
    /// When set, the secondary SNR is recalibrated to give this success
    /// probability at sensing time `calibration_tau`.
    pub secondary_success: Option<f64>,
    pub calibration_tau: f64,
}

impl Default for PhyConfig {
    fn default() -> Self {
        PhyConfig {
            bits_per_packet: 1000.0,
            slot_duration: 1e-3,
            bandwidth: 1e6,
            sampling_frequency: 6e6,
            sensing_snr_db: -15.0,
            noise_variance: 1.0,
            secondary_snr_db: 10.0,
            secondary_gain: 1.0,
            primary_snr_db: 10.0,
            primary_gain: 1.0,
            primary_success: None,
            secondary_success: None,
            calibration_tau: 0.0,
        }
    }
}

impl PhyConfig {
    pub fn to_params(&self) -> Result<PhyParams, CliError> {
        let mut phy = PhyParams {
            bits_per_packet: self.bits_per_packet,
            slot_duration: self.slot_duration,
            bandwidth: self.bandwidth,
            sampling_frequency: self.sampling_frequency,
            sensing_snr: db_to_linear(self.sensing_snr_db),
            noise_variance: self.noise_variance,
            secondary_snr: db_to_linear(self.secondary_snr_db),
            secondary_gain: self.secondary_gain,
            primary_snr: db_to_linear(self.primary_snr_db),
            primary_gain: self.primary_gain,
        };
        phy.validate()?;
        if let Some(target) = self.primary_success {
            phy = phy.with_primary_success(target)?;
        }
        if let Some(target) = self.secondary_success {
            phy = phy.with_secondary_success(target, self.calibration_tau)?;
        }
        Ok(phy)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub lambda_p: GridSpec,
    /// Defaults to `delta T` plus 64 log-spaced points.
    pub tau: Option<GridSpec>,
    /// Defaults to 33 uniform points on `[0, 1]`.
    pub b_s: Option<GridSpec>,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            lambda_p: GridSpec::Range {
                start: 0.0,
                stop: 1.0,
                points: 50,
                log: false,
            },
            tau: None,
            b_s: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RegionConfig {
    pub schemes: Vec<Variant>,
    /// Also emit the pointwise best of S0 and S2.
    pub union: bool,
}

impl Default for RegionConfig {
    fn default() -> Self {
        RegionConfig {
            schemes: Variant::ALL.to_vec(),
            union: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizeConfig {
    pub scheme: Variant,
    pub lambda_p: f64,
    pub margin: f64,
}

impl Default for OptimizeConfig {
    fn default() -> Self {
        OptimizeConfig {
            scheme: Variant::S2,
            lambda_p: 0.3,
            margin: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateConfig {
    pub slots: u64,
    pub lambda_p: f64,
    pub lambda_s: f64,
    pub mode: SimMode,
    pub feedback_error: f64,
    pub record_traces: bool,
    pub scheme: Variant,
    /// Sensing time; optimized over the tau grid when absent.
    pub tau: Option<f64>,
    /// Access probabilities; optimized at the chosen sensing time when absent.
    pub a_s: Option<f64>,
    pub b_s: Option<f64>,
    /// Slots used by the drift test; defaults to half the run.
    pub stability_window: Option<u64>,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        SimulateConfig {
            slots: 1_000_000,
            lambda_p: 0.3,
            lambda_s: 0.1,
            mode: SimMode::Original,
            feedback_error: 0.0,
            record_traces: false,
            scheme: Variant::S1,
            tau: None,
            a_s: None,
            b_s: None,
            stability_window: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EstimateConfig {
    pub lp_slots: u64,
    pub rp_slots: u64,
    pub lambda_p: f64,
    pub lambda_s: f64,
    pub scheme: Variant,
    /// Sensing time of the regular phase; defaults to a tenth of the slot.
    pub tau: Option<f64>,
    pub feedback_error: f64,
    pub estimator_mode: EstimatorMode,
    pub use_margin: bool,
}

impl Default for EstimateConfig {
    fn default() -> Self {
        EstimateConfig {
            lp_slots: 10_000,
            rp_slots: 200_000,
            lambda_p: 0.3,
            lambda_s: 0.0,
            scheme: Variant::S1,
            tau: None,
            feedback_error: 0.0,
            estimator_mode: EstimatorMode::Unbiased,
            use_margin: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    /// Values substituted for the sensing mode's held quantity.
    pub targets: Vec<f64>,
    pub schemes: Vec<Variant>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            targets: vec![0.2],
            schemes: vec![Variant::S2, Variant::S0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    pub phy: PhyConfig,
    pub sensing: SensingMode,
    pub grids: GridConfig,
    pub region: RegionConfig,
    pub optimize: OptimizeConfig,
    pub simulate: SimulateConfig,
    pub estimate: EstimateConfig,
    pub sweep: SweepConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 1,
            output_dir: PathBuf::from("out"),
            phy: PhyConfig::default(),
            sensing: SensingMode::FixedPfa { value: 0.2 },
            grids: GridConfig::default(),
            region: RegionConfig::default(),
            optimize: OptimizeConfig::default(),
            simulate: SimulateConfig::default(),
            estimate: EstimateConfig::default(),
            sweep: SweepConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    fn tau_grid(&self, phy: &PhyParams) -> Vec<f64> {
        self.grids
            .tau
            .as_ref()
            .map_or_else(|| default_tau_grid(phy.slot_duration), GridSpec::values)
    }

    fn b_s_grid(&self) -> Vec<f64> {
        self.grids.b_s.as_ref().map_or_else(default_b_s_grid, GridSpec::values)
    }

    fn request(&self, variant: Variant, lambda_p: f64, margin: f64, phy: &PhyParams) -> OptimizationRequest {
        OptimizationRequest {
            variant,
            lambda_p,
            sensing: self.sensing,
            tau_grid: self.tau_grid(phy),
            b_s_grid: self.b_s_grid(),
            margin,
        }
    }
}

// --- command-line arguments ------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Original,
    Dominant,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EstimatorArg {
    Scaled,
    Unbiased,
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// TOML configuration file; built-in defaults when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    /// Simulation mode for `simulate`.
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    /// Estimator for `estimate`.
    #[arg(long, value_enum)]
    pub estimator_mode: Option<EstimatorArg>,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Stability-region boundaries per scheme, plus their union.
    Region(CommonArgs),
    /// Optimal access policy at one primary arrival rate.
    Optimize(CommonArgs),
    /// Monte Carlo run compared against the closed-form rates.
    Simulate(CommonArgs),
    /// Learning phase, estimation, then regular access.
    Estimate(CommonArgs),
    /// Grid sweep over targets, sensing times and arrival rates.
    Sweep(CommonArgs),
}

#[derive(Debug, Parser)]
#[command(
    name = "spectrum-access",
    version,
    about = "Sensing-based random access for cognitive radio"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

impl Command {
    fn args(&self) -> &CommonArgs {
        match self {
            Command::Region(a)
            | Command::Optimize(a)
            | Command::Simulate(a)
            | Command::Estimate(a)
            | Command::Sweep(a) => a,
        }
    }
}

/// Applies the flag overrides to a loaded configuration.
pub fn resolve_config(args: &CommonArgs) -> Result<RunConfig, CliError> {
    let mut cfg = match &args.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(dir) = &args.output_dir {
        cfg.output_dir = dir.clone();
    }
    if let Some(mode) = args.mode {
        cfg.simulate.mode = match mode {
            ModeArg::Original => SimMode::Original,
            ModeArg::Dominant => SimMode::Dominant,
        };
    }
    if let Some(mode) = args.estimator_mode {
        cfg.estimate.estimator_mode = match mode {
            EstimatorArg::Scaled => EstimatorMode::Scaled,
            EstimatorArg::Unbiased => EstimatorMode::Unbiased,
        };
    }
    Ok(cfg)
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match resolve_config(cli.command.args()).and_then(|cfg| execute(&cli.command, &cfg)) {
        Ok(files) => {
            for f in files {
                println!("wrote {}", f.display());
            }
            EXIT_OK
        }
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}

/// Runs a command against a resolved configuration; returns the files written.
pub fn execute(command: &Command, cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    fs::create_dir_all(&cfg.output_dir).map_err(|e| io_error(&cfg.output_dir, e))?;
    match command {
        Command::Region(_) => cmd_region(cfg),
        Command::Optimize(_) => cmd_optimize(cfg),
        Command::Simulate(_) => cmd_simulate(cfg),
        Command::Estimate(_) => cmd_estimate(cfg),
        Command::Sweep(_) => cmd_sweep(cfg),
    }
}

fn write_json(path: PathBuf, value: &serde_json::Value) -> Result<PathBuf, CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Internal(e.to_string()))?;
    text.push('\n');
    fs::write(&path, text).map_err(|e| io_error(&path, e))?;
    Ok(path)
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>, CliError> {
    csv::Writer::from_path(path).map_err(|e| io_error(path, e))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

// --- region ----------------------------------------------------------------

pub fn write_region_csv(curve: &RegionCurve, path: &Path) -> Result<(), CliError> {
    let mut w = csv_writer(path)?;
    let csv_err = |e: csv::Error| io_error(path, e);
    w.write_record(["schema", "lambda_p", "lambda_s", "scheme", "tau", "a_s", "b_s"])
        .map_err(csv_err)?;
    for p in &curve.points {
        w.write_record([
            REGION_SCHEMA.to_string(),
            p.lambda_p.to_string(),
            p.lambda_s.to_string(),
            p.scheme.map(|s| s.to_string()).unwrap_or_default(),
            fmt_opt(p.tau),
            fmt_opt(p.a_s),
            fmt_opt(p.b_s),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| io_error(path, e))
}

pub fn cmd_region(cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let phy = cfg.phy.to_params()?;
    let lambdas = cfg.grids.lambda_p.values();
    if lambdas.is_empty() {
        return Err(CliError::Config("grids.lambda_p is empty".into()));
    }
    let mut schemes: Vec<RegionScheme> = cfg.region.schemes.iter().map(|&v| v.into()).collect();
    if cfg.region.union {
        schemes.push(RegionScheme::Union);
    }
    let template = cfg.request(Variant::S2, 0.0, 0.0, &phy);
    let mut files = Vec::new();
    let mut summary = Vec::new();
    for scheme in schemes {
        let trace = trace_region(scheme, &lambdas, &template, &phy)?;
        let path = cfg.output_dir.join(format!("region_{}.csv", scheme.as_str()));
        write_region_csv(&trace.curve, &path)?;
        files.push(path);
        let peak = trace.curve.points.iter().map(|p| p.lambda_s).fold(0.0, f64::max);
        let mut entry = json!({
            "scheme": scheme.as_str(),
            "points": trace.curve.points.len(),
            "max_lambda_s": peak,
        });
        if scheme == RegionScheme::Union {
            entry["switch_policy"] =
                serde_json::to_value(&trace.policy).map_err(|e| CliError::Internal(e.to_string()))?;
        }
        summary.push(entry);
    }
    let doc = json!({
        "schema": REGION_SCHEMA,
        "p_bar_p_pd": primary_success_prob(&phy),
        "sensing": cfg.sensing,
        "curves": summary,
    });
    files.push(write_json(cfg.output_dir.join("region_summary.json"), &doc)?);
    Ok(files)
}

// --- optimize --------------------------------------------------------------

pub fn run_optimize(cfg: &RunConfig) -> Result<OptimizationResult, CliError> {
    let phy = cfg.phy.to_params()?;
    let o = &cfg.optimize;
    let req = cfg.request(o.scheme, o.lambda_p, o.margin, &phy);
    if o.margin > 0.0 {
        Ok(crate::optimizer::optimize_with_margin(&req, &phy)?)
    } else {
        Ok(optimize(&req, &phy)?)
    }
}

pub fn cmd_optimize(cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let result = run_optimize(cfg)?;
    match result.best {
        Some(best) => println!(
            "{}: feasible, tau* = {}, a_s* = {}, b_s* = {}, lambda_s max = {}",
            result.variant, best.sensing.tau, best.a_s, best.b_s, result.lambda_s_max
        ),
        None => println!("{}: infeasible at lambda_p = {}", result.variant, result.lambda_p),
    }
    let doc = json!({ "schema": OPTIMIZE_SCHEMA, "result": result });
    Ok(vec![write_json(cfg.output_dir.join("optimize.json"), &doc)?])
}

// --- simulate ----------------------------------------------------------------

/// The policy a `simulate` section describes, optimized where unspecified.
pub fn resolve_sim_policy(cfg: &RunConfig, phy: &PhyParams) -> Result<SchemeConfig, CliError> {
    let s = &cfg.simulate;
    let explicit = |point: OperatingPoint| -> Result<SchemeConfig, CliError> {
        let cfg = match s.scheme {
            Variant::Sc => SchemeConfig::conventional(point.sensing),
            Variant::S1 => SchemeConfig::s1(s.a_s.unwrap_or(1.0), point.sensing),
            Variant::S2 => SchemeConfig::s2(s.a_s.unwrap_or(1.0), s.b_s.unwrap_or(0.0), point.sensing),
            Variant::S0 => SchemeConfig::s0(s.a_s.unwrap_or(1.0)),
        };
        cfg.validate()?;
        Ok(cfg)
    };
    if let Some(tau) = s.tau.filter(|_| s.scheme.senses()) {
        let point = OperatingPoint::derive(phy, &cfg.sensing, s.scheme, tau)?;
        if s.a_s.is_some() || s.scheme == Variant::Sc {
            return explicit(point);
        }
        let found = best_at_point(s.scheme, s.lambda_p, 0.0, &point, &cfg.b_s_grid());
        return Ok(found.map_or_else(SchemeConfig::silent, |(c, _)| c));
    }
    if !s.scheme.senses() && s.a_s.is_some() {
        let point = OperatingPoint::derive(phy, &cfg.sensing, s.scheme, 0.0)?;
        return explicit(point);
    }
    let result = optimize(&cfg.request(s.scheme, s.lambda_p, 0.0, phy), phy)?;
    Ok(result.best.unwrap_or_else(SchemeConfig::silent))
}

pub fn cmd_simulate(cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let phy = cfg.phy.to_params()?;
    let s = &cfg.simulate;
    let policy = resolve_sim_policy(cfg, &phy)?;
    let sim_cfg = SimConfig {
        slots: s.slots,
        seed: cfg.seed,
        lambda_p: s.lambda_p,
        lambda_s: s.lambda_s,
        scheme: policy,
        phy,
        mode: s.mode,
        feedback_error: s.feedback_error,
        record_traces: s.record_traces,
    };
    sim_cfg.validate()?;
    let result = sim::run(&sim_cfg)?;
    let window = s
        .stability_window
        .unwrap_or((s.slots / 2).max(sim::MIN_STABILITY_WINDOW))
        .min(s.slots);
    let stability = measure_stability(&sim_cfg, window).ok();

    let links = LinkSuccess {
        p_bar_p_pd: primary_success_prob(&phy),
        p_bar_s_sd: secondary_success_prob(&phy, policy.sensing.tau)?,
    };
    let mu_p = crate::schemes::primary_service_rate(&policy, links.p_bar_p_pd);
    let analytic = service_rates(&policy, &links, s.lambda_p).ok();
    let gap = |emp: Option<f64>, ana: Option<f64>| match (emp, ana) {
        (Some(e), Some(a)) => Some((e - a).abs()),
        _ => None,
    };
    let emp_mu_p = result.empirical_mu_p.map(|e| e.value);
    let emp_mu_s = result.empirical_mu_s.map(|e| e.value);
    let doc = json!({
        "schema": SIMULATE_SCHEMA,
        "trace_schema": s.record_traces.then_some(TRACE_SCHEMA),
        "policy": policy,
        "seed": cfg.seed,
        "mode": s.mode,
        "slots": s.slots,
        "lambda_p": s.lambda_p,
        "lambda_s": s.lambda_s,
        "analytic": {
            "mu_p": mu_p,
            "mu_s": analytic.map(|r| r.mu_s),
            "p_empty": analytic.map(|r| r.p_empty),
            "primary_delay": primary_delay(s.lambda_p, mu_p).ok(),
        },
        "empirical": {
            "mu_p": result.empirical_mu_p,
            "mu_s": result.empirical_mu_s,
            "p_empty": result.empirical_p_empty,
            "primary_delay": result.mean_primary_delay,
            "feedback_counts": result.feedback_counts,
            "final_qp": result.final_qp,
            "final_qs": result.final_qs,
        },
        "abs_error": {
            "mu_p": gap(emp_mu_p, Some(mu_p)),
            "mu_s": gap(emp_mu_s, analytic.map(|r| r.mu_s)),
            "p_empty": gap(Some(result.empirical_p_empty.value), analytic.map(|r| r.p_empty)),
        },
        "stability": stability,
    });
    let mut files = vec![write_json(cfg.output_dir.join("simulate.json"), &doc)?];
    if let Some(rows) = &result.traces {
        let path = cfg.output_dir.join("trace.csv");
        let file = fs::File::create(&path).map_err(|e| io_error(&path, e))?;
        sim::write_trace_csv(rows, file)?;
        files.push(path);
    }
    Ok(files)
}

// --- estimate ----------------------------------------------------------------

pub fn cmd_estimate(cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let phy = cfg.phy.to_params()?;
    let e = &cfg.estimate;
    let tau = if e.scheme.senses() {
        e.tau.unwrap_or(phy.slot_duration / 10.0)
    } else {
        0.0
    };
    let sensing = if e.scheme.senses() {
        cfg.sensing.point(&phy, tau)?
    } else {
        crate::phy::SensingPoint::none()
    };
    let truth = EndToEndConfig {
        seed: cfg.seed,
        feedback_error: e.feedback_error,
        estimator_mode: e.estimator_mode,
        use_margin: e.use_margin,
        b_s_grid: cfg.b_s_grid(),
        ..EndToEndConfig::new(e.lambda_p, e.lambda_s, phy, e.scheme, sensing)
    };
    let report = learning_then_regular(e.lp_slots, e.rp_slots, &truth)?;
    let mut warnings = Vec::new();
    if report.estimation.p_bar_p_pd_est.is_none() {
        warnings.push("no feedback heard during learning: link quality unavailable");
    }
    if report.fell_back {
        warnings.push("estimated problem infeasible: secondary kept silent");
    }
    let doc = json!({
        "schema": ESTIMATE_SCHEMA,
        "link_estimate_available": report.estimation.p_bar_p_pd_est.is_some(),
        "warnings": warnings,
        "report": report,
    });
    Ok(vec![write_json(cfg.output_dir.join("estimate.json"), &doc)?])
}

// --- sweep -------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub target_kind: &'static str,
    pub target: f64,
    pub tau: f64,
    pub lambda_p: f64,
    pub scheme: Variant,
    pub feasible: bool,
    pub lambda_s: f64,
    pub a_s: Option<f64>,
    pub b_s: Option<f64>,
    pub p_fa: f64,
    pub p_md: f64,
}

/// Cells a sweep would evaluate.
pub fn sweep_cells(cfg: &RunConfig, phy: &PhyParams) -> u64 {
    let per_target = cfg
        .sweep
        .schemes
        .iter()
        .map(|v| if v.senses() { cfg.tau_grid(phy).len() as u64 } else { 1 });
    let schemes_cells: u64 = per_target.sum();
    cfg.sweep.targets.len() as u64 * cfg.grids.lambda_p.values().len() as u64 * schemes_cells
}

/// Evaluates every (target, tau, lambda_p, scheme) cell, sorted in that order.
pub fn run_sweep(cfg: &RunConfig) -> Result<Vec<SweepRow>, CliError> {
    let phy = cfg.phy.to_params()?;
    let cells = sweep_cells(cfg, &phy);
    if cells > MAX_SWEEP_CELLS {
        return Err(CliError::Config(format!(
            "sweep has {cells} cells (limit {MAX_SWEEP_CELLS}); shrink grids.tau, grids.lambda_p or sweep.targets"
        )));
    }
    let lambdas = cfg.grids.lambda_p.values();
    let b_grid = cfg.b_s_grid();
    let mut targets = cfg.sweep.targets.clone();
    targets.sort_by(f64::total_cmp);
    let mut taus = cfg.tau_grid(&phy);
    taus.insert(0, 0.0);
    let mut rows = Vec::new();
    for &target in &targets {
        let mode = cfg.sensing.with_target(target);
        for &tau in &taus {
            for &lambda_p in &lambdas {
                for &variant in &cfg.sweep.schemes {
                    if variant.senses() == (tau == 0.0) {
                        continue;
                    }
                    let point = OperatingPoint::derive(&phy, &mode, variant, tau)?;
                    let found = best_at_point(variant, lambda_p, 0.0, &point, &b_grid);
                    rows.push(SweepRow {
                        target_kind: mode.label(),
                        target,
                        tau,
                        lambda_p,
                        scheme: variant,
                        feasible: found.is_some(),
                        lambda_s: found.map_or(0.0, |(_, v)| v),
                        a_s: found.map(|(c, _)| c.a_s),
                        b_s: found.map(|(c, _)| c.b_s),
                        p_fa: point.sensing.p_fa,
                        p_md: point.sensing.p_md,
                    });
                }
            }
        }
    }
    Ok(rows)
}

/// Arrival rates at which the sensing-time and no-sensing comparisons flip.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Crossover {
    pub target: f64,
    pub tau_min: f64,
    pub tau_max: f64,
    /// `lambda_p` where S2 at `tau_min` beats S2 at `tau_max`.
    pub short_sensing_wins: Vec<f64>,
    /// `lambda_p` where S0 beats S2 at `tau_max`.
    pub no_sensing_beats_long: Vec<f64>,
    /// `lambda_p` where S0 beats S2 at every sensing time.
    pub no_sensing_beats_all: Vec<f64>,
}

pub fn find_crossovers(rows: &[SweepRow]) -> Vec<Crossover> {
    let mut targets: Vec<f64> = rows.iter().map(|r| r.target).collect();
    targets.dedup();
    let mut out = Vec::new();
    for target in targets {
        let s2: Vec<&SweepRow> = rows
            .iter()
            .filter(|r| r.target == target && r.scheme == Variant::S2)
            .collect();
        let s0: Vec<&SweepRow> = rows
            .iter()
            .filter(|r| r.target == target && r.scheme == Variant::S0)
            .collect();
        if s2.is_empty() {
            continue;
        }
        let tau_min = s2.iter().map(|r| r.tau).fold(f64::INFINITY, f64::min);
        let tau_max = s2.iter().map(|r| r.tau).fold(0.0, f64::max);
        let at = |tau: f64, lambda: f64| {
            s2.iter()
                .find(|r| r.tau == tau && r.lambda_p == lambda)
                .map_or(0.0, |r| r.lambda_s)
        };
        let best_s2 = |lambda: f64| {
            s2.iter()
                .filter(|r| r.lambda_p == lambda)
                .map(|r| r.lambda_s)
                .fold(0.0, f64::max)
        };
        let mut lambdas: Vec<f64> = s2.iter().map(|r| r.lambda_p).collect();
        lambdas.sort_by(f64::total_cmp);
        lambdas.dedup();
        let s0_at = |lambda: f64| s0.iter().find(|r| r.lambda_p == lambda).map(|r| r.lambda_s);
        out.push(Crossover {
            target,
            tau_min,
            tau_max,
            short_sensing_wins: lambdas
                .iter()
                .copied()
                .filter(|&l| at(tau_min, l) > at(tau_max, l))
                .collect(),
            no_sensing_beats_long: lambdas
                .iter()
                .copied()
                .filter(|&l| s0_at(l).is_some_and(|v| v > at(tau_max, l)))
                .collect(),
            no_sensing_beats_all: lambdas
                .iter()
                .copied()
                .filter(|&l| s0_at(l).is_some_and(|v| v > best_s2(l)))
                .collect(),
        });
    }
    out
}

pub fn cmd_sweep(cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let rows = run_sweep(cfg)?;
    let path = cfg.output_dir.join("sweep.csv");
    let mut w = csv_writer(&path)?;
    let csv_err = |e: csv::Error| io_error(&path, e);
    w.write_record([
        "schema",
        "target_kind",
        "target",
        "tau",
        "lambda_p",
        "scheme",
        "feasible",
        "lambda_s",
        "a_s",
        "b_s",
        "p_fa",
        "p_md",
    ])
    .map_err(csv_err)?;
    for r in &rows {
        w.write_record([
            SWEEP_SCHEMA.to_string(),
            r.target_kind.to_string(),
            r.target.to_string(),
            r.tau.to_string(),
            r.lambda_p.to_string(),
            r.scheme.to_string(),
            r.feasible.to_string(),
            r.lambda_s.to_string(),
            fmt_opt(r.a_s),
            fmt_opt(r.b_s),
            r.p_fa.to_string(),
            r.p_md.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| io_error(&path, e))?;
    let doc = json!({
        "schema": SWEEP_SCHEMA,
        "cells": rows.len(),
        "crossovers": find_crossovers(&rows),
    });
    Ok(vec![path, write_json(cfg.output_dir.join("crossover.json"), &doc)?])
}
