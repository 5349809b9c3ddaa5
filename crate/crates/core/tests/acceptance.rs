//! Acceptance suite: one line per criterion; any failure outside
//! `KNOWN_LIMITS` makes the run exit non-zero.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use spectrum_access::cli::{find_crossovers, run_sweep, GridSpec, RunConfig};
use spectrum_access::estimator::{estimate, learning_then_regular, EndToEndConfig, EstimatorMode, FeedbackLog};
use spectrum_access::mathcore::{q_func, q_inv, solve_fractional, FractionalProgram};
use spectrum_access::optimizer::{
    best_at_point, default_b_s_grid, optimal_as_s1, optimal_as_s2_given, optimize, trace_region, OperatingPoint,
    OptimizationRequest, RegionScheme,
};
use spectrum_access::phy::{
    pfa_for_target_pmd, pmd_for_target_pfa, primary_success_prob, roc_from_threshold, secondary_success_prob,
    PhyParams, SensingMode, SensingPoint,
};
use spectrum_access::schemes::{primary_service_rate, service_rates, LinkSuccess, SchemeConfig, Variant};
use spectrum_access::sim::{self, compare_dominant, measure_stability, SimConfig, SimMode};

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Index of the grid maximizer of `f` on `0, step, 2 step, ..` up to `hi`.
fn grid_argmax(hi: f64, step: f64, f: impl Fn(f64) -> f64) -> (f64, f64) {
    let n = (hi / step).floor() as usize;
    let mut best = (f64::NEG_INFINITY, 0.0);
    for i in 0..=n + 1 {
        let x = if i == n + 1 { hi } else { i as f64 * step };
        let v = f(x);
        if v > best.0 {
            best = (v, x);
        }
    }
    (best.1, best.0)
}

fn c1_fractional_solver() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let (mut worst_x, mut worst_gap) = (0.0f64, 0.0f64);
    for _ in 0..1000 {
        let c = rng.random_range(0.05..1.0);
        let d = rng.random_range(c..c + 1.0);
        let p = FractionalProgram {
            a: rng.random_range(0.05..1.0),
            f: rng.random_range(0.01..1.0),
            c,
            d,
            k: rng.random_range(0.05..5.0),
            w: rng.random_range(0.0..d),
        };
        let s = solve_fractional(&p).map_err(|e| e.to_string())?;
        let (x_grid, v_grid) = grid_argmax(p.upper_bound(), 1e-5, |x| p.objective(x));
        worst_x = worst_x.max((s.x_star - x_grid).abs());
        worst_gap = worst_gap.max(v_grid - s.objective);
    }
    let secs = start.elapsed().as_secs_f64();
    check(
        worst_x <= 2e-5 && worst_gap <= 1e-6 && secs < 10.0,
        format!("max |dx| = {worst_x:.2e}, max gap = {worst_gap:.2e}, {secs:.2} s"),
    )
}

fn c2_closed_forms() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let (mut worst_s1, mut worst_s2) = (0.0f64, 0.0f64);
    for _ in 0..500 {
        let p_pd: f64 = rng.random_range(0.3..1.0);
        let p_md: f64 = rng.random_range(0.0..1.0);
        let p_fa: f64 = rng.random_range(0.0..0.95);
        let b: f64 = rng.random_range(0.0..1.0);

        let lam1 = rng.random_range(0.0..p_pd);
        let a1 = optimal_as_s1(lam1, p_md, p_pd).map_err(|e| e.to_string())?;
        let mu1 = |x: f64| p_pd * (1.0 - x * p_md);
        let cap1 = if p_md > 0.0 {
            ((1.0 - lam1 / p_pd) / p_md).min(1.0)
        } else {
            1.0
        };
        let (g1, _) = grid_argmax(cap1, 1e-5, |x| x * (1.0 - p_fa) * (1.0 - lam1 / mu1(x)));
        worst_s1 = worst_s1.max((a1 - g1).abs());

        let d0 = p_md + (1.0 - p_md) * (1.0 - b);
        let lam2 = rng.random_range(0.0..p_pd * d0);
        let a2 = optimal_as_s2_given(b, lam2, p_md, p_fa, p_pd).map_err(|e| e.to_string())?;
        let mu2 = |x: f64| p_pd * (p_md * (1.0 - x) + (1.0 - p_md) * (1.0 - b));
        let cap2 = if p_md > 0.0 {
            ((d0 - lam2 / p_pd) / p_md).min(1.0)
        } else {
            1.0
        };
        let (g2, _) = grid_argmax(cap2, 1e-5, |x| (x * (1.0 - p_fa) + b * p_fa) * (1.0 - lam2 / mu2(x)));
        worst_s2 = worst_s2.max((a2 - g2).abs());
    }
    check(
        worst_s1 <= 2e-5 && worst_s2 <= 2e-5,
        format!("max |da| S1 = {worst_s1:.2e}, S2 = {worst_s2:.2e}"),
    )
}

struct Point {
    p_md: f64,
    p_fa: f64,
    p_pd: f64,
    p_sd: f64,
    lambda_p: f64,
}

const SIM_POINTS: [Point; 5] = [
    Point {
        p_md: 0.3,
        p_fa: 0.2,
        p_pd: 0.9,
        p_sd: 0.8,
        lambda_p: 0.3,
    },
    Point {
        p_md: 0.1,
        p_fa: 0.05,
        p_pd: 0.7,
        p_sd: 0.9,
        lambda_p: 0.2,
    },
    Point {
        p_md: 0.5,
        p_fa: 0.4,
        p_pd: 0.95,
        p_sd: 0.6,
        lambda_p: 0.1,
    },
    Point {
        p_md: 0.2,
        p_fa: 0.1,
        p_pd: 0.6609,
        p_sd: 0.75,
        lambda_p: 0.3,
    },
    Point {
        p_md: 0.05,
        p_fa: 0.3,
        p_pd: 0.8,
        p_sd: 0.5,
        lambda_p: 0.05,
    },
];
const SENSING_TAU: f64 = 1e-4;

fn calibrated(p_pd: f64, p_sd: f64) -> PhyParams {
    PhyParams::default()
        .with_primary_success(p_pd)
        .and_then(|p| p.with_secondary_success(p_sd, SENSING_TAU))
        .expect("calibration")
}

fn c3_sim_vs_analysis() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    let mut failures = Vec::new();
    for (i, pt) in SIM_POINTS.iter().enumerate() {
        let phy = calibrated(pt.p_pd, pt.p_sd);
        let sensing = SensingPoint::new(SENSING_TAU, pt.p_fa, pt.p_md).unwrap();
        for variant in Variant::ALL {
            let point = OperatingPoint {
                sensing: if variant.senses() {
                    sensing
                } else {
                    SensingPoint::none()
                },
                links: LinkSuccess {
                    p_bar_p_pd: primary_success_prob(&phy),
                    p_bar_s_sd: secondary_success_prob(&phy, if variant.senses() { SENSING_TAU } else { 0.0 }).unwrap(),
                },
            };
            let (scheme, _) = best_at_point(variant, pt.lambda_p, 0.0, &point, &default_b_s_grid())
                .ok_or(format!("point {i} {variant} infeasible"))?;
            let rates = service_rates(&scheme, &point.links, pt.lambda_p).map_err(|e| e.to_string())?;
            let cfg = SimConfig {
                mode: SimMode::Dominant,
                ..SimConfig::new(1_000_000, 3000 + i as u64, pt.lambda_p, 0.0, scheme, phy)
            };
            let r = sim::run(&cfg).map_err(|e| e.to_string())?;
            for (name, est, target) in [
                ("mu_p", r.empirical_mu_p.unwrap(), rates.mu_p),
                ("mu_s", r.empirical_mu_s.unwrap(), rates.mu_s),
            ] {
                let z = (est.value - target).abs() / est.std_error;
                worst = worst.max(z);
                if z > 3.0 {
                    failures.push(format!(
                        "point {i} {variant} {name}: {:.5} vs {target:.5} ({z:.2} SE)",
                        est.value
                    ));
                }
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    check(
        failures.is_empty() && secs < 120.0,
        format!("40 comparisons, worst {worst:.2} SE, {secs:.1} s {failures:?}"),
    )
}

fn c4_stability_boundary() -> Outcome {
    let phy = calibrated(0.9, 0.8);
    let scheme = SchemeConfig::s1(0.5, SensingPoint::new(SENSING_TAU, 0.2, 0.3).unwrap());
    let mu_p = primary_service_rate(&scheme, primary_success_prob(&phy));
    let (slots, window) = (2_000_000, 1_000_000);
    let report = |lambda_p: f64, seed: u64| {
        let cfg = SimConfig {
            mode: SimMode::Dominant,
            ..SimConfig::new(slots, seed, lambda_p, 0.0, scheme, phy)
        };
        measure_stability(&cfg, window).expect("stability run")
    };
    let (mut lo, mut hi) = (mu_p - 0.1, (mu_p + 0.1).min(1.0));
    for step in 0..8 {
        let mid = 0.5 * (lo + hi);
        if report(mid, 400 + step).empirical_stable {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let threshold = 0.5 * (lo + hi);
    let mut details = vec![format!("threshold {threshold:.4} vs mu_p {mu_p:.4}")];
    let mut ok = (threshold - mu_p).abs() <= 0.01;
    for (k, gap) in [-0.05, -0.02, 0.02, 0.05].into_iter().enumerate() {
        let r = report(mu_p + gap, 500 + k as u64);
        let good = if gap < 0.0 {
            r.drift <= 1e-3
        } else {
            (r.drift - gap).abs() <= 0.005
        };
        ok &= good;
        details.push(format!("drift({gap:+}) = {:.5}", r.drift));
    }
    check(ok, details.join(", "))
}

fn reference_request(variant: Variant, b_s_grid: Vec<f64>) -> (OptimizationRequest, PhyParams) {
    let phy = calibrated(0.9, 0.8);
    let req = OptimizationRequest {
        variant,
        lambda_p: 0.0,
        sensing: SensingMode::Fixed { p_fa: 0.2, p_md: 0.3 },
        tau_grid: vec![SENSING_TAU],
        b_s_grid,
        margin: 0.0,
    };
    (req, phy)
}

fn boundary(scheme: RegionScheme, lambdas: &[f64], req: &OptimizationRequest, phy: &PhyParams) -> Vec<f64> {
    trace_region(scheme, lambdas, req, phy)
        .unwrap()
        .curve
        .points
        .iter()
        .map(|p| p.lambda_s)
        .collect()
}

fn c5_region_structure() -> Outcome {
    let lambdas: Vec<f64> = (0..50).map(|i| 0.9 * i as f64 / 49.0).collect();
    let mut ok = true;
    let mut notes = Vec::new();

    let reference = reference_request(Variant::S2, default_b_s_grid());
    let generic_phy = PhyParams::default().with_primary_success(0.9).unwrap();
    let generic = OptimizationRequest::new(Variant::S2, 0.0, SensingMode::FixedPfa { value: 0.2 }, &generic_phy);
    for (label, req, phy) in [
        ("reference", &reference.0, &reference.1),
        ("fixed-pfa", &generic, &generic_phy),
    ] {
        let s2 = boundary(RegionScheme::S2, &lambdas, req, phy);
        let s1 = boundary(RegionScheme::S1, &lambdas, req, phy);
        let sc = boundary(RegionScheme::Sc, &lambdas, req, phy);
        let s0 = boundary(RegionScheme::S0, &lambdas, req, phy);
        let union = boundary(RegionScheme::Union, &lambdas, req, phy);
        let ordered = s2.iter().zip(&s1).all(|(a, b)| a >= b && *b >= 0.0);
        let covers = (0..lambdas.len()).all(|i| [s2[i], s1[i], sc[i], s0[i]].iter().all(|v| union[i] >= *v));
        let forced = OptimizationRequest {
            b_s_grid: vec![0.0],
            ..req.clone()
        };
        let s2_forced = boundary(RegionScheme::S2, &lambdas, &forced, phy);
        let equal = s2_forced.iter().zip(&s1).all(|(a, b)| (a - b).abs() <= 1e-12);
        ok &= ordered && covers && equal;
        notes.push(format!(
            "{label}: S2>=S1>=0 {ordered}, union covers {covers}, b_s=0 equal {equal}"
        ));
    }

    let (perfect, phy) = reference_request(Variant::S2, default_b_s_grid());
    let perfect = OptimizationRequest {
        sensing: SensingMode::Fixed { p_fa: 0.0, p_md: 0.0 },
        ..perfect
    };
    let curves: Vec<Vec<f64>> = [RegionScheme::Sc, RegionScheme::S1, RegionScheme::S2]
        .iter()
        .map(|s| boundary(*s, &lambdas, &perfect, &phy))
        .collect();
    let coincide = (0..lambdas.len())
        .all(|i| (curves[0][i] - curves[1][i]).abs() <= 1e-12 && (curves[1][i] - curves[2][i]).abs() <= 1e-12);
    ok &= coincide;
    notes.push(format!("perfect sensing coincide {coincide}"));
    check(ok, notes.join("; "))
}

fn non_increasing(values: &[f64]) -> bool {
    values.windows(2).all(|w| w[1] <= w[0] + 1e-12)
}

fn c6_monotonicity() -> Outcome {
    let lambdas: Vec<f64> = (0..50).map(|i| 0.9 * i as f64 / 50.0).collect();
    let mut notes = Vec::new();
    let mut ok = true;
    for variant in Variant::ALL {
        let (req, phy) = reference_request(variant, default_b_s_grid());
        let a_s: Vec<f64> = lambdas
            .iter()
            .filter_map(|&l| {
                optimize(
                    &OptimizationRequest {
                        lambda_p: l,
                        ..req.clone()
                    },
                    &phy,
                )
                .unwrap()
                .best
            })
            .map(|c| c.a_s)
            .collect();
        let generic_phy = PhyParams::default().with_primary_success(0.9).unwrap();
        let generic = OptimizationRequest::new(variant, 0.0, SensingMode::FixedPfa { value: 0.2 }, &generic_phy);
        let region = boundary(variant.into(), &lambdas, &generic, &generic_phy);
        let good = non_increasing(&a_s) && non_increasing(&region);
        ok &= good;
        notes.push(format!("{variant}: {good}"));
    }
    check(ok, notes.join(", "))
}

fn c7_crossover() -> Outcome {
    let mut cfg = RunConfig::default();
    cfg.phy.primary_success = Some(0.6609);
    cfg.sensing = SensingMode::FixedPfa { value: 0.2 };
    cfg.sweep.targets = vec![0.2];
    cfg.sweep.schemes = vec![Variant::S2, Variant::S0];
    cfg.grids.lambda_p = GridSpec::Range {
        start: 0.0,
        stop: 0.66,
        points: 34,
        log: false,
    };
    let rows = run_sweep(&cfg).map_err(|e| e.to_string())?;
    let x = find_crossovers(&rows).pop().ok_or("no crossover record")?;
    let small = x.short_sensing_wins.iter().copied().find(|&l| l <= 0.1);
    let s0 = x.no_sensing_beats_long.first().copied();
    check(
        small.is_some() && s0.is_some(),
        format!("S2(tau_min) > S2(tau_max) at lambda_p = {small:?}; S0 > S2(tau_max) at lambda_p = {s0:?}"),
    )
}

fn c8_delay() -> Outcome {
    let phy = calibrated(0.9, 0.8);
    let mu_p = primary_success_prob(&phy);
    let mut notes = Vec::new();
    let mut ok = true;
    for (k, frac) in [0.1, 0.3, 0.5].into_iter().enumerate() {
        let lambda_p = frac * mu_p;
        let r = sim::run(&SimConfig::new(
            1_000_000,
            800 + k as u64,
            lambda_p,
            0.0,
            SchemeConfig::silent(),
            phy,
        ))
        .map_err(|e| e.to_string())?;
        let expected = (1.0 - lambda_p) / (mu_p - lambda_p);
        let got = r.mean_primary_delay.ok_or("no departures")?;
        let rel = (got - expected).abs() / expected;
        ok &= rel <= 0.05;
        notes.push(format!("{frac}mu: {got:.4} vs {expected:.4} ({:.2}%)", 100.0 * rel));
    }
    check(ok, notes.join(", "))
}

fn c9_estimator() -> Outcome {
    let phy = calibrated(0.9, 0.8);
    let lambda_p = 0.3;
    let mut notes = Vec::new();
    let mut ok = true;
    for (k, p_e) in [0.0, 0.1, 0.3].into_iter().enumerate() {
        let cfg = SimConfig {
            feedback_error: p_e,
            ..SimConfig::new(100_000, 900 + k as u64, lambda_p, 0.0, SchemeConfig::silent(), phy)
        };
        let r = sim::run(&cfg).map_err(|e| e.to_string())?;
        let log = FeedbackLog::from_counts(&r.feedback_counts, p_e).map_err(|e| e.to_string())?;
        let est = estimate(&log, EstimatorMode::Unbiased).map_err(|e| e.to_string())?;
        let q = lambda_p * (1.0 - p_e);
        let se = (q * (1.0 - q) / 1e5).sqrt() / (1.0 - p_e);
        let dl = (est.lambda_p_est - lambda_p).abs();
        let dp = (est.p_bar_p_pd_est.unwrap() - 0.9).abs();
        ok &= dl <= 4.0 * se && dp <= 0.01;
        notes.push(format!("P_e={p_e}: |dl| = {:.2} SE, |dP| = {dp:.4}", dl / se));
    }
    for seed in 0..3 {
        let truth = EndToEndConfig {
            seed: 40 + seed,
            feedback_error: 0.1,
            ..EndToEndConfig::new(
                0.55,
                0.0,
                phy,
                Variant::S1,
                SensingPoint::new(SENSING_TAU, 0.2, 0.3).unwrap(),
            )
        };
        let rep = learning_then_regular(1_000, 200_000, &truth).map_err(|e| e.to_string())?;
        ok &= rep.rp_stability.empirical_stable;
        notes.push(format!(
            "LP->RP seed {seed}: margin {:.3}, a_s {:.3}, stable {}",
            rep.margin, rep.policy.a_s, rep.rp_stability.empirical_stable
        ));
    }
    check(ok, notes.join(", "))
}

fn c10_dominance() -> Outcome {
    let phy = calibrated(0.9, 0.8);
    let scheme = SchemeConfig::s2(0.6, 0.3, SensingPoint::new(SENSING_TAU, 0.2, 0.3).unwrap());
    let mut failures = Vec::new();
    for seed in 0..10 {
        let cfg = SimConfig {
            record_traces: true,
            ..SimConfig::new(100_000, 1000 + seed, 0.3, 0.2, scheme, phy)
        };
        let r = compare_dominant(&cfg).map_err(|e| e.to_string())?;
        if !(r.dominant_ge_original && r.saturation_indistinguishable) {
            failures.push(format!("seed {seed}: {r:?}"));
        }
    }
    check(failures.is_empty(), format!("10 seeds x 1e5 slots {failures:?}"))
}

fn c11_roc_consistency() -> Outcome {
    let phy = PhyParams::default();
    let mut worst_roc = 0.0f64;
    for i in 0..=40 {
        let tau = 1e-6 * 10f64.powf(3.0 * i as f64 / 40.0) * 0.999;
        for j in 0..=40 {
            let epsilon = 0.9 + 0.2 * j as f64 / 40.0;
            let point = roc_from_threshold(&phy, epsilon, tau).map_err(|e| e.to_string())?;
            if point.p_fa > 0.0 && point.p_fa < 1.0 {
                let via_fa = pmd_for_target_pfa(&phy, point.p_fa, tau).map_err(|e| e.to_string())?;
                worst_roc = worst_roc.max((via_fa.p_md - point.p_md).abs());
            }
            if point.p_md > 0.0 && point.p_md < 1.0 {
                let via_md = pfa_for_target_pmd(&phy, point.p_md, tau).map_err(|e| e.to_string())?;
                worst_roc = worst_roc.max((via_md.p_fa - point.p_fa).abs());
            }
        }
    }
    // Near z = -6, Q(z) = 1 - 1e-9 and adjacent doubles are 1.1e-16 apart, so
    // one representable Q value covers about 1.8e-8 of z.
    let mut worst_q = 0.0f64;
    let mut worst_z = 0.0;
    let mut holds_from = -6.0;
    for i in 0..=1200 {
        let z = -6.0 + i as f64 * 0.01;
        let back = q_inv(q_func(z).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        let err = (back - z).abs();
        if err > worst_q {
            worst_q = err;
            worst_z = z;
        }
        if err > 1e-9 {
            holds_from = z + 0.01;
        }
    }
    check(
        worst_roc <= 1e-9 && worst_q <= 1e-9,
        format!(
            "ROC roundtrip {worst_roc:.2e}; q_inv(q_func(z)) worst {worst_q:.2e} at z = {worst_z:.2}, \
             within 1e-9 on [{holds_from:.2}, 6]"
        ),
    )
}

/// Criteria that cannot be met in double precision; they still print FAIL
/// but do not fail the run. An unexpected pass is reported.
const KNOWN_LIMITS: &[(usize, &str)] = &[(
    11,
    "below z = -5.6 the double nearest Q(z) = 1 - t pins z down only to about 1e-8",
)];

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 11] = [
        ("fractional-program solver vs grid", c1_fractional_solver),
        ("closed-form access probabilities vs grid", c2_closed_forms),
        ("simulation vs closed-form service rates", c3_sim_vs_analysis),
        ("empirical stability boundary", c4_stability_boundary),
        ("stability-region structure", c5_region_structure),
        ("monotonicity in lambda_p", c6_monotonicity),
        ("sensing-time and no-sensing crossovers", c7_crossover),
        ("primary delay formula", c8_delay),
        ("estimator consistency and protected access", c9_estimator),
        ("dominant-system coupling", c10_dominance),
        ("ROC and Q-function roundtrips", c11_roc_consistency),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let number = i + 1;
        let id = format!("criterion {number}");
        if !filter.is_empty() && !filter.iter().any(|p| p == &number.to_string()) {
            continue;
        }
        let known = KNOWN_LIMITS.iter().find(|(n, _)| *n == number).map(|(_, why)| *why);
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match (outcome, known) {
            (Ok(detail), None) => println!("{id:>12} PASS  {name} [{secs:.1}s] {detail}"),
            (Ok(detail), Some(_)) => println!("{id:>12} PASS  {name} [{secs:.1}s] {detail} (listed as a known limit)"),
            (Err(detail), Some(why)) => {
                println!("{id:>12} FAIL  {name} [{secs:.1}s] {detail}");
                println!("{:>12}       known limit: {why}", "");
            }
            (Err(detail), None) => {
                failed += 1;
                println!("{id:>12} FAIL  {name} [{secs:.1}s] {detail}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
