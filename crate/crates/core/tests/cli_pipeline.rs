use std::fs;
use std::path::Path;

use serde_json::Value;
use spectrum_access::cli::{self, execute, run_optimize, run_sweep, Command, CommonArgs, GridSpec, RunConfig};
use spectrum_access::optimizer::optimal_as_s1;
use spectrum_access::phy::primary_success_prob;
use spectrum_access::{SensingMode, Variant};

fn reference_config(dir: &Path) -> RunConfig {
    let mut cfg = RunConfig::from_toml(
        r#"
        [phy]
        primary_success = 0.9
        secondary_success = 0.8
        calibration_tau = 1e-6

        [sensing]
        mode = "fixed"
        p_fa = 0.2
        p_md = 0.3

        [grids]
        lambda_p = { start = 0.0, stop = 0.9, points = 10 }
        tau = [1e-6]

        [simulate]
        slots = 50000
        lambda_p = 0.3
        lambda_s = 0.05
        mode = "dominant"
        "#,
    )
    .unwrap();
    cfg.output_dir = dir.to_path_buf();
    cfg
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn region_is_deterministic_and_complete() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let files_a = execute(&Command::Region(CommonArgs::default()), &reference_config(a.path())).unwrap();
    execute(&Command::Region(CommonArgs::default()), &reference_config(b.path())).unwrap();
    for scheme in ["sc", "s1", "s2", "s0", "union"] {
        let name = format!("region_{scheme}.csv");
        let ca = fs::read(a.path().join(&name)).unwrap();
        assert_eq!(ca, fs::read(b.path().join(&name)).unwrap(), "{name}");
        let text = String::from_utf8(ca).unwrap();
        assert!(text.starts_with("schema,lambda_p,lambda_s,scheme,tau,a_s,b_s\n"));
        assert_eq!(text.lines().count(), 11);
    }
    assert_eq!(files_a.len(), 6);
    assert_eq!(read_json(&a.path().join("region_summary.json"))["schema"], "region/v1");
}

#[test]
fn empty_lambda_grid_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = reference_config(dir.path());
    cfg.grids.lambda_p = GridSpec::List(vec![]);
    let err = execute(&Command::Region(CommonArgs::default()), &cfg).unwrap_err();
    assert_eq!(err.exit_code(), cli::EXIT_CONFIG);
}

#[test]
fn optimize_reports_infeasible_without_failing() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = reference_config(dir.path());
    cfg.optimize.scheme = Variant::S1;
    cfg.optimize.lambda_p = 0.95;
    execute(&Command::Optimize(CommonArgs::default()), &cfg).unwrap();
    let doc = read_json(&dir.path().join("optimize.json"));
    assert_eq!(doc["schema"], "optimize/v1");
    assert_eq!(doc["result"]["feasible"], false);
    assert!(doc["result"]["best"].is_null());
}

#[test]
fn optimize_s1_matches_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = reference_config(dir.path());
    cfg.optimize.scheme = Variant::S1;
    cfg.optimize.lambda_p = 0.6;
    let r = run_optimize(&cfg).unwrap();
    let ppd = primary_success_prob(&cfg.phy.to_params().unwrap());
    assert!((ppd - 0.9).abs() < 1e-9);
    let expected = optimal_as_s1(0.6, 0.3, ppd).unwrap();
    assert!((r.best.unwrap().a_s - expected).abs() < 1e-12);
}

#[test]
fn margin_never_increases_throughput() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = reference_config(dir.path());
    cfg.optimize.lambda_p = 0.5;
    let plain = run_optimize(&cfg).unwrap();
    cfg.optimize.margin = 0.05;
    let tight = run_optimize(&cfg).unwrap();
    assert!(tight.lambda_s_max <= plain.lambda_s_max);
    assert!((tight.designed_delay_bound.unwrap() - 10.0).abs() < 1e-12);
}

#[test]
fn simulate_writes_trace_only_when_asked() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = reference_config(dir.path());
    execute(&Command::Simulate(CommonArgs::default()), &cfg).unwrap();
    assert!(!dir.path().join("trace.csv").exists());
    let doc = read_json(&dir.path().join("simulate.json"));
    assert_eq!(doc["schema"], "simulate/v1");
    assert!(doc["abs_error"]["mu_p"].as_f64().unwrap() < 0.02);

    cfg.simulate.record_traces = true;
    execute(&Command::Simulate(CommonArgs::default()), &cfg).unwrap();
    let trace = fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    assert!(trace.starts_with("slot,Qp,Qs,events,feedback\n"));
    assert_eq!(trace.lines().count(), 50_001);
}

#[test]
fn seed_changes_trace_not_rates() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = reference_config(dir.path());
    cfg.simulate.slots = 200_000;
    let mut rates = Vec::new();
    for seed in [1, 2] {
        cfg.seed = seed;
        execute(&Command::Simulate(CommonArgs::default()), &cfg).unwrap();
        let doc = read_json(&dir.path().join("simulate.json"));
        rates.push(doc["empirical"]["mu_p"]["value"].as_f64().unwrap());
    }
    assert_ne!(rates[0], rates[1]);
    assert!((rates[0] - rates[1]).abs() < 0.01);
}

#[test]
fn estimate_reports_learning_outcome() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = reference_config(dir.path());
    cfg.estimate.lp_slots = 2_000;
    cfg.estimate.rp_slots = 40_000;
    execute(&Command::Estimate(CommonArgs::default()), &cfg).unwrap();
    let doc = read_json(&dir.path().join("estimate.json"));
    assert_eq!(doc["schema"], "estimate/v1");
    assert_eq!(doc["link_estimate_available"], true);
    let counts = &doc["report"]["log"];
    assert!(counts["a"].as_u64() <= counts["m"].as_u64());
}

#[test]
fn single_cell_sweep_matches_optimize() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig {
        output_dir: dir.path().to_path_buf(),
        ..RunConfig::default()
    };
    cfg.sensing = SensingMode::FixedPfa { value: 0.2 };
    cfg.grids.tau = Some(GridSpec::List(vec![2e-4]));
    cfg.grids.lambda_p = GridSpec::List(vec![0.25]);
    cfg.sweep.schemes = vec![Variant::S2];
    let rows = run_sweep(&cfg).unwrap();
    assert_eq!(rows.len(), 1);
    cfg.optimize.scheme = Variant::S2;
    cfg.optimize.lambda_p = 0.25;
    let opt = run_optimize(&cfg).unwrap();
    assert_eq!(rows[0].lambda_s, opt.lambda_s_max);
    assert_eq!(rows[0].a_s, opt.best.map(|b| b.a_s));
}

#[test]
fn sweep_rows_sorted_and_versioned() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig {
        output_dir: dir.path().to_path_buf(),
        ..RunConfig::default()
    };
    cfg.sweep.targets = vec![0.3, 0.1];
    cfg.grids.lambda_p = GridSpec::Range {
        start: 0.0,
        stop: 0.5,
        points: 6,
        log: false,
    };
    execute(&Command::Sweep(CommonArgs::default()), &cfg).unwrap();
    let rows = run_sweep(&cfg).unwrap();
    let keys: Vec<(f64, f64, f64)> = rows.iter().map(|r| (r.target, r.tau, r.lambda_p)).collect();
    let mut sorted = keys.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    assert_eq!(keys, sorted);
    let csv = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert!(csv.lines().skip(1).all(|l| l.starts_with("sweep/v1,")));
    assert_eq!(read_json(&dir.path().join("crossover.json"))["schema"], "sweep/v1");
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "unknown_key = 3\n").unwrap();
    let code = cli::run_cli(["spectrum-access", "region", "--config", bad.to_str().unwrap()]);
    assert_eq!(code, cli::EXIT_CONFIG);
    assert_eq!(cli::run_cli(["spectrum-access", "frobnicate"]), cli::EXIT_CONFIG);

    let good = dir.path().join("good.toml");
    fs::write(&good, "[optimize]\nscheme = \"s0\"\nlambda_p = 0.2\n").unwrap();
    let out = dir.path().join("out");
    let code = cli::run_cli([
        "spectrum-access",
        "optimize",
        "--config",
        good.to_str().unwrap(),
        "--output-dir",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, cli::EXIT_OK);
    assert!(out.join("optimize.json").exists());
}

#[test]
fn flags_override_config() {
    let args = CommonArgs {
        seed: Some(99),
        mode: Some(cli::ModeArg::Dominant),
        estimator_mode: Some(cli::EstimatorArg::Scaled),
        ..Default::default()
    };
    let cfg = cli::resolve_config(&args).unwrap();
    assert_eq!(cfg.seed, 99);
    assert_eq!(cfg.simulate.mode, spectrum_access::SimMode::Dominant);
    assert_eq!(
        cfg.estimate.estimator_mode,
        spectrum_access::estimator::EstimatorMode::Scaled
    );
}

/// Every top-level key of an output document is declared by its schema.
fn assert_conforms(doc: &Value, schema_file: &str) {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("schemas").join(schema_file);
    let schema = read_json(&path);
    let props = schema["properties"].as_object().unwrap();
    for key in doc.as_object().unwrap().keys() {
        assert!(props.contains_key(key), "{schema_file}: undeclared key {key}");
    }
    for key in schema["required"].as_array().unwrap() {
        assert!(doc.get(key.as_str().unwrap()).is_some(), "{schema_file}: missing {key}");
    }
    assert_eq!(doc["schema"], schema["properties"]["schema"]["const"]);
}

#[test]
fn outputs_follow_published_schemas() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = reference_config(dir.path());
    cfg.estimate.lp_slots = 1_000;
    cfg.estimate.rp_slots = 20_000;
    for command in [
        Command::Region(CommonArgs::default()),
        Command::Optimize(CommonArgs::default()),
        Command::Simulate(CommonArgs::default()),
        Command::Estimate(CommonArgs::default()),
        Command::Sweep(CommonArgs::default()),
    ] {
        execute(&command, &cfg).unwrap();
    }
    for (file, schema) in [
        ("region_summary.json", "region_summary.schema.json"),
        ("optimize.json", "optimize.schema.json"),
        ("simulate.json", "simulate.schema.json"),
        ("estimate.json", "estimate.schema.json"),
        ("crossover.json", "crossover.schema.json"),
    ] {
        assert_conforms(&read_json(&dir.path().join(file)), schema);
    }
}

#[test]
fn shipped_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    let mut seen = 0;
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let cfg = RunConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        cfg.phy.to_params().unwrap();
        seen += 1;
    }
    assert!(seen >= 3);
}
