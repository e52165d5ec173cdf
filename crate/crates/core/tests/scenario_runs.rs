use std::path::{Path, PathBuf};

use tgsim_core::scenario::{
    load_config, run, RunArtifacts, RunInputs, ScenarioConfig, ScenarioError,
};

fn scenario_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join(format!("../../scenarios/{name}.toml"))
}

fn config(name: &str) -> ScenarioConfig {
    load_config(&std::fs::read_to_string(scenario_path(name)).unwrap()).unwrap()
}

fn run_cfg(cfg: &ScenarioConfig, base: &Path) -> Result<RunArtifacts, ScenarioError> {
    let inputs = RunInputs::from_config(cfg, base)?;
    run(cfg, &inputs)
}

fn run_named(name: &str) -> RunArtifacts {
    run_cfg(&config(name), scenario_path(name).parent().unwrap()).unwrap()
}

/// Rows of a CSV body as raw cells, header dropped.
fn rows(a: &RunArtifacts, file: &str) -> Vec<Vec<String>> {
    a.file(file)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(String::from).collect())
        .collect()
}

fn num(s: &str) -> f64 {
    s.parse().unwrap()
}

#[test]
fn null_scenario_stays_at_nominal() {
    let a = run_named("null");
    for r in rows(&a, "frequency.csv") {
        assert_eq!(num(&r[2]), 60.0);
        assert_eq!(num(&r[3]), 0.0);
        assert_eq!(num(&r[4]), 0.0);
    }
    for r in rows(&a, "markets.csv") {
        assert_eq!(num(&r[4]), 0.0, "quantity");
        assert_eq!(num(&r[9]) + num(&r[10]), 0.0, "orders");
    }
    assert_eq!(a.summary.peak_load_kw, 0.0);
    assert_eq!(a.summary.traded_intervals, 0);
    assert_eq!(a.summary.ufls_events, 0);
}

#[test]
fn cadence_counts_match_span() {
    let a = run_named("single_house");
    let span = a.summary.span_s as usize;
    let c = a.summary.counts;
    assert_eq!(c.schedule, span / 3600);
    assert_eq!(c.market, span / 300);
    assert_eq!(c.agc, span / 4);
    assert_eq!(c.device, span / 60);
    assert_eq!(rows(&a, "markets.csv").len(), span / 300);
    assert_eq!(rows(&a, "frequency.csv").len(), span / 4);
}

/// Closed-form single-zone response with the HVAC state taken from the trace.
#[test]
fn single_house_follows_exact_thermal_response() {
    let a = run_named("single_house");
    let trace = rows(&a, "house_trace.csv");
    assert_eq!(trace.len(), 43200 / 60);
    let (r, c, q, t_out) = (2.0, 2.0, -10.0, 32.0);
    let decay = (-(1.0_f64 / 60.0) / (r * c)).exp();
    let mut on_minutes = 0;
    for w in trace.windows(2) {
        let (t0, on) = (num(&w[0][2]), w[0][3] == "1" || w[0][3] == "true");
        let eq = t_out + if on { q * r } else { 0.0 };
        let expected = eq + (t0 - eq) * decay;
        assert!(
            (num(&w[1][2]) - expected).abs() < 1e-9,
            "at {}: {} vs {expected}",
            w[1][0],
            w[1][2]
        );
        on_minutes += on as usize;
    }
    assert!(on_minutes > 0, "house never ran");
    for row in &trace {
        let t = num(&row[2]);
        assert!(
            (19.0..=25.0).contains(&t),
            "indoor temperature {t} left the comfort range"
        );
    }
}

#[test]
fn repeated_runs_are_byte_identical() {
    let a = run_named("two_area");
    let b = run_named("two_area");
    assert_eq!(a.files, b.files);
    assert_eq!(a.manifest, b.manifest);
}

#[test]
fn seed_only_touches_random_outputs() {
    let mut cfg = config("null");
    let base = run_cfg(&cfg, Path::new(".")).unwrap();
    cfg.seed += 1;
    let other = run_cfg(&cfg, Path::new(".")).unwrap();
    for (name, body) in &base.files {
        if name == "summary.json" || name == "manifest.json" {
            assert_ne!(body, &other.files[name], "{name}");
        } else {
            assert_eq!(body, &other.files[name], "{name} changed with the seed");
        }
    }

    let mut cfg = config("frequency_event");
    let a = run_cfg(&cfg, Path::new(".")).unwrap();
    cfg.seed = 99;
    let b = run_cfg(&cfg, Path::new(".")).unwrap();
    assert_ne!(a.file("load.csv"), b.file("load.csv"));
    assert_eq!(a.summary.counts, b.summary.counts);
}

#[test]
fn cleared_quantity_is_conserved() {
    for name in ["two_area", "price_instability"] {
        let a = run_named(name);
        for r in rows(&a, "markets.csv") {
            let (q, cap, supply, demand, unserved) =
                (num(&r[4]), num(&r[5]), num(&r[6]), num(&r[7]), num(&r[8]));
            assert!(
                (unserved - (demand - q).max(0.0)).abs() < 1e-9,
                "{name} {r:?}"
            );
            assert!(q <= supply + 1e-9 && q <= demand + 1e-9, "{name} {r:?}");
            assert!(cap >= 0.0);
        }
    }
}

#[test]
fn module_failure_names_tick_and_module() {
    let mut cfg = config("price_instability");
    // A scarcity step priced under the wholesale anchor is rejected when the
    // first hour is scheduled.
    cfg.areas[0].feeders[0].scarcity_steps = vec![(10.0, 50.0)];
    match run_cfg(&cfg, Path::new(".")) {
        Err(e @ ScenarioError::Module { .. }) => {
            let text = e.to_string();
            assert!(text.starts_with("t = 0 s"), "{text}");
        }
        other => panic!("expected a module error, got {other:?}"),
    }
}

#[test]
fn csv_inputs_match_constant_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let mut temps = String::from("# unit=degC\ntime,value\n");
    let mut prices = String::from("# unit=$/MWh\ntime,value\n");
    for h in 0..=12 {
        // One hour missing in each file; the ingest fills it linearly.
        if h == 5 {
            continue;
        }
        temps.push_str(&format!("1970-01-01T{h:02}:00:00Z,32.0\n"));
        prices.push_str(&format!("1970-01-01T{h:02}:00:00Z,30.0\n"));
    }
    std::fs::write(dir.path().join("t_out.csv"), temps).unwrap();
    std::fs::write(dir.path().join("da.csv"), prices).unwrap();

    let constant = config("single_house");
    let mut from_files = constant.clone();
    from_files.inputs.outdoor_temperature_c = None;
    from_files.inputs.da_price = None;
    from_files.inputs.outdoor_temperature_csv = Some("t_out.csv".into());
    from_files.inputs.da_price_csv = Some("da.csv".into());

    let a = run_cfg(&constant, Path::new(".")).unwrap();
    let b = run_cfg(&from_files, dir.path()).unwrap();
    for name in [
        "frequency.csv",
        "markets.csv",
        "load.csv",
        "house_trace.csv",
        "settlement.csv",
    ] {
        assert_eq!(a.file(name), b.file(name), "{name}");
    }

    let mut missing = from_files.clone();
    missing.inputs.outdoor_temperature_csv = Some("nope.csv".into());
    assert!(matches!(
        run_cfg(&missing, dir.path()),
        Err(ScenarioError::Ingest(_))
    ));
}

#[test]
fn unit_mismatch_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("t_out.csv"),
        "# unit=kW\ntime,value\n1970-01-01T00:00:00Z,1\n1970-01-01T01:00:00Z,1\n",
    )
    .unwrap();
    let mut cfg = config("single_house");
    cfg.inputs.outdoor_temperature_c = None;
    cfg.inputs.outdoor_temperature_csv = Some("t_out.csv".into());
    let err = run_cfg(&cfg, dir.path()).unwrap_err();
    assert!(err.to_string().contains("kW"), "{err}");
}

#[test]
fn frequency_event_triggers_load_shedding() {
    let armed = run_named("frequency_event");
    let disarmed = run_named("frequency_event_disarmed");
    assert!(armed.summary.ufls_events >= 1);
    // The excursion is still counted; with no armed load nothing drops.
    assert_eq!(disarmed.summary.max_shed_kw, 0.0);
    assert!(armed.summary.max_shed_kw > 0.0);
    assert!(armed.summary.min_frequency > disarmed.summary.min_frequency - 0.1);
    let events = armed.file("events.jsonl").unwrap();
    assert!(events.lines().any(|l| l.contains("\"ufls\"")));
}

#[test]
fn invalid_config_lists_every_problem() {
    let text =
        "schema_version = 1\nspan_s = 3600\n[interconnection]\nd = 0.5\n[time]\nagc_tick_s = 7\n";
    let err = load_config(text).unwrap_err();
    let msg = err.to_string();
    assert!(msg.contains("interconnection.d"), "{msg}");
    assert!(msg.contains("time."), "{msg}");
    assert!(msg.contains("areas"), "{msg}");
}
