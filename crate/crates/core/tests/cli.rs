use std::io::Write;
use std::path::Path;
use std::process::{Command, Output, Stdio};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cornercase"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn simulate(dir: &Path, scenario: &str) -> String {
    let path = dir.join(format!("{scenario}.log"));
    let out = run(&["simulate", scenario, "--out", path.to_str().unwrap()]);
    assert!(matches!(code(&out), 0 | 2), "{}", stderr(&out));
    path.to_str().unwrap().to_string()
}

#[test]
fn scenarios_list_names_bundled_set() {
    let out = run(&["scenarios", "list"]);
    assert_eq!(code(&out), 0);
    let names = String::from_utf8(out.stdout).unwrap();
    for n in [
        "nominal_straight",
        "nominal_curve",
        "overtake_parked_vehicle",
        "pedestrian_crossing",
    ] {
        assert!(names.lines().any(|l| l == n), "{n} missing");
    }
}

#[test]
fn exit_codes_follow_events() {
    let dir = tempfile::tempdir().unwrap();
    let nominal = simulate(dir.path(), "nominal_straight");
    assert_eq!(code(&run(&["replay", &nominal])), 0);

    let ped = simulate(dir.path(), "pedestrian_crossing");
    let events = dir.path().join("events.jsonl");
    let metrics = dir.path().join("metrics.csv");
    let out = run(&[
        "replay",
        &ped,
        "--events",
        events.to_str().unwrap(),
        "--metrics",
        metrics.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 2, "{}", stderr(&out));
    let events = std::fs::read_to_string(events).unwrap();
    assert!(events.contains("\"kind\":\"longitudinal\""));
    let metrics = std::fs::read_to_string(metrics).unwrap();
    let mut lines = metrics.lines();
    assert_eq!(
        lines.next().unwrap(),
        "stamp,skew,lat_m,lat_avg,lat,lat_smoothed,sc,v,delta_sc,delta_v,long_flag,lat_event,long_event"
    );
    assert_eq!(lines.count(), 140);
}

#[test]
fn simulate_pipes_into_replay() {
    let mut sim = bin()
        .args(["simulate", "pedestrian_crossing", "--out", "-"])
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .unwrap();
    let out = bin()
        .args(["replay", "-"])
        .stdin(sim.stdout.take().unwrap())
        .output()
        .unwrap();
    assert_eq!(sim.wait().unwrap().code(), Some(2));
    assert_eq!(code(&out), 2, "{}", stderr(&out));
    let events = String::from_utf8(out.stdout).unwrap();
    assert_eq!(events.lines().count(), 1);
    assert!(events.contains("minimal_risk_maneuver"));
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let log = simulate(dir.path(), "overtake_parked_vehicle");
    let cfg = dir.path().join("loose.cfg");
    std::fs::write(&cfg, "# suppress lateral events\nlat_threshold = 100\n").unwrap();
    let cfg = cfg.to_str().unwrap();

    let lateral = |args: &[&str]| {
        let out = run(args);
        assert!(matches!(code(&out), 0 | 2), "{}", stderr(&out));
        String::from_utf8(out.stdout)
            .unwrap()
            .lines()
            .filter(|l| l.contains("\"kind\":\"lateral\""))
            .count()
    };
    assert_eq!(lateral(&["replay", &log]), 1);
    assert_eq!(lateral(&["replay", &log, "--config", cfg]), 0);
    assert_eq!(
        lateral(&["replay", &log, "--config", cfg, "--lat-threshold", "1.0"]),
        1
    );

    std::fs::write(dir.path().join("bad.cfg"), "lat_threshold = -1\n").unwrap();
    let out = run(&[
        "replay",
        &log,
        "--config",
        dir.path().join("bad.cfg").to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("lat_threshold"));
}

#[test]
fn calibrate_suggests_threshold_above_nominal_peak() {
    let dir = tempfile::tempdir().unwrap();
    let log = simulate(dir.path(), "nominal_curve");
    let out = run(&["calibrate", &log]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = String::from_utf8_lossy(&out.stdout).into_owned();
    let value = |key: &str| -> f64 {
        text.lines()
            .find_map(|l| l.strip_prefix(&format!("{key} = ")))
            .unwrap()
            .parse()
            .unwrap()
    };
    assert!(value("lat_threshold") > value("max_smoothed_lat"));
    assert!(value("p99_smoothed_lat") <= value("max_smoothed_lat"));
    assert!(!stderr(&out).contains("warning"));

    let ped = simulate(dir.path(), "pedestrian_crossing");
    let out = run(&["calibrate", &ped]);
    assert_eq!(code(&out), 0);
    assert!(stderr(&out).contains("warning"));
}

#[test]
fn malformed_and_empty_logs() {
    let dir = tempfile::tempdir().unwrap();
    let log = simulate(dir.path(), "nominal_straight");
    let text = std::fs::read_to_string(&log).unwrap();
    let header = text.lines().next().unwrap();

    let bad = dir.path().join("bad.log");
    let mut f = std::fs::File::create(&bad).unwrap();
    writeln!(f, "{header}").unwrap();
    writeln!(f, "{{\"type\":\"lidar\",\"stamp\":0.0}}").unwrap();
    drop(f);
    let out = run(&["replay", bad.to_str().unwrap()]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("line 2"), "{}", stderr(&out));

    let empty = dir.path().join("empty.log");
    std::fs::write(&empty, format!("{header}\n")).unwrap();
    assert_eq!(code(&run(&["replay", empty.to_str().unwrap()])), 0);
    let out = run(&["calibrate", empty.to_str().unwrap()]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("no data"));

    assert_eq!(
        code(&run(&["simulate", "no_such_scenario", "--out", "-"])),
        1
    );
}

#[test]
fn same_seed_same_bytes_from_cli() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.log");
    let b = dir.path().join("b.log");
    for p in [&a, &b] {
        run(&[
            "simulate",
            "overtake_parked_vehicle",
            "--seed",
            "9",
            "--out",
            p.to_str().unwrap(),
        ]);
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}
