use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use carid::models::VehicleParams;
use carid::sysid::{load_log, ParamsDocument};
use tempfile::TempDir;

fn carid(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_carid")).args(args).output().expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn reference_params(dir: &Path) -> PathBuf {
    let doc = ParamsDocument::from_params(&VehicleParams::reference());
    write(dir, "params.json", &serde_json::to_string_pretty(&doc).unwrap())
}

/// A reduced battery so debug-build tests stay quick.
fn small_library(dir: &Path) -> PathBuf {
    write(
        dir,
        "library.json",
        r#"{"step_levels": [0.25, 0.4], "coast_launch": [0.5, 1.0], "coast_cycles": 2,
            "steer_grid_step": 0.5, "sine_duration": 8.0, "ramp_steering": [0.6], "ramp_duration": 8.0}"#,
    )
}

fn generate(dir: &Path, out: &str, seed: &str) -> PathBuf {
    let params = reference_params(dir);
    let noise = write(dir, "noise.json", r#"{"v_enc": 0.02, "omega_imu": 0.01, "mocap_x": 2e-5, "mocap_y": 2e-5, "mocap_eta": 1e-4}"#);
    let lib = small_library(dir);
    let out = dir.join(out);
    let o = carid(&[
        "generate",
        "--params", params.to_str().unwrap(),
        "--noise", noise.to_str().unwrap(),
        "--seed", seed,
        "--out", out.to_str().unwrap(),
        "--library", lib.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    out
}

fn csv_files(dir: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    for e in fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            out.extend(csv_files(&p));
        } else if p.extension().is_some_and(|x| x == "csv") {
            out.push(p);
        }
    }
    out.sort();
    out
}

#[test]
fn generate_writes_tagged_suite_deterministically() {
    let tmp = TempDir::new().unwrap();
    let a = generate(tmp.path(), "a", "5");
    let b = generate(tmp.path(), "b", "5");
    let c = generate(tmp.path(), "c", "6");
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(a.join("manifest.json")).unwrap()).unwrap();
    let logs = manifest["logs"].as_array().unwrap();
    // 2 steps + 2 coast-downs + 5 steering + 1 sine + 1 ramp.
    assert_eq!(logs.len(), 11);
    for kind in ["step", "coast", "steer", "sine", "mocap"] {
        assert!(logs.iter().any(|l| l["experiment"] == kind), "{kind}");
    }
    let (fa, fb) = (csv_files(&a), csv_files(&b));
    assert_eq!(fa.len(), 11);
    for (x, y) in fa.iter().zip(&fb) {
        assert_eq!(fs::read(x).unwrap(), fs::read(y).unwrap(), "{}", x.display());
    }
    assert_ne!(fs::read(&fa[0]).unwrap(), fs::read(&csv_files(&c)[0]).unwrap());
    assert!(a.join("run_manifest.json").is_file());
}

#[test]
fn generate_rejects_unwritable_output() {
    let tmp = TempDir::new().unwrap();
    let params = reference_params(tmp.path());
    let noise = write(tmp.path(), "noise.json", "{}");
    let blocker = write(tmp.path(), "blocker", "not a directory");
    let o = carid(&[
        "generate", "--params", params.to_str().unwrap(), "--noise", noise.to_str().unwrap(),
        "--seed", "1", "--out", blocker.join("sub").to_str().unwrap(),
    ]);
    assert!(!o.status.success());
}

#[test]
fn fit_full_suite_populates_every_group() {
    let tmp = TempDir::new().unwrap();
    let suite = generate(tmp.path(), "suite", "3");
    let out = tmp.path().join("fit/params.json");
    let o = carid(&["fit", "--logs", suite.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let doc: ParamsDocument = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    doc.to_vehicle_params().unwrap();
    let report = tmp.path().join("fit/params_report");
    for f in ["fit_friction.svg", "fit_motor.svg", "fit_steering.svg", "fit_tire_front.svg", "fit_tire_rear.svg",
              "loss_friction.csv", "loss_tire_rear.csv", "fit_report.json", "run_manifest.json"] {
        assert!(report.join(f).is_file(), "{f}");
    }
    let trace = fs::read_to_string(report.join("loss_friction.csv")).unwrap();
    assert!(trace.starts_with("iteration,loss\n0,"));
}

#[test]
fn fit_without_mocap_marks_tire_absent() {
    let tmp = TempDir::new().unwrap();
    let suite = generate(tmp.path(), "suite", "3");
    // Fall back to directory tagging with the mocap logs removed.
    fs::remove_file(suite.join("manifest.json")).unwrap();
    fs::remove_dir_all(suite.join("mocap")).unwrap();
    let out = tmp.path().join("p.json");
    let o = carid(&["fit", "--logs", suite.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stderr(&o).contains("warning: tire skipped"));
    let doc: serde_json::Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert!(doc["tire"].is_null());
    assert!(doc["friction"].is_object() && doc["steering"].is_object());

    // Asking for the tire stage explicitly turns the gap into a failure.
    let o = carid(&["fit", "--logs", suite.to_str().unwrap(), "--out", out.to_str().unwrap(), "--stages", "friction,tire"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("tire did not complete"));
}

#[test]
fn fit_rejects_empty_directory_and_bad_logs() {
    let tmp = TempDir::new().unwrap();
    let empty = tmp.path().join("empty");
    fs::create_dir(&empty).unwrap();
    let out = tmp.path().join("p.json");
    let o = carid(&["fit", "--logs", empty.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("no logs found"));

    let bad = tmp.path().join("bad/coast");
    fs::create_dir_all(&bad).unwrap();
    write(&bad, "x.csv", "t,tau,s,v_enc,omega_imu\n0,0,0,0,0\n0.1,0,0,abc,0\n");
    let o = carid(&["fit", "--logs", tmp.path().join("bad").to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(!o.status.success());
    let err = stderr(&o);
    assert!(err.contains("x.csv") && err.contains("row 2"), "{err}");
}

fn simulate(dir: &Path, scenario: &str) -> (Output, PathBuf) {
    let params = reference_params(dir);
    let sc = write(dir, "scenario.json", scenario);
    let out = dir.join("sim");
    let o = carid(&["simulate", "--params", params.to_str().unwrap(), "--scenario", sc.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    (o, out)
}

fn column(path: &Path, name: &str) -> Vec<f64> {
    let mut r = csv::Reader::from_path(path).unwrap();
    let idx = r.headers().unwrap().iter().position(|h| h == name).unwrap();
    r.records().map(|rec| rec.unwrap()[idx].parse().unwrap()).collect()
}

#[test]
fn simulate_step_throttle_gives_monotone_speed() {
    let tmp = TempDir::new().unwrap();
    let (o, out) = simulate(
        tmp.path(),
        r#"{"duration": 6, "dt": 0.01, "throttle": {"type": "step", "before": 0, "after": 0.3, "at": 0.5},
            "steering": {"type": "constant", "value": 0}}"#,
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let v = column(&out.join("trajectory.csv"), "v_enc");
    assert_eq!(v.len(), 601);
    assert!(v.windows(2).all(|w| w[1] >= w[0] - 1e-12));
    assert!(v[600] > 1.0);
    for f in ["path.svg", "speed.svg", "yaw_rate.svg", "heading.svg", "inputs.svg", "run_manifest.json"] {
        assert!(out.join(f).is_file(), "{f}");
    }
    // The trajectory export reads back as a log.
    let log = load_log(fs::File::open(out.join("trajectory.csv")).unwrap()).unwrap();
    assert!(log.mocap.is_some());
}

#[test]
fn simulate_zero_input_is_constant() {
    let states = [
        ("kinematic", "unnormalized", &["state_x", "state_y", "state_eta", "state_v"][..]),
        ("dynamic", "normalized", &["state_x", "state_y", "state_eta", "state_v_x", "state_v_y", "state_omega"][..]),
    ];
    for (model, slip, columns) in states {
        let tmp = TempDir::new().unwrap();
        let sc = format!(
            r#"{{"duration": 2, "dt": 0.02, "throttle": {{"type": "constant", "value": 0}},
                "steering": {{"type": "constant", "value": 0}}, "model": "{model}", "slip_model": "{slip}"}}"#
        );
        let (o, out) = simulate(tmp.path(), &sc);
        assert!(o.status.success(), "{}", stderr(&o));
        let path = out.join("trajectory.csv");
        for c in columns {
            let v = column(&path, c);
            assert!(v.iter().all(|x| (x - v[0]).abs() < 1e-12), "{model}: {c}");
        }
    }
}

#[test]
fn unnormalized_slip_turns_steering_trim_into_yaw_at_rest() {
    // The reference map gives a nonzero angle at s = 0 and the unnormalized
    // slip angle does not vanish with speed, so the front tire pushes a
    // parked car around.
    let tmp = TempDir::new().unwrap();
    let (o, out) = simulate(
        tmp.path(),
        r#"{"duration": 2, "dt": 0.02, "throttle": {"type": "constant", "value": 0},
            "steering": {"type": "constant", "value": 0}, "model": "dynamic"}"#,
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let omega = column(&out.join("trajectory.csv"), "state_omega");
    assert!(omega[omega.len() - 1].abs() > 1e-3);
}

#[test]
fn simulate_reports_schema_errors() {
    let tmp = TempDir::new().unwrap();
    let (o, _) = simulate(
        tmp.path(),
        r#"{"duration": 2, "dt": 0, "throttle": {"type": "constant", "value": 0}, "steering": {"type": "constant", "value": 0}}"#,
    );
    assert!(!o.status.success());
    assert!(stderr(&o).contains("`dt`"), "{}", stderr(&o));
    let (o, _) = simulate(tmp.path(), r#"{"duration": 2, "dt": 0.01, "throttle": {"type": "wobble"}}"#);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("line"), "{}", stderr(&o));
}

fn validate_json(params: &Path, log: &Path, model: &str) -> serde_json::Value {
    let o = carid(&["validate", "--params", params.to_str().unwrap(), "--log", log.to_str().unwrap(), "--model", model]);
    assert!(o.status.success(), "{}", stderr(&o));
    serde_json::from_slice(&o.stdout).unwrap()
}

#[test]
fn validate_on_own_noiseless_log_is_exact() {
    let tmp = TempDir::new().unwrap();
    let (o, out) = simulate(
        tmp.path(),
        r#"{"duration": 5, "dt": 0.01, "throttle": {"type": "constant", "value": 0.3},
            "steering": {"type": "sine", "amplitude": 0.5, "frequency": 0.5}}"#,
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let report = validate_json(&tmp.path().join("params.json"), &out.join("trajectory.csv"), "kinematic");
    let rms = report["rms"].as_object().unwrap();
    assert_eq!(rms.len(), 5);
    for (ch, v) in rms {
        assert!(v.as_f64().unwrap() < 1e-6, "{ch}: {v}");
    }
}

#[test]
fn kinematic_lateral_error_grows_with_speed_on_dynamic_logs() {
    let lateral = |tau: f64| {
        let tmp = TempDir::new().unwrap();
        let sc = format!(
            r#"{{"duration": 6, "dt": 0.01, "throttle": {{"type": "constant", "value": {tau}}},
                "steering": {{"type": "constant", "value": 0.5}}, "model": "dynamic", "mocap": true}}"#
        );
        let (o, out) = simulate(tmp.path(), &sc);
        assert!(o.status.success(), "{}", stderr(&o));
        let r = validate_json(&tmp.path().join("params.json"), &out.join("trajectory.csv"), "kinematic");
        r["rms"]["lateral"].as_f64().unwrap()
    };
    let (slow, fast) = (lateral(0.2), lateral(0.3));
    assert!(fast > slow, "slow {slow}, fast {fast}");
}

#[test]
fn validate_errors() {
    let tmp = TempDir::new().unwrap();
    let log = write(tmp.path(), "log.csv", "t,tau,s,v_enc,omega_imu\n0,0,0,0,0\n0.01,0,0,0,0\n0.02,0,0,0,0\n0.03,0,0,0,0\n0.04,0,0,0,0\n0.05,0,0,0,0\n");
    let missing = tmp.path().join("nope.json");
    let o = carid(&["validate", "--params", missing.to_str().unwrap(), "--log", log.to_str().unwrap(), "--model", "kinematic"]);
    assert!(!o.status.success());
    let params = reference_params(tmp.path());
    let o = carid(&["validate", "--params", params.to_str().unwrap(), "--log", log.to_str().unwrap(), "--model", "dynamic"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("motion-capture"));
}
