use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn osc_lab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_osc-lab")).args(args).output().expect("binary runs")
}

fn summary(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap()
}

#[test]
fn crit_prints_two_decimals() {
    let out = osc_lab(&["crit", "--A", "1.3", "--B", "0.9", "--C", "0", "--omega", "1.23"]);
    assert!(out.status.success());
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "0.99");
}

#[test]
fn drift_fig1_within_plotted_range() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("f1");
    let out = osc_lab(&["drift", "--preset", "fig1", "--out", dir.to_str().unwrap(), "--stride", "1000"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let s = summary(&dir);
    assert!(s["max_rel_drift"].as_f64().unwrap() <= 1e-5);
    let csv = fs::read_to_string(dir.join("drift.csv")).unwrap();
    assert!(csv.starts_with("t,rel_drift\n"));
    assert_eq!(csv.lines().count(), 602);
    assert!(dir.join("drift.svg").exists());
}

#[test]
fn fig4_presets_bounded_and_escaping() {
    let tmp = tempfile::tempdir().unwrap();
    for (preset, status) in [("fig4-bounded", "completed"), ("fig4-unbounded", "escaped")] {
        let dir = tmp.path().join(preset);
        let out = osc_lab(&["simulate", "--preset", preset, "--out", dir.to_str().unwrap()]);
        assert!(out.status.success());
        assert_eq!(summary(&dir)["status"], status);
        let svg = fs::read_to_string(dir.join("trajectory.svg")).unwrap();
        assert!(svg.contains(">-5.00<") && svg.contains(">5.00<"));
    }
}

#[test]
fn poincare_writes_strobe_and_curve() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("p");
    let out = osc_lab(&["poincare", "--preset", "fig2", "--out", dir.to_str().unwrap(), "--no-svg"]);
    assert!(out.status.success());
    let s = summary(&dir);
    assert!(s["max_rel_residual"].as_f64().unwrap() <= 1e-6);
    assert_eq!(s["n_strobe"], 191);
    let strobe = fs::read_to_string(dir.join("strobe.csv")).unwrap();
    assert!(strobe.starts_with("z,p\n"));
    assert!(fs::read_to_string(dir.join("curve.csv")).unwrap().starts_with("z,p\n"));
    assert!(!dir.join("poincare.svg").exists());
}

#[test]
fn outputs_are_byte_identical_across_runs_and_worker_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let run = |name: &str, threads: &str| {
        let dir = tmp.path().join(name);
        let out = Command::new(env!("CARGO_BIN_EXE_osc-lab"))
            .args(["stability-scan", "--omegas", "1.0:1.4:0.2", "--tmax", "100", "--out", dir.to_str().unwrap()])
            .env("OSC_LAB_THREADS", threads)
            .output()
            .unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        ["scan.csv", "summary.json", "scan.svg"].map(|f| fs::read(dir.join(f)).unwrap())
    };
    let a = run("a", "1");
    let b = run("b", "4");
    let c = run("c", "4");
    assert_eq!(a, b);
    assert_eq!(b, c);
    let text = String::from_utf8(a[0].clone()).unwrap();
    assert!(text.starts_with("omega,z_last_bounded,z_crit\n"));

    let sim = |name: &str| {
        let dir = tmp.path().join(name);
        let out = osc_lab(&["simulate", "--preset", "sec3ref", "--tmax", "20", "--out", dir.to_str().unwrap()]);
        assert!(out.status.success());
        ["trajectory.csv", "summary.json", "trajectory.svg"].map(|f| fs::read(dir.join(f)).unwrap())
    };
    assert_eq!(sim("s1"), sim("s2"));
}

#[test]
fn validation_and_numerical_failures_have_distinct_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("bad");
    let out = osc_lab(&["simulate", "--A", "0.5", "--B", "0.9", "--out", dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(summary(&dir)["status"], "error");

    let out = osc_lab(&["simulate", "--preset", "nope"]);
    assert_eq!(out.status.code(), Some(2));

    // ω₀ = 1/2 over T = 2π is parametrically resonant
    let csv = tmp.path().join("hill.csv");
    let mut text = String::from("t,f,g\n");
    for i in 0..200 {
        let t = std::f64::consts::TAU * i as f64 / 200.0;
        text.push_str(&format!("{t},{},{}\n", 0.25 * (1.0 + 0.1 * t.cos()), 0.1));
    }
    fs::write(&csv, text).unwrap();
    let dir = tmp.path().join("unstable");
    let out = osc_lab(&[
        "reduce", "--input", csv.to_str().unwrap(), "--period", "6.283185307179586", "--m", "2", "--out",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(summary(&dir)["error"], "unstable_hill");
}

#[test]
fn reduce_constant_hill_part() {
    let tmp = tempfile::tempdir().unwrap();
    let csv = tmp.path().join("hill.csv");
    let mut text = String::from("t,f,g\n");
    for i in 0..=64 {
        let t = std::f64::consts::TAU * i as f64 / 64.0;
        text.push_str(&format!("{t},0.16,0.5\n"));
    }
    fs::write(&csv, text).unwrap();
    let dir = tmp.path().join("nf");
    let out = osc_lab(&[
        "reduce", "--input", csv.to_str().unwrap(), "--period", "6.283185307179586", "--m", "3", "--out",
        dir.to_str().unwrap(), "--n-grid", "201",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let s = summary(&dir);
    assert!((s["omega_nf"].as_f64().unwrap() - 0.4).abs() < 1e-9);
    let g = fs::read_to_string(dir.join("g_nf.csv")).unwrap();
    let want = 0.5 * 0.4f64.powi(-3);
    for line in g.lines().skip(1) {
        let v: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
        assert!((v - want).abs() < 1e-9 * want);
    }
}

#[test]
fn family_reports_invariant_drift() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = tmp.path().join("fp.json");
    fs::write(&spec, r#"{"omega":1.0,"C1":0.05,"C2":0.0,"alpha2":[2.2,0.0,-3.6]}"#).unwrap();
    let dir = tmp.path().join("fam");
    let out = osc_lab(&["family", "--spec", spec.to_str().unwrap(), "--out", dir.to_str().unwrap(), "--no-svg"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(summary(&dir)["max_rel_drift"].as_f64().unwrap() <= 1e-7);
    let head = fs::read_to_string(dir.join("trajectory.csv")).unwrap();
    assert!(head.starts_with("t,z,p,alpha2,alpha2_d1,alpha2_d2\n"));
}

#[test]
fn spec_file_drives_simulation() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = tmp.path().join("spec.json");
    fs::write(&spec, r#"{"omega": 1.0, "m": 3, "g": {"kind": "trig", "A": 1.3, "B": 0.9, "C": 0.2}}"#).unwrap();
    let dir = tmp.path().join("m3");
    let out = osc_lab(&["drift", "--spec", spec.to_str().unwrap(), "--tmax", "50", "--out", dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let s = summary(&dir);
    assert_eq!(s["spec"]["m"], 3);
    assert!(s["max_rel_drift"].as_f64().unwrap() < 1e-8);
}
