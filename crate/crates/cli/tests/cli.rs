use std::path::PathBuf;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_canonical-tf");
const GRID: &str = "256,-8,0.0625";

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn run_env(args: &[&str], threads: &str) -> Output {
    Command::new(BIN)
        .args(args)
        .env("CANONICAL_TF_THREADS", threads)
        .output()
        .expect("binary runs")
}

fn tmp(name: &str) -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("cli");
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Rows of a numeric CSV, header dropped.
fn rows(text: &str) -> Vec<Vec<f64>> {
    text.lines()
        .skip(1)
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect()
}

fn gen(name: &str, spec: &str) -> PathBuf {
    let path = tmp(name);
    let o = run(&["gen", "--signal", spec, "--grid", GRID, "--out", path.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    path
}

#[test]
fn fourier_round_trip() {
    let f = gen("rt_f.csv", "gaussian:center=0.5,width=0.8,carrier=2");
    let fwd = tmp("rt_fwd.csv");
    let back = tmp("rt_back.csv");
    let o = run(&["lct", "--matrix", "fourier", f.to_str().unwrap(), fwd.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(std::fs::read_to_string(&fwd).unwrap().starts_with("u,re,im\n"));
    let o = run(&["lct", "--matrix", "0,-1,1,0", fwd.to_str().unwrap(), back.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));

    let a = rows(&std::fs::read_to_string(&f).unwrap());
    let b = rows(&std::fs::read_to_string(&back).unwrap());
    assert_eq!(a.len(), b.len());
    for (x, y) in a.iter().zip(&b) {
        assert!((x[0] - y[0]).abs() < 1e-9, "axis {} vs {}", x[0], y[0]);
        assert!((x[1] - y[1]).abs() < 1e-6 && (x[2] - y[2]).abs() < 1e-6);
    }
}

#[test]
fn non_unimodular_matrix_is_usage_error() {
    let f = gen("nu.csv", "gaussian");
    let o = run(&["lct", "--matrix", "1,1,1,1", f.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("unimodular"));
}

#[test]
fn b_zero_needs_its_own_method() {
    let f = gen("bz.csv", "gaussian");
    let o = run(&["lct", "--matrix", "1,0,1,1", f.to_str().unwrap()]);
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("b=0: chirp-multiplication branch; use --method bzero"));
    let o = run(&["lct", "--matrix", "1,0,1,1", "--method", "bzero", f.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
}

#[test]
fn missing_window_is_usage_error() {
    let o = run(&["spectrogram", "--signal", "gaussian", "--grid", GRID]);
    assert_eq!(code(&o), 2);
    let o = run(&["verify", "--theorem", "1", "--signal", "gaussian", "--grid", GRID]);
    assert_eq!(code(&o), 2);
}

#[test]
fn unknown_preset_is_usage_error() {
    let o = run(&["gen", "--signal", "sawtooth"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn bad_thread_count_is_usage_error() {
    let o = run_env(&["gen", "--signal", "gaussian", "--grid", GRID], "zero");
    assert_eq!(code(&o), 2);
}

#[test]
fn coarse_grid_violation_is_numerical() {
    // width 1 on a unit-step grid: the bound reads as violated but the
    // grid cannot resolve the signal, so this is not a counterexample
    let o = run(&[
        "verify", "--theorem", "1", "--signal", "gaussian", "--window", "gaussian", "--grid", "16,-8,1",
    ]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
}

#[test]
fn resolved_bound_passes() {
    let o = run(&[
        "verify", "--theorem", "1", "--signal", "gaussian:chirp=1", "--window", "gaussian:width=0.5",
        "--matrix", "frft:0.5", "--grid", GRID,
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["passed"], true);
    assert!(v["lhs"].as_f64().unwrap() >= v["rhs"].as_f64().unwrap());
}

#[test]
fn theorem3_report_has_both_conventions() {
    let o = run(&[
        "verify", "--theorem", "3", "--t", "0", "--u", "0", "--signal", "gaussian", "--window", "gaussian",
        "--grid", GRID,
    ]);
    // Fourier at the centre is an equality case: holds either way
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    for key in ["rhs_unit_kappa", "rhs_commutator_consistent", "rhs_normalized", "sigma2_u_given_t", "sigma2_t_given_u"] {
        assert!(v[key].is_number(), "missing {key}");
    }
    assert!(v["holds_commutator_consistent"].is_boolean());
}

#[test]
fn output_is_byte_stable_across_threads() {
    let args = [
        "spectrogram", "--signal", "gaussian:chirp=1", "--window", "gaussian:width=0.5", "--matrix", "frft:0.7",
        "--grid", "128,-8,0.125",
    ];
    let one = run_env(&args, "1");
    let four = run_env(&args, "4");
    let again = run_env(&args, "4");
    assert_eq!(code(&one), 0, "{}", stderr(&one));
    assert!(one.stdout.starts_with(b"t,u,magnitude_squared\n"));
    assert_eq!(one.stdout, four.stdout);
    assert_eq!(four.stdout, again.stdout);
}

#[test]
fn spectral_route_agrees_with_time_route() {
    let base = [
        "stlct", "--signal", "gaussian:carrier=1", "--window", "gaussian:width=0.7", "--matrix", "1,2,0.5,2",
        "--grid", "128,-8,0.125", "--route",
    ];
    let time = run(&[&base[..], &["time"]].concat());
    let spectral = run(&[&base[..], &["spectral"]].concat());
    assert_eq!(code(&time), 0, "{}", stderr(&time));
    assert_eq!(code(&spectral), 0, "{}", stderr(&spectral));
    let a = rows(std::str::from_utf8(&time.stdout).unwrap());
    let b = rows(std::str::from_utf8(&spectral.stdout).unwrap());
    assert_eq!(a.len(), b.len());
    let peak = a.iter().map(|r| r[2].hypot(r[3])).fold(0.0, f64::max);
    let diff = a
        .iter()
        .zip(&b)
        .map(|(x, y)| (x[2] - y[2]).hypot(x[3] - y[3]))
        .fold(0.0, f64::max);
    assert!(diff / peak < 1e-3, "relative difference {}", diff / peak);
}

#[test]
fn moments_json_and_conditional_csv() {
    let f = gen("mom.csv", "gaussian:center=1,width=0.5");
    let o = run(&["moments", f.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!((v["time"]["mean"].as_f64().unwrap() - 1.0).abs() < 1e-9);
    assert!((v["time"]["spread"].as_f64().unwrap() - 0.125).abs() < 1e-9);

    let o = run(&["moments", f.to_str().unwrap(), "--window", "gaussian", "--conditional"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(o.stdout.starts_with(b"t,mean_u,var_u,Q\n"));

    let o = run(&["moments", f.to_str().unwrap(), "--conditional"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn battery_config_round_trip() {
    let cfg = tmp("battery.json");
    std::fs::write(
        &cfg,
        r#"{"grid":{"n":256,"t0":-8,"dt":0.0625},
            "signals":[{"kind":"gaussian","width":0.8}],
            "windows":[{"kind":"gaussian","width":0.5}],
            "matrices":["fourier",[1,2,0.5,2]],
            "theorems":["stern","theorem1","theorem2"]}"#,
    )
    .unwrap();
    let out = tmp("battery_out.json");
    let o = run(&["battery", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(v["entries"].as_array().unwrap().len(), 6);
    assert!(String::from_utf8_lossy(&o.stdout).contains("theorem1"));

    let bad = tmp("bad.json");
    std::fs::write(&bad, "{not json").unwrap();
    assert_eq!(code(&run(&["battery", "--config", bad.to_str().unwrap()])), 2);
}
