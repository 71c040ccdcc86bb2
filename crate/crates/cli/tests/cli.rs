use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn polyfront(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_polyfront"))
        .current_dir(dir)
        .env_remove("POLYFRONT_OUT")
        .args(args)
        .output()
        .unwrap()
}

fn write(dir: &Path, name: &str, text: &str) {
    std::fs::write(dir.join(name), text).unwrap();
}

fn summary(dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap()
}

#[test]
fn simulate1d_writes_the_trajectory_and_summary() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "ex1.toml", "t_max = 1000.0\nn = 4096\n");
    let out = polyfront(tmp.path(), &["simulate1d", "--config", "ex1.toml", "--out", "run"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let run = tmp.path().join("run");
    let csv = std::fs::read_to_string(run.join("trajectory.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "t,mass,E,D,M,l2sq,m1,m2,m4,front_left,front_right");
    assert!(lines.count() >= 120);
    let s = summary(&run);
    for key in ["slope_m2", "theta_inf_est", "theta_l2_est"] {
        assert!(s[key].is_f64(), "{key}");
    }
    let manifest: Value = serde_json::from_str(&std::fs::read_to_string(run.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "simulate1d");
    assert_eq!(manifest["config"]["t_max"], 1000.0);
}

#[test]
fn identical_configs_give_identical_csvs() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "c.toml", "t_max = 100.0\nn = 2048\n[kernel]\ntype = \"gaussian\"\nsigma = 0.5\n");
    for dir in ["a", "b"] {
        let out = polyfront(tmp.path(), &["simulate1d", "--config", "c.toml", "--out", dir]);
        assert_eq!(out.status.code(), Some(0));
    }
    let read = |d: &str| std::fs::read(tmp.path().join(d).join("trajectory.csv")).unwrap();
    assert_eq!(read("a"), read("b"));
}

#[test]
fn malformed_toml_exits_2_and_writes_nothing() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "bad.toml", "t_max = [\n");
    let out = polyfront(tmp.path(), &["simulate1d", "--config", "bad.toml", "--out", "run"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!tmp.path().join("run").exists());
}

#[test]
fn unknown_keys_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "bad.toml", "tmax = 10.0\n");
    let out = polyfront(tmp.path(), &["simulate1d", "--config", "bad.toml", "--out", "run"]);
    assert_eq!(out.status.code(), Some(2));
    write(tmp.path(), "bad.json", "{\"radii\": [20.0], \"solver\": {\"drr\": 0.01}}");
    let out = polyfront(tmp.path(), &["steady2d", "--config", "bad.json", "--out", "run"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!tmp.path().join("run").exists());
}

#[test]
fn numerical_failure_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    write(
        tmp.path(),
        "c.toml",
        "t_max = 2000.0\nn = 4096\nl0 = 400.0\ncfl_reaction = 1e6\ndt_max = 400.0\n",
    );
    let out = polyfront(tmp.path(), &["simulate1d", "--config", "c.toml", "--out", "run"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn domain_overflow_exits_4() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "c.toml", "t_max = 100.0\nn = 1024\nl0 = 5.0\nregrid = false\n");
    let out = polyfront(tmp.path(), &["simulate1d", "--config", "c.toml", "--out", "run"]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn stalled_relaxation_exits_5() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "c.toml", "radii = [20.0]\n[solver]\nmax_steps = 10\n");
    let out = polyfront(tmp.path(), &["steady2d", "--config", "c.toml", "--out", "run"]);
    assert_eq!(out.status.code(), Some(5));
}

#[test]
fn steady2d_summary_schema_and_small_radius_guard() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "c.toml", "radii = [12.0]\n");
    let out = polyfront(tmp.path(), &["steady2d", "--config", "c.toml", "--out", "run"]);
    assert_eq!(out.status.code(), Some(2));
    let out = polyfront(
        tmp.path(),
        &["steady2d", "--config", "c.toml", "--out", "run", "--unsafe-small-R", "--threads", "1"],
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let run = tmp.path().join("run");
    let s = summary(&run);
    for key in ["R", "E_star", "mass", "l2sq", "gap", "boundary_flux", "sigma_star", "gauss_rel_dist", "residual"] {
        assert!(s[key].is_number(), "{key}");
    }
    let profile = std::fs::read_to_string(run.join("profile_R12.csv")).unwrap();
    assert!(profile.starts_with("r,G\n"));
}

#[test]
fn gaussconv_writes_the_decay_table() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "c.toml", "d = 4\ntau_max = 6.0\n[g0]\ntype = \"gaussian\"\nvariance = 1.3\n");
    let out = polyfront(tmp.path(), &["gaussconv", "--config", "c.toml", "--out", "run"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let run = tmp.path().join("run");
    let csv = std::fs::read_to_string(run.join("decay.csv")).unwrap();
    assert!(csv.starts_with("tau,w_perp_l2,w_perp_weighted_linf,bound_ratio\n"));
    assert_eq!(csv.lines().count(), 1 + 121);
    assert!(summary(&run)["rate"].as_f64().unwrap() < 0.0);
}

#[test]
fn fit_reads_a_trajectory_and_file_kernels_load() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "phi.csv", "x,phi\n-0.5,1.0\n0.5,1.0\n");
    write(
        tmp.path(),
        "c.toml",
        "t_max = 100.0\nn = 2048\n[kernel]\ntype = \"file\"\nfile = \"phi.csv\"\n",
    );
    let out = polyfront(tmp.path(), &["simulate1d", "--config", "c.toml", "--out", "sim"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    write(tmp.path(), "fit.toml", "input = \"sim/trajectory.csv\"\nwindow = [10.0, 100.0]\n");
    let out = polyfront(tmp.path(), &["fit", "--config", "fit.toml", "--out", "fit"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let s = summary(&tmp.path().join("fit"));
    let slope = s["slope"].as_f64().unwrap();
    assert!(slope > 0.5 && slope < 0.8, "{slope}");
}

#[test]
fn output_root_defaults_to_the_environment() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "h.toml", "tau_max = 0.5\nn = 1024\n");
    let out = Command::new(env!("CARGO_BIN_EXE_polyfront"))
        .current_dir(tmp.path())
        .env("POLYFRONT_OUT", "envdir")
        .args(["rescaled", "--config", "h.toml"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let dir = tmp.path().join("envdir");
    for f in ["manifest.json", "summary.json", "h_records.csv", "frame_final.csv", "frame_final.json"] {
        assert!(dir.join(f).exists(), "{f}");
    }
}

#[test]
fn unknown_suite_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = polyfront(tmp.path(), &["accept", "--suite", "nightly", "--out", "run"]);
    assert_eq!(out.status.code(), Some(2));
}
