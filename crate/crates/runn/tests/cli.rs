use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use runn::state::load_state;
use runn::{run_experiment, Experiment, ExperimentConfig, PhaseOverride};
use runn_core::uzawa::evaluate_solution;
use tempfile::TempDir;

fn runn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_runn")).args(args).output().unwrap()
}

fn code(args: &[&str]) -> i32 {
    runn(args).status.code().unwrap()
}

fn tiny_config(dir: &Path, seed: u64) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(Experiment::WeakSmoothLsadam, seed, dir);
    cfg.phases = Some(2);
    for k in 0..2 {
        cfg.overrides.insert(
            k,
            PhaseOverride {
                epochs: Some(12),
                n_points: Some(600),
                monitor_every: Some(4),
                ..Default::default()
            },
        );
    }
    cfg
}

fn write_config(dir: &Path, cfg: &ExperimentConfig) -> String {
    let p = dir.join("config.json");
    fs::write(&p, serde_json::to_string(cfg).unwrap()).unwrap();
    p.to_str().unwrap().to_string()
}

fn header(path: &Path) -> String {
    fs::read_to_string(path).unwrap().lines().next().unwrap().to_string()
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(code(&[]), 2);
    assert_eq!(code(&["--experiment", "weak_smooth"]), 2);
    assert_eq!(code(&["--experiment", "linlab_sweep", "--alpha", "0.5"]), 2);
    assert_eq!(code(&["--experiment", "linlab_sweep", "--seed", "minus-one"]), 2);
    assert_eq!(code(&["--config", "/nonexistent/runn.json"]), 2);
    let tmp = TempDir::new().unwrap();
    let p = tmp.path().join("bad.json");
    fs::write(&p, r#"{"experiment": "weak_highfreq", "epochs": 3}"#).unwrap();
    assert_eq!(code(&["--config", p.to_str().unwrap()]), 2);
    let mut cfg = tiny_config(tmp.path(), 0);
    cfg.overrides.insert(7, PhaseOverride::default());
    assert_eq!(code(&["--config", &write_config(tmp.path(), &cfg)]), 2);
}

#[test]
fn help_and_version_succeed() {
    assert_eq!(code(&["--help"]), 0);
    assert_eq!(code(&["--version"]), 0);
}

#[test]
fn unwritable_output_is_a_runtime_failure() {
    let tmp = TempDir::new().unwrap();
    let file = tmp.path().join("occupied");
    fs::write(&file, "x").unwrap();
    let out = file.join("sub");
    assert_eq!(code(&["--experiment", "linlab_sweep", "--out", out.to_str().unwrap()]), 1);
}

#[test]
fn training_run_writes_every_artifact() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("run");
    let cfg = tiny_config(&out, 4);
    assert_eq!(code(&["--config", &write_config(tmp.path(), &cfg)]), 0);
    for f in ["manifest.json", "convergence.csv", "spectrum_0.csv", "spectrum_1.csv", "solution.csv", "state/state.json"] {
        assert!(out.join(f).is_file(), "{f}");
    }
    assert_eq!(header(&out.join("convergence.csv")), "phase,epoch,loss,relative_error");
    assert_eq!(header(&out.join("spectrum_0.csv")), "omega,weighted_power,ncpsd");
    assert_eq!(header(&out.join("solution.csv")), "x,u,u_exact,error");
    for f in ["convergence.csv", "spectrum_1.csv", "solution.csv"] {
        assert!(!fs::read(out.join(f)).unwrap().contains(&b'\r'), "{f}");
    }
    let mut rd = csv::Reader::from_path(out.join("solution.csv")).unwrap();
    let rows: Vec<Vec<f64>> = rd
        .records()
        .map(|r| r.unwrap().iter().map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 2001);
    assert_eq!(rows[0][0], -1.0);
    assert_eq!(rows[2000][0], 1.0);
    for r in &rows {
        assert!((r[3] - (r[2] - r[1])).abs() < 1e-15 || (r[3] - (r[1] - r[2])).abs() < 1e-15);
    }

    let mut rd = csv::Reader::from_path(out.join("convergence.csv")).unwrap();
    let conv: Vec<csv::StringRecord> = rd.records().map(Result::unwrap).collect();
    assert_eq!(conv.len(), 24);
    let epochs: Vec<usize> = conv.iter().map(|r| r[1].parse().unwrap()).collect();
    assert!(epochs.windows(2).all(|w| w[1] == w[0] + 1));
    assert!(conv.iter().any(|r| r[3].is_empty()) && conv.iter().any(|r| !r[3].is_empty()));

    let m: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["config"]["experiment"], "weak_smooth_lsadam");
    assert_eq!(m["phases"].as_array().unwrap().len(), 2);
    assert!(m["reference"]["max_error"].as_f64().unwrap() < 1e-6);
    assert!(m["failure"].is_null());
}

#[test]
fn runs_are_reproducible_from_seed_and_manifest() {
    let tmp = TempDir::new().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    let c = tmp.path().join("c");
    let d = tmp.path().join("d");
    let cfg_a = write_config(tmp.path(), &tiny_config(&a, 11));
    assert_eq!(code(&["--config", &cfg_a]), 0);
    assert_eq!(code(&["--config", &cfg_a, "--out", b.to_str().unwrap()]), 0);
    let manifest = a.join("manifest.json");
    assert_eq!(code(&["--config", manifest.to_str().unwrap(), "--out", c.to_str().unwrap()]), 0);
    assert_eq!(code(&["--config", &cfg_a, "--out", d.to_str().unwrap(), "--seed", "12"]), 0);
    for f in ["convergence.csv", "spectrum_0.csv", "spectrum_1.csv", "solution.csv"] {
        let ra = fs::read(a.join(f)).unwrap();
        assert_eq!(ra, fs::read(b.join(f)).unwrap(), "{f}");
        assert_eq!(ra, fs::read(c.join(f)).unwrap(), "{f}");
    }
    assert_ne!(fs::read(a.join("solution.csv")).unwrap(), fs::read(d.join("solution.csv")).unwrap());
}

#[test]
fn saved_state_reloads_exactly() {
    let tmp = TempDir::new().unwrap();
    let report = run_experiment(&tiny_config(tmp.path(), 2)).unwrap();
    let state = report.state.unwrap();
    let loaded = load_state(&tmp.path().join("state")).unwrap();
    assert_eq!(loaded.components.len(), state.components.len());
    assert_eq!(loaded.history.len(), state.history.len());
    for (a, b) in loaded.history.iter().zip(&state.history) {
        assert_eq!(a.history, b.history);
        assert_eq!(a.plan, b.plan);
    }
    let xs: Vec<f64> = (0..101).map(|i| -1.0 + 0.02 * i as f64).collect();
    let u0 = evaluate_solution(&state, &xs, true).unwrap();
    let u1 = evaluate_solution(&loaded, &xs, true).unwrap();
    assert_eq!(u0.u, u1.u);
    assert_eq!(u0.du, u1.du);
}

#[test]
fn linlab_and_quadrature_experiments_write_tables() {
    let tmp = TempDir::new().unwrap();
    let l = tmp.path().join("l");
    let q = tmp.path().join("q");
    assert_eq!(code(&["--experiment", "linlab_sweep", "--out", l.to_str().unwrap()]), 0);
    assert_eq!(code(&["--experiment", "quadrature_variance", "--out", q.to_str().unwrap(), "--seed", "3"]), 0);
    assert_eq!(
        header(&l.join("linlab_sweep.csv")),
        "problem,approach,mode,fraction,epsilon,rho,measured_rate,bound_rate,converged"
    );
    let mut rd = csv::Reader::from_path(l.join("linlab_sweep.csv")).unwrap();
    for r in rd.records() {
        let r = r.unwrap();
        let fraction: f64 = r[3].parse().unwrap();
        if fraction < 1.0 {
            assert_eq!(&r[8], "true", "{r:?}");
        }
    }
    assert_eq!(header(&q.join("quadrature_variance.csv")), "rule,elements,nodes,variance");
    let m: serde_json::Value = serde_json::from_str(&fs::read_to_string(q.join("manifest.json")).unwrap()).unwrap();
    let slope = m["variance_slopes"]["p3"].as_f64().unwrap();
    assert!((-9.8..=-8.2).contains(&slope), "{slope}");
    assert!(!q.join("solution.csv").exists());
}
