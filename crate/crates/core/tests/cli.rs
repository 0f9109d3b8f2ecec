use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_rough-ldp"));
    c.env_remove("ROUGH_LDP_SEED");
    c
}

fn bundled(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

fn run(cmd: &mut Command) -> (i32, String, String) {
    let Output { status, stdout, stderr } = cmd.output().expect("binary runs");
    (status.code().unwrap_or(-1), String::from_utf8_lossy(&stdout).into(), String::from_utf8_lossy(&stderr).into())
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("run_manifest.json")).unwrap()).unwrap()
}

const SIMULATE: &str = r#"{
  "command": "simulate",
  "model": {
    "lambda": 0.0, "beta": -1.0, "xi": 1.0, "rho": -0.3, "hurst": 0.3,
    "vol": { "sigma": { "kind": "linear" }, "sigma_tilde": { "kind": "linear" }, "b": 1.0 }
  },
  "law": { "kind": "uniform", "lo": 0.0, "hi": 0.2 },
  "scheme": { "kind": "tails", "b": 1.0 },
  "grid": { "n": 16 },
  "eps_ladder": [0.9, 0.8, 0.7],
  "simulate": { "n_paths": 3000, "level": 0.3, "write_paths": 4 },
  "seed": 5
}"#;

#[test]
fn schilder_config_prints_half() {
    let out = tempfile::tempdir().unwrap();
    let (code, stdout, _) = run(bin().arg("--config").arg(bundled("schilder.json")).arg("--out").arg(out.path()));
    assert_eq!(code, 0);
    let value: f64 = stdout.trim().rsplit(' ').next().unwrap().parse().unwrap();
    assert!((value - 0.5).abs() < 1e-6, "{stdout}");
    let rates = fs::read_to_string(out.path().join("rates.csv")).unwrap();
    assert!(rates.starts_with("problem_id,level,value,converged,kkt_residual,start_used,n_grid\n"));
}

#[test]
fn verify_prints_pass_lines() {
    let out = tempfile::tempdir().unwrap();
    let (code, stdout, _) = run(bin().arg("--config").arg(bundled("default.json")).arg("--out").arg(out.path()));
    assert_eq!(code, 0, "{stdout}");
    let lines: Vec<&str> = stdout.lines().collect();
    assert!(lines.len() >= 5);
    assert!(lines.iter().all(|l| l.starts_with("PASS ")), "{stdout}");
}

#[test]
fn simulate_is_reproducible_and_records_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sim.json");
    fs::write(&cfg, SIMULATE).unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for d in [&a, &b] {
        let (code, _, err) = run(bin().arg("--config").arg(&cfg).arg("--out").arg(d).args(["--seed", "42"]));
        assert_eq!(code, 0, "{err}");
    }
    for f in ["model.csv", "paths.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap());
    }
    let m = manifest(&a);
    assert_eq!(m["seed_override"], 42);
    assert_eq!(m["config"]["seed"], 42);
    let model = fs::read_to_string(a.join("model.csv")).unwrap();
    assert!(model.starts_with("eps,level,p_hat,std_err,h_eps_log_p,n_paths,seed\n"));
    assert_eq!(model.lines().count(), 4);
    let paths = fs::read_to_string(a.join("paths.csv")).unwrap();
    assert_eq!(paths.lines().count(), 5);
    assert_eq!(paths.lines().next().unwrap().split(',').count(), 16);
}

#[test]
fn seed_flag_beats_environment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sim.json");
    fs::write(&cfg, SIMULATE).unwrap();
    let env_only = dir.path().join("env");
    let both = dir.path().join("both");
    let (code, _, _) = run(bin().env("ROUGH_LDP_SEED", "7").arg("--config").arg(&cfg).arg("--out").arg(&env_only));
    assert_eq!(code, 0);
    assert_eq!(manifest(&env_only)["config"]["seed"], 7);
    let (code, _, _) =
        run(bin().env("ROUGH_LDP_SEED", "7").arg("--config").arg(&cfg).arg("--out").arg(&both).args(["--seed", "9"]));
    assert_eq!(code, 0);
    assert_eq!(manifest(&both)["config"]["seed"], 9);
}

#[test]
fn rerun_from_manifest_reproduces() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sim.json");
    fs::write(&cfg, SIMULATE).unwrap();
    let first = dir.path().join("first");
    let (code, _, _) = run(bin().arg("--config").arg(&cfg).arg("--out").arg(&first));
    assert_eq!(code, 0);
    let second = dir.path().join("second");
    let (code, _, err) = run(bin().arg("--config").arg(first.join("run_manifest.json")).arg("--out").arg(&second));
    assert_eq!(code, 0, "{err}");
    assert_eq!(fs::read(first.join("model.csv")).unwrap(), fs::read(second.join("model.csv")).unwrap());
}

#[test]
fn overrides_apply_dotted_paths() {
    let dir = tempfile::tempdir().unwrap();
    let (code, stdout, _) = run(bin()
        .arg("--config")
        .arg(bundled("schilder.json"))
        .arg("--out")
        .arg(dir.path())
        .args(["--override", "rate.levels=[2.0]", "--override", "rate.problem.grid.n=16"]));
    assert_eq!(code, 0);
    let value: f64 = stdout.trim().rsplit(' ').next().unwrap().parse().unwrap();
    assert!((value - 2.0).abs() < 1e-6, "{stdout}");
    let m = manifest(dir.path());
    assert_eq!(m["overrides"].as_array().unwrap().len(), 2);
    assert_eq!(m["config"]["rate"]["problem"]["grid"]["nodes"].as_array().unwrap().len(), 16);
}

#[test]
fn unknown_keys_are_validation_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    fs::write(&cfg, r#"{"command": "rate", "grid": {"n": 8, "spacingg": "uniform"}}"#).unwrap();
    let (code, _, err) = run(bin().arg("--config").arg(&cfg).arg("--out").arg(dir.path()));
    assert_eq!(code, 2, "{err}");
    let (code, _, _) = run(bin().arg("--config").arg(bundled("schilder.json")).args(["--override", "model.rho=3"]));
    assert_eq!(code, 2);
}

#[test]
fn missing_config_is_io_error() {
    let (code, _, _) = run(bin().args(["--config", "/nonexistent/config.json"]));
    assert_eq!(code, 4);
}

#[test]
fn kernels_command_writes_tables() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("k.json");
    fs::write(&cfg, r#"{"command": "kernels", "grid": {"n": 8}, "kernels": {"kernel": {"kind": "K_fbm", "H": 0.5}}}"#)
        .unwrap();
    let (code, _, err) = run(bin().arg("--config").arg(&cfg).arg("--out").arg(dir.path()));
    assert_eq!(code, 0, "{err}");
    let k = fs::read_to_string(dir.path().join("kernels.csv")).unwrap();
    assert_eq!(k.lines().count(), 1 + 28);
    for line in k.lines().skip(1) {
        assert_eq!(line.rsplit(',').next().unwrap(), "1.0");
    }
    let g = fs::read_to_string(dir.path().join("gram.csv")).unwrap();
    assert_eq!(g.lines().count(), 9);
}

#[test]
fn smile_command_writes_rows() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("s.json");
    fs::write(
        &cfg,
        r#"{
  "command": "smile",
  "model": {
    "lambda": 0.0, "beta": -1.0, "xi": 1.0, "rho": 0.0, "hurst": 0.3,
    "vol": { "sigma": { "kind": "constant", "c": 1.0 }, "sigma_tilde": { "kind": "constant", "c": 1.0 }, "b": 1.0 }
  },
  "grid": { "n": 16 },
  "smile": {
    "queries": [ { "kind": "tail_slope", "t": 1.0 }, { "kind": "small_time", "k": 0.5, "b": 0.5 } ],
    "mc": { "t": 0.5, "strikes": [0.0, 0.1], "n_paths": 2000, "bootstrap": 20 }
  }
}"#,
    )
    .unwrap();
    let (code, _, err) = run(bin().arg("--config").arg(&cfg).arg("--out").arg(dir.path()));
    assert_eq!(code, 0, "{err}");
    let s = fs::read_to_string(dir.path().join("smile.csv")).unwrap();
    let lines: Vec<&str> = s.lines().collect();
    assert_eq!(lines[0], "kind,k,t,b,H,rate,limit_value,error_bar");
    assert_eq!(lines.len(), 5);
    let slope: f64 = lines[1].split(',').nth(6).unwrap().parse().unwrap();
    assert!((slope - 4.0 / 9.0).abs() < 1e-6);
    assert!(lines[3].starts_with("mc,"));
}

#[test]
fn override_parser() {
    use rough_ldp::config::{apply_override, load};
    let mut v = serde_json::json!({ "a": { "b": 1 } });
    apply_override(&mut v, "a.c.d=true").unwrap();
    apply_override(&mut v, "a.b=hello").unwrap();
    assert_eq!(v, serde_json::json!({ "a": { "b": "hello", "c": { "d": true } } }));
    assert!(apply_override(&mut v, "novalue").is_err());
    assert!(apply_override(&mut v, "a.b.c=1").is_err());
    let cfg = load("{}", &["seed=11".to_string()]).unwrap();
    assert_eq!(cfg.seed, 11);
}
