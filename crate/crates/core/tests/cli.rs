use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const MINIMAL: &str = r#"
kind = "solve-linear"
seed = 7
[triple]
domain = "interval"
dim = 1
[pair]
family = "riesz"
[noise]
modes = 1
steps = 10
[numerics]
paths = 10
"#;

fn varspde(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_varspde"))
        .args(args)
        .env_remove("VARSPDE_WORKERS")
        .output()
        .unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(dir.join("manifest.json")).unwrap()).unwrap()
}

fn checksums(m: &Value) -> Vec<(String, String)> {
    m["outputs"]
        .as_array()
        .unwrap()
        .iter()
        .map(|o| {
            (
                o["name"].as_str().unwrap().to_string(),
                o["sha256"].as_str().unwrap().to_string(),
            )
        })
        .collect()
}

#[test]
fn minimal_run_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "run.toml", MINIMAL);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let out = varspde(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        a.to_str().unwrap(),
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let out = varspde(&[
        "solve-linear",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        b.to_str().unwrap(),
        "--workers",
        "3",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let (ma, mb) = (manifest(&a), manifest(&b));
    assert_eq!(checksums(&ma), checksums(&mb));
    assert_eq!(ma["config_hash"], mb["config_hash"]);
    let names: Vec<String> = checksums(&ma).into_iter().map(|c| c.0).collect();
    assert_eq!(names, ["trajectories.vspd", "summary.json"]);
    let dump =
        varspde::cli::read_dump(std::fs::File::open(a.join("trajectories.vspd")).unwrap()).unwrap();
    assert_eq!(
        (dump.paths.len(), dump.grid.len(), dump.state_len),
        (10, 11, 1)
    );
}

#[test]
fn seed_override_changes_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let text = MINIMAL
        .replace(
            "domain = \"interval\"\ndim = 1",
            "domain = \"custom\"\neigenvalues = [1.0]",
        )
        .replace(
            "family = \"riesz\"",
            "family = \"scalar\"\na = 1.0\nb = 0.5",
        )
        + "[initial]\nu0 = [1.0]\n";
    let cfg = write(tmp.path(), "run.toml", &text);
    let c = cfg.to_str().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert_eq!(
        varspde(&["run", "--config", c, "--out", a.to_str().unwrap()])
            .status
            .code(),
        Some(0)
    );
    assert_eq!(
        varspde(&[
            "run",
            "--config",
            c,
            "--out",
            b.to_str().unwrap(),
            "--seed-override",
            "8"
        ])
        .status
        .code(),
        Some(0)
    );
    assert_ne!(checksums(&manifest(&a))[0], checksums(&manifest(&b))[0]);
    assert_eq!(manifest(&b)["seed"], 8);
}

#[test]
fn gradient_noise_boundary_exits_two() {
    let tmp = tempfile::tempdir().unwrap();
    let text = r#"
kind = "solve-ql"
[triple]
domain = "interval"
dim = 4
[coefficients]
beta = 1.4142135623730951
require_lambda = 0.1
"#;
    let cfg = write(tmp.path(), "ql.toml", text);
    let out_dir = tmp.path().join("out");
    let out = varspde(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"], "validation");
    assert!(err["issues"][0]["message"]
        .as_str()
        .unwrap()
        .contains("coercivity violation"));
    assert!(out_dir.join("error.json").exists());
    assert!(!out_dir.join("manifest.json").exists());
}

#[test]
fn validate_reports_without_running() {
    let tmp = tempfile::tempdir().unwrap();
    let good = write(tmp.path(), "good.toml", MINIMAL);
    let out = varspde(&[
        "validate",
        "--config",
        good.to_str().unwrap(),
        "--out",
        tmp.path().join("x").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(
        serde_json::from_slice::<Value>(&out.stdout).unwrap(),
        serde_json::json!([])
    );
    assert!(!tmp.path().join("x").exists());

    let bad = write(
        tmp.path(),
        "bad.toml",
        &MINIMAL.replace("steps = 10", "dt = -0.1"),
    );
    let out = varspde(&["validate", "--config", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let issues: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(issues.as_array().unwrap().len(), 1);
    assert_eq!(issues[0]["field"], "noise.dt");

    let guard = r#"
kind = "solve-ql"
[triple]
domain = "interval"
dim = 4
[coefficients]
a = "1 + 0.5 * tanh(y[0])"
[numerics]
m = 2.0
y_window = 0.25
"#;
    let g = write(tmp.path(), "guard.toml", guard);
    let out = varspde(&["validate", "--config", g.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stdout).contains("mollifier guard"));
}

#[test]
fn parse_errors_carry_positions() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "bad.toml",
        &MINIMAL.replace("paths = 10", "paths = -3"),
    );
    let out = varspde(&["validate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert!(
        err["message"].as_str().unwrap().contains("line 13"),
        "{err}"
    );
}

#[test]
fn blow_up_exits_three() {
    let tmp = tempfile::tempdir().unwrap();
    // 1 + a·dt = 0.01: the implicit step amplifies by 100 each step
    let text = r#"
kind = "solve-linear"
[triple]
domain = "custom"
eigenvalues = [1.0]
[pair]
family = "scalar"
a = -99.0
[noise]
steps = 200
t_end = 2.0
[initial]
u0 = [1.0]
[numerics]
paths = 2
"#;
    let cfg = write(tmp.path(), "boom.toml", text);
    let out = varspde(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        tmp.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(
        out.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"], "numeric");
}

#[test]
fn missing_config_is_an_io_error() {
    let out = varspde(&["run", "--config", "/nonexistent/run.toml"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn kind_mismatch_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "run.toml", MINIMAL);
    let out = varspde(&[
        "moments",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        tmp.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn psi_test_runs_without_config() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("psi");
    let out = varspde(&[
        "psi-test",
        "--q",
        "3",
        "--m-list",
        "1,2",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = std::fs::read_to_string(dir.join("psi.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 2 * 5);
    let json: Value =
        serde_json::from_slice(&std::fs::read(dir.join("psi.json")).unwrap()).unwrap();
    assert!(json["levels"]
        .as_array()
        .unwrap()
        .iter()
        .all(|l| l["passes"] == true));
    let out = varspde(&["psi-test", "--q", "2", "--out", dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn workers_env_var_does_not_change_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs/solve_ql.toml");
    let mut checks = Vec::new();
    for w in ["1", "5"] {
        let dir = tmp.path().join(w);
        let out = Command::new(env!("CARGO_BIN_EXE_varspde"))
            .args([
                "run",
                "--config",
                cfg.to_str().unwrap(),
                "--out",
                dir.to_str().unwrap(),
            ])
            .env("VARSPDE_WORKERS", w)
            .output()
            .unwrap();
        assert_eq!(
            out.status.code(),
            Some(0),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        checks.push(checksums(&manifest(&dir)));
    }
    assert_eq!(checks[0], checks[1]);
    assert!(checks[0].iter().any(|c| c.0 == "martingale.csv"));
}
