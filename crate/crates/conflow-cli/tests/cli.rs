use std::path::Path;
use std::process::{Command, Output};

fn conflow(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_conflow")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

const SMALL_STABLE: &str = r#"
[divisor]
weights = [0.5, 0.5, 0.5]
positions = [[1.0, 0.0, 0.0], [-0.5, 0.8660254037844386, 0.0], [-0.5, -0.8660254037844386, 0.0]]
[grid]
n_lat = 24
n_lon = 48
[flow]
eps = 0.15
dt = 0.02
t_max = 1.0
sample_every = 0.1
"#;

#[test]
fn classify_examples() {
    let o = conflow(&["classify", "0.5", "0.5", "0.5"]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout(&o).trim(), "Stable, χ=0.5, α=1.0");
    let o = conflow(&["classify", "0.3", "0.3", "0.6"]);
    assert!(stdout(&o).starts_with("SemiStable"), "{}", stdout(&o));
    assert!(stdout(&o).contains("predicted β_∞=(0.6,0.6)"));
    let o = conflow(&["classify", "1/10", "1/5", "4/5", "--json"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["class"], "Unstable");
    assert_eq!(v["predicted_limit"]["side_p"], serde_json::json!([2]));
}

#[test]
fn invalid_divisors_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.toml", "[divisor]\nweights = [0.5, 0.5\n");
    let o = conflow(&["classify", "--config", &bad]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("bad.toml"), "{}", stderr(&o));
    assert_eq!(code(&conflow(&["classify", "1.5", "0.2"])), 1);
    assert_eq!(code(&conflow(&["classify", "x"])), 1);
    assert_eq!(code(&conflow(&["classify"])), 1);
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(code(&conflow(&[])), 1);
    assert_eq!(code(&conflow(&["frobnicate"])), 1);
    assert_eq!(code(&conflow(&["run"])), 1);
    assert_eq!(code(&conflow(&["run", "--resolution", "many"])), 1);
    assert_eq!(code(&conflow(&["--help"])), 0);
    let dir = tempfile::tempdir().unwrap();
    let typo = write(dir.path(), "typo.toml", &SMALL_STABLE.replace("t_max", "tmax"));
    let o = conflow(&["run", "--config", &typo, "--out", dir.path().join("r").to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("unknown field"), "{}", stderr(&o));
}

#[test]
fn soliton_table_examples() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("tab");
    let o = conflow(&["soliton-table", "0.1", "0.2", "0.8", "--json", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let rows = v["table"]["entries"].as_array().unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(v["table"]["threshold"], rows[1]["spec"]["w"]);
    assert!(out.join("soliton_table.txt").exists());
    let csv = std::fs::read_to_string(out.join("profiles").join("profile_01.csv")).unwrap();
    assert!(csv.starts_with("x,phi,R,theta"), "{}", &csv[..40.min(csv.len())]);

    let o = conflow(&["soliton-table", "0.5", "0.5", "0.5"]);
    assert_eq!(code(&o), 0);
    assert!(stderr(&o).contains("divisor not unstable"));
    let o = conflow(&["soliton-table", "0.1", "0.1", "0.9"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("threshold undefined"));
}

#[test]
fn run_layout_report_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "stable.toml", SMALL_STABLE);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        let o = conflow(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    }
    let m: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(a.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["partial"], false);
    assert_eq!(m["verdict"], "ConstantCurvature");
    for f in m["outputs"].as_array().unwrap() {
        assert!(a.join(f.as_str().unwrap()).exists(), "{f} listed but missing");
    }
    for f in ["config.toml", "trace.csv", "gauge_events.json", "report.json", "snapshots/index.json"] {
        assert!(m["outputs"].as_array().unwrap().iter().any(|x| x == f), "{f} not listed");
    }
    let mb: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(b.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["config_hash"], mb["config_hash"]);
    assert_eq!(std::fs::read(a.join("trace.csv")).unwrap(), std::fs::read(b.join("trace.csv")).unwrap());

    // report from trace + last snapshot alone reproduces the run's report
    let o = conflow(&["report", a.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let rebuilt: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let stored: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(a.join("report.json")).unwrap()).unwrap();
    assert_eq!(rebuilt, stored);
}

#[test]
fn flags_override_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "stable.toml", SMALL_STABLE);
    let out = dir.path().join("o");
    let o = conflow(&[
        "run", "--config", &cfg, "--out", out.to_str().unwrap(), "--resolution", "32", "--epsilon", "0.12",
        "--tmax", "0.4", "--dt", "0.04", "--seed", "7",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let m: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!((m["n_lat"].as_u64(), m["n_lon"].as_u64()), (Some(32), Some(64)));
    assert_eq!((m["eps"].as_f64(), m["dt"].as_f64(), m["seed"].as_u64()), (Some(0.12), Some(0.04), Some(7)));
    assert!((m["t_final"].as_f64().unwrap() - 0.4).abs() < 1e-9);
}

#[test]
fn undecided_and_numerical_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    // a semi-stable flow stopped long before its points merge
    let semi = SMALL_STABLE.replace("[0.5, 0.5, 0.5]", "[0.3, 0.3, 0.6]").replace("t_max = 1.0", "t_max = 0.2");
    let cfg = write(dir.path(), "semi.toml", &semi);
    let o = conflow(&["run", "--config", &cfg, "--out", dir.path().join("u").to_str().unwrap()]);
    assert_eq!(code(&o), 3, "{}{}", stdout(&o), stderr(&o));
    assert!(stdout(&o).contains("Undecided"));

    let rk2 = SMALL_STABLE.replace("dt = 0.02", "dt = 0.02\nscheme = \"rk2\"");
    let cfg = write(dir.path(), "rk2.toml", &rk2);
    let out = dir.path().join("n");
    let o = conflow(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
    assert!(stderr(&o).contains("CFL"));
    let m: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["partial"], true);
}

#[test]
fn axisymmetric_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "ax.toml",
        "[divisor]\nweights = [0.8, 0.3]\npositions = [[0.0, 0.0, 1.0], [0.0, 0.0, -1.0]]\n\
         [grid]\nn_lat = 200\nn_lon = 1\n[flow]\ndt = 0.005\nt_max = 40.0\n",
    );
    let out = dir.path().join("ax");
    let o = conflow(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(r["report"]["verdict"]["kind"], "Soliton");
    assert_eq!(r["report"]["verdict"]["beta_p"], 0.8);
}

#[test]
fn sweeps() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "base.toml", SMALL_STABLE);
    let empty = write(dir.path(), "empty.toml", "base = \"base.toml\"\n[axes]\neps = []\n");
    assert_eq!(code(&conflow(&["sweep", "--config", &empty, "--out", dir.path().join("e").to_str().unwrap()])), 1);
    let none = write(dir.path(), "none.toml", "base = \"base.toml\"\n");
    assert_eq!(code(&conflow(&["sweep", "--config", &none, "--out", dir.path().join("e").to_str().unwrap()])), 1);

    // eps = 0.05 is below one cell at 24 rings: that run is rejected, the other completes
    let spec = write(dir.path(), "sw.toml", "base = \"base.toml\"\n[axes]\neps = [0.15, 0.05]\ndt = [0.05]\n");
    let out = dir.path().join("sw");
    let o = conflow(&["sweep", "--config", &spec, "--out", out.to_str().unwrap(), "--workers", "2", "--tmax", "0.5"]);
    assert_eq!(code(&o), 1, "{}", stdout(&o));
    let agg = std::fs::read_to_string(out.join("aggregate.csv")).unwrap();
    let rows: Vec<&str> = agg.lines().collect();
    assert_eq!(rows.len(), 3);
    assert!(rows[1].contains("ConstantCurvature"), "{}", rows[1]);
    assert!(rows[2].contains("cone core unresolved"), "{}", rows[2]);
    assert!(out.join("run_000").join("trace.csv").exists());
}
