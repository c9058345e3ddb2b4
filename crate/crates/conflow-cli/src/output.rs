//! One run = one directory:
//!
//! ```text
//! manifest.json        written first (partial), rewritten at the end
//! config.toml          the effective config, overrides applied; hashed
//! trace.csv            one row per sample
//! gauge_events.json    Möbius re-centrings
//! mu.json              μ upper-bound estimates at the start and end (2-D runs)
//! snapshots/           field files named by time + index.json
//! report.json          convergence report, rebuilt from trace + last snapshot
//! ```

use anyhow::anyhow;
use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use conflow::diagnostics::{detect_convergence, Samples, Verdict};
use conflow::flow::axisym::{moment_record, polar_divisor};
use conflow::flow::{run, run_axisymmetric, FlowConfig, FlowTrace, MomentState, RunStatus, TraceRecord};
use conflow::functionals::{normalized_w, ricci_potential, soliton_residual};
use conflow::geometry::background::background_metric;
use conflow::geometry::{build_grid, calibrate_units, io, MetricState};

use crate::{CmdResult, Failure, Overrides, EXIT_NUMERICAL, EXIT_OK, EXIT_UNDECIDED};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SnapshotEntry {
    pub t: f64,
    pub file: String,
    pub positions: Vec<[f64; 3]>,
}

#[derive(Debug, Serialize)]
struct Manifest {
    tool: &'static str,
    version: &'static str,
    config_hash: String,
    units: serde_json::Value,
    solver: &'static str,
    n_lat: usize,
    n_lon: usize,
    eps: f64,
    dt: f64,
    t_max: f64,
    seed: u64,
    status: String,
    partial: bool,
    t_final: Option<f64>,
    verdict: Option<String>,
    exit_code: Option<u8>,
    wall_time_s: f64,
    outputs: Vec<String>,
}

/// What a finished run left behind, for the sweep aggregate.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub code: u8,
    pub status: String,
    pub verdict: String,
    pub last: Option<TraceRecord>,
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn units_json() -> serde_json::Value {
    match calibrate_units() {
        Ok(u) => serde_json::to_value(u).unwrap_or_default(),
        Err(e) => json!({ "error": e.to_string() }),
    }
}

fn status_str(s: &RunStatus) -> String {
    match s {
        RunStatus::Completed => "completed".into(),
        RunStatus::AutoStopped => "auto-stopped".into(),
        RunStatus::Failed(m) => format!("failed: {m}"),
    }
}

fn snap_name(prefix: &str, t: f64) -> String {
    format!("{prefix}_t{t:011.4}.bin")
}

struct Writer {
    dir: PathBuf,
    outputs: Vec<String>,
}

impl Writer {
    fn write(&mut self, rel: &str, bytes: impl AsRef<[u8]>) -> std::io::Result<()> {
        std::fs::write(self.dir.join(rel), bytes)?;
        self.outputs.push(rel.to_string());
        Ok(())
    }

    fn field(&mut self, rel: &str, f: &[f64]) -> Result<(), Failure> {
        io::write_field_bin(&self.dir.join(rel), f)?;
        self.outputs.push(rel.to_string());
        Ok(())
    }
}

/// Runs `cfg` into `dir`. Setup errors are returned (after flagging the
/// manifest); numerical failures mid-run still write every artifact.
pub fn run_to_dir(cfg: &FlowConfig, dir: &Path) -> Result<RunOutcome, Failure> {
    std::fs::create_dir_all(dir.join("snapshots"))?;
    let text = cfg.to_toml();
    let mut manifest = Manifest {
        tool: "conflow",
        version: env!("CARGO_PKG_VERSION"),
        config_hash: hex(&Sha256::digest(text.as_bytes())),
        units: units_json(),
        solver: if cfg.is_axisymmetric() { "moment-1d" } else { "lat-lon" },
        n_lat: cfg.grid.n_lat,
        n_lon: cfg.grid.n_lon,
        eps: cfg.flow.eps,
        dt: cfg.flow.dt,
        t_max: cfg.flow.t_max,
        seed: cfg.flow.seed,
        status: "running".into(),
        partial: true,
        t_final: None,
        verdict: None,
        exit_code: None,
        wall_time_s: 0.0,
        outputs: vec![],
    };
    let save = |m: &Manifest| -> std::io::Result<()> {
        std::fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(m).expect("manifest serializes"))
    };
    save(&manifest)?;
    let mut w = Writer { dir: dir.to_path_buf(), outputs: vec!["manifest.json".into()] };
    w.write("config.toml", &text)?;
    let clock = Instant::now();

    let produced = (|| -> Result<(FlowTrace, RunStatus, Vec<SnapshotEntry>), Failure> {
        let mut index = vec![];
        if cfg.is_axisymmetric() {
            let r = run_axisymmetric(cfg)?;
            for s in [&r.initial, &r.state] {
                let file = snap_name("psi", s.t);
                w.field(&format!("snapshots/{file}"), &s.psi)?;
                index.push(SnapshotEntry { t: s.t, file, positions: r.divisor.positions().to_vec() });
            }
            Ok((r.trace, r.status, index))
        } else {
            let r = run(cfg)?;
            let mut snaps = r.snapshots.clone();
            if snaps.last().map(|s| s.t) != Some(r.state.t) {
                snaps.push(conflow::flow::Snapshot {
                    t: r.state.t,
                    u: r.state.u.clone(),
                    log_density: vec![],
                    positions: r.state.background.divisor.positions().to_vec(),
                });
            }
            for s in &snaps {
                let file = snap_name("u", s.t);
                w.field(&format!("snapshots/{file}"), &s.u)?;
                index.push(SnapshotEntry { t: s.t, file, positions: s.positions.clone() });
            }
            w.write("snapshots/grid.json", serde_json::to_string(&io::grid_json(r.state.grid()))?)?;
            let mu = |m: &Option<conflow::functionals::MuEstimate>| {
                m.as_ref().map(|m| json!({ "value": m.value, "iterations": m.iterations, "tag": m.tag }))
            };
            w.write(
                "mu.json",
                serde_json::to_string_pretty(&json!({ "initial": mu(&r.mu_initial), "final": mu(&r.mu_final) }))?,
            )?;
            Ok((r.trace, r.status, index))
        }
    })();
    let (trace, status, index) = match produced {
        Ok(p) => p,
        Err(f) => {
            manifest.status = format!("error: {}", f.err);
            manifest.exit_code = Some(f.code);
            manifest.wall_time_s = clock.elapsed().as_secs_f64();
            manifest.outputs = w.outputs;
            save(&manifest)?;
            return Err(f);
        }
    };
    w.write("snapshots/index.json", serde_json::to_string_pretty(&index)?)?;
    trace.write_csv(&dir.join("trace.csv"))?;
    w.outputs.push("trace.csv".into());
    w.write("gauge_events.json", serde_json::to_string_pretty(&trace.gauge_events)?)?;

    manifest.status = status_str(&status);
    manifest.t_final = trace.last().map(|r| r.t);
    let (code, verdict) = match rebuild_report(dir) {
        Ok((value, code)) => {
            w.write("report.json", serde_json::to_string_pretty(&value)?)?;
            (code, value["report"]["verdict"]["kind"].as_str().unwrap_or("?").to_string())
        }
        Err(f) => {
            manifest.status = format!("{}; report failed: {}", manifest.status, f.err);
            let code = if matches!(status, RunStatus::Failed(_)) { EXIT_NUMERICAL } else { f.code };
            (code, "none".to_string())
        }
    };
    manifest.partial = matches!(status, RunStatus::Failed(_)) || verdict == "none";
    manifest.verdict = Some(verdict.clone());
    manifest.exit_code = Some(code);
    manifest.wall_time_s = clock.elapsed().as_secs_f64();
    manifest.outputs = w.outputs;
    save(&manifest)?;
    Ok(RunOutcome { code, status: manifest.status, verdict, last: trace.last().cloned() })
}

/// Convergence report from `config.toml`, `trace.csv` and the last snapshot
/// of a run directory; returns the report document and its exit code.
pub fn rebuild_report(dir: &Path) -> Result<(serde_json::Value, u8), Failure> {
    let cfg = FlowConfig::load(&dir.join("config.toml"))?;
    let trace = FlowTrace::read_csv(&dir.join("trace.csv"))?;
    let index: Vec<SnapshotEntry> =
        serde_json::from_str(&std::fs::read_to_string(dir.join("snapshots").join("index.json"))?)?;
    let last = index.last().ok_or_else(|| Failure::usage(anyhow!("no snapshots in {}", dir.display())))?;
    let field = io::read_field_bin(&dir.join("snapshots").join(&last.file))?;
    let divisor = cfg.divisor()?;
    let delta = cfg.monitors.delta_exclusion;
    let (samples, evaluated) = if cfg.is_axisymmetric() {
        let (_, bp, bq, ends) = polar_divisor(&cfg)?;
        let state = MomentState { psi: field, beta_p: bp, beta_q: bq, t: last.t };
        let rec = moment_record(&cfg, &state, 0, 0.0, &ends);
        let ev = json!({ "area": rec.area, "int_r": rec.int_r, "w_norm": rec.w_norm,
                         "soliton_residual": rec.soliton_residual, "r_sup": rec.r_sup });
        (Samples::from_moment(&state, &ends), ev)
    } else {
        let grid = Arc::new(build_grid(cfg.grid.n_lat, cfg.grid.n_lon, &divisor)?);
        let moved = divisor.with_positions(last.positions.clone())?;
        let bg = Arc::new(background_metric(grid, &moved, cfg.flow.eps)?);
        let state = MetricState::new(bg, field, last.t)?;
        let rp = ricci_potential(&state)?;
        let f: Vec<f64> = rp.v.iter().map(|v| -v).collect();
        let r = state.regular_curvature();
        let ev = json!({
            "area": state.area(),
            "int_r": state.integrate(&state.scalar_curvature()),
            "w_norm": normalized_w(&state, &f).value,
            "soliton_residual": soliton_residual(&state, &rp.v),
            "r_sup": r.iter().fold(0.0f64, |a, x| a.max(x.abs())),
        });
        (Samples::from_state(&state), ev)
    };
    let report = detect_convergence(&trace, &samples, &divisor, &cfg.diagnostics, delta)?;
    let code = if trace.failure.is_some() {
        EXIT_NUMERICAL
    } else if matches!(report.verdict, Verdict::Undecided { .. }) {
        EXIT_UNDECIDED
    } else {
        EXIT_OK
    };
    let value = json!({
        "t_final": last.t,
        "snapshot": last.file,
        "failure": trace.failure,
        "evaluated": evaluated,
        "report": report,
    });
    Ok((value, code))
}

pub fn cmd_run(config: &Path, out: &Path, ov: &Overrides) -> CmdResult {
    let mut cfg = FlowConfig::load(config).map_err(Failure::usage)?;
    ov.apply(&mut cfg);
    cfg.validate().map_err(Failure::usage)?;
    let o = run_to_dir(&cfg, out)?;
    let last = o.last.as_ref();
    println!(
        "{}: {} at t = {}, verdict {}",
        out.display(),
        o.status,
        last.map_or(f64::NAN, |r| r.t),
        o.verdict
    );
    Ok(o.code)
}

pub fn cmd_report(dir: &Path, out: Option<&Path>) -> CmdResult {
    let (value, code) = rebuild_report(dir)?;
    let text = serde_json::to_string_pretty(&value)?;
    match out {
        Some(p) => std::fs::write(p, &text)?,
        None => println!("{text}"),
    }
    Ok(code)
}
