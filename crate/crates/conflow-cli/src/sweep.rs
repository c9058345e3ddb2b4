//! Cartesian sweeps. A spec names a base config and lists values per axis:
//!
//! ```toml
//! base = "unstable.toml"        # relative to the spec file
//!
//! [axes]
//! eps = [0.1, 0.05]
//! resolution = [32, 64]         # N -> N x 2N
//! dt = [0.02]
//! seed = [1, 2]
//! t_max = [50.0]
//! initial = ["zero", "bump"]
//! amplitude = [0.3]
//! ```
//!
//! Missing axes keep the base value. Runs go to `run_000`, `run_001`, … in
//! product order (last axis fastest) and one row each to `aggregate.csv`.

use anyhow::anyhow;
use rayon::prelude::*;
use serde::Deserialize;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use conflow::flow::{FlowConfig, InitialKind};

use crate::output::{run_to_dir, RunOutcome};
use crate::{CmdResult, Failure, Overrides, EXIT_NUMERICAL, EXIT_OK, EXIT_UNDECIDED, EXIT_USAGE};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepSpec {
    base: PathBuf,
    #[serde(default)]
    axes: Axes,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct Axes {
    eps: Option<Vec<f64>>,
    resolution: Option<Vec<usize>>,
    dt: Option<Vec<f64>>,
    seed: Option<Vec<u64>>,
    t_max: Option<Vec<f64>>,
    initial: Option<Vec<InitialKind>>,
    amplitude: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, Default)]
struct Point {
    eps: Option<f64>,
    resolution: Option<usize>,
    dt: Option<f64>,
    seed: Option<u64>,
    t_max: Option<f64>,
    initial: Option<InitialKind>,
    amplitude: Option<f64>,
}

fn product<T: Copy>(pts: Vec<Point>, axis: &Option<Vec<T>>, set: impl Fn(&mut Point, T)) -> Vec<Point> {
    match axis {
        None => pts,
        Some(vals) => pts
            .iter()
            .flat_map(|p| {
                vals.iter().map(|&v| {
                    let mut q = *p;
                    set(&mut q, v);
                    q
                })
            })
            .collect(),
    }
}

fn points(a: &Axes) -> Vec<Point> {
    let p = vec![Point::default()];
    let p = product(p, &a.eps, |q, v| q.eps = Some(v));
    let p = product(p, &a.resolution, |q, v| q.resolution = Some(v));
    let p = product(p, &a.dt, |q, v| q.dt = Some(v));
    let p = product(p, &a.seed, |q, v| q.seed = Some(v));
    let p = product(p, &a.t_max, |q, v| q.t_max = Some(v));
    let p = product(p, &a.initial, |q, v| q.initial = Some(v));
    product(p, &a.amplitude, |q, v| q.amplitude = Some(v))
}

fn configure(base: &FlowConfig, p: &Point) -> FlowConfig {
    let mut cfg = base.clone();
    Overrides { seed: p.seed, resolution: p.resolution, epsilon: p.eps, tmax: p.t_max, dt: p.dt }.apply(&mut cfg);
    if let Some(k) = p.initial {
        cfg.initial.kind = k;
    }
    if let Some(a) = p.amplitude {
        cfg.initial.amplitude = a;
    }
    cfg
}

fn f(x: f64) -> String {
    format!("{x:.9e}")
}

fn row(i: usize, cfg: &FlowConfig, res: &Result<RunOutcome, Failure>) -> String {
    let mut s = format!(
        "{i},run_{i:03},{},{},{},{},{},{},{:?},{}",
        cfg.flow.eps,
        cfg.grid.n_lat,
        cfg.grid.n_lon,
        cfg.flow.dt,
        cfg.flow.seed,
        cfg.flow.t_max,
        cfg.initial.kind,
        cfg.initial.amplitude
    );
    match res {
        Ok(o) => {
            write!(s, ",\"{}\",{},{}", o.status.replace('"', "'"), o.verdict, o.code).unwrap();
            match &o.last {
                Some(r) => {
                    let dmin = r.distances.iter().cloned().fold(f64::INFINITY, f64::min);
                    for v in [r.t, r.r_dev_off_cones, r.r_sup, r.w_norm, r.soliton_residual, dmin, r.area_drift] {
                        write!(s, ",{}", f(v)).unwrap();
                    }
                }
                None => s.push_str(",,,,,,,"),
            }
        }
        Err(e) => {
            write!(s, ",\"error: {}\",none,{},,,,,,,", e.err.to_string().replace('"', "'"), e.code).unwrap();
        }
    }
    s
}

pub fn cmd_sweep(spec_path: &Path, out: &Path, ov: &Overrides, workers: Option<usize>) -> CmdResult {
    let text = std::fs::read_to_string(spec_path)?;
    let spec: SweepSpec =
        toml::from_str(&text).map_err(|e| Failure::usage(anyhow!("{}: {e}", spec_path.display())))?;
    let base_path = match spec_path.parent() {
        Some(d) if spec.base.is_relative() => d.join(&spec.base),
        _ => spec.base.clone(),
    };
    let a = &spec.axes;
    let lens = [
        a.eps.as_ref().map(Vec::len),
        a.resolution.as_ref().map(Vec::len),
        a.dt.as_ref().map(Vec::len),
        a.seed.as_ref().map(Vec::len),
        a.t_max.as_ref().map(Vec::len),
        a.initial.as_ref().map(Vec::len),
        a.amplitude.as_ref().map(Vec::len),
    ];
    if lens.iter().all(Option::is_none) || lens.iter().any(|l| *l == Some(0)) {
        return Err(Failure::usage(anyhow!("empty sweep: {} defines no runs", spec_path.display())));
    }
    let mut base = FlowConfig::load(&base_path).map_err(Failure::usage)?;
    ov.apply(&mut base);
    let cfgs: Vec<FlowConfig> = points(a).iter().map(|p| configure(&base, p)).collect();
    std::fs::create_dir_all(out)?;
    let n_workers = workers.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get())).max(1);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(n_workers)
        .build()
        .map_err(|e| Failure::usage(anyhow!("worker pool: {e}")))?;
    let results: Vec<Result<RunOutcome, Failure>> = pool.install(|| {
        cfgs.par_iter()
            .enumerate()
            .map(|(i, cfg)| {
                let dir = out.join(format!("run_{i:03}"));
                cfg.validate().map_err(Failure::usage).and_then(|_| run_to_dir(cfg, &dir))
            })
            .collect()
    });
    let mut csv = String::from(
        "run,dir,eps,n_lat,n_lon,dt,seed,t_max,initial,amplitude,status,verdict,exit_code,\
         t_final,r_dev_off_cones,r_sup,w_norm,soliton_residual,min_distance,area_drift\n",
    );
    for (i, (cfg, r)) in cfgs.iter().zip(&results).enumerate() {
        csv.push_str(&row(i, cfg, r));
        csv.push('\n');
    }
    std::fs::write(out.join("aggregate.csv"), csv)?;
    let codes: Vec<u8> = results.iter().map(|r| r.as_ref().map_or_else(|e| e.code, |o| o.code)).collect();
    let count = |c: u8| codes.iter().filter(|&&x| x == c).count();
    println!(
        "{} runs in {}: {} numerical failures, {} rejected configs, {} undecided",
        cfgs.len(),
        out.display(),
        count(EXIT_NUMERICAL),
        count(EXIT_USAGE),
        count(EXIT_UNDECIDED)
    );
    // worst outcome wins: numerical failure, then rejected config, then undecided
    Ok([EXIT_NUMERICAL, EXIT_USAGE, EXIT_UNDECIDED].into_iter().find(|&c| count(c) > 0).unwrap_or(EXIT_OK))
}
