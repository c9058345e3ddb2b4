use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::sync::Arc;

use super::config::{FlowConfig, Gauge, InitialKind, Scheme};
use super::gauge::{center_of_mass, recenter};
use super::stepper::{cfl_limit, Stepper};
use super::trace::{FlowTrace, TraceRecord};
use crate::diagnostics::model_ball_area;
use crate::error::{Error, Result};
use crate::functionals::{
    background_ricci_potential, chow_shift, f_beta, f_beta_dissipation, f_beta_eps, hamilton_entropy,
    mu_estimate, normalized_w, recover_potential, ricci_potential, soliton_residual, MuEstimate,
};
use crate::geometry::background::{background_metric, half_chord_sq};
use crate::geometry::distance::ball_volume_from;
use crate::geometry::{build_grid, io, BackgroundMetric, DistanceField, MetricState};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum RunStatus {
    /// Reached `t_max`.
    Completed,
    /// All monitors stayed below the stop tolerance for `patience` samples.
    AutoStopped,
    /// A step failed; the state is the last good one.
    Failed(String),
}

#[derive(Debug, Clone, Serialize)]
pub struct Snapshot {
    pub t: f64,
    pub u: Vec<f64>,
    pub log_density: Vec<f64>,
    pub positions: Vec<[f64; 3]>,
}

#[derive(Debug, Clone)]
pub struct FlowRun {
    pub config: FlowConfig,
    pub initial: MetricState,
    pub state: MetricState,
    pub trace: FlowTrace,
    pub status: RunStatus,
    pub mu_initial: Option<MuEstimate>,
    pub mu_final: Option<MuEstimate>,
    pub snapshots: Vec<Snapshot>,
}

impl FlowRun {
    pub fn failed(&self) -> bool {
        matches!(self.status, RunStatus::Failed(_))
    }
}

/// Initial conformal factor from the `[initial]` section, renormalized.
pub fn initial_state(cfg: &FlowConfig, bg: Arc<BackgroundMetric>) -> Result<MetricState> {
    let g = bg.grid.clone();
    let u = match cfg.initial.kind {
        InitialKind::Zero => vec![0.0; g.len()],
        InitialKind::Bump => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.flow.seed);
            let z: f64 = rng.gen_range(-1.0..1.0);
            let ph: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            let r = (1.0 - z * z).sqrt();
            let c = if g.is_axisymmetric() { [0.0, 0.0, z.signum()] } else { [r * ph.cos(), r * ph.sin(), z] };
            let w2 = cfg.initial.width.powi(2);
            (0..g.len()).map(|k| cfg.initial.amplitude * (-half_chord_sq(&c, &g.xyz(k)) / w2).exp()).collect()
        }
        InitialKind::File => {
            let path = cfg.initial.path.as_ref().ok_or_else(|| Error::Config("initial.path missing".into()))?;
            let u = io::read_field(path)?;
            if u.len() != g.len() {
                return Err(Error::Config(format!(
                    "{}: {} values for a grid of {} nodes",
                    path.display(),
                    u.len(),
                    g.len()
                )));
            }
            u
        }
    };
    let mut s = MetricState::new(bg, u, 0.0)?;
    s.renormalize();
    Ok(s)
}

/// Background, grid and initial state for a configuration.
pub fn setup(cfg: &FlowConfig) -> Result<MetricState> {
    cfg.validate()?;
    let div = cfg.divisor()?;
    let grid = Arc::new(build_grid(cfg.grid.n_lat, cfg.grid.n_lon, &div)?);
    let bg = Arc::new(background_metric(grid, &div, cfg.flow.eps)?);
    initial_state(cfg, bg)
}

/// Flow-side bookkeeping of the monotone functionals.
struct Ledger {
    h: Vec<f64>,
    f_prev: f64,
    f_acc: f64,
    f_increase: f64,
    n_prev: f64,
    n_acc: f64,
    n_increase: f64,
    s0: f64,
    drift: f64,
    cg: (usize, usize),
}

impl Ledger {
    fn new(state: &MetricState) -> Result<Ledger> {
        let r_min = state.regular_curvature().iter().cloned().fold(f64::INFINITY, f64::min);
        // s(0) must lie strictly below min R; s ≡ 0 when R > 0
        let s0 = if r_min > 0.0 { 0.0 } else { r_min - 0.05 * r_min.abs().max(1.0) };
        let h = background_ricci_potential(&state.background);
        let f = f_raw(state, &h)?;
        let n = hamilton_entropy(state, s0).unwrap_or(f64::NAN);
        Ok(Ledger {
            h,
            f_prev: f,
            f_acc: f,
            f_increase: f64::NEG_INFINITY,
            n_prev: n,
            n_acc: n,
            n_increase: f64::NEG_INFINITY,
            s0,
            drift: 0.0,
            cg: (0, 0),
        })
    }

    fn after_step(&mut self, state: &MetricState) -> Result<()> {
        let f = f_raw(state, &self.h)?;
        let df = f - self.f_prev;
        self.f_acc += df;
        self.f_increase = self.f_increase.max(df);
        self.f_prev = f;
        let s = chow_shift(self.s0, state.t, state.half_chi());
        let n = hamilton_entropy(state, s).unwrap_or(f64::NAN);
        let dn = n - self.n_prev;
        self.n_acc += dn;
        self.n_increase = self.n_increase.max(dn);
        self.n_prev = n;
        Ok(())
    }

    /// New coordinates: the background changed, restart the raw values.
    fn rebase(&mut self, state: &MetricState) -> Result<()> {
        self.h = background_ricci_potential(&state.background);
        self.f_prev = f_raw(state, &self.h)?;
        let s = chow_shift(self.s0, state.t, state.half_chi());
        self.n_prev = hamilton_entropy(state, s).unwrap_or(f64::NAN);
        Ok(())
    }

    fn reset_interval(&mut self) {
        self.f_increase = f64::NEG_INFINITY;
        self.n_increase = f64::NEG_INFINITY;
        self.drift = 0.0;
        self.cg = (0, 0);
    }
}

fn f_raw(state: &MetricState, h: &[f64]) -> Result<f64> {
    let p = recover_potential(state)?;
    Ok(f_beta(&state.background, h, &p.phi))
}

/// Full set of monitors on the current state.
fn record(cfg: &FlowConfig, state: &MetricState, step: usize, led: &Ledger) -> Result<TraceRecord> {
    let hc = state.half_chi();
    let bg = &state.background;
    let r = state.regular_curvature();
    let m = state.masses();
    let df = DistanceField::new(state);
    let pos = bg.divisor.positions();
    let betas = bg.divisor.weight_values();
    let per_point: Vec<Vec<f64>> = pos.iter().map(|p| df.from_point(p)).collect();
    let near = df.from_points(pos);
    let mut r_dev: f64 = 0.0;
    for k in 0..r.len() {
        if pos.is_empty() || near[k] > cfg.monitors.delta_exclusion {
            r_dev = r_dev.max((r[k] - hc).abs());
        }
    }
    let mut distances = vec![];
    for i in 0..pos.len() {
        for j in i + 1..pos.len() {
            distances.push(df.to_point(&per_point[i], &pos[j]));
        }
    }
    let rad = cfg.monitors.ball_radius;
    let ball_ratios = per_point
        .iter()
        .zip(&betas)
        .map(|(d, b)| ball_volume_from(state, d, rad) / model_ball_area(*b, hc, rad))
        .collect();
    let rp = ricci_potential(state)?;
    let f_neg: Vec<f64> = rp.v.iter().map(|v| -v).collect();
    let phi = recover_potential(state)?.phi;
    let f_eps = f_beta_eps(bg, &led.h, &phi, cfg.monitors.eps_f).unwrap_or(f64::NAN);
    let com = center_of_mass(state);
    Ok(TraceRecord {
        t: state.t,
        step,
        area: state.area(),
        area_drift: led.drift,
        int_r: r.iter().zip(&m).map(|(r, m)| r * m).sum(),
        r_min: r.iter().cloned().fold(f64::INFINITY, f64::min),
        r_max: r.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        r_sup: r.iter().fold(0.0f64, |a, r| a.max(r.abs())),
        r_dev_off_cones: r_dev,
        f_beta: led.f_acc,
        f_beta_raw: led.f_prev,
        f_beta_eps: f_eps,
        dissipation: f_beta_dissipation(state, &rp),
        f_increase: led.f_increase,
        n_entropy: led.n_acc,
        n_raw: led.n_prev,
        chow_s: chow_shift(led.s0, state.t, hc),
        n_increase: led.n_increase,
        w_norm: normalized_w(state, &f_neg).value,
        soliton_residual: soliton_residual(state, &rp.v),
        diameter: df.diameter(),
        distances,
        ball_ratios,
        com: (com[0] * com[0] + com[1] * com[1] + com[2] * com[2]).sqrt(),
        cg_iterations: if led.cg.1 == 0 { 0.0 } else { led.cg.0 as f64 / led.cg.1 as f64 },
    })
}

fn snapshot(state: &MetricState) -> Snapshot {
    Snapshot {
        t: state.t,
        u: state.u.clone(),
        log_density: state.log_density(),
        positions: state.background.divisor.positions().to_vec(),
    }
}

fn mu_of(state: &MetricState, budget: usize) -> Option<MuEstimate> {
    let rp = ricci_potential(state).ok()?;
    let f0: Vec<f64> = rp.v.iter().map(|v| -v).collect();
    mu_estimate(state, &f0, budget).ok()
}

/// Runs the flow described by `cfg`. Setup problems are errors; a numerical
/// failure mid-run ends the run with status `Failed` and a partial trace.
pub fn run(cfg: &FlowConfig) -> Result<FlowRun> {
    let state = setup(cfg)?;
    run_from(cfg, state)
}

pub fn run_from(cfg: &FlowConfig, mut state: MetricState) -> Result<FlowRun> {
    if cfg.flow.scheme == Scheme::Rk2 {
        let lim = cfl_limit(&state);
        if cfg.flow.dt > lim {
            return Err(Error::Numerical {
                t: 0.0,
                msg: format!("CFL violated: dt = {} exceeds the explicit limit {lim:.3e} on this grid", cfg.flow.dt),
            });
        }
    }
    let initial = state.clone();
    let stepper = Stepper { scheme: cfg.flow.scheme, form: cfg.flow.rhs, dt: cfg.flow.dt };
    let per_sample = cfg.steps_per_sample();
    let n_steps = (cfg.flow.t_max / cfg.flow.dt).round() as usize;
    let snap_steps = if cfg.flow.snapshot_every > 0.0 {
        ((cfg.flow.snapshot_every / cfg.flow.dt).round() as usize).max(1)
    } else {
        0
    };
    let mut trace = FlowTrace::default();
    let mut snapshots = vec![snapshot(&state)];
    if cfg.flow.gauge == Gauge::Com {
        if let Some((next, ev)) = recenter(&state, cfg.monitors.gauge_tol)? {
            state = next;
            trace.gauge_events.push(ev);
        }
    }
    let mu_initial = mu_of(&state, cfg.monitors.mu_budget);
    let mut led = Ledger::new(&state)?;
    trace.records.push(record(cfg, &state, 0, &led)?);
    led.reset_interval();
    let mut status = RunStatus::Completed;
    let mut quiet = 0;
    for step in 1..=n_steps {
        let mut next = state.clone();
        match stepper.step(&mut next) {
            Ok(info) => {
                led.cg.0 += info.cg_iterations;
                led.cg.1 += 1;
            }
            Err(e) => {
                status = RunStatus::Failed(e.to_string());
                break;
            }
        }
        if step % cfg.flow.renormalize_every == 0 {
            led.drift = led.drift.max(next.renormalize().abs());
        }
        if let Err(e) = led.after_step(&next) {
            status = RunStatus::Failed(e.to_string());
            break;
        }
        state = next;
        if snap_steps > 0 && step % snap_steps == 0 {
            snapshots.push(snapshot(&state));
        }
        if step % per_sample != 0 && step != n_steps {
            continue;
        }
        if cfg.flow.gauge == Gauge::Com {
            match recenter(&state, cfg.monitors.gauge_tol) {
                Ok(Some((next, ev))) => {
                    state = next;
                    trace.gauge_events.push(ev);
                    led.rebase(&state)?;
                }
                Ok(None) => {}
                Err(e) => {
                    status = RunStatus::Failed(format!("re-centring at t = {:.3}: {e}", state.t));
                    break;
                }
            }
        }
        let rec = match record(cfg, &state, step, &led) {
            Ok(r) => r,
            Err(e) => {
                status = RunStatus::Failed(e.to_string());
                break;
            }
        };
        led.reset_interval();
        let prev = trace.records.last().expect("initial record");
        let tol = cfg.stop.tol;
        let still = (rec.f_beta - prev.f_beta).abs() < tol
            && (rec.n_entropy - prev.n_entropy).abs() < tol
            && (rec.r_dev_off_cones - prev.r_dev_off_cones).abs() < tol
            && (rec.w_norm - prev.w_norm).abs() < tol;
        quiet = if still { quiet + 1 } else { 0 };
        trace.records.push(rec);
        if cfg.stop.auto && quiet >= cfg.stop.patience {
            status = RunStatus::AutoStopped;
            break;
        }
    }
    if let RunStatus::Failed(msg) = &status {
        trace.failure = Some(msg.clone());
    }
    if snapshots.last().map_or(true, |s| s.t != state.t) {
        snapshots.push(snapshot(&state));
    }
    let mu_final = mu_of(&state, cfg.monitors.mu_budget);
    Ok(FlowRun { config: cfg.clone(), initial, state, trace, status, mu_initial, mu_final, snapshots })
}
