//! Circle-invariant flow in the moment coordinate.
//!
//! A rotationally symmetric metric of area 2 with cones at the poles is
//! `g = dx²/ψ + ψ dα²` on `[−1, 1] × [0, 1)`, with `ψ(±1) = 0` and the
//! endpoint slopes `ψ'(±1) = ∓4π(1 − β_±)` fixed by the cone angles. Then
//! `dg = dx dα`, `R = −ψ''/4π`, and the normalized flow modulo the conformal
//! field `S ∂_x`, `S(x) = ∫_{−1}^x (½χ − R)`, reads
//!
//! ```text
//! ψ_t = (½χ − R) ψ − S ψ'.
//! ```
//!
//! The cones stay exact (no ε), the area is conserved identically, and the
//! solitons `ψ'' + cψ' + 2πχ = 0` are stationary, so no gauge fixing is
//! needed. Steps are linearly implicit: the coefficients `ψ`, `S` are frozen
//! and a tridiagonal system is solved for the new `ψ`.
//!
//! The cone with weight `β_p` sits at `x = +1` (the north pole), the one with
//! `β_q` at `x = −1`.

use std::f64::consts::PI;

use super::config::{FlowConfig, InitialKind};
use super::run::RunStatus;
use super::trace::{FlowTrace, TraceRecord};
use crate::diagnostics::model_ball_area;
use crate::error::{Error, Result};
use crate::functionals::chow_shift;
use crate::marked_sphere::Divisor;
use crate::soliton::RadialProfile;

const POLE_TOL: f64 = 1e-9;

/// A circle-invariant metric sampled at `n + 1` equispaced moment nodes.
#[derive(Debug, Clone)]
pub struct MomentState {
    pub psi: Vec<f64>,
    /// Weight at `x = +1`.
    pub beta_p: f64,
    /// Weight at `x = −1`.
    pub beta_q: f64,
    pub t: f64,
}

impl MomentState {
    /// The polynomial metric `π(1 − x²)(χ + (β_q − β_p)x)`, which has the
    /// right cone angles and constant curvature only when `β_p = β_q`.
    pub fn initial(beta_p: f64, beta_q: f64, n: usize) -> MomentState {
        let chi = 2.0 - beta_p - beta_q;
        let h = 2.0 / n as f64;
        let psi = (0..=n)
            .map(|i| {
                let x = -1.0 + i as f64 * h;
                PI * (1.0 - x * x) * (chi + (beta_q - beta_p) * x)
            })
            .collect();
        MomentState { psi, beta_p, beta_q, t: 0.0 }
    }

    pub fn from_profile(p: &RadialProfile, n: usize) -> MomentState {
        let h = 2.0 / n as f64;
        let mut psi: Vec<f64> = (0..=n).map(|i| p.psi(-1.0 + i as f64 * h)).collect();
        psi[0] = 0.0;
        psi[n] = 0.0;
        MomentState { psi, beta_p: p.spec.beta_p, beta_q: p.spec.beta_q, t: 0.0 }
    }

    pub fn n(&self) -> usize {
        self.psi.len() - 1
    }

    pub fn h(&self) -> f64 {
        2.0 / self.n() as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        -1.0 + i as f64 * self.h()
    }

    pub fn chi(&self) -> f64 {
        2.0 - self.beta_p - self.beta_q
    }

    /// `ψ'` with the exact cone slopes at the ends.
    pub fn dpsi(&self) -> Vec<f64> {
        let n = self.n();
        let h = self.h();
        let mut d = vec![0.0; n + 1];
        d[0] = 4.0 * PI * (1.0 - self.beta_q);
        d[n] = -4.0 * PI * (1.0 - self.beta_p);
        for i in 1..n {
            d[i] = (self.psi[i + 1] - self.psi[i - 1]) / (2.0 * h);
        }
        d
    }

    /// `R = −ψ''/4π`; one-sided second differences at the ends.
    pub fn curvature(&self) -> Vec<f64> {
        let n = self.n();
        let h = self.h();
        let p = &self.psi;
        let mut r = vec![0.0; n + 1];
        for i in 1..n {
            r[i] = -(p[i + 1] - 2.0 * p[i] + p[i - 1]) / (h * h) / (4.0 * PI);
        }
        // ψ'' at an end from ψ(end) = 0, the exact slope and the next two nodes
        let d = self.dpsi();
        r[0] = -2.0 * (p[1] - p[0] - h * d[0]) / (h * h) / (4.0 * PI);
        r[n] = -2.0 * (p[n - 1] - p[n] + h * d[n]) / (h * h) / (4.0 * PI);
        r
    }

    /// The field `S = ½χ(x + 1) + (ψ' − ψ'(−1))/4π`.
    pub fn shift_field(&self) -> Vec<f64> {
        let d = self.dpsi();
        let hc = 0.5 * self.chi();
        (0..=self.n()).map(|i| hc * (self.x(i) + 1.0) + (d[i] - d[0]) / (4.0 * PI)).collect()
    }

    /// Ricci potential `v` (`Δv = R − ½χ`, i.e. `ψv' = −4πS`), normalized to
    /// `∫e^{−v} dx = 2`.
    pub fn ricci_potential(&self) -> Vec<f64> {
        let n = self.n();
        let h = self.h();
        let s = self.shift_field();
        let d = self.dpsi();
        let r = self.curvature();
        let hc = 0.5 * self.chi();
        let mut dv = vec![0.0; n + 1];
        for i in 1..n {
            dv[i] = -4.0 * PI * s[i] / self.psi[i];
        }
        // S ≈ (½χ − R)(x − x_end) and ψ ≈ ψ'(x − x_end) at an end
        dv[0] = -4.0 * PI * (hc - r[0]) / d[0];
        dv[n] = -4.0 * PI * (hc - r[n]) / d[n];
        let mut v = vec![0.0; n + 1];
        for i in 1..=n {
            v[i] = v[i - 1] + 0.5 * h * (dv[i - 1] + dv[i]);
        }
        let z = trapezoid(h, &v.iter().map(|v| (-v).exp()).collect::<Vec<_>>());
        let c = (z / 2.0).ln();
        v.iter_mut().for_each(|x| *x += c);
        v
    }

    /// Cumulative distance from `x = −1`, exact for piecewise linear `ψ`.
    pub fn distance_from_south(&self) -> Vec<f64> {
        let h = self.h();
        let mut d = vec![0.0; self.n() + 1];
        for i in 1..=self.n() {
            let a = self.psi[i - 1].max(0.0).sqrt();
            let b = self.psi[i].max(0.0).sqrt();
            d[i] = d[i - 1] + 2.0 * h / (a + b);
        }
        d
    }

    /// Curvature against the area enclosed from the `x = +1` cone.
    pub fn curvature_vs_area(&self) -> Vec<(f64, f64)> {
        let r = self.curvature();
        (0..=self.n()).rev().map(|i| (1.0 - self.x(i), r[i])).collect()
    }
}

fn trapezoid(h: f64, f: &[f64]) -> f64 {
    let n = f.len() - 1;
    h * (f[1..n].iter().sum::<f64>() + 0.5 * (f[0] + f[n]))
}

fn solve_tridiagonal(a: &[f64], b: &[f64], c: &[f64], d: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut cp = vec![0.0; n];
    let mut dp = vec![0.0; n];
    cp[0] = c[0] / b[0];
    dp[0] = d[0] / b[0];
    for i in 1..n {
        let m = b[i] - a[i] * cp[i - 1];
        cp[i] = c[i] / m;
        dp[i] = (d[i] - a[i] * dp[i - 1]) / m;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = dp[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = dp[i] - cp[i] * x[i + 1];
    }
    x
}

/// One linearly implicit step of length `dt`.
pub fn moment_step(state: &mut MomentState, dt: f64) -> Result<()> {
    let n = state.n();
    let h = state.h();
    let hc = 0.5 * state.chi();
    let s = state.shift_field();
    let m = n - 1;
    let (mut a, mut b, mut c, mut d) = (vec![0.0; m], vec![0.0; m], vec![0.0; m], vec![0.0; m]);
    for k in 0..m {
        let i = k + 1;
        let diff = state.psi[i] / (4.0 * PI * h * h);
        let adv = s[i] / (2.0 * h);
        a[k] = -dt * (diff + adv);
        b[k] = 1.0 + dt * (2.0 * diff - hc);
        c[k] = -dt * (diff - adv);
        d[k] = state.psi[i];
    }
    let next = solve_tridiagonal(&a, &b, &c, &d);
    if let Some(k) = next.iter().position(|p| !(p.is_finite() && *p > 0.0)) {
        return Err(Error::Numerical { t: state.t, msg: format!("ψ lost positivity at x = {:.4}", state.x(k + 1)) });
    }
    state.psi[1..n].copy_from_slice(&next);
    state.t += dt;
    Ok(())
}

/// The divisor of an axisymmetric configuration (points default to the
/// north then south pole), the weights `(β at +1, β at −1)` and, per divisor
/// point in sorted order, its end (`1` for `x = +1`, `0` for `x = −1`).
pub fn polar_divisor(cfg: &FlowConfig) -> Result<(Divisor, f64, f64, Vec<usize>)> {
    let w = &cfg.divisor.weights;
    if w.len() > 2 {
        return Err(Error::Config(format!("the axisymmetric solver takes at most two cone points, got {}", w.len())));
    }
    let positions = match &cfg.divisor.positions {
        Some(p) => p.clone(),
        None => [[0.0, 0.0, 1.0], [0.0, 0.0, -1.0]][..w.len()].to_vec(),
    };
    let div = Divisor::new(w.clone(), positions)?;
    let zs: Vec<f64> = div.positions().iter().map(|p| p[2]).collect();
    if let Some(z) = zs.iter().find(|z| (z.abs() - 1.0).abs() > POLE_TOL) {
        return Err(Error::Config(format!("cone point with z = {z} is not at a pole")));
    }
    let (mut bp, mut bq) = (0.0, 0.0);
    let mut ends = vec![];
    for (b, z) in div.weight_values().iter().zip(&zs) {
        if *z > 0.0 {
            bp = *b;
            ends.push(1);
        } else {
            bq = *b;
            ends.push(0);
        }
    }
    Ok((div, bp, bq, ends))
}

#[derive(Debug, Clone)]
pub struct AxisymmetricRun {
    pub divisor: Divisor,
    /// End of each divisor point, as in [`polar_divisor`].
    pub ends: Vec<usize>,
    pub initial: MomentState,
    pub state: MomentState,
    pub trace: FlowTrace,
    pub status: RunStatus,
}

/// Monitors on a moment state. `F_β` has no moment-coordinate evaluation and
/// is reported as NaN; its predicted rate is still given.
pub fn moment_record(cfg: &FlowConfig, s: &MomentState, step: usize, s0: f64, ends: &[usize]) -> TraceRecord {
    let n = s.n();
    let h = s.h();
    let hc = 0.5 * s.chi();
    let chi = s.chi();
    let r = s.curvature();
    let v = s.ricci_potential();
    let dist = s.distance_from_south();
    let total = dist[n];
    let delta = cfg.monitors.delta_exclusion;
    let mut r_dev: f64 = 0.0;
    for i in 0..=n {
        let near_q = ends.contains(&0) && dist[i] <= delta;
        let near_p = ends.contains(&1) && total - dist[i] <= delta;
        if !(near_q || near_p) {
            r_dev = r_dev.max((r[i] - hc).abs());
        }
    }
    // f = −v; e^{−f} = e^{v} normalized to mass 2
    let ev: Vec<f64> = v.iter().map(|v| v.exp()).collect();
    let zc = (trapezoid(h, &ev) / 2.0).ln();
    let f: Vec<f64> = v.iter().map(|v| -v + zc).collect();
    let mut df = vec![0.0; n + 1];
    for i in 1..n {
        df[i] = (f[i + 1] - f[i - 1]) / (2.0 * h);
    }
    df[0] = (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * h);
    df[n] = (3.0 * f[n] - 4.0 * f[n - 1] + f[n - 2]) / (2.0 * h);
    let w_int: Vec<f64> =
        (0..=n).map(|i| ((r[i] + s.psi[i] * df[i] * df[i] / (4.0 * PI)) / chi + f[i]) * (-f[i]).exp()).collect();
    let mut res = vec![0.0; n + 1];
    for i in 1..n {
        let f2 = (f[i + 1] - 2.0 * f[i] + f[i - 1]) / (h * h);
        res[i] = 0.5 * (s.psi[i] * f2).powi(2) / (16.0 * PI * PI);
    }
    // v' = −v renormalized to ∫e^{−v'} = 2 is `f` itself
    let diss: Vec<f64> = f.iter().map(|f| -0.5 * f * (1.0 - (-f).exp())).collect();
    let sh = chow_shift(s0, s.t, hc);
    let n_ent = if r.iter().all(|r| r - sh > 0.0) {
        trapezoid(h, &r.iter().map(|r| (r - sh) * (r - sh).ln()).collect::<Vec<_>>())
    } else {
        f64::NAN
    };
    let rad = cfg.monitors.ball_radius;
    let ball_at = |end: usize| {
        // area of the ball about x = ±1
        let from_end: Vec<f64> = if end == 0 { dist.clone() } else { dist.iter().map(|d| total - d).collect() };
        let beta = if end == 0 { s.beta_q } else { s.beta_p };
        let mut area = 0.0;
        for i in 0..n {
            let (d0, d1) = (from_end[i], from_end[i + 1]);
            let (lo, hi) = (d0.min(d1), d0.max(d1));
            if hi <= rad {
                area += h;
            } else if lo < rad {
                area += h * (rad - lo) / (hi - lo);
            }
        }
        area / model_ball_area(beta, hc, rad)
    };
    let distances = if ends.len() == 2 { vec![total] } else { vec![] };
    TraceRecord {
        t: s.t,
        step,
        area: 2.0,
        area_drift: 0.0,
        int_r: trapezoid(h, &r),
        r_min: r.iter().cloned().fold(f64::INFINITY, f64::min),
        r_max: r.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        r_sup: r.iter().fold(0.0f64, |a, r| a.max(r.abs())),
        r_dev_off_cones: r_dev,
        f_beta: f64::NAN,
        f_beta_raw: f64::NAN,
        f_beta_eps: f64::NAN,
        dissipation: trapezoid(h, &diss),
        f_increase: f64::NAN,
        n_entropy: n_ent,
        n_raw: n_ent,
        chow_s: sh,
        n_increase: f64::NAN,
        w_norm: trapezoid(h, &w_int),
        soliton_residual: trapezoid(h, &res),
        diameter: total,
        distances,
        ball_ratios: ends.iter().map(|&e| ball_at(e)).collect(),
        com: 0.0,
        cg_iterations: 0.0,
    }
}

/// Runs the circle-invariant flow for a divisor with at most two cone points,
/// both at poles. `grid.n_lat` is the number of moment intervals; the time
/// step, horizon, sampling and monitors come from the usual sections.
pub fn run_axisymmetric(cfg: &FlowConfig) -> Result<AxisymmetricRun> {
    cfg.validate()?;
    let (divisor, bp, bq, ends) = polar_divisor(cfg)?;
    let n = cfg.grid.n_lat;
    if n < 16 {
        return Err(Error::Config(format!("need at least 16 moment intervals, got {n}")));
    }
    let mut state = MomentState::initial(bp, bq, n);
    if cfg.initial.kind == InitialKind::Bump {
        // multiplicative bump centred on the equator keeps the end slopes
        let w2 = cfg.initial.width.powi(2);
        for i in 1..n {
            let x = state.x(i);
            state.psi[i] *= 1.0 + cfg.initial.amplitude * (-x * x / w2).exp() * (1.0 - x * x);
        }
    } else if cfg.initial.kind == InitialKind::File {
        return Err(Error::Config("the axisymmetric solver has no field-file initial data".into()));
    }
    let run = run_moment_from(cfg, state, &ends)?;
    Ok(AxisymmetricRun { divisor, ends, ..run })
}

/// Runs from a given moment state; `ends` as in [`polar_divisor`].
pub fn run_moment_from(cfg: &FlowConfig, mut state: MomentState, ends: &[usize]) -> Result<AxisymmetricRun> {
    let initial = state.clone();
    let r0 = state.curvature();
    let r_min = r0.iter().cloned().fold(f64::INFINITY, f64::min);
    let s0 = if r_min > 0.0 { 0.0 } else { r_min - 0.05 * r_min.abs().max(1.0) };
    let dt = cfg.flow.dt;
    let per_sample = cfg.steps_per_sample();
    let n_steps = (cfg.flow.t_max / dt).round() as usize;
    let mut trace = FlowTrace::default();
    trace.records.push(moment_record(cfg, &state, 0, s0, ends));
    let mut status = RunStatus::Completed;
    let mut quiet = 0;
    for step in 1..=n_steps {
        if let Err(e) = moment_step(&mut state, dt) {
            status = RunStatus::Failed(e.to_string());
            break;
        }
        if step % per_sample != 0 && step != n_steps {
            continue;
        }
        let rec = moment_record(cfg, &state, step, s0, ends);
        let prev = trace.records.last().expect("initial record");
        let tol = cfg.stop.tol;
        let still = (rec.r_dev_off_cones - prev.r_dev_off_cones).abs() < tol
            && (rec.w_norm - prev.w_norm).abs() < tol
            && (rec.soliton_residual - prev.soliton_residual).abs() < tol;
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
    Ok(AxisymmetricRun { divisor: Divisor::empty(), ends: ends.to_vec(), initial, state, trace, status })
}

/// Configuration for the circle-invariant run with `β_p` at the north pole
/// and `β_q` at the south pole.
pub fn axisymmetric_config(beta_p: f64, beta_q: f64) -> FlowConfig {
    use crate::marked_sphere::Weight;
    let mut weights = vec![];
    let mut positions = vec![];
    for (b, z) in [(beta_p, 1.0), (beta_q, -1.0)] {
        if b > 0.0 {
            weights.push(Weight::Float(b));
            positions.push([0.0, 0.0, z]);
        }
    }
    let text = "[divisor]\nweights = []\n";
    let mut cfg = FlowConfig::from_toml(text).expect("minimal config");
    cfg.divisor.weights = weights;
    cfg.divisor.positions = Some(positions);
    cfg.grid.n_lat = 800;
    cfg.grid.n_lon = 1;
    cfg.flow.dt = 2e-3;
    cfg.flow.t_max = 50.0;
    cfg.monitors.delta_exclusion = 0.3;
    cfg
}
