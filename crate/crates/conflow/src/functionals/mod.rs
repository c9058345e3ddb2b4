//! Scalar functionals monitored along the flow.
//!
//! Sign conventions: the Ricci potential `v` solves `Δv = R − ½χ` (so a
//! soliton potential θ with `R = ½χ + Δθ` has `v = θ + const`), and the
//! potential `φ` of a state relative to its background solves
//! `Δ_bg φ = e^u − 1`, i.e. `dg = dg_bg + Δ_bg φ dg_bg`.

mod entropy;
mod residual;

pub use entropy::{mu_estimate, normalized_w, w_functional, MuEstimate, NormalizedW};
pub use residual::soliton_residual;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{BackgroundMetric, MetricState};

/// Solution of `Δv = R − ½χ` with `∫e^{−v} dg = 2`.
#[derive(Debug, Clone, Serialize)]
pub struct RicciPotential {
    pub v: Vec<f64>,
    /// `|∫e^{−v} dg − 2|` after normalization.
    pub normalization_residual: f64,
    /// Mean removed from the right-hand side before solving.
    pub mean_correction: f64,
}

/// Potential of the state relative to its own background.
#[derive(Debug, Clone, Serialize)]
pub struct PotentialPair {
    pub phi: Vec<f64>,
    pub gauge: PotentialGauge,
    pub mean_correction: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PotentialGauge {
    /// `∫φ dg_bg = 0` against the smoothed conical background.
    Background,
}

fn log_sum_exp(terms: impl Iterator<Item = (f64, f64)>) -> f64 {
    // log Σ m_k e^{a_k} for positive masses m_k
    let v: Vec<(f64, f64)> = terms.collect();
    let amax = v.iter().map(|t| t.1).fold(f64::NEG_INFINITY, f64::max);
    amax + v.iter().map(|(m, a)| m * (a - amax).exp()).sum::<f64>().ln()
}

pub fn ricci_potential(state: &MetricState) -> Result<RicciPotential> {
    let r = state.regular_curvature();
    let hc = state.half_chi();
    let ld = state.log_density();
    let b: Vec<f64> = r.iter().zip(&ld).map(|(r, l)| (r - hc) * l.exp()).collect();
    let (mut v, mean_correction) = state.background.poisson.solve(&b);
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::Solver("Ricci potential solve produced non-finite values".into()));
    }
    let masses = state.masses();
    let c = log_sum_exp(masses.iter().zip(&v).map(|(m, v)| (*m, -v))) - 2f64.ln();
    v.iter_mut().for_each(|x| *x += c);
    let z: f64 = masses.iter().zip(&v).map(|(m, v)| m * (-v).exp()).sum();
    Ok(RicciPotential { v, normalization_residual: (z - 2.0).abs(), mean_correction })
}

/// `φ` with `Δ_round φ = ρ_bg(e^u − 1)` and `∫φ dg_bg = 0`.
pub fn recover_potential(state: &MetricState) -> Result<PotentialPair> {
    let bg = &state.background;
    let b: Vec<f64> = (0..state.u.len()).map(|k| bg.log_rho[k].exp() * state.u[k].exp_m1()).collect();
    let (mut phi, mean_correction) = bg.poisson.solve(&b);
    let g = state.grid();
    let mean = (0..phi.len()).map(|k| g.w(k) * bg.rho(k) * phi[k]).sum::<f64>() / 2.0;
    phi.iter_mut().for_each(|x| *x -= mean);
    if (0..phi.len()).any(|k| !phi[k].is_finite()) {
        return Err(Error::Solver("potential recovery produced non-finite values".into()));
    }
    Ok(PotentialPair { phi, gauge: PotentialGauge::Background, mean_correction })
}

/// Ricci potential `h` of the background, `Δ_bg h = R_reg − ½χ`, `∫e^h dg_bg = 2`.
pub fn background_ricci_potential(bg: &BackgroundMetric) -> Vec<f64> {
    let hc = bg.half_chi();
    let b: Vec<f64> = (0..bg.grid.len()).map(|k| hc - hc * bg.rho(k)).collect();
    let (mut h, _) = bg.poisson.solve(&b);
    let g = &bg.grid;
    let c = 2f64.ln() - log_sum_exp((0..h.len()).map(|k| (g.w(k) * bg.rho(k), h[k])));
    h.iter_mut().for_each(|x| *x += c);
    h
}

fn background_integral(bg: &BackgroundMetric, f: impl Fn(usize) -> f64) -> f64 {
    (0..bg.grid.len()).map(|k| bg.grid.w(k) * bg.rho(k) * f(k)).sum()
}

fn dirichlet_round(bg: &BackgroundMetric, phi: &[f64]) -> f64 {
    let g = &bg.grid;
    g.grad_sq_round(phi).iter().enumerate().map(|(k, v)| v * g.w(k)).sum()
}

/// `F_β(φ) = ¼∫|∇φ|² − ½∫φ dg_bg − (2/χ) log ∫e^{−½χφ + h} dg_bg`.
///
/// The `¼∫|∇φ|²` term is half the Dirichlet energy in the convention
/// `Dirichlet(φ) = ½∫|∇φ|²`, matching the Euler–Lagrange equation
/// `e^u = 2e^{h − ½χφ}/Z` of constant curvature.
pub fn f_beta(bg: &BackgroundMetric, h: &[f64], phi: &[f64]) -> f64 {
    f_beta_exponent(bg, h, phi, bg.half_chi())
}

/// The approximating family with exponent `½χ − ε_F` in the log term.
pub fn f_beta_eps(bg: &BackgroundMetric, h: &[f64], phi: &[f64], eps_f: f64) -> Result<f64> {
    if !(eps_f > 0.0 && eps_f < bg.half_chi()) {
        return Err(Error::Hypothesis(format!("eps_F = {eps_f} outside (0, chi/2 = {})", bg.half_chi())));
    }
    Ok(f_beta_exponent(bg, h, phi, bg.half_chi() - eps_f))
}

fn f_beta_exponent(bg: &BackgroundMetric, h: &[f64], phi: &[f64], a: f64) -> f64 {
    let g = &bg.grid;
    let lz = log_sum_exp((0..phi.len()).map(|k| (g.w(k) * bg.rho(k), -a * phi[k] + h[k])));
    0.25 * dirichlet_round(bg, phi) - 0.5 * background_integral(bg, |k| phi[k]) - lz / a
}

/// `∫|∇φ|² dg` (the gradient-square energy, conformally invariant).
pub fn dirichlet(bg: &BackgroundMetric, phi: &[f64]) -> f64 {
    dirichlet_round(bg, phi)
}

/// Predicted `dF_β/dt = −½∫v'(1 − e^{−v'}) dg`, with `v' = −v` renormalized
/// to `∫e^{−v'} dg = 2`.
pub fn f_beta_dissipation(state: &MetricState, rp: &RicciPotential) -> f64 {
    let m = state.masses();
    let c = log_sum_exp(m.iter().zip(&rp.v).map(|(m, v)| (*m, *v))) - 2f64.ln();
    -0.5 * m
        .iter()
        .zip(&rp.v)
        .map(|(m, v)| {
            let vp = -v + c;
            m * vp * (-(-vp).exp_m1())
        })
        .sum::<f64>()
}

/// `s(t)` solving `ds/dt = s(s − ½χ)`, `s(0) = s₀`.
pub fn chow_shift(s0: f64, t: f64, half_chi: f64) -> f64 {
    let a = half_chi;
    if s0 == 0.0 {
        return 0.0;
    }
    a * s0 / (s0 + (a - s0) * (a * t).exp())
}

/// Hamilton's entropy `∫(R − s) log(R − s) dg` of the regular curvature.
pub fn hamilton_entropy(state: &MetricState, s: f64) -> Result<f64> {
    let r = state.regular_curvature();
    let m = state.masses();
    let mut acc = 0.0;
    for k in 0..r.len() {
        let x = r[k] - s;
        if !(x > 0.0) {
            return Err(Error::Positivity { node: k, value: x });
        }
        acc += m[k] * x * x.ln();
    }
    Ok(acc)
}

#[cfg(test)]
mod tests;
