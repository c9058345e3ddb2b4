use serde::Serialize;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::geometry::MetricState;

/// `W(g, f, τ) = ∫(τ(R + |∇f|²) + f − 2) e^{−f}/(4πτ) dg`.
pub fn w_functional(state: &MetricState, f: &[f64], tau: f64) -> Result<f64> {
    if !(tau > 0.0) {
        return Err(Error::Hypothesis(format!("tau must be positive, got {tau}")));
    }
    let r = state.regular_curvature();
    let g2 = state.grad_sq(f);
    let m = state.masses();
    Ok((0..f.len())
        .map(|k| m[k] * (tau * (r[k] + g2[k]) + f[k] - 2.0) * (-f[k]).exp() / (4.0 * PI * tau))
        .sum())
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct NormalizedW {
    pub value: f64,
    /// Constant added to `f` to meet `∫e^{−f} dg = 2`.
    pub shift: f64,
}

fn constraint_shift(m: &[f64], f: &[f64]) -> f64 {
    let amax = f.iter().map(|x| -x).fold(f64::NEG_INFINITY, f64::max);
    let z: f64 = m.iter().zip(f).map(|(m, x)| m * (-x - amax).exp()).sum();
    amax + z.ln() - 2f64.ln()
}

/// `∫[(R + |∇f|²)/χ + f] e^{−f} dg` after shifting `f` so `∫e^{−f} dg = 2`.
pub fn normalized_w(state: &MetricState, f: &[f64]) -> NormalizedW {
    let m = state.masses();
    let shift = constraint_shift(&m, f);
    let fs: Vec<f64> = f.iter().map(|x| x + shift).collect();
    NormalizedW { value: eval_normalized(state, &m, &state.regular_curvature(), &fs), shift }
}

fn eval_normalized(state: &MetricState, m: &[f64], r: &[f64], f: &[f64]) -> f64 {
    let chi = 2.0 * state.half_chi();
    let g = state.grid();
    // |∇f|²_g dg = |∇f|²_round w: use the round density directly
    let g0 = g.grad_sq_round(f);
    (0..f.len())
        .map(|k| ((m[k] * r[k] + g.w(k) * g0[k]) / chi + m[k] * f[k]) * (-f[k]).exp())
        .sum()
}

#[derive(Debug, Clone, Serialize)]
pub struct MuEstimate {
    pub value: f64,
    pub iterations: usize,
    /// Always "upper-bound estimate": descent cannot certify an infimum.
    pub tag: &'static str,
    /// Accepted objective values, starting with the candidate `f = −v`.
    pub trace: Vec<f64>,
    pub f: Vec<f64>,
}

/// Upper bound for `μ(g) = inf_f W` by gradient descent with backtracking,
/// starting from `f0` (normally `−v`). Only decreasing steps are accepted, so
/// the value is non-increasing in `budget`.
pub fn mu_estimate(state: &MetricState, f0: &[f64], budget: usize) -> Result<MuEstimate> {
    let m = state.masses();
    let r = state.regular_curvature();
    let g = state.grid();
    let chi = 2.0 * state.half_chi();
    let n = f0.len();
    let objective = |f: &[f64]| {
        let s = constraint_shift(&m, f);
        let fs: Vec<f64> = f.iter().map(|x| x + s).collect();
        (eval_normalized(state, &m, &r, &fs), fs)
    };
    let (mut best, mut f) = objective(f0);
    if !best.is_finite() {
        return Err(Error::Solver("W is not finite at the starting candidate".into()));
    }
    let mut trace = vec![best];
    let mut step = 0.5;
    let mut iterations = 0;
    let c0 = 1.0 / (8.0 * PI * chi);
    let mut grad = vec![0.0; n];
    for _ in 0..budget {
        iterations += 1;
        // ∂/∂f_k of Σ e^{−f}[(m R + w|∇f|²)/χ + m f]
        for k in 0..n {
            let ek = (-f[k]).exp();
            let mut sq = 0.0;
            let mut cross = 0.0;
            g.for_each_face(k, |nb, c| {
                let d = f[nb] - f[k];
                sq += c * d * d;
                cross += c * d * (ek + (-f[nb]).exp());
            });
            let gk = -ek * (m[k] * r[k] / chi + c0 * sq) - 2.0 * c0 * cross + m[k] * (1.0 - f[k]) * ek;
            // L² gradient with respect to dg
            grad[k] = gk / m[k];
        }
        let gnorm: f64 = grad.iter().zip(&m).map(|(x, m)| x * x * m).sum::<f64>().sqrt();
        if gnorm < 1e-12 {
            break;
        }
        let mut accepted = false;
        for _ in 0..30 {
            let trial: Vec<f64> = f.iter().zip(&grad).map(|(x, d)| x - step * d).collect();
            let (val, fs) = objective(&trial);
            if val.is_finite() && val < best - 1e-4 * step * gnorm * gnorm {
                best = val;
                f = fs;
                accepted = true;
                step *= 1.5;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
        trace.push(best);
    }
    Ok(MuEstimate { value: best, iterations, tag: "upper-bound estimate", trace, f })
}
