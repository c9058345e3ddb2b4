//! Time stepping for `∂u/∂t = ½χ − R(u)`.
//!
//! Both right-hand-side forms are the same function of `u`:
//! `½χ − e^{−u}(R_bg − Δ_bg u) = e^{−u}Δ_bg u + ½χ − e^{−u}R_bg`.
//! The semi-implicit scheme freezes the density and takes the Laplacian
//! implicitly,
//!
//! ```text
//! (e^Û − dt Δ) u* = e^Û u + dt(½χ e^Û − ½χ)
//! ```
//!
//! which (multiplied by `4πw`) is symmetric positive definite. It conserves
//! area to first order; the flow loop renormalizes after each step.

use std::f64::consts::PI;

use super::config::{RhsForm, Scheme};
use crate::error::{Error, Result};
use crate::geometry::poisson::pcg_shifted;
use crate::geometry::MetricState;

/// `½χ − R(u)` in the requested algebraic form.
pub fn rhs(state: &MetricState, form: RhsForm) -> Vec<f64> {
    let hc = state.half_chi();
    match form {
        RhsForm::Curvature => state.regular_curvature().iter().map(|r| hc - r).collect(),
        RhsForm::Conformal => {
            let g = state.grid();
            let bg = &state.background;
            let lu = g.round_laplacian(&state.u);
            (0..lu.len())
                .map(|k| {
                    let emu = (-state.u[k]).exp();
                    let lap_bg = lu[k] / bg.rho(k);
                    let r_bg = hc / bg.rho(k);
                    emu * lap_bg + hc - emu * r_bg
                })
                .collect()
        }
    }
}

/// Largest stable explicit step, `0.9 / max e^{−Û}|Δ_ii|`.
pub fn cfl_limit(state: &MetricState) -> f64 {
    let g = state.grid();
    let ld = state.log_density();
    let worst = (0..g.len()).map(|k| (-ld[k]).exp() * g.laplacian_diag(k)).fold(0.0, f64::max);
    0.9 / worst
}

#[derive(Debug, Clone, Copy, Default)]
pub struct StepInfo {
    pub cg_iterations: usize,
    pub cg_residual: f64,
}

pub struct Stepper {
    pub scheme: Scheme,
    pub form: RhsForm,
    pub dt: f64,
}

impl Stepper {
    /// Advances `state` by one step in place. On error the state is untouched.
    pub fn step(&self, state: &mut MetricState) -> Result<StepInfo> {
        let t = state.t;
        let (u, info) = match self.scheme {
            Scheme::Rk2 => {
                let lim = cfl_limit(state);
                if self.dt > lim {
                    return Err(Error::Numerical { t, msg: format!("CFL violated: dt = {} > {lim:.3e}", self.dt) });
                }
                let k1 = rhs(state, self.form);
                let mut mid = state.clone();
                mid.u.iter_mut().zip(&k1).for_each(|(u, k)| *u += self.dt * k);
                let k2 = rhs(&mid, self.form);
                let u: Vec<f64> =
                    state.u.iter().zip(k1.iter().zip(&k2)).map(|(u, (a, b))| u + 0.5 * self.dt * (a + b)).collect();
                (u, StepInfo::default())
            }
            Scheme::SemiImplicit => self.semi_implicit(state)?,
        };
        if let Some(k) = u.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numerical { t, msg: format!("non-finite conformal factor at node {k}") });
        }
        state.u = u;
        state.t = t + self.dt;
        Ok(info)
    }

    fn semi_implicit(&self, state: &MetricState) -> Result<(Vec<f64>, StepInfo)> {
        let g = state.grid();
        let hc = state.half_chi();
        let ld = state.log_density();
        let n = g.len();
        let mut d = vec![0.0; n];
        let mut b = vec![0.0; n];
        for k in 0..n {
            let s = 4.0 * PI * g.w(k);
            let e = ld[k].exp();
            d[k] = s * e;
            b[k] = s * (e * state.u[k] + self.dt * hc * (e - 1.0));
        }
        let ring = state.background.poisson.ring_solver();
        let (u, stats) = pcg_shifted(g, ring, &d, self.dt, &b, &state.u, 1e-12, 500)
            .map_err(|e| Error::Numerical { t: state.t, msg: e.to_string() })?;
        Ok((u, StepInfo { cg_iterations: stats.iterations, cg_residual: stats.residual }))
    }
}
