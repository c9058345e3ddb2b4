use serde::Serialize;
use std::f64::consts::PI;
use std::sync::{Arc, OnceLock};

use super::background::background_metric;
use super::grid::build_grid;
use super::state::{round_radius, MetricState};
use crate::error::{Error, Result};
use crate::marked_sphere::Divisor;

/// Scales relating the crate's quantities to Riemannian ones.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UnitConstants {
    /// Area of the round reference sphere.
    pub round_area: f64,
    /// Its radius, `1/√(2π)`.
    pub round_radius: f64,
    /// `R = curvature_scale · K` (Gauss curvature `K`).
    pub curvature_scale: f64,
    /// `Δ = laplacian_scale · Δ_LB`.
    pub laplacian_scale: f64,
    /// `|∇f|² = grad_sq_scale · |∇f|²_LB`.
    pub grad_sq_scale: f64,
    /// Residuals of the startup self-test.
    pub selftest: SelfTest,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SelfTest {
    pub area_error: f64,
    pub round_curvature_error: f64,
    pub conformal_identity_error: f64,
    pub integration_by_parts_error: f64,
}

/// Tolerance for the conformal identity against the Gauss-curvature oracle
/// on the 32×64 self-test grid (second-order truncation error).
const CONFORMAL_TOL: f64 = 2e-2;

/// Fixes the unit conventions and checks them once per process.
pub fn calibrate_units() -> Result<UnitConstants> {
    static CACHE: OnceLock<std::result::Result<UnitConstants, String>> = OnceLock::new();
    CACHE.get_or_init(|| run_selftest().map_err(|e| e.to_string())).clone().map_err(Error::Grid)
}

fn run_selftest() -> Result<UnitConstants> {
    let grid = Arc::new(build_grid(32, 64, &Divisor::empty())?);
    let bg = Arc::new(background_metric(grid.clone(), &Divisor::empty(), 1.0)?);
    let round = MetricState::initial(bg.clone());
    let area_error = (round.area() - 2.0).abs();
    let round_curvature_error = round.scalar_curvature().iter().map(|r| (r - 1.0).abs()).fold(0.0, f64::max);

    let u: Vec<f64> = (0..grid.len()).map(|k| test_potential(&grid.xyz(k))).collect();
    let state = MetricState::new(bg, u.clone(), 0.0)?;
    let r = state.scalar_curvature();
    let mut conformal_identity_error: f64 = 0.0;
    for k in 0..grid.len() {
        let th = grid.theta[grid.ring(k)];
        let ph = if grid.n_lon == 1 { 0.0 } else { grid.phi[k % grid.n_lon] };
        let oracle = gauss_curvature_oracle(th, ph) / (2.0 * PI);
        conformal_identity_error = conformal_identity_error.max((r[k] - oracle).abs());
    }

    // ∫(Δf)h dg = −∫⟨∇f,∇h⟩ dg with the polarized gradient square
    let f: Vec<f64> = (0..grid.len()).map(|k| grid.xyz(k)[0].powi(2) + grid.xyz(k)[2]).collect();
    let h: Vec<f64> = (0..grid.len()).map(|k| (grid.xyz(k)[1] * 2.0).sin()).collect();
    let lf = state.laplacian(&f)?;
    let lhs = state.integrate(&lf.iter().zip(&h).map(|(a, b)| a * b).collect::<Vec<_>>());
    let sum: Vec<f64> = f.iter().zip(&h).map(|(a, b)| a + b).collect();
    let diff: Vec<f64> = f.iter().zip(&h).map(|(a, b)| a - b).collect();
    let rhs = -0.25 * (state.dirichlet(&sum) - state.dirichlet(&diff));
    let integration_by_parts_error = (lhs - rhs).abs();

    let selftest = SelfTest { area_error, round_curvature_error, conformal_identity_error, integration_by_parts_error };
    if area_error > 1e-10
        || round_curvature_error > 1e-10
        || integration_by_parts_error > 1e-10
        || conformal_identity_error > CONFORMAL_TOL
    {
        return Err(Error::Grid(format!("unit calibration self-test failed: {selftest:?}")));
    }
    Ok(UnitConstants {
        round_area: 2.0,
        round_radius: round_radius(),
        curvature_scale: 1.0 / (2.0 * PI),
        laplacian_scale: 1.0 / (4.0 * PI),
        grad_sq_scale: 1.0 / (4.0 * PI),
        selftest,
    })
}

fn test_potential(x: &[f64; 3]) -> f64 {
    0.4 * x[0] * x[1] + 0.3 * x[2] + 0.2 * x[0] * x[0]
}

fn potential_sph(th: f64, ph: f64) -> f64 {
    let (st, ct) = th.sin_cos();
    let (sp, cp) = ph.sin_cos();
    test_potential(&[st * cp, st * sp, ct])
}

/// Gauss curvature of `e^{U}·g_round(area 2)` from the orthogonal-coordinate
/// formula `K = −(1/2√(EG))[∂_θ(G_θ/√(EG)) + ∂_φ(E_φ/√(EG))]`, with all
/// derivatives by central differences of the analytic `U`.
pub fn gauss_curvature_oracle(th: f64, ph: f64) -> f64 {
    let r2 = round_radius().powi(2);
    let e = |t: f64, p: f64| potential_sph(t, p).exp() * r2;
    let g = |t: f64, p: f64| potential_sph(t, p).exp() * r2 * t.sin().powi(2);
    let s = 1e-4;
    let sq = |t: f64, p: f64| (e(t, p) * g(t, p)).sqrt();
    let a = |t: f64, p: f64| (g(t + s, p) - g(t - s, p)) / (2.0 * s) / sq(t, p);
    let b = |t: f64, p: f64| (e(t, p + s) - e(t, p - s)) / (2.0 * s) / sq(t, p);
    let da = (a(th + s, ph) - a(th - s, ph)) / (2.0 * s);
    let db = (b(th, ph + s) - b(th, ph - s)) / (2.0 * s);
    -(da + db) / (2.0 * sq(th, ph))
}
