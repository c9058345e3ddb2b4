use std::sync::Arc;

use super::grid::SphereGrid;
use super::poisson::Poisson;
use crate::error::{Error, Result};
use crate::marked_sphere::{euler_characteristic, Divisor};

/// Smoothed conical reference metric `g_bg = ρ_bg · g_round`.
///
/// `ρ_bg ∝ Π (s_j + ε²)^{−β_j}` with `s_j = sin²(d_j/2) = (1 − p_j·x)/2`, the
/// squared length of a holomorphic vector field vanishing doubly at `p_j`.
/// Writing `f_j = log(s_j + ε²)`, the discrete cone sources
/// `δ_j = Δ_round f_j + ½` have unit mass exactly, and the curvature splits as
///
/// ```text
/// R_bg = (½χ + Σ β_j δ_j)/ρ_bg = R_reg + R_cone
/// ```
///
/// where `R_reg = ½χ/ρ_bg` is the curvature of the conical metric off the cone
/// points.
#[derive(Debug)]
pub struct BackgroundMetric {
    pub grid: Arc<SphereGrid>,
    pub divisor: Divisor,
    pub eps: f64,
    pub chi: f64,
    /// `log ρ_bg` at nodes.
    pub log_rho: Vec<f64>,
    /// `Σ β_j δ_j`: cone curvature as a density against the round measure.
    pub cone_source: Vec<f64>,
    /// Round-metric Poisson solver, shared by everything built on this grid.
    pub poisson: Arc<Poisson>,
}

/// Half-chord `sin²(d/2)` between unit vectors.
#[inline]
pub fn half_chord_sq(p: &[f64; 3], x: &[f64; 3]) -> f64 {
    (0.5 * (1.0 - (p[0] * x[0] + p[1] * x[1] + p[2] * x[2]))).max(0.0)
}

/// Unnormalized `log ρ` of the smoothed cone family at a point.
#[inline]
pub fn cone_log_density(divisor: &Divisor, eps: f64, x: &[f64; 3]) -> f64 {
    let e2 = eps * eps;
    divisor
        .positions()
        .iter()
        .zip(divisor.weights())
        .map(|(p, w)| -w.value() * (half_chord_sq(p, x) + e2).ln())
        .sum()
}

/// Smallest admissible ε: one cell width in half-chord units
/// (`sin(d/2) ≈ d/2`, so the core `sin(d/2) ≲ ε` spans at least two cells).
pub fn min_eps(grid: &SphereGrid) -> f64 {
    grid.dtheta * (1.0 - 1e-9)
}

pub fn background_metric(grid: Arc<SphereGrid>, divisor: &Divisor, eps: f64) -> Result<BackgroundMetric> {
    let poisson = Arc::new(Poisson::new(&grid));
    background_with_solver(grid, poisson, divisor, eps)
}

pub fn background_with_solver(
    grid: Arc<SphereGrid>,
    poisson: Arc<Poisson>,
    divisor: &Divisor,
    eps: f64,
) -> Result<BackgroundMetric> {
    if !(eps > 0.0) {
        return Err(Error::Background(format!("smoothing eps must be positive, got {eps}")));
    }
    if divisor.k() > 0 && eps < min_eps(&grid) {
        return Err(Error::Background(format!(
            "cone core unresolved: eps = {eps} below one cell width {:.4} ({} rings)",
            grid.dtheta, grid.n_lat
        )));
    }
    let n = grid.len();
    let e2 = eps * eps;
    let nodes: Vec<[f64; 3]> = (0..n).map(|k| grid.xyz(k)).collect();
    let mut log_rho = vec![0.0; n];
    let mut cone_source = vec![0.0; n];
    for (p, w) in divisor.positions().iter().zip(divisor.weights()) {
        let beta = w.value();
        let f: Vec<f64> = nodes.iter().map(|x| (half_chord_sq(p, x) + e2).ln()).collect();
        let lf = grid.round_laplacian(&f);
        for k in 0..n {
            log_rho[k] -= beta * f[k];
            cone_source[k] += beta * (lf[k] + 0.5);
        }
    }
    let area: f64 = (0..n).map(|k| grid.w(k) * log_rho[k].exp()).sum();
    if !area.is_finite() {
        return Err(Error::Background("density overflow".into()));
    }
    let shift = (2.0 / area).ln();
    log_rho.iter_mut().for_each(|v| *v += shift);
    Ok(BackgroundMetric { chi: euler_characteristic(divisor), grid, divisor: divisor.clone(), eps, log_rho, cone_source, poisson })
}

impl BackgroundMetric {
    pub fn half_chi(&self) -> f64 {
        0.5 * self.chi
    }

    pub fn rho(&self, k: usize) -> f64 {
        self.log_rho[k].exp()
    }

    /// Full curvature of the smooth background (cones included).
    pub fn curvature(&self) -> Vec<f64> {
        (0..self.grid.len()).map(|k| (self.half_chi() + self.cone_source[k]) / self.rho(k)).collect()
    }

    /// Curvature off the cone points, `½χ/ρ`.
    pub fn regular_curvature(&self) -> Vec<f64> {
        (0..self.grid.len()).map(|k| self.half_chi() / self.rho(k)).collect()
    }

    /// Same grid and ε, cone points moved.
    pub fn moved(&self, divisor: &Divisor) -> Result<BackgroundMetric> {
        background_with_solver(self.grid.clone(), self.poisson.clone(), divisor, self.eps)
    }

    /// `log ρ_bg` at an arbitrary direction (normalization included).
    pub fn log_rho_at(&self, x: &[f64; 3]) -> f64 {
        cone_log_density(&self.divisor, self.eps, x) + self.log_norm()
    }

    /// Additive constant relating `log_rho` to the raw cone density.
    pub fn log_norm(&self) -> f64 {
        self.log_rho[0] - cone_log_density(&self.divisor, self.eps, &self.grid.xyz(0))
    }
}
