use std::f64::consts::PI;
use std::sync::Arc;

use super::background::BackgroundMetric;
use super::grid::SphereGrid;
use crate::error::{Error, Result};

/// `g = e^u g_bg` at flow time `t`.
#[derive(Debug, Clone)]
pub struct MetricState {
    pub background: Arc<BackgroundMetric>,
    pub u: Vec<f64>,
    pub t: f64,
}

impl MetricState {
    pub fn new(background: Arc<BackgroundMetric>, u: Vec<f64>, t: f64) -> Result<MetricState> {
        if u.len() != background.grid.len() {
            return Err(Error::Grid(format!("field has {} values, grid has {} nodes", u.len(), background.grid.len())));
        }
        if let Some(k) = u.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numerical { t, msg: format!("conformal factor not finite at node {k}") });
        }
        Ok(MetricState { background, u, t })
    }

    pub fn initial(background: Arc<BackgroundMetric>) -> MetricState {
        let n = background.grid.len();
        MetricState { background, u: vec![0.0; n], t: 0.0 }
    }

    pub fn grid(&self) -> &SphereGrid {
        &self.background.grid
    }

    pub fn half_chi(&self) -> f64 {
        self.background.half_chi()
    }

    /// `log` of the density against the round measure, `log ρ_bg + u`.
    pub fn log_density(&self) -> Vec<f64> {
        self.u.iter().zip(&self.background.log_rho).map(|(u, l)| u + l).collect()
    }

    /// Per-node mass `w_i ρ_bg e^u`.
    pub fn masses(&self) -> Vec<f64> {
        let g = self.grid();
        (0..g.len()).map(|k| g.w(k) * (self.u[k] + self.background.log_rho[k]).exp()).collect()
    }

    pub fn area(&self) -> f64 {
        self.masses().iter().sum()
    }

    /// Additive constant restoring area 2; applied and returned.
    pub fn renormalize(&mut self) -> f64 {
        let c = (2.0 / self.area()).ln();
        self.u.iter_mut().for_each(|v| *v += c);
        c
    }

    /// Metric Laplacian `e^{−u} Δ_bg f`.
    pub fn laplacian(&self, f: &[f64]) -> Result<Vec<f64>> {
        self.check(f)?;
        let mut lf = self.grid().round_laplacian(f);
        for (k, v) in lf.iter_mut().enumerate() {
            *v *= (-(self.u[k] + self.background.log_rho[k])).exp();
        }
        Ok(lf)
    }

    /// Full curvature `e^{−u}(R_bg − Δ_bg u)`, cone sources included.
    pub fn scalar_curvature(&self) -> Vec<f64> {
        let lu = self.grid().round_laplacian(&self.u);
        let hc = self.half_chi();
        (0..self.u.len())
            .map(|k| (hc + self.background.cone_source[k] - lu[k]) * (-(self.u[k] + self.background.log_rho[k])).exp())
            .collect()
    }

    /// Curvature of the conical metric off the cone points, `e^{−u}(R_reg − Δ_bg u)`.
    pub fn regular_curvature(&self) -> Vec<f64> {
        let lu = self.grid().round_laplacian(&self.u);
        let hc = self.half_chi();
        (0..self.u.len()).map(|k| (hc - lu[k]) * (-(self.u[k] + self.background.log_rho[k])).exp()).collect()
    }

    pub fn integrate(&self, f: &[f64]) -> f64 {
        let g = self.grid();
        f.iter()
            .enumerate()
            .map(|(k, v)| v * g.w(k) * (self.u[k] + self.background.log_rho[k]).exp())
            .sum()
    }

    /// `|∇f|²_g` at nodes.
    pub fn grad_sq(&self, f: &[f64]) -> Vec<f64> {
        let mut g2 = self.grid().grad_sq_round(f);
        for (k, v) in g2.iter_mut().enumerate() {
            *v *= (-(self.u[k] + self.background.log_rho[k])).exp();
        }
        g2
    }

    /// `∫|∇f|² dg` (conformally invariant).
    pub fn dirichlet(&self, f: &[f64]) -> f64 {
        let g = self.grid();
        g.grad_sq_round(f).iter().enumerate().map(|(k, v)| v * g.w(k)).sum()
    }

    fn check(&self, f: &[f64]) -> Result<()> {
        if f.len() != self.u.len() {
            return Err(Error::Grid(format!("field has {} values, grid has {} nodes", f.len(), self.u.len())));
        }
        Ok(())
    }

    /// Length scale of the metric relative to the round area-2 sphere at a node.
    pub fn length_factor(&self, k: usize) -> f64 {
        (0.5 * (self.u[k] + self.background.log_rho[k])).exp()
    }
}

/// Radius of the round sphere of area 2.
pub fn round_radius() -> f64 {
    (2.0 * PI).sqrt().recip()
}
