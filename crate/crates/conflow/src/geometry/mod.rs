//! Discrete geometry on the sphere: grid, smoothed conical background,
//! conformal metric states, geodesic distances and unit calibration.

pub mod background;
pub mod distance;
pub mod grid;
pub mod io;
pub mod poisson;
pub mod state;
pub mod units;

pub use background::{background_metric, BackgroundMetric};
pub use distance::{ball_volume, geodesic_distance, DistanceField};
pub use grid::{build_axisymmetric_grid, build_grid, SphereGrid};
pub use state::MetricState;
pub use units::{calibrate_units, UnitConstants};

/// Forwarding helpers with the names used throughout the docs.
pub fn laplacian(f: &[f64], m: &MetricState) -> crate::Result<Vec<f64>> {
    m.laplacian(f)
}

pub fn scalar_curvature(m: &MetricState) -> Vec<f64> {
    m.scalar_curvature()
}

pub fn integrate(f: &[f64], m: &MetricState) -> f64 {
    m.integrate(f)
}
