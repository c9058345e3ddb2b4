//! Normalized conical Ricci flow on the two-sphere with marked points.
//!
//! The crate is organised as a pipeline: a [`marked_sphere::Divisor`] describes
//! cone points exactly, [`geometry`] discretizes the sphere and the smoothed
//! conical background, [`flow`] evolves the conformal factor, [`functionals`]
//! evaluates the monitored energies, [`soliton`] holds the closed-form toric
//! solitons and [`diagnostics`] decides what the flow converged to.
//!
//! # Units
//!
//! All quantities use the normalization in which the round sphere has area 2
//! and scalar curvature 1.  Concretely, with `K` the Gauss curvature and
//! `Δ_LB` the Laplace–Beltrami operator of the Riemannian metric,
//!
//! ```text
//! dg = Riemannian area,  R = K / 2π,  Δ = Δ_LB / 4π,  |∇f|² = |∇f|²_LB / 4π
//! ```
//!
//! so that `R = e^{-u}(R_bg - Δ_bg u)` and `∫ R dg = 2` on any smooth sphere.
//! See [`geometry::calibrate_units`].

pub mod diagnostics;
pub mod error;
pub mod flow;
pub mod functionals;
pub mod geometry;
pub mod marked_sphere;
pub mod soliton;

pub use error::{Error, Result};
