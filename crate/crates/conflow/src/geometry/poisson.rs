//! Direct and preconditioned solvers for the grid stencil.
//!
//! Every operator here is `D − s·K` with `K` the stiffness stencil of
//! [`SphereGrid::apply_stiffness`] and `D` a nonnegative diagonal. When `D`
//! is constant along rings, a longitude FFT decouples the modes into real
//! tridiagonal systems in latitude; that direct solve is also the
//! preconditioner for the general variable-`D` case.

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::f64::consts::PI;
use std::sync::Arc;

use super::grid::SphereGrid;
use crate::error::{Error, Result};

pub struct RingSolver {
    n_lat: usize,
    n_lon: usize,
    c_north: Vec<f64>,
    c_south: Vec<f64>,
    c_east: Vec<f64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    /// `2 − 2cos(2πm/n)` per longitude mode.
    symbol: Vec<f64>,
}

impl std::fmt::Debug for RingSolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "RingSolver({}x{})", self.n_lat, self.n_lon)
    }
}

impl RingSolver {
    pub fn new(grid: &SphereGrid) -> RingSolver {
        let mut planner = FftPlanner::new();
        let n = grid.n_lon;
        RingSolver {
            n_lat: grid.n_lat,
            n_lon: n,
            c_north: grid.c_north.clone(),
            c_south: grid.c_south.clone(),
            c_east: grid.c_east.clone(),
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
            symbol: (0..n).map(|m| 2.0 - 2.0 * (2.0 * PI * m as f64 / n as f64).cos()).collect(),
        }
    }

    /// Solves `(diag(d_ring) − s K) x = rhs` where `d_ring` is constant per ring.
    ///
    /// With `d_ring ≡ 0` the operator is singular; `rhs` must then sum to zero
    /// and the returned `x` has an arbitrary additive constant.
    pub fn solve(&self, d_ring: &[f64], s: f64, rhs: &[f64]) -> Vec<f64> {
        let (nl, n) = (self.n_lat, self.n_lon);
        let mut buf: Vec<Complex64> = rhs.iter().map(|&r| Complex64::new(r, 0.0)).collect();
        for ring in buf.chunks_mut(n) {
            self.forward.process(ring);
        }
        let singular = d_ring.iter().all(|&d| d == 0.0);
        let mut col = vec![Complex64::new(0.0, 0.0); nl];
        let mut cp = vec![0.0; nl];
        let mut dp = vec![Complex64::new(0.0, 0.0); nl];
        for m in 0..n {
            for i in 0..nl {
                col[i] = buf[i * n + m];
            }
            if m == 0 && singular {
                // −s(F_i − F_{i−1}) = r_i with F_i = c_south_i (x_{i+1} − x_i)
                let mut flux = Complex64::new(0.0, 0.0);
                let mut x = Complex64::new(0.0, 0.0);
                let r = col.clone();
                col[0] = x;
                for i in 0..nl - 1 {
                    flux -= r[i] / s;
                    x += flux / self.c_south[i];
                    col[i + 1] = x;
                }
            } else {
                let sym = self.symbol[m];
                for i in 0..nl {
                    let a = -s * self.c_north[i];
                    let c = -s * self.c_south[i];
                    let b = d_ring[i] + s * (self.c_north[i] + self.c_south[i] + self.c_east[i] * sym);
                    let (pc, pd) = if i == 0 { (0.0, Complex64::new(0.0, 0.0)) } else { (cp[i - 1], dp[i - 1]) };
                    let den = b - a * pc;
                    cp[i] = c / den;
                    dp[i] = (col[i] - pd * a) / den;
                }
                col[nl - 1] = dp[nl - 1];
                for i in (0..nl - 1).rev() {
                    col[i] = dp[i] - col[i + 1] * cp[i];
                }
            }
            for i in 0..nl {
                buf[i * n + m] = col[i];
            }
        }
        for ring in buf.chunks_mut(n) {
            self.inverse.process(ring);
        }
        buf.iter().map(|z| z.re / n as f64).collect()
    }
}

/// Round-metric Poisson solver `Δ f = b` in the crate's units.
#[derive(Debug)]
pub struct Poisson {
    ring: RingSolver,
    weight: Vec<f64>,
    n_lon: usize,
    zeros: Vec<f64>,
}

impl Poisson {
    pub fn new(grid: &SphereGrid) -> Poisson {
        Poisson {
            ring: RingSolver::new(grid),
            weight: grid.weight.clone(),
            n_lon: grid.n_lon,
            zeros: vec![0.0; grid.n_lat],
        }
    }

    fn w(&self, k: usize) -> f64 {
        self.weight[k / self.n_lon]
    }

    /// Solves `Δ_round f = b` with `Σ w f = 0`. The right-hand side is first
    /// projected onto mean zero; the removed mean `(Σ w b)/2` is returned.
    pub fn solve(&self, b: &[f64]) -> (Vec<f64>, f64) {
        let mean = b.iter().enumerate().map(|(k, &v)| self.w(k) * v).sum::<f64>() / 2.0;
        let rhs: Vec<f64> = b.iter().enumerate().map(|(k, &v)| -4.0 * PI * self.w(k) * (v - mean)).collect();
        let mut f = self.ring.solve(&self.zeros, 1.0, &rhs);
        let fm = f.iter().enumerate().map(|(k, &v)| self.w(k) * v).sum::<f64>() / 2.0;
        f.iter_mut().for_each(|v| *v -= fm);
        (f, mean)
    }

    pub fn ring_solver(&self) -> &RingSolver {
        &self.ring
    }
}

#[derive(Debug, Clone, Copy)]
pub struct CgStats {
    pub iterations: usize,
    pub residual: f64,
}

/// Preconditioned CG for `(diag(d) − s K) x = rhs`, `d > 0` varying per node.
/// The preconditioner replaces `d` by its ring average and solves directly.
pub fn pcg_shifted(
    grid: &SphereGrid,
    ring: &RingSolver,
    d: &[f64],
    s: f64,
    rhs: &[f64],
    x0: &[f64],
    rtol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, CgStats)> {
    let nn = grid.len();
    let n = grid.n_lon;
    let d_ring: Vec<f64> = d.chunks(n).map(|r| r.iter().sum::<f64>() / n as f64).collect();
    let mut kx = vec![0.0; nn];
    let apply = |x: &[f64], out: &mut Vec<f64>, kx: &mut Vec<f64>| {
        grid.apply_stiffness(x, kx);
        for k in 0..nn {
            out[k] = d[k] * x[k] - s * kx[k];
        }
    };
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let mut x = x0.to_vec();
    let mut ax = vec![0.0; nn];
    apply(&x, &mut ax, &mut kx);
    let mut r: Vec<f64> = rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
    let bnorm = dot(rhs, rhs).sqrt().max(1e-300);
    let mut rnorm = dot(&r, &r).sqrt();
    if rnorm <= rtol * bnorm {
        return Ok((x, CgStats { iterations: 0, residual: rnorm / bnorm }));
    }
    let mut z = ring.solve(&d_ring, s, &r);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; nn];
    for it in 1..=max_iter {
        apply(&p, &mut ap, &mut kx);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::Solver(format!("CG breakdown (pAp = {pap:e})")));
        }
        let alpha = rz / pap;
        for k in 0..nn {
            x[k] += alpha * p[k];
            r[k] -= alpha * ap[k];
        }
        rnorm = dot(&r, &r).sqrt();
        if rnorm <= rtol * bnorm {
            return Ok((x, CgStats { iterations: it, residual: rnorm / bnorm }));
        }
        z = ring.solve(&d_ring, s, &r);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for k in 0..nn {
            p[k] = z[k] + beta * p[k];
        }
    }
    Err(Error::Solver(format!("CG: {max_iter} iterations, residual {:e}", rnorm / bnorm)))
}
