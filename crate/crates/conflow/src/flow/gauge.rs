//! Möbius re-centring.
//!
//! Solitons of the conical flow move by conformal (boost) fields, so in fixed
//! coordinates a converging flow can concentrate at exponential speed. The
//! centre-of-mass gauge pushes the metric forward by the boost that puts the
//! centre of mass of its area measure (in ℝ³) at the origin. The metric is
//! unchanged up to isometry; only the coordinates and marked-point positions
//! move.

use serde::Serialize;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::geometry::{MetricState, SphereGrid};

/// Boost with rapidity `|η|` towards `η/|η|`, and the length factor
/// `cosh s + sinh s (n·x)` by which it shrinks lengths at `x`.
pub fn boost(eta: &[f64; 3], x: &[f64; 3]) -> ([f64; 3], f64) {
    let s = (eta[0] * eta[0] + eta[1] * eta[1] + eta[2] * eta[2]).sqrt();
    if s == 0.0 {
        return (*x, 1.0);
    }
    let n = [eta[0] / s, eta[1] / s, eta[2] / s];
    let c = n[0] * x[0] + n[1] * x[1] + n[2] * x[2];
    let (sh, ch) = (s.sinh(), s.cosh());
    let j = ch + sh * c;
    let a = sh + ch * c;
    let mut y = [0.0; 3];
    for i in 0..3 {
        y[i] = (x[i] - c * n[i] + a * n[i]) / j;
    }
    let norm = (y[0] * y[0] + y[1] * y[1] + y[2] * y[2]).sqrt();
    ([y[0] / norm, y[1] / norm, y[2] / norm], j)
}

/// Centre of mass (in ℝ³) of the area measure, normalized by the area.
pub fn center_of_mass(state: &MetricState) -> [f64; 3] {
    let g = state.grid();
    let m = state.masses();
    let total: f64 = m.iter().sum();
    let mut c = [0.0; 3];
    for (k, mk) in m.iter().enumerate() {
        let x = g.xyz(k);
        for i in 0..3 {
            c[i] += mk * x[i];
        }
    }
    c.map(|v| v / total)
}

fn pushed_com(nodes: &[[f64; 3]], m: &[f64], eta: &[f64; 3]) -> [f64; 3] {
    let mut c = [0.0; 3];
    let total: f64 = m.iter().sum();
    for (x, mk) in nodes.iter().zip(m) {
        let (y, _) = boost(eta, x);
        for i in 0..3 {
            c[i] += mk * y[i];
        }
    }
    c.map(|v| v / total)
}

fn norm(v: &[f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

fn solve3(a: [[f64; 3]; 3], b: [f64; 3]) -> Option<[f64; 3]> {
    let det = |m: &[[f64; 3]; 3]| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let d = det(&a);
    if d.abs() < 1e-300 {
        return None;
    }
    let mut x = [0.0; 3];
    for i in 0..3 {
        let mut m = a;
        for r in 0..3 {
            m[r][i] = b[r];
        }
        x[i] = det(&m) / d;
    }
    Some(x)
}

/// Boost `η` such that the pushed-forward measure is centred, by Newton's
/// method with a finite-difference Jacobian.
pub fn centering_boost(state: &MetricState, axisymmetric: bool) -> Result<[f64; 3]> {
    let g = state.grid();
    let nodes: Vec<[f64; 3]> = (0..g.len()).map(|k| g.xyz(k)).collect();
    let m = state.masses();
    let mut eta = [0.0; 3];
    let dims: &[usize] = if axisymmetric { &[2] } else { &[0, 1, 2] };
    for _ in 0..50 {
        let c = pushed_com(&nodes, &m, &eta);
        if norm(&c) < 1e-13 {
            return Ok(eta);
        }
        let h = 1e-6;
        let mut jac = [[0.0; 3]; 3];
        for i in 0..3 {
            jac[i][i] = 1.0;
        }
        for &d in dims {
            let mut e = eta;
            e[d] += h;
            let cp = pushed_com(&nodes, &m, &e);
            e[d] -= 2.0 * h;
            let cm = pushed_com(&nodes, &m, &e);
            for i in 0..3 {
                jac[i][d] = (cp[i] - cm[i]) / (2.0 * h);
            }
        }
        let mut rhs = c.map(|v| -v);
        if axisymmetric {
            rhs[0] = 0.0;
            rhs[1] = 0.0;
        }
        let step = solve3(jac, rhs).ok_or_else(|| Error::Solver("singular centring Jacobian".into()))?;
        // damp long steps: the centring map is strongly nonlinear far out
        let sn = norm(&step);
        let scale = if sn > 0.5 { 0.5 / sn } else { 1.0 };
        for i in 0..3 {
            eta[i] += scale * step[i];
        }
    }
    let c = pushed_com(&nodes, &m, &eta);
    if norm(&c) < 1e-9 {
        Ok(eta)
    } else {
        Err(Error::Solver(format!("centring did not converge, residual {:.3e}", norm(&c))))
    }
}

/// Four-point Lagrange weights for nodes at −1, 0, 1, 2.
fn lagrange4(q: f64) -> [f64; 4] {
    [
        -q * (q - 1.0) * (q - 2.0) / 6.0,
        (q + 1.0) * (q - 1.0) * (q - 2.0) / 2.0,
        -(q + 1.0) * q * (q - 2.0) / 2.0,
        (q + 1.0) * q * (q - 1.0) / 6.0,
    ]
}

/// Bicubic interpolation of a node field at direction `x`, continuing across
/// the poles by reflection (ring `−1` is ring `0` half a turn away).
pub fn interpolate(g: &SphereGrid, f: &[f64], x: &[f64; 3]) -> f64 {
    let (nl, n) = (g.n_lat as isize, g.n_lon);
    let th = x[2].clamp(-1.0, 1.0).acos();
    let t = th / g.dtheta - 0.5;
    let i0 = t.floor() as isize;
    let wt = lagrange4(t - i0 as f64);
    let (wp, j0) = if n == 1 {
        ([0.0, 1.0, 0.0, 0.0], 0isize)
    } else {
        let ph = x[1].atan2(x[0]).rem_euclid(2.0 * std::f64::consts::PI);
        let s = ph / g.dphi - 0.5;
        let j0 = s.floor() as isize;
        (lagrange4(s - j0 as f64), j0)
    };
    let mut acc = 0.0;
    for (a, wa) in wt.iter().enumerate() {
        let r = i0 - 1 + a as isize;
        let (ring, shift) = if r < 0 {
            (-1 - r, n / 2)
        } else if r >= nl {
            (2 * nl - 1 - r, n / 2)
        } else {
            (r, 0)
        };
        for (b, wb) in wp.iter().enumerate() {
            if *wb == 0.0 {
                continue;
            }
            let col = (j0 - 1 + b as isize + shift as isize).rem_euclid(n as isize) as usize;
            acc += wa * wb * f[ring as usize * n + col];
        }
    }
    acc
}

#[derive(Debug, Clone, Serialize)]
pub struct GaugeEvent {
    pub t: f64,
    /// Boost of the first pass.
    pub eta: [f64; 3],
    /// Number of boost-and-resample passes.
    pub passes: usize,
    /// Centre of mass before the boost, and of the re-sampled state after it.
    pub com_before: [f64; 3],
    pub com_after: [f64; 3],
    /// Relative area change before renormalization; mostly the constant
    /// factors `J(p)^β` the boost picks up at the cone points.
    pub area_drift: f64,
}

const MAX_PASSES: usize = 4;

/// Re-centres `state` if its centre of mass exceeds `tol`. The new state
/// lives on a background with the boosted cone positions.
///
/// Pulling back the conformal factor exactly would carry the old smoothed
/// cores along, rescaled by the boost, and leave a bump of width ε in `u`.
/// Away from the cores the exact transformation of `u` reduces to
/// `u(B⁻¹y) + χ log J + const` (chordal distances transform by the length
/// factors `J` at both ends), so that smooth form is used everywhere: the
/// metric is preserved outside the cores and each core is re-smoothed at the
/// standard scale ε about its new position. Re-smoothing shifts the centre of
/// mass slightly, so the pass is repeated (at most a few times) until the
/// result is centred to `tol`.
pub fn recenter(state: &MetricState, tol: f64) -> Result<Option<(MetricState, GaugeEvent)>> {
    let com_before = center_of_mass(state);
    if norm(&com_before) <= tol {
        return Ok(None);
    }
    let (mut next, eta, mut drift) = boost_once(state)?;
    let mut passes = 1;
    let mut com_after = center_of_mass(&next);
    while norm(&com_after) > tol && passes < MAX_PASSES {
        let (n2, _, d2) = boost_once(&next)?;
        next = n2;
        drift = (1.0 + drift) * (1.0 + d2) - 1.0;
        com_after = center_of_mass(&next);
        passes += 1;
    }
    Ok(Some((next, GaugeEvent { t: state.t, eta, passes, com_before, com_after, area_drift: drift })))
}

fn boost_once(state: &MetricState) -> Result<(MetricState, [f64; 3], f64)> {
    let g = state.grid();
    let eta = centering_boost(state, g.is_axisymmetric())?;
    let old = &state.background;
    let div = &old.divisor;
    let moved: Vec<[f64; 3]> = div.positions().iter().map(|p| boost(&eta, p).0).collect();
    let new_div = div.with_positions(moved)?;
    let new_bg = Arc::new(old.moved(&new_div)?);
    let inv = eta.map(|v| -v);
    let chi = old.chi;
    let mut u = vec![0.0; g.len()];
    for (k, uk) in u.iter_mut().enumerate() {
        let (x, _) = boost(&inv, &g.xyz(k));
        // length factor of the forward boost at the preimage
        let (_, j) = boost(&eta, &x);
        *uk = interpolate(g, &state.u, &x) + chi * j.ln();
    }
    let mut next = MetricState::new(new_bg, u, state.t)?;
    let area = next.area();
    next.renormalize();
    Ok((next, eta, area / 2.0 - 1.0))
}
