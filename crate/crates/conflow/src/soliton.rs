//! Rotationally symmetric conical shrinking solitons in moment coordinates.
//!
//! On the moment interval `x ∈ [−1, 1]` a circle-invariant metric of area 2 is
//! `dx²/ψ(x) + ψ(x) dα²` with `α ∈ [0, 1)`, so `dg = dx dα` is uniform. In the
//! crate's units (round sphere: area 2, `R = 1`)
//!
//! ```text
//! R = −ψ''/4π,   Δf = (ψ f')'/4π,   |∇f|² = ψ f'²/4π,
//! ```
//!
//! and a cone of weight `β` at an endpoint has `|ψ'| = 4π(1 − β)` there. The
//! soliton potential is linear, `θ = cx − log A` with `A = sinh c / c`, the
//! Hessian condition holds identically, and `R = ½χ + Δθ` becomes the linear
//! equation `ψ'' + cψ' + 2πχ = 0` with `ψ(±1) = 0`.

use serde::Serialize;
use std::f64::consts::{LN_2, PI};

use crate::error::{Error, Result};
use crate::marked_sphere::{classify_stability, enumerate_partitions, Divisor, LimitDivisor, StabilityClass};

/// Below this `|c|` the closed forms lose digits to cancellation; use series.
pub const SERIES_CUTOFF: f64 = 1e-4;

/// `log(sinh c / c)`, even in `c`, stable for small and large arguments.
fn log_sinhc(c: f64) -> f64 {
    let a = c.abs();
    if a < SERIES_CUTOFF {
        let c2 = c * c;
        c2 / 6.0 - c2 * c2 / 180.0
    } else if a > 20.0 {
        a - LN_2 - a.ln() + (-(-2.0 * a).exp()).ln_1p()
    } else {
        (a.sinh() / a).ln()
    }
}

/// `τ(c) = ∫x e^{cx} / ∫e^{cx} = coth c − 1/c` over `[−1, 1]`.
pub fn tau_of_c(c: f64) -> f64 {
    if c.abs() < SERIES_CUTOFF {
        let c2 = c * c;
        c / 3.0 - c * c2 / 45.0 + 2.0 * c * c2 * c2 / 945.0
    } else {
        1.0 / c.tanh() - 1.0 / c
    }
}

/// `τ'(c) = 1/c² − 1/sinh² c`, the variance of `x` under `e^{cx}dx`.
fn dtau(c: f64) -> f64 {
    if c.abs() < 1e-3 {
        1.0 / 3.0 - c * c / 15.0
    } else if c.abs() > 300.0 {
        1.0 / (c * c)
    } else {
        1.0 / (c * c) - 1.0 / c.sinh().powi(2)
    }
}

/// Unique `c` with `tau_of_c(c) = τ`, by Newton's method inside a shrinking bracket.
pub fn solve_c(tau: f64) -> Result<f64> {
    if !(tau.abs() < 1.0) {
        return Err(Error::Weights(format!("|tau| = {} must be < 1", tau.abs())));
    }
    if tau == 0.0 {
        return Ok(0.0);
    }
    let t = tau.abs();
    // τ(c) < 1 − 1/c + small, so τ(hi) > t for hi = 1/(1 − t) + 1
    let (mut lo, mut hi) = (0.0f64, 1.0 / (1.0 - t) + 1.0);
    let mut c = (3.0 * t).min(0.5 * hi);
    for _ in 0..200 {
        let f = tau_of_c(c) - t;
        if f > 0.0 {
            hi = c;
        } else {
            lo = c;
        }
        let step = f / dtau(c);
        let mut next = c - step;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - c).abs() <= 1e-15 * c.max(1.0) || hi - lo < 1e-15 * hi {
            c = next;
            break;
        }
        c = next;
    }
    Ok(c.copysign(tau))
}

/// `F(c) = ∫θ e^θ dg = 2(cτ(c) − log(sinh c / c))`, even, `F(0) = 0`.
pub fn f_of_c(c: f64) -> f64 {
    if c.abs() < SERIES_CUTOFF {
        let c2 = c * c;
        c2 / 3.0 - c2 * c2 / 30.0
    } else {
        2.0 * (c * tau_of_c(c) - log_sinhc(c))
    }
}

/// Moment asymmetry of a two-point divisor, heavier point at `x = +1`.
pub fn tau_of_weights(beta_p: f64, beta_q: f64) -> f64 {
    (beta_p - beta_q) / (2.0 - beta_p - beta_q)
}

fn check_pair(beta_p: f64, beta_q: f64) -> Result<()> {
    if !(0.0..1.0).contains(&beta_p) || !(0.0..=beta_p).contains(&beta_q) {
        return Err(Error::Weights(format!(
            "need 0 <= beta_q <= beta_p < 1, got ({beta_p}, {beta_q})"
        )));
    }
    Ok(())
}

/// `W(g_sol, −θ_sol) = 1 − F(c)`.
pub fn soliton_w(beta_p: f64, beta_q: f64) -> Result<f64> {
    Ok(SolitonSpec::new(beta_p, beta_q)?.w)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolitonSpec {
    /// Weight at the `x = +1` end (the heavier one).
    pub beta_p: f64,
    /// Weight at the `x = −1` end.
    pub beta_q: f64,
    pub tau: f64,
    pub c: f64,
    pub w: f64,
}

impl SolitonSpec {
    pub fn new(beta_p: f64, beta_q: f64) -> Result<SolitonSpec> {
        check_pair(beta_p, beta_q)?;
        let tau = if beta_p == beta_q { 0.0 } else { tau_of_weights(beta_p, beta_q) };
        let c = solve_c(tau)?;
        Ok(SolitonSpec { beta_p, beta_q, tau, c, w: 1.0 - f_of_c(c) })
    }

    pub fn chi(&self) -> f64 {
        2.0 - self.beta_p - self.beta_q
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MuEntry {
    pub partition: LimitDivisor,
    pub spec: SolitonSpec,
}

#[derive(Debug, Clone, Serialize)]
pub struct MuTable {
    /// Valid partitions, sorted by soliton W descending.
    pub entries: Vec<MuEntry>,
    /// Partitions dropped because a side weighs ≥ 1.
    pub excluded: Vec<LimitDivisor>,
    /// `μ₂`, the entropy threshold; `None` with fewer than two valid partitions.
    pub threshold: Option<f64>,
    /// The top entry isolates the heaviest point.
    pub argmax_is_heaviest_alone: bool,
    pub warnings: Vec<String>,
}

pub fn mu_table(d: &Divisor) -> Result<MuTable> {
    let mut warnings = Vec::new();
    if classify_stability(d)? != StabilityClass::Unstable {
        warnings.push("divisor not unstable".to_string());
    }
    if let Some(w) = d.small_k_warning() {
        warnings.push(w);
    }
    let (valid, excluded): (Vec<_>, Vec<_>) = enumerate_partitions(d).into_iter().partition(|p| p.valid);
    let mut entries = valid
        .into_iter()
        .map(|p| Ok(MuEntry { spec: SolitonSpec::new(p.beta_p, p.beta_q)?, partition: p }))
        .collect::<Result<Vec<_>>>()?;
    entries.sort_by(|a, b| b.spec.w.total_cmp(&a.spec.w));
    let threshold = (entries.len() >= 2).then(|| entries[1].spec.w);
    if threshold.is_none() {
        warnings.push("threshold undefined: fewer than two valid partitions".to_string());
    }
    let k = d.k();
    let argmax_is_heaviest_alone = entries.first().is_some_and(|e| e.partition.side_p == [k - 1]);
    Ok(MuTable { entries, excluded, threshold, argmax_is_heaviest_alone, warnings })
}

/// Samples of a circle-invariant soliton (or football) on `[−1, 1]`.
#[derive(Debug, Clone, Serialize)]
pub struct RadialProfile {
    pub spec: SolitonSpec,
    pub x: Vec<f64>,
    pub phi: Vec<f64>,
    pub r: Vec<f64>,
    pub theta: Vec<f64>,
}

/// `ψ/(2πχ)` as a power series in `c`, used where the closed form cancels.
fn psi_unit_series(x: f64, c: f64) -> f64 {
    // numerator Σ N_m c^m with N_m = ((1−x)[m odd] − (−1)^m (x^m − 1))/m!, N_0 = N_1 = 0;
    // denominator c sinh c = Σ c^{2j+2}/(2j+1)!
    let mut num = 0.0;
    let mut fact = 1.0;
    let mut xm = x;
    let mut cp = 1.0;
    for m in 2..40 {
        fact *= m as f64;
        xm *= x;
        let odd = if m % 2 == 1 { 1.0 - x } else { 0.0 };
        let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
        num += (odd - sign * (xm - 1.0)) / fact * cp;
        cp *= c;
    }
    let mut den = 0.0;
    let mut term = 1.0;
    for j in 0..20 {
        den += term;
        term *= c * c / ((2 * j + 2) as f64 * (2 * j + 3) as f64);
    }
    num / den
}

impl RadialProfile {
    pub fn from_spec(spec: SolitonSpec, n: usize) -> Result<RadialProfile> {
        if n < 64 {
            return Err(Error::Profile(format!("need at least 64 samples, got {n}")));
        }
        let x: Vec<f64> = (0..n).map(|i| -1.0 + 2.0 * i as f64 / (n - 1) as f64).collect();
        let phi = x.iter().map(|&x| spec_psi(&spec, x)).collect();
        let r = x.iter().map(|&x| spec_r(&spec, x)).collect();
        let theta = x.iter().map(|&x| spec_theta(&spec, x)).collect();
        let p = RadialProfile { spec, x, phi, r, theta };
        let (bp, bq) = p.cone_weights();
        if (bp - spec.beta_p).abs() > 1e-9 || (bq - spec.beta_q).abs() > 1e-9 {
            return Err(Error::Profile(format!("endpoint slopes give ({bp}, {bq})")));
        }
        Ok(p)
    }

    pub fn psi(&self, x: f64) -> f64 {
        spec_psi(&self.spec, x)
    }

    pub fn dpsi(&self, x: f64) -> f64 {
        let s = &self.spec;
        let k = 2.0 * PI * s.chi();
        if s.c == 0.0 {
            -2.0 * k * x / 2.0
        } else {
            k * (-1.0 + s.c * (-s.c * x).exp() / s.c.sinh()) / s.c
        }
    }

    pub fn curvature(&self, x: f64) -> f64 {
        spec_r(&self.spec, x)
    }

    pub fn theta(&self, x: f64) -> f64 {
        spec_theta(&self.spec, x)
    }

    /// Cone weights `(β at +1, β at −1)` from the endpoint slopes of `ψ`.
    pub fn cone_weights(&self) -> (f64, f64) {
        (1.0 - self.dpsi(1.0).abs() / (4.0 * PI), 1.0 - self.dpsi(-1.0).abs() / (4.0 * PI))
    }

    /// `∫[(R + |∇θ|²)/χ − θ] e^θ dg` by composite Simpson on `m` panels.
    pub fn w_by_quadrature(&self, m: usize) -> f64 {
        let chi = self.spec.chi();
        let c = self.spec.c;
        simpson(-1.0, 1.0, m, |x| {
            let th = self.theta(x);
            let grad2 = c * c * self.psi(x) / (4.0 * PI);
            ((self.curvature(x) + grad2) / chi - th) * th.exp()
        })
    }

    /// `∫θ e^θ dg` by composite Simpson.
    pub fn f_by_quadrature(&self, m: usize) -> f64 {
        simpson(-1.0, 1.0, m, |x| {
            let th = self.theta(x);
            th * th.exp()
        })
    }

    /// Curvature against the area enclosed from the `x = +1` cone, `a = 1 − x`.
    pub fn curvature_vs_area(&self, a: f64) -> f64 {
        self.curvature(1.0 - a)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("x,phi,R,theta\n");
        for i in 0..self.x.len() {
            s.push_str(&format!("{:.12e},{:.12e},{:.12e},{:.12e}\n", self.x[i], self.phi[i], self.r[i], self.theta[i]));
        }
        s
    }
}

fn spec_psi(s: &SolitonSpec, x: f64) -> f64 {
    let k = 2.0 * PI * s.chi();
    if s.c == 0.0 {
        0.5 * k * (1.0 - x * x)
    } else if s.c.abs() < 0.5 {
        k * psi_unit_series(x, s.c)
    } else {
        let c = s.c;
        k / c * ((1.0 - x) - ((-c * x).exp() - (-c).exp()) / c.sinh())
    }
}

fn spec_r(s: &SolitonSpec, x: f64) -> f64 {
    let half_chi = 0.5 * s.chi();
    if s.c == 0.0 {
        half_chi
    } else {
        // c e^{−cx}/sinh c = e^{−cx − log(sinh c / c)}
        half_chi * (-s.c * x - log_sinhc(s.c)).exp()
    }
}

fn spec_theta(s: &SolitonSpec, x: f64) -> f64 {
    s.c * x - log_sinhc(s.c)
}

pub fn soliton_profile(beta_p: f64, beta_q: f64, n: usize) -> Result<RadialProfile> {
    RadialProfile::from_spec(SolitonSpec::new(beta_p, beta_q)?, n)
}

/// Constant-curvature football with two cones of weight `β`.
pub fn football(beta: f64, n: usize) -> Result<RadialProfile> {
    soliton_profile(beta, beta, n)
}

pub fn simpson(a: f64, b: f64, m: usize, f: impl Fn(f64) -> f64) -> f64 {
    let m = m + m % 2;
    let h = (b - a) / m as f64;
    let mut s = f(a) + f(b);
    for i in 1..m {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + i as f64 * h);
    }
    s * h / 3.0
}
