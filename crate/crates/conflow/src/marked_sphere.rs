//! Marked-point divisors on the sphere and their exact invariants.
//!
//! A [`Divisor`] is the data `β = Σ β_j [p_j]`. Weights may be exact rationals
//! (parsed from `"num/den"` strings) or floats; every decision that hinges on an
//! equality (the semi-stable case, the `β ≥ 1` validity of a partition side) is
//! taken exactly when all weights are rational.

use num_rational::Rational64;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use std::fmt;

use crate::error::{Error, Result};

/// Tolerance for float equality in the stability trichotomy.
pub const FLOAT_TOL: f64 = 1e-12;

/// Minimum angular separation (radians) between two marked points.
const MIN_SEPARATION: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Weight {
    Exact(Rational64),
    Float(f64),
}

impl Weight {
    pub fn value(&self) -> f64 {
        match self {
            Weight::Exact(r) => r.to_f64().unwrap_or(f64::NAN),
            Weight::Float(x) => *x,
        }
    }

    pub fn exact(&self) -> Option<Rational64> {
        match self {
            Weight::Exact(r) => Some(*r),
            Weight::Float(_) => None,
        }
    }

    pub fn parse(s: &str) -> Result<Weight> {
        let s = s.trim();
        if let Some((n, d)) = s.split_once('/') {
            let n: i64 = n.trim().parse().map_err(|_| Error::Weights(format!("bad numerator in {s:?}")))?;
            let d: i64 = d.trim().parse().map_err(|_| Error::Weights(format!("bad denominator in {s:?}")))?;
            if d == 0 {
                return Err(Error::Weights(format!("zero denominator in {s:?}")));
            }
            Ok(Weight::Exact(Rational64::new(n, d)))
        } else {
            let x: f64 = s.parse().map_err(|_| Error::Weights(format!("cannot parse weight {s:?}")))?;
            Ok(Weight::Float(x))
        }
    }
}

impl fmt::Display for Weight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Weight::Exact(r) => write!(f, "{}/{}", r.numer(), r.denom()),
            Weight::Float(x) => write!(f, "{x}"),
        }
    }
}

impl Serialize for Weight {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Weight::Exact(r) => s.serialize_str(&format!("{}/{}", r.numer(), r.denom())),
            Weight::Float(x) => s.serialize_f64(*x),
        }
    }
}

impl<'de> Deserialize<'de> for Weight {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(x) => Ok(Weight::Float(x)),
            Raw::Str(s) => Weight::parse(&s).map_err(serde::de::Error::custom),
        }
    }
}

/// Sum of weights, exact if every term is exact.
fn sum_weights<'a>(ws: impl IntoIterator<Item = &'a Weight>) -> Weight {
    let mut exact = Some(Rational64::zero());
    let mut float = 0.0;
    for w in ws {
        float += w.value();
        exact = match (exact, w.exact()) {
            (Some(a), Some(b)) => Some(a + b),
            _ => None,
        };
    }
    match exact {
        Some(r) => Weight::Exact(r),
        None => Weight::Float(float),
    }
}

/// Three-way comparison `a` vs `b`, exact when both are rational.
fn compare(a: &Weight, b: &Weight) -> std::cmp::Ordering {
    use std::cmp::Ordering::*;
    match (a.exact(), b.exact()) {
        (Some(x), Some(y)) => x.cmp(&y),
        _ => {
            let d = a.value() - b.value();
            if d.abs() < FLOAT_TOL {
                Equal
            } else if d < 0.0 {
                Less
            } else {
                Greater
            }
        }
    }
}

fn scale(w: &Weight, k: i64) -> Weight {
    match w {
        Weight::Exact(r) => Weight::Exact(*r * k),
        Weight::Float(x) => Weight::Float(*x * k as f64),
    }
}

/// `β = Σ β_j [p_j]`, weights sorted ascending with positions permuted alongside.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Divisor {
    weights: Vec<Weight>,
    positions: Vec<[f64; 3]>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDivisor {
    weights: Vec<Weight>,
    #[serde(default)]
    positions: Option<Vec<[f64; 3]>>,
}

impl<'de> Deserialize<'de> for Divisor {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = RawDivisor::deserialize(d)?;
        let res = match raw.positions {
            Some(p) => Divisor::new(raw.weights, p),
            None => Divisor::from_weights(raw.weights),
        };
        res.map_err(serde::de::Error::custom)
    }
}

impl Divisor {
    pub fn new(weights: Vec<Weight>, positions: Vec<[f64; 3]>) -> Result<Divisor> {
        if weights.len() != positions.len() {
            return Err(Error::Divisor(format!(
                "{} weights but {} positions",
                weights.len(),
                positions.len()
            )));
        }
        for w in &weights {
            let x = w.value();
            if !(x > 0.0 && x < 1.0) {
                return Err(Error::Weights(format!("weight {w} outside (0,1)")));
            }
        }
        let mut pos = Vec::with_capacity(positions.len());
        for p in positions {
            let n = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
            if !(n.is_finite() && n > 0.0) {
                return Err(Error::Divisor(format!("position {p:?} is not a direction")));
            }
            pos.push([p[0] / n, p[1] / n, p[2] / n]);
        }
        for i in 0..pos.len() {
            for j in 0..i {
                if angle(&pos[i], &pos[j]) <= MIN_SEPARATION {
                    return Err(Error::Divisor(format!("points {j} and {i} coincide")));
                }
            }
        }
        let mut idx: Vec<usize> = (0..weights.len()).collect();
        // stable sort keeps the user's order among equal weights
        idx.sort_by(|&a, &b| compare(&weights[a], &weights[b]));
        Ok(Divisor {
            weights: idx.iter().map(|&i| weights[i]).collect(),
            positions: idx.iter().map(|&i| pos[i]).collect(),
        })
    }

    /// Weights only; points are spread deterministically over the sphere
    /// (Fibonacci lattice), which suffices for the position-free invariants.
    pub fn from_weights(weights: Vec<Weight>) -> Result<Divisor> {
        let k = weights.len();
        let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
        let positions = (0..k)
            .map(|i| {
                let z = 1.0 - (2.0 * i as f64 + 1.0) / k as f64;
                let r = (1.0 - z * z).sqrt();
                let a = golden * i as f64;
                [r * a.cos(), r * a.sin(), z]
            })
            .collect();
        Divisor::new(weights, positions)
    }

    pub fn from_f64(weights: &[f64], positions: Vec<[f64; 3]>) -> Result<Divisor> {
        Divisor::new(weights.iter().map(|&w| Weight::Float(w)).collect(), positions)
    }

    pub fn empty() -> Divisor {
        Divisor { weights: vec![], positions: vec![] }
    }

    pub fn k(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[Weight] {
        &self.weights
    }

    pub fn weight_values(&self) -> Vec<f64> {
        self.weights.iter().map(Weight::value).collect()
    }

    pub fn positions(&self) -> &[[f64; 3]] {
        &self.positions
    }

    pub fn beta_max(&self) -> f64 {
        self.weights.last().map_or(0.0, Weight::value)
    }

    pub fn total_weight(&self) -> Weight {
        sum_weights(&self.weights)
    }

    pub fn is_exact(&self) -> bool {
        self.weights.iter().all(|w| w.exact().is_some())
    }

    /// Same weights (in the same order) at new positions. Used when points
    /// are moved by a conformal map, so points that have merged numerically
    /// are allowed to coincide.
    pub fn with_positions(&self, positions: Vec<[f64; 3]>) -> Result<Divisor> {
        if positions.len() != self.weights.len() {
            return Err(Error::Divisor(format!("{} weights but {} positions", self.weights.len(), positions.len())));
        }
        let mut pos = Vec::with_capacity(positions.len());
        for p in positions {
            let n = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
            if !(n.is_finite() && n > 0.0) {
                return Err(Error::Divisor(format!("position {p:?} is not a direction")));
            }
            pos.push([p[0] / n, p[1] / n, p[2] / n]);
        }
        Ok(Divisor { weights: self.weights.clone(), positions: pos })
    }

    /// Set when the convergence picture for the three classes assumes at least three points.
    pub fn small_k_warning(&self) -> Option<String> {
        (self.k() < 3).then(|| format!("k = {} < 3: the stable / semi-stable / unstable picture assumes k >= 3", self.k()))
    }
}

pub fn angle(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let cross = [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ];
    let s = (cross[0] * cross[0] + cross[1] * cross[1] + cross[2] * cross[2]).sqrt();
    let c = a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
    s.atan2(c)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StabilityClass {
    Stable,
    SemiStable,
    Unstable,
}

impl fmt::Display for StabilityClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            StabilityClass::Stable => "Stable",
            StabilityClass::SemiStable => "SemiStable",
            StabilityClass::Unstable => "Unstable",
        };
        f.write_str(s)
    }
}

/// χ(S², β) = 2 − Σ β_j.
pub fn euler_characteristic(d: &Divisor) -> f64 {
    2.0 - d.total_weight().value()
}

pub fn classify_stability(d: &Divisor) -> Result<StabilityClass> {
    if d.k() == 0 {
        return Err(Error::Divisor("classification needs at least one marked point".into()));
    }
    use std::cmp::Ordering::*;
    let sum = d.total_weight();
    if compare(&sum, &Weight::Exact(Rational64::from_integer(2))) != Less {
        return Ok(StabilityClass::Stable);
    }
    let twice_max = scale(d.weights.last().unwrap(), 2);
    Ok(match compare(&twice_max, &sum) {
        Less => StabilityClass::Stable,
        Equal => StabilityClass::SemiStable,
        Greater => StabilityClass::Unstable,
    })
}

/// α(S², β) = (1 − β_max)/χ, valid when Σβ < 2.
pub fn alpha_invariant(d: &Divisor) -> Result<f64> {
    let chi = euler_characteristic(d);
    if compare(&d.total_weight(), &Weight::Exact(Rational64::from_integer(2))) != std::cmp::Ordering::Less {
        return Err(Error::Hypothesis(format!("alpha invariant needs total weight < 2 (chi = {chi})")));
    }
    Ok((1.0 - d.beta_max()) / chi)
}

/// A two-point limit `β_p [p] + β_q [q]` with the split that produced it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LimitDivisor {
    pub beta_p: f64,
    pub beta_q: f64,
    /// Indices (into the sorted divisor) collapsing onto `p`.
    pub side_p: Vec<usize>,
    /// Indices collapsing onto `q`; may be empty.
    pub side_q: Vec<usize>,
    /// `β_p < 1`, decided exactly when possible.
    pub valid: bool,
    /// The prediction rests on an unverified hypothesis.
    pub conditional: bool,
}

/// All 2^{k−1} unordered splits `{I, J}`, ordered by the bitmask of the side
/// not containing the heaviest point.
pub fn enumerate_partitions(d: &Divisor) -> Vec<LimitDivisor> {
    let k = d.k();
    if k == 0 {
        return vec![];
    }
    let one = Weight::Exact(Rational64::from_integer(1));
    let mut out = Vec::with_capacity(1 << (k - 1));
    for mask in 0u64..(1u64 << (k - 1)) {
        let mut a = Vec::new();
        let mut b = Vec::new();
        for i in 0..k - 1 {
            if mask & (1 << i) != 0 {
                b.push(i);
            } else {
                a.push(i);
            }
        }
        a.push(k - 1);
        let sa = sum_weights(a.iter().map(|&i| &d.weights[i]));
        let sb = sum_weights(b.iter().map(|&i| &d.weights[i]));
        let (hi, lo, side_p, side_q) = if compare(&sa, &sb) == std::cmp::Ordering::Less {
            (sb, sa, b, a)
        } else {
            (sa, sb, a, b)
        };
        out.push(LimitDivisor {
            beta_p: hi.value(),
            beta_q: lo.value(),
            side_p,
            side_q,
            valid: compare(&hi, &one) == std::cmp::Ordering::Less,
            conditional: false,
        });
    }
    out
}

/// Predicted two-point limit for semi-stable and unstable divisors.
///
/// For unstable divisors the heaviest point is predicted to stay alone; this
/// holds under an entropy threshold on the initial metric and is flagged
/// `conditional`.
pub fn predict_limit_divisor(d: &Divisor) -> Result<LimitDivisor> {
    let k = d.k();
    let side_p = vec![k.saturating_sub(1)];
    let side_q: Vec<usize> = (0..k.saturating_sub(1)).collect();
    match classify_stability(d)? {
        StabilityClass::Stable => Err(Error::Hypothesis("stable divisor: the limit keeps every marked point".into())),
        StabilityClass::SemiStable => Ok(LimitDivisor {
            beta_p: d.beta_max(),
            beta_q: d.beta_max(),
            side_p,
            side_q,
            valid: true,
            conditional: false,
        }),
        StabilityClass::Unstable => Ok(LimitDivisor {
            beta_p: d.beta_max(),
            beta_q: sum_weights(&d.weights[..k - 1]).value(),
            side_p,
            side_q,
            valid: true,
            conditional: true,
        }),
    }
}
