//! Experiment configuration: a TOML key-value file with a fixed schema.
//!
//! ```toml
//! [divisor]
//! weights = [0.5, 0.5, 0.5]          # β_j in (0,1); "num/den" strings are exact
//! positions = [[1,0,0], [-0.5,0.866,0], [-0.5,-0.866,0]]
//!
//! [grid]
//! n_lat = 64                         # rings
//! n_lon = 128                        # columns
//!
//! [flow]
//! eps = 0.05                         # cone smoothing, half-chord units
//! dt = 0.02                          # flow time units
//! t_max = 50.0
//! scheme = "semi-implicit"           # or "rk2"
//! rhs = "curvature"                  # or "conformal" (algebraically equal)
//! gauge = "com"                      # or "fixed"
//! renormalize_every = 1              # steps
//! sample_every = 0.5                 # trace cadence, time units
//! snapshot_every = 10.0              # field files, time units (0 = final only)
//! seed = 1
//!
//! [initial]
//! kind = "zero"                      # "zero" | "bump" | "file"
//! amplitude = 0.3                    # bump height
//! width = 0.3                        # bump half-chord width
//! path = "u0.csv"                    # for kind = "file"
//!
//! [monitors]
//! delta_exclusion = 0.3              # metric radius excluded around cones
//! ball_radius = 0.2                  # metric radius for volume ratios
//! eps_f = 0.05                       # exponent offset of the F_β family
//! slack = 1e-6                       # per-step monotonicity slack
//! mu_budget = 100                    # descent iterations for μ estimates
//! gauge_tol = 1e-4                   # |centre of mass| that triggers re-centring
//!
//! [stop]
//! auto = true                        # stop when all deltas stay small
//! patience = 10                      # consecutive quiet samples
//! tol = 1e-6                         # per-sample change threshold
//!
//! [diagnostics]
//! flat_tol = 5e-2                    # sup |R − target| for flat verdicts
//! cluster_tol = 0.1                  # fraction of initial min distance
//! profile_tol = 5e-2                 # curvature–area L² residual
//! w_tol = 5e-2                       # |W − μ-table value|
//! residual_tol = 1e-2                # soliton-residual floor
//! ```
//!
//! Unknown keys anywhere are errors.

use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::marked_sphere::{Divisor, Weight};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowConfig {
    pub divisor: DivisorSection,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub flow: FlowSection,
    #[serde(default)]
    pub initial: InitialSection,
    #[serde(default)]
    pub monitors: MonitorSection,
    #[serde(default)]
    pub stop: StopSection,
    #[serde(default)]
    pub diagnostics: DiagnosticSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DivisorSection {
    pub weights: Vec<Weight>,
    #[serde(default)]
    pub positions: Option<Vec<[f64; 3]>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub n_lat: usize,
    /// 1 selects the axisymmetric solver.
    pub n_lon: usize,
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection { n_lat: 64, n_lon: 128 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    SemiImplicit,
    Rk2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RhsForm {
    /// `½χ − R(u)`.
    Curvature,
    /// `e^{−u}Δ_bg u + ½χ − e^{−u}R_bg`.
    Conformal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Gauge {
    /// Möbius re-centring of the area measure at every sample.
    Com,
    /// Coordinates never move.
    Fixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlowSection {
    pub eps: f64,
    pub dt: f64,
    pub t_max: f64,
    pub scheme: Scheme,
    pub rhs: RhsForm,
    pub gauge: Gauge,
    pub renormalize_every: usize,
    pub sample_every: f64,
    pub snapshot_every: f64,
    pub seed: u64,
}

impl Default for FlowSection {
    fn default() -> Self {
        FlowSection {
            eps: 0.05,
            dt: 0.02,
            t_max: 50.0,
            scheme: Scheme::SemiImplicit,
            rhs: RhsForm::Curvature,
            gauge: Gauge::Com,
            renormalize_every: 1,
            sample_every: 0.5,
            snapshot_every: 0.0,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialKind {
    Zero,
    Bump,
    File,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitialSection {
    pub kind: InitialKind,
    pub amplitude: f64,
    pub width: f64,
    #[serde(default)]
    pub path: Option<PathBuf>,
}

impl Default for InitialSection {
    fn default() -> Self {
        InitialSection { kind: InitialKind::Zero, amplitude: 0.3, width: 0.3, path: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MonitorSection {
    pub delta_exclusion: f64,
    pub ball_radius: f64,
    pub eps_f: f64,
    pub slack: f64,
    /// Descent iterations for the final μ estimate.
    pub mu_budget: usize,
    /// Centre-of-mass norm that triggers re-centring.
    pub gauge_tol: f64,
}

impl Default for MonitorSection {
    fn default() -> Self {
        MonitorSection { delta_exclusion: 0.3, ball_radius: 0.2, eps_f: 0.05, slack: 1e-6, mu_budget: 100, gauge_tol: 1e-4 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StopSection {
    pub auto: bool,
    pub patience: usize,
    pub tol: f64,
}

impl Default for StopSection {
    fn default() -> Self {
        StopSection { auto: true, patience: 10, tol: 1e-6 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnosticSection {
    pub flat_tol: f64,
    pub cluster_tol: f64,
    pub profile_tol: f64,
    pub w_tol: f64,
    pub residual_tol: f64,
}

impl Default for DiagnosticSection {
    fn default() -> Self {
        DiagnosticSection { flat_tol: 5e-2, cluster_tol: 0.1, profile_tol: 5e-2, w_tol: 5e-2, residual_tol: 1e-2 }
    }
}

impl FlowConfig {
    pub fn from_toml(text: &str) -> Result<FlowConfig> {
        let cfg: FlowConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<FlowConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = FlowConfig::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })?;
        // relative field paths resolve against the config's directory
        if let Some(p) = cfg.initial.path.as_mut() {
            if p.is_relative() {
                if let Some(dir) = path.parent() {
                    *p = dir.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn divisor(&self) -> Result<Divisor> {
        match &self.divisor.positions {
            Some(p) => Divisor::new(self.divisor.weights.clone(), p.clone()),
            None => Divisor::from_weights(self.divisor.weights.clone()),
        }
    }

    pub fn is_axisymmetric(&self) -> bool {
        self.grid.n_lon == 1
    }

    pub fn validate(&self) -> Result<()> {
        let f = &self.flow;
        let bad = |m: String| Err(Error::Config(m));
        if !(f.dt > 0.0) {
            return bad(format!("dt must be positive, got {}", f.dt));
        }
        if !(f.t_max > 0.0) {
            return bad(format!("t_max must be positive, got {}", f.t_max));
        }
        if !(f.eps > 0.0) {
            return bad(format!("eps must be positive, got {}", f.eps));
        }
        if !(f.sample_every >= f.dt) {
            return bad(format!("sample_every = {} is shorter than dt = {}", f.sample_every, f.dt));
        }
        if f.renormalize_every == 0 {
            return bad("renormalize_every must be at least 1".into());
        }
        if !(f.snapshot_every >= 0.0) {
            return bad("snapshot_every must be nonnegative".into());
        }
        let m = &self.monitors;
        if !(m.delta_exclusion >= 2.0 * f.eps) {
            return bad(format!("delta_exclusion = {} must be at least 2 eps = {}", m.delta_exclusion, 2.0 * f.eps));
        }
        if !(m.ball_radius > 0.0) {
            return bad("ball_radius must be positive".into());
        }
        if self.initial.kind == InitialKind::File && self.initial.path.is_none() {
            return bad("initial.kind = \"file\" needs initial.path".into());
        }
        if self.grid.n_lon != 1 && self.grid.n_lon % 2 != 0 {
            return bad(format!("n_lon must be even (pole reflection), got {}", self.grid.n_lon));
        }
        self.divisor()?;
        Ok(())
    }

    /// Number of steps per sample interval.
    pub fn steps_per_sample(&self) -> usize {
        ((self.flow.sample_every / self.flow.dt).round() as usize).max(1)
    }
}
