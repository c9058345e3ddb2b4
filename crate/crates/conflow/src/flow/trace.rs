use serde::Serialize;
use std::io::Write;
use std::path::Path;

use super::gauge::GaugeEvent;
use crate::error::{Error, Result};

/// One row of monitors, written every `sample_every` time units.
///
/// Monotone quantities come twice: the accumulated value uses only the flow's
/// own increments (re-centring jumps are logged separately), the raw value is
/// evaluated on the current state.
#[derive(Debug, Clone, Serialize)]
pub struct TraceRecord {
    pub t: f64,
    pub step: usize,
    pub area: f64,
    /// Largest `|log(2/area)|` corrected by renormalization since the last row.
    pub area_drift: f64,
    pub int_r: f64,
    pub r_min: f64,
    pub r_max: f64,
    /// `sup |R|` over all nodes.
    pub r_sup: f64,
    /// `sup |R − ½χ|` outside the excluded balls about the cone points.
    pub r_dev_off_cones: f64,
    pub f_beta: f64,
    pub f_beta_raw: f64,
    pub f_beta_eps: f64,
    /// Predicted `dF_β/dt` from the Ricci potential.
    pub dissipation: f64,
    /// Largest per-step increase of `F_β` since the last row.
    pub f_increase: f64,
    pub n_entropy: f64,
    pub n_raw: f64,
    pub chow_s: f64,
    pub n_increase: f64,
    pub w_norm: f64,
    pub soliton_residual: f64,
    pub diameter: f64,
    /// `d(p_i, p_j)` for `i < j` in divisor order.
    pub distances: Vec<f64>,
    /// `Vol B(p_j, r) / model` per cone point.
    pub ball_ratios: Vec<f64>,
    pub com: f64,
    pub cg_iterations: f64,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct FlowTrace {
    pub records: Vec<TraceRecord>,
    pub gauge_events: Vec<GaugeEvent>,
    /// Set when the run ended on a numerical failure; rows up to it are valid.
    pub failure: Option<String>,
}

impl FlowTrace {
    pub fn last(&self) -> Option<&TraceRecord> {
        self.records.last()
    }

    pub fn column(&self, f: impl Fn(&TraceRecord) -> f64) -> Vec<f64> {
        self.records.iter().map(f).collect()
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        let k = self.records.first().map_or(0, |r| r.ball_ratios.len());
        let mut head: Vec<String> = [
            "t", "step", "area", "area_drift", "int_r", "r_min", "r_max", "r_sup", "r_dev_off_cones", "f_beta",
            "f_beta_raw", "f_beta_eps", "dissipation", "f_increase", "n_entropy", "n_raw", "chow_s", "n_increase",
            "w_norm", "soliton_residual", "diameter",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        for i in 0..k {
            for j in i + 1..k {
                head.push(format!("d_{}_{}", i + 1, j + 1));
            }
        }
        for i in 0..k {
            head.push(format!("ball_ratio_{}", i + 1));
        }
        head.push("com".into());
        head.push("cg_iterations".into());
        writeln!(out, "{}", head.join(","))?;
        for r in &self.records {
            let mut row = vec![
                r.t,
                r.step as f64,
                r.area,
                r.area_drift,
                r.int_r,
                r.r_min,
                r.r_max,
                r.r_sup,
                r.r_dev_off_cones,
                r.f_beta,
                r.f_beta_raw,
                r.f_beta_eps,
                r.dissipation,
                r.f_increase,
                r.n_entropy,
                r.n_raw,
                r.chow_s,
                r.n_increase,
                r.w_norm,
                r.soliton_residual,
                r.diameter,
            ];
            row.extend(&r.distances);
            row.extend(&r.ball_ratios);
            row.push(r.com);
            row.push(r.cg_iterations);
            let cells: Vec<String> = row.iter().map(|v| format!("{v:.12e}")).collect();
            writeln!(out, "{}", cells.join(","))?;
        }
        if let Some(f) = &self.failure {
            writeln!(out, "# FAILED: {f}")?;
        }
        Ok(())
    }

    /// Reads a trace written by [`FlowTrace::write_csv`]. Gauge events are not
    /// part of the CSV and come back empty.
    pub fn read_csv(path: &Path) -> Result<FlowTrace> {
        let text = std::fs::read_to_string(path)?;
        let bad = |m: String| Error::Config(format!("{}: {m}", path.display()));
        let mut lines = text.lines();
        let head: Vec<&str> = lines.next().ok_or_else(|| bad("empty trace".into()))?.split(',').collect();
        let col = |name: &str| head.iter().position(|h| *h == name);
        let need = |name: &str| col(name).ok_or_else(|| bad(format!("missing column {name}")));
        let pairs: Vec<usize> = head.iter().enumerate().filter(|(_, h)| h.starts_with("d_")).map(|(i, _)| i).collect();
        let balls: Vec<usize> =
            head.iter().enumerate().filter(|(_, h)| h.starts_with("ball_ratio_")).map(|(i, _)| i).collect();
        let mut trace = FlowTrace::default();
        for (ln, line) in lines.enumerate() {
            if let Some(msg) = line.strip_prefix("# FAILED: ") {
                trace.failure = Some(msg.to_string());
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let v: Vec<f64> = line
                .split(',')
                .map(|c| c.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| bad(format!("line {}: {e}", ln + 2)))?;
            if v.len() != head.len() {
                return Err(bad(format!("line {}: {} cells for {} columns", ln + 2, v.len(), head.len())));
            }
            let g = |name: &str| need(name).map(|i| v[i]);
            trace.records.push(TraceRecord {
                t: g("t")?,
                step: g("step")? as usize,
                area: g("area")?,
                area_drift: g("area_drift")?,
                int_r: g("int_r")?,
                r_min: g("r_min")?,
                r_max: g("r_max")?,
                r_sup: g("r_sup")?,
                r_dev_off_cones: g("r_dev_off_cones")?,
                f_beta: g("f_beta")?,
                f_beta_raw: g("f_beta_raw")?,
                f_beta_eps: g("f_beta_eps")?,
                dissipation: g("dissipation")?,
                f_increase: g("f_increase")?,
                n_entropy: g("n_entropy")?,
                n_raw: g("n_raw")?,
                chow_s: g("chow_s")?,
                n_increase: g("n_increase")?,
                w_norm: g("w_norm")?,
                soliton_residual: g("soliton_residual")?,
                diameter: g("diameter")?,
                distances: pairs.iter().map(|&i| v[i]).collect(),
                ball_ratios: balls.iter().map(|&i| v[i]).collect(),
                com: g("com")?,
                cg_iterations: g("cg_iterations")?,
            });
        }
        Ok(trace)
    }
}
