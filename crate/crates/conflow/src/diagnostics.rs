//! Post-run analysis: curvature statistics, clustering of marked points,
//! volume ratios and the convergence verdict.
//!
//! Everything here works on [`Samples`], a solver-independent view of a
//! terminal metric (curvature, node areas, distances from each marked
//! point), so 2-D states and moment-coordinate states go through the same
//! decision tree.

use serde::Serialize;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::flow::axisym::MomentState;
use crate::flow::{DiagnosticSection, FlowTrace};
use crate::geometry::{DistanceField, MetricState};
use crate::marked_sphere::{classify_stability, Divisor, StabilityClass};
use crate::soliton::{football, mu_table, soliton_profile, RadialProfile};

/// Area of the metric ball of radius `r` about the tip of a cone of angle
/// `2π(1 − β)` with constant curvature `R` (Gauss curvature `2πR`).
pub fn model_ball_area(beta: f64, r_curv: f64, r: f64) -> f64 {
    let k = 2.0 * PI * r_curv;
    let full = if k.abs() < 1e-12 {
        PI * r * r
    } else if k > 0.0 {
        2.0 * PI * (1.0 - (k.sqrt() * r).cos()) / k
    } else {
        2.0 * PI * (((-k).sqrt() * r).cosh() - 1.0) / -k
    };
    (1.0 - beta) * full
}

/// Node-wise samples of a terminal metric.
#[derive(Debug, Clone)]
pub struct Samples {
    /// Regular part of the scalar curvature.
    pub r: Vec<f64>,
    /// Area carried by each node (sums to the total area).
    pub mass: Vec<f64>,
    /// Distance of every node from each marked point, in divisor order.
    pub dist: Vec<Vec<f64>>,
    /// Pairwise distances between marked points.
    pub pair: Vec<Vec<f64>>,
    pub betas: Vec<f64>,
    pub half_chi: f64,
}

impl Samples {
    pub fn from_state(state: &MetricState) -> Samples {
        let df = DistanceField::new(state);
        let pos = state.background.divisor.positions();
        let dist: Vec<Vec<f64>> = pos.iter().map(|p| df.from_point(p)).collect();
        let k = pos.len();
        let mut pair = vec![vec![0.0; k]; k];
        for i in 0..k {
            for j in i + 1..k {
                let d = df.to_point(&dist[i], &pos[j]);
                pair[i][j] = d;
                pair[j][i] = d;
            }
        }
        Samples {
            r: state.regular_curvature(),
            mass: state.masses(),
            dist,
            pair,
            betas: state.background.divisor.weight_values(),
            half_chi: state.half_chi(),
        }
    }

    /// `ends[j]` is the end of divisor point `j`: `1` for `x = +1`, `0` for `x = −1`.
    pub fn from_moment(state: &MomentState, ends: &[usize]) -> Samples {
        let n = state.n();
        let h = state.h();
        let mut mass = vec![h; n + 1];
        mass[0] = 0.5 * h;
        mass[n] = 0.5 * h;
        let south = state.distance_from_south();
        let total = south[n];
        let dist: Vec<Vec<f64>> = ends
            .iter()
            .map(|&e| if e == 0 { south.clone() } else { south.iter().map(|d| total - d).collect() })
            .collect();
        let k = ends.len();
        let mut pair = vec![vec![0.0; k]; k];
        for i in 0..k {
            for j in 0..k {
                if ends[i] != ends[j] {
                    pair[i][j] = total;
                }
            }
        }
        let betas = ends.iter().map(|&e| if e == 0 { state.beta_q } else { state.beta_p }).collect();
        Samples { r: state.curvature(), mass, dist, pair, betas, half_chi: 0.5 * state.chi() }
    }

    pub fn beta_max(&self) -> f64 {
        self.betas.iter().cloned().fold(0.0, f64::max)
    }

    /// Distance of every node from the nearest of the given marked points.
    pub fn dist_to_set(&self, set: &[usize]) -> Vec<f64> {
        (0..self.r.len()).map(|k| set.iter().map(|&j| self.dist[j][k]).fold(f64::INFINITY, f64::min)).collect()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CurvatureStats {
    pub r_min: f64,
    pub r_max: f64,
    pub half_chi: f64,
    pub one_minus_beta_max: f64,
    /// `sup |R − ½χ|` off the excluded balls.
    pub sup_dev_half_chi: f64,
    /// `sup |R − (1 − β_max)|` off the excluded balls.
    pub sup_dev_beta_max: f64,
    /// Fraction of the area kept after exclusion.
    pub kept_area: f64,
}

/// Curvature statistics outside the balls of radius `delta` about the marked
/// points.
pub fn curvature_stats(s: &Samples, delta: f64) -> Result<CurvatureStats> {
    let all: Vec<usize> = (0..s.betas.len()).collect();
    let near = s.dist_to_set(&all);
    let target_b = 1.0 - s.beta_max();
    let mut st = CurvatureStats {
        r_min: f64::INFINITY,
        r_max: f64::NEG_INFINITY,
        half_chi: s.half_chi,
        one_minus_beta_max: target_b,
        sup_dev_half_chi: 0.0,
        sup_dev_beta_max: 0.0,
        kept_area: 0.0,
    };
    let total: f64 = s.mass.iter().sum();
    for k in 0..s.r.len() {
        if !all.is_empty() && near[k] <= delta {
            continue;
        }
        let r = s.r[k];
        st.r_min = st.r_min.min(r);
        st.r_max = st.r_max.max(r);
        st.sup_dev_half_chi = st.sup_dev_half_chi.max((r - s.half_chi).abs());
        st.sup_dev_beta_max = st.sup_dev_beta_max.max((r - target_b).abs());
        st.kept_area += s.mass[k];
    }
    if st.kept_area == 0.0 {
        return Err(Error::Diagnostics(format!("exclusion radius {delta} covers the sphere")));
    }
    st.kept_area /= total;
    Ok(st)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Clusters {
    /// Groups of divisor indices, each sorted, ordered by first index.
    pub groups: Vec<Vec<usize>>,
    /// Smallest distance between members of two groups.
    pub inter: Vec<Vec<f64>>,
}

/// Single-linkage clustering of the marked points at distance `tol`.
pub fn marked_point_clusters(s: &Samples, tol: f64) -> Clusters {
    let k = s.betas.len();
    let mut parent: Vec<usize> = (0..k).collect();
    fn find(p: &mut [usize], i: usize) -> usize {
        let mut r = i;
        while p[r] != r {
            r = p[r];
        }
        p[i] = r;
        r
    }
    for i in 0..k {
        for j in i + 1..k {
            if s.pair[i][j] < tol {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                parent[a.max(b)] = a.min(b);
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = vec![];
    let mut root_of = vec![usize::MAX; k];
    for i in 0..k {
        let r = find(&mut parent, i);
        if root_of[r] == usize::MAX {
            root_of[r] = groups.len();
            groups.push(vec![]);
        }
        groups[root_of[r]].push(i);
    }
    let g = groups.len();
    let mut inter = vec![vec![0.0; g]; g];
    for a in 0..g {
        for b in a + 1..g {
            let d = groups[a]
                .iter()
                .flat_map(|&i| groups[b].iter().map(move |&j| (i, j)))
                .map(|(i, j)| s.pair[i][j])
                .fold(f64::INFINITY, f64::min);
            inter[a][b] = d;
            inter[b][a] = d;
        }
    }
    Clusters { groups, inter }
}

/// Area of the `r`-ball about marked point `j` over the area of the `r`-ball
/// on the smooth constant-curvature `1 − β_max` model.
pub fn volume_ratio(s: &Samples, j: usize, r: f64) -> f64 {
    let vol: f64 = s.mass.iter().zip(&s.dist[j]).filter(|(_, d)| **d <= r).map(|(m, _)| m).sum();
    vol / model_ball_area(0.0, 1.0 - s.beta_max(), r)
}

/// L² mismatch (area-weighted RMS) between the curvature as a function of the
/// area enclosed from the point set `deep` and the profile's curvature against
/// the area enclosed from its `x = +1` cone.
pub fn compare_to_profile(s: &Samples, deep: &[usize], profile: &RadialProfile) -> Result<f64> {
    if deep.is_empty() {
        return Err(Error::Diagnostics("no cone point to define the axis".into()));
    }
    let d = s.dist_to_set(deep);
    let mut order: Vec<usize> = (0..d.len()).collect();
    order.sort_by(|&a, &b| d[a].total_cmp(&d[b]));
    let total: f64 = s.mass.iter().sum();
    let mut acc = 0.0;
    let mut err = 0.0;
    for k in order {
        let a = (acc + 0.5 * s.mass[k]) * 2.0 / total;
        acc += s.mass[k];
        err += s.mass[k] * (s.r[k] - profile.curvature_vs_area(a.clamp(0.0, 2.0))).powi(2);
    }
    Ok((err / total).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind")]
pub enum Verdict {
    ConstantCurvature,
    /// `heavy` is the cluster holding the heaviest point.
    Football { heavy: Vec<usize>, light: Vec<usize> },
    /// Points in `side_p` collapse onto the cone of weight `beta_p`.
    Soliton { side_p: Vec<usize>, side_q: Vec<usize>, beta_p: f64, beta_q: f64 },
    Undecided { reason: String },
}

impl Verdict {
    pub fn name(&self) -> &'static str {
        match self {
            Verdict::ConstantCurvature => "constant-curvature",
            Verdict::Football { .. } => "football",
            Verdict::Soliton { .. } => "soliton",
            Verdict::Undecided { .. } => "undecided",
        }
    }
}

/// One candidate limit checked against the terminal state.
#[derive(Debug, Clone, Serialize)]
pub struct PartitionMatch {
    pub side_p: Vec<usize>,
    pub side_q: Vec<usize>,
    pub beta_p: f64,
    pub beta_q: f64,
    pub profile_residual: f64,
    /// Soliton `W` of this partition from the closed forms.
    pub w_table: f64,
    pub w_gap: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceReport {
    pub verdict: Verdict,
    pub stability: String,
    pub curvature: CurvatureStats,
    pub clusters: Clusters,
    /// Absolute clustering distance: `cluster_tol` times the initial minimum
    /// pairwise distance.
    pub cluster_distance: f64,
    pub initial_distances: Vec<f64>,
    pub final_distances: Vec<f64>,
    pub soliton_residual: f64,
    pub w_norm: f64,
    pub candidates: Vec<PartitionMatch>,
    /// Whether the observed partition is the μ-table argmax (unstable only).
    /// The argmax is the predicted limit only under the entropy threshold.
    pub matches_mu_argmax: Option<bool>,
    pub caveats: Vec<String>,
}

fn same_split(groups: &[Vec<usize>], p: &[usize], q: &[usize]) -> bool {
    let mut p = p.to_vec();
    let mut q = q.to_vec();
    p.sort_unstable();
    q.sort_unstable();
    match groups.len() {
        1 => q.is_empty() && groups[0] == p,
        2 => (groups[0] == p && groups[1] == q) || (groups[0] == q && groups[1] == p),
        _ => false,
    }
}

/// Classifies the terminal state of a run.
///
/// (a) curvature flat at `½χ` off the cones: constant curvature for stable
/// divisors with every point separate, a football for semi-stable ones whose
/// points form two clusters split off the heaviest point (checked against the
/// football profile); (b) soliton residual at its floor with a bipartition:
/// the μ-table partition matching the clusters, accepted when both the
/// curvature–area profile and the normalized `W` match; otherwise undecided.
pub fn detect_convergence(
    trace: &FlowTrace,
    s: &Samples,
    divisor: &Divisor,
    tol: &DiagnosticSection,
    delta: f64,
) -> Result<ConvergenceReport> {
    let first = trace.records.first().ok_or_else(|| Error::Diagnostics("empty trace".into()))?;
    let last = trace.last().expect("non-empty");
    let stats = curvature_stats(s, delta)?;
    let k = divisor.k();
    let d0 = first.distances.iter().cloned().fold(f64::INFINITY, f64::min);
    let cluster_distance = if d0.is_finite() { tol.cluster_tol * d0 } else { 0.0 };
    let clusters = marked_point_clusters(s, cluster_distance);
    let stability = if k == 0 { None } else { Some(classify_stability(divisor)?) };
    let mut caveats = vec![];
    if let Some(f) = &trace.failure {
        caveats.push(format!("run ended on a numerical failure: {f}"));
    }
    let mut candidates = vec![];
    let mut matches_mu_argmax = None;
    let heaviest = k.saturating_sub(1);
    let undecided = |r: String| Verdict::Undecided { reason: r };

    let verdict = if stats.sup_dev_half_chi < tol.flat_tol {
        match stability {
            None | Some(StabilityClass::Stable) if clusters.groups.len() == k => Verdict::ConstantCurvature,
            Some(StabilityClass::SemiStable) if clusters.groups.len() == 2 => {
                let (heavy, light) = if clusters.groups[0].contains(&heaviest) {
                    (clusters.groups[0].clone(), clusters.groups[1].clone())
                } else {
                    (clusters.groups[1].clone(), clusters.groups[0].clone())
                };
                let prof = football(divisor.beta_max(), 400)?;
                let res = compare_to_profile(s, &heavy, &prof)?;
                candidates.push(PartitionMatch {
                    side_p: heavy.clone(),
                    side_q: light.clone(),
                    beta_p: divisor.beta_max(),
                    beta_q: divisor.beta_max(),
                    profile_residual: res,
                    w_table: 1.0,
                    w_gap: (last.w_norm - 1.0).abs(),
                });
                if heavy != [heaviest] {
                    undecided(format!("flat, but the heaviest point shares a cluster: {heavy:?}"))
                } else if res > tol.profile_tol {
                    undecided(format!("flat, but football profile residual {res:.3e} > {}", tol.profile_tol))
                } else {
                    Verdict::Football { heavy, light }
                }
            }
            _ => undecided(format!(
                "curvature flat but {} clusters for a {} divisor",
                clusters.groups.len(),
                stability.map_or("empty".to_string(), |c| c.to_string())
            )),
        }
    } else if last.soliton_residual > tol.residual_tol {
        undecided(format!(
            "curvature not flat (sup|R − ½χ| = {:.3e}) and soliton residual {:.3e} above {}",
            stats.sup_dev_half_chi, last.soliton_residual, tol.residual_tol
        ))
    } else if clusters.groups.len() > 2 {
        undecided(format!("soliton residual at floor but {} clusters", clusters.groups.len()))
    } else {
        let table = mu_table(divisor)?;
        for (rank, e) in table.entries.iter().enumerate() {
            let p = &e.partition;
            if !same_split(&clusters.groups, &p.side_p, &p.side_q) {
                continue;
            }
            let prof = soliton_profile(p.beta_p, p.beta_q, 400)?;
            candidates.push(PartitionMatch {
                side_p: p.side_p.clone(),
                side_q: p.side_q.clone(),
                beta_p: p.beta_p,
                beta_q: p.beta_q,
                profile_residual: compare_to_profile(s, &p.side_p, &prof)?,
                w_table: e.spec.w,
                w_gap: (last.w_norm - e.spec.w).abs(),
            });
            matches_mu_argmax = Some(rank == 0);
        }
        candidates.sort_by(|a, b| a.profile_residual.total_cmp(&b.profile_residual));
        match candidates.first() {
            None => undecided(format!("no valid partition matches the clusters {:?}", clusters.groups)),
            Some(c) if c.profile_residual > tol.profile_tol => {
                undecided(format!("best profile residual {:.3e} > {}", c.profile_residual, tol.profile_tol))
            }
            Some(c) if c.w_gap > tol.w_tol => undecided(format!(
                "normalized W = {:.4} misses the table value {:.4} by {:.3e} > {}",
                last.w_norm, c.w_table, c.w_gap, tol.w_tol
            )),
            Some(c) => Verdict::Soliton {
                side_p: c.side_p.clone(),
                side_q: c.side_q.clone(),
                beta_p: c.beta_p,
                beta_q: c.beta_q,
            },
        }
    };
    Ok(ConvergenceReport {
        verdict,
        stability: stability.map_or("empty".to_string(), |c| c.to_string()),
        curvature: stats,
        clusters,
        cluster_distance,
        initial_distances: first.distances.clone(),
        final_distances: last.distances.clone(),
        soliton_residual: last.soliton_residual,
        w_norm: last.w_norm,
        candidates,
        matches_mu_argmax,
        caveats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::axisym::{axisymmetric_config, moment_record};
    use crate::flow::FlowTrace;
    use crate::geometry::{background_metric, build_grid};
    use std::sync::Arc;

    /// Round sphere with one weightless marked point at distance 0 from every node.
    fn round(n: usize) -> Samples {
        let g = Arc::new(build_grid(n, 2 * n, &Divisor::empty()).unwrap());
        let bg = Arc::new(background_metric(g, &Divisor::empty(), 0.1).unwrap());
        let mut s = Samples::from_state(&MetricState::initial(bg));
        s.dist = vec![vec![0.0; s.r.len()]];
        s.betas = vec![0.0];
        s.pair = vec![vec![0.0]];
        s
    }

    #[test]
    fn model_ball_small_radius_is_flat_cone() {
        let r = 1e-3;
        assert!((model_ball_area(0.4, 1.0, r) / (0.6 * PI * r * r) - 1.0).abs() < 1e-5);
        assert!((model_ball_area(0.0, -1.0, r) / (PI * r * r) - 1.0).abs() < 1e-5);
    }

    #[test]
    fn round_sphere_volume_ratio_near_one() {
        let g = Arc::new(build_grid(64, 128, &Divisor::empty()).unwrap());
        let bg = Arc::new(background_metric(g, &Divisor::empty(), 0.1).unwrap());
        let st = MetricState::initial(bg);
        let df = DistanceField::new(&st);
        let mut s = round(16);
        s.r = st.regular_curvature();
        s.mass = st.masses();
        s.dist = vec![df.from_point(&[0.3, 0.4, (1.0f64 - 0.25).sqrt()])];
        let v = volume_ratio(&s, 0, 0.3);
        // lattice distances run long by up to ~8%, so balls come out small
        assert!(v > 0.8 && v < 1.05, "{v}");
    }

    #[test]
    fn exclusion_covering_sphere_is_error() {
        let s = round(16);
        assert!(curvature_stats(&s, 10.0).is_err());
    }

    #[test]
    fn clusters_by_single_linkage() {
        let mut s = round(16);
        s.betas = vec![0.1, 0.2, 0.3, 0.4];
        let d = [[0.0, 0.05, 1.0, 0.9], [0.05, 0.0, 0.08, 0.95], [1.0, 0.08, 0.0, 1.2], [0.9, 0.95, 1.2, 0.0]];
        s.pair = d.iter().map(|r| r.to_vec()).collect();
        let c = marked_point_clusters(&s, 0.1);
        assert_eq!(c.groups, vec![vec![0, 1, 2], vec![3]]);
        assert!((c.inter[0][1] - 0.9).abs() < 1e-15);
        assert_eq!(marked_point_clusters(&s, 0.01).groups.len(), 4);
        assert_eq!(marked_point_clusters(&s, 5.0).groups.len(), 1);
    }

    #[test]
    fn ratio_drops_with_cone_mass() {
        // cone caps of growing weight on a football-like moment state
        let mut last = f64::INFINITY;
        for beta in [0.1, 0.3, 0.5, 0.7] {
            let p = football(beta, 200).unwrap();
            let m = MomentState::from_profile(&p, 2000);
            let s = Samples::from_moment(&m, &[1, 0]);
            let v = volume_ratio(&s, 0, 0.2);
            let exact = model_ball_area(beta, 1.0 - beta, 0.2) / model_ball_area(0.0, 1.0 - beta, 0.2);
            assert!((v - exact).abs() < 1e-2, "{beta}: {v} vs {exact}");
            assert!(v < last);
            last = v;
        }
    }

    fn moment_report(bp: f64, bq: f64, m: &MomentState) -> ConvergenceReport {
        let cfg = axisymmetric_config(bp, bq);
        let (div, _, _, ends) = crate::flow::axisym::polar_divisor(&cfg).unwrap();
        let mut trace = FlowTrace::default();
        trace.records.push(moment_record(&cfg, m, 0, 0.0, &ends));
        let s = Samples::from_moment(m, &ends);
        detect_convergence(&trace, &s, &div, &cfg.diagnostics, cfg.monitors.delta_exclusion).unwrap()
    }

    #[test]
    fn football_state_is_football() {
        let m = MomentState::from_profile(&football(0.3, 200).unwrap(), 800);
        let r = moment_report(0.3, 0.3, &m);
        assert!(matches!(r.verdict, Verdict::Football { .. }), "{:?}", r.verdict);
        assert!(r.candidates[0].profile_residual < 1e-6);
    }

    #[test]
    fn soliton_state_is_soliton_and_discriminates() {
        let p = soliton_profile(0.8, 0.3, 200).unwrap();
        let m = MomentState::from_profile(&p, 2000);
        let r = moment_report(0.8, 0.3, &m);
        assert_eq!(r.verdict, Verdict::Soliton { side_p: vec![1], side_q: vec![0], beta_p: 0.8, beta_q: 0.3 });
        assert_eq!(r.matches_mu_argmax, Some(true));
        let s = Samples::from_moment(&m, &[0, 1]);
        let own = compare_to_profile(&s, &[1], &p).unwrap();
        let other = compare_to_profile(&s, &[1], &soliton_profile(0.9, 0.2, 200).unwrap()).unwrap();
        assert!(own < 1e-4 && other > 3.0 * own, "{own} {other}");
    }

    #[test]
    fn non_limit_state_is_undecided() {
        let m = MomentState::initial(0.8, 0.3, 400);
        let r = moment_report(0.8, 0.3, &m);
        assert!(matches!(r.verdict, Verdict::Undecided { .. }), "{:?}", r.verdict);
    }
}
