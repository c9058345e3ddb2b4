//! Geodesic distances by Dijkstra on the 8-neighbour lattice graph.
//!
//! Edge lengths are round (area-2) arc lengths scaled by the mean of the two
//! endpoint length factors `e^{(log ρ_bg + u)/2}`. The graph metric
//! over-estimates true distances by at most the lattice anisotropy (~8%),
//! exactly satisfies the triangle inequality, and is monotone in `u`.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::grid::SphereGrid;
use super::state::{round_radius, MetricState};
use crate::marked_sphere::angle;

#[derive(Debug, Clone)]
pub struct LatticeGraph {
    offsets: Vec<usize>,
    nbrs: Vec<usize>,
    /// Round arc length of each edge.
    len0: Vec<f64>,
}

impl LatticeGraph {
    pub fn new(g: &SphereGrid) -> LatticeGraph {
        let (nl, n) = (g.n_lat, g.n_lon);
        let r0 = round_radius();
        let mut offsets = vec![0];
        let mut nbrs = Vec::new();
        let mut len0 = Vec::new();
        for k in 0..g.len() {
            let (i, j) = (k / n, k % n);
            let mut cand: Vec<usize> = Vec::with_capacity(9);
            for di in -1i64..=1 {
                let ii = i as i64 + di;
                if ii < 0 || ii >= nl as i64 {
                    continue;
                }
                if n == 1 {
                    if di != 0 {
                        cand.push(ii as usize);
                    }
                    continue;
                }
                for dj in -1i64..=1 {
                    if di == 0 && dj == 0 {
                        continue;
                    }
                    let jj = (j as i64 + dj).rem_euclid(n as i64) as usize;
                    cand.push(ii as usize * n + jj);
                }
            }
            if n > 1 && (i == 0 || i + 1 == nl) {
                cand.push(i * n + (j + n / 2) % n);
            }
            cand.sort_unstable();
            cand.dedup();
            cand.retain(|&c| c != k);
            let xk = g.xyz(k);
            for c in cand {
                nbrs.push(c);
                len0.push(r0 * angle(&xk, &g.xyz(c)));
            }
            offsets.push(nbrs.len());
        }
        LatticeGraph { offsets, nbrs, len0 }
    }
}

#[derive(PartialEq)]
struct Item(f64, usize);

impl Eq for Item {}

impl PartialOrd for Item {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Item {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then_with(|| other.1.cmp(&self.1))
    }
}

/// Metric distances from a set of seeded nodes.
pub fn dijkstra(graph: &LatticeGraph, factor: &[f64], seeds: &[(usize, f64)]) -> Vec<f64> {
    let mut dist = vec![f64::INFINITY; factor.len()];
    let mut heap = BinaryHeap::new();
    for &(s, d0) in seeds {
        if d0 < dist[s] {
            dist[s] = d0;
            heap.push(Item(d0, s));
        }
    }
    while let Some(Item(d, k)) = heap.pop() {
        if d > dist[k] {
            continue;
        }
        for e in graph.offsets[k]..graph.offsets[k + 1] {
            let nb = graph.nbrs[e];
            let nd = d + graph.len0[e] * 0.5 * (factor[k] + factor[nb]);
            if nd < dist[nb] {
                dist[nb] = nd;
                heap.push(Item(nd, nb));
            }
        }
    }
    dist
}

/// Distance evaluator bound to one state.
pub struct DistanceField<'a> {
    pub state: &'a MetricState,
    graph: &'a LatticeGraph,
    factor: Vec<f64>,
}

impl<'a> DistanceField<'a> {
    pub fn new(state: &'a MetricState) -> DistanceField<'a> {
        let factor = (0..state.u.len()).map(|k| state.length_factor(k)).collect();
        DistanceField { state, graph: state.grid().graph(), factor }
    }

    fn link(&self, p: &[f64; 3]) -> (usize, f64) {
        let g = self.state.grid();
        let n = g.nearest_node(p);
        (n, round_radius() * angle(p, &g.xyz(n)) * self.factor[n])
    }

    /// Distances from direction `p` to every node.
    pub fn from_point(&self, p: &[f64; 3]) -> Vec<f64> {
        dijkstra(self.graph, &self.factor, &[self.link(p)])
    }

    /// Distances from the nearest of several points to every node.
    pub fn from_points(&self, ps: &[[f64; 3]]) -> Vec<f64> {
        let seeds: Vec<_> = ps.iter().map(|p| self.link(p)).collect();
        dijkstra(self.graph, &self.factor, &seeds)
    }

    pub fn between(&self, a: &[f64; 3], b: &[f64; 3]) -> f64 {
        let (na, la) = self.link(a);
        let (nb, lb) = self.link(b);
        if na == nb {
            return round_radius() * angle(a, b) * self.factor[na];
        }
        let d = dijkstra(self.graph, &self.factor, &[(na, la)]);
        d[nb] + lb
    }

    /// Distance from `p` to a point, given `from_point(p)`.
    pub fn to_point(&self, from: &[f64], b: &[f64; 3]) -> f64 {
        let (nb, lb) = self.link(b);
        from[nb] + lb
    }

    /// Area of the closed metric ball of radius `r` about `p`.
    pub fn ball_volume(&self, p: &[f64; 3], r: f64) -> f64 {
        if r <= 0.0 {
            return 0.0;
        }
        let d = self.from_point(p);
        ball_volume_from(self.state, &d, r)
    }

    /// Double-sweep diameter estimate (a lower bound for the graph diameter).
    pub fn diameter(&self) -> f64 {
        let d0 = dijkstra(self.graph, &self.factor, &[(0, 0.0)]);
        let far = argmax(&d0);
        let d1 = dijkstra(self.graph, &self.factor, &[(far, 0.0)]);
        let far2 = argmax(&d1);
        let d2 = dijkstra(self.graph, &self.factor, &[(far2, 0.0)]);
        d1[far2].max(d2[argmax(&d2)])
    }
}

fn argmax(d: &[f64]) -> usize {
    let mut best = 0;
    for (k, v) in d.iter().enumerate() {
        if *v > d[best] {
            best = k;
        }
    }
    best
}

pub fn ball_volume_from(state: &MetricState, dist: &[f64], r: f64) -> f64 {
    if r <= 0.0 {
        return 0.0;
    }
    state.masses().iter().zip(dist).filter(|(_, d)| **d <= r).map(|(m, _)| m).sum()
}

pub fn geodesic_distance(state: &MetricState, a: &[f64; 3], b: &[f64; 3]) -> f64 {
    DistanceField::new(state).between(a, b)
}

pub fn ball_volume(state: &MetricState, center: &[f64; 3], r: f64) -> f64 {
    DistanceField::new(state).ball_volume(center, r)
}
