use serde::Serialize;
use std::f64::consts::PI;
use std::sync::OnceLock;

use super::distance::LatticeGraph;

use crate::error::{Error, Result};
use crate::marked_sphere::{angle, Divisor};

/// Cell-centred latitude–longitude finite-volume grid on the sphere.
///
/// Nodes sit at cell centres `θ_i = (i + ½)Δθ`, so no node is a pole; the two
/// polar faces have zero length, which closes the stencil without special
/// cases. A grid with `n_lon = 1` is the axisymmetric (rotationally
/// invariant) reduction: every ring is a single cell and longitude drops out.
#[derive(Debug, Clone, Serialize)]
pub struct SphereGrid {
    pub n_lat: usize,
    pub n_lon: usize,
    pub dtheta: f64,
    pub dphi: f64,
    /// Colatitude of ring `i`.
    pub theta: Vec<f64>,
    /// Longitude of column `j`.
    pub phi: Vec<f64>,
    /// Quadrature weight of one cell of ring `i` (round area-2 measure).
    pub weight: Vec<f64>,
    /// Face coefficient towards ring `i − 1` (zero at the north pole).
    pub c_north: Vec<f64>,
    /// Face coefficient towards ring `i + 1` (zero at the south pole).
    pub c_south: Vec<f64>,
    /// Face coefficient between longitude neighbours (zero when `n_lon = 1`).
    pub c_east: Vec<f64>,
    /// For each marked point at build time: nearest node and angular offset.
    pub marked: Vec<MarkedCell>,
    #[serde(skip)]
    graph: OnceLock<LatticeGraph>,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct MarkedCell {
    pub node: usize,
    pub offset: f64,
}

pub const MIN_LAT: usize = 16;
pub const MIN_LON: usize = 32;

impl SphereGrid {
    fn raw(n_lat: usize, n_lon: usize) -> SphereGrid {
        let dtheta = PI / n_lat as f64;
        let dphi = 2.0 * PI / n_lon as f64;
        let theta: Vec<f64> = (0..n_lat).map(|i| (i as f64 + 0.5) * dtheta).collect();
        let phi = (0..n_lon).map(|j| (j as f64 + 0.5) * dphi).collect();
        let edge = |i: usize| (i as f64 * dtheta).cos();
        let mut weight = Vec::with_capacity(n_lat);
        let mut c_north = Vec::with_capacity(n_lat);
        let mut c_south = Vec::with_capacity(n_lat);
        let mut c_east = Vec::with_capacity(n_lat);
        for i in 0..n_lat {
            // exact cell area on the unit sphere, then scaled to total area 2
            let area = dphi * (edge(i) - edge(i + 1));
            weight.push(area / (2.0 * PI));
            let sn = if i == 0 { 0.0 } else { (i as f64 * dtheta).sin() };
            let ss = if i + 1 == n_lat { 0.0 } else { ((i + 1) as f64 * dtheta).sin() };
            c_north.push(sn * dphi / dtheta);
            c_south.push(ss * dphi / dtheta);
            c_east.push(if n_lon == 1 { 0.0 } else { dtheta / (theta[i].sin() * dphi) });
        }
        SphereGrid { n_lat, n_lon, dtheta, dphi, theta, phi, weight, c_north, c_south, c_east, marked: vec![], graph: OnceLock::new() }
    }

    /// Axisymmetric grid: `n_lat` rings, one cell each.
    pub fn axisymmetric(n_lat: usize) -> Result<SphereGrid> {
        if n_lat < MIN_LAT {
            return Err(Error::Grid(format!("resolution too small: n_lat = {n_lat} < {MIN_LAT}")));
        }
        Ok(SphereGrid::raw(n_lat, 1))
    }

    /// 8-neighbour distance graph, built on first use.
    pub fn graph(&self) -> &LatticeGraph {
        self.graph.get_or_init(|| LatticeGraph::new(self))
    }

    pub fn is_axisymmetric(&self) -> bool {
        self.n_lon == 1
    }

    pub fn len(&self) -> usize {
        self.n_lat * self.n_lon
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn ring(&self, node: usize) -> usize {
        node / self.n_lon
    }

    pub fn node(&self, i: usize, j: usize) -> usize {
        i * self.n_lon + j
    }

    pub fn w(&self, node: usize) -> f64 {
        self.weight[node / self.n_lon]
    }

    /// Unit vector of a node.
    pub fn xyz(&self, node: usize) -> [f64; 3] {
        let (i, j) = (node / self.n_lon, node % self.n_lon);
        let (st, ct) = self.theta[i].sin_cos();
        if self.n_lon == 1 {
            return [st, 0.0, ct];
        }
        let (sp, cp) = self.phi[j].sin_cos();
        [st * cp, st * sp, ct]
    }

    pub fn total_weight(&self) -> f64 {
        self.weight.iter().sum::<f64>() * self.n_lon as f64
    }

    /// Node closest to direction `p`.
    pub fn nearest_node(&self, p: &[f64; 3]) -> usize {
        let th = p[2].clamp(-1.0, 1.0).acos();
        let i0 = ((th / self.dtheta).floor() as isize).clamp(0, self.n_lat as isize - 1) as usize;
        let mut best = (f64::INFINITY, 0);
        let jc = if self.n_lon == 1 {
            0
        } else {
            let ph = p[1].atan2(p[0]).rem_euclid(2.0 * PI);
            ((ph / self.dphi).floor() as usize).min(self.n_lon - 1)
        };
        // near the poles the nearest node may sit in any column of the cap ring
        let full_ring = i0 == 0 || i0 + 1 == self.n_lat;
        for i in i0.saturating_sub(1)..=(i0 + 1).min(self.n_lat - 1) {
            let cols: Vec<usize> = if self.n_lon == 1 {
                vec![0]
            } else if full_ring {
                (0..self.n_lon).collect()
            } else {
                (0..3).map(|d| (jc + self.n_lon + d - 1) % self.n_lon).collect()
            };
            for j in cols {
                let n = self.node(i, j);
                let a = angle(p, &self.xyz(n));
                if a < best.0 {
                    best = (a, n);
                }
            }
        }
        best.1
    }

    /// Cell containing direction `p`.
    pub fn cell_of(&self, p: &[f64; 3]) -> usize {
        let th = p[2].clamp(-1.0, 1.0).acos();
        let i = ((th / self.dtheta) as usize).min(self.n_lat - 1);
        if self.n_lon == 1 {
            return i;
        }
        let ph = p[1].atan2(p[0]).rem_euclid(2.0 * PI);
        self.node(i, ((ph / self.dphi) as usize).min(self.n_lon - 1))
    }

    /// Calls `f(neighbour, coefficient)` for the 4-point stencil of `node`.
    #[inline]
    pub fn for_each_face(&self, node: usize, mut f: impl FnMut(usize, f64)) {
        let n = self.n_lon;
        let (i, j) = (node / n, node % n);
        if i > 0 {
            f(node - n, self.c_north[i]);
        }
        if i + 1 < self.n_lat {
            f(node + n, self.c_south[i]);
        }
        if n > 1 {
            let ce = self.c_east[i];
            f(i * n + (j + 1) % n, ce);
            f(i * n + (j + n - 1) % n, ce);
        }
    }

    /// `K f = Σ_faces c (f_nb − f)` — the symmetric graph part of the stencil.
    pub fn apply_stiffness(&self, f: &[f64], out: &mut [f64]) {
        let n = self.n_lon;
        for i in 0..self.n_lat {
            let (cn, cs, ce) = (self.c_north[i], self.c_south[i], self.c_east[i]);
            for j in 0..n {
                let k = i * n + j;
                let fk = f[k];
                let mut acc = 0.0;
                if i > 0 {
                    acc += cn * (f[k - n] - fk);
                }
                if i + 1 < self.n_lat {
                    acc += cs * (f[k + n] - fk);
                }
                if n > 1 {
                    let e = i * n + (j + 1) % n;
                    let wv = i * n + (j + n - 1) % n;
                    acc += ce * (f[e] + f[wv] - 2.0 * fk);
                }
                out[k] = acc;
            }
        }
    }

    /// Round-metric Laplacian in the crate's units: `(1/4πw) K f`.
    pub fn round_laplacian(&self, f: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        self.apply_stiffness(f, &mut out);
        for (k, o) in out.iter_mut().enumerate() {
            *o /= 4.0 * PI * self.w(k);
        }
        out
    }

    /// `|∇f|²` at nodes (conformally invariant as a density: multiply by the
    /// round weight, not the metric one). Each face's energy is split evenly
    /// between its two cells, so `Σ w |∇f|² = −Σ w f Δf` exactly.
    pub fn grad_sq_round(&self, f: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        for (k, o) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            self.for_each_face(k, |nb, c| acc += c * (f[nb] - f[k]).powi(2));
            *o = acc / (8.0 * PI * self.w(k));
        }
        out
    }

    /// Diagonal magnitude of the round Laplacian, `Σc / 4πw`.
    pub fn laplacian_diag(&self, node: usize) -> f64 {
        let mut acc = 0.0;
        self.for_each_face(node, |_, c| acc += c);
        acc / (4.0 * PI * self.w(node))
    }
}

/// Lat–lon grid for a divisor; checks resolution and that no cell holds two
/// marked points. Marked points never coincide with a node (nodes are cell
/// centres, never poles); the offset to the nearest node is recorded.
pub fn build_grid(n_lat: usize, n_lon: usize, divisor: &Divisor) -> Result<SphereGrid> {
    if n_lat < MIN_LAT || n_lon < MIN_LON {
        return Err(Error::Grid(format!(
            "resolution too small: {n_lat}x{n_lon} (need at least {MIN_LAT}x{MIN_LON})"
        )));
    }
    let mut g = SphereGrid::raw(n_lat, n_lon);
    attach_marked(&mut g, divisor)?;
    Ok(g)
}

/// Axisymmetric grid for a divisor whose points sit at the poles.
pub fn build_axisymmetric_grid(n_lat: usize, divisor: &Divisor) -> Result<SphereGrid> {
    let mut g = SphereGrid::axisymmetric(n_lat)?;
    attach_marked(&mut g, divisor)?;
    Ok(g)
}

fn attach_marked(g: &mut SphereGrid, divisor: &Divisor) -> Result<()> {
    let mut cells = Vec::new();
    for (idx, p) in divisor.positions().iter().enumerate() {
        let cell = g.cell_of(p);
        if let Some(other) = cells.iter().position(|&c| c == cell) {
            return Err(Error::Grid(format!("marked points {other} and {idx} fall in one cell")));
        }
        cells.push(cell);
        let node = g.nearest_node(p);
        g.marked.push(MarkedCell { node, offset: angle(p, &g.xyz(node)) });
    }
    Ok(())
}
