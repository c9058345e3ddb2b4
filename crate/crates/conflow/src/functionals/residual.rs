use crate::geometry::MetricState;

/// `∫|∇²v − ½(Δv)g|² dg`, the trace-free Hessian of `v`.
///
/// For `g = e^{2σ} g₀` the trace-free Hessian is the trace-free part of
/// `∇₀²v − dσ⊗dv − dv⊗dσ`, whose squared norm scales by `e^{−4σ}`. Derivatives
/// are centred differences in the orthonormal `(θ, φ)` frame of the unit
/// sphere; across a pole the neighbouring ring is read half a turn away. The
/// factor ¼ converts unit-sphere Hessians to the crate's units.
pub fn soliton_residual(state: &MetricState, v: &[f64]) -> f64 {
    let g = state.grid();
    let (nl, n) = (g.n_lat, g.n_lon);
    let ld = state.log_density();
    let (dt, dp) = (g.dtheta, g.dphi);
    // value of field `f` at ring `i` (may be −1 or nl), column `j`
    let at = |f: &[f64], i: isize, j: isize| -> f64 {
        let (ii, jj) = if i < 0 {
            (-1 - i, j + (n / 2) as isize)
        } else if i >= nl as isize {
            (2 * nl as isize - 1 - i, j + (n / 2) as isize)
        } else {
            (i, j)
        };
        f[ii as usize * n + jj.rem_euclid(n as isize) as usize]
    };
    let mut total = 0.0;
    for i in 0..nl as isize {
        let th = g.theta[i as usize];
        let (st, ct) = th.sin_cos();
        let cot = ct / st;
        for j in 0..n as isize {
            let k = i as usize * n + j as usize;
            let vc = v[k];
            let v_t = (at(v, i + 1, j) - at(v, i - 1, j)) / (2.0 * dt);
            let v_tt = (at(v, i + 1, j) - 2.0 * vc + at(v, i - 1, j)) / (dt * dt);
            let s_t = 0.5 * (at(&ld, i + 1, j) - at(&ld, i - 1, j)) / (2.0 * dt);
            let (v_p, v_pp, v_tp, s_p) = if n == 1 {
                (0.0, 0.0, 0.0, 0.0)
            } else {
                let v_p = (at(v, i, j + 1) - at(v, i, j - 1)) / (2.0 * dp);
                let v_pp = (at(v, i, j + 1) - 2.0 * vc + at(v, i, j - 1)) / (dp * dp);
                let v_tp = (at(v, i + 1, j + 1) - at(v, i + 1, j - 1) - at(v, i - 1, j + 1) + at(v, i - 1, j - 1))
                    / (4.0 * dt * dp);
                let s_p = 0.5 * (at(&ld, i, j + 1) - at(&ld, i, j - 1)) / (2.0 * dp);
                (v_p, v_pp, v_tp, s_p)
            };
            // across the pole the θ-direction flips, which the reflected reads
            // already account for in the centred θ-differences
            let h11 = v_tt;
            let h22 = v_pp / (st * st) + cot * v_t;
            let h12 = (v_tp - cot * v_p) / st;
            let (a1, a2) = (s_t, s_p / st);
            let (b1, b2) = (v_t, v_p / st);
            let t11 = h11 - 2.0 * a1 * b1;
            let t22 = h22 - 2.0 * a2 * b2;
            let t12 = h12 - (a1 * b2 + a2 * b1);
            let tf2 = 0.5 * (t11 - t22).powi(2) + 2.0 * t12 * t12;
            total += g.w(k) * (-ld[k]).exp() * 0.25 * tf2;
        }
    }
    total
}
