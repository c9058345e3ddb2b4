use std::sync::Arc;

use super::*;
use crate::geometry::{background_metric, build_grid};
use crate::marked_sphere::Divisor;

fn round(n_lat: usize) -> MetricState {
    let g = Arc::new(build_grid(n_lat, 2 * n_lat, &Divisor::empty()).unwrap());
    MetricState::initial(Arc::new(background_metric(g, &Divisor::empty(), 1.0).unwrap()))
}

fn bumped(amp: f64) -> MetricState {
    let s = round(24);
    let u: Vec<f64> = (0..s.u.len()).map(|k| amp * s.grid().xyz(k)[0] * s.grid().xyz(k)[2]).collect();
    let mut s = MetricState::new(s.background.clone(), u, 0.0).unwrap();
    s.renormalize();
    s
}

fn three_points() -> MetricState {
    let d = Divisor::from_f64(
        &[0.5, 0.5, 0.5],
        vec![[1.0, 0.0, 0.0], [-0.5, 0.75f64.sqrt(), 0.0], [-0.5, -(0.75f64.sqrt()), 0.0]],
    )
    .unwrap();
    let g = Arc::new(build_grid(32, 64, &d).unwrap());
    MetricState::initial(Arc::new(background_metric(g, &d, 0.15).unwrap()))
}

#[test]
fn round_sphere_potential_vanishes() {
    let s = round(24);
    let rp = ricci_potential(&s).unwrap();
    assert!(rp.v.iter().all(|v| v.abs() < 1e-10));
    assert!(rp.normalization_residual < 1e-12);
}

#[test]
fn ricci_potential_solves_its_equation() {
    let s = bumped(0.4);
    let rp = ricci_potential(&s).unwrap();
    let lv = s.laplacian(&rp.v).unwrap();
    let r = s.regular_curvature();
    for k in 0..lv.len() {
        assert!((lv[k] - (r[k] - s.half_chi())).abs() < 1e-8);
    }
}

#[test]
fn f_beta_at_zero_potential() {
    // φ = 0 leaves only −(2/χ) log ∫e^h dg_bg = −(2/χ) log 2
    let s = three_points();
    let h = background_ricci_potential(&s.background);
    let f = f_beta(&s.background, &h, &vec![0.0; h.len()]);
    assert!((f + 2.0f64.ln() / s.half_chi()).abs() < 1e-12, "{f}");
}

#[test]
fn f_beta_ignores_constants() {
    let s = three_points();
    let h = background_ricci_potential(&s.background);
    let phi: Vec<f64> = (0..h.len()).map(|k| 0.3 * s.grid().xyz(k)[1]).collect();
    let shifted: Vec<f64> = phi.iter().map(|p| p + 0.7).collect();
    let a = f_beta(&s.background, &h, &phi);
    let b = f_beta(&s.background, &h, &shifted);
    assert!((a - b).abs() < 1e-12, "{a} vs {b}");
}

#[test]
fn recovered_potential_reproduces_density() {
    let s = three_points();
    let u: Vec<f64> = (0..s.u.len()).map(|k| 0.2 * s.grid().xyz(k)[2]).collect();
    let mut s = MetricState::new(s.background.clone(), u, 0.0).unwrap();
    s.renormalize();
    let p = recover_potential(&s).unwrap();
    let lp = s.grid().round_laplacian(&p.phi);
    for k in 0..lp.len() {
        let want = s.background.rho(k) * s.u[k].exp_m1();
        assert!((lp[k] - want).abs() < 1e-8);
    }
    let mean: f64 = (0..lp.len()).map(|k| s.grid().w(k) * s.background.rho(k) * p.phi[k]).sum();
    assert!(mean.abs() < 1e-12);
}

#[test]
fn f_beta_eps_checks_range() {
    let s = three_points();
    let h = background_ricci_potential(&s.background);
    let phi = vec![0.0; h.len()];
    assert!(f_beta_eps(&s.background, &h, &phi, 0.0).is_err());
    assert!(f_beta_eps(&s.background, &h, &phi, s.half_chi()).is_err());
    assert!(f_beta_eps(&s.background, &h, &phi, 0.05).is_ok());
}

#[test]
fn normalized_w_is_one_on_round_sphere() {
    let s = round(24);
    let w = normalized_w(&s, &vec![0.3; s.u.len()]);
    assert!((w.value - 1.0).abs() < 1e-12, "{}", w.value);
    assert!((w.shift + 0.3).abs() < 1e-12);
}

#[test]
fn normalized_w_matches_perelman_form() {
    let s = bumped(0.5);
    let f: Vec<f64> = (0..s.u.len()).map(|k| 0.2 * s.grid().xyz(k)[1]).collect();
    let nw = normalized_w(&s, &f);
    let chi = 2.0 * s.half_chi();
    let a = (chi / (2.0 * std::f64::consts::PI)).ln();
    let fs: Vec<f64> = f.iter().map(|x| x + nw.shift + a).collect();
    let w = w_functional(&s, &fs, 1.0 / chi).unwrap();
    assert!((nw.value - (2.0 * w + 4.0 - 2.0 * a)).abs() < 1e-10);
    assert!(w_functional(&s, &f, 0.0).is_err());
}

#[test]
fn mu_estimate_descends() {
    let s = bumped(0.6);
    let rp = ricci_potential(&s).unwrap();
    let f0: Vec<f64> = rp.v.iter().map(|v| -v).collect();
    let short = mu_estimate(&s, &f0, 3).unwrap();
    let long = mu_estimate(&s, &f0, 30).unwrap();
    assert!(short.trace.windows(2).all(|w| w[1] <= w[0]));
    assert!(long.value <= short.value);
    assert_eq!(long.tag, "upper-bound estimate");
}

#[test]
fn chow_shift_solves_its_ode() {
    let (s0, a) = (-0.3, 0.45);
    let h = 1e-5;
    for t in [0.0, 0.7, 3.0] {
        let ds = (chow_shift(s0, t + h, a) - chow_shift(s0, t - h, a)) / (2.0 * h);
        let s = chow_shift(s0, t, a);
        assert!((ds - s * (s - a)).abs() < 1e-8);
    }
    assert!((chow_shift(s0, 0.0, a) - s0).abs() < 1e-15);
    assert_eq!(chow_shift(0.0, 5.0, a), 0.0);
}

#[test]
fn entropy_of_round_sphere_is_zero() {
    let s = round(24);
    assert!(hamilton_entropy(&s, 0.0).unwrap().abs() < 1e-10);
    assert!(matches!(hamilton_entropy(&s, 2.0), Err(Error::Positivity { .. })));
}

#[test]
fn residual_scales_quadratically() {
    assert!(soliton_residual(&round(24), &vec![0.0; 24 * 48]) == 0.0);
    let s = round(32);
    let v: Vec<f64> = (0..s.u.len()).map(|k| s.grid().xyz(k)[0] * s.grid().xyz(k)[1]).collect();
    let a = soliton_residual(&s, &v);
    let b = soliton_residual(&s, &v.iter().map(|x| 2.0 * x).collect::<Vec<_>>());
    assert!(a > 0.0 && (b / a - 4.0).abs() < 1e-10);
    // first spherical harmonics are conformal: trace-free Hessian vanishes
    let z: Vec<f64> = (0..s.u.len()).map(|k| s.grid().xyz(k)[0] + s.grid().xyz(k)[2]).collect();
    assert!(soliton_residual(&s, &z) < 1e-2 * a);
}

#[test]
fn dissipation_vanishes_on_round_sphere() {
    let s = round(16);
    let rp = ricci_potential(&s).unwrap();
    assert!(f_beta_dissipation(&s, &rp).abs() < 1e-12);
    let s = bumped(0.5);
    assert!(f_beta_dissipation(&s, &ricci_potential(&s).unwrap()) < 0.0);
}
