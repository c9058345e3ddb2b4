use std::sync::Arc;

use conflow::geometry::{background_metric, ball_volume, build_grid, geodesic_distance, MetricState};
use conflow::marked_sphere::Divisor;
use proptest::prelude::*;

fn state(coef: &[f64]) -> MetricState {
    let d = Divisor::from_f64(&[0.3, 0.5], vec![[1.0, 0.0, 0.0], [0.0, 0.6, 0.8]]).unwrap();
    let g = Arc::new(build_grid(24, 48, &d).unwrap());
    let bg = Arc::new(background_metric(g.clone(), &d, 0.15).unwrap());
    let u = (0..g.len()).map(|k| field(coef, &g.xyz(k))).collect();
    MetricState::new(bg, u, 0.0).unwrap()
}

fn field(c: &[f64], x: &[f64; 3]) -> f64 {
    c[0] * x[0] + c[1] * x[1] * x[2] + c[2] * (3.0 * x[2] * x[2] - 1.0) + c[3] * (2.0 * x[0] + x[1]).sin()
}

fn coefs() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-0.5f64..0.5, 4)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn laplacian_is_self_adjoint_with_constant_kernel(cu in coefs(), cf in coefs(), cg in coefs()) {
        let m = state(&cu);
        let g = m.grid();
        let f: Vec<f64> = (0..g.len()).map(|k| field(&cf, &g.xyz(k))).collect();
        let h: Vec<f64> = (0..g.len()).map(|k| field(&cg, &g.xyz(k))).collect();
        let lf = m.laplacian(&f).unwrap();
        let lh = m.laplacian(&h).unwrap();
        let a = m.integrate(&f.iter().zip(&lh).map(|(a, b)| a * b).collect::<Vec<_>>());
        let b = m.integrate(&h.iter().zip(&lf).map(|(a, b)| a * b).collect::<Vec<_>>());
        prop_assert!((a - b).abs() < 1e-10 * (1.0 + a.abs()));
        let one = m.laplacian(&vec![1.0; g.len()]).unwrap();
        prop_assert!(one.iter().all(|v| v.abs() < 1e-10));
        // integration by parts: −∫fΔf = ∫|∇f|²
        let lhs = -m.integrate(&f.iter().zip(&lf).map(|(a, b)| a * b).collect::<Vec<_>>());
        prop_assert!((lhs - m.dirichlet(&f)).abs() < 1e-10 * (1.0 + lhs.abs()));
    }

    #[test]
    fn distance_is_a_metric_and_monotone(cu in coefs(), bump in 0.0f64..1.0, s in prop::collection::vec(-1.0f64..1.0, 9)) {
        let m = state(&cu);
        let p = |i: usize| {
            let v = [s[3 * i], s[3 * i + 1], s[3 * i + 2] + 1e-3];
            let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
            [v[0] / n, v[1] / n, v[2] / n]
        };
        let (a, b, c) = (p(0), p(1), p(2));
        let dab = geodesic_distance(&m, &a, &b);
        prop_assert!((dab - geodesic_distance(&m, &b, &a)).abs() < 1e-12 * (1.0 + dab));
        prop_assert!(dab >= 0.0);
        let dac = geodesic_distance(&m, &a, &c);
        let dcb = geodesic_distance(&m, &c, &b);
        prop_assert!(dab <= dac + dcb + 1e-12);
        let mut bigger = m.clone();
        bigger.u.iter_mut().for_each(|u| *u += bump);
        prop_assert!(geodesic_distance(&bigger, &a, &b) >= dab - 1e-12);
    }

    #[test]
    fn ball_volume_grows_with_radius(cu in coefs(), r1 in 0.05f64..0.6, dr in 0.0f64..0.3) {
        let m = state(&cu);
        let c = [0.0, 0.0, 1.0];
        let v1 = ball_volume(&m, &c, r1);
        let v2 = ball_volume(&m, &c, r1 + dr);
        prop_assert!(v2 >= v1);
        prop_assert!(v2 <= m.area() + 1e-12);
    }
}

#[test]
fn round_sphere_calibration() {
    let g = Arc::new(build_grid(64, 128, &Divisor::empty()).unwrap());
    let bg = Arc::new(background_metric(g, &Divisor::empty(), 0.05).unwrap());
    let m = MetricState::initial(bg);
    assert!((m.area() - 2.0).abs() < 1e-3);
    assert!(m.regular_curvature().iter().all(|r| (r - 1.0).abs() < 1e-3));
}
