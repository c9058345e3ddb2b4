use conflow::marked_sphere::{classify_stability, enumerate_partitions, Divisor, StabilityClass};
use conflow::soliton::{f_of_c, mu_table, solve_c, soliton_profile, soliton_w, tau_of_c, tau_of_weights};
use proptest::prelude::*;

proptest! {
    #[test]
    fn solve_c_inverts_tau(tau in -0.99f64..0.99) {
        let c = solve_c(tau).unwrap();
        prop_assert!((tau_of_c(c) - tau).abs() < 1e-12);
    }

    #[test]
    fn tau_is_odd_and_increasing(c in 0.01f64..30.0, dc in 1e-3f64..1.0) {
        prop_assert!((tau_of_c(-c) + tau_of_c(c)).abs() < 1e-14);
        prop_assert!(tau_of_c(c + dc) > tau_of_c(c));
    }

    #[test]
    fn equal_weights_give_unit_w(b in 0.0f64..0.99) {
        prop_assert_eq!(soliton_w(b, b).unwrap(), 1.0);
    }

    #[test]
    fn w_decreases_with_asymmetry(s in 0.2f64..1.8, a1 in 0.0f64..1.0, a2 in 0.0f64..1.0) {
        // pairs with the same sum, asymmetry a·min(s, 2 − s)
        let m = s.min(2.0 - s) * 0.999;
        let (lo, hi) = if a1 < a2 { (a1, a2) } else { (a2, a1) };
        prop_assume!(hi - lo > 1e-3);
        let w = |a: f64| soliton_w(0.5 * (s + a * m), 0.5 * (s - a * m)).unwrap();
        prop_assert!(w(lo) > w(hi), "{} vs {}", w(lo), w(hi));
    }

    #[test]
    fn profile_w_matches_closed_form(bp in 0.05f64..0.95, frac in 0.0f64..1.0) {
        let bq = frac * bp;
        let p = soliton_profile(bp, bq, 128).unwrap();
        let closed = 1.0 - f_of_c(p.spec.c);
        prop_assert!((p.w_by_quadrature(20_000) - closed).abs() < 1e-8);
        prop_assert!((p.spec.w - closed).abs() < 1e-12);
        prop_assert!((tau_of_weights(bp, bq) - tau_of_c(p.spec.c)).abs() < 1e-12);
    }

    #[test]
    fn partitions_cover_all_splits(w in prop::collection::vec(0.01f64..0.99, 1..7)) {
        let d = Divisor::from_f64(&w, fib(w.len())).unwrap();
        let parts = enumerate_partitions(&d);
        prop_assert_eq!(parts.len(), 1 << (w.len() - 1));
        for p in &parts {
            prop_assert!(p.beta_p >= p.beta_q);
            prop_assert_eq!(p.side_p.len() + p.side_q.len(), w.len());
        }
    }

    #[test]
    fn unstable_argmax_isolates_heaviest(w in prop::collection::vec(0.01f64..0.5, 2..6), top in 0.0f64..1.0) {
        let rest: f64 = w.iter().sum();
        prop_assume!(rest < 0.98);
        let heavy = rest + 0.01 + top * (0.99 - rest - 0.01).max(0.0);
        prop_assume!(heavy < 0.99 && heavy > rest);
        let mut all = w.clone();
        all.push(heavy);
        let d = Divisor::from_f64(&all, fib(all.len())).unwrap();
        prop_assert_eq!(classify_stability(&d).unwrap(), StabilityClass::Unstable);
        let t = mu_table(&d).unwrap();
        prop_assert_eq!(&t.entries[0].partition.side_p, &vec![all.len() - 1]);
        if t.entries.len() >= 2 {
            prop_assert!(t.entries[0].spec.w > t.entries[1].spec.w);
        }
    }
}

fn fib(k: usize) -> Vec<[f64; 3]> {
    let g = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..k)
        .map(|i| {
            let z = 1.0 - (2.0 * i as f64 + 1.0) / k as f64;
            let r = (1.0 - z * z).sqrt();
            [r * (g * i as f64).cos(), r * (g * i as f64).sin(), z]
        })
        .collect()
}
