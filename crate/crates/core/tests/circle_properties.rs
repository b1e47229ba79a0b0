//! Invariants of the Farey dissection and the exponential sums.

use kfree_core::arith_core::rat;
use kfree_core::circle::{
    big_f_alpha, f_alpha, farey_dissect, identity_a, sample_arc_points, total_length, ExpState,
    Point,
};
use kfree_core::gauss_sums::e_real;
use kfree_core::{Budget, DensityContext, TupleConfig};
use num_complex::Complex64;
use proptest::prelude::*;

fn state(h: &[u64], x: u64, q: u64) -> ExpState {
    let cfg = TupleConfig::new(2, h).unwrap();
    let ctx = DensityContext::with_default_tol(&cfg).unwrap();
    ExpState::new(&ctx, x, q, &Budget::default()).unwrap()
}

#[test]
fn farey_sandwich_and_length() {
    for gamma in [1u64, 2, 10, 100, 500] {
        let arcs = farey_dissect(gamma);
        assert!(arcs.iter().all(|a| a.sandwich_holds()), "γ = {gamma}");
        assert_eq!(total_length(&arcs), rat(1, 1), "γ = {gamma}");
        assert!(arcs.windows(2).all(|w| w[0].right == w[1].left));
    }
}

#[test]
fn decomposition_holds_on_sampled_arcs() {
    for x in [1000u64, 10_000] {
        let gamma = 2 * (x as f64).sqrt() as u64;
        for h in [&[0u64][..], &[0, 1]] {
            let st = state(h, x, gamma);
            let tol = x as f64 * st.ctx().rho_half_width() + 1e-6;
            for (arc, beta) in sample_arc_points(&farey_dissect(gamma), 20) {
                let id = identity_a(&st, &arc, beta).unwrap();
                assert!(
                    id.residual <= tol,
                    "x = {x}, {}/{} β = {beta}: {id:?}",
                    arc.a,
                    arc.q
                );
            }
        }
    }
}

fn naive_f(x: u64, q_cap: u64, alpha: f64) -> Complex64 {
    let mut s = Complex64::new(0.0, 0.0);
    for u in 1..=q_cap {
        for v in 1..=x / u {
            s += e_real(alpha * (u * v) as f64);
        }
    }
    s
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn f_is_periodic_and_conjugate_symmetric(alpha in -2.0f64..2.0) {
        let st = state(&[0, 1], 2000, 40);
        let f = f_alpha(&st, &Point::real(alpha));
        let shifted = f_alpha(&st, &Point::real(alpha + 1.0));
        prop_assert!((f - shifted).norm() < 1e-8);
        let neg = f_alpha(&st, &Point::real(-alpha));
        prop_assert!((neg - f.conj()).norm() < 1e-8);
        let big = big_f_alpha(&st, &Point::real(alpha));
        prop_assert!((big - big_f_alpha(&st, &Point::real(alpha + 1.0))).norm() < 1e-8);
        prop_assert!((big_f_alpha(&st, &Point::real(-alpha)) - big.conj()).norm() < 1e-8);
    }

    #[test]
    fn divisor_table_matches_double_sum(x in 1u64..=2000, q in 1u64..=60, alpha in 0.0f64..1.0) {
        let st = state(&[0], x, q);
        let table = big_f_alpha(&st, &Point::real(alpha));
        prop_assert!((table - naive_f(x, q.min(x), alpha)).norm() < 1e-8);
    }

    #[test]
    fn rational_points_match_real_evaluation(a in 0i64..50, q in 1u64..50) {
        let st = state(&[0], 1500, 30);
        let exact = f_alpha(&st, &Point::rational(a, q));
        let approx = f_alpha(&st, &Point::real(a as f64 / q as f64));
        prop_assert!((exact - approx).norm() < 1e-8);
    }
}
