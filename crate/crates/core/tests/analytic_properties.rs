//! Invariants of the main-term engine.

use kfree_core::analytic::{
    delta_s, delta_s_defining, delta_star, main_term, p_s_grid, p_s_identity_residual,
    principal_char_sum_check, residue_limit_r1, residue_poly, rho2g_zero_check, w_collapse,
    ContourSpec,
};
use kfree_core::arith_core::{factorize, gcd, primes_up_to};
use kfree_core::sieve::local_residues;
use kfree_core::TupleConfig;
use num_complex::Complex64;
use proptest::prelude::*;

fn configs() -> Vec<TupleConfig> {
    vec![
        TupleConfig::new(2, &[0]).unwrap(),
        TupleConfig::new(2, &[0, 1]).unwrap(),
        TupleConfig::new(3, &[0, 1, 2]).unwrap(),
    ]
}

#[test]
fn local_delta_star_sums() {
    for cfg in configs() {
        for p in primes_up_to(50) {
            let r = local_residues(&cfg, p).big_r as i64;
            let s: i64 = (1..=cfg.k()).map(|t| delta_star(&cfg, p, t)).sum();
            assert_eq!(s, -r * (r - 1), "{cfg}, p = {p}");
        }
    }
}

#[test]
fn delta_s_closed_form_matches_definition() {
    let s = Complex64::new(0.3, -1.7);
    for cfg in configs() {
        for q in 1..=64u64 {
            let a = delta_s(&cfg, q, s);
            let b = delta_s_defining(&cfg, q, s);
            assert!(
                (a - b).norm() < 1e-9 * (1.0 + a.norm()),
                "{cfg}, q = {q}: {a} vs {b}"
            );
        }
    }
}

#[test]
fn p_s_identity_on_grid() {
    let grid = p_s_grid();
    for q in 2..=243u64 {
        if factorize(q).factors.len() == 1 {
            assert!(p_s_identity_residual(q, &grid).unwrap() <= 1e-9, "q = {q}");
        }
    }
}

#[test]
fn rho_identity_gap_shrinks() {
    for cfg in configs() {
        let coarse = rho2g_zero_check(&cfg, 1_000).unwrap();
        let fine = rho2g_zero_check(&cfg, 100_000).unwrap();
        assert!(
            coarse.passes() && fine.passes(),
            "{cfg}: {coarse:?} {fine:?}"
        );
        assert!(fine.tail_bound < coarse.tail_bound);
    }
}

#[test]
fn w_collapses_exactly() {
    for cfg in configs() {
        let (lhs, rhs) = w_collapse(&cfg, 100);
        assert_eq!(lhs, rhs, "{cfg}");
    }
}

#[test]
fn residue_polynomial_is_stable_and_low_degree() {
    for cfg in configs() {
        let p = residue_poly(&cfg, ContourSpec::default_for(cfg.k()), 20_000).unwrap();
        assert!(p.certified, "{cfg}: movement {}", p.movement);
        assert_eq!(p.coeffs.len(), cfg.r());
        for extra in &p.laurent.negative[cfg.r()..] {
            assert!(extra.norm() < 1e-8, "{cfg}: {extra}");
        }
        assert!(p.max_imag < 1e-10);
    }
    let sq = TupleConfig::new(2, &[0]).unwrap();
    let p = residue_poly(&sq, ContourSpec::default_for(2), 20_000).unwrap();
    let lim = residue_limit_r1(&sq, 20_000).unwrap();
    assert!((lim - p.laurent.negative[0]).norm() < 1e-5 * lim.norm());
}

#[test]
fn main_term_scaling() {
    let cfg = TupleConfig::new(2, &[0, 1]).unwrap();
    let p = residue_poly(&cfg, ContourSpec::default_for(2), 5_000).unwrap();
    let x: f64 = 1e6;
    assert!((main_term(x, x, &p).unwrap() - x * x * p.coeffs[0]).abs() < 1e-6 * x * x);
    let q: f64 = 1e4;
    let k2 = q.powf(1.5) * x.sqrt() * p.eval((x / q).ln());
    assert!((main_term(x, q, &p).unwrap() - k2).abs() < 1e-9 * k2.abs());
    // At fixed x, doubling Q multiplies the prefactor Q²(x/Q)^{1/k} by 2^{2−1/k}.
    let pre = |q: f64| main_term(x, q, &p).unwrap() / p.eval((x / q).ln());
    assert!((pre(2.0 * q) / pre(q) - 2f64.powf(1.5)).abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn delta_s_is_multiplicative(ci in 0usize..3, q1 in 1u64..=100, q2 in 1u64..=100, sigma in -0.5f64..1.0, t in -10.0f64..10.0) {
        prop_assume!(gcd(q1, q2) == 1);
        let cfg = &configs()[ci];
        let s = Complex64::new(sigma, t);
        let joint = delta_s(cfg, q1 * q2, s);
        let split = delta_s(cfg, q1, s) * delta_s(cfg, q2, s);
        prop_assert!((joint - split).norm() < 1e-9 * (1.0 + joint.norm()));
    }

    #[test]
    fn principal_character_sums(d in 1u64..=50, m in 1u64..=50, t in -20.0f64..20.0) {
        let chk = principal_char_sum_check(d, m, Complex64::new(0.0, t), 5000).unwrap();
        prop_assert!(chk.fitted.is_finite());
        prop_assert!(chk.residual <= 10.0 * (d * m) as f64 * (1.0 + t.abs()));
    }
}
