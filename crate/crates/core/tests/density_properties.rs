//! Invariants of the local densities g(q,a) and the variance routes.

use kfree_core::arith_core::{rat, rat_to_f64};
use kfree_core::density::{g_exact, g_local, g_row_exact, g_sq_sum_exact, variance_spectral};
use kfree_core::sieve::{count_in_ap, enumerate_tuples};
use kfree_core::{Budget, DensityContext, Rat, TupleConfig};
use proptest::prelude::*;

fn configs() -> Vec<TupleConfig> {
    vec![
        TupleConfig::new(2, &[0]).unwrap(),
        TupleConfig::new(2, &[0, 1]).unwrap(),
        TupleConfig::new(2, &[0, 2, 6]).unwrap(),
        TupleConfig::new(3, &[0, 1, 2]).unwrap(),
    ]
}

#[test]
fn mass_is_one_and_entries_nonnegative() {
    let zero = rat(0, 1);
    for cfg in configs() {
        for q in 1..=500u64 {
            let row = g_row_exact(&cfg, q);
            assert!(row.iter().all(|g| *g >= zero));
            assert_eq!(row.iter().sum::<Rat>(), rat(1, 1), "{cfg}, q = {q}");
        }
    }
}

#[test]
fn refinement_is_consistent() {
    for cfg in configs() {
        for m in 1..=120u64 {
            let fine = g_row_exact(&cfg, m);
            for q in (1..=m).filter(|q| m % q == 0) {
                let coarse = g_row_exact(&cfg, q);
                for a in 0..q {
                    let s: Rat = (0..m)
                        .filter(|b| b % q == a)
                        .map(|b| fine[b as usize].clone())
                        .sum();
                    assert_eq!(s, coarse[a as usize], "{cfg}, q = {q}, m = {m}, a = {a}");
                }
            }
        }
    }
}

#[test]
fn empirical_densities_converge() {
    let x = 1_000_000u64;
    for cfg in configs() {
        let ctx = DensityContext::with_default_tol(&cfg).unwrap();
        let set = enumerate_tuples(&cfg, x).unwrap();
        let bound = 10.0 * (x as f64).powf(rat_to_f64(&cfg.delta()) - 1.0);
        for q in 1..=20u64 {
            for a in 1..=q {
                let eta = rat_to_f64(&g_local(&cfg, q, a)) * ctx.rho();
                let emp = count_in_ap(&set, q, a) as f64 / x as f64;
                assert!((emp - eta).abs() < bound, "{cfg}, q = {q}, a = {a}");
            }
        }
    }
}

#[test]
fn error_variance_probe() {
    let cfg = TupleConfig::new(2, &[0]).unwrap();
    let ctx = DensityContext::with_default_tol(&cfg).unwrap();
    let theta = rat_to_f64(&cfg.theta());
    let delta = rat_to_f64(&cfg.delta());
    let mut fitted = Vec::new();
    for t in [10_000u64, 100_000, 1_000_000] {
        let set = enumerate_tuples(&cfg, t).unwrap();
        let tf = t as f64;
        for gamma in [tf.sqrt(), tf.powf(2.0 / 3.0)] {
            let g = gamma as u64;
            let v = variance_spectral(&ctx, &set, g, &Budget::default())
                .unwrap()
                .total;
            let shape = gamma.powf(2.0 - 2.0 * theta) * tf.powf(2.0 * theta)
                + tf.powf(2.0 * delta)
                + gamma * tf.powf(delta);
            fitted.push(v / shape);
        }
    }
    assert!(
        fitted.iter().all(|c| c.is_finite() && *c > 0.0),
        "{fitted:?}"
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn euler_and_gauss_routes_agree(ci in 0usize..4, q in 1u64..=150, a in 0u64..150) {
        let cfg = &configs()[ci];
        let a = a % q + 1;
        prop_assert_eq!(g_local(cfg, q, a), g_exact(cfg, q, a));
    }

    #[test]
    fn square_sum_identity(ci in 0usize..4, q in 1u64..=400) {
        let cfg = &configs()[ci];
        let lhs: Rat = g_row_exact(cfg, q).iter().map(|g| g * g).sum();
        prop_assert_eq!(lhs, g_sq_sum_exact(cfg, q));
    }
}
