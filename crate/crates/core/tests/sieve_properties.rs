//! Invariants of the k-free sieve, tuple enumeration and brute-force variance.

use kfree_core::arith_core::{mobius, rat_to_f64};
use kfree_core::density::{eta_row, variance_exact};
use kfree_core::sieve::{
    count_congruence_solutions, count_in_ap, enumerate_tuples, integer_root, sieve_kfree,
    variance_brute,
};
use kfree_core::{Budget, DensityContext, KfreeBitmap, TupleConfig};
use proptest::prelude::*;

fn configs() -> Vec<TupleConfig> {
    vec![
        TupleConfig::new(2, &[0]).unwrap(),
        TupleConfig::new(2, &[0, 1]).unwrap(),
        TupleConfig::new(2, &[0, 2, 6]).unwrap(),
        TupleConfig::new(3, &[0, 1, 2]).unwrap(),
    ]
}

/// Σ over squarefree `d_1, …, d_r` (each `d_i^k ≤ x + h_r`) of
/// `μ(d_1)⋯μ(d_r)·#{n ≤ x : d_i^k | n + h_i}`.
fn mobius_sieve_count(cfg: &TupleConfig, x: u64) -> i64 {
    let bound = integer_root(x + cfg.h_max(), cfg.k());
    let sf: Vec<u64> = (1..=bound).filter(|&d| mobius(d) != 0).collect();
    let mut total = 0i64;
    let mut d = vec![1u64; cfg.r()];
    fn rec(cfg: &TupleConfig, x: u64, sf: &[u64], d: &mut Vec<u64>, i: usize, total: &mut i64) {
        if i == d.len() {
            let sign: i64 = d.iter().map(|&v| mobius(v)).product();
            *total += sign * count_congruence_solutions(cfg, d, x, None).unwrap() as i64;
            return;
        }
        for &v in sf {
            d[i] = v;
            rec(cfg, x, sf, d, i + 1, total);
        }
    }
    rec(cfg, x, &sf, &mut d, 0, &mut total);
    total
}

#[test]
fn mobius_sieve_identity_matches_enumeration() {
    for cfg in configs() {
        for x in [1u64, 10, 99, 1000, 10_000] {
            let set = enumerate_tuples(&cfg, x).unwrap();
            assert_eq!(
                mobius_sieve_count(&cfg, x),
                set.len() as i64,
                "{cfg}, x = {x}"
            );
        }
    }
}

#[test]
fn counts_approach_density() {
    let x = 1_000_000u64;
    for cfg in configs() {
        let ctx = DensityContext::with_default_tol(&cfg).unwrap();
        let set = enumerate_tuples(&cfg, x).unwrap();
        let gap = (set.len() as f64 / x as f64 - ctx.rho()).abs();
        let bound = 5.0 * (x as f64).powf(rat_to_f64(&cfg.delta()) - 1.0);
        assert!(gap < bound, "{cfg}: gap {gap:e} vs {bound:e}");
    }
}

/// `Σ_{d_1⋯d_r > Y} #{n ≤ t : d_i^k | n + h_i}` over squarefree `d_i`.
fn tail_sum(cfg: &TupleConfig, t: u64, y: u64) -> u64 {
    let bound = integer_root(t + cfg.h_max(), cfg.k());
    let sf: Vec<u64> = (1..=bound).filter(|&d| mobius(d) != 0).collect();
    let mut total = 0;
    for &d1 in &sf {
        for &d2 in &sf {
            if d1 * d2 > y {
                total += count_congruence_solutions(cfg, &[d1, d2], t, None).unwrap();
            }
        }
    }
    total
}

#[test]
fn congruence_tail_is_monotone_and_bounded() {
    let cfg = TupleConfig::new(2, &[0, 1]).unwrap();
    let t = 100_000u64;
    let ys = [1u64, 2, 4, 8, 16, 32, 64, 128, 256];
    let tails: Vec<u64> = ys.iter().map(|&y| tail_sum(&cfg, t, y)).collect();
    assert!(tails.windows(2).all(|w| w[0] >= w[1]), "{tails:?}");
    // Fitted constant of the shape t·Y^{1−k} + t^{2/(k+1)}.
    let fitted = ys
        .iter()
        .zip(&tails)
        .map(|(&y, &v)| v as f64 / (t as f64 / y as f64 + (t as f64).powf(2.0 / 3.0)))
        .fold(0.0, f64::max);
    assert!(fitted.is_finite() && fitted < 10.0, "fitted C = {fitted}");
}

#[test]
fn brute_variance_matches_exact_and_is_thread_independent() {
    let cfg = TupleConfig::new(2, &[0, 1]).unwrap();
    let ctx = DensityContext::with_default_tol(&cfg).unwrap();
    let set = enumerate_tuples(&cfg, 10_000).unwrap();
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap();
        pool.install(|| {
            variance_brute(&set, 100, &Budget::default(), |q| eta_row(&ctx, q).values).unwrap()
        })
    };
    let one = run(1);
    let four = run(4);
    assert_eq!(one.total.to_bits(), four.total.to_bits());
    assert_eq!(one.per_q, four.per_q);
    let exact = rat_to_f64(&variance_exact(&ctx, &set, 100));
    assert!(
        (one.total - exact).abs() <= 1e-6 * exact,
        "{} vs {exact}",
        one.total
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn residue_classes_partition(ci in 0usize..4, q in 1u64..300) {
        let cfg = &configs()[ci];
        let set = enumerate_tuples(cfg, 5000).unwrap();
        let total: u64 = (1..=q).map(|a| count_in_ap(&set, q, a)).sum();
        prop_assert_eq!(total, set.len() as u64);
    }

    #[test]
    fn bitmap_matches_trial_division(k in 2u32..=4, limit in 1u64..5000) {
        let bits = sieve_kfree(limit, k).unwrap();
        for n in 1..=limit {
            let kfree = (2..).take_while(|&d: &u64| d.pow(k) <= n).all(|d| n % d.pow(k) != 0);
            prop_assert_eq!(bits.is_set(n), kfree, "n = {}", n);
        }
    }

    #[test]
    fn bitmap_round_trips(k in 2u32..=3, limit in 1u64..100_000) {
        let bits = sieve_kfree(limit, k).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bits");
        bits.save(&path).unwrap();
        let back = KfreeBitmap::load(&path).unwrap();
        prop_assert_eq!(back.count(), bits.count());
        prop_assert_eq!(back, bits);
    }
}
