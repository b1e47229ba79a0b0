//! Invariants of the exact arithmetic layer.

use kfree_core::arith_core::{
    crt_solve, divisors, euler_phi, factorize, gcd, mobius, ramanujan_sum, rat, CongruenceSystem,
};
use num_integer::Integer;
use num_traits::Signed;
use proptest::prelude::*;

#[test]
fn mobius_divisor_sum_is_indicator() {
    for n in 1..=10_000u64 {
        let s: i64 = divisors(n).into_iter().map(mobius).sum();
        assert_eq!(s, i64::from(n == 1), "n = {n}");
    }
}

#[test]
fn ramanujan_divisor_sums() {
    for big_d in 1..=500u64 {
        let divs = divisors(big_d);
        for n in -500..=500i64 {
            let s: i64 = divs.iter().map(|&d| ramanujan_sum(d, n)).sum();
            let expect = if n.rem_euclid(big_d as i64) == 0 {
                big_d as i64
            } else {
                0
            };
            assert_eq!(s, expect, "D = {big_d}, N = {n}");
        }
    }
}

#[test]
fn ramanujan_sum_is_multiplicative() {
    for q1 in 1..=300u64 {
        for q2 in 1..=300 / q1 {
            if gcd(q1, q2) != 1 {
                continue;
            }
            for n in -40..=40i64 {
                assert_eq!(
                    ramanujan_sum(q1 * q2, n),
                    ramanujan_sum(q1, n) * ramanujan_sum(q2, n),
                    "{q1}·{q2}, n = {n}"
                );
            }
        }
    }
}

fn scan(residues: &[i128], moduli: &[u128]) -> Option<(u128, u128)> {
    let l = moduli.iter().fold(1u128, |acc, &m| acc.lcm(&m));
    (0..l)
        .find(|&n| {
            residues
                .iter()
                .zip(moduli)
                .all(|(&r, &m)| (n as i128 - r).rem_euclid(m as i128) == 0)
        })
        .map(|n| (n, l))
}

proptest! {
    #[test]
    fn crt_agrees_with_scan(
        system in prop::collection::vec((1u128..=70, -200i128..200), 1..=3)
    ) {
        let lcm = system.iter().fold(1u128, |acc, &(m, _)| acc.lcm(&m));
        prop_assume!(lcm <= 5000);
        let moduli: Vec<u128> = system.iter().map(|&(m, _)| m).collect();
        let residues: Vec<i128> = system.iter().map(|&(_, r)| r).collect();
        let sys = CongruenceSystem::new(&residues, &moduli).unwrap();
        prop_assert_eq!(crt_solve(&sys).unwrap(), scan(&residues, &moduli));
    }

    #[test]
    fn factorization_reconstructs(n in 1u64..=1_000_000_000_000) {
        let f = factorize(n);
        let mut prev = 1;
        let mut prod = 1u64;
        for &(p, e) in &f.factors {
            prop_assert!(p > prev && e >= 1);
            prev = p;
            prod *= p.pow(e);
        }
        prop_assert_eq!(prod, n);
    }

    #[test]
    fn phi_is_multiplicative(a in 1u64..2000, b in 1u64..2000) {
        prop_assume!(gcd(a, b) == 1);
        prop_assert_eq!(euler_phi(a * b), euler_phi(a) * euler_phi(b));
    }

    #[test]
    fn rationals_are_canonical(n in -10_000i64..10_000, d in 1i64..10_000, m in 1i64..50) {
        let r = rat(n * m, d * m);
        prop_assert_eq!(&r, &rat(n, d));
        prop_assert!(r.denom().is_positive());
        prop_assert!(r.numer().gcd(r.denom()) == num_bigint::BigInt::from(1) || r.numer() == &num_bigint::BigInt::from(0));
    }
}
