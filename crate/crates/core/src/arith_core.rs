//! Exact integer and rational arithmetic primitives.
//!
//! Everything here is a pure function of its inputs. The only shared state is
//! the prime table used for trial division, which is built once on first use
//! and never mutated afterwards.

use std::sync::OnceLock;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;

use crate::error::{Error, Result};

/// Exact arbitrary-precision rational, always kept in lowest terms with a
/// positive denominator, so structural equality is value equality.
pub type Rat = BigRational;

/// Largest input accepted by [`factorize`].
pub const FACTOR_LIMIT: u64 = 1_000_000_000_000;

const PRIME_TABLE_LIMIT: usize = 1_000_000;

/// Builds a [`Rat`] from a numerator and a non-zero denominator.
pub fn rat(num: i64, den: i64) -> Rat {
    Rat::new(BigInt::from(num), BigInt::from(den))
}

/// Builds an integral [`Rat`].
pub fn rat_int(n: i64) -> Rat {
    Rat::from_integer(BigInt::from(n))
}

/// Converts a rational to the nearest double.
pub fn rat_to_f64(r: &Rat) -> f64 {
    use num_traits::ToPrimitive;
    r.to_f64().unwrap_or(f64::NAN)
}

/// Converts a finite double to the exactly equal rational.
pub fn f64_to_rat(x: f64) -> Rat {
    Rat::from_float(x).expect("finite double")
}

/// Primes up to `n` inclusive, by the sieve of Eratosthenes.
pub fn primes_up_to(n: u64) -> Vec<u64> {
    if n < 2 {
        return Vec::new();
    }
    let n = n as usize;
    let mut composite = vec![false; n + 1];
    let mut out = Vec::with_capacity(if n > 10 {
        (1.3 * n as f64 / (n as f64).ln()) as usize
    } else {
        4
    });
    for i in 2..=n {
        if !composite[i] {
            out.push(i as u64);
            let mut j = i.saturating_mul(i);
            while j <= n {
                composite[j] = true;
                j += i;
            }
        }
    }
    out
}

fn prime_table() -> &'static [u64] {
    static TABLE: OnceLock<Vec<u64>> = OnceLock::new();
    TABLE.get_or_init(|| primes_up_to(PRIME_TABLE_LIMIT as u64))
}

/// Prime factorisation `value = Π p^e`, primes strictly increasing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Factorization {
    pub value: u64,
    pub factors: Vec<(u64, u32)>,
}

impl Factorization {
    /// Distinct primes dividing the value.
    pub fn primes(&self) -> impl Iterator<Item = u64> + '_ {
        self.factors.iter().map(|&(p, _)| p)
    }

    /// The prime-power components `p^e` of the value.
    pub fn prime_powers(&self) -> impl Iterator<Item = (u64, u32, u64)> + '_ {
        self.factors.iter().map(|&(p, e)| (p, e, p.pow(e)))
    }
}

/// Factorises `n` by trial division against a prime table up to 10⁶.
///
/// # Panics
/// Panics if `n == 0` or `n > FACTOR_LIMIT`; both are outside the desk-scale
/// domain and indicate a programming error in the caller.
pub fn factorize(n: u64) -> Factorization {
    assert!(n >= 1, "factorize requires n >= 1");
    assert!(
        n <= FACTOR_LIMIT,
        "factorize input {n} exceeds {FACTOR_LIMIT}"
    );
    let mut m = n;
    let mut factors = Vec::new();
    for &p in prime_table() {
        if p * p > m {
            break;
        }
        if m.is_multiple_of(p) {
            let mut e = 0;
            while m.is_multiple_of(p) {
                m /= p;
                e += 1;
            }
            factors.push((p, e));
        }
    }
    if m > 1 {
        factors.push((m, 1));
    }
    Factorization { value: n, factors }
}

/// Möbius function μ(n).
pub fn mobius(n: u64) -> i64 {
    let f = factorize(n);
    if f.factors.iter().any(|&(_, e)| e >= 2) {
        0
    } else if f.factors.len().is_multiple_of(2) {
        1
    } else {
        -1
    }
}

/// Euler's totient φ(n).
pub fn euler_phi(n: u64) -> u64 {
    factorize(n)
        .factors
        .iter()
        .fold(1, |acc, &(p, e)| acc * (p - 1) * p.pow(e - 1))
}

/// Sorted list of the positive divisors of `n`.
pub fn divisors(n: u64) -> Vec<u64> {
    divisors_of(&factorize(n))
}

/// Sorted divisors from an existing factorisation.
pub fn divisors_of(f: &Factorization) -> Vec<u64> {
    let mut out = vec![1u64];
    for &(p, e) in &f.factors {
        let len = out.len();
        let mut pk = 1;
        for _ in 0..e {
            pk *= p;
            for i in 0..len {
                out.push(out[i] * pk);
            }
        }
    }
    out.sort_unstable();
    out
}

/// Greatest common divisor.
pub fn gcd(a: u64, b: u64) -> u64 {
    a.gcd(&b)
}

/// Inverse of `a` modulo `m` (m ≥ 1), if it exists. The result lies in `[0, m)`.
pub fn mod_inverse(a: i128, m: i128) -> Option<i128> {
    if m == 1 {
        return Some(0);
    }
    let e = a.rem_euclid(m).extended_gcd(&m);
    if e.gcd != 1 {
        return None;
    }
    Some(e.x.rem_euclid(m))
}

/// Ramanujan's sum c_q(n) = Σ_{d | (q,n)} d·μ(q/d), exact.
///
/// `n = 0` gives c_q(0) = φ(q). The value depends only on `n mod q`.
pub fn ramanujan_sum(q: u64, n: i64) -> i64 {
    assert!(q >= 1, "ramanujan_sum requires q >= 1");
    let g = if n == 0 { q } else { gcd(q, n.unsigned_abs()) };
    divisors(g)
        .into_iter()
        .map(|d| d as i64 * mobius(q / d))
        .sum()
}

/// Ramanujan's sum at a prime power `p^l` (l ≥ 0) via the closed form
/// c_{p^l}(m) = p^l·[p^l | m] − p^{l−1}·[p^{l−1} | m] for l ≥ 1.
pub fn ramanujan_prime_power(p: u64, l: u32, m: i64) -> i64 {
    if l == 0 {
        return 1;
    }
    let pl = p.pow(l) as i64;
    let pl1 = pl / p as i64;
    let mut v = 0;
    if m.rem_euclid(pl) == 0 {
        v += pl;
    }
    if m.rem_euclid(pl1) == 0 {
        v -= pl1;
    }
    v
}

/// A system of congruences `n ≡ residues[i] (mod moduli[i])`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CongruenceSystem {
    residues: Vec<i128>,
    moduli: Vec<u128>,
}

impl CongruenceSystem {
    /// Creates a system, reducing each residue into `[0, modulus)`.
    pub fn new(residues: &[i128], moduli: &[u128]) -> Result<Self> {
        if residues.len() != moduli.len() {
            return Err(Error::Contract(
                "residue and modulus lists differ in length".into(),
            ));
        }
        if moduli.contains(&0) {
            return Err(Error::Contract("moduli must be positive".into()));
        }
        let residues = residues
            .iter()
            .zip(moduli)
            .map(|(&a, &m)| a.rem_euclid(m as i128))
            .collect();
        Ok(Self {
            residues,
            moduli: moduli.to_vec(),
        })
    }

    pub fn residues(&self) -> &[i128] {
        &self.residues
    }

    pub fn moduli(&self) -> &[u128] {
        &self.moduli
    }
}

/// Solves a congruence system with arbitrary (not necessarily coprime) moduli.
///
/// Returns `Ok(Some((c, L)))` with `L = lcm(moduli)` and `0 ≤ c < L` when the
/// system is compatible, i.e. `(q_i, q_j) | a_i − a_j` for all pairs, and
/// `Ok(None)` otherwise. The empty system has solution `0 mod 1`. Fails only
/// if the lcm does not fit in 127 bits.
pub fn crt_solve(sys: &CongruenceSystem) -> Result<Option<(u128, u128)>> {
    let mut c: i128 = 0;
    let mut l: i128 = 1;
    for (&a, &m) in sys.residues.iter().zip(&sys.moduli) {
        let m = i128::try_from(m).map_err(|_| Error::Overflow("modulus too large".into()))?;
        let g = l.gcd(&m);
        if (a - c).rem_euclid(g) != 0 {
            return Ok(None);
        }
        // Solve c + l·t ≡ a (mod m): t ≡ (a−c)/g · (l/g)^{-1} (mod m/g).
        let mg = m / g;
        let inv = mod_inverse(l / g, mg).expect("l/g and m/g are coprime");
        let t = mul_mod(((a - c) / g).rem_euclid(mg), inv, mg)?;
        let new_l = l
            .checked_mul(mg)
            .ok_or_else(|| Error::Overflow("lcm of moduli exceeds 127 bits".into()))?;
        c = (c + l
            .checked_mul(t)
            .ok_or_else(|| Error::Overflow("CRT lift".into()))?)
        .rem_euclid(new_l);
        l = new_l;
    }
    Ok(Some((c as u128, l as u128)))
}

fn mul_mod(a: i128, b: i128, m: i128) -> Result<i128> {
    match a.checked_mul(b) {
        Some(v) => Ok(v.rem_euclid(m)),
        None => {
            let v = (BigInt::from(a) * BigInt::from(b)).mod_floor(&BigInt::from(m));
            use num_traits::ToPrimitive;
            v.to_i128()
                .ok_or_else(|| Error::Overflow("modular product".into()))
        }
    }
}

/// Number of integers `n` in `[1, t]` with `n ≡ c (mod l)`.
pub fn count_class_up_to(c: u128, l: u128, t: u64) -> u64 {
    let t = t as u128;
    let first = if c == 0 { l } else { c };
    if first > t {
        0
    } else {
        ((t - first) / l + 1) as u64
    }
}

/// `x^e` for rationals with integer exponent.
pub fn rat_pow(x: &Rat, e: i32) -> Rat {
    if e >= 0 {
        num_traits::pow(x.clone(), e as usize)
    } else {
        num_traits::pow(x.recip(), (-e) as usize)
    }
}

/// Neumaier-compensated floating summation.
///
/// Used wherever long sums of squares are accumulated, so that results do not
/// depend on accumulation order beyond a few ulps and serial and parallel
/// reductions agree exactly when partial sums are merged in a fixed order.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Formats a double with 17 significant digits (round-trip exact).
pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}
