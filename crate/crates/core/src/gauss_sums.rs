//! Gauss sums of shifted k-free sequences and of the tuple set ℛ.
//!
//! Conventions: `e(θ) = exp(2πiθ)`; the local sum carries a minus sign,
//! `H(p^l, a) = Σ_n e(−a·H_n / p^l)`, and densities are recovered by
//! `g(q,ν) = (1/q) Σ_b G_ℛ(q,b) e(−bν/q)`.
//!
//! Exact quantities (Ψ, Φ, Δ*) go through Ramanujan sums and stay integers;
//! complex root-of-unity sums are used for `H` itself and for cross-checks.

use num_complex::Complex64;

use crate::arith_core::{
    factorize, mod_inverse, ramanujan_prime_power, rat, rat_to_f64, Factorization, Rat,
};
use crate::error::{Error, Result};
use crate::sieve::{local_residues, TupleConfig};

/// Complex value carrier for root-of-unity sums.
pub type ComplexVal = Complex64;

/// `e(num/den)` with the fraction reduced modulo 1 exactly before the
/// exponential is taken, so large numerators lose no phase precision.
pub fn e_frac(num: i128, den: i128) -> Complex64 {
    let r = num.rem_euclid(den);
    let theta = std::f64::consts::TAU * (r as f64 / den as f64);
    Complex64::new(theta.cos(), theta.sin())
}

/// `e(θ)` for a real argument, reduced modulo 1 first.
pub fn e_real(theta: f64) -> Complex64 {
    let t = std::f64::consts::TAU * (theta - theta.floor());
    Complex64::new(t.cos(), t.sin())
}

/// Reduces `a mod p^l` of each shift residue; residues of `cfg` modulo `p^l`
/// for `l ≤ k` are reductions of the residues modulo `p^k`.
fn residues_mod(cfg: &TupleConfig, p: u64) -> Vec<i128> {
    local_residues(cfg, p)
        .residues
        .into_iter()
        .map(|h| h as i128)
        .collect()
}

/// The k-free local Gauss sum at a reduced fraction with denominator `p^l`,
/// `l ≥ 1`: `−1/(p^k − 1)` when `l ≤ k` and `0` otherwise.
pub fn g_kfree_local(k: u32, p: u64, l: u32) -> Rat {
    assert!(l >= 1, "g_kfree_local needs l >= 1");
    if l <= k {
        rat(-1, p.pow(k) as i64 - 1)
    } else {
        rat(0, 1)
    }
}

/// `G(p^l) = (−1/p^k)/(1 − R_p/p^k) = −1/(p^k − R_p)` for `1 ≤ l ≤ k`, else 0.
fn gauss_g_prime_power(cfg: &TupleConfig, p: u64, l: u32) -> Rat {
    if l == 0 {
        return rat(1, 1);
    }
    if l > cfg.k() {
        return rat(0, 1);
    }
    let lr = local_residues(cfg, p);
    rat(-1, (lr.pk - lr.big_r as u128) as i64)
}

/// The multiplicative function `G(q)`; `G(1) = 1`.
pub fn gauss_g(cfg: &TupleConfig, q: u64) -> Rat {
    gauss_g_factored(cfg, &factorize(q))
}

/// `G(q)` from a precomputed factorisation.
pub fn gauss_g_factored(cfg: &TupleConfig, f: &Factorization) -> Rat {
    f.factors.iter().fold(rat(1, 1), |acc, &(p, l)| {
        acc * gauss_g_prime_power(cfg, p, l)
    })
}

/// `G(q)` as a double.
pub fn gauss_g_f64(cfg: &TupleConfig, q: u64) -> f64 {
    rat_to_f64(&gauss_g(cfg, q))
}

/// `H(p^l, a) = Σ_n e(−a·H_n/p^l)` for `l ≤ k`, 0 for `l > k`.
fn gauss_h_prime_power(cfg: &TupleConfig, p: u64, l: u32, a: i128) -> Complex64 {
    if l == 0 {
        return Complex64::new(1.0, 0.0);
    }
    if l > cfg.k() {
        return Complex64::new(0.0, 0.0);
    }
    let pl = (p as i128).pow(l);
    residues_mod(cfg, p)
        .iter()
        .map(|&h| e_frac(-a * (h % pl), pl))
        .sum()
}

/// `H(q, a)` for `(a, q) = 1`, extended quasi-multiplicatively: for
/// `q = q_1⋯q_ω` (prime powers), `H(q,a) = Π H(q_i, a·(q/q_i)^{-1} mod q_i)`.
pub fn gauss_h(cfg: &TupleConfig, q: u64, a: i64) -> Result<Complex64> {
    if q == 0 {
        return Err(Error::Contract("H(q,a) needs q >= 1".into()));
    }
    if crate::arith_core::gcd(q, a.rem_euclid(q as i64) as u64) != 1 {
        return Err(Error::Contract(format!(
            "H(q,a) needs gcd(a,q) = 1, got a = {a}, q = {q}"
        )));
    }
    Ok(gauss_h_factored(cfg, &factorize(q), a as i128))
}

fn gauss_h_factored(cfg: &TupleConfig, f: &Factorization, a: i128) -> Complex64 {
    let q = f.value as i128;
    f.factors
        .iter()
        .map(|&(p, l)| {
            let qi = (p as i128).pow(l);
            let inv = mod_inverse(q / qi, qi).expect("coprime cofactor");
            gauss_h_prime_power(cfg, p, l, (a.rem_euclid(qi) * inv).rem_euclid(qi))
        })
        .product()
}

/// `G_ℛ(q, a) = G(q') H(q', a')` with `q' = q/(q,a)`, `a' = a/(q,a)`;
/// `1 ≤ a ≤ q`, and `G_ℛ(q, q) = 1`.
pub fn gauss_r(cfg: &TupleConfig, q: u64, a: u64) -> Complex64 {
    let g = crate::arith_core::gcd(q, a % q);
    let g = if g == 0 { q } else { g };
    let (qq, aa) = (q / g, (a % q) / g);
    let f = factorize(qq);
    let big_g = rat_to_f64(&gauss_g_factored(cfg, &f));
    if big_g == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    gauss_h_factored(cfg, &f, aa as i128) * big_g
}

/// Phase-shifted Gauss sum `e(−ah/q)·G_ℛ(q,a)`: the Gauss sum of the
/// sequence `{n : n + h ∈ ℛ}` for the base configuration `cfg`.
pub fn shift_gauss(cfg: &TupleConfig, h: i64, q: u64, a: u64) -> Result<Complex64> {
    if crate::arith_core::gcd(q, a % q) != 1 && q != 1 {
        return Err(Error::Contract(format!(
            "shift_gauss needs gcd(a,q) = 1, got a = {a}, q = {q}"
        )));
    }
    Ok(e_frac(-(a as i128) * h as i128, q as i128) * gauss_r(cfg, q, a))
}

/// A point of ℚ/ℤ with denominator `p^l`: `a/p^l` with `gcd(a,p) = 1`, or
/// the point 0 (`l = 0`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LocalPoint {
    pub a: u64,
    pub l: u32,
}

impl LocalPoint {
    pub const ZERO: LocalPoint = LocalPoint { a: 0, l: 0 };
}

/// A p-local Gauss sum: a function on the points of ℚ/ℤ with denominator
/// dividing `p^k`, stored as `values[b]` = value at `b/p^k`. Values at
/// denominators beyond `p^k` vanish and are not stored.
#[derive(Debug, Clone, PartialEq)]
pub struct PLocalGauss {
    pub p: u64,
    pub k: u32,
    pub values: Vec<Complex64>,
}

impl PLocalGauss {
    /// The p-local Gauss sum of the k-free integers shifted by `h`:
    /// `e(−b·h/p^k)·G_K(b/p^k)` with `G_K(0) = 1` and `G_K = −1/(p^k−1)` at
    /// every non-zero point.
    pub fn kfree_shifted(p: u64, k: u32, h: u64) -> Self {
        let pk = p.pow(k);
        let gk = -1.0 / (pk as f64 - 1.0);
        let values = (0..pk)
            .map(|b| {
                if b == 0 {
                    Complex64::new(1.0, 0.0)
                } else {
                    e_frac(-(b as i128) * h as i128, pk as i128) * gk
                }
            })
            .collect();
        Self { p, k, values }
    }

    fn index(&self, point: LocalPoint) -> Result<usize> {
        if point.l == 0 {
            return Ok(0);
        }
        if point.l > self.k || point.a.is_multiple_of(self.p) {
            return Err(Error::Contract(format!(
                "point {}/{}^{} is not a reduced fraction with denominator dividing p^k",
                point.a, self.p, point.l
            )));
        }
        let pk = self.p.pow(self.k);
        Ok(((point.a * self.p.pow(self.k - point.l)) % pk) as usize)
    }

    /// Value at a point.
    pub fn value(&self, point: LocalPoint) -> Result<Complex64> {
        Ok(self.values[self.index(point)?])
    }

    /// `(self ⋆ other)(a) = Σ_b other(b)·self(a − b)` over the finite support.
    pub fn convolve(&self, other: &PLocalGauss) -> Result<PLocalGauss> {
        if self.p != other.p || self.k != other.k {
            return Err(Error::Contract(
                "convolution of p-local sums at different primes".into(),
            ));
        }
        let n = self.values.len();
        let values = (0..n)
            .map(|a| {
                (0..n)
                    .map(|b| other.values[b] * self.values[(a + n - b) % n])
                    .sum()
            })
            .collect();
        Ok(PLocalGauss {
            p: self.p,
            k: self.k,
            values,
        })
    }
}

/// Left-associated convolution `((F_1 ⋆ F_2) ⋆ …) ⋆ F_R` evaluated at `point`.
pub fn convolve_plocal(factors: &[PLocalGauss], point: LocalPoint) -> Result<Complex64> {
    let (first, rest) = factors
        .split_first()
        .ok_or_else(|| Error::Contract("convolution of an empty factor list".into()))?;
    let mut acc = first.clone();
    for f in rest {
        acc = acc.convolve(f)?;
    }
    acc.value(point)
}

/// Closed form for the convolution of the shifted k-free p-local sums with
/// distinct shifts `H_1..H_R` modulo `p^k`:
/// `(1 − R/p^k)/(1 − 1/p^k)^R` at 0 and
/// `(−1/p^k)/(1 − 1/p^k)^R · Σ_n e(−a·H_n/p^l)` at `a/p^l`, `1 ≤ l ≤ k`.
pub fn plocal_closed_form(p: u64, k: u32, shifts: &[u64], point: LocalPoint) -> Complex64 {
    let pk = p.pow(k) as f64;
    let big_r = shifts.len() as i32;
    let denom = (1.0 - 1.0 / pk).powi(big_r);
    if point.l == 0 {
        return Complex64::new((1.0 - big_r as f64 / pk) / denom, 0.0);
    }
    let pl = p.pow(point.l) as i128;
    let s: Complex64 = shifts
        .iter()
        .map(|&h| e_frac(-(point.a as i128) * h as i128, pl))
        .sum();
    s * (-1.0 / pk / denom)
}

/// `Ψ_d(ν) = Σ'_{b mod d} H(d,b) e(−bν/d)`, computed exactly as the
/// multiplicative function with prime-power values `Σ_n c_{p^l}(H_n + ν)`.
pub fn psi_d(cfg: &TupleConfig, d: u64, nu: i64) -> i64 {
    psi_d_factored(cfg, &factorize(d), nu)
}

pub(crate) fn psi_d_factored(cfg: &TupleConfig, f: &Factorization, nu: i64) -> i64 {
    f.factors
        .iter()
        .map(|&(p, l)| {
            if l > cfg.k() {
                return 0;
            }
            let pl = (p as i128).pow(l);
            residues_mod(cfg, p)
                .iter()
                .map(|&h| ramanujan_prime_power(p, l, ((h + nu as i128).rem_euclid(pl)) as i64))
                .sum::<i64>()
        })
        .product()
}

/// `Ψ_d(ν)` by its defining complex sum (cross-check route).
pub fn psi_d_complex(cfg: &TupleConfig, d: u64, nu: i64) -> Complex64 {
    let f = factorize(d);
    (1..=d)
        .filter(|&b| crate::arith_core::gcd(b, d) == 1)
        .map(|b| {
            gauss_h_factored(cfg, &f, b as i128) * e_frac(-(b as i128) * nu as i128, d as i128)
        })
        .sum()
}

/// `Φ_q(N) = Σ'_a |H(q,a)|² e(aN/q)`, exactly: at prime powers
/// `Σ_{n,n'} c_q(H_n − H_{n'} − N)` (0 beyond `p^k`), multiplicative in q.
pub fn phi_q(cfg: &TupleConfig, q: u64, n: i64) -> i64 {
    phi_q_factored(cfg, &factorize(q), n)
}

pub(crate) fn phi_q_factored(cfg: &TupleConfig, f: &Factorization, n: i64) -> i64 {
    f.factors
        .iter()
        .map(|&(p, l)| {
            if l > cfg.k() {
                return 0;
            }
            let pl = (p as i128).pow(l);
            let res = residues_mod(cfg, p);
            let mut s = 0i64;
            for &h in &res {
                for &h2 in &res {
                    s += ramanujan_prime_power(p, l, (h - h2 - n as i128).rem_euclid(pl) as i64);
                }
            }
            s
        })
        .product()
}

/// `Φ*_q(N) = Σ'_a conj(H(q,a)) e(aN/q) = Σ_n c_q(H_n + N)` at prime powers,
/// multiplicative in q. It coincides with [`psi_d`].
pub fn phi_star_q(cfg: &TupleConfig, q: u64, n: i64) -> i64 {
    psi_d(cfg, q, n)
}

/// `Φ(q) = Φ_q(0) = Σ'_a |H(q,a)|² ≥ 0`.
pub fn phi_cap(cfg: &TupleConfig, q: u64) -> i64 {
    phi_q(cfg, q, 0)
}

/// `Φ_q(N)` by its defining complex sum (cross-check route).
pub fn phi_q_complex(cfg: &TupleConfig, q: u64, n: i64) -> Complex64 {
    let f = factorize(q);
    (1..=q)
        .filter(|&a| crate::arith_core::gcd(a, q) == 1)
        .map(|a| {
            gauss_h_factored(cfg, &f, a as i128).norm_sqr()
                * e_frac(a as i128 * n as i128, q as i128)
        })
        .sum()
}
