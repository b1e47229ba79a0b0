//! The main-term engine: ζ, the arithmetic factors `U_s`, `Δ_s`, `Δ*`, the
//! Euler product `ρ²𝒢(s) = ζ(sk+k)^r ℱ(s)/ζ(2sk+2k)^r`, the residue
//! polynomial `P` and the predicted main term `Q²(x/Q)^{1/k} P(log(x/Q))`.

use num_bigint::BigInt;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::arith_core::{
    divisors, euler_phi, factorize, gcd, mobius, primes_up_to, ramanujan_prime_power, rat, Rat,
};
use crate::density::{g_local, rho};
use crate::error::{Error, Result};
use crate::gauss_sums::{gauss_g, phi_q};
use crate::sieve::{local_residues, require_admissible, TupleConfig};

/// A complex argument `s = σ + it`.
pub type ComplexS = Complex64;

const BERNOULLI_EVEN: [f64; 10] = [
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
    -3617.0 / 510.0,
    43867.0 / 798.0,
    -174611.0 / 330.0,
];

fn cpow_real(base: f64, s: Complex64) -> Complex64 {
    (s * base.ln()).exp()
}

/// Riemann ζ(s) by Euler–Maclaurin summation with ten Bernoulli
/// corrections. The cut-off is `N = 50 + ⌈|t|⌉`, which keeps the remainder
/// below 1e-10 throughout `σ > −2`, `|t| ≤ 100`.
pub fn zeta(s: ComplexS) -> Result<Complex64> {
    if (s - 1.0).norm() == 0.0 {
        return Err(Error::Domain("ζ has a pole at s = 1".into()));
    }
    let n = 50 + s.im.abs().ceil() as u64;
    let nf = n as f64;
    let mut sum = Complex64::new(0.0, 0.0);
    for m in (1..n).rev() {
        sum += cpow_real(m as f64, -s);
    }
    let n_s = cpow_real(nf, -s);
    sum += n_s * nf / (s - 1.0) + n_s * 0.5;
    // Rising factorial s(s+1)⋯(s+2j−2) and the matching power N^{−s−2j+1}.
    let mut rising = s;
    let mut power = n_s / nf;
    let mut fact = 2.0; // (2j)!
    for (j, b) in BERNOULLI_EVEN.iter().enumerate() {
        let jj = (j + 1) as f64;
        sum += rising * power * (b / fact);
        rising = rising * (s + 2.0 * jj - 1.0) * (s + 2.0 * jj);
        power /= nf * nf;
        fact *= (2.0 * jj + 1.0) * (2.0 * jj + 2.0);
    }
    Ok(sum)
}

/// `U_s(q,d) = (1/q) Σ_{D|d} D^s φ(q/D)` for `d | q`.
pub fn u_s(q: u64, d: u64, s: ComplexS) -> Result<Complex64> {
    if d == 0 || !q.is_multiple_of(d) {
        return Err(Error::Contract(format!(
            "U_s(q,d) needs d | q, got q = {q}, d = {d}"
        )));
    }
    let total: Complex64 = divisors(d)
        .into_iter()
        .map(|dd| cpow_real(dd as f64, s) * euler_phi(q / dd) as f64)
        .sum();
    Ok(total / q as f64)
}

/// Result of comparing the principal-character partial sum with its main term.
#[derive(Debug, Clone, PartialEq)]
pub struct PrincipalCharCheck {
    pub direct: Complex64,
    pub main: Complex64,
    pub residual: f64,
    /// `residual / √(M(1+|t|))`.
    pub fitted: f64,
}

/// `Σ_{u ≤ Q, (u/(u,d), M) = 1} (u/(u,d))^{−s}` against
/// `U_s(dM, d) Q^{1−s}/(1−s)`.
pub fn principal_char_sum_check(d: u64, m: u64, s: ComplexS, q: u64) -> Result<PrincipalCharCheck> {
    if (s - 1.0).norm() == 0.0 {
        return Err(Error::Domain("the main term has a pole at s = 1".into()));
    }
    let mut direct = Complex64::new(0.0, 0.0);
    for u in 1..=q {
        let v = u / gcd(u, d);
        if gcd(v, m) == 1 {
            direct += cpow_real(v as f64, -s);
        }
    }
    let main = u_s(d * m, d, s)? * cpow_real(q as f64, 1.0 - s) / (1.0 - s);
    let residual = (direct - main).norm();
    let fitted = residual / ((m as f64) * (1.0 + s.im.abs())).sqrt();
    Ok(PrincipalCharCheck {
        direct,
        main,
        residual,
        fitted,
    })
}

/// `ω_s(n) = Π_{p|n} (1 − p^{−s})`.
pub fn omega_s(n: u64, s: ComplexS) -> Complex64 {
    factorize(n)
        .primes()
        .map(|p| 1.0 - cpow_real(p as f64, -s))
        .product()
}

/// `F*_s(q,d) = Σ_{D|d} D^s φ(q/D)` for `d | q`.
pub fn f_star(q: u64, d: u64, s: ComplexS) -> Complex64 {
    divisors(d)
        .into_iter()
        .map(|dd| cpow_real(dd as f64, s) * euler_phi(q / dd) as f64)
        .sum()
}

/// `P_s(q) = Σ_{d|q} μ(q/d) ω_s(q/d) F*_s(q,d)/(d^s φ(q/d))`.
pub fn p_s(q: u64, s: ComplexS) -> Complex64 {
    divisors(q)
        .into_iter()
        .map(|d| {
            let e = q / d;
            omega_s(e, s) * f_star(q, d, s) * mobius(e) as f64
                / (cpow_real(d as f64, s) * euler_phi(e) as f64)
        })
        .sum()
}

/// Largest `|P_s(q) − q^{1−s}|` over the given arguments, for a prime power q.
pub fn p_s_identity_residual(q: u64, grid: &[ComplexS]) -> Result<f64> {
    if q < 2 || factorize(q).factors.len() != 1 {
        return Err(Error::Contract(format!(
            "P_s identity needs a prime power q > 1, got {q}"
        )));
    }
    Ok(grid
        .iter()
        .map(|&s| (p_s(q, s) - cpow_real(q as f64, 1.0 - s)).norm())
        .fold(0.0, f64::max))
}

/// The test grid `σ ∈ {0, 1/2}`, `t ∈ {0, ±1, ±10}`.
pub fn p_s_grid() -> Vec<ComplexS> {
    let mut g = Vec::new();
    for sigma in [0.0, 0.5] {
        for t in [0.0, 1.0, -1.0, 10.0, -10.0] {
            g.push(Complex64::new(sigma, t));
        }
    }
    g
}

/// `Δ*(p^t) = Σ_{n ≠ n'} c_{p^t}(H_n − H_{n'})` over the distinct shift
/// residues modulo `p^k`; zero for `t = 0` or `t > k`.
pub fn delta_star(cfg: &TupleConfig, p: u64, t: u32) -> i64 {
    if t == 0 || t > cfg.k() {
        return 0;
    }
    let res = local_residues(cfg, p).residues;
    let pt = (p as i128).pow(t);
    let mut s = 0;
    for (i, &a) in res.iter().enumerate() {
        for (j, &b) in res.iter().enumerate() {
            if i != j {
                s += ramanujan_prime_power(p, t, (a as i128 - b as i128).rem_euclid(pt) as i64);
            }
        }
    }
    s
}

/// `Δ_s(q)`: multiplicative, with `Δ_s(p^t) = p^{−ts}(Δ*(p^t) + R_p φ(p^t))`
/// for `1 ≤ t ≤ k` and 0 for `t > k`.
pub fn delta_s(cfg: &TupleConfig, q: u64, s: ComplexS) -> Complex64 {
    factorize(q)
        .factors
        .iter()
        .map(|&(p, t)| {
            if t > cfg.k() {
                return Complex64::new(0.0, 0.0);
            }
            let big_r = local_residues(cfg, p).big_r as i64;
            let pt = p.pow(t);
            cpow_real(pt as f64, -s) * (delta_star(cfg, p, t) + big_r * euler_phi(pt) as i64) as f64
        })
        .product()
}

/// `Δ_s(q)` from its defining sum
/// `(1/q) Σ_{d|q} ω_s(q/d) F*_s(q,d)/(d^s φ(q/d)) Σ'_{a ≤ q/d} Φ_q(−ad)`.
pub fn delta_s_defining(cfg: &TupleConfig, q: u64, s: ComplexS) -> Complex64 {
    let total: Complex64 = divisors(q)
        .into_iter()
        .map(|d| {
            let e = q / d;
            let inner: i64 = (1..=e)
                .filter(|&a| gcd(a, e) == 1)
                .map(|a| phi_q(cfg, q, -((a * d) as i64)))
                .sum();
            omega_s(e, s) * f_star(q, d, s) * inner as f64
                / (cpow_real(d as f64, s) * euler_phi(e) as f64)
        })
        .sum();
    total / q as f64
}

/// Local factor of `ρ²𝒢(s)` at `p` from its definition:
/// `(1 − R_p/p^k)² + p^{−2k} Σ_{1≠q|p^k} Δ_s(q)`.
pub fn rho2g_local_factor(cfg: &TupleConfig, p: u64, s: ComplexS) -> Complex64 {
    let k = cfg.k();
    let lr = local_residues(cfg, p);
    let pk = (p as f64).powi(k as i32);
    let mut sum = Complex64::new(0.0, 0.0);
    for t in 1..=k {
        sum += delta_s(cfg, p.pow(t), s);
    }
    let a = 1.0 - lr.big_r as f64 / pk;
    a * a + sum / (pk * pk)
}

/// Per-prime data entering the Euler factor of ℱ.
#[derive(Debug, Clone, PartialEq)]
struct LocalData {
    big_r: usize,
    /// `Δ*(p^t)` for `t = 1..=k`.
    delta_star: Vec<i64>,
}

impl LocalData {
    fn of(cfg: &TupleConfig, p: u64) -> Self {
        Self {
            big_r: local_residues(cfg, p).big_r,
            delta_star: (1..=cfg.k()).map(|t| delta_star(cfg, p, t)).collect(),
        }
    }

    /// Data of a prime not dividing any difference `h_i − h_j` and with
    /// `p^k > h_r`.
    fn generic(cfg: &TupleConfig) -> Self {
        let r = cfg.r() as i64;
        let mut delta_star = vec![0; cfg.k() as usize];
        delta_star[0] = -r * (r - 1);
        Self {
            big_r: cfg.r(),
            delta_star,
        }
    }
}

fn binomial(n: usize, j: usize) -> f64 {
    (0..j).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `ln(1 + w)` accurate for small `|w|`.
fn ln_1p_complex(w: Complex64) -> Complex64 {
    let re = 0.5 * (2.0 * w.re + w.norm_sqr()).ln_1p();
    let im = w.im.atan2(1.0 + w.re);
    Complex64::new(re, im)
}

/// `log` of the Euler factor of ℱ at a (possibly non-integral) `p`:
/// `ℱ_p(s) = L_p(s)/(1 + Z)^r` with `Z = p^{−k(s+1)}` and
/// `L_p = 1 + R_p Z − 2R_p/p^k + R_p²/p^{2k} + P_1/p^{2k}`.
///
/// The numerator `L_p − (1 + Z)^r` is assembled term by term, with
/// `1 + R_p Z − (1+Z)^r = (R_p − r)Z − Σ_{j≥2} C(r,j) Z^j`, so no large
/// terms cancel.
fn fcal_log_factor(k: u32, r: usize, data: &LocalData, p: f64, s: ComplexS) -> Complex64 {
    let lp = p.ln();
    let kf = k as f64;
    let big_r = data.big_r as f64;
    let z = (-(s + 1.0) * kf * lp).exp();
    let inv_pk = (-kf * lp).exp();
    // P_1/X^{2k}.
    let mut p1 = Complex64::new(0.0, 0.0);
    for (t, &ds) in data.delta_star.iter().enumerate() {
        if ds != 0 {
            let t = (t + 1) as f64;
            p1 += ((-s * t - 2.0 * kf) * lp).exp() * ds as f64;
        }
    }
    for t in 1..k {
        let t = t as f64;
        p1 += ((t * (1.0 - s) - 2.0 * kf) * lp).exp() * (big_r * (1.0 - 1.0 / p));
    }
    p1 -= z * (big_r / p);
    let mut num =
        z * (big_r - r as f64) - 2.0 * big_r * inv_pk + big_r * big_r * inv_pk * inv_pk + p1;
    let mut zj = z;
    for j in 2..=r {
        zj *= z;
        num -= zj * binomial(r, j);
    }
    ln_1p_complex(num / (1.0 + z).powi(r as i32))
}

/// Precomputed Euler-factor data of ℱ up to a prime cut-off.
#[derive(Debug, Clone)]
pub struct FcalProduct {
    k: u32,
    r: usize,
    p_max: u64,
    /// Primes with non-generic data, with that data.
    special: Vec<(u64, LocalData)>,
    /// Primes up to `p_max` with generic data.
    generic_primes: Vec<f64>,
    generic: LocalData,
}

impl FcalProduct {
    /// Prepares the Euler product over `p ≤ p_max` (raised to at least
    /// `h_r + 1` so that every prime beyond the cut-off is generic).
    pub fn new(cfg: &TupleConfig, p_max: u64) -> Result<Self> {
        require_admissible(cfg)?;
        let p_max = p_max.max(cfg.h_max() + 1);
        let generic = LocalData::generic(cfg);
        let mut special = Vec::new();
        let mut generic_primes = Vec::new();
        for p in primes_up_to(p_max) {
            let d = LocalData::of(cfg, p);
            if d == generic {
                generic_primes.push(p as f64);
            } else {
                special.push((p, d));
            }
        }
        Ok(Self {
            k: cfg.k(),
            r: cfg.r(),
            p_max,
            special,
            generic_primes,
            generic,
        })
    }

    pub fn p_max(&self) -> u64 {
        self.p_max
    }

    /// `Σ_{p ≤ p_max} log ℱ_p(s)`.
    pub fn log_truncated(&self, s: ComplexS) -> Complex64 {
        let mut acc: Complex64 = self
            .special
            .iter()
            .map(|(p, d)| fcal_log_factor(self.k, self.r, d, *p as f64, s))
            .sum();
        for &p in &self.generic_primes {
            acc += fcal_log_factor(self.k, self.r, &self.generic, p, s);
        }
        acc
    }

    /// Estimate of `Σ_{p > p_max} log ℱ_p(s)` from the prime number theorem,
    /// `∫_{p_max}^∞ log ℱ_t(s) dt/ln t`, by Simpson's rule in `u = ln t`.
    pub fn log_tail_estimate(&self, s: ComplexS) -> Complex64 {
        let u0 = (self.p_max as f64).ln();
        let span = 60.0;
        let steps = 1200;
        let h = span / steps as f64;
        let integrand = |u: f64| {
            let t = u.exp();
            fcal_log_factor(self.k, self.r, &self.generic, t, s) * (t / u)
        };
        let mut acc = integrand(u0) + integrand(u0 + span);
        for i in 1..steps {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += integrand(u0 + i as f64 * h) * w;
        }
        acc * (h / 3.0)
    }

    /// ℱ(s) including the tail estimate.
    pub fn value(&self, s: ComplexS) -> Complex64 {
        (self.log_truncated(s) + self.log_tail_estimate(s)).exp()
    }
}

/// Lower edge of the strip in which [`g_series`] is evaluated:
/// `σ ≥ −1 + 1/(2k) + δ` with `δ = 1/(4k)`.
pub fn strip_edge(k: u32) -> f64 {
    -1.0 + 1.0 / (2.0 * k as f64) + 1.0 / (4.0 * k as f64)
}

/// `𝒢(s)` and its factors.
#[derive(Debug, Clone, PartialEq)]
pub struct GSeries {
    /// `ρ²𝒢(s) = ζ(sk+k)^r ℱ(s)/ζ(2sk+2k)^r`.
    pub rho2_g: Complex64,
    /// `𝒢(s)`.
    pub g: Complex64,
    /// `ℱ(s)` (with tail estimate).
    pub fcal: Complex64,
    /// Magnitude of the estimated logarithmic tail of ℱ beyond the cut-off.
    pub tail_log_magnitude: f64,
}

/// Evaluates `𝒢(s)` through the ζ-factorisation with ℱ truncated at `p_max`
/// and tail-corrected.
pub fn g_series(cfg: &TupleConfig, s: ComplexS, p_max: u64) -> Result<GSeries> {
    let k = cfg.k();
    if s.re < strip_edge(k) {
        return Err(Error::Domain(format!(
            "σ = {} lies below the strip σ ≥ {}",
            s.re,
            strip_edge(k)
        )));
    }
    let prod = FcalProduct::new(cfg, p_max)?;
    let tail = prod.log_tail_estimate(s);
    let fcal = (prod.log_truncated(s) + tail).exp();
    let kf = k as f64;
    let r = cfg.r() as i32;
    let rho2_g = zeta(s * kf + kf)?.powi(r) * fcal / zeta(s * 2.0 * kf + 2.0 * kf)?.powi(r);
    let (lo, hi) = rho(cfg, 1e-12)?;
    let rho_mid = 0.5 * (crate::arith_core::rat_to_f64(&lo) + crate::arith_core::rat_to_f64(&hi));
    Ok(GSeries {
        rho2_g,
        g: rho2_g / (rho_mid * rho_mid),
        fcal,
        tail_log_magnitude: tail.norm(),
    })
}

/// Comparison of `ρ²𝒢(0)` with ρ.
#[derive(Debug, Clone, PartialEq)]
pub struct Rho2GCheck {
    /// `ζ(k)^r ℱ_{≤P}(0)/ζ(2k)^r` with the plain truncated product.
    pub rho2_g0: f64,
    pub rho_lo: f64,
    pub rho_hi: f64,
    /// Distance from `rho2_g0` to the ρ-bracket.
    pub gap: f64,
    /// Rigorous bound for the truncation error of `rho2_g0` plus the ζ
    /// evaluation error.
    pub tail_bound: f64,
}

impl Rho2GCheck {
    pub fn passes(&self) -> bool {
        self.gap <= self.tail_bound
    }
}

/// Checks `ρ²𝒢(0) = ρ` with ℱ truncated at `p_max`.
///
/// At `s = 0` the generic factor is `(1 − r u)/(1 + u)^r`, `u = p^{−k}`, with
/// `|log| ≤ r u/(1 − r u) + r u`; summing over `p > P` with
/// `Σ_{n>P} n^{−k} ≤ P^{1−k}/(k−1)` bounds the omitted tail.
pub fn rho2g_zero_check(cfg: &TupleConfig, p_max: u64) -> Result<Rho2GCheck> {
    let prod = FcalProduct::new(cfg, p_max)?;
    let k = cfg.k() as f64;
    let r = cfg.r() as f64;
    let zero = Complex64::new(0.0, 0.0);
    let fcal = prod.log_truncated(zero).exp();
    let value = zeta(Complex64::new(k, 0.0))?.re.powf(r) * fcal.re
        / zeta(Complex64::new(2.0 * k, 0.0))?.re.powf(r);
    let pm = prod.p_max() as f64;
    let log_tail = 2.0 * r * pm.powf(1.0 - k) / ((k - 1.0) * (1.0 - r * pm.powf(-k)));
    let tail_bound = value * log_tail.exp_m1() + 1e-9;
    let (lo, hi) = rho(cfg, 1e-12)?;
    let (lo, hi) = (
        crate::arith_core::rat_to_f64(&lo),
        crate::arith_core::rat_to_f64(&hi),
    );
    let gap = if value < lo {
        lo - value
    } else if value > hi {
        value - hi
    } else {
        0.0
    };
    Ok(Rho2GCheck {
        rho2_g0: value,
        rho_lo: lo,
        rho_hi: hi,
        gap,
        tail_bound,
    })
}

/// The circle on which Laurent coefficients at `s = 1` are extracted.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContourSpec {
    pub radius: f64,
    pub points: usize,
}

impl ContourSpec {
    /// Radius `min(0.2, 0.9/(2k))` and 512 points.
    pub fn default_for(k: u32) -> Self {
        Self {
            radius: (0.9 / (2.0 * k as f64)).min(0.2),
            points: 512,
        }
    }

    fn validate(&self, k: u32) -> Result<()> {
        if !(self.radius > 0.0 && self.radius < 1.0 / (2.0 * k as f64)) {
            return Err(Error::Contract(format!(
                "contour radius must lie in (0, 1/(2k)), got {}",
                self.radius
            )));
        }
        if self.points < 64 || !self.points.is_power_of_two() {
            return Err(Error::Contract(format!(
                "contour needs a power-of-two number of points >= 64, got {}",
                self.points
            )));
        }
        Ok(())
    }
}

/// The integrand
/// `f(s) = ζ(−1+s/k) ζ(s)^r ℱ(−1+s/k) / (k(−2+s/k)(−1+s/k)(s/k) ζ(2s)^r)`.
pub fn integrand_f(cfg: &TupleConfig, prod: &FcalProduct, s: ComplexS) -> Result<Complex64> {
    let k = cfg.k() as f64;
    let r = cfg.r() as i32;
    let w = s / k;
    let fcal = prod.value(w - 1.0);
    Ok(zeta(w - 1.0)? * zeta(s)?.powi(r) * fcal
        / ((w - 2.0) * (w - 1.0) * w * k * zeta(s * 2.0)?.powi(r)))
}

/// Laurent coefficients `a_{−1}, a_{−2}, …` of `f` at `s = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct LaurentData {
    /// `negative[m-1] = a_{−m}` for `m = 1..=r+2`.
    pub negative: Vec<Complex64>,
    pub contour: ContourSpec,
}

fn laurent(cfg: &TupleConfig, prod: &FcalProduct, contour: ContourSpec) -> Result<LaurentData> {
    let r = cfg.r();
    let n = contour.points;
    let values: Vec<(Complex64, Complex64)> = (0..n)
        .into_par_iter()
        .map(|j| {
            let theta = std::f64::consts::TAU * (j as f64 + 0.5) / n as f64;
            let u = Complex64::from_polar(contour.radius, theta);
            integrand_f(cfg, prod, 1.0 + u).map(|f| (u, f))
        })
        .collect::<Result<_>>()?;
    let negative = (1..=r + 2)
        .map(|m| {
            values
                .iter()
                .map(|(u, f)| f * u.powi(m as i32))
                .sum::<Complex64>()
                / n as f64
        })
        .collect();
    Ok(LaurentData { negative, contour })
}

/// The polynomial `P(L) = Σ c_j L^j` of the main term.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyP {
    pub k: u32,
    pub coeffs: Vec<f64>,
    pub certified: bool,
    /// Largest relative movement of `a_{−1..−r}` under refinement.
    pub movement: f64,
    /// Largest imaginary part among the coefficients before taking real parts.
    pub max_imag: f64,
    pub laurent: LaurentData,
    /// Estimated logarithmic tail of ℱ at the contour's centre.
    pub tail_log_magnitude: f64,
}

impl PolyP {
    /// `P(L)`.
    pub fn eval(&self, l: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * l + c)
    }

    /// `Res_{s=1} f(s) y^{s/k} = −y^{1/k} P(log y)/2`.
    pub fn residue(&self, y: f64) -> f64 {
        -y.powf(1.0 / self.k as f64) * self.eval(y.ln()) / 2.0
    }

    /// Coefficients of `L ↦ P(L + c)`.
    pub fn shifted(&self, c: f64) -> Vec<f64> {
        let n = self.coeffs.len();
        let mut out = vec![0.0; n];
        for (j, &cj) in self.coeffs.iter().enumerate() {
            for (i, o) in out.iter_mut().enumerate().take(j + 1) {
                *o += cj * binomial(j, i) * c.powi((j - i) as i32);
            }
        }
        out
    }
}

/// Default Euler-product cut-off for [`residue_poly`].
pub const DEFAULT_P_MAX: u64 = 100_000;

/// Extracts `P` from the Laurent expansion of `f` at `s = 1`:
/// `Res(f y^{s/k}) = y^{1/k} Σ_{m<r} a_{−(m+1)} (log y/k)^m/m!`, so
/// `c_m = −2 a_{−(m+1)}/(k^m m!)`. The result is certified when doubling the
/// points and halving the radius moves each of `a_{−1..−r}` by less than
/// 1e-6 relative.
pub fn residue_poly(cfg: &TupleConfig, contour: ContourSpec, p_max: u64) -> Result<PolyP> {
    let k = cfg.k();
    contour.validate(k)?;
    let prod = FcalProduct::new(cfg, p_max)?;
    let coarse = laurent(cfg, &prod, contour)?;
    let fine = laurent(
        cfg,
        &prod,
        ContourSpec {
            radius: contour.radius / 2.0,
            points: contour.points * 2,
        },
    )?;
    let r = cfg.r();
    let movement = (0..r)
        .map(|m| {
            let (a, b) = (coarse.negative[m], fine.negative[m]);
            (a - b).norm() / b.norm().max(1e-300)
        })
        .fold(0.0, f64::max);
    let mut fact = 1.0;
    let mut coeffs = Vec::with_capacity(r);
    let mut max_imag: f64 = 0.0;
    for m in 0..r {
        if m > 0 {
            fact *= m as f64;
        }
        let c = fine.negative[m] * (-2.0 / ((k as f64).powi(m as i32) * fact));
        max_imag = max_imag.max(c.im.abs());
        coeffs.push(c.re);
    }
    let tail = prod
        .log_tail_estimate(Complex64::new(-1.0 + 1.0 / k as f64, 0.0))
        .norm();
    Ok(PolyP {
        k,
        coeffs,
        certified: movement < 1e-6,
        movement,
        max_imag,
        laurent: fine,
        tail_log_magnitude: tail,
    })
}

/// `a_{−1} = lim_{s→1} (s−1) f(s)` for `r = 1`, by Richardson extrapolation
/// of `(s−1) f(s)` at `s = 1 + h(1+i)` for `h = 10⁻³` and `h/2`.
pub fn residue_limit_r1(cfg: &TupleConfig, p_max: u64) -> Result<Complex64> {
    if cfg.r() != 1 {
        return Err(Error::Contract(
            "the direct limit applies to r = 1 only".into(),
        ));
    }
    let prod = FcalProduct::new(cfg, p_max)?;
    let eval = |h: f64| -> Result<Complex64> {
        let u = Complex64::new(h, h);
        Ok(integrand_f(cfg, &prod, 1.0 + u)? * u)
    };
    let (g1, g2) = (eval(1e-3)?, eval(5e-4)?);
    Ok(g2 * 2.0 - g1)
}

/// The predicted main term `Q²(x/Q)^{1/k} P(log(x/Q))`.
pub fn main_term(x: f64, q: f64, p: &PolyP) -> Result<f64> {
    if !p.certified {
        return Err(Error::Precision(format!(
            "residue polynomial is not certified (refinement movement {:e})",
            p.movement
        )));
    }
    if !(1.0 <= q && q <= x) {
        return Err(Error::Contract(format!(
            "need 1 <= Q <= x, got Q = {q}, x = {x}"
        )));
    }
    let y = x / q;
    Ok(q * q * y.powf(1.0 / p.k as f64) * p.eval(y.ln()))
}

/// Both sides of `Σ_{u≤Q} (1/u) Σ_{q|u} Φ(q) G(q)² = (1/ρ²) Σ_{u≤Q} W(u)`
/// in the normalisation `W(u)/ρ² = Σ_a g(u,a)²`, with the right-hand side
/// computed from the Euler-factor densities.
pub fn w_collapse(cfg: &TupleConfig, q_max: u64) -> (Rat, Rat) {
    let mut lhs = rat(0, 1);
    let mut rhs = rat(0, 1);
    for u in 1..=q_max {
        let mut inner = rat(0, 1);
        for q in divisors(u) {
            let g = gauss_g(cfg, q);
            inner += &g * &g * Rat::from_integer(BigInt::from(phi_q(cfg, q, 0)));
        }
        lhs += inner / Rat::from_integer(BigInt::from(u));
        for a in 0..u {
            let g = g_local(cfg, u, a);
            rhs += &g * &g;
        }
    }
    (lhs, rhs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(k: u32, h: &[u64]) -> TupleConfig {
        TupleConfig::new(k, h).unwrap()
    }

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn zeta_known_values() {
        let pi = std::f64::consts::PI;
        assert!((zeta(c(2.0, 0.0)).unwrap() - pi * pi / 6.0).norm() < 1e-12);
        assert!((zeta(c(0.0, 0.0)).unwrap() + 0.5).norm() < 1e-12);
        assert!((zeta(c(-1.0, 0.0)).unwrap() + 1.0 / 12.0).norm() < 1e-12);
        assert!((zeta(c(4.0, 0.0)).unwrap() - pi.powi(4) / 90.0).norm() < 1e-12);
        // First non-trivial zero.
        assert!(zeta(c(0.5, 14.134_725_141_734_693)).unwrap().norm() < 1e-10);
        assert!(zeta(c(1.0, 0.0)).is_err());
    }

    #[test]
    fn u_s_examples() {
        assert!((u_s(12, 12, c(0.0, 0.0)).unwrap() - 1.0).norm() < 1e-12);
        assert!((u_s(12, 1, c(0.3, 2.0)).unwrap() - 4.0 / 12.0).norm() < 1e-12);
        assert!((u_s(7, 7, c(1.0, 0.0)).unwrap() - 13.0 / 7.0).norm() < 1e-12);
        assert!(u_s(12, 5, c(0.0, 0.0)).is_err());
    }

    #[test]
    fn principal_char_examples() {
        assert!(
            principal_char_sum_check(1, 1, c(0.0, 0.0), 100)
                .unwrap()
                .residual
                <= 1.0
        );
        assert!(
            principal_char_sum_check(2, 1, c(0.0, 0.0), 100)
                .unwrap()
                .residual
                <= 2.0
        );
        assert!(
            principal_char_sum_check(1, 2, c(0.0, 1.0), 10_000)
                .unwrap()
                .fitted
                < 10.0
        );
    }

    #[test]
    fn delta_star_examples() {
        let sq = cfg(2, &[0]);
        assert_eq!((delta_star(&sq, 2, 1), delta_star(&sq, 2, 2)), (0, 0));
        let tw = cfg(2, &[0, 1]);
        assert_eq!((delta_star(&tw, 2, 1), delta_star(&tw, 2, 2)), (-2, 0));
        let ev = cfg(2, &[0, 2]);
        assert_eq!((delta_star(&ev, 2, 1), delta_star(&ev, 2, 2)), (2, -4));
    }

    #[test]
    fn delta_s_examples() {
        let tw = cfg(2, &[0, 1]);
        assert!((delta_s(&tw, 1, c(0.3, 1.0)) - 1.0).norm() < 1e-12);
        assert!(delta_s(&tw, 2, c(0.0, 0.0)).norm() < 1e-12);
        let sq = cfg(2, &[0]);
        let s = c(0.5, 2.0);
        let expect = cpow_real(9.0, -s) * 6.0;
        assert!((delta_s(&sq, 9, s) - expect).norm() < 1e-12);
    }

    #[test]
    fn p_s_examples() {
        assert!(p_s_identity_residual(2, &[c(0.0, 0.0)]).unwrap() < 1e-12);
        assert!(p_s_identity_residual(9, &[c(0.5, 0.0)]).unwrap() < 1e-9);
        assert!(p_s_identity_residual(8, &[c(0.0, 1.0)]).unwrap() < 1e-9);
        assert!(p_s_identity_residual(6, &[c(0.0, 0.0)]).is_err());
    }

    #[test]
    fn fcal_factor_matches_definition() {
        for cf in [
            cfg(2, &[0]),
            cfg(2, &[0, 1]),
            cfg(3, &[0, 1, 2]),
            cfg(2, &[0, 2, 6]),
        ] {
            for p in [2u64, 3, 5, 7, 11, 101] {
                for s in [c(0.0, 0.0), c(-0.5, 0.0), c(-0.4, 0.7), c(0.3, -3.0)] {
                    let direct = rho2g_local_factor(&cf, p, s);
                    let z = cpow_real(p as f64, -(s + 1.0) * cf.k() as f64);
                    let via = fcal_log_factor(cf.k(), cf.r(), &LocalData::of(&cf, p), p as f64, s)
                        .exp()
                        * (1.0 + z).powi(cf.r() as i32);
                    assert!((direct - via).norm() < 1e-12, "{cf} p={p} s={s}");
                }
            }
        }
    }

    #[test]
    fn local_identity_at_zero() {
        for cf in [cfg(2, &[0]), cfg(2, &[0, 1]), cfg(3, &[0, 1, 2])] {
            for p in [2u64, 3, 5, 7] {
                let lr = local_residues(&cf, p);
                let expect = 1.0 - lr.big_r as f64 / (p as f64).powi(cf.k() as i32);
                assert!((rho2g_local_factor(&cf, p, c(0.0, 0.0)) - expect).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn g_series_domain_and_smoke() {
        let sq = cfg(2, &[0]);
        assert!(matches!(
            g_series(&sq, c(-0.9, 0.0), 1000),
            Err(Error::Domain(_))
        ));
        let v = g_series(&sq, c(0.5, 80.0), 1000).unwrap();
        assert!(v.g.re.is_finite() && v.g.im.is_finite());
        let z = g_series(&sq, c(0.0, 0.0), 10_000).unwrap();
        let rho = 6.0 / std::f64::consts::PI.powi(2);
        assert!((z.g.re - 1.0 / rho).abs() < 1e-6);
    }

    #[test]
    fn poly_shift_is_consistent() {
        let p = PolyP {
            k: 2,
            coeffs: vec![0.3, -0.2, 0.05],
            certified: true,
            movement: 0.0,
            max_imag: 0.0,
            laurent: LaurentData {
                negative: vec![],
                contour: ContourSpec::default_for(2),
            },
            tail_log_magnitude: 0.0,
        };
        let y = 37.0;
        let shifted = PolyP {
            coeffs: p.shifted(2f64.ln()),
            ..p.clone()
        };
        let lhs = p.residue(2.0 * y);
        let rhs = -(2.0 * y).powf(0.5) * shifted.eval(y.ln()) / 2.0;
        assert!((lhs - rhs).abs() < 1e-12);
        assert_eq!(main_term(100.0, 100.0, &p).unwrap(), 100.0 * 100.0 * 0.3);
    }

    #[test]
    fn rho2g_zero_matches_rho() {
        for cf in [cfg(2, &[0]), cfg(2, &[0, 1]), cfg(3, &[0, 1, 2])] {
            let chk = rho2g_zero_check(&cf, 20_000).unwrap();
            assert!(chk.passes(), "{cf}: {chk:?}");
        }
    }

    #[test]
    fn residue_poly_certifies_and_matches_limit() {
        let sq = cfg(2, &[0]);
        let p = residue_poly(&sq, ContourSpec::default_for(2), 2_000).unwrap();
        assert!(p.certified, "{p:?}");
        assert_eq!(p.coeffs.len(), 1);
        let lim = residue_limit_r1(&sq, 2_000).unwrap();
        assert!((lim - p.laurent.negative[0]).norm() < 1e-5 * lim.norm());
        assert!(p.laurent.negative[1].norm() < 1e-8);
        let tw = cfg(2, &[0, 1]);
        let p2 = residue_poly(
            &tw,
            ContourSpec {
                radius: 0.2,
                points: 256,
            },
            2_000,
        )
        .unwrap();
        assert!(p2.certified, "{p2:?}");
        assert!(p2.laurent.negative[2].norm() < 1e-8);
    }
}
