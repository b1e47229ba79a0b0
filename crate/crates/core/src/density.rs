//! The density ρ of ℛ, the local densities g(q,a) and η(q,a) = ρ·g(q,a), the
//! error terms E_x(q,a), and two further routes to V(x,Q) (exact rational and
//! spectral) that cross-check the brute-force bucketing of the sieve module.

use std::sync::Arc;

use num_bigint::BigInt;
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;

use crate::arith_core::{
    divisors_of, f64_to_rat, factorize, primes_up_to, rat, rat_to_f64, Factorization, Rat,
};
use crate::error::{Error, Result};
use crate::gauss_sums::{gauss_g_factored, phi_q_factored, psi_d_factored};
use crate::sieve::{
    local_residues, require_admissible, Budget, TupleConfig, TupleSet, VarianceReport,
};

/// Smallest bracket width (relative to ρ) that double-precision evaluation of
/// the Euler product can certify.
pub const RHO_MIN_RELATIVE_TOL: f64 = 1e-13;

/// Rigorous enclosure of ζ(k) for an integer `k ≥ 2`.
///
/// Euler–Maclaurin at `N = 1000` with corrections through the `B_4` term;
/// the remainder is bounded by the magnitude of the `B_6` term, and a
/// relative slack covers floating-point rounding of the partial sum.
pub fn zeta_int_bracket(k: u32) -> (f64, f64) {
    assert!(k >= 2, "zeta_int_bracket needs k >= 2");
    let n = 1000.0f64;
    let s = k as f64;
    let mut partial = 0.0;
    for m in (1..1000u32).rev() {
        partial += (m as f64).powf(-s);
    }
    let v = partial + n.powf(1.0 - s) / (s - 1.0) + 0.5 * n.powf(-s) + s * n.powf(-s - 1.0) / 12.0
        - s * (s + 1.0) * (s + 2.0) * n.powf(-s - 3.0) / 720.0;
    let rem = s * (s + 1.0) * (s + 2.0) * (s + 3.0) * (s + 4.0) * n.powf(-s - 5.0) / 30240.0;
    let slack = 1e-14 * v;
    (v - rem - slack, v + rem + slack)
}

/// ρ and the parameters it was computed with. Immutable once built.
#[derive(Debug, Clone)]
pub struct DensityContext {
    cfg: TupleConfig,
    rho_lo: Rat,
    rho_hi: Rat,
    p_max: u64,
    rho_mid: f64,
    rho_half_width: f64,
}

impl DensityContext {
    /// Builds the context with a ρ-bracket of width at most `tol`.
    pub fn new(cfg: &TupleConfig, tol: f64) -> Result<Self> {
        let (lo, hi, p_max) = rho_bracket(cfg, tol)?;
        Ok(Self {
            cfg: cfg.clone(),
            rho_lo: f64_to_rat(lo),
            rho_hi: f64_to_rat(hi),
            p_max,
            rho_mid: 0.5 * (lo + hi),
            rho_half_width: 0.5 * (hi - lo),
        })
    }

    /// Context with the default tolerance `1e-12`.
    pub fn with_default_tol(cfg: &TupleConfig) -> Result<Self> {
        Self::new(cfg, 1e-12)
    }

    pub fn cfg(&self) -> &TupleConfig {
        &self.cfg
    }

    /// Lower end of the ρ-bracket.
    pub fn rho_lo(&self) -> &Rat {
        &self.rho_lo
    }

    /// Upper end of the ρ-bracket.
    pub fn rho_hi(&self) -> &Rat {
        &self.rho_hi
    }

    /// Largest prime treated individually in the Euler product.
    pub fn p_max(&self) -> u64 {
        self.p_max
    }

    /// Midpoint of the bracket, used by all floating-point code.
    pub fn rho(&self) -> f64 {
        self.rho_mid
    }

    /// Half-width of the bracket.
    pub fn rho_half_width(&self) -> f64 {
        self.rho_half_width
    }
}

/// ρ = Π_p (1 − R_p/p^k) as a rational bracket `(lo, hi)` of width ≤ `tol`.
pub fn rho(cfg: &TupleConfig, tol: f64) -> Result<(Rat, Rat)> {
    let (lo, hi, _) = rho_bracket(cfg, tol)?;
    Ok((f64_to_rat(lo), f64_to_rat(hi)))
}

/// Bracket for ρ computed from the rapidly convergent form
/// `ρ = ζ(k)^{−r} · Π_p (1 − R_p/p^k)(1 − p^{−k})^{−r}`.
///
/// For `p^k > h_r` the factor is `(1 − r·u)/(1 − u)^r` with `u = p^{−k}`,
/// whose logarithm lies in `[−(r u)²/(2(1 − r u)), 0]`; summed over `p > P`
/// with `Σ_{n>P} n^{−2k} ≤ P^{1−2k}/(2k−1)` this bounds the tail.
fn rho_bracket(cfg: &TupleConfig, tol: f64) -> Result<(f64, f64, u64)> {
    require_admissible(cfg)?;
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::Precision(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    if tol < RHO_MIN_RELATIVE_TOL {
        return Err(Error::Precision(format!(
            "tolerance {tol:e} is below the double-precision floor {RHO_MIN_RELATIVE_TOL:e}"
        )));
    }
    let k = cfg.k();
    let r = cfg.r() as f64;
    let kf = k as f64;
    let mut p_max = (crate::sieve::integer_root(cfg.h_max(), k) + 1).max(1000);
    let tail = |p: f64| {
        r * r * p.powf(1.0 - 2.0 * kf) / ((2.0 * kf - 1.0) * 2.0 * (1.0 - r * p.powf(-kf)))
    };
    while tail(p_max as f64) > tol / 8.0 {
        p_max *= 2;
    }
    let primes = primes_up_to(p_max);
    let mut log_sum = 0.0;
    for &p in &primes {
        let lr = local_residues(cfg, p);
        let u = (p as f64).powf(-kf);
        log_sum += (-(lr.big_r as f64) * u).ln_1p() - r * (-u).ln_1p();
    }
    let (z_lo, z_hi) = zeta_int_bracket(k);
    let mid = log_sum - r * (0.5 * (z_lo + z_hi)).ln();
    let zeta_err = r * (z_hi - z_lo) / z_lo;
    let float_err = 4.0 * f64::EPSILON * (primes.len() as f64 + 10.0);
    let lo = (mid - tail(p_max as f64) - zeta_err - float_err).exp() * (1.0 - 1e-15);
    let hi = (mid + zeta_err + float_err).exp() * (1.0 + 1e-15);
    Ok((lo, hi, p_max))
}

/// Bracket for ρ from the plain truncated product `Π_{p ≤ P}(1 − R_p/p^k)`,
/// with the tail over `p > P` bounded on the logarithm through
/// `Σ_{p>P} r·p^{−k} ≤ r·P^{1−k}/(k−1)`.
pub fn rho_direct(cfg: &TupleConfig, p_max: u64) -> Result<(f64, f64)> {
    require_admissible(cfg)?;
    let k = cfg.k() as f64;
    let r = cfg.r() as f64;
    let p_max = p_max.max(crate::sieve::integer_root(cfg.h_max(), cfg.k()) + 1);
    let primes = primes_up_to(p_max);
    let mut log_sum = 0.0;
    for &p in &primes {
        let lr = local_residues(cfg, p);
        log_sum += (-(lr.big_r as f64) * (p as f64).powf(-k)).ln_1p();
    }
    let pm = p_max as f64;
    let tail = r * pm.powf(1.0 - k) / ((k - 1.0) * (1.0 - r * pm.powf(-k)));
    let float_err = 4.0 * f64::EPSILON * primes.len() as f64;
    Ok((
        (log_sum - tail - float_err).exp(),
        (log_sum + float_err).exp(),
    ))
}

/// `g(q,ν) = (1/q) Σ_{d|q} G(d) Ψ_d(ν)`, exact (the Gauss-sum route).
pub fn g_exact(cfg: &TupleConfig, q: u64, a: u64) -> Rat {
    let f = factorize(q);
    let nu = (a % q) as i64;
    let mut s = rat(0, 1);
    for d in divisors_of(&f) {
        let fd = factorize(d);
        let g = gauss_g_factored(cfg, &fd);
        if g != rat(0, 1) {
            s += g * Rat::from_integer(BigInt::from(psi_d_factored(cfg, &fd, nu)));
        }
    }
    s / Rat::from_integer(BigInt::from(q))
}

/// Local data of `g` at one prime power `p^v ∥ q`.
#[derive(Debug, Clone)]
struct LocalDensity {
    /// `p^v`.
    pv: u64,
    /// `p^{min(v,k)}`.
    pj: u64,
    /// `1/(1 − R_p/p^k)` exactly, as `p^k/(p^k − R_p)`.
    norm: Rat,
    /// `p^{−v}`.
    a_term: Rat,
    /// `p^{−max(v,k)}`.
    b_term: Rat,
    /// For each residue `c mod p^{min(v,k)}`: the number of distinct shift
    /// residues `H mod p^k` with `H ≡ −c (mod p^{min(v,k)})`.
    classes: Vec<u64>,
}

impl LocalDensity {
    fn new(cfg: &TupleConfig, p: u64, v: u32) -> Self {
        let k = cfg.k();
        let lr = local_residues(cfg, p);
        let pk = BigInt::from(lr.pk);
        let j = v.min(k);
        let pj = p.pow(j);
        let mut classes = vec![0u64; pj as usize];
        for &h in &lr.residues {
            let c = (pj as u128 - h % pj as u128) % pj as u128;
            classes[c as usize] += 1;
        }
        let big = |e: u32| BigInt::from(p).pow(e);
        Self {
            pv: p.pow(v),
            pj,
            norm: Rat::new(pk.clone(), pk - BigInt::from(lr.big_r)),
            a_term: Rat::new(BigInt::from(1), big(v)),
            b_term: Rat::new(BigInt::from(1), big(v.max(k))),
            classes,
        }
    }

    /// The local factor `[p^{−v} − N_p(c)·p^{−max(v,k)}]/(1 − R_p/p^k)` at
    /// the residue `c mod p^v`.
    fn value(&self, c: u64) -> Rat {
        let n = self.classes[(c % self.pj) as usize];
        (&self.a_term - &self.b_term * Rat::from_integer(BigInt::from(n))) * &self.norm
    }

    fn table(&self) -> Vec<f64> {
        (0..self.pv).map(|c| rat_to_f64(&self.value(c))).collect()
    }
}

fn local_densities(cfg: &TupleConfig, f: &Factorization) -> Vec<LocalDensity> {
    f.factors
        .iter()
        .map(|&(p, v)| LocalDensity::new(cfg, p, v))
        .collect()
}

/// `g(q,a)` from the Euler factorisation of the defining Möbius sum: the
/// sum over squarefree `d_1, …, d_r` splits into local factors, which equal
/// `1 − R_p/p^k` for `p ∤ q` and
/// `p^{−v} − #{H mod p^k : H ≡ −a (mod p^{min(v,k)})}·p^{−max(v,k)}`
/// for `p^v ∥ q`. Dividing by ρ leaves a finite product.
pub fn g_local(cfg: &TupleConfig, q: u64, a: u64) -> Rat {
    local_densities(cfg, &factorize(q))
        .iter()
        .fold(rat(1, 1), |acc, ld| acc * ld.value(a % ld.pv))
}

/// The exact row `g(q, ·)` indexed by residue `a mod q` (Euler-factor route).
pub fn g_row_exact(cfg: &TupleConfig, q: u64) -> Vec<Rat> {
    let lds = local_densities(cfg, &factorize(q));
    let tables: Vec<Vec<Rat>> = lds
        .iter()
        .map(|ld| (0..ld.pv).map(|c| ld.value(c)).collect())
        .collect();
    (0..q)
        .map(|a| {
            lds.iter()
                .zip(&tables)
                .fold(rat(1, 1), |acc, (ld, t)| acc * &t[(a % ld.pv) as usize])
        })
        .collect()
}

/// The row `g(q, ·)` in double precision, built from per-prime tables in
/// `O(q·ω(q))` operations.
pub fn g_row_f64(cfg: &TupleConfig, q: u64) -> Vec<f64> {
    let lds = local_densities(cfg, &factorize(q));
    let tables: Vec<(u64, Vec<f64>)> = lds.iter().map(|ld| (ld.pv, ld.table())).collect();
    (0..q)
        .map(|a| tables.iter().map(|(pv, t)| t[(a % pv) as usize]).product())
        .collect()
}

/// Which formula [`eta`] evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EtaMode {
    /// The defining Möbius sum over `d_1, …, d_r`, evaluated through its
    /// Euler factorisation.
    Direct,
    /// ρ times the Gauss-sum inversion `g_exact`.
    Gauss,
}

/// `η(q,a) = ρ·g(q,a)` carried as the exact rational `g` and the ρ-bracket.
#[derive(Debug, Clone, PartialEq)]
pub struct EtaValue {
    pub g: Rat,
    pub rho_lo: f64,
    pub rho_hi: f64,
}

impl EtaValue {
    /// Midpoint value.
    pub fn value(&self) -> f64 {
        rat_to_f64(&self.g) * 0.5 * (self.rho_lo + self.rho_hi)
    }

    /// Enclosure `(lo, hi)` of the true value.
    pub fn bracket(&self) -> (f64, f64) {
        let g = rat_to_f64(&self.g);
        (g * self.rho_lo, g * self.rho_hi)
    }
}

/// η(q,a) by the selected route.
pub fn eta(ctx: &DensityContext, q: u64, a: u64, mode: EtaMode) -> EtaValue {
    let g = match mode {
        EtaMode::Direct => g_local(&ctx.cfg, q, a),
        EtaMode::Gauss => g_exact(&ctx.cfg, q, a),
    };
    EtaValue {
        g,
        rho_lo: rat_to_f64(&ctx.rho_lo),
        rho_hi: rat_to_f64(&ctx.rho_hi),
    }
}

/// The defining sum of η(q,a) over squarefree `d_1, …, d_r`, truncated at
/// `d_1⋯d_r ≤ y`: `Σ μ(d_1)⋯μ(d_r)·[compatible]/[q, d_1^k, …, d_r^k]`,
/// where compatibility is solvability of `n ≡ a (q)`, `n ≡ −h_i (d_i^k)`.
///
/// Converges slowly (the tail is of size about `y^{1−k}` up to logarithms);
/// it is kept as a literal oracle for small-scale checks.
pub fn eta_truncated(cfg: &TupleConfig, q: u64, a: u64, y: u64) -> Result<f64> {
    use crate::arith_core::{crt_solve, mobius, CongruenceSystem};
    let r = cfg.r();
    let k = cfg.k();
    let squarefree: Vec<u64> = (1..=y).filter(|&d| mobius(d) != 0).collect();
    let mut total = 0.0;
    let mut d = vec![1u64; r];
    fn rec(
        i: usize,
        prod: u64,
        d: &mut Vec<u64>,
        sf: &[u64],
        y: u64,
        visit: &mut dyn FnMut(&[u64]) -> Result<()>,
    ) -> Result<()> {
        if i == d.len() {
            return visit(d);
        }
        for &di in sf {
            if prod * di > y {
                break;
            }
            d[i] = di;
            rec(i + 1, prod * di, d, sf, y, visit)?;
        }
        Ok(())
    }
    let mut visit = |d: &[u64]| -> Result<()> {
        let sign: i64 = d.iter().map(|&di| mobius(di)).product();
        let mut residues = vec![a as i128];
        let mut moduli = vec![q as u128];
        for (i, &di) in d.iter().enumerate() {
            residues.push(-(cfg.h()[i] as i128));
            moduli.push((di as u128).pow(k));
        }
        if let Some((_, l)) = crt_solve(&CongruenceSystem::new(&residues, &moduli)?)? {
            total += sign as f64 / l as f64;
        }
        Ok(())
    };
    rec(0, 1, &mut d, &squarefree, y, &mut visit)?;
    Ok(total)
}

/// A row of η values indexed by residue `a mod q`.
#[derive(Debug, Clone, PartialEq)]
pub struct EtaRow {
    pub q: u64,
    pub values: Vec<f64>,
}

/// The row η(q, ·) (index `a mod q`; index 0 is the class of multiples of q).
pub fn eta_row(ctx: &DensityContext, q: u64) -> EtaRow {
    let rho = ctx.rho();
    EtaRow {
        q,
        values: g_row_f64(&ctx.cfg, q)
            .into_iter()
            .map(|g| g * rho)
            .collect(),
    }
}

/// `(1/q) Σ_{d|q} Φ(d) G(d)²` exactly; equals `Σ_a g(q,a)²`.
pub fn g_sq_sum_exact(cfg: &TupleConfig, q: u64) -> Rat {
    let f = factorize(q);
    let mut s = rat(0, 1);
    for d in divisors_of(&f) {
        let fd = factorize(d);
        let g = gauss_g_factored(cfg, &fd);
        s += &g * &g * Rat::from_integer(BigInt::from(phi_q_factored(cfg, &fd, 0)));
    }
    s / Rat::from_integer(BigInt::from(q))
}

/// `Σ_a η(q,a)² = (ρ²/q) Σ_{d|q} Φ(d) G(d)²`, via the multiplicative
/// structure of the divisor sum.
pub fn eta_sq_sum(ctx: &DensityContext, q: u64) -> f64 {
    let rho = ctx.rho();
    rho * rho * g_sq_sum_f64(&ctx.cfg, &factorize(q))
}

fn g_sq_sum_f64(cfg: &TupleConfig, f: &Factorization) -> f64 {
    let mut prod = 1.0;
    for &(p, v) in &f.factors {
        let mut local = 1.0;
        for j in 1..=v.min(cfg.k()) {
            let fj = Factorization {
                value: p.pow(j),
                factors: vec![(p, j)],
            };
            let g = rat_to_f64(&gauss_g_factored(cfg, &fj));
            local += phi_q_factored(cfg, &fj, 0) as f64 * g * g;
        }
        prod *= local;
    }
    prod / f.value as f64
}

/// `E_x(q,a) = #{n ≤ x : n ∈ ℛ, n ≡ a (q)} − η(q,a)·x`.
pub fn error_term(ctx: &DensityContext, set: &TupleSet, q: u64, a: u64) -> f64 {
    let count = crate::sieve::count_in_ap(set, q, a) as f64;
    count - rat_to_f64(&g_local(&ctx.cfg, q, a)) * ctx.rho() * set.x() as f64
}

/// V(x,Q) in exact rational arithmetic, with ρ replaced by the midpoint of
/// its bracket. Intended for `x ≤ 10⁴` as a calibration of the floating
/// routes.
pub fn variance_exact(ctx: &DensityContext, set: &TupleSet, q_max: u64) -> Rat {
    let rho = f64_to_rat(ctx.rho());
    let x = Rat::from_integer(BigInt::from(set.x()));
    let mut total = rat(0, 1);
    for q in 1..=q_max {
        let counts = set.residue_counts(q);
        for (c, g) in counts.iter().zip(g_row_exact(&ctx.cfg, q)) {
            let e = Rat::from_integer(BigInt::from(*c)) - &x * &rho * g;
            total += &e * &e;
        }
    }
    total
}

/// Pair-difference counts `D[δ] = #{n : n, n+δ ∈ ℛ ∩ [1,x]}` for
/// `0 ≤ δ ≤ x`, by FFT autocorrelation of the indicator of ℛ.
pub fn pair_difference_counts(set: &TupleSet) -> Result<Vec<u64>> {
    let x = set.x() as usize;
    let n = (2 * (x + 1)).next_power_of_two();
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for &m in set.members() {
        buf[m as usize] = Complex64::new(1.0, 0.0);
    }
    let mut planner = FftPlanner::<f64>::new();
    let fwd: Arc<dyn rustfft::Fft<f64>> = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    fwd.process(&mut buf);
    for v in buf.iter_mut() {
        *v = Complex64::new(v.norm_sqr(), 0.0);
    }
    inv.process(&mut buf);
    let scale = 1.0 / n as f64;
    let mut out = Vec::with_capacity(x + 1);
    let mut worst: f64 = 0.0;
    for v in buf.iter().take(x + 1) {
        let d = v.re * scale;
        let r = d.round();
        worst = worst.max((d - r).abs());
        out.push(r as u64);
    }
    if worst > 0.25 {
        return Err(Error::Precision(format!(
            "FFT autocorrelation rounding error {worst} too large to recover exact counts"
        )));
    }
    Ok(out)
}

/// V(x,Q) by expanding each square: `V_q = Σ_a c_a² − 2x Σ_a c_a η_a + x² Σ_a η_a²`.
///
/// * `Σ_a c_a² = |ℛ| + 2 Σ_{m ≥ 1} D[mq]` from the pair-difference counts.
/// * `Σ_a c_a η(q,a) = ρ Σ_{n∈ℛ} g(q,n)`; expanding the local factors of
///   `g` over subsets T of the primes of q gives
///   `Π_p norm_p · Σ_T Π_{p∉T} p^{−v} Π_{p∈T}(−p^{−max(v,k)}) · M(e_T)` with
///   `e_T = Π_{p∈T} p^{min(v,k)}` and `M(e)` a weighted count of members in
///   the CRT classes `n ≡ −H (mod p^{min(v,k)})`.
/// * `Σ_a η² = (ρ²/q)Σ_{d|q}Φ(d)G(d)²`.
///
/// Cost is `O(x log x)` for the FFT plus about `x·Σ_{e ≤ Q} r^{ω(e)}/e` for
/// the class counts, instead of `O(Q·|ℛ|)` for bucketing.
pub fn variance_spectral(
    ctx: &DensityContext,
    set: &TupleSet,
    q_max: u64,
    budget: &Budget,
) -> Result<VarianceReport> {
    let x = set.x();
    if q_max < 1 || q_max > x.max(1) {
        return Err(Error::Contract(format!(
            "need 1 <= Q <= x, got Q = {q_max}, x = {x}"
        )));
    }
    if x > budget.max_x || q_max > budget.max_q {
        return Err(Error::Resource(format!(
            "x = {x}, Q = {q_max} exceed the budget x <= {}, Q <= {}",
            budget.max_x, budget.max_q
        )));
    }
    let cfg = &ctx.cfg;
    let d = pair_difference_counts(set)?;
    let factorizations: Vec<Factorization> = (1..=q_max).map(factorize).collect();

    // Class-count weights M(e) for every e ≤ Q whose prime exponents are ≤ k.
    let k = cfg.k();
    let needed: Vec<u64> = factorizations
        .iter()
        .filter(|f| f.factors.iter().all(|&(_, e)| e <= k))
        .map(|f| f.value)
        .collect();
    let m_values: Vec<(u64, u64)> = needed
        .par_iter()
        .map(|&e| (e, class_weight(cfg, set, &factorizations[(e - 1) as usize])))
        .collect();
    let mut m_table = vec![0u64; (q_max + 1) as usize];
    for (e, m) in m_values {
        m_table[e as usize] = m;
    }

    let xf = x as f64;
    let rho = ctx.rho();
    let card = set.len() as f64;
    let per_q: Vec<f64> = factorizations
        .par_iter()
        .map(|f| {
            let q = f.value;
            let mut s1 = 0u64;
            let mut m = q as usize;
            while m <= x as usize {
                s1 += d[m];
                m += q as usize;
            }
            let s1 = card + 2.0 * s1 as f64;
            let lds = local_densities(cfg, f);
            let norm: f64 = lds.iter().map(|ld| rat_to_f64(&ld.norm)).product();
            let w = lds.len();
            let mut s2 = 0.0;
            for mask in 0u32..(1 << w) {
                let mut coef = 1.0;
                let mut e = 1u64;
                for (i, ld) in lds.iter().enumerate() {
                    if mask >> i & 1 == 1 {
                        coef *= -rat_to_f64(&ld.b_term);
                        e *= ld.pj;
                    } else {
                        coef *= rat_to_f64(&ld.a_term);
                    }
                }
                s2 += coef * m_table[e as usize] as f64;
            }
            let cross = rho * norm * s2;
            let sq = rho * rho * g_sq_sum_f64(cfg, f);
            s1 - 2.0 * xf * cross + xf * xf * sq
        })
        .collect();
    Ok(VarianceReport::from_per_q(x, per_q))
}

/// `M(e) = Σ_{n ∈ ℛ} Π_{p^j ∥ e} #{H mod p^k : H ≡ −n (mod p^j)}`.
fn class_weight(cfg: &TupleConfig, set: &TupleSet, f: &Factorization) -> u64 {
    use crate::arith_core::{crt_solve, CongruenceSystem};
    let k = cfg.k();
    // Per prime: the admissible residues mod p^j with their multiplicities.
    let locals: Vec<(u64, Vec<(u64, u64)>)> = f
        .factors
        .iter()
        .map(|&(p, j)| {
            let ld = LocalDensity::new(cfg, p, j.min(k));
            let classes = ld
                .classes
                .iter()
                .enumerate()
                .filter(|(_, &m)| m > 0)
                .map(|(c, &m)| (c as u64, m))
                .collect();
            (ld.pj, classes)
        })
        .collect();
    let mut total = 0u64;
    let mut idx = vec![0usize; locals.len()];
    loop {
        if locals.iter().any(|(_, cl)| cl.is_empty()) {
            return 0;
        }
        let mut weight = 1u64;
        let mut residues = Vec::with_capacity(locals.len());
        let mut moduli = Vec::with_capacity(locals.len());
        for (i, (pj, cl)) in locals.iter().enumerate() {
            let (c, m) = cl[idx[i]];
            weight *= m;
            residues.push(c as i128);
            moduli.push(*pj as u128);
        }
        let sys = CongruenceSystem::new(&residues, &moduli).expect("valid system");
        let (c, l) = crt_solve(&sys)
            .expect("small moduli")
            .expect("coprime moduli");
        total += weight * set.count_class(c as u64, l as u64);
        // Advance the mixed-radix index.
        let mut i = 0;
        loop {
            if i == locals.len() {
                return total;
            }
            idx[i] += 1;
            if idx[i] < locals[i].1.len() {
                break;
            }
            idx[i] = 0;
            i += 1;
        }
    }
}
