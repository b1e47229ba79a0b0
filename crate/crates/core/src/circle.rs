//! Farey dissection and the exponential sums of the circle method:
//! `f(α) = Σ_{n ≤ x, n ∈ ℛ} e(nα)`, `F(α) = Σ_{uv ≤ x, u ≤ Q} e(αuv)`,
//! `I(β) = ∫_1^x e(βt) dt`, `Δ_t(q,a)`, `J(α)` and `Ĵ(α)`.
//!
//! Evaluation points are written `α = a/q + β` so that the rational part of
//! every phase is reduced exactly before the exponential is taken.

use std::io::Write;
use std::sync::Arc;

use num_bigint::BigInt;
use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::arith_core::{format_f64, gcd, rat, rat_to_f64, Rat};
use crate::density::{eta_row, DensityContext};
use crate::error::{Error, Result};
use crate::gauss_sums::{e_frac, e_real, gauss_g_f64, gauss_h};
use crate::sieve::{enumerate_tuples_with_budget, Budget, TupleSet};

/// The arc of the Farey dissection around `a/q`, bounded by the mediants
/// with the neighbouring Farey fractions.
#[derive(Debug, Clone, PartialEq)]
pub struct FareyArc {
    pub a: u64,
    pub q: u64,
    pub left: Rat,
    pub right: Rat,
    /// `λ = 1/(qγ)`.
    pub lambda: Rat,
}

impl FareyArc {
    /// The Farey point `a/q`.
    pub fn center(&self) -> Rat {
        rat(self.a as i64, self.q as i64)
    }

    /// Arc length `right − left`.
    pub fn length(&self) -> Rat {
        &self.right - &self.left
    }

    /// Checks `(a/q − λ/2, a/q + λ/2) ⊆ [left, right] ⊆ (a/q − λ, a/q + λ)`
    /// with exact rational comparisons.
    pub fn sandwich_holds(&self) -> bool {
        let c = self.center();
        let half = &self.lambda / Rat::from_integer(BigInt::from(2));
        let inner = self.left <= &c - &half && &c + &half <= self.right;
        let outer = &c - &self.lambda < self.left && self.right < &c + &self.lambda;
        inner && outer
    }

    /// Offsets `(left − a/q, right − a/q)` as doubles.
    pub fn beta_range(&self) -> (f64, f64) {
        let c = self.center();
        (
            rat_to_f64(&(&self.left - &c)),
            rat_to_f64(&(&self.right - &c)),
        )
    }
}

/// The Farey dissection of order γ of the unit interval `[M, 1 + M]`,
/// `M = 1/(γ+1)` the mediant of `0/1` and `1/γ`.
///
/// There is one arc per Farey fraction in `(0, 1]`; the arc around `1/1`
/// straddles 1 and ends at `1 + M`, so the fraction `0/1 ≡ 1/1` is not
/// represented twice. The number of arcs is `Σ_{q ≤ γ} φ(q)`.
pub fn farey_dissect(gamma: u64) -> Vec<FareyArc> {
    assert!(gamma >= 1, "farey_dissect needs gamma >= 1");
    let g = gamma as i64;
    // Farey sequence of order γ on [0, 1] by the next-term recurrence.
    let mut seq: Vec<(i64, i64)> = vec![(0, 1), (1, g)];
    while *seq.last().expect("non-empty") != (1, 1) {
        let (a, b) = seq[seq.len() - 2];
        let (c, d) = seq[seq.len() - 1];
        let t = (g + b) / d;
        seq.push((t * c - a, t * d - b));
    }
    let mediant = |(a, b): (i64, i64), (c, d): (i64, i64)| rat(a + c, b + d);
    let n = seq.len();
    (1..n)
        .map(|i| {
            let (a, q) = seq[i];
            let left = mediant(seq[i - 1], seq[i]);
            let right = if i + 1 < n {
                mediant(seq[i], seq[i + 1])
            } else {
                // Right neighbour of 1/1 is 1 + 1/γ.
                mediant((1, 1), (g + 1, g))
            };
            FareyArc {
                a: a as u64,
                q: q as u64,
                left,
                right,
                lambda: rat(1, q * g),
            }
        })
        .collect()
}

/// Sum of arc lengths (exactly 1 for a dissection).
pub fn total_length(arcs: &[FareyArc]) -> Rat {
    arcs.iter().fold(rat(0, 1), |acc, arc| acc + arc.length())
}

/// An evaluation point `α = a/q + β`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub a: i64,
    pub q: u64,
    pub beta: f64,
}

impl Point {
    /// A purely real point `α = β`.
    pub fn real(alpha: f64) -> Self {
        Self {
            a: 0,
            q: 1,
            beta: alpha,
        }
    }

    /// The rational point `a/q`.
    pub fn rational(a: i64, q: u64) -> Self {
        Self { a, q, beta: 0.0 }
    }

    fn phase(&self, n: u64) -> Complex64 {
        let p = e_frac(self.a as i128 * n as i128, self.q as i128);
        if self.beta == 0.0 {
            p
        } else {
            p * e_real(n as f64 * self.beta)
        }
    }

    /// `−α`.
    pub fn neg(&self) -> Self {
        Self {
            a: -self.a,
            q: self.q,
            beta: -self.beta,
        }
    }
}

/// Immutable state for exponential-sum evaluations at one `(x, Q)`.
#[derive(Debug, Clone)]
pub struct ExpState {
    ctx: DensityContext,
    set: TupleSet,
    q_cap: u64,
    /// `dq[m] = #{u ≤ Q : u | m}` for `0 ≤ m ≤ x` (`dq[0]` unused).
    dq: Vec<u32>,
}

impl ExpState {
    /// Enumerates ℛ ∩ [1, x] and tabulates `D_Q(m)`.
    pub fn new(ctx: &DensityContext, x: u64, q_cap: u64, budget: &Budget) -> Result<Self> {
        let set = enumerate_tuples_with_budget(ctx.cfg(), x, budget)?;
        let mut dq = vec![0u32; (x + 1) as usize];
        for u in 1..=q_cap.min(x) {
            let mut m = u;
            while m <= x {
                dq[m as usize] += 1;
                m += u;
            }
        }
        Ok(Self {
            ctx: ctx.clone(),
            set,
            q_cap,
            dq,
        })
    }

    pub fn x(&self) -> u64 {
        self.set.x()
    }

    pub fn q_cap(&self) -> u64 {
        self.q_cap
    }

    pub fn ctx(&self) -> &DensityContext {
        &self.ctx
    }

    pub fn set(&self) -> &TupleSet {
        &self.set
    }

    /// `D_Q(m)` for `1 ≤ m ≤ x`.
    pub fn divisor_count(&self, m: u64) -> u32 {
        self.dq[m as usize]
    }
}

/// `f(α) = Σ_{n ≤ x, n ∈ ℛ} e(nα)`.
pub fn f_alpha(state: &ExpState, alpha: &Point) -> Complex64 {
    state.set.members().iter().map(|&n| alpha.phase(n)).sum()
}

/// `F(α) = Σ_{m ≤ x} D_Q(m) e(αm)`.
pub fn big_f_alpha(state: &ExpState, alpha: &Point) -> Complex64 {
    (1..=state.x())
        .filter(|&m| state.dq[m as usize] > 0)
        .map(|m| alpha.phase(m) * state.dq[m as usize] as f64)
        .sum()
}

/// `I(β) = ∫_1^x e(βt) dt = e(β(x+1)/2)·sin(πβ(x−1))/(πβ)`, which is
/// `(e(βx) − e(β))/(2πiβ)` written without cancellation; `I(0) = x − 1`.
pub fn i_beta(x: f64, beta: f64) -> Complex64 {
    if beta == 0.0 {
        return Complex64::new(x - 1.0, 0.0);
    }
    let pb = std::f64::consts::PI * beta;
    e_real(beta * (x + 1.0) / 2.0) * ((pb * (x - 1.0)).sin() / pb)
}

/// `S(q,a) = Σ_ν e(aν/q) η(q,ν)`, the slope of the linear part of `Δ_t`.
pub fn eta_fourier(state: &ExpState, q: u64, a: i64) -> Complex64 {
    eta_row(&state.ctx, q)
        .values
        .iter()
        .enumerate()
        .map(|(nu, &v)| e_frac(a as i128 * nu as i128, q as i128) * v)
        .sum()
}

/// `Δ_t(q,a) = Σ_ν e(aν/q) E_t(q,ν) = Σ_{n ≤ t, n ∈ ℛ} e(an/q) − t·S(q,a)`.
pub fn delta_t(state: &ExpState, t: u64, q: u64, a: i64) -> Complex64 {
    let jumps: Complex64 = state
        .set
        .members_up_to(t)
        .iter()
        .map(|&n| e_frac(a as i128 * n as i128, q as i128))
        .sum();
    jumps - eta_fourier(state, q, a) * t as f64
}

/// `Ĵ(α) = e(xβ)Δ_x(q,a) + J(α)`, `J(α) = −2πiβ ∫_1^x e(βt) Δ_t(q,a) dt`,
/// with `a/q` the centre of `arc` and `β = α − a/q`.
///
/// The integral is evaluated exactly: each member `n` contributes the jump
/// `e(an/q)·∫_n^x e(βt) dt`, so `−2πiβ` times it is
/// `−e(an/q)(e(βx) − e(βn))`; the linear part `−t·S` contributes
/// `S·(x e(βx) − e(β) − I(β))`.
pub fn j_hat(state: &ExpState, arc: &FareyArc, beta: f64) -> Complex64 {
    let (q, a) = (arc.q, arc.a as i64);
    let x = state.x() as f64;
    let s = eta_fourier(state, q, a);
    let ebx = e_real(beta * x);
    let mut jump = Complex64::new(0.0, 0.0);
    let mut total = Complex64::new(0.0, 0.0);
    for &n in state.set.members() {
        let c = e_frac(a as i128 * n as i128, q as i128);
        total += c;
        jump -= c * (ebx - e_real(beta * n as f64));
    }
    let delta_x = total - s * x;
    let linear = s * (ebx * x - e_real(beta) - i_beta(x, beta));
    ebx * delta_x + jump + linear
}

/// Residuals of the decomposition `f(α) = ρ G(q) H(q,a) I(β) + Ĵ(α)`.
#[derive(Debug, Clone, PartialEq)]
pub struct IdentityA {
    pub a: u64,
    pub q: u64,
    pub beta: f64,
    /// `|f − ρGH·I − Ĵ|` exactly as the decomposition is written.
    pub literal_residual: f64,
    /// `|ρGH·e(β)|`, the boundary term of partial summation from `t = 1`.
    pub boundary_term: f64,
    /// `|f − ρGH·(I + e(β)) − Ĵ|`.
    pub residual: f64,
}

/// Evaluates both sides of the decomposition at `α = a/q + β`.
///
/// Partial summation over `[1, x]` gives exactly
/// `f(α) = ρGH·(I(β) + e(β)) + Ĵ(α)`; the extra `ρGH·e(β)` comes from the
/// lower limit of `∫_1^x t·d(e(βt))`. `residual` tests this exact form and
/// `literal_residual − boundary_term` documents the size of the term.
pub fn identity_a(state: &ExpState, arc: &FareyArc, beta: f64) -> Result<IdentityA> {
    let (q, a) = (arc.q, arc.a as i64);
    let x = state.x() as f64;
    let alpha = Point { a, q, beta };
    let f = f_alpha(state, &alpha);
    let gh = gauss_h(state.ctx.cfg(), q, a)? * gauss_g_f64(state.ctx.cfg(), q) * state.ctx.rho();
    let jh = j_hat(state, arc, beta);
    let literal = f - gh * i_beta(x, beta) - jh;
    let boundary = gh * e_real(beta);
    Ok(IdentityA {
        a: arc.a,
        q,
        beta,
        literal_residual: literal.norm(),
        boundary_term: boundary.norm(),
        residual: (literal - boundary).norm(),
    })
}

/// Deterministic sample of `count` (arc, β) pairs spread over the
/// dissection: arcs at evenly spaced indices, β at golden-ratio fractions of
/// each arc's width.
pub fn sample_arc_points(arcs: &[FareyArc], count: usize) -> Vec<(FareyArc, f64)> {
    const GOLDEN: f64 = 0.618_033_988_749_894_8;
    (0..count)
        .map(|i| {
            let arc = arcs[(i * arcs.len()) / count.max(1)].clone();
            let (lo, hi) = arc.beta_range();
            let u = ((i + 1) as f64 * GOLDEN).fract();
            let beta = lo + (hi - lo) * u;
            (arc, beta)
        })
        .collect()
}

/// One line of a magnitude-probe report.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeRow {
    pub bound_id: String,
    pub x: u64,
    pub gamma: u64,
    pub lhs: f64,
    pub rhs_shape: f64,
    pub fitted_c: f64,
}

impl ProbeRow {
    fn new(bound_id: String, x: u64, gamma: u64, lhs: f64, rhs_shape: f64) -> Self {
        Self {
            bound_id,
            x,
            gamma,
            lhs,
            rhs_shape,
            fitted_c: lhs / rhs_shape,
        }
    }
}

/// Writes probe rows as CSV `bound_id,x,gamma,lhs,rhs_shape,fitted_C`.
pub fn write_probe_csv<W: Write>(rows: &[ProbeRow], out: &mut W) -> Result<()> {
    writeln!(out, "bound_id,x,gamma,lhs,rhs_shape,fitted_C")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.bound_id,
            r.x,
            r.gamma,
            format_f64(r.lhs),
            format_f64(r.rhs_shape),
            format_f64(r.fitted_c)
        )?;
    }
    Ok(())
}

/// Largest order accepted by [`minor_arc_probe`] (keeps the sampling grid
/// at most 2²⁴ points).
pub const PROBE_MAX_GAMMA: u64 = 1024;

/// Values of a trigonometric polynomial `Σ_n c_n e(nα)` at `α = j/N`.
fn grid_values(coeffs: impl Iterator<Item = (u64, f64)>, n: usize) -> Vec<Complex64> {
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for (m, c) in coeffs {
        buf[(m % n as u64) as usize] += c;
    }
    let mut planner = FftPlanner::<f64>::new();
    let inv: Arc<dyn rustfft::Fft<f64>> = planner.plan_fft_inverse(n);
    inv.process(&mut buf);
    buf
}

/// Measured left-hand sides of the bounds (B)–(F) with their right-hand
/// shapes and the fitted constants `lhs/rhs`.
///
/// Integrals over arcs are Riemann sums on a uniform grid `j/N` with
/// `N ≥ 16γ²`, so every arc holds at least eight grid points; `f` and `F`
/// are sampled by FFT and `Ĵ` is evaluated from the exact decomposition
/// `Ĵ = f − ρGH(I + e(β))`.
pub fn minor_arc_probe(state: &ExpState, gamma: u64) -> Result<Vec<ProbeRow>> {
    let x = state.x();
    if x > 100_000 {
        return Err(Error::Resource(format!(
            "probe scale is x <= 10^5, got {x}"
        )));
    }
    if gamma == 0 || gamma > PROBE_MAX_GAMMA {
        return Err(Error::Resource(format!(
            "probe order must be in 1..={PROBE_MAX_GAMMA}, got {gamma}"
        )));
    }
    let cfg = state.ctx.cfg();
    let xf = x as f64;
    let theta = 1.0 / cfg.k() as f64;
    let delta = 2.0 / (cfg.k() as f64 + 1.0);
    let n = (16 * gamma * gamma).next_power_of_two().max(4096) as usize;
    let f_grid = grid_values(state.set.members().iter().map(|&m| (m, 1.0)), n);
    let big_f_grid = grid_values((1..=x).map(|m| (m, state.dq[m as usize] as f64)), n);
    let rho = state.ctx.rho();
    let dx = 1.0 / n as f64;
    let mut rows = Vec::new();

    // (B) at β = 0.
    for q in [1u64, 2, 6, 12] {
        let mut s = Complex64::new(0.0, 0.0);
        for a in (1..=q).filter(|&a| gcd(a, q) == 1) {
            let h = gauss_h(cfg, q, a as i64)?;
            s += big_f_alpha(state, &Point::rational(-(a as i64), q)) * h.norm_sqr();
        }
        rows.push(ProbeRow::new(format!("B(q={q})"), x, gamma, s.norm(), xf));
    }

    let arcs = farey_dissect(gamma);
    let two_sqrt_x = 2.0 * xf.sqrt();
    let (mut c_sum, mut d_sum, mut e_sum) = (0.0, Complex64::new(0.0, 0.0), 0.0);
    for arc in &arcs {
        let lo = (rat_to_f64(&arc.left) * n as f64).ceil() as i64;
        let hi = (rat_to_f64(&arc.right) * n as f64).ceil() as i64;
        let centre = arc.a as f64 / arc.q as f64;
        let major = (arc.q as f64) <= two_sqrt_x;
        let gh = if major {
            gauss_h(cfg, arc.q, arc.a as i64)? * gauss_g_f64(cfg, arc.q)
        } else {
            Complex64::new(0.0, 0.0)
        };
        for j in lo..hi {
            let idx = j.rem_euclid(n as i64) as usize;
            let beta = j as f64 / n as f64 - centre;
            let f = f_grid[idx];
            let big_f_neg = big_f_grid[idx].conj();
            if major {
                let ib = i_beta(xf, beta);
                let jh = f - gh * rho * (ib + e_real(beta));
                c_sum += big_f_neg.norm() * jh.norm_sqr() * dx;
                d_sum += gh.conj() * big_f_neg * ib.conj() * jh * dx;
            } else {
                e_sum += big_f_neg.norm() * f.norm_sqr() * dx;
            }
        }
    }
    let g = gamma as f64;
    rows.push(ProbeRow::new(
        "C".into(),
        x,
        gamma,
        c_sum,
        xf.powf(1.0 + theta) + xf.powf(1.0 + 2.0 * delta) / g,
    ));
    rows.push(ProbeRow::new(
        "D".into(),
        x,
        gamma,
        d_sum.norm(),
        xf.powf(1.0 + delta) + g * xf.powf(0.5 + theta),
    ));
    rows.push(ProbeRow::new("E".into(), x, gamma, e_sum, xf * g));

    // (F) for small moduli: integrate over the unit interval centred at a/q
    // minus the arc.
    for q in [1u64, 2, 3] {
        if q > gamma {
            continue;
        }
        let mut s = 0.0;
        for arc in arcs.iter().filter(|arc| arc.q == q) {
            let (blo, bhi) = arc.beta_range();
            let centre = arc.a as f64 / q as f64;
            for (j, fj) in big_f_grid.iter().enumerate() {
                let mut beta = j as f64 / n as f64 - centre;
                beta -= beta.round();
                if beta >= blo && beta < bhi {
                    continue;
                }
                s += fj.norm() * i_beta(xf, beta).norm_sqr() * dx;
            }
        }
        rows.push(ProbeRow::new(
            format!("F(q={q})"),
            x,
            gamma,
            s,
            (q * q) as f64 * g * g,
        ));
    }
    Ok(rows)
}
