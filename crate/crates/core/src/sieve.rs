//! k-free sieving, tuple enumeration, congruence-solution counting and the
//! brute-force variance V(x,Q).

use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use rayon::prelude::*;

use crate::arith_core::{
    count_class_up_to, crt_solve, primes_up_to, rat, CompensatedSum, CongruenceSystem, Rat,
};
use crate::error::{Error, Result};

/// Size limits for the expensive computations.
///
/// The defaults are the desk-scale limits; callers that knowingly run larger
/// jobs raise them explicitly.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Budget {
    /// Largest `x` accepted by tuple enumeration and variance runs.
    pub max_x: u64,
    /// Largest `Q` accepted by variance runs.
    pub max_q: u64,
    /// Largest sieve limit (bits held in memory).
    pub max_sieve: u64,
}

impl Default for Budget {
    fn default() -> Self {
        Self {
            max_x: 10_000_000,
            max_q: 100_000,
            max_sieve: 100_000_000,
        }
    }
}

impl Budget {
    /// A budget that accepts any desk-scale request up to the given sizes.
    pub fn with_limits(max_x: u64, max_q: u64) -> Self {
        Self {
            max_x,
            max_q,
            ..Self::default()
        }
    }

    fn check_x(&self, x: u64) -> Result<()> {
        if x > self.max_x {
            return Err(Error::Resource(format!(
                "x = {x} exceeds the budget {}; try x <= {}",
                self.max_x, self.max_x
            )));
        }
        Ok(())
    }

    fn check_q(&self, x: u64, q: u64) -> Result<()> {
        self.check_x(x)?;
        if q > self.max_q {
            return Err(Error::Resource(format!(
                "Q = {q} exceeds the budget {}; try Q <= {}",
                self.max_q, self.max_q
            )));
        }
        Ok(())
    }
}

/// The problem instance: the power `k`, and the strictly increasing shift
/// vector `h = (h_1, …, h_r)` defining ℛ = {n : n + h_i is k-free for all i}.
#[derive(Debug, Clone, PartialEq)]
pub struct TupleConfig {
    k: u32,
    h: Vec<u64>,
    frak_c: f64,
}

impl TupleConfig {
    /// Validates `k ≥ 2`, `r ≥ 1` and strict monotonicity of `h`.
    ///
    /// Admissibility is *not* required here so that inadmissible
    /// configurations can be built and diagnosed; every density or variance
    /// computation checks it separately.
    pub fn new(k: u32, h: &[u64]) -> Result<Self> {
        if k < 2 {
            return Err(Error::Config(format!("k must be at least 2, got {k}")));
        }
        if h.is_empty() {
            return Err(Error::Config("the shift vector h must be non-empty".into()));
        }
        if h.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config(format!(
                "h must be strictly increasing, got {h:?}"
            )));
        }
        let r = h.len();
        let frak_c = if r <= 2 { 0.5 } else { 2.0 / 3.0 };
        Ok(Self {
            k,
            h: h.to_vec(),
            frak_c,
        })
    }

    /// Overrides the moment exponent 𝔠, which must lie in `[1/2, 1)`.
    pub fn with_frak_c(mut self, c: f64) -> Result<Self> {
        if !(0.5..1.0).contains(&c) {
            return Err(Error::Config(format!(
                "frak_c must lie in [1/2, 1), got {c}"
            )));
        }
        self.frak_c = c;
        Ok(self)
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn r(&self) -> usize {
        self.h.len()
    }

    pub fn h(&self) -> &[u64] {
        &self.h
    }

    /// Largest shift `h_r`.
    pub fn h_max(&self) -> u64 {
        *self.h.last().expect("non-empty")
    }

    /// θ = 1/k.
    pub fn theta(&self) -> Rat {
        rat(1, self.k as i64)
    }

    /// Δ = 2/(k+1).
    pub fn delta(&self) -> Rat {
        rat(2, self.k as i64 + 1)
    }

    /// The moment exponent 𝔠 (configuration metadata; default 1/2 for r ≤ 2,
    /// 2/3 otherwise).
    pub fn frak_c(&self) -> f64 {
        self.frak_c
    }

    /// `p^k` saturated at `u128::MAX`.
    pub fn pk(&self, p: u64) -> u128 {
        (p as u128).saturating_pow(self.k)
    }

    /// Primes `p` with `p^k ≤ h_r`: the only primes at which the local data
    /// can differ from the generic `R_p = r`.
    pub fn small_primes(&self) -> Vec<u64> {
        primes_up_to(integer_root(self.h_max(), self.k))
    }
}

impl fmt::Display for TupleConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let h: Vec<String> = self.h.iter().map(|v| v.to_string()).collect();
        write!(f, "k={}, h=({})", self.k, h.join(","))
    }
}

/// Largest integer `m` with `m^k ≤ n`.
pub fn integer_root(n: u64, k: u32) -> u64 {
    if n == 0 {
        return 0;
    }
    let mut m = (n as f64).powf(1.0 / k as f64).round() as u64;
    while (m as u128).pow(k) > n as u128 {
        m -= 1;
    }
    while ((m + 1) as u128).pow(k) <= n as u128 {
        m += 1;
    }
    m
}

/// The distinct residues of the shifts modulo `p^k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LocalResidues {
    pub p: u64,
    /// `p^k`, saturated at `u128::MAX` for very large primes.
    pub pk: u128,
    /// Number of distinct residues `R_p`.
    pub big_r: usize,
    /// Sorted distinct residues `H_1 < … < H_R` in `[0, p^k)`.
    pub residues: Vec<u128>,
}

/// Reduces the shifts modulo `p^k`. When `p^k > h_r` no two shifts collide,
/// so `R_p = r`.
pub fn local_residues(cfg: &TupleConfig, p: u64) -> LocalResidues {
    let pk = cfg.pk(p);
    let mut residues: Vec<u128> = cfg.h.iter().map(|&h| h as u128 % pk).collect();
    residues.sort_unstable();
    residues.dedup();
    LocalResidues {
        p,
        pk,
        big_r: residues.len(),
        residues,
    }
}

/// A local obstruction `R_p = p^k` that makes ℛ (essentially) empty.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Obstruction {
    pub p: u64,
    pub k: u32,
    pub big_r: usize,
}

impl fmt::Display for Obstruction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "R_{} = {} = {}{}",
            self.p,
            self.big_r,
            self.p,
            superscript(self.k)
        )
    }
}

fn superscript(n: u32) -> String {
    const DIGITS: [char; 10] = ['⁰', '¹', '²', '³', '⁴', '⁵', '⁶', '⁷', '⁸', '⁹'];
    n.to_string()
        .chars()
        .map(|c| DIGITS[c.to_digit(10).expect("digit") as usize])
        .collect()
}

/// Finds the first prime with `R_p = p^k`, if any.
///
/// Only primes with `p^k ≤ h_r + 1` can obstruct. If `p^k > h_r` the shifts
/// are pairwise incongruent, so `R_p = r`; since the shifts are distinct
/// non-negative integers, `r ≤ h_r + 1`, and `r = p^k` is possible only when
/// `h = (0, 1, …, p^k − 1)`, i.e. `p^k = h_r + 1`. Every prime with
/// `p^k > h_r + 1` therefore has `R_p = r < p^k` automatically.
pub fn obstruction(cfg: &TupleConfig) -> Option<Obstruction> {
    primes_up_to(integer_root(cfg.h_max() + 1, cfg.k))
        .into_iter()
        .map(|p| local_residues(cfg, p))
        .find(|l| l.big_r as u128 >= l.pk)
        .map(|l| Obstruction {
            p: l.p,
            k: cfg.k,
            big_r: l.big_r,
        })
}

/// True iff `R_p < p^k` for every prime `p`.
pub fn admissible(cfg: &TupleConfig) -> bool {
    obstruction(cfg).is_none()
}

/// Returns a configuration error naming the obstructing prime power.
pub fn require_admissible(cfg: &TupleConfig) -> Result<()> {
    match obstruction(cfg) {
        None => Ok(()),
        Some(o) => Err(Error::Config(format!("{cfg} is not admissible: {o}"))),
    }
}

/// Bit vector of k-freeness flags for `0 ≤ n ≤ limit` (bit 0 is unset).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KfreeBitmap {
    limit: u64,
    words: Vec<u64>,
}

const SEGMENT_WORDS: usize = 1 << 14;

impl KfreeBitmap {
    pub fn limit(&self) -> u64 {
        self.limit
    }

    /// Flag for `n`; out-of-range arguments (including 0) are not k-free.
    pub fn is_set(&self, n: u64) -> bool {
        n >= 1 && n <= self.limit && (self.words[(n / 64) as usize] >> (n % 64)) & 1 == 1
    }

    /// Number of k-free integers in `[1, limit]`.
    pub fn count(&self) -> u64 {
        self.words.iter().map(|w| w.count_ones() as u64).sum()
    }

    /// Writes the bitmap: an 8-byte little-endian `limit` header followed by
    /// the flags as a little-endian bit vector (bit n is bit n%8 of byte n/8).
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        out.write_all(&self.limit.to_le_bytes())?;
        let nbytes = (self.limit / 8 + 1) as usize;
        let bytes: Vec<u8> = self
            .words
            .iter()
            .flat_map(|w| w.to_le_bytes())
            .take(nbytes)
            .collect();
        out.write_all(&bytes)?;
        out.flush()?;
        Ok(())
    }

    /// Reads a bitmap written by [`KfreeBitmap::save`].
    pub fn load(path: &Path) -> Result<Self> {
        let mut buf = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut buf)?;
        if buf.len() < 8 {
            return Err(Error::Io("bitmap file shorter than its header".into()));
        }
        let limit = u64::from_le_bytes(buf[..8].try_into().expect("8 bytes"));
        let body = &buf[8..];
        if body.len() as u64 != limit / 8 + 1 {
            return Err(Error::Io(format!(
                "bitmap body has {} bytes, expected {}",
                body.len(),
                limit / 8 + 1
            )));
        }
        let mut words = vec![0u64; (limit / 64 + 1) as usize];
        for (i, chunk) in body.chunks(8).enumerate() {
            let mut b = [0u8; 8];
            b[..chunk.len()].copy_from_slice(chunk);
            words[i] = u64::from_le_bytes(b);
        }
        Ok(Self { limit, words })
    }
}

/// Sieves the k-free integers up to `limit` under the default budget.
pub fn sieve_kfree(limit: u64, k: u32) -> Result<KfreeBitmap> {
    sieve_kfree_with_budget(limit, k, &Budget::default())
}

/// Sieves the k-free integers up to `limit`, segment-parallel.
pub fn sieve_kfree_with_budget(limit: u64, k: u32, budget: &Budget) -> Result<KfreeBitmap> {
    if limit > budget.max_sieve {
        return Err(Error::Resource(format!(
            "sieve limit {limit} exceeds the memory budget of {} flags",
            budget.max_sieve
        )));
    }
    let nwords = (limit / 64 + 1) as usize;
    let mut words = vec![u64::MAX; nwords];
    // Clear bit 0 and everything beyond `limit`.
    words[0] &= !1;
    let tail = (limit % 64) + 1;
    if tail < 64 {
        words[nwords - 1] &= (1u64 << tail) - 1;
    }
    let powers: Vec<u64> = primes_up_to(integer_root(limit, k))
        .into_iter()
        .map(|p| p.pow(k))
        .collect();
    words
        .par_chunks_mut(SEGMENT_WORDS)
        .enumerate()
        .for_each(|(seg, chunk)| {
            let lo = (seg * SEGMENT_WORDS * 64) as u64;
            let hi = lo + (chunk.len() * 64) as u64; // exclusive
            for &pk in &powers {
                let mut m = lo.div_ceil(pk).max(1) * pk;
                while m < hi {
                    let off = m - lo;
                    chunk[(off / 64) as usize] &= !(1u64 << (off % 64));
                    m += pk;
                }
            }
        });
    Ok(KfreeBitmap { limit, words })
}

/// The members of ℛ ∩ [1, x], as a sorted list and a membership bitmap.
#[derive(Debug, Clone)]
pub struct TupleSet {
    x: u64,
    members: Vec<u64>,
    bits: Vec<u64>,
}

impl TupleSet {
    pub fn x(&self) -> u64 {
        self.x
    }

    /// Sorted members of ℛ ∩ [1, x].
    pub fn members(&self) -> &[u64] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, n: u64) -> bool {
        n >= 1 && n <= self.x && (self.bits[(n / 64) as usize] >> (n % 64)) & 1 == 1
    }

    /// Number of members `n ≤ x` with `n ≡ c (mod m)`, by walking the class.
    pub fn count_class(&self, c: u64, m: u64) -> u64 {
        let mut n = c % m;
        if n == 0 {
            n = m;
        }
        let mut count = 0;
        while n <= self.x {
            count += (self.bits[(n / 64) as usize] >> (n % 64)) & 1;
            n += m;
        }
        count
    }

    /// Members `n ≤ t`.
    pub fn members_up_to(&self, t: u64) -> &[u64] {
        let end = self.members.partition_point(|&n| n <= t);
        &self.members[..end]
    }

    /// Residue counts `c[a] = #{n ∈ ℛ ∩ [1,x] : n ≡ a (mod q)}` for `a` in `[0, q)`.
    pub fn residue_counts(&self, q: u64) -> Vec<u64> {
        let mut counts = vec![0u64; q as usize];
        // Walk blocks [b, b+q) instead of dividing: the members are sorted.
        let mut base = 0u64;
        for &n in &self.members {
            while n >= base + q {
                base += q;
            }
            counts[(n - base) as usize] += 1;
        }
        counts
    }
}

/// Enumerates ℛ ∩ [1, x] under the default budget.
pub fn enumerate_tuples(cfg: &TupleConfig, x: u64) -> Result<TupleSet> {
    enumerate_tuples_with_budget(cfg, x, &Budget::default())
}

/// Enumerates ℛ ∩ [1, x]; `x = 0` yields the empty set.
pub fn enumerate_tuples_with_budget(
    cfg: &TupleConfig,
    x: u64,
    budget: &Budget,
) -> Result<TupleSet> {
    budget.check_x(x)?;
    let bitmap = sieve_kfree_with_budget(x + cfg.h_max(), cfg.k, budget)?;
    let mut members = Vec::new();
    let mut bits = vec![0u64; (x / 64 + 1) as usize];
    for n in 1..=x {
        if cfg.h.iter().all(|&h| bitmap.is_set(n + h)) {
            members.push(n);
            bits[(n / 64) as usize] |= 1 << (n % 64);
        }
    }
    Ok(TupleSet { x, members, bits })
}

/// Counts `n ∈ [1, t]` with `n ≡ −h_i (mod d_i^k)` for every `i`, and
/// optionally also `n ≡ a (mod q)`, by solving the system with the CRT.
pub fn count_congruence_solutions(
    cfg: &TupleConfig,
    d: &[u64],
    t: u64,
    extra: Option<(u64, u64)>,
) -> Result<u64> {
    if d.len() != cfg.r() {
        return Err(Error::Contract(format!(
            "expected {} moduli, got {}",
            cfg.r(),
            d.len()
        )));
    }
    let mut residues: Vec<i128> = cfg.h.iter().map(|&h| -(h as i128)).collect();
    let mut moduli = Vec::with_capacity(d.len() + 1);
    for &di in d {
        let m = (di as u128)
            .checked_pow(cfg.k)
            .ok_or_else(|| Error::Overflow(format!("{di}^{} overflows", cfg.k)))?;
        moduli.push(m);
    }
    if let Some((q, a)) = extra {
        residues.push(a as i128);
        moduli.push(q as u128);
    }
    let sys = CongruenceSystem::new(&residues, &moduli)?;
    Ok(match crt_solve(&sys)? {
        None => 0,
        Some((c, l)) => count_class_up_to(c, l, t),
    })
}

/// Number of members of ℛ ∩ [1, x] in the class `a mod q` (`a = q` is the
/// class of multiples of q).
pub fn count_in_ap(set: &TupleSet, q: u64, a: u64) -> u64 {
    set.count_class(a % q, q)
}

/// The variance V(x,Q) with its per-modulus contributions.
#[derive(Debug, Clone, PartialEq)]
pub struct VarianceReport {
    pub x: u64,
    pub q_max: u64,
    /// `per_q[q-1] = Σ_a E_x(q,a)²`.
    pub per_q: Vec<f64>,
    /// `V(x,Q) = Σ_q per_q`.
    pub total: f64,
}

impl VarianceReport {
    /// Assembles a report, summing the per-q terms in ascending q.
    pub fn from_per_q(x: u64, per_q: Vec<f64>) -> Self {
        let mut acc = CompensatedSum::new();
        for &v in &per_q {
            acc.add(v);
        }
        Self {
            x,
            q_max: per_q.len() as u64,
            total: acc.value(),
            per_q,
        }
    }

    /// Running totals `V(x,q)` for `q = 1..=Q`.
    pub fn cumulative(&self) -> Vec<f64> {
        let mut acc = CompensatedSum::new();
        self.per_q
            .iter()
            .map(|&v| {
                acc.add(v);
                acc.value()
            })
            .collect()
    }
}

/// V(x,Q) = Σ_{q≤Q} Σ_{a=1}^q (count_in_ap(q,a) − x·η(q,a))² by bucketing.
///
/// `eta_row(q)` must return η(q,·) indexed by residue `a mod q`. Work is
/// distributed over q; each per-q sum is compensated and accumulated in
/// ascending `a`, and the per-q results are combined in ascending q, so the
/// result does not depend on the thread count.
pub fn variance_brute<F>(
    set: &TupleSet,
    q_max: u64,
    budget: &Budget,
    eta_row: F,
) -> Result<VarianceReport>
where
    F: Fn(u64) -> Vec<f64> + Sync,
{
    let x = set.x;
    if q_max < 1 || q_max > x.max(1) {
        return Err(Error::Contract(format!(
            "need 1 <= Q <= x, got Q = {q_max}, x = {x}"
        )));
    }
    budget.check_q(x, q_max)?;
    let xf = x as f64;
    let per_q: Vec<f64> = (1..=q_max)
        .into_par_iter()
        .map(|q| {
            let counts = set.residue_counts(q);
            let eta = eta_row(q);
            let mut acc = CompensatedSum::new();
            // Residues in the order a = 1, …, q (a = q is residue 0).
            for a in 1..=q {
                let i = (a % q) as usize;
                let e = counts[i] as f64 - xf * eta[i];
                acc.add(e * e);
            }
            acc.value()
        })
        .collect();
    Ok(VarianceReport::from_per_q(x, per_q))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(k: u32, h: &[u64]) -> TupleConfig {
        TupleConfig::new(k, h).unwrap()
    }

    #[test]
    fn local_residue_examples() {
        let l = local_residues(&cfg(2, &[0, 1]), 2);
        assert_eq!((l.residues.clone(), l.big_r), (vec![0, 1], 2));
        let l = local_residues(&cfg(2, &[0, 4]), 2);
        assert_eq!((l.residues.clone(), l.big_r), (vec![0], 1));
        let l = local_residues(&cfg(2, &[0, 1, 2, 3]), 3);
        assert_eq!(l.big_r, 4);
    }

    #[test]
    fn admissibility_examples() {
        assert!(admissible(&cfg(2, &[0])));
        assert!(admissible(&cfg(2, &[0, 1])));
        let o = obstruction(&cfg(2, &[0, 1, 2, 3])).unwrap();
        assert_eq!(o.to_string(), "R_2 = 4 = 2²");
        assert!(admissible(&cfg(2, &[0, 1, 2])));
    }

    #[test]
    fn sieve_examples() {
        let b = sieve_kfree(10, 2).unwrap();
        let set: Vec<u64> = (1..=10).filter(|&n| b.is_set(n)).collect();
        assert_eq!(set, vec![1, 2, 3, 5, 6, 7, 10]);
        let b = sieve_kfree(8, 3).unwrap();
        assert!((1..8).all(|n| b.is_set(n)) && !b.is_set(8));
        let b = sieve_kfree(1, 2).unwrap();
        assert!(b.is_set(1) && b.count() == 1);
    }

    #[test]
    fn sieve_matches_trial_division_across_segments() {
        let limit = 3 * 64 * SEGMENT_WORDS as u64 + 77;
        let b = sieve_kfree(limit, 2).unwrap();
        let mut count = 0;
        for n in 1..=limit {
            let f = crate::arith_core::factorize(n);
            let sqfree = f.factors.iter().all(|&(_, e)| e < 2);
            if n % 9973 == 0 || n > limit - 200 {
                assert_eq!(b.is_set(n), sqfree, "n = {n}");
            }
            count += sqfree as u64;
        }
        assert_eq!(b.count(), count);
    }

    #[test]
    fn bitmap_round_trip() {
        let b = sieve_kfree(1000, 2).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bits.bin");
        b.save(&path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        assert_eq!(&bytes[..8], &1000u64.to_le_bytes());
        assert_eq!(bytes.len(), 8 + 1000 / 8 + 1);
        assert_eq!(KfreeBitmap::load(&path).unwrap(), b);
    }

    #[test]
    fn tuple_examples() {
        let s = enumerate_tuples(&cfg(2, &[0, 1]), 10).unwrap();
        assert_eq!(s.members(), &[1, 2, 5, 6, 10]);
        let s = enumerate_tuples(&cfg(2, &[0]), 10).unwrap();
        assert_eq!(s.members(), &[1, 2, 3, 5, 6, 7, 10]);
        assert!(enumerate_tuples(&cfg(2, &[0, 1]), 0).unwrap().is_empty());
    }

    #[test]
    fn congruence_count_examples() {
        let c = cfg(2, &[0, 1, 2]);
        assert_eq!(
            count_congruence_solutions(&c, &[1, 1, 1], 10, None).unwrap(),
            10
        );
        let c = cfg(2, &[0]);
        assert_eq!(count_congruence_solutions(&c, &[2], 10, None).unwrap(), 2);
        let c = cfg(2, &[0, 1]);
        assert_eq!(
            count_congruence_solutions(&c, &[2, 3], 100, None).unwrap(),
            3
        );
    }

    #[test]
    fn count_in_ap_examples() {
        let s = enumerate_tuples(&cfg(2, &[0, 1]), 10).unwrap();
        assert_eq!(count_in_ap(&s, 4, 1), 2);
        assert_eq!(count_in_ap(&s, 4, 3), 0);
        assert_eq!(count_in_ap(&s, 1, 1), s.len() as u64);
    }
}
