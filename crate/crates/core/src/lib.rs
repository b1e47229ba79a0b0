//! Variance of k-free r-tuples in arithmetic progressions.
//!
//! The crate computes, exactly or with certified tolerances, every object in
//! the study of
//!
//! ```text
//! V(x,Q) = Σ_{q≤Q} Σ_{a=1}^{q} E_x(q,a)²,   E_x(q,a) = #{n ≤ x : n ∈ ℛ, n ≡ a (q)} − η(q,a)·x,
//! ```
//!
//! where ℛ = {n : n + h_i is k-free for i = 1..r}:
//!
//! * [`arith_core`] — factorisation, Möbius, totient, Ramanujan sums, CRT.
//! * [`sieve`] — k-free sieving, tuple enumeration, congruence counting and
//!   brute-force V(x,Q).
//! * [`gauss_sums`] — the Gauss sums G(q), H(q,a), G_ℛ(q,a), p-local
//!   convolutions and the Φ/Ψ families.
//! * [`density`] — ρ, g(q,a), η(q,a), E_x(q,a) and the exact and spectral
//!   variance routes.
//! * [`circle`] — Farey dissection and the exponential sums of the circle
//!   method.
//! * [`analytic`] — ζ, the Dirichlet series of the main term, its Euler
//!   factors and the residue polynomial P of the asymptotic
//!   `V(x,Q) ~ Q²(x/Q)^{1/k} P(log(x/Q))`.

pub mod analytic;
pub mod arith_core;
pub mod circle;
pub mod density;
pub mod error;
pub mod gauss_sums;
pub mod sieve;

pub use arith_core::{CongruenceSystem, Factorization, Rat};
pub use density::{DensityContext, EtaMode, EtaRow, EtaValue};
pub use error::{Error, Result};
pub use gauss_sums::{ComplexVal, LocalPoint, PLocalGauss};
pub use sieve::{Budget, KfreeBitmap, LocalResidues, TupleConfig, TupleSet, VarianceReport};
