//! Simultaneous best approximation of a planar vector under a pluggable
//! norm, nearest rational affine lines, and the slow-series analyzer built
//! on top of the resulting denominator sequences.
//!
//! A *best approximation vector* for `x = (x1, x2)` is a triple
//! `(p1, p2, q)` with `q ≥ 1` and `gcd(p1, p2, q) = 1` such that
//!
//! (i) `‖q·x − p‖ < ‖q′·x − p′‖` for every `(p′, q′)` with `1 ≤ q′ < q`,
//! (ii) `‖q·x − p‖ ≤ ‖q·x − p′‖` for every integer vector `p′`,
//!
//! where `‖·‖` is the chosen norm. The sequence of all such triples,
//! ordered by `q`, has strictly decreasing errors. When several `p`
//! minimize at the same `q`, the lexicographically smallest `(p1, p2)` is
//! kept; this fixed choice is licensed by the defining conditions, which
//! only constrain the error value.
//!
//! All admission decisions are made exactly: quadratic-integer inputs are
//! compared symbolically through squared norm values, and decimal-ball
//! inputs either separate within the precision budget or the scan reports
//! an honest `Undecidable` rather than guessing.

pub mod lines;
pub mod pm;

pub(crate) mod kernel;

use std::cmp::Ordering;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed};
use rayon::prelude::*;
use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::numerics::norm::Norm;
use crate::numerics::real::Real;
use crate::numerics::{RatInterval, DEFAULT_BUDGET_BITS};

use kernel::{cmp_incumbent, minimize_at_q, QMinimum, SeqContext};

/// Chunk size for the parallel scan over denominators.  Each chunk is
/// minimized in parallel and merged into the incumbent sequentially, so
/// memory stays bounded and results are independent of the partitioning.
const CHUNK: u64 = 2048;

/// One best approximation vector `(p1, p2, q)` with its exact error
/// `‖q·x − p‖`.
#[derive(Debug, Clone)]
pub struct BestApprox {
    pub p1: BigInt,
    pub p2: BigInt,
    pub q: BigInt,
    pub err: Real,
}

impl BestApprox {
    /// A certified enclosure of the error, for display and screening.
    pub fn err_interval(&self, bits: u32) -> RatInterval {
        self.err.enclose_best(bits)
    }
}

impl Serialize for BestApprox {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("BestApprox", 5)?;
        st.serialize_field("p1", &self.p1.to_string())?;
        st.serialize_field("p2", &self.p2.to_string())?;
        st.serialize_field("q", &self.q.to_string())?;
        st.serialize_field("err", &self.err)?;
        st.serialize_field("err_approx", &self.err.approx_f64())?;
        st.end()
    }
}

fn check_qmax(q_max: u64) -> Result<()> {
    if q_max == 0 {
        return Err(Error::Precondition("q_max must be at least 1".into()));
    }
    Ok(())
}

/// All best approximation vectors of `x` with denominator at most `q_max`,
/// in increasing `q`, under the default precision budget.
pub fn best_approx_sequence(
    x: (&Real, &Real),
    norm: &Norm,
    q_max: u64,
) -> Result<Vec<BestApprox>> {
    best_approx_sequence_budget(x, norm, q_max, DEFAULT_BUDGET_BITS)
}

/// As [`best_approx_sequence`], with an explicit precision budget.
///
/// Denominators are scanned in fixed-size chunks; all minimizations inside
/// a chunk run in parallel (they are independent), and admission against
/// the running incumbent is sequential, so the output is deterministic and
/// identical for any thread count.
pub fn best_approx_sequence_budget(
    x: (&Real, &Real),
    norm: &Norm,
    q_max: u64,
    budget_bits: u32,
) -> Result<Vec<BestApprox>> {
    check_qmax(q_max)?;
    let ctx = SeqContext::new(x.0, x.1, norm, budget_bits)?;
    let mut out: Vec<BestApprox> = Vec::new();
    let mut incumbent: Option<QMinimum> = None;

    let mut lo = 1u64;
    while lo <= q_max {
        let hi = lo.saturating_add(CHUNK - 1).min(q_max);
        let minima: Vec<Result<QMinimum>> = (lo..=hi)
            .into_par_iter()
            .map(|q| minimize_at_q(&ctx, &BigInt::from(q)))
            .collect();
        for m in minima {
            let m = m?;
            let admit = match &incumbent {
                None => true,
                Some(inc) => cmp_incumbent(&ctx, &m, inc)? == Ordering::Less,
            };
            if admit {
                let terminal = m.d1.is_zero() && m.d2.is_zero();
                out.push(finish(&ctx, &m)?);
                incumbent = Some(m);
                if terminal {
                    // Exact hit: nothing can strictly improve on error 0.
                    return Ok(out);
                }
            }
        }
        lo = hi.saturating_add(1);
    }
    Ok(out)
}

/// Convert an admitted kernel minimum into the public record, normalizing
/// the triple to `gcd(p1, p2, q) = 1`.
///
/// For an admitted triple the gcd is automatically 1: if `d` divided all
/// three, then `(p/d, q/d)` would have error `err/d < err`, contradicting
/// admission against the incumbent at the smaller denominator — except at
/// the very first admitted `q`, where the scaled-down triple would have
/// been admitted first.  The division is kept as a defensive
/// normalization; the debug assertion documents the expectation.
fn finish(ctx: &SeqContext, m: &QMinimum) -> Result<BestApprox> {
    let g = m.p1.gcd(&m.p2).gcd(&m.q);
    debug_assert!(g.is_one(), "admitted best-approximation triple is primitive");
    let err = ctx.norm.eval(&m.d1, &m.d2)?;
    Ok(BestApprox {
        p1: &m.p1 / &g,
        p2: &m.p2 / &g,
        q: &m.q / &g,
        err,
    })
}

/// Decide whether `(p1, p2, q)` is a best approximation vector of `x`.
///
/// `context` may carry an already-computed sequence for `x` (same norm);
/// its last entry below `q` then serves as the incumbent for condition
/// (i), replacing a fresh scan over all `q′ < q`.
pub fn is_best_approx(
    x: (&Real, &Real),
    norm: &Norm,
    p1: &BigInt,
    p2: &BigInt,
    q: &BigInt,
    context: Option<&[BestApprox]>,
    budget_bits: u32,
) -> Result<bool> {
    if !q.is_positive() {
        return Err(Error::Precondition("q must be a positive integer".into()));
    }
    let g = p1.gcd(p2).gcd(q);
    if !g.is_one() {
        return Err(Error::Precondition(format!(
            "gcd(p1, p2, q) must be 1, got {g}"
        )));
    }
    let ctx = SeqContext::new(x.0, x.1, norm, budget_bits)?;
    let d1 = x
        .0
        .mul(&Real::from_integer(q.clone()))
        .sub(&Real::from_integer(p1.clone()));
    let d2 = x
        .1
        .mul(&Real::from_integer(q.clone()))
        .sub(&Real::from_integer(p2.clone()));

    // Condition (ii): weak minimality at q itself.
    let min_q = minimize_at_q(&ctx, q)?;
    if norm.compare((&d1, &d2), (&min_q.d1, &min_q.d2), budget_bits)? == Ordering::Greater {
        return Ok(false);
    }

    // Condition (i): strict dominance over every smaller denominator.  It
    // suffices to beat the smallest minimum among q′ < q.
    let incumbent: Option<(Real, Real)> = match context {
        Some(seq) => seq
            .iter()
            .rev()
            .find(|b| &b.q < q)
            .map(|b| incumbent_components(x, b)),
        None => {
            let mut best: Option<QMinimum> = None;
            let mut qq = BigInt::one();
            while &qq < q {
                let m = minimize_at_q(&ctx, &qq)?;
                let better = match &best {
                    None => true,
                    Some(b) => cmp_incumbent(&ctx, &m, b)? == Ordering::Less,
                };
                if better {
                    best = Some(m);
                }
                qq += 1;
            }
            best.map(|b| (b.d1, b.d2))
        }
    };
    match incumbent {
        None => Ok(true), // no q′ < q: condition (i) holds vacuously
        Some((e1, e2)) => {
            Ok(norm.compare((&d1, &d2), (&e1, &e2), budget_bits)? == Ordering::Less)
        }
    }
}

fn incumbent_components(x: (&Real, &Real), b: &BestApprox) -> (Real, Real) {
    (
        x.0.mul(&Real::from_integer(b.q.clone()))
            .sub(&Real::from_integer(b.p1.clone())),
        x.1.mul(&Real::from_integer(b.q.clone()))
            .sub(&Real::from_integer(b.p2.clone())),
    )
}

/// Sufficient test that `p/q` yields a best approximation vector:
/// `‖x − p/q‖ < 1/(2q²)` in the chosen norm.
pub fn thm210_predicate(
    x: (&Real, &Real),
    p1: &BigInt,
    p2: &BigInt,
    q: &BigInt,
    norm: &Norm,
    budget_bits: u32,
) -> Result<bool> {
    if !q.is_positive() {
        return Err(Error::Precondition("q must be a positive integer".into()));
    }
    let g = p1.gcd(p2).gcd(q);
    if !g.is_one() {
        return Err(Error::Precondition(format!(
            "gcd(p1, p2, q) must be 1, got {g}"
        )));
    }
    let f1 = BigRational::new(p1.clone(), q.clone());
    let f2 = BigRational::new(p2.clone(), q.clone());
    let v1 = x.0.sub(&Real::from_rational(f1));
    let v2 = x.1.sub(&Real::from_rational(f2));
    let bound = BigRational::new(BigInt::one(), 2 * q * q);
    Ok(norm.compare_to_rational((&v1, &v2), &bound, budget_bits)? == Ordering::Less)
}

/// Per-pair outcome of the exact lower-bound check
/// `1/(2·q_{k+1}) ≤ ‖q_k·x − p_k‖` along a computed sequence.
#[derive(Debug, Clone, Serialize)]
pub struct LowerBoundCheck {
    pub k: usize,
    #[serde(serialize_with = "crate::numerics::serialize_bigint")]
    pub q: BigInt,
    #[serde(serialize_with = "crate::numerics::serialize_bigint")]
    pub next_q: BigInt,
    pub pass: bool,
}

/// Exact check of the two-sided consecutive-denominator bounds: for every
/// consecutive pair in a computed sequence, `1/(2·q_{k+1}) ≤ err_k`.
pub fn lower_bound_checks(
    seq: &[BestApprox],
    budget_bits: u32,
) -> Result<Vec<LowerBoundCheck>> {
    let mut out = Vec::new();
    for (k, pair) in seq.windows(2).enumerate() {
        let bound = BigRational::new(BigInt::one(), 2 * &pair[1].q);
        let pass = pair[0].err.cmp_rational(&bound, budget_bits)? != Ordering::Less;
        out.push(LowerBoundCheck {
            k: k + 1,
            q: pair[0].q.clone(),
            next_q: pair[1].q.clone(),
            pass,
        });
    }
    Ok(out)
}

/// The empirical maximum of `err_k · q_{k+1}^{1/2}` over a computed
/// sequence, as a certified enclosure.  No fixed constant is asserted;
/// this reports the observed scale of the upper bound.
pub fn empirical_upper_ratio(
    seq: &[BestApprox],
    bits: u32,
) -> Result<Option<RatInterval>> {
    let mut best: Option<RatInterval> = None;
    for pair in seq.windows(2) {
        let err_iv = pair[0].err.enclose_best(bits);
        let q_next = RatInterval::point(BigRational::from(pair[1].q.clone()));
        let ratio = err_iv.mul(&q_next.sqrt_outward(bits)?);
        if best.as_ref().map_or(true, |b| ratio.hi() > b.hi()) {
            best = Some(ratio);
        }
    }
    Ok(best)
}

/// Approximate error as `f64`, for ordering-free reporting only.
pub fn err_to_f64(b: &BestApprox) -> f64 {
    b.err.approx_f64()
}
