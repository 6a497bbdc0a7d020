//! The Z-expansion of a direction: the sequence of loops and separating
//! slits that successively minimize the sheared horizontal component.
//!
//! Fix a context `(λ, μ)` and an inverse slope `θ`.  Among all loops and
//! separating slits — the set `Z` — a vector is a *Z-convergent* of `θ`
//! when its `hor` value is minimal among all elements of `Z` of height at
//! most its own.  Listing the Z-convergents in increasing height order
//! gives the Z-expansion; along it heights strictly increase and `hor`
//! values strictly decrease, mirroring the classical continued fraction
//! convergents of a single real number.
//!
//! The enumeration is exhaustive, not a heuristic.  At each candidate
//! height the constrained minimizer of `hor` lies in an explicit
//! two-element window (details on the individual steps below), every
//! comparison is certified through [`Real`], and admission is the strict
//! improvement of the running minimum — exactly the incremental-minimum
//! kernel used for best approximation sequences, specialized to the
//! one-dimensional quantity `hor`.
//!
//! An exact `hor = 0` admission ends the expansion: the direction
//! contains a vector of `Z` and is not minimal, so no further
//! convergents exist.

use std::cmp::Ordering;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::One;
use rayon::prelude::*;
use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};

use super::{Context, Loop, Slit};
use crate::error::{Error, Result};
use crate::numerics::real::Real;
use crate::numerics::DEFAULT_BUDGET_BITS;

/// Growth-exponent threshold separating the two empirical regimes: a
/// height ratio exponent above this is flagged as Liouville-like.
pub const DEFAULT_GROWTH_THRESHOLD: f64 = 8.0;

/// An alternating tail must reach this length before the expansion is
/// reported as eventually alternating.  Heuristic: shorter tails arise
/// incidentally in generic expansions.
const MIN_ALTERNATING_TAIL: usize = 4;

/// Heights are scanned in chunks of this many integer levels; candidate
/// construction within a chunk is independent of the running minimum and
/// evaluates in parallel, while admission folds sequentially in height
/// order, keeping the result deterministic.
const CHUNK: u64 = 1024;

/// One element of `Z`: a loop or a separating slit.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind")]
pub enum ZElement {
    Loop(Loop),
    Slit(Slit),
}

/// An admitted Z-convergent with its exact height and `hor` value.
#[derive(Debug, Clone, PartialEq)]
pub struct ZEntry {
    pub element: ZElement,
    pub height: Real,
    pub hor: Real,
}

impl Serialize for ZEntry {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut s = serializer.serialize_struct("ZEntry", 5)?;
        s.serialize_field("element", &self.element)?;
        s.serialize_field("height", &self.height)?;
        s.serialize_field("height_approx", &self.height.approx_f64())?;
        s.serialize_field("hor", &self.hor)?;
        s.serialize_field("hor_approx", &self.hor.approx_f64())?;
        s.end()
    }
}

/// A Z-expansion up to a height cap.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZExpansion {
    pub entries: Vec<ZEntry>,
    pub height_max: u64,
    /// True when an exact `hor = 0` vector was reached: the direction
    /// lies in `Z` itself and the expansion is complete, not truncated.
    pub terminated: bool,
}

/// A height slot in the scan: the loop level `q = t`, or the slit level
/// `μ + t` (base slit for `t = 0`, even twists for even `t ≥ 2`).
#[derive(Clone, Copy)]
enum Slot {
    Loop(u64),
    Slit(u64),
}

/// The loop of height `q` minimizing `hor` among primitive vectors, or
/// `None` when no primitive vector at this height can beat any running
/// minimum.
///
/// For `q ≥ 1` write `y = q·θ`.  Any integer `p` with `|y − p| < 1`
/// equals `⌊y⌋` or `⌊y⌋ + 1`, so after the first admitted loop of height
/// 1 (whose `hor` is at most 1/2) only these two candidates can ever be
/// admitted; the coprimality filter then discards imprimitive ones.  If
/// both are discarded the true primitive minimum at this height is at
/// least 1 and can be skipped soundly.  An exactly integral `y` with
/// `gcd(y, q) > 1` cannot occur here: the reduced vector would have hit
/// `hor = 0` at a smaller height and ended the expansion.
fn loop_candidate(theta: &Real, q: u64, budget_bits: u32) -> Result<Option<(Loop, Real)>> {
    if q == 0 {
        // The only primitive vectors of height 0 are (±1, 0).
        let v = Loop::new(1, 0).expect("(1, 0) is primitive");
        let h = v.hor(theta);
        return Ok(Some((v, h)));
    }
    let qq = BigInt::from(q);
    let y = theta.mul(&Real::from_integer(qq.clone()));
    let f = y.floor(budget_bits)?;
    let mut best: Option<(Loop, Real)> = None;
    for p in [f.clone(), &f + 1] {
        if !p.gcd(&qq).is_one() {
            continue;
        }
        let v = Loop {
            p,
            q: qq.clone(),
        };
        let hor = v.hor(theta);
        best = match best {
            None => Some((v, hor)),
            // Strict improvement keeps the smaller numerator on ties.
            Some((bv, bh)) => match hor.compare(&bh, budget_bits)? {
                Ordering::Less => Some((v, hor)),
                _ => Some((bv, bh)),
            },
        };
    }
    Ok(best)
}

/// The separating slit of height `μ + e` minimizing `hor`.
///
/// At the base height (`e = 0`) the only separating slit is `(0, 0)`.
/// For even `e ≥ 2` write `y = (μ+e)·θ − λ`; the even twist `m`
/// minimizing `|y − m|` is one of the two even integers bracketing `y`,
/// namely `m₀ = 2⌊y/2⌋` and `m₀ + 2`.  There is no primitivity
/// constraint, so the constrained minimum is computed exactly.
fn slit_candidate(
    theta: &Real,
    context: &Context,
    e: u64,
    budget_bits: u32,
) -> Result<(Slit, Real)> {
    if e == 0 {
        let w = Slit::new(context, 0, 0).expect("base slit");
        let hor = w.hor(theta);
        return Ok((w, hor));
    }
    debug_assert!(e % 2 == 0);
    let y = context
        .mu()
        .add(&Real::from_integer(e))
        .mul(theta)
        .sub(context.lambda());
    let half = Real::from_rational(BigRational::new(BigInt::one(), BigInt::from(2)));
    let m0: BigInt = y.mul(&half).floor(budget_bits)? * 2;
    let mut best: Option<(Slit, Real)> = None;
    for m in [m0.clone(), &m0 + 2] {
        let w = Slit::new_separating(context, m, BigInt::from(e))
            .expect("even twists at positive even height");
        let hor = w.hor(theta);
        best = match best {
            None => Some((w, hor)),
            Some((bw, bh)) => match hor.compare(&bh, budget_bits)? {
                Ordering::Less => Some((w, hor)),
                _ => Some((bw, bh)),
            },
        };
    }
    Ok(best.expect("two candidates were examined"))
}

fn evaluate_slot(
    theta: &Real,
    context: &Context,
    slot: Slot,
    budget_bits: u32,
) -> Result<Option<(ZElement, Real, Real)>> {
    match slot {
        Slot::Loop(q) => Ok(loop_candidate(theta, q, budget_bits)?.map(|(v, hor)| {
            let height = Real::from_integer(BigInt::from(q));
            (ZElement::Loop(v), height, hor)
        })),
        Slot::Slit(e) => {
            let (w, hor) = slit_candidate(theta, context, e, budget_bits)?;
            let height = w.height();
            Ok(Some((ZElement::Slit(w), height, hor)))
        }
    }
}

pub fn z_expansion(theta: &Real, context: &Context, height_max: u64) -> Result<ZExpansion> {
    z_expansion_budget(theta, context, height_max, DEFAULT_BUDGET_BITS)
}

/// Compute the Z-expansion of `θ` in the given context, listing every
/// Z-convergent of height at most `height_max` (which must be at least
/// 1, so that the scan reaches past the trivial height-0 loop).
///
/// Height order interleaves the two families: for each integer level `t`
/// the loop slot `t` precedes the slit slot `μ + t ∈ (t, t+1)`, which
/// exists for even `t` and stays under the cap exactly when
/// `t + 1 ≤ height_max`.  Only the positive branch is scanned: mirrored
/// slits duplicate every height and `hor` value.
pub fn z_expansion_budget(
    theta: &Real,
    context: &Context,
    height_max: u64,
    budget_bits: u32,
) -> Result<ZExpansion> {
    if height_max < 1 {
        return Err(Error::Precondition(
            "the height cap must be at least 1".into(),
        ));
    }
    let mut entries: Vec<ZEntry> = Vec::new();
    let mut running: Option<Real> = None;
    let mut terminated = false;

    let mut t0 = 0u64;
    'scan: while t0 <= height_max {
        let t1 = height_max.min(t0 + CHUNK - 1);
        let slots: Vec<Slot> = (t0..=t1)
            .flat_map(|t| {
                let mut s = vec![Slot::Loop(t)];
                if t % 2 == 0 && t + 1 <= height_max {
                    s.push(Slot::Slit(t));
                }
                s
            })
            .collect();
        let candidates: Vec<Result<Option<(ZElement, Real, Real)>>> = slots
            .par_iter()
            .map(|slot| evaluate_slot(theta, context, *slot, budget_bits))
            .collect();
        for candidate in candidates {
            let Some((element, height, hor)) = candidate? else {
                continue;
            };
            let admit = match &running {
                None => true,
                Some(min) => hor.compare(min, budget_bits)? == Ordering::Less,
            };
            if admit {
                let exact_hit = hor.is_zero();
                running = Some(hor.clone());
                entries.push(ZEntry {
                    element,
                    height,
                    hor,
                });
                if exact_hit {
                    terminated = true;
                    break 'scan;
                }
            }
        }
        t0 = t1 + 1;
    }

    Ok(ZExpansion {
        entries,
        height_max,
        terminated,
    })
}

/// Which empirical growth regime the height sequence exhibits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum GrowthTag {
    /// Height ratio exponents stay bounded: the expansion grows like a
    /// badly-approximable direction's.
    DiophantineLike,
    /// Some height jumps super-polynomially relative to its predecessor.
    LiouvilleLike,
}

/// Growth diagnostics of a height sequence.  The exponents are
/// floating-point heuristics for inspection, not certified quantities;
/// the classification compares them against an explicit threshold.
#[derive(Debug, Clone, Serialize)]
pub struct GrowthReport {
    /// `ln(h_{k+1}) / ln(h_k)` for consecutive heights.
    pub exponents: Vec<f64>,
    pub max_exponent: f64,
    pub threshold: f64,
    pub tag: GrowthTag,
}

/// Classify a strictly increasing sequence of at least three heights,
/// each above 1 (their logarithms are compared, so the base must be
/// positive).
pub fn classify_heights(heights: &[f64], threshold: f64) -> Result<GrowthReport> {
    if heights.len() < 3 {
        return Err(Error::Precondition(format!(
            "growth classification needs at least 3 heights above 1, got {}",
            heights.len()
        )));
    }
    if heights[0] <= 1.0 {
        return Err(Error::Precondition(
            "growth classification needs heights above 1".into(),
        ));
    }
    for w in heights.windows(2) {
        if w[0] >= w[1] {
            return Err(Error::Precondition(
                "growth classification needs strictly increasing heights".into(),
            ));
        }
    }
    let exponents: Vec<f64> = heights.windows(2).map(|w| w[1].ln() / w[0].ln()).collect();
    let max_exponent = exponents.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let tag = if max_exponent > threshold {
        GrowthTag::LiouvilleLike
    } else {
        GrowthTag::DiophantineLike
    };
    Ok(GrowthReport {
        exponents,
        max_exponent,
        threshold,
        tag,
    })
}

/// Classify the growth of a Z-expansion's heights.  Entries of height at
/// most 1 (the initial loop, the base slit, the height-1 loop) are
/// excluded exactly; at least three must remain.
pub fn classify_rel_z(
    expansion: &ZExpansion,
    threshold: f64,
    budget_bits: u32,
) -> Result<GrowthReport> {
    let one = BigRational::one();
    let mut heights = Vec::new();
    for entry in &expansion.entries {
        if entry.height.cmp_rational(&one, budget_bits)? == Ordering::Greater {
            heights.push(entry.height.approx_f64());
        }
    }
    classify_heights(&heights, threshold)
}

/// The maximal alternating suffix of a Z-expansion.
#[derive(Debug, Clone, PartialEq)]
pub struct AlternationReport {
    /// Index of the first entry of the maximal suffix in which loop and
    /// slit entries strictly alternate.
    pub tail_start: usize,
    pub tail_len: usize,
    /// Heuristic flag: the alternating tail spans at least
    /// `MIN_ALTERNATING_TAIL` entries.
    pub eventually_alternating: bool,
    /// Number of slit-followed-by-loop pairs in the suffix.
    pub pair_count: usize,
    /// Exact partial sum `Σ |w_j × v_j|` over those pairs, the quantity
    /// whose convergence controls non-ergodicity of the direction.
    pub cross_sum: Real,
}

impl Serialize for AlternationReport {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut s = serializer.serialize_struct("AlternationReport", 6)?;
        s.serialize_field("tail_start", &self.tail_start)?;
        s.serialize_field("tail_len", &self.tail_len)?;
        s.serialize_field("eventually_alternating", &self.eventually_alternating)?;
        s.serialize_field("pair_count", &self.pair_count)?;
        s.serialize_field("cross_sum", &self.cross_sum)?;
        s.serialize_field("cross_sum_approx", &self.cross_sum.approx_f64())?;
        s.end()
    }
}

fn is_slit(entry: &ZEntry) -> bool {
    matches!(entry.element, ZElement::Slit(_))
}

/// Locate the maximal alternating loop/slit suffix and accumulate the
/// cross products of its slit-followed-by-loop pairs.
pub fn alternation_report(expansion: &ZExpansion) -> AlternationReport {
    let entries = &expansion.entries;
    let n = entries.len();
    let mut start = n.saturating_sub(1);
    while start > 0 && is_slit(&entries[start - 1]) != is_slit(&entries[start]) {
        start -= 1;
    }
    let tail_len = n - start;
    let mut cross_sum = Real::zero();
    let mut pair_count = 0usize;
    for i in start..n.saturating_sub(1) {
        if let (ZElement::Slit(w), ZElement::Loop(v)) = (&entries[i].element, &entries[i + 1].element)
        {
            let (wx, wy) = w.holonomy();
            let (vx, vy) = v.holonomy();
            cross_sum = cross_sum.add(&super::cross((&wx, &wy), (&vx, &vy)));
            pair_count += 1;
        }
    }
    AlternationReport {
        tail_start: start,
        tail_len,
        eventually_alternating: tail_len >= MIN_ALTERNATING_TAIL,
        pair_count,
        cross_sum,
    }
}
