//! Per-denominator minimization kernel for simultaneous approximation.
//!
//! For one fixed positive integer `q` the kernel finds the lattice point
//! `(p1, p2)` minimizing `N(q·x − p)` in the chosen norm, with ties broken
//! lexicographically on `(p1, p2)`.  Each `q` is independent, so a sequence
//! scan can evaluate many denominators in parallel and merge incumbents
//! sequentially afterwards; all accept/reject decisions stay exact.
//!
//! The hot path never touches rational arithmetic: the target components
//! are enclosed once in fixed-point integers at scale `2^SCALE_BITS`, and
//! per-`q` screening works on integer intervals (squared values for the
//! euclidean-type norms, so no roots appear).  Candidates whose screening
//! intervals overlap are separated exactly through the symbolic layer; an
//! overlap that resists the precision budget (possible only for ball
//! inputs) surfaces as `Undecidable` rather than being guessed.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::error::Result;
use crate::numerics::norm::Norm;
use crate::numerics::real::Real;
use crate::numerics::{isqrt, RatInterval};

/// Fixed-point scale of the screening arithmetic.
const SCALE_BITS: usize = 96;

/// Shared data for a sequence scan over many denominators.
pub(crate) struct SeqContext {
    pub x1: Real,
    pub x2: Real,
    /// Outward fixed-point enclosures of the components at `2^SCALE_BITS`.
    s1: (BigInt, BigInt),
    s2: (BigInt, BigInt),
    pub norm: Norm,
    pub budget_bits: u32,
    /// The norm-equivalence constant `C′` as an integer fraction.
    cp_num: BigInt,
    cp_den: BigInt,
    /// Integer-cleared quadratic-form coefficients, when applicable.
    qf: Option<(BigInt, BigInt, BigInt)>,
    /// Whether screening values are squared norms (scale `2^(2·SCALE_BITS)`).
    squared: bool,
}

fn scaled_outward(iv: &RatInterval) -> (BigInt, BigInt) {
    let scale = BigRational::from_integer(BigInt::one() << SCALE_BITS);
    (
        (iv.lo() * &scale).floor().to_integer(),
        (iv.hi() * &scale).ceil().to_integer(),
    )
}

impl SeqContext {
    pub fn new(x1: &Real, x2: &Real, norm: &Norm, budget_bits: u32) -> Result<Self> {
        norm.validate()?;
        let s1 = scaled_outward(&x1.enclose_best(SCALE_BITS as u32));
        let s2 = scaled_outward(&x2.enclose_best(SCALE_BITS as u32));
        let cp = norm.equiv_upper();
        let qf = match norm {
            Norm::QuadForm { a, b, c, .. } => {
                let l = a.denom().lcm(b.denom()).lcm(c.denom());
                let lr = BigRational::from_integer(l);
                let clear = |r: &BigRational| (r * &lr).to_integer();
                Some((clear(a), clear(b), clear(c)))
            }
            _ => None,
        };
        Ok(SeqContext {
            x1: x1.clone(),
            x2: x2.clone(),
            s1,
            s2,
            norm: norm.clone(),
            budget_bits,
            cp_num: cp.numer().clone(),
            cp_den: cp.denom().clone(),
            qf,
            squared: matches!(norm, Norm::L2 | Norm::QuadForm { .. }),
        })
    }

    /// Screening interval of the norm of `(dx, dy)` (fixed-point integer
    /// component intervals).  Linear norms return values at the component
    /// scale; euclidean-type norms return squared values.
    fn screen(&self, dx: &(BigInt, BigInt), dy: &(BigInt, BigInt)) -> (BigInt, BigInt) {
        let ax = abs_iv(dx);
        let ay = abs_iv(dy);
        match &self.norm {
            Norm::Sup => (ax.0.max(ay.0), ax.1.max(ay.1)),
            Norm::L1 => (ax.0 + ay.0, ax.1 + ay.1),
            Norm::L2 => {
                let sx = square_iv(&ax);
                let sy = square_iv(&ay);
                (sx.0 + sy.0, sx.1 + sy.1)
            }
            Norm::QuadForm { .. } => {
                let (a, b, c) = self.qf.as_ref().expect("cleared coefficients");
                let sx = scale_iv(&square_iv(&abs_iv(dx)), a);
                let sy = scale_iv(&square_iv(&abs_iv(dy)), c);
                let cross = scale_iv(&mul_iv(dx, dy), b);
                let lo = sx.0 + sy.0 + cross.0;
                let hi = sx.1 + sy.1 + cross.1;
                // The true value is a nonnegative norm square; a negative
                // lower endpoint is interval slack.
                (lo.max(BigInt::zero()), hi)
            }
        }
    }

    /// Sup-box radius (component scale) covering every lattice point that
    /// could achieve a norm value within the screening bound `e_hi`.
    fn box_radius(&self, e_hi: &BigInt) -> BigInt {
        let linear = if self.squared {
            // e_hi is a squared value at scale 2^(2·SCALE_BITS): take an
            // upper integer square root to return to the component scale.
            // (For a cleared quadratic form the extra factor L ≥ 1 only
            // enlarges the root, which keeps the box an over-cover.)
            BigInt::from(isqrt(e_hi.magnitude())) + 1
        } else {
            e_hi.clone()
        };
        // ceil(C′ · linear) + 1 (outward slack).
        (&self.cp_num * linear).div_ceil(&self.cp_den) + 1
    }
}

fn abs_iv(v: &(BigInt, BigInt)) -> (BigInt, BigInt) {
    if !v.0.is_negative() {
        v.clone()
    } else if !v.1.is_positive() {
        (-&v.1, -&v.0)
    } else {
        (BigInt::zero(), (-&v.0).max(v.1.clone()))
    }
}

/// Interval of `t²` over a nonnegative interval.
fn square_iv(a: &(BigInt, BigInt)) -> (BigInt, BigInt) {
    (&a.0 * &a.0, &a.1 * &a.1)
}

/// Interval product of two signed integer intervals.
fn mul_iv(a: &(BigInt, BigInt), b: &(BigInt, BigInt)) -> (BigInt, BigInt) {
    let p = [&a.0 * &b.0, &a.0 * &b.1, &a.1 * &b.0, &a.1 * &b.1];
    let lo = p.iter().min().expect("nonempty").clone();
    let hi = p.into_iter().max().expect("nonempty");
    (lo, hi)
}

/// Scale an interval by a signed integer.
fn scale_iv(v: &(BigInt, BigInt), c: &BigInt) -> (BigInt, BigInt) {
    if c.is_negative() {
        (&v.1 * c, &v.0 * c)
    } else {
        (&v.0 * c, &v.1 * c)
    }
}

/// Floor of `x / 2^SCALE_BITS` (arithmetic shift).
fn floor_scaled(x: &BigInt) -> BigInt {
    x >> SCALE_BITS
}

/// Ceiling of `x / 2^SCALE_BITS`.
fn ceil_scaled(x: &BigInt) -> BigInt {
    -((-x) >> SCALE_BITS)
}

/// The minimizing lattice point at one denominator, carrying the exact
/// error components `d_i = q·x_i − p_i` and the integer screening interval
/// of the norm value for fast incumbent comparison.
pub(crate) struct QMinimum {
    pub q: BigInt,
    pub p1: BigInt,
    pub p2: BigInt,
    pub d1: Real,
    pub d2: Real,
    screen: (BigInt, BigInt),
}

/// Minimize `N(q·x − p)` over integer `(p1, p2)` for one denominator.
///
/// For the separable norms (sup, l1, l2 — no cross term) the minimizing
/// `p_i` is an integer adjacent to `q·x_i`, so the candidate set is the
/// tiny per-coordinate product.  A quadratic form with a cross term
/// couples the coordinates; there the candidate box is derived from a
/// corner upper bound via the norm-equivalence constant.
pub(crate) fn minimize_at_q(ctx: &SeqContext, q: &BigInt) -> Result<QMinimum> {
    debug_assert!(q.is_positive());
    // Fixed-point enclosures of q·x_i.
    let c1 = (&ctx.s1.0 * q, &ctx.s1.1 * q);
    let c2 = (&ctx.s2.0 * q, &ctx.s2.1 * q);

    let (cands1, cands2) = if ctx.qf.is_none() {
        (coord_candidates(ctx, &c1)?, coord_candidates(ctx, &c2)?)
    } else {
        // Seed upper bound from the four rounded corners.
        let seeds1 = [floor_scaled(&c1.0), floor_scaled(&c1.1) + 1];
        let seeds2 = [floor_scaled(&c2.0), floor_scaled(&c2.1) + 1];
        let mut e_hi: Option<BigInt> = None;
        for s1 in &seeds1 {
            for s2 in &seeds2 {
                let dx = shift_by(&c1, s1);
                let dy = shift_by(&c2, s2);
                let (_, hi) = ctx.screen(&dx, &dy);
                if e_hi.as_ref().map_or(true, |e| hi < *e) {
                    e_hi = Some(hi);
                }
            }
        }
        let radius = ctx.box_radius(&e_hi.expect("seed set is nonempty"));
        (
            int_range(ceil_scaled(&(&c1.0 - &radius)), floor_scaled(&(&c1.1 + &radius))),
            int_range(ceil_scaled(&(&c2.0 - &radius)), floor_scaled(&(&c2.1 + &radius))),
        )
    };

    let mut best: Option<(BigInt, BigInt, (BigInt, BigInt))> = None;
    for p1 in &cands1 {
        let dx = shift_by(&c1, p1);
        for p2 in &cands2 {
            let dy = shift_by(&c2, p2);
            let iv = ctx.screen(&dx, &dy);
            let better = match &best {
                None => true,
                Some((bp1, bp2, biv)) => {
                    if iv.0 > biv.1 {
                        false
                    } else if iv.1 < biv.0 {
                        true
                    } else {
                        // Overlap: separate exactly through the symbolic
                        // layer (tie → lexicographic).
                        exact_better(ctx, q, (p1, p2), (bp1, bp2))?
                    }
                }
            };
            if better {
                best = Some((p1.clone(), p2.clone(), iv));
            }
        }
    }
    let (p1, p2, screen) = best.expect("candidate box always contains the minimizer");
    let (d1, d2) = components(ctx, q, &p1, &p2);
    Ok(QMinimum {
        q: q.clone(),
        p1,
        p2,
        d1,
        d2,
        screen,
    })
}

/// Integers adjacent to the enclosed value `c / 2^SCALE_BITS`: everything
/// from `⌊lo⌋` to `⌊hi⌋ + 1`.  For exact inputs the enclosure is a few
/// ulps wide and this is 2–3 candidates; a decimal ball wide enough to
/// span many integers at this denominator cannot be minimized decidably,
/// which is reported honestly.
fn coord_candidates(ctx: &SeqContext, c: &(BigInt, BigInt)) -> Result<Vec<BigInt>> {
    let f_lo = floor_scaled(&c.0);
    let f_hi = floor_scaled(&c.1);
    if &f_hi - &f_lo > BigInt::from(16) {
        return Err(crate::error::Error::undecidable(
            "the input enclosure spans too many lattice cells at this denominator",
            ctx.budget_bits,
        ));
    }
    Ok(int_range(f_lo, f_hi + 1))
}

fn int_range(lo: BigInt, hi: BigInt) -> Vec<BigInt> {
    let mut v = Vec::new();
    let mut p = lo;
    while p <= hi {
        v.push(p.clone());
        p += 1;
    }
    v
}

fn shift_by(c: &(BigInt, BigInt), p: &BigInt) -> (BigInt, BigInt) {
    let s = p << SCALE_BITS;
    (&c.0 - &s, &c.1 - &s)
}

fn components(ctx: &SeqContext, q: &BigInt, p1: &BigInt, p2: &BigInt) -> (Real, Real) {
    let qr = Real::from_integer(q.clone());
    (
        ctx.x1.mul(&qr).sub(&Real::from_integer(p1.clone())),
        ctx.x2.mul(&qr).sub(&Real::from_integer(p2.clone())),
    )
}

/// Exact verdict: does candidate `(p1, p2)` strictly improve on the
/// incumbent at the same `q`, or supersede it lexicographically at exactly
/// equal error?
fn exact_better(
    ctx: &SeqContext,
    q: &BigInt,
    cand: (&BigInt, &BigInt),
    inc: (&BigInt, &BigInt),
) -> Result<bool> {
    let (cd1, cd2) = components(ctx, q, cand.0, cand.1);
    let (id1, id2) = components(ctx, q, inc.0, inc.1);
    Ok(
        match ctx
            .norm
            .compare((&cd1, &cd2), (&id1, &id2), ctx.budget_bits)?
        {
            std::cmp::Ordering::Less => true,
            std::cmp::Ordering::Greater => false,
            std::cmp::Ordering::Equal => (cand.0, cand.1) < (inc.0, inc.1),
        },
    )
}

/// Compare a candidate minimum against the running incumbent of the
/// sequence scan.  Returns `Less` when the candidate's error is strictly
/// smaller (the sequence admission test), using integer screening first
/// and exact norm comparison only on overlap.
pub(crate) fn cmp_incumbent(
    ctx: &SeqContext,
    cand: &QMinimum,
    inc: &QMinimum,
) -> Result<std::cmp::Ordering> {
    if cand.screen.0 > inc.screen.1 {
        return Ok(std::cmp::Ordering::Greater);
    }
    if cand.screen.1 < inc.screen.0 {
        return Ok(std::cmp::Ordering::Less);
    }
    ctx.norm
        .compare((&cand.d1, &cand.d2), (&inc.d1, &inc.d2), ctx.budget_bits)
}
