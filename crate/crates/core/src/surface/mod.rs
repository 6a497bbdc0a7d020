//! Holonomy combinatorics of the slit double torus: loops, slits,
//! separating slits, cross products, heights, Liouville convergents, and
//! the height-window diagnostics behind the dimension-zero analysis.
//!
//! The geometry: two marked points on a unit flat torus at horizontal
//! distance `λ` and vertical distance `μ`, and the double cover branched
//! over them.  Saddle connections joining a marked point to itself have
//! primitive integer holonomy (*loops*, the set `V0`); saddle connections
//! joining the two marked points have holonomy `(λ+m, μ+n)` (*slits*);
//! a slit separates the branched double cover into a pair of tori exactly
//! when `m` and `n` are both even (*separating slits*, the set `V2`).
//! The *height* of a vector is the absolute value of its y-coordinate —
//! an integer `|q|` for loops, the exact real `|μ+n|` for slits.
//!
//! Both slit families come in mirrored pairs `(±)` of equal height; the
//! mirrored branch duplicates every height and every `hor` value, so all
//! types here represent the positive branch only (`n ≥ 1`, or the base
//! slit `(0,0)`).
//!
//! All predicates are decided exactly through [`Real`] comparisons:
//! rational and quadratic data never fall back to floating point, and
//! uncertain decimal data reports an honest undecidable outcome instead
//! of guessing.

pub mod zexp;

use std::cmp::Ordering;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Pow, Signed, Zero};
use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};

use crate::bestapprox::BestApprox;
use crate::error::{Error, Result};
use crate::numerics::functions::ln_rational;
use crate::numerics::real::Real;
use crate::numerics::{RatInterval, DEFAULT_BUDGET_BITS};

/// The `(λ, μ)` pair defining the marked torus.  Validated once at
/// construction: both coordinates must lie strictly between 0 and 1.
/// (The marked points must have nonzero horizontal and vertical
/// displacement; any other representative of the same pair of points
/// differs by an integer twist, which only relabels `m` and `n`.)
#[derive(Debug, Clone, PartialEq)]
pub struct Context {
    lambda: Real,
    mu: Real,
}

impl Context {
    pub fn new(lambda: Real, mu: Real) -> Result<Self> {
        Self::new_budget(lambda, mu, DEFAULT_BUDGET_BITS)
    }

    pub fn new_budget(lambda: Real, mu: Real, budget_bits: u32) -> Result<Self> {
        let zero = BigRational::zero();
        let one = BigRational::one();
        for (name, value) in [("lambda", &lambda), ("mu", &mu)] {
            if value.cmp_rational(&zero, budget_bits)? != Ordering::Greater
                || value.cmp_rational(&one, budget_bits)? != Ordering::Less
            {
                return Err(Error::Domain(format!(
                    "{name} must lie strictly between 0 and 1; shift the marked \
                     points by an integer twist to normalize"
                )));
            }
        }
        Ok(Context { lambda, mu })
    }

    pub fn lambda(&self) -> &Real {
        &self.lambda
    }

    pub fn mu(&self) -> &Real {
        &self.mu
    }
}

impl Serialize for Context {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut s = serializer.serialize_struct("Context", 2)?;
        s.serialize_field("lambda", &self.lambda)?;
        s.serialize_field("mu", &self.mu)?;
        s.end()
    }
}

/// A loop holonomy: a primitive integer vector `(p, q)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Loop {
    p: BigInt,
    q: BigInt,
}

impl Loop {
    /// Requires `gcd(p, q) = 1`; in particular the zero vector is
    /// rejected.
    pub fn new(p: impl Into<BigInt>, q: impl Into<BigInt>) -> Result<Self> {
        let (p, q) = (p.into(), q.into());
        if !p.gcd(&q).is_one() {
            return Err(Error::Domain(format!(
                "a loop holonomy must be a primitive integer vector; ({p}, {q}) is not"
            )));
        }
        Ok(Loop { p, q })
    }

    pub fn p(&self) -> &BigInt {
        &self.p
    }

    pub fn q(&self) -> &BigInt {
        &self.q
    }

    /// Height: the absolute value of the y-coordinate.
    pub fn height(&self) -> BigInt {
        self.q.abs()
    }

    pub fn holonomy(&self) -> (Real, Real) {
        (
            Real::from_integer(self.p.clone()),
            Real::from_integer(self.q.clone()),
        )
    }

    /// `hor_θ((p, q)) = |q·θ − p|`.
    pub fn hor(&self, theta: &Real) -> Real {
        theta
            .mul(&Real::from_integer(self.q.clone()))
            .sub(&Real::from_integer(self.p.clone()))
            .abs()
    }

    /// Canonical representative of `{v, −v}`: positive y-coordinate, or
    /// positive x-coordinate when the y-coordinate vanishes.
    pub fn canonical(self) -> Loop {
        if self.q.is_negative() || (self.q.is_zero() && self.p.is_negative()) {
            Loop {
                p: -self.p,
                q: -self.q,
            }
        } else {
            self
        }
    }
}

impl Serialize for Loop {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut s = serializer.serialize_struct("Loop", 2)?;
        s.serialize_field("p", &self.p.to_string())?;
        s.serialize_field("q", &self.q.to_string())?;
        s.end()
    }
}

/// A slit holonomy `(λ+m, μ+n)` on the positive branch: `n ≥ 1`, or the
/// base slit `(m, n) = (0, 0)`.  Separating slits additionally have both
/// twists even.
#[derive(Debug, Clone, PartialEq)]
pub struct Slit {
    m: BigInt,
    n: BigInt,
    context: Context,
}

impl Slit {
    pub fn new(context: &Context, m: impl Into<BigInt>, n: impl Into<BigInt>) -> Result<Self> {
        let (m, n) = (m.into(), n.into());
        if !(n >= BigInt::one() || (m.is_zero() && n.is_zero())) {
            return Err(Error::Domain(format!(
                "a slit twist pair needs n ≥ 1, or (0, 0) for the base slit; \
                 ({m}, {n}) is neither (the mirrored branch is represented by \
                 its positive counterpart)"
            )));
        }
        Ok(Slit {
            m,
            n,
            context: context.clone(),
        })
    }

    /// A separating slit: both twists must be even.
    pub fn new_separating(
        context: &Context,
        m: impl Into<BigInt>,
        n: impl Into<BigInt>,
    ) -> Result<Self> {
        let (m, n) = (m.into(), n.into());
        if !(m.is_even() && n.is_even()) {
            return Err(Error::Domain(format!(
                "a separating slit needs both twists even; got ({m}, {n})"
            )));
        }
        Slit::new(context, m, n)
    }

    pub fn m(&self) -> &BigInt {
        &self.m
    }

    pub fn n(&self) -> &BigInt {
        &self.n
    }

    pub fn context(&self) -> &Context {
        &self.context
    }

    pub fn is_base(&self) -> bool {
        self.m.is_zero() && self.n.is_zero()
    }

    pub fn is_separating(&self) -> bool {
        self.m.is_even() && self.n.is_even()
    }

    pub fn holonomy(&self) -> (Real, Real) {
        (
            self.context.lambda.add(&Real::from_integer(self.m.clone())),
            self.context.mu.add(&Real::from_integer(self.n.clone())),
        )
    }

    /// Height: `|μ + n|`, an exact real.
    pub fn height(&self) -> Real {
        self.context
            .mu
            .add(&Real::from_integer(self.n.clone()))
            .abs()
    }

    /// `hor_θ(w) = |(μ+n)·θ − (λ+m)|`.
    pub fn hor(&self, theta: &Real) -> Real {
        let (x, y) = self.holonomy();
        y.mul(theta).sub(&x).abs()
    }

    /// The inverse slope `(λ+m)/(μ+n)` of the slit direction.
    pub fn inverse_slope(&self) -> Result<Real> {
        let (x, y) = self.holonomy();
        Ok(x.mul(&y.recip()?))
    }

    /// The slit `w + b·v` obtained by twisting `b` times about the loop
    /// `v`.  Fails if the result leaves the positive branch.
    pub fn twisted(&self, v: &Loop, b: &BigInt) -> Result<Slit> {
        Slit::new(&self.context, &self.m + b * &v.p, &self.n + b * &v.q)
    }

    /// The twist relation from `self` to `other`: the unique primitive
    /// loop `v` (canonical sign) and integer `b` with
    /// `other = self + b·v`, or `None` for equal twist pairs.  Slits of
    /// two different contexts are unrelated.
    pub fn twist_from(&self, other: &Slit) -> Result<Option<(Loop, BigInt)>> {
        if self.context != other.context {
            return Err(Error::Precondition(
                "slits from different (λ, μ) contexts are unrelated".into(),
            ));
        }
        let dm = &other.m - &self.m;
        let dn = &other.n - &self.n;
        if dm.is_zero() && dn.is_zero() {
            return Ok(None);
        }
        let g = dm.gcd(&dn);
        let raw = Loop {
            p: &dm / &g,
            q: &dn / &g,
        };
        let flip = raw.q.is_negative() || (raw.q.is_zero() && raw.p.is_negative());
        let (v, b) = if flip {
            (
                Loop {
                    p: -raw.p,
                    q: -raw.q,
                },
                -g,
            )
        } else {
            (raw, g)
        };
        Ok(Some((v, b)))
    }
}

impl Serialize for Slit {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut s = serializer.serialize_struct("Slit", 4)?;
        s.serialize_field("m", &self.m.to_string())?;
        s.serialize_field("n", &self.n.to_string())?;
        s.serialize_field("separating", &self.is_separating())?;
        s.serialize_field("height_approx", &self.height().approx_f64())?;
        s.end()
    }
}

/// Signed cross product `u × v = u_x·v_y − u_y·v_x` (the area form).
/// Bilinear and antisymmetric; exact on exact inputs.
pub fn cross_signed(u: (&Real, &Real), v: (&Real, &Real)) -> Real {
    u.0.mul(v.1).sub(&u.1.mul(v.0))
}

/// `|u × v|`, the area of the parallelogram spanned by `u` and `v`.
pub fn cross(u: (&Real, &Real), v: (&Real, &Real)) -> Real {
    cross_signed(u, v).abs()
}

/// `hor_θ((x, y)) = |y·θ − x|`: the horizontal component of the vector
/// after shearing the direction of inverse slope `θ` to the vertical.
pub fn hor(theta: &Real, v: (&Real, &Real)) -> Real {
    v.1.mul(theta).sub(v.0).abs()
}

/// The window exponent `n_k = log(q_{k+1}) / (2·log q_k) − 2` as a
/// certified enclosure.  Requires `q_k ≥ 2` (the logarithm base must
/// exceed 1) and `q_{k+1} > q_k`.
pub fn window_exponent(q_k: &BigInt, q_next: &BigInt, bits: u32) -> Result<RatInterval> {
    if q_k < &BigInt::from(2) {
        return Err(Error::Domain(
            "window exponent needs q_k ≥ 2 (logarithm base above 1)".into(),
        ));
    }
    if q_next <= q_k {
        return Err(Error::Precondition(
            "window exponent needs q_{k+1} > q_k".into(),
        ));
    }
    let ln_base = ln_rational(&BigRational::from(q_k.clone()), bits)?;
    let ln_next = ln_rational(&BigRational::from(q_next.clone()), bits)?;
    // ln_base.lo() > 0 because q_k ≥ 2; divide intervals directly.
    let half = BigRational::new(BigInt::one(), BigInt::from(2));
    let two = BigRational::from(BigInt::from(2));
    let lo = ln_next.lo() / ln_base.hi() * &half - &two;
    let hi = ln_next.hi() / ln_base.lo() * &half - &two;
    Ok(RatInterval::hull(lo, hi))
}

/// Exact membership of a height in the window
/// `S_k = { h : q_k < h < q_k^{n_k} }`.  The upper bound is decided
/// without logarithms: `q_k^{2(n_k+2)} = q_{k+1}` turns `h < q_k^{n_k}`
/// into the rational comparison `h²·q_k⁴ < q_{k+1}`.
pub fn window_contains(
    height: &Real,
    q_k: &BigInt,
    q_next: &BigInt,
    budget_bits: u32,
) -> Result<bool> {
    if !q_k.is_positive() || q_next <= q_k {
        return Err(Error::Precondition(
            "window membership needs 1 ≤ q_k < q_{k+1}".into(),
        ));
    }
    if height.cmp_rational(&BigRational::from(q_k.clone()), budget_bits)? != Ordering::Greater {
        return Ok(false);
    }
    let squared = height.mul(height);
    let bound = BigRational::new(q_next.clone(), Pow::pow(q_k, 4u32));
    Ok(squared.cmp_rational(&bound, budget_bits)? == Ordering::Less)
}

/// The projection of a best approximation vector along a slit: for
/// `w = (λ+m, μ+n)` and the k-th best approximation `(p1, p2, q)` of
/// `(λ, μ)`, the reduced fraction of `(p1 + m·q) / (p2 + n·q)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LiouvilleConvergent {
    /// The primitive vector `u = ((p1+mq)/d, (p2+nq)/d)`, sign-normalized
    /// to positive height.
    pub u: Loop,
    /// `d = gcd(p1 + m·q, p2 + n·q)`.
    pub d: BigInt,
    /// Whether the height restriction `|w| < q_{k+1}^{1/2} / (16·C1·q_k)`
    /// was checked (it needs the next denominator; without it the result
    /// is emitted unverified).
    pub restriction_verified: bool,
    /// Whether the exact certificate `(q·|w|)/2 < d·|u| < 2·q·|w|` holds.
    pub bounds_certified: bool,
}

impl Serialize for LiouvilleConvergent {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut s = serializer.serialize_struct("LiouvilleConvergent", 4)?;
        s.serialize_field("u", &self.u)?;
        s.serialize_field("d", &self.d.to_string())?;
        s.serialize_field("restriction_verified", &self.restriction_verified)?;
        s.serialize_field("bounds_certified", &self.bounds_certified)?;
        s.end()
    }
}

/// Compute the Liouville convergent of the slit `w` indexed by the best
/// approximation `ba` of the context pair `(λ, μ)`.
///
/// When the next best approximation denominator is supplied, the height
/// restriction `|w| < q_{k+1}^{1/2} / (16·C1·q_k)` is decided exactly
/// (squared form: `|w|²·(16·C1·q_k)² < q_{k+1}`); a violating slit is a
/// structural refusal, not a convergent.  Without it the convergent is
/// returned with `restriction_verified = false`.
///
/// `c1` is the norm's empirical constant bounding
/// `‖q_k·x − p_k‖ · q_{k+1}^{1/2}`; it is supplied by the caller because
/// no closed form is asserted for it.
///
/// The caller is trusted that `ba` is a genuine best approximation of
/// `w`'s context pair and that `next_q` is the successor denominator.
pub fn liouville_convergent(
    w: &Slit,
    ba: &BestApprox,
    next_q: Option<&BigInt>,
    c1: &BigRational,
    budget_bits: u32,
) -> Result<LiouvilleConvergent> {
    if !c1.is_positive() {
        return Err(Error::Domain("the norm constant C1 must be positive".into()));
    }
    if !ba.q.is_positive() {
        return Err(Error::Precondition(
            "best approximation denominator must be positive".into(),
        ));
    }
    let a = &ba.p1 + &w.m * &ba.q;
    let b = &ba.p2 + &w.n * &ba.q;
    if b.is_zero() {
        return Err(Error::Degenerate(format!(
            "p2 + n·q = 0 for slit twists ({}, {}) at q = {}: the projected \
             fraction has no height",
            w.m, w.n, ba.q
        )));
    }

    let restriction_verified = match next_q {
        None => false,
        Some(qn) => {
            if qn <= &ba.q {
                return Err(Error::Precondition(
                    "next denominator must exceed the current one".into(),
                ));
            }
            let height = w.height();
            let squared = height.mul(&height);
            let factor = c1 * BigRational::from(BigInt::from(16) * &ba.q);
            let threshold = BigRational::from(qn.clone()) / (&factor * &factor);
            match squared.cmp_rational(&threshold, budget_bits)? {
                Ordering::Less => true,
                _ => {
                    return Err(Error::NotApplicable(format!(
                        "slit height {:.4} violates the restriction \
                         |w| < q_next^(1/2)/(16·C1·q_k) ≈ {:.4}; the projected \
                         fraction need not be a convergent of the slit direction",
                        height.approx_f64(),
                        threshold.to_f64_lossy().sqrt(),
                    )))
                }
            }
        }
    };

    let d = a.gcd(&b);
    let (mut up, mut uq) = (&a / &d, &b / &d);
    if uq.is_negative() {
        up = -up;
        uq = -uq;
    }
    let u = Loop { p: up, q: uq };

    // Certificate (q·|w|)/2 < d·|u| < 2·q·|w|, with d·|u| = |p2 + n·q|.
    let du = b.abs();
    let qw = w.height().mul(&Real::from_integer(ba.q.clone()));
    let lower = qw.cmp_rational(
        &BigRational::from(BigInt::from(2) * &du),
        budget_bits,
    )? == Ordering::Less;
    let upper = qw.cmp_rational(
        &BigRational::new(du.clone(), BigInt::from(2)),
        budget_bits,
    )? == Ordering::Greater;

    Ok(LiouvilleConvergent {
        u,
        d,
        restriction_verified,
        bounds_certified: lower && upper,
    })
}

/// Result of the minimum-area check on a triple of consecutive
/// separating slits inside one window `S_k`.
#[derive(Debug, Clone)]
pub struct MinAreaReport {
    /// Whether `|w_j × v_j| > 1/(4·q_k)` holds (exact comparison).
    pub pass: bool,
    /// The exact cross product `|w_j × v_j|`.
    pub cross: Real,
    /// The bound `1/(4·q_k)`.
    pub bound: BigRational,
    /// The twist multiple `b` with `w_{j+1} = w_j + b·v_j` (always even
    /// for separating slits).
    pub twist: BigInt,
}

impl Serialize for MinAreaReport {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut s = serializer.serialize_struct("MinAreaReport", 5)?;
        s.serialize_field("pass", &self.pass)?;
        s.serialize_field("cross", &self.cross)?;
        s.serialize_field("cross_approx", &self.cross.approx_f64())?;
        s.serialize_field("bound", &self.bound.to_string())?;
        s.serialize_field("twist", &self.twist.to_string())?;
        s.end()
    }
}

/// Check the minimum-area bound `|w_j × v_j| > 1/(4·q_k)` for three
/// consecutive separating slits `(w_j, w_{j+1}, w_{j+2})` lying in the
/// window `S_k`, where `v_j` is the loop twisting `w_j` into `w_{j+1}`
/// and `qs[k], qs[k+1]` are the bracketing best approximation
/// denominators.
///
/// Preconditions (violations are errors, not failures): `k+1` indexes
/// into `qs`; all three slits are separating, share a context, and have
/// strictly increasing heights inside `S_k`; `v` is the primitive twist
/// loop from `w_j` to `w_{j+1}` with a nonzero even multiple.  A `pass`
/// of `false` means the hypotheses hold but the area bound fails: the
/// configuration cannot arise from three consecutive convergents of a
/// minimal nonergodic direction.
pub fn min_area_check(
    slits: (&Slit, &Slit, &Slit),
    v: &Loop,
    qs: &[BigInt],
    k: usize,
    budget_bits: u32,
) -> Result<MinAreaReport> {
    let (w0, w1, w2) = slits;
    if k + 1 >= qs.len() {
        return Err(Error::Precondition(format!(
            "need both q_k and q_{{k+1}}: index {} does not fit in a sequence of {} denominators",
            k,
            qs.len()
        )));
    }
    let q_k = &qs[k];
    let q_next = &qs[k + 1];
    if !q_k.is_positive() || q_next <= q_k {
        return Err(Error::Precondition(
            "denominators must satisfy 1 ≤ q_k < q_{k+1}".into(),
        ));
    }
    for (label, w) in [("first", w0), ("second", w1), ("third", w2)] {
        if !w.is_separating() {
            return Err(Error::Precondition(format!(
                "the {label} slit is not separating"
            )));
        }
    }
    if w0.context != w1.context || w1.context != w2.context {
        return Err(Error::Precondition(
            "the three slits must share one (λ, μ) context".into(),
        ));
    }
    let h0 = w0.height();
    let h1 = w1.height();
    let h2 = w2.height();
    if h0.compare(&h1, budget_bits)? != Ordering::Less
        || h1.compare(&h2, budget_bits)? != Ordering::Less
    {
        return Err(Error::Precondition(
            "consecutive separating slits must have strictly increasing heights".into(),
        ));
    }
    for (label, h) in [("first", &h0), ("second", &h1), ("third", &h2)] {
        if !window_contains(h, q_k, q_next, budget_bits)? {
            return Err(Error::Precondition(format!(
                "the {label} slit height lies outside the window S_k"
            )));
        }
    }
    let (tv, tb) = w0
        .twist_from(w1)?
        .expect("distinct heights imply distinct slits");
    if &tv != &v.clone().canonical() {
        return Err(Error::Precondition(
            "v is not the twist loop relating the first two slits".into(),
        ));
    }
    if tb.is_zero() || tb.is_odd() {
        return Err(Error::Precondition(
            "the twist multiple between consecutive separating slits must be nonzero and even"
                .into(),
        ));
    }

    let (wx, wy) = w0.holonomy();
    let (vx, vy) = v.holonomy();
    let area = cross((&wx, &wy), (&vx, &vy));
    let bound = BigRational::new(BigInt::one(), BigInt::from(4) * q_k);
    let pass = area.cmp_rational(&bound, budget_bits)? == Ordering::Greater;
    Ok(MinAreaReport {
        pass,
        cross: area,
        bound,
        twist: tb,
    })
}

trait RationalF64 {
    fn to_f64_lossy(&self) -> f64;
}

impl RationalF64 for BigRational {
    fn to_f64_lossy(&self) -> f64 {
        use num_traits::ToPrimitive;
        self.to_f64().unwrap_or(f64::NAN)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bestapprox::best_approx_sequence;
    use crate::numerics::norm::Norm;

    fn rat(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    fn real_rat(n: i64, d: i64) -> Real {
        Real::from_rational(rat(n, d))
    }

    /// `a + b·√d`.
    fn quad(a: (i64, i64), b: (i64, i64), d: u64) -> Real {
        Real::quadratic(rat(a.0, a.1), rat(b.0, b.1), d).unwrap()
    }

    fn quad_context() -> Context {
        // (√2−1, √3−1)
        Context::new(quad((-1, 1), (1, 1), 2), quad((-1, 1), (1, 1), 3)).unwrap()
    }

    // ------------------------------------------------------------------
    // cross products

    #[test]
    fn cross_unit_vectors() {
        let one = Real::one();
        let zero = Real::zero();
        let c = cross((&one, &zero), (&zero, &one));
        assert_eq!(c.as_rational(), Some(BigRational::one()));
    }

    #[test]
    fn cross_integer_example() {
        let u = (Real::from_integer(2), Real::from_integer(3));
        let v = (Real::from_integer(4), Real::from_integer(5));
        let c = cross((&u.0, &u.1), (&v.0, &v.1));
        assert_eq!(c.as_rational(), Some(BigRational::from(BigInt::from(2))));
    }

    #[test]
    fn cross_slit_against_loop() {
        // λ=1/2, μ=1/4, w=(λ+1, μ+2), v=(1,1): |3/2 − 9/4| = 3/4.
        let ctx = Context::new(real_rat(1, 2), real_rat(1, 4)).unwrap();
        let w = Slit::new(&ctx, 1, 2).unwrap();
        let (wx, wy) = w.holonomy();
        let one = Real::one();
        let c = cross((&wx, &wy), (&one, &one));
        assert_eq!(c.as_rational(), Some(rat(3, 4)));
    }

    #[test]
    fn cross_is_bilinear_and_antisymmetric() {
        let u = (real_rat(3, 2), real_rat(-1, 3));
        let v = (real_rat(5, 7), real_rat(2, 1));
        let w = (real_rat(-4, 5), real_rat(1, 6));
        // antisymmetry
        let uv = cross_signed((&u.0, &u.1), (&v.0, &v.1));
        let vu = cross_signed((&v.0, &v.1), (&u.0, &u.1));
        assert_eq!(uv.as_rational().unwrap(), -vu.as_rational().unwrap());
        // u × u = 0
        assert!(cross_signed((&u.0, &u.1), (&u.0, &u.1)).is_zero());
        // bilinearity in the second slot: u × (a·v + b·w)
        let (a, b) = (rat(2, 3), rat(-7, 2));
        let combo = (
            v.0.mul(&Real::from_rational(a.clone()))
                .add(&w.0.mul(&Real::from_rational(b.clone()))),
            v.1.mul(&Real::from_rational(a.clone()))
                .add(&w.1.mul(&Real::from_rational(b.clone()))),
        );
        let lhs = cross_signed((&u.0, &u.1), (&combo.0, &combo.1));
        let rhs = uv.as_rational().unwrap() * &a
            + cross_signed((&u.0, &u.1), (&w.0, &w.1)).as_rational().unwrap() * &b;
        assert_eq!(lhs.as_rational(), Some(rhs));
    }

    // ------------------------------------------------------------------
    // hor

    #[test]
    fn hor_exact_hit() {
        let theta = real_rat(1, 3);
        let v = Loop::new(1, 3).unwrap();
        assert!(v.hor(&theta).is_zero());
    }

    #[test]
    fn hor_rational_example() {
        let theta = real_rat(7, 10);
        let v = Loop::new(2, 3).unwrap();
        assert_eq!(v.hor(&theta).as_rational(), Some(rat(1, 10)));
    }

    #[test]
    fn hor_quadratic_example() {
        // θ=√2, v=(3,2): |2√2 − 3| = 3 − 2√2.
        let theta = quad((0, 1), (1, 1), 2);
        let v = Loop::new(3, 2).unwrap();
        let h = v.hor(&theta);
        let expected = quad((3, 1), (-2, 1), 2);
        assert!(h.sub(&expected).is_zero());
        assert!((h.approx_f64() - 0.17157287525381).abs() < 1e-12);
    }

    // ------------------------------------------------------------------
    // constructors enforce invariants

    #[test]
    fn loop_constructor_rejects_imprimitive() {
        assert!(Loop::new(2, 4).is_err());
        assert!(Loop::new(0, 0).is_err());
        assert!(Loop::new(0, 2).is_err());
        assert!(Loop::new(1, 0).is_ok());
        assert!(Loop::new(0, 1).is_ok());
        assert!(Loop::new(-3, 5).is_ok());
    }

    #[test]
    fn slit_constructor_rejects_negative_branch() {
        let ctx = quad_context();
        assert!(Slit::new(&ctx, 3, -1).is_err());
        assert!(Slit::new(&ctx, 5, 0).is_err());
        assert!(Slit::new(&ctx, 0, 0).is_ok());
        assert!(Slit::new(&ctx, -7, 2).is_ok());
        assert!(Slit::new_separating(&ctx, 3, 2).is_err());
        assert!(Slit::new_separating(&ctx, 2, 3).is_err());
        assert!(Slit::new_separating(&ctx, 0, 0).is_ok());
        assert!(Slit::new_separating(&ctx, -4, 6).is_ok());
    }

    #[test]
    fn context_rejects_out_of_range() {
        assert!(Context::new(real_rat(1, 2), real_rat(3, 2)).is_err());
        assert!(Context::new(Real::zero(), real_rat(1, 2)).is_err());
        assert!(Context::new(real_rat(1, 2), Real::one()).is_err());
        assert!(Context::new(real_rat(1, 2), real_rat(1, 3)).is_ok());
    }

    // ------------------------------------------------------------------
    // twist relation

    #[test]
    fn twist_relation_roundtrip() {
        let ctx = quad_context();
        let w = Slit::new_separating(&ctx, 0, 0).unwrap();
        let w2 = Slit::new_separating(&ctx, 4, 8).unwrap();
        let (v, b) = w.twist_from(&w2).unwrap().unwrap();
        assert_eq!((v.p(), v.q()), (&BigInt::from(1), &BigInt::from(2)));
        assert_eq!(b, BigInt::from(4));
        assert!(b.is_even());
        assert_eq!(w.twisted(&v, &b).unwrap(), w2);
        // reversed: canonical loop keeps positive height, multiple flips
        let (v2, b2) = w2.twist_from(&w).unwrap().unwrap();
        assert_eq!((v2.p(), v2.q()), (&BigInt::from(1), &BigInt::from(2)));
        assert_eq!(b2, BigInt::from(-4));
        // identical slits are not twist-related
        assert!(w.twist_from(&w).unwrap().is_none());
        // leaving the positive branch is rejected at construction
        assert!(w.twisted(&Loop::new(1, -2).unwrap(), &BigInt::from(2)).is_err());
    }

    // ------------------------------------------------------------------
    // window S_k

    #[test]
    fn window_membership_is_exact() {
        // q_k = 6, q_{k+1} = 10^12: S_k = (6, 10^6/36), upper ≈ 27777.8.
        let q_k = BigInt::from(6);
        let q_next = BigInt::from(10u64).pow(12u32);
        let ctx = Context::new(
            Real::from_rational(rat(1, 2) + rat(1, 1_000_000_000_000)),
            Real::from_rational(rat(1, 3) + rat(1, 1_000_000_000_000)),
        )
        .unwrap();
        let inside = Slit::new_separating(&ctx, 4, 8).unwrap();
        let below = Slit::new_separating(&ctx, 2, 4).unwrap();
        let above = Slit::new_separating(&ctx, 0, 27778).unwrap();
        let near_top = Slit::new_separating(&ctx, 0, 27776).unwrap();
        let b = DEFAULT_BUDGET_BITS;
        assert!(window_contains(&inside.height(), &q_k, &q_next, b).unwrap());
        assert!(!window_contains(&below.height(), &q_k, &q_next, b).unwrap());
        assert!(!window_contains(&above.height(), &q_k, &q_next, b).unwrap());
        assert!(window_contains(&near_top.height(), &q_k, &q_next, b).unwrap());
        // degenerate bracketing rejected
        assert!(window_contains(&inside.height(), &q_next, &q_k, b).is_err());
    }

    #[test]
    fn window_exponent_matches_closed_form() {
        // n_k = ½·log_6(10^12) − 2 = 6·ln(10)/ln(6) − 2 ≈ 5.7105833
        let iv = window_exponent(&BigInt::from(6), &BigInt::from(10u64).pow(12u32), 64).unwrap();
        let lo = iv.lo().to_f64_lossy();
        let hi = iv.hi().to_f64_lossy();
        assert!(lo <= 5.710_583_3 && 5.710_583_2 <= hi, "got [{lo}, {hi}]");
        assert!(hi - lo < 1e-6);
        assert!(window_exponent(&BigInt::from(1), &BigInt::from(10), 64).is_err());
    }

    // ------------------------------------------------------------------
    // Liouville convergents

    #[test]
    fn liouville_convergent_base_case_is_plain_gcd() {
        let ctx = quad_context();
        let seq = best_approx_sequence(
            (ctx.lambda(), ctx.mu()),
            &Norm::Sup,
            50,
        )
        .unwrap();
        // (q, p1, p2) = (7, 3, 5)
        let ba = &seq[2];
        assert_eq!(ba.q, BigInt::from(7));
        let w = Slit::new_separating(&ctx, 0, 0).unwrap();
        let lc = liouville_convergent(&w, ba, None, &rat(2, 1), DEFAULT_BUDGET_BITS).unwrap();
        assert_eq!((lc.u.p(), lc.u.q()), (&BigInt::from(3), &BigInt::from(5)));
        assert_eq!(lc.d, BigInt::one());
        assert!(!lc.restriction_verified);
        // q·|w| = 7(√3−1) ≈ 5.124: 2.56 < 5 < 10.25
        assert!(lc.bounds_certified);
    }

    #[test]
    fn liouville_convergent_shifted_slit() {
        let ctx = quad_context();
        let seq = best_approx_sequence((ctx.lambda(), ctx.mu()), &Norm::Sup, 50).unwrap();
        let ba = &seq[2];
        let w = Slit::new_separating(&ctx, 2, 2).unwrap();
        let lc = liouville_convergent(&w, ba, None, &rat(2, 1), DEFAULT_BUDGET_BITS).unwrap();
        // (3+2·7, 5+2·7) = (17, 19), coprime
        assert_eq!((lc.u.p(), lc.u.q()), (&BigInt::from(17), &BigInt::from(19)));
        assert_eq!(lc.d, BigInt::one());
        assert!(lc.bounds_certified);
    }

    #[test]
    fn liouville_convergent_with_common_factor() {
        let ctx = quad_context();
        let seq = best_approx_sequence((ctx.lambda(), ctx.mu()), &Norm::Sup, 50).unwrap();
        // (q, p1, p2) = (22, 9, 16)
        let ba = &seq[3];
        assert_eq!(ba.q, BigInt::from(22));
        let w = Slit::new_separating(&ctx, 6, 2).unwrap();
        let lc = liouville_convergent(&w, ba, None, &rat(2, 1), DEFAULT_BUDGET_BITS).unwrap();
        // (9+132, 16+44) = (141, 60), gcd 3 → u = (47, 20)
        assert_eq!(lc.d, BigInt::from(3));
        assert_eq!((lc.u.p(), lc.u.q()), (&BigInt::from(47), &BigInt::from(20)));
        assert!(lc.bounds_certified);
    }

    #[test]
    fn liouville_convergent_height_restriction() {
        let ctx = quad_context();
        let seq = best_approx_sequence((ctx.lambda(), ctx.mu()), &Norm::Sup, 50).unwrap();
        let ba = &seq[3];
        let w = Slit::new_separating(&ctx, 6, 2).unwrap();
        let c1 = rat(2, 1);
        // genuine next denominator 34: |w| ≈ 2.73 is far above
        // √34/(16·2·22) ≈ 0.0083 → structural refusal
        let err = liouville_convergent(
            &w,
            ba,
            Some(&BigInt::from(34)),
            &c1,
            DEFAULT_BUDGET_BITS,
        )
        .unwrap_err();
        assert!(matches!(err, Error::NotApplicable(_)));
        // a huge (synthetic) next denominator verifies the restriction:
        // threshold √(10^30)/(16·2·22) ≈ 1.4e12 ≫ 2.73
        let lc = liouville_convergent(
            &w,
            ba,
            Some(&BigInt::from(10u64).pow(15u32).pow(2u32)),
            &c1,
            DEFAULT_BUDGET_BITS,
        )
        .unwrap();
        assert!(lc.restriction_verified);
        assert_eq!(lc.d, BigInt::from(3));
    }

    #[test]
    fn liouville_convergent_degenerate_height() {
        let ctx = quad_context();
        // synthetic best approximation (q, p1, p2) = (1, 1, 0): base slit
        // projects to height 0
        let ba = BestApprox {
            p1: BigInt::one(),
            p2: BigInt::zero(),
            q: BigInt::one(),
            err: Real::zero(),
        };
        let w = Slit::new_separating(&ctx, 0, 0).unwrap();
        let err = liouville_convergent(&w, &ba, None, &rat(2, 1), DEFAULT_BUDGET_BITS).unwrap_err();
        assert!(matches!(err, Error::Degenerate(_)));
    }

    // ------------------------------------------------------------------
    // minimum-area check

    fn perturbed_rational_context() -> (Context, Vec<BigInt>) {
        // (1/2 + 1/Q, 1/3 + 1/Q) with Q = 10^12; bracketing denominators
        // 6 and Q give the window S_k = (6, 10^6/36).
        let q = BigInt::from(10u64).pow(12u32);
        let ctx = Context::new(
            Real::from_rational(rat(1, 2) + BigRational::new(BigInt::one(), q.clone())),
            Real::from_rational(rat(1, 3) + BigRational::new(BigInt::one(), q.clone())),
        )
        .unwrap();
        (ctx, vec![BigInt::from(6), q])
    }

    #[test]
    fn min_area_pass_on_shallow_twist() {
        let (ctx, qs) = perturbed_rational_context();
        let w0 = Slit::new_separating(&ctx, 4, 8).unwrap();
        let v = Loop::new(1, 2).unwrap();
        let w1 = w0.twisted(&v, &BigInt::from(2)).unwrap();
        let w2 = w1.twisted(&Loop::new(1, 1).unwrap(), &BigInt::from(2)).unwrap();
        let report = min_area_check((&w0, &w1, &w2), &v, &qs, 0, DEFAULT_BUDGET_BITS).unwrap();
        // |w0 × v| = |2λ − μ| = 2/3 + 1/Q > 1/24
        assert!(report.pass);
        assert_eq!(report.twist, BigInt::from(2));
        assert_eq!(
            report.cross.as_rational(),
            Some(rat(2, 3) + BigRational::new(BigInt::one(), BigInt::from(10u64).pow(12u32)))
        );
        assert_eq!(report.bound, rat(1, 24));
    }

    #[test]
    fn min_area_fails_on_deep_convergent_twist() {
        // v = (27, 50) is nearly parallel to w0 = (λ+4, μ+8):
        // |w0 × v| = 23/Q ≈ 2.3·10^-11 < 1/24.
        let (ctx, qs) = perturbed_rational_context();
        let w0 = Slit::new_separating(&ctx, 4, 8).unwrap();
        let v = Loop::new(27, 50).unwrap();
        let w1 = w0.twisted(&v, &BigInt::from(2)).unwrap();
        let w2 = w1.twisted(&Loop::new(1, 1).unwrap(), &BigInt::from(2)).unwrap();
        let report = min_area_check((&w0, &w1, &w2), &v, &qs, 0, DEFAULT_BUDGET_BITS).unwrap();
        assert!(!report.pass);
        assert_eq!(
            report.cross.as_rational(),
            Some(BigRational::new(
                BigInt::from(23),
                BigInt::from(10u64).pow(12u32)
            ))
        );
    }

    #[test]
    fn min_area_rejects_heights_outside_window() {
        let (ctx, qs) = perturbed_rational_context();
        // first slit below the window: height 4.33 < 6
        let w0 = Slit::new_separating(&ctx, 2, 4).unwrap();
        let v = Loop::new(1, 2).unwrap();
        let w1 = w0.twisted(&v, &BigInt::from(2)).unwrap();
        let w2 = w1.twisted(&Loop::new(1, 1).unwrap(), &BigInt::from(2)).unwrap();
        let err = min_area_check((&w0, &w1, &w2), &v, &qs, 0, DEFAULT_BUDGET_BITS).unwrap_err();
        assert!(matches!(err, Error::Precondition(_)));
    }

    #[test]
    fn min_area_rejects_wrong_twist_loop() {
        let (ctx, qs) = perturbed_rational_context();
        let w0 = Slit::new_separating(&ctx, 4, 8).unwrap();
        let v = Loop::new(1, 2).unwrap();
        let w1 = w0.twisted(&v, &BigInt::from(2)).unwrap();
        let w2 = w1.twisted(&Loop::new(1, 1).unwrap(), &BigInt::from(2)).unwrap();
        let wrong = Loop::new(1, 1).unwrap();
        let err = min_area_check((&w0, &w1, &w2), &wrong, &qs, 0, DEFAULT_BUDGET_BITS).unwrap_err();
        assert!(matches!(err, Error::Precondition(_)));
    }

    #[test]
    fn min_area_rejects_non_separating() {
        let (ctx, qs) = perturbed_rational_context();
        let w0 = Slit::new(&ctx, 3, 8).unwrap(); // odd twist: not separating
        let v = Loop::new(1, 2).unwrap();
        let w1 = w0.twisted(&v, &BigInt::from(2)).unwrap();
        let w2 = w1.twisted(&Loop::new(1, 1).unwrap(), &BigInt::from(2)).unwrap();
        let err = min_area_check((&w0, &w1, &w2), &v, &qs, 0, DEFAULT_BUDGET_BITS).unwrap_err();
        assert!(matches!(err, Error::Precondition(_)));
    }

    // ------------------------------------------------------------------
    // serialization

    #[test]
    fn serialization_smoke() {
        let ctx = quad_context();
        let w = Slit::new_separating(&ctx, 2, 2).unwrap();
        let json = serde_json::to_value(&w).unwrap();
        assert_eq!(json["m"], "2");
        assert_eq!(json["separating"], true);
        let v = Loop::new(3, 5).unwrap();
        let json = serde_json::to_value(&v).unwrap();
        assert_eq!(json["p"], "3");
        assert_eq!(json["q"], "5");
    }
}
