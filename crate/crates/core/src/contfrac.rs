//! Continued fractions of computable reals, with certified quotients.
//!
//! Rational inputs expand by the Euclidean algorithm (canonical form: the
//! final quotient is at least 2 whenever the expansion has length over
//! one).  Irrational inputs run a Möbius-state loop: the tail remainder is
//! tracked as an integer fractional-linear image of the original value, so
//! each partial quotient is the floor of an interval image of one enclosure
//! of the input — coefficients grow only linearly in bit size and every
//! quotient is certified before it is emitted.
//!
//! Decimal-ball inputs cannot be refined past their stated radius: the
//! expansion stops at the last certifiable quotient and sets
//! [`CFExpansion::truncated_by_budget`]; if not even the integer part is
//! certifiable the expansion fails as undecidable.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::{
    precision_ladder, RatInterval, Real, RealKind, DEFAULT_BUDGET_BITS,
};

/// A reduced fraction `p/q` with positive denominator.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Fraction {
    p: BigInt,
    q: BigInt,
}

impl Fraction {
    /// Build a reduced fraction; the sign moves to the numerator.
    pub fn new(p: BigInt, q: BigInt) -> Result<Self> {
        if q.is_zero() {
            return Err(Error::Domain("fraction with zero denominator".into()));
        }
        let g = p.gcd(&q);
        let (mut p, mut q) = (p / &g, q / g);
        if q.is_negative() {
            p = -p;
            q = -q;
        }
        Ok(Fraction { p, q })
    }

    pub fn from_rational(r: &BigRational) -> Self {
        Fraction {
            p: r.numer().clone(),
            q: r.denom().clone(),
        }
    }

    pub fn p(&self) -> &BigInt {
        &self.p
    }

    pub fn q(&self) -> &BigInt {
        &self.q
    }

    pub fn value(&self) -> BigRational {
        BigRational::new(self.p.clone(), self.q.clone())
    }
}

impl fmt::Display for Fraction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.p, self.q)
    }
}

impl FromStr for Fraction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (p, q) = match s.split_once('/') {
            Some((p, q)) => (
                p.trim()
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad numerator in {s:?}")))?,
                q.trim()
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad denominator in {s:?}")))?,
            ),
            None => (
                s.trim()
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad integer fraction {s:?}")))?,
                BigInt::one(),
            ),
        };
        Fraction::new(p, q)
    }
}

impl Serialize for Fraction {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// A continued-fraction expansion `[a0; a1, a2, ...]` with its convergents.
#[derive(Debug, Clone, Serialize)]
pub struct CFExpansion {
    #[serde(serialize_with = "crate::numerics::serialize_bigint")]
    pub a0: BigInt,
    /// Quotients after the integer part; each is at least 1.
    #[serde(serialize_with = "crate::numerics::serialize_bigint_seq")]
    pub partial_quotients: Vec<BigInt>,
    /// `p_k/q_k` for `k = 0, 1, ...`, one per quotient.
    pub convergents: Vec<Fraction>,
    /// The value is rational and the whole expansion was emitted.
    pub exact_termination: bool,
    /// A ball input ran out of certifiable quotients before the requested
    /// depth.
    pub truncated_by_budget: bool,
}

impl CFExpansion {
    /// Total number of quotients including the integer part.
    pub fn len(&self) -> usize {
        1 + self.partial_quotients.len()
    }

    pub fn is_empty(&self) -> bool {
        false // a0 is always present
    }

    /// The denominators `q_0, q_1, ...` of the convergents.
    pub fn denominators(&self) -> Vec<BigInt> {
        self.convergents.iter().map(|f| f.q.clone()).collect()
    }
}

/// Running convergent recurrence `p_k = a_k p_{k-1} + p_{k-2}`.
struct ConvergentState {
    p_prev: BigInt,
    p_prev2: BigInt,
    q_prev: BigInt,
    q_prev2: BigInt,
}

impl ConvergentState {
    fn new() -> Self {
        ConvergentState {
            p_prev: BigInt::one(),
            p_prev2: BigInt::zero(),
            q_prev: BigInt::zero(),
            q_prev2: BigInt::one(),
        }
    }

    fn push(&mut self, a: &BigInt) -> Fraction {
        let p = a * &self.p_prev + &self.p_prev2;
        let q = a * &self.q_prev + &self.q_prev2;
        self.p_prev2 = std::mem::replace(&mut self.p_prev, p.clone());
        self.q_prev2 = std::mem::replace(&mut self.q_prev, q.clone());
        // standard theory: gcd(p_k, q_k) = 1, so no reduction is needed
        Fraction { p, q }
    }
}

/// Expand a real into its continued fraction, emitting at most `depth`
/// quotients (counting the integer part).
pub fn cf_expand(theta: &Real, depth: usize) -> Result<CFExpansion> {
    cf_expand_budget(theta, depth, DEFAULT_BUDGET_BITS)
}

pub fn cf_expand_budget(theta: &Real, depth: usize, budget_bits: u32) -> Result<CFExpansion> {
    if depth == 0 {
        return Err(Error::Precondition("expansion depth must be at least 1".into()));
    }
    if let Some(r) = theta.as_rational() {
        return Ok(expand_rational(&r, depth));
    }
    expand_irrational(theta, depth, budget_bits)
}

/// The convergents `p_k/q_k` of a real, to the requested depth.
pub fn convergents(theta: &Real, depth: usize) -> Result<Vec<Fraction>> {
    Ok(cf_expand(theta, depth)?.convergents)
}

fn expand_rational(r: &BigRational, depth: usize) -> CFExpansion {
    let mut quotients = Vec::new();
    let mut x = r.clone();
    let mut terminated = false;
    while quotients.len() < depth {
        let a = x.floor().to_integer();
        quotients.push(a.clone());
        let frac = &x - BigRational::from_integer(a);
        if frac.is_zero() {
            terminated = true;
            break;
        }
        x = frac.recip();
    }
    let mut state = ConvergentState::new();
    let convergents = quotients.iter().map(|a| state.push(a)).collect();
    let a0 = quotients[0].clone();
    CFExpansion {
        a0,
        partial_quotients: quotients[1..].to_vec(),
        convergents,
        exact_termination: terminated,
        truncated_by_budget: false,
    }
}

/// Floor of the Möbius image `(A·theta + B) / (C·theta + D)` via enclosure
/// refinement.  `Ok(None)` means a ball input cannot certify the floor.
fn moebius_floor(
    theta: &Real,
    m: &[BigInt; 4],
    budget_bits: u32,
) -> Result<Option<BigInt>> {
    let is_ball = theta.kind() == RealKind::DecimalLiteral;
    let [a, b, c, d] = m;
    let (a, b) = (
        BigRational::from_integer(a.clone()),
        BigRational::from_integer(b.clone()),
    );
    let (c, d) = (
        BigRational::from_integer(c.clone()),
        BigRational::from_integer(d.clone()),
    );
    for bits in precision_ladder(budget_bits) {
        let iv = theta.enclose_best(bits);
        let num = iv.scale(&a).shift(&b);
        let den = iv.scale(&c).shift(&d);
        if den.contains_zero() {
            if is_ball {
                return Ok(None);
            }
            continue;
        }
        let q = num.mul(&den.recip().expect("nonzero denominator interval"));
        let lo = q.lo().floor().to_integer();
        let hi = q.hi().floor().to_integer();
        if lo == hi {
            return Ok(Some(lo));
        }
        if is_ball {
            // the enclosure cannot shrink further
            return Ok(None);
        }
    }
    Err(Error::undecidable(
        "partial-quotient extraction at the Möbius state",
        budget_bits,
    ))
}

fn expand_irrational(theta: &Real, depth: usize, budget_bits: u32) -> Result<CFExpansion> {
    // remainder r_k = (A theta + B) / (C theta + D), starting at r_0 = theta
    let mut m = [
        BigInt::one(),
        BigInt::zero(),
        BigInt::zero(),
        BigInt::one(),
    ];
    let mut quotients: Vec<BigInt> = Vec::new();
    let mut state = ConvergentState::new();
    let mut convs = Vec::new();
    let mut truncated = false;
    while quotients.len() < depth {
        match moebius_floor(theta, &m, budget_bits)? {
            Some(a) => {
                if !quotients.is_empty() && !a.is_positive() {
                    return Err(Error::Domain(format!(
                        "nonpositive partial quotient {a} extracted; input is not in the \
                         function's domain"
                    )));
                }
                convs.push(state.push(&a));
                // r' = 1 / (r - a): new matrix rows are (C, D) and
                // (A - aC, B - aD)
                let [a0, b0, c0, d0] = m;
                m = [c0.clone(), d0.clone(), a0 - &a * &c0, b0 - &a * &d0];
                quotients.push(a);
            }
            None => {
                if quotients.is_empty() {
                    return Err(Error::undecidable(
                        "integer part of a ball value straddling an integer",
                        budget_bits,
                    ));
                }
                truncated = true;
                break;
            }
        }
    }
    let a0 = quotients[0].clone();
    Ok(CFExpansion {
        a0,
        partial_quotients: quotients[1..].to_vec(),
        convergents: convs,
        exact_termination: false,
        truncated_by_budget: truncated,
    })
}

/// Whether `|theta - p/q| < 1/(2 q^2)`, certified.
///
/// When this holds, `p/q` is a convergent of `theta`; the reverse
/// implication does not hold.
pub fn khinchin19_predicate(theta: &Real, f: &Fraction, budget_bits: u32) -> Result<bool> {
    let diff = theta.sub(&Real::from_rational(f.value()));
    let bound = BigRational::new(BigInt::one(), BigInt::from(2) * &f.q * &f.q);
    Ok(diff.abs_cmp_rational(&bound, budget_bits)? == Ordering::Less)
}

/// Certificate that the `k`-th convergent error sits in its two-sided
/// bracket `1/(q_k (q_k + q_{k+1})) < |theta - p_k/q_k| <= 1/(q_k q_{k+1})`.
#[derive(Debug, Clone, Serialize)]
pub struct ConvergentBounds {
    pub k: usize,
    pub convergent: Fraction,
    #[serde(serialize_with = "crate::numerics::serialize_bigint")]
    pub next_q: BigInt,
    #[serde(serialize_with = "crate::numerics::serialize_rational")]
    pub lower: BigRational,
    #[serde(serialize_with = "crate::numerics::serialize_rational")]
    pub upper: BigRational,
    /// Display enclosure of the distance (the decision itself is exact for
    /// exact inputs).
    #[serde(serialize_with = "crate::numerics::serialize_interval")]
    pub distance: RatInterval,
    pub pass: bool,
    /// The expansion terminated at `k` (rational input hit exactly); the
    /// bracket is for infinite expansions, so the check passes vacuously.
    pub vacuous: bool,
}

/// Check the two-sided convergent error bracket at index `k`.
pub fn convergent_bounds_check(theta: &Real, k: usize) -> Result<ConvergentBounds> {
    convergent_bounds_check_budget(theta, k, DEFAULT_BUDGET_BITS)
}

pub fn convergent_bounds_check_budget(
    theta: &Real,
    k: usize,
    budget_bits: u32,
) -> Result<ConvergentBounds> {
    let exp = cf_expand_budget(theta, k + 2, budget_bits)?;
    if exp.convergents.len() < k + 1 {
        return Err(Error::Precondition(format!(
            "only {} convergents exist, need index {k}",
            exp.convergents.len()
        )));
    }
    let conv = exp.convergents[k].clone();
    let diff = theta.sub(&Real::from_rational(conv.value()));
    if exp.convergents.len() == k + 1 {
        // terminal convergent of a rational: distance is exactly zero
        debug_assert!(exp.exact_termination);
        return Ok(ConvergentBounds {
            k,
            convergent: conv,
            next_q: BigInt::zero(),
            lower: BigRational::zero(),
            upper: BigRational::zero(),
            distance: RatInterval::point(BigRational::zero()),
            pass: true,
            vacuous: true,
        });
    }
    let q_k = conv.q.clone();
    let q_next = exp.convergents[k + 1].q.clone();
    let lower = BigRational::new(BigInt::one(), &q_k * (&q_k + &q_next));
    let upper = BigRational::new(BigInt::one(), &q_k * &q_next);
    let above = diff.abs_cmp_rational(&lower, budget_bits)? == Ordering::Greater;
    let below = diff.abs_cmp_rational(&upper, budget_bits)? != Ordering::Greater;
    let distance = diff.enclose_best(64).abs();
    Ok(ConvergentBounds {
        k,
        convergent: conv,
        next_q: q_next,
        lower,
        upper,
        distance,
        pass: above && below,
        vacuous: false,
    })
}
