//! Exact numerics: rational intervals, computable reals, and norms.
//!
//! The whole crate does arithmetic in one of two modes and nothing else:
//!
//! * **exact** — `BigRational` values and sums of rational multiples of
//!   square roots of distinct square-free integers ([`real::QuadExpr`]),
//!   closed under `+ - ×` and reciprocal;
//! * **certified enclosure** — closed rational intervals ([`RatInterval`])
//!   with outward rounding, produced on demand at a requested precision.
//!
//! Floating point is never used for anything that feeds a decision.
//! Every strict-inequality predicate downstream is either decided exactly or
//! resolved by refining enclosures up to a precision budget; exhausting the
//! budget yields [`crate::error::Error::Undecidable`], never a silent guess.

pub mod functions;
pub mod norm;
pub mod real;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};

pub use norm::Norm;
pub use real::{Real, RealKind};

/// Default precision budget, in bits, for refinement loops.
pub const DEFAULT_BUDGET_BITS: u32 = 256;

/// Serialize a `BigRational` as the string `p/q` (or `p` for integers).
/// Report types use this to keep JSON output readable and exact.
pub fn serialize_rational<S: serde::Serializer>(
    r: &BigRational,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    if r.denom().is_one() {
        s.collect_str(r.numer())
    } else {
        s.collect_str(r)
    }
}

/// Serialize a `BigInt` as its decimal string.
pub fn serialize_bigint<S: serde::Serializer>(
    v: &BigInt,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    s.collect_str(v)
}

/// Serialize a list of `BigInt`s as decimal strings.
pub fn serialize_bigint_seq<S: serde::Serializer>(
    v: &[BigInt],
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(v.len()))?;
    for x in v {
        seq.serialize_element(&x.to_string())?;
    }
    seq.end()
}

/// Serialize a `RatInterval` as the pair of endpoint strings.
pub fn serialize_interval<S: serde::Serializer>(
    iv: &RatInterval,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(2))?;
    seq.serialize_element(&iv.lo().to_string())?;
    seq.serialize_element(&iv.hi().to_string())?;
    seq.end()
}

/// Precision at which refinement loops start before escalating.
pub(crate) const STARTING_BITS: u32 = 32;

/// A closed interval with rational endpoints, `lo <= hi`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RatInterval {
    lo: BigRational,
    hi: BigRational,
}

impl RatInterval {
    pub fn new(lo: BigRational, hi: BigRational) -> Result<Self> {
        if lo > hi {
            return Err(Error::Domain(format!(
                "interval endpoints out of order: [{lo}, {hi}]"
            )));
        }
        Ok(RatInterval { lo, hi })
    }

    pub fn point(v: BigRational) -> Self {
        RatInterval {
            lo: v.clone(),
            hi: v,
        }
    }

    /// The interval spanned by two bounds in either order.  Infallible, for
    /// enclosures assembled from independently computed lower and upper
    /// bounds.
    pub fn hull(a: BigRational, b: BigRational) -> Self {
        if a <= b {
            RatInterval { lo: a, hi: b }
        } else {
            RatInterval { lo: b, hi: a }
        }
    }

    pub fn lo(&self) -> &BigRational {
        &self.lo
    }

    pub fn hi(&self) -> &BigRational {
        &self.hi
    }

    pub fn width(&self) -> BigRational {
        &self.hi - &self.lo
    }

    pub fn midpoint(&self) -> BigRational {
        (&self.lo + &self.hi) / BigRational::from_integer(BigInt::from(2))
    }

    pub fn contains(&self, v: &BigRational) -> bool {
        &self.lo <= v && v <= &self.hi
    }

    pub fn contains_interval(&self, other: &RatInterval) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }

    pub fn intersects(&self, other: &RatInterval) -> bool {
        !(self.hi < other.lo || other.hi < self.lo)
    }

    pub fn contains_zero(&self) -> bool {
        !self.lo.is_positive() && !self.hi.is_negative()
    }

    /// Sign of every point in the interval, if uniform: -1, 0 (point zero), +1.
    pub fn uniform_sign(&self) -> Option<i8> {
        if self.lo.is_positive() {
            Some(1)
        } else if self.hi.is_negative() {
            Some(-1)
        } else if self.lo.is_zero() && self.hi.is_zero() {
            Some(0)
        } else {
            None
        }
    }

    pub fn neg(&self) -> RatInterval {
        RatInterval {
            lo: -self.hi.clone(),
            hi: -self.lo.clone(),
        }
    }

    pub fn add(&self, other: &RatInterval) -> RatInterval {
        RatInterval {
            lo: &self.lo + &other.lo,
            hi: &self.hi + &other.hi,
        }
    }

    pub fn sub(&self, other: &RatInterval) -> RatInterval {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &RatInterval) -> RatInterval {
        let candidates = [
            &self.lo * &other.lo,
            &self.lo * &other.hi,
            &self.hi * &other.lo,
            &self.hi * &other.hi,
        ];
        let lo = candidates.iter().min().unwrap().clone();
        let hi = candidates.iter().max().unwrap().clone();
        RatInterval { lo, hi }
    }

    pub fn scale(&self, c: &BigRational) -> RatInterval {
        if c.is_negative() {
            RatInterval {
                lo: &self.hi * c,
                hi: &self.lo * c,
            }
        } else {
            RatInterval {
                lo: &self.lo * c,
                hi: &self.hi * c,
            }
        }
    }

    pub fn shift(&self, c: &BigRational) -> RatInterval {
        RatInterval {
            lo: &self.lo + c,
            hi: &self.hi + c,
        }
    }

    /// Reciprocal; fails if the interval contains zero.
    pub fn recip(&self) -> Result<RatInterval> {
        if self.contains_zero() {
            return Err(Error::Degenerate(
                "reciprocal of an interval containing zero".into(),
            ));
        }
        Ok(RatInterval {
            lo: self.hi.recip(),
            hi: self.lo.recip(),
        })
    }

    /// Interval absolute value.
    pub fn abs(&self) -> RatInterval {
        if !self.lo.is_negative() {
            self.clone()
        } else if !self.hi.is_positive() {
            self.neg()
        } else {
            let hi = self.hi.clone().max(-self.lo.clone());
            RatInterval {
                lo: BigRational::zero(),
                hi,
            }
        }
    }

    /// Definite comparison against another interval: `Less` when this interval
    /// lies entirely below `other`, `Greater` when entirely above, `None` when
    /// they overlap.
    pub fn partial_cmp_interval(&self, other: &RatInterval) -> Option<std::cmp::Ordering> {
        if self.hi < other.lo {
            Some(std::cmp::Ordering::Less)
        } else if other.hi < self.lo {
            Some(std::cmp::Ordering::Greater)
        } else {
            None
        }
    }

    /// Outward-rounded square root at `2^-bits` granularity.
    /// Requires `hi >= 0`; a negative `lo` is clamped to zero.
    pub fn sqrt_outward(&self, bits: u32) -> Result<RatInterval> {
        if self.hi.is_negative() {
            return Err(Error::Domain("square root of a negative interval".into()));
        }
        let lo = if self.lo.is_negative() {
            BigRational::zero()
        } else {
            sqrt_rational_lower(&self.lo, bits)
        };
        let hi = sqrt_rational_upper(&self.hi, bits);
        RatInterval::new(lo, hi)
    }
}

impl std::fmt::Display for RatInterval {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}

/// Floor of the integer square root of `n`.
pub fn isqrt(n: &BigUint) -> BigUint {
    num_integer::Roots::sqrt(n)
}

/// `floor(sqrt(x) * 2^bits) / 2^bits`, a lower bound on `sqrt(x)` for `x >= 0`.
pub fn sqrt_rational_lower(x: &BigRational, bits: u32) -> BigRational {
    debug_assert!(!x.is_negative());
    // floor(sqrt(num * 4^bits / den)) / 2^bits  <=  sqrt(num/den)
    let num = x.numer().magnitude() << (2 * bits as usize);
    let den = x.denom().magnitude().clone();
    let scaled = num / &den;
    // floor(sqrt(floor(y))) = floor(sqrt(y)) for y >= 0
    let root = isqrt(&scaled);
    BigRational::new(BigInt::from(root), BigInt::from(BigUint::one() << bits as usize))
}

/// `ceil(sqrt(x) * 2^bits) / 2^bits`, an upper bound on `sqrt(x)` for `x >= 0`.
pub fn sqrt_rational_upper(x: &BigRational, bits: u32) -> BigRational {
    debug_assert!(!x.is_negative());
    let num = x.numer().magnitude() << (2 * bits as usize);
    let den = x.denom().magnitude().clone();
    let (q, r) = num.div_rem(&den);
    let root = isqrt(&q);
    // root^2 <= q <= num/den; if root^2 == num/den exactly, sqrt is exact.
    let exact = r.is_zero() && &root * &root == q;
    let adj = if exact { root } else { root + BigUint::one() };
    BigRational::new(BigInt::from(adj), BigInt::from(BigUint::one() << bits as usize))
}

/// Enclosure of `sqrt(d)` for a nonnegative integer `d`, width `<= 2^-bits`,
/// nested as `bits` grows (used as the root refinement step everywhere).
pub fn sqrt_integer_enclosure(d: &BigUint, bits: u32) -> RatInterval {
    let scaled = d << (2 * bits as usize);
    let root = isqrt(&scaled);
    let exact = &root * &root == scaled;
    let den = BigInt::from(BigUint::one() << bits as usize);
    let lo = BigRational::new(BigInt::from(root.clone()), den.clone());
    let hi = if exact {
        lo.clone()
    } else {
        BigRational::new(BigInt::from(root + BigUint::one()), den)
    };
    RatInterval { lo, hi }
}

/// Escalating precision schedule: start small, double until the budget.
/// The final element always equals `budget` itself.
pub(crate) fn precision_ladder(budget: u32) -> impl Iterator<Item = u32> {
    let mut steps = Vec::new();
    let mut p = STARTING_BITS.min(budget);
    loop {
        steps.push(p);
        if p >= budget {
            break;
        }
        p = (p * 2).min(budget);
    }
    steps.into_iter()
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::FromPrimitive;

    fn rat(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn isqrt_matches_squares() {
        for n in 0u64..2000 {
            let s = isqrt(&BigUint::from(n));
            let s2 = &s * &s;
            assert!(s2 <= BigUint::from(n));
            let s1 = &s + BigUint::one();
            assert!(&s1 * &s1 > BigUint::from(n));
        }
    }

    #[test]
    fn sqrt2_enclosure_nested_and_tight() {
        let d = BigUint::from(2u32);
        let mut prev: Option<RatInterval> = None;
        for bits in [4u32, 8, 16, 32, 64, 128] {
            let e = sqrt_integer_enclosure(&d, bits);
            let width_bound = rat(1, 1) / BigRational::from_integer(BigInt::from(1u64) << bits.min(62));
            if bits <= 62 {
                assert!(e.width() <= width_bound, "width too large at {bits} bits");
            }
            // the true value sits inside: lo^2 <= 2 <= hi^2
            assert!(&e.lo * &e.lo <= rat(2, 1));
            assert!(&e.hi * &e.hi >= rat(2, 1));
            if let Some(p) = prev {
                assert!(p.contains_interval(&e), "not nested at {bits} bits");
            }
            prev = Some(e);
        }
    }

    #[test]
    fn sqrt_exact_square_is_point() {
        let e = sqrt_integer_enclosure(&BigUint::from(49u32), 16);
        assert_eq!(e.lo, rat(7, 1));
        assert_eq!(e.hi, rat(7, 1));
    }

    #[test]
    fn interval_mul_signs() {
        let a = RatInterval::new(rat(-2, 1), rat(3, 1)).unwrap();
        let b = RatInterval::new(rat(-5, 1), rat(-1, 1)).unwrap();
        let p = a.mul(&b);
        assert_eq!(p.lo, rat(-15, 1));
        assert_eq!(p.hi, rat(10, 1));
    }

    #[test]
    fn interval_recip_rejects_zero() {
        let a = RatInterval::new(rat(-1, 2), rat(1, 2)).unwrap();
        assert!(a.recip().is_err());
        let b = RatInterval::new(rat(1, 3), rat(1, 2)).unwrap();
        let r = b.recip().unwrap();
        assert_eq!(r.lo, rat(2, 1));
        assert_eq!(r.hi, rat(3, 1));
    }

    #[test]
    fn sqrt_rational_bounds_bracket() {
        let x = rat(7, 3);
        let lo = sqrt_rational_lower(&x, 40);
        let hi = sqrt_rational_upper(&x, 40);
        assert!(lo <= hi);
        assert!(&lo * &lo <= x);
        assert!(&hi * &hi >= x);
        let w = &hi - &lo;
        assert!(w <= rat(1, 1 << 39));
        let approx = BigRational::from_f64((7.0f64 / 3.0).sqrt()).unwrap();
        assert!((&approx - &lo).abs() < rat(1, 1000));
    }

    #[test]
    fn ladder_reaches_budget() {
        let steps: Vec<u32> = precision_ladder(300).collect();
        assert_eq!(*steps.last().unwrap(), 300);
        assert!(steps.windows(2).all(|w| w[0] < w[1]));
        let one: Vec<u32> = precision_ladder(16).collect();
        assert_eq!(one, vec![16]);
    }
}
