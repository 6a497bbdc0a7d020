//! Computable reals.
//!
//! A [`Real`] is an exact description of a number together with an enclosure
//! oracle: `enclose(bits)` produces a rational interval of width `<= 2^-bits`
//! guaranteed to contain the value, and successive enclosures are nested.
//!
//! Three kinds can be written as literals:
//!
//! * rational — `"p/q"`, `"7"`, `"-3/4"` (plain decimals like `"0.25"` are
//!   accepted and read exactly as rationals);
//! * quadratic — `"a+b*sqrt(d)"` with rational `a`, `b` and square-free
//!   `d >= 2`, e.g. `"1/2+1/2*sqrt(5)"`, `"sqrt(2)"`, `"1-sqrt(3)"`;
//! * decimal ball — `"0.123456~1e-9"`, an interval `value ± radius` standing
//!   for a measurement of bounded accuracy.
//!
//! Exact kinds are closed under the arithmetic the rest of the crate needs:
//! internally they are sums `Σ cᵢ·√dᵢ` over distinct square-free radicands
//! ([`QuadExpr`]), which absorb mixed products such as
//! `(a+b√2)(c+d√3) ∈ span{1,√2,√3,√6}`. Square roots of such sums that do not
//! simplify (ℓ² norms of irrational vectors) are carried symbolically as a
//! [`Real`] of derived kind and compared by squaring.
//!
//! Comparisons return `Equal` only on symbolic identity; otherwise enclosures
//! are refined along an escalating precision ladder until they separate or the
//! budget is exhausted, in which case the typed
//! [`Undecidable`](crate::error::Error::Undecidable) outcome is returned.
//! Zero detection for certified expressions is exact: a sum of rational
//! multiples of square roots of distinct square-free integers vanishes only
//! when every coefficient does.

use std::cmp::Ordering;
use std::fmt;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

use super::{isqrt, precision_ladder, sqrt_integer_enclosure, RatInterval, DEFAULT_BUDGET_BITS};

/// Trial-division bound used when extracting square factors from radicands.
/// A residual below `TRIAL_BOUND^3` with no factor `<= TRIAL_BOUND` and no
/// perfect-square remnant is certifiably square-free.
const TRIAL_BOUND: u64 = 20_000;

/// Decompose `n = outside^2 * rad` with `rad` square-free when `certified`.
/// When certification fails (a huge residual that may hide a square), `rad`
/// still satisfies the identity but is not relied on for symbolic zero tests.
pub(crate) fn reduce_radicand(n: &BigUint) -> (BigUint, BigUint, bool) {
    if n.is_zero() {
        return (BigUint::zero(), BigUint::one(), true);
    }
    if let Some(small) = n.to_u64() {
        let (o, r, c) = reduce_radicand_u64(small);
        return (BigUint::from(o), BigUint::from(r), c);
    }
    let mut outside = BigUint::one();
    let mut rad = BigUint::one();
    let mut rem = n.clone();
    let mut f = 2u64;
    while f <= TRIAL_BOUND {
        let bf = BigUint::from(f);
        if &bf * &bf > rem {
            break;
        }
        let mut count = 0u32;
        loop {
            let (q, r) = rem.div_rem(&bf);
            if r.is_zero() {
                rem = q;
                count += 1;
            } else {
                break;
            }
        }
        if count > 0 {
            outside *= bf.pow(count / 2);
            if count % 2 == 1 {
                rad *= bf;
            }
        }
        f = if f == 2 { 3 } else { f + 2 };
    }
    if rem.is_one() {
        return (outside, rad, true);
    }
    let f_big = BigUint::from(f);
    if &f_big * &f_big > rem {
        // the residual is prime
        rad *= rem;
        return (outside, rad, true);
    }
    // all prime factors of rem exceed TRIAL_BOUND
    let s = isqrt(&rem);
    if &s * &s == rem {
        outside *= s;
        return (outside, rad, true);
    }
    let bound3 = BigUint::from(TRIAL_BOUND).pow(3);
    let certified = rem < bound3;
    rad *= rem;
    (outside, rad, certified)
}

fn reduce_radicand_u64(n: u64) -> (u64, u64, bool) {
    if n == 0 {
        return (0, 1, true);
    }
    let mut outside = 1u64;
    let mut rad = 1u64;
    let mut rem = n;
    let mut f = 2u64;
    while f <= TRIAL_BOUND && f.saturating_mul(f) <= rem {
        let mut count = 0u32;
        while rem % f == 0 {
            rem /= f;
            count += 1;
        }
        if count > 0 {
            outside *= f.pow(count / 2);
            if count % 2 == 1 {
                rad *= f;
            }
        }
        f = if f == 2 { 3 } else { f + 2 };
    }
    if rem == 1 {
        return (outside, rad, true);
    }
    if f.saturating_mul(f) > rem {
        return (outside, rad * rem, true);
    }
    let s = rem.isqrt();
    if s * s == rem {
        return (outside * s, rad, true);
    }
    // rem < 2^64 < TRIAL_BOUND^3 is false in general; check explicitly
    let certified = (rem as u128) < (TRIAL_BOUND as u128).pow(3);
    (outside, rad * rem, certified)
}

/// A sum `Σ cᵢ·√dᵢ` with nonzero rational `cᵢ` and distinct radicands `dᵢ`
/// (the term `d = 1` is the rational part). Kept sorted by radicand, which
/// makes the representation canonical: two certified expressions are equal as
/// numbers exactly when they are equal as data.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuadExpr {
    /// (radicand, coefficient), sorted by radicand, no zero coefficients.
    terms: Vec<(BigUint, BigRational)>,
    /// All radicands certified square-free.
    certified: bool,
}

impl QuadExpr {
    pub fn zero() -> Self {
        QuadExpr {
            terms: Vec::new(),
            certified: true,
        }
    }

    pub fn one() -> Self {
        Self::from_rational(BigRational::one())
    }

    pub fn from_rational(c: BigRational) -> Self {
        if c.is_zero() {
            return Self::zero();
        }
        QuadExpr {
            terms: vec![(BigUint::one(), c)],
            certified: true,
        }
    }

    pub fn from_integer(n: impl Into<BigInt>) -> Self {
        Self::from_rational(BigRational::from_integer(n.into()))
    }

    /// `c * sqrt(n)` with square extraction: `sqrt(12) -> 2*sqrt(3)`.
    pub fn sqrt_term(c: BigRational, n: &BigUint) -> Self {
        if c.is_zero() || n.is_zero() {
            return Self::zero();
        }
        let (outside, rad, certified) = reduce_radicand(n);
        let coef = c * BigRational::from_integer(BigInt::from(outside));
        if rad.is_one() {
            return Self::from_rational(coef);
        }
        QuadExpr {
            terms: vec![(rad, coef)],
            certified,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_rational(&self) -> bool {
        self.terms.is_empty() || (self.terms.len() == 1 && self.terms[0].0.is_one())
    }

    pub fn as_rational(&self) -> Option<BigRational> {
        if self.terms.is_empty() {
            Some(BigRational::zero())
        } else if self.terms.len() == 1 && self.terms[0].0.is_one() {
            Some(self.terms[0].1.clone())
        } else {
            None
        }
    }

    pub fn certified(&self) -> bool {
        self.certified
    }

    pub(crate) fn terms(&self) -> &[(BigUint, BigRational)] {
        &self.terms
    }

    fn push_term(acc: &mut Vec<(BigUint, BigRational)>, rad: BigUint, coef: BigRational) {
        if coef.is_zero() {
            return;
        }
        match acc.binary_search_by(|(r, _)| r.cmp(&rad)) {
            Ok(i) => {
                acc[i].1 += coef;
                if acc[i].1.is_zero() {
                    acc.remove(i);
                }
            }
            Err(i) => acc.insert(i, (rad, coef)),
        }
    }

    pub fn add(&self, other: &QuadExpr) -> QuadExpr {
        let mut terms = self.terms.clone();
        for (rad, coef) in &other.terms {
            Self::push_term(&mut terms, rad.clone(), coef.clone());
        }
        QuadExpr {
            terms,
            certified: self.certified && other.certified,
        }
    }

    pub fn neg(&self) -> QuadExpr {
        QuadExpr {
            terms: self
                .terms
                .iter()
                .map(|(r, c)| (r.clone(), -c.clone()))
                .collect(),
            certified: self.certified,
        }
    }

    pub fn sub(&self, other: &QuadExpr) -> QuadExpr {
        self.add(&other.neg())
    }

    pub fn scale(&self, c: &BigRational) -> QuadExpr {
        if c.is_zero() {
            return Self::zero();
        }
        QuadExpr {
            terms: self
                .terms
                .iter()
                .map(|(r, k)| (r.clone(), k * c))
                .collect(),
            certified: self.certified,
        }
    }

    pub fn mul(&self, other: &QuadExpr) -> QuadExpr {
        let mut terms: Vec<(BigUint, BigRational)> = Vec::new();
        let mut certified = self.certified && other.certified;
        for (r1, c1) in &self.terms {
            for (r2, c2) in &other.terms {
                // sqrt(r1)*sqrt(r2) = g*sqrt(r1r2/g^2), g = gcd(r1, r2);
                // for square-free r1, r2 the reduced radicand is square-free.
                let g = r1.gcd(r2);
                let rad = (r1 / &g) * (r2 / &g);
                let coef = c1 * c2 * BigRational::from_integer(BigInt::from(g));
                if !(self.certified && other.certified) && !rad.is_one() {
                    // re-reduce defensively when inputs were uncertified
                    let (o, rr, cert) = reduce_radicand(&rad);
                    certified &= cert;
                    Self::push_term(
                        &mut terms,
                        rr,
                        coef * BigRational::from_integer(BigInt::from(o)),
                    );
                } else {
                    Self::push_term(&mut terms, rad, coef);
                }
            }
        }
        QuadExpr { terms, certified }
    }

    pub fn square(&self) -> QuadExpr {
        self.mul(self)
    }

    /// Integer power by repeated squaring.
    pub fn pow(&self, e: u32) -> QuadExpr {
        let mut result = QuadExpr::one();
        let mut base = self.clone();
        let mut e = e;
        while e > 0 {
            if e & 1 == 1 {
                result = result.mul(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.square();
            }
        }
        result
    }

    /// Exact reciprocal by iterated conjugation: write the value as
    /// `A + sqrt(p)·B` for a prime `p` dividing some radicand, with `A`, `B`
    /// free of `p`; then `1/E = (A - sqrt(p)B) / (A² - pB²)` and the
    /// denominator involves strictly fewer primes. Fails on zero and on
    /// uncertified radicands whose prime structure cannot be recovered.
    pub fn recip(&self) -> Result<QuadExpr> {
        if self.is_zero() {
            return Err(Error::Degenerate("reciprocal of zero".into()));
        }
        if let Some(r) = self.as_rational() {
            return Ok(QuadExpr::from_rational(r.recip()));
        }
        let p = self.smallest_radicand_prime().ok_or_else(|| {
            Error::Domain("cannot rationalize: radicand with no accessible prime factor".into())
        })?;
        let bp = BigUint::from(p);
        // split E = A + sqrt(p) * B
        let mut a = QuadExpr::zero();
        let mut b = QuadExpr::zero();
        for (rad, coef) in &self.terms {
            if (rad % &bp).is_zero() {
                let e = rad / &bp;
                let t = QuadExpr {
                    terms: vec![(e, coef.clone())],
                    certified: self.certified,
                }
                .normalized();
                b = b.add(&t);
            } else {
                let t = QuadExpr {
                    terms: vec![(rad.clone(), coef.clone())],
                    certified: self.certified,
                };
                a = a.add(&t);
            }
        }
        let p_rat = BigRational::from_integer(BigInt::from(p));
        let denom = a.square().sub(&b.square().scale(&p_rat));
        if denom.is_zero() {
            return Err(Error::Domain(
                "cannot rationalize: dependent radicals".into(),
            ));
        }
        let denom_inv = denom.recip()?;
        // (A - sqrt(p) B) * denom_inv
        let sqrt_p = QuadExpr::sqrt_term(BigRational::one(), &bp);
        let numer = a.sub(&sqrt_p.mul(&b));
        Ok(numer.mul(&denom_inv))
    }

    /// Normalize radicand-1 bookkeeping after manual term surgery.
    fn normalized(self) -> QuadExpr {
        let mut out = QuadExpr {
            terms: Vec::new(),
            certified: self.certified,
        };
        for (r, c) in self.terms {
            if r.is_one() {
                Self::push_term(&mut out.terms, BigUint::one(), c);
            } else {
                Self::push_term(&mut out.terms, r, c);
            }
        }
        out
    }

    /// Smallest prime factor of any radicand `> 1`, searching up to the trial
    /// bound.
    fn smallest_radicand_prime(&self) -> Option<u64> {
        let mut best: Option<u64> = None;
        for (rad, _) in &self.terms {
            if rad.is_one() {
                continue;
            }
            if let Some(p) = smallest_prime_factor(rad) {
                best = Some(best.map_or(p, |b| b.min(p)));
            } else {
                return None;
            }
        }
        best
    }

    /// Certified enclosure of width `<= 2^-bits`; enclosures are nested as
    /// `bits` grows.
    pub fn enclose(&self, bits: u32) -> RatInterval {
        if self.terms.is_empty() {
            return RatInterval::point(BigRational::zero());
        }
        let n = self.terms.len() as u64;
        let n_bits = 64 - n.leading_zeros() as u32;
        let mut acc = RatInterval::point(BigRational::zero());
        for (rad, coef) in &self.terms {
            if rad.is_one() {
                acc = acc.shift(coef);
                continue;
            }
            // per-term budget: |coef| * 2^-b <= 2^-bits / n
            let coef_bits = {
                let num_bits = coef.numer().magnitude().bits() as i64;
                let den_bits = coef.denom().magnitude().bits() as i64;
                (num_bits - den_bits + 1).max(0) as u32
            };
            let b = bits + coef_bits + n_bits + 1;
            let root = sqrt_integer_enclosure(rad, b);
            acc = acc.add(&root.scale(coef));
        }
        acc
    }

    /// Exact sign: `-1`, `0`, `+1`. Symbolic zero is decided from the
    /// representation (valid because certified radicands are square-free and
    /// distinct); nonzero values are separated from zero by refinement.
    pub fn sign(&self, budget_bits: u32) -> Result<i8> {
        if self.terms.is_empty() {
            return Ok(0);
        }
        if self.terms.len() == 1 {
            // c * sqrt(d) with d >= 1: sign of c
            return Ok(if self.terms[0].1.is_positive() { 1 } else { -1 });
        }
        for bits in precision_ladder(budget_bits) {
            let e = self.enclose(bits);
            if let Some(s) = e.uniform_sign() {
                return Ok(s);
            }
        }
        Err(Error::undecidable(
            format!("sign of {}", self.display_sum()),
            budget_bits,
        ))
    }

    /// Compare two expressions. `Equal` is returned exactly when the
    /// difference is symbolically zero.
    pub fn compare(&self, other: &QuadExpr, budget_bits: u32) -> Result<Ordering> {
        let diff = self.sub(other);
        if diff.is_zero() {
            return Ok(Ordering::Equal);
        }
        if diff.certified {
            // nonzero by linear independence; refinement must terminate
            match diff.sign(budget_bits)? {
                1 => Ok(Ordering::Greater),
                -1 => Ok(Ordering::Less),
                _ => Ok(Ordering::Equal),
            }
        } else {
            match diff.sign(budget_bits) {
                Ok(1) => Ok(Ordering::Greater),
                Ok(-1) => Ok(Ordering::Less),
                Ok(_) => Ok(Ordering::Equal),
                Err(e) => Err(e),
            }
        }
    }

    pub fn cmp_rational(&self, r: &BigRational, budget_bits: u32) -> Result<Ordering> {
        self.compare(&QuadExpr::from_rational(r.clone()), budget_bits)
    }

    /// Exact floor. Rational values are floored directly; irrational ones by
    /// refinement (an irrational value cannot sit on an integer, so the loop
    /// terminates unless the budget runs out first).
    pub fn floor(&self, budget_bits: u32) -> Result<BigInt> {
        if let Some(r) = self.as_rational() {
            return Ok(r.floor().to_integer());
        }
        for bits in precision_ladder(budget_bits) {
            let e = self.enclose(bits);
            let lo_f = e.lo().floor().to_integer();
            let hi_f = e.hi().floor().to_integer();
            if lo_f == hi_f {
                return Ok(lo_f);
            }
            // hi may sit exactly on an integer; the open question is whether
            // the value reaches it, and refinement settles that for
            // irrational values.
        }
        Err(Error::undecidable(
            format!("floor of {}", self.display_sum()),
            budget_bits,
        ))
    }

    fn display_sum(&self) -> String {
        format!("{}", DisplayQuad(self))
    }
}

/// Smallest prime factor up to the trial bound; `None` if none found (the
/// number is a prime power beyond the bound or composite of large primes).
fn smallest_prime_factor(n: &BigUint) -> Option<u64> {
    if let Some(v) = n.to_u64() {
        if v % 2 == 0 {
            return Some(2);
        }
        let mut f = 3u64;
        while f.saturating_mul(f) <= v {
            if v % f == 0 {
                return Some(f);
            }
            f += 2;
        }
        return if v > 1 { Some(v) } else { None };
    }
    if (n % 2u32).is_zero() {
        return Some(2);
    }
    let mut f = 3u64;
    while f <= TRIAL_BOUND {
        if (n % f).is_zero() {
            return Some(f);
        }
        f += 2;
    }
    None
}

struct DisplayQuad<'a>(&'a QuadExpr);

impl fmt::Display for DisplayQuad<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, (rad, coef)) in self.0.terms.iter().enumerate() {
            let neg = coef.is_negative();
            let mag = coef.abs();
            if i == 0 {
                if neg {
                    write!(f, "-")?;
                }
            } else if neg {
                write!(f, "-")?;
            } else {
                write!(f, "+")?;
            }
            if rad.is_one() {
                write!(f, "{mag}")?;
            } else if mag.is_one() {
                write!(f, "sqrt({rad})")?;
            } else {
                write!(f, "{mag}*sqrt({rad})")?;
            }
        }
        Ok(())
    }
}

/// Public classification of a [`Real`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RealKind {
    /// Exact rational.
    Rational,
    /// `a + b*sqrt(d)`, one square-free radicand.
    Quadratic,
    /// A ball `value ± radius` from a decimal literal.
    DecimalLiteral,
    /// Exact value computed by the library that does not fit the literal
    /// grammar (several radicands, or an unresolved square root of a sum).
    Derived,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Repr {
    /// Exact sum of radical terms.
    Exact(QuadExpr),
    /// `sign * sqrt(expr)` where `expr >= 0` is not a rational square.
    Sqrt { expr: QuadExpr, negated: bool },
    /// Ball `value ± radius` (radius >= 0).
    Ball {
        value: BigRational,
        radius: BigRational,
    },
}

/// An exact or ball-valued real number with an enclosure oracle. See the
/// module documentation for the contract.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Real {
    repr: Repr,
}

impl Real {
    // ------------------------------------------------------------------
    // constructors

    pub fn zero() -> Self {
        Real {
            repr: Repr::Exact(QuadExpr::zero()),
        }
    }

    pub fn one() -> Self {
        Real {
            repr: Repr::Exact(QuadExpr::one()),
        }
    }

    pub fn from_rational(r: BigRational) -> Self {
        Real {
            repr: Repr::Exact(QuadExpr::from_rational(r)),
        }
    }

    pub fn from_integer(n: impl Into<BigInt>) -> Self {
        Self::from_rational(BigRational::from_integer(n.into()))
    }

    pub fn from_expr(e: QuadExpr) -> Self {
        Real { repr: Repr::Exact(e) }
    }

    /// Quadratic literal `a + b*sqrt(d)`. Requires `d >= 2` square-free and
    /// `b != 0` (use a rational otherwise).
    pub fn quadratic(a: BigRational, b: BigRational, d: u64) -> Result<Self> {
        if b.is_zero() {
            return Err(Error::Domain(
                "quadratic literal requires b != 0; write a rational instead".into(),
            ));
        }
        if d < 2 {
            return Err(Error::Domain(format!(
                "quadratic radicand must be >= 2, got {d}"
            )));
        }
        let (outside, rad, certified) = reduce_radicand(&BigUint::from(d));
        if !certified {
            return Err(Error::Domain(format!(
                "cannot certify {d} square-free"
            )));
        }
        if !outside.is_one() || rad.is_one() {
            return Err(Error::Domain(format!(
                "radicand {d} is not square-free (d = {}^2 * {})",
                outside, rad
            )));
        }
        let expr = QuadExpr::from_rational(a).add(&QuadExpr::sqrt_term(b, &BigUint::from(d)));
        Ok(Real {
            repr: Repr::Exact(expr),
        })
    }

    /// Decimal ball literal `value ± radius`, `radius >= 0`.
    pub fn decimal(value: BigRational, radius: BigRational) -> Result<Self> {
        if radius.is_negative() {
            return Err(Error::Domain("ball radius must be >= 0".into()));
        }
        Ok(Real {
            repr: Repr::Ball { value, radius },
        })
    }

    /// Exact square root of a nonnegative rational; reduces to rational or a
    /// single radical term.
    pub fn sqrt_rational(x: &BigRational) -> Result<Self> {
        if x.is_negative() {
            return Err(Error::Domain("square root of a negative rational".into()));
        }
        if x.is_zero() {
            return Ok(Real::zero());
        }
        // sqrt(n/m) = sqrt(n*m)/m
        let n = x.numer().magnitude();
        let m = x.denom().magnitude();
        let prod = n * m;
        let inv_m = BigRational::new(BigInt::one(), BigInt::from(m.clone()));
        Ok(Real {
            repr: Repr::Exact(QuadExpr::sqrt_term(inv_m, &prod)),
        })
    }

    /// Square root of an exact expression; keeps a symbolic `sqrt` when the
    /// radicand is irrational. Errors if the radicand is certifiably negative.
    pub fn sqrt_expr(e: &QuadExpr, budget_bits: u32) -> Result<Self> {
        if let Some(r) = e.as_rational() {
            return Self::sqrt_rational(&r);
        }
        match e.sign(budget_bits)? {
            -1 => Err(Error::Domain("square root of a negative value".into())),
            0 => Ok(Real::zero()),
            _ => Ok(Real {
                repr: Repr::Sqrt {
                    expr: e.clone(),
                    negated: false,
                },
            }),
        }
    }

    // ------------------------------------------------------------------
    // inspection

    pub fn kind(&self) -> RealKind {
        match &self.repr {
            Repr::Exact(e) => {
                if e.is_rational() {
                    RealKind::Rational
                } else {
                    let radicals = e.terms().iter().filter(|(r, _)| !r.is_one()).count();
                    if radicals == 1 && e.certified() {
                        RealKind::Quadratic
                    } else {
                        RealKind::Derived
                    }
                }
            }
            Repr::Sqrt { .. } => RealKind::Derived,
            Repr::Ball { .. } => RealKind::DecimalLiteral,
        }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self.repr, Repr::Exact(_) | Repr::Sqrt { .. })
    }

    pub fn as_rational(&self) -> Option<BigRational> {
        match &self.repr {
            Repr::Exact(e) => e.as_rational(),
            _ => None,
        }
    }

    pub fn as_expr(&self) -> Option<&QuadExpr> {
        match &self.repr {
            Repr::Exact(e) => Some(e),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        match &self.repr {
            Repr::Exact(e) => e.is_zero(),
            Repr::Sqrt { .. } => false,
            Repr::Ball { value, radius } => value.is_zero() && radius.is_zero(),
        }
    }

    // ------------------------------------------------------------------
    // enclosure oracle

    /// Certified enclosure of width `<= 2^-bits`. For ball values the stored
    /// interval is returned as long as its own width fits the request;
    /// otherwise the literal's accuracy is exhausted and the typed error is
    /// raised.
    pub fn enclose(&self, bits: u32) -> Result<RatInterval> {
        match &self.repr {
            Repr::Exact(e) => Ok(e.enclose(bits)),
            Repr::Sqrt { expr, negated } => {
                let target = pow2_inv(bits);
                // refine the radicand until the sqrt interval is tight enough
                let mut b = bits.max(8);
                loop {
                    let inner = expr.enclose(b);
                    let root = inner.sqrt_outward(b)?;
                    if root.width() <= target {
                        return Ok(if *negated { root.neg() } else { root });
                    }
                    b = b
                        .checked_mul(2)
                        .ok_or_else(|| Error::undecidable("sqrt enclosure refinement", bits))?;
                    if b > bits.saturating_mul(64).max(1 << 20) {
                        return Err(Error::undecidable("sqrt enclosure refinement", bits));
                    }
                }
            }
            Repr::Ball { value, radius } => {
                let width = radius * BigRational::from_integer(BigInt::from(2));
                if width > pow2_inv(bits) {
                    return Err(Error::undecidable(
                        format!(
                            "enclosure of width 2^-{bits} requested from a ball of radius {radius}"
                        ),
                        bits,
                    ));
                }
                RatInterval::new(value - radius, value + radius)
            }
        }
    }

    /// Best available enclosure at the given precision: like [`enclose`] but
    /// a ball answers with its full interval instead of failing.
    pub fn enclose_best(&self, bits: u32) -> RatInterval {
        match &self.repr {
            Repr::Ball { value, radius } => {
                RatInterval::new(value - radius, value + radius).expect("radius >= 0")
            }
            _ => self
                .enclose(bits)
                .unwrap_or_else(|_| self.coarse_interval()),
        }
    }

    fn coarse_interval(&self) -> RatInterval {
        match &self.repr {
            Repr::Exact(e) => e.enclose(8),
            Repr::Sqrt { expr, negated } => {
                let inner = expr.enclose(16);
                let root = inner
                    .sqrt_outward(16)
                    .unwrap_or_else(|_| RatInterval::point(BigRational::zero()));
                if *negated {
                    root.neg()
                } else {
                    root
                }
            }
            Repr::Ball { value, radius } => {
                RatInterval::new(value - radius, value + radius).expect("radius >= 0")
            }
        }
    }

    /// Approximate double, for reporting only (never for decisions).
    pub fn approx_f64(&self) -> f64 {
        let i = self.enclose_best(64);
        i.midpoint().to_f64().unwrap_or(f64::NAN)
    }

    // ------------------------------------------------------------------
    // comparisons

    /// Three-way comparison. `Equal` only for symbolically identical exact
    /// values; ball values never compare equal. Refinement up to the budget,
    /// then the typed undecidable outcome.
    pub fn compare(&self, other: &Real, budget_bits: u32) -> Result<Ordering> {
        use Repr::*;
        match (&self.repr, &other.repr) {
            (Exact(a), Exact(b)) => a.compare(b, budget_bits),
            (Sqrt { .. }, Exact(_)) | (Exact(_), Sqrt { .. }) | (Sqrt { .. }, Sqrt { .. }) => {
                self.compare_with_squares(other, budget_bits)
            }
            _ => self.compare_by_interval(other, budget_bits),
        }
    }

    pub fn cmp_rational(&self, r: &BigRational, budget_bits: u32) -> Result<Ordering> {
        self.compare(&Real::from_rational(r.clone()), budget_bits)
    }

    /// Compare `|self|` with a rational bound without extracting a sign
    /// first: exact values compare through their squares, so the test stays
    /// exact even for square-root values.
    pub fn abs_cmp_rational(&self, bound: &BigRational, budget_bits: u32) -> Result<Ordering> {
        if bound.is_negative() {
            return Ok(Ordering::Greater);
        }
        if !matches!(self.repr, Repr::Ball { .. }) {
            let sq = self.mul(self);
            if let Some(e) = sq.as_expr() {
                return e.cmp_rational(&(bound * bound), budget_bits);
            }
        }
        for bits in precision_ladder(budget_bits) {
            let iv = self.enclose_best(bits).abs();
            if iv.lo() > bound {
                return Ok(Ordering::Greater);
            }
            if iv.hi() < bound {
                return Ok(Ordering::Less);
            }
            if iv.lo() == iv.hi() && iv.lo() == bound {
                return Ok(Ordering::Equal);
            }
            if matches!(self.repr, Repr::Ball { .. }) {
                break;
            }
        }
        Err(Error::undecidable(
            "absolute-value comparison against a rational bound",
            budget_bits,
        ))
    }

    pub fn sign(&self, budget_bits: u32) -> Result<i8> {
        match &self.repr {
            Repr::Exact(e) => e.sign(budget_bits),
            Repr::Sqrt { negated, .. } => Ok(if *negated { -1 } else { 1 }),
            Repr::Ball { value, radius } => {
                if value.is_zero() && radius.is_zero() {
                    Ok(0)
                } else if (value - radius).is_positive() {
                    Ok(1)
                } else if (value + radius).is_negative() {
                    Ok(-1)
                } else {
                    Err(Error::undecidable(
                        "sign of a ball containing zero",
                        budget_bits,
                    ))
                }
            }
        }
    }

    fn compare_with_squares(&self, other: &Real, budget: u32) -> Result<Ordering> {
        use Repr::*;
        // Orient so that a Sqrt is on the left.
        match (&self.repr, &other.repr) {
            (Sqrt { expr, negated }, Exact(f)) => {
                let sqrt_sign: i8 = if *negated { -1 } else { 1 };
                let f_sign = f.sign(budget)?;
                if sqrt_sign >= 0 && f_sign <= 0 {
                    // sqrt value > 0 (Sqrt repr is never zero)
                    return Ok(Ordering::Greater);
                }
                if sqrt_sign < 0 && f_sign >= 0 {
                    return Ok(Ordering::Less);
                }
                // same strict sign: compare squares, flip for negatives
                let e2 = expr.clone();
                let f2 = f.square();
                let ord = e2.compare(&f2, budget)?;
                Ok(if sqrt_sign > 0 { ord } else { ord.reverse() })
            }
            (Exact(_), Sqrt { .. }) => Ok(other.compare_with_squares(self, budget)?.reverse()),
            (
                Sqrt {
                    expr: e1,
                    negated: n1,
                },
                Sqrt {
                    expr: e2,
                    negated: n2,
                },
            ) => match (n1, n2) {
                (false, true) => Ok(Ordering::Greater),
                (true, false) => Ok(Ordering::Less),
                (false, false) => e1.compare(e2, budget),
                (true, true) => Ok(e1.compare(e2, budget)?.reverse()),
            },
            _ => unreachable!("compare_with_squares called on non-exact values"),
        }
    }

    fn compare_by_interval(&self, other: &Real, budget: u32) -> Result<Ordering> {
        for bits in precision_ladder(budget) {
            let a = self.enclose_best(bits);
            let b = other.enclose_best(bits);
            if let Some(ord) = a.partial_cmp_interval(&b) {
                return Ok(ord);
            }
        }
        Err(Error::undecidable(
            format!("compare {} with {}", self, other),
            budget,
        ))
    }

    // ------------------------------------------------------------------
    // arithmetic

    pub fn neg(&self) -> Real {
        match &self.repr {
            Repr::Exact(e) => Real {
                repr: Repr::Exact(e.neg()),
            },
            Repr::Sqrt { expr, negated } => Real {
                repr: Repr::Sqrt {
                    expr: expr.clone(),
                    negated: !negated,
                },
            },
            Repr::Ball { value, radius } => Real {
                repr: Repr::Ball {
                    value: -value.clone(),
                    radius: radius.clone(),
                },
            },
        }
    }

    pub fn add(&self, other: &Real) -> Real {
        use Repr::*;
        match (&self.repr, &other.repr) {
            (Exact(a), Exact(b)) => Real {
                repr: Exact(a.add(b)),
            },
            _ => self.ball_binop(other, RatInterval::add),
        }
    }

    pub fn sub(&self, other: &Real) -> Real {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &Real) -> Real {
        use Repr::*;
        match (&self.repr, &other.repr) {
            (Exact(a), Exact(b)) => Real {
                repr: Exact(a.mul(b)),
            },
            (Sqrt { expr, negated }, Exact(f)) | (Exact(f), Sqrt { expr, negated }) => {
                // sqrt(E) * rational c = sign(c) * sqrt(E c^2)
                if let Some(c) = f.as_rational() {
                    if c.is_zero() {
                        return Real::zero();
                    }
                    let c2 = &c * &c;
                    let scaled = expr.scale(&c2);
                    let neg = *negated != c.is_negative();
                    if let Some(r) = scaled.as_rational() {
                        let root = Real::sqrt_rational(&r).expect("nonnegative");
                        return if neg { root.neg() } else { root };
                    }
                    return Real {
                        repr: Sqrt {
                            expr: scaled,
                            negated: neg,
                        },
                    };
                }
                self.ball_binop(other, RatInterval::mul)
            }
            (
                Sqrt {
                    expr: e1,
                    negated: n1,
                },
                Sqrt {
                    expr: e2,
                    negated: n2,
                },
            ) => {
                // sqrt(E1)*sqrt(E2) = sqrt(E1*E2)
                let prod = e1.mul(e2);
                let neg = n1 != n2;
                let root = match Real::sqrt_expr(&prod, DEFAULT_BUDGET_BITS) {
                    Ok(r) => r,
                    Err(_) => return self.ball_binop(other, RatInterval::mul),
                };
                if neg {
                    root.neg()
                } else {
                    root
                }
            }
            _ => self.ball_binop(other, RatInterval::mul),
        }
    }

    /// Exact integer power; `e = 0` gives one.
    pub fn pow_int(&self, e: u32) -> Real {
        match &self.repr {
            Repr::Exact(x) => Real {
                repr: Repr::Exact(x.pow(e)),
            },
            Repr::Sqrt { expr, negated } => {
                // (±sqrt(E))^e
                let half = expr.pow(e / 2);
                let neg = *negated && e % 2 == 1;
                if e % 2 == 0 {
                    Real {
                        repr: Repr::Exact(half),
                    }
                } else {
                    let root = match Real::sqrt_expr(&expr.clone(), DEFAULT_BUDGET_BITS) {
                        Ok(r) => r,
                        Err(_) => return Real::from_rational(BigRational::one()),
                    };
                    let v = Real {
                        repr: Repr::Exact(half),
                    }
                    .mul(&root);
                    if neg {
                        v.neg()
                    } else {
                        v
                    }
                }
            }
            Repr::Ball { .. } => {
                let mut acc = Real::one();
                for _ in 0..e {
                    acc = acc.mul(self);
                }
                acc
            }
        }
    }

    pub fn recip(&self) -> Result<Real> {
        match &self.repr {
            Repr::Exact(e) => Ok(Real {
                repr: Repr::Exact(e.recip()?),
            }),
            Repr::Sqrt { expr, negated } => {
                // 1/sqrt(E) = sqrt(1/E)
                let inv = expr.recip()?;
                let root = Real::sqrt_expr(&inv, DEFAULT_BUDGET_BITS)?;
                Ok(if *negated { root.neg() } else { root })
            }
            Repr::Ball { value, radius } => {
                let iv = RatInterval::new(value - radius, value + radius)?;
                let r = iv.recip()?;
                Ok(Real::from_interval_hull(&r))
            }
        }
    }

    /// Absolute value. Falls back to a ball when the sign cannot be decided
    /// at the default budget (only possible for balls straddling zero and
    /// uncertified radicals).
    pub fn abs(&self) -> Real {
        match self.sign(DEFAULT_BUDGET_BITS) {
            Ok(s) => {
                if s < 0 {
                    self.neg()
                } else {
                    self.clone()
                }
            }
            Err(_) => {
                let iv = self.enclose_best(DEFAULT_BUDGET_BITS).abs();
                Real::from_interval_hull(&iv)
            }
        }
    }

    fn ball_binop(
        &self,
        other: &Real,
        op: impl Fn(&RatInterval, &RatInterval) -> RatInterval,
    ) -> Real {
        let a = self.enclose_best(DEFAULT_BUDGET_BITS);
        let b = other.enclose_best(DEFAULT_BUDGET_BITS);
        Real::from_interval_hull(&op(&a, &b))
    }

    /// Ball covering the interval (midpoint ± half-width).
    pub fn from_interval_hull(iv: &RatInterval) -> Real {
        let mid = iv.midpoint();
        let two = BigRational::from_integer(BigInt::from(2));
        let rad = iv.width() / two;
        Real {
            repr: Repr::Ball {
                value: mid,
                radius: rad,
            },
        }
    }

    /// Exact floor; undecidable for balls straddling an integer.
    pub fn floor(&self, budget_bits: u32) -> Result<BigInt> {
        match &self.repr {
            Repr::Exact(e) => e.floor(budget_bits),
            Repr::Sqrt { .. } => {
                for bits in precision_ladder(budget_bits) {
                    let iv = self.enclose(bits)?;
                    let lo_f = iv.lo().floor().to_integer();
                    let hi_f = iv.hi().floor().to_integer();
                    if lo_f == hi_f {
                        return Ok(lo_f);
                    }
                }
                Err(Error::undecidable(format!("floor of {}", self), budget_bits))
            }
            Repr::Ball { value, radius } => {
                let lo = (value - radius).floor().to_integer();
                let hi = (value + radius).floor().to_integer();
                if lo == hi {
                    Ok(lo)
                } else {
                    Err(Error::undecidable(
                        format!("floor of ball {}", self),
                        budget_bits,
                    ))
                }
            }
        }
    }

    pub fn ceil(&self, budget_bits: u32) -> Result<BigInt> {
        Ok(-self.neg().floor(budget_bits)?)
    }
}

fn pow2_inv(bits: u32) -> BigRational {
    BigRational::new(BigInt::one(), BigInt::one() << bits as usize)
}

// ----------------------------------------------------------------------
// parsing and formatting

impl Real {
    /// Parse a literal. Accepted forms:
    ///
    /// * rationals: `7`, `-3/4`, `0.25` (read exactly);
    /// * radical sums: `sqrt(2)`, `1/2+1/2*sqrt(5)`, `1-2/3*sqrt(7)`;
    /// * decimal balls: `0.3183098861~1e-10`, `2.718~1/1000`.
    pub fn parse(input: &str) -> Result<Self> {
        let s = input.trim();
        if s.is_empty() {
            return Err(Error::Parse("empty literal".into()));
        }
        if let Some((v, r)) = s.split_once('~') {
            let value = parse_plain_number(v.trim())?;
            let radius = parse_plain_number(r.trim())?;
            if radius.is_negative() {
                return Err(Error::Parse(format!("negative ball radius in {input:?}")));
            }
            return Real::decimal(value, radius);
        }
        let mut expr = QuadExpr::zero();
        for (sign, term) in split_terms(s)? {
            let t = parse_term(term)?;
            let t = if sign < 0 { t.neg() } else { t };
            expr = expr.add(&t);
        }
        Ok(Real {
            repr: Repr::Exact(expr),
        })
    }
}

/// Split a sum into signed top-level terms.
fn split_terms(s: &str) -> Result<Vec<(i8, &str)>> {
    let bytes = s.as_bytes();
    let mut out = Vec::new();
    let mut start = 0usize;
    let mut sign: i8 = 1;
    let mut depth = 0i32;
    let mut i = 0usize;
    // leading sign
    if bytes[0] == b'+' {
        start = 1;
        i = 1;
    } else if bytes[0] == b'-' {
        sign = -1;
        start = 1;
        i = 1;
    }
    while i < bytes.len() {
        match bytes[i] {
            b'(' => depth += 1,
            b')' => depth -= 1,
            // a sign right after `e`/`E` belongs to a scientific exponent
            b'+' | b'-'
                if depth == 0
                    && i > start
                    && !matches!(bytes[i - 1], b'e' | b'E') =>
            {
                out.push((sign, s[start..i].trim()));
                sign = if bytes[i] == b'-' { -1 } else { 1 };
                start = i + 1;
            }
            _ => {}
        }
        i += 1;
    }
    if depth != 0 {
        return Err(Error::Parse(format!("unbalanced parentheses in {s:?}")));
    }
    if start >= s.len() {
        return Err(Error::Parse(format!("dangling sign in {s:?}")));
    }
    out.push((sign, s[start..].trim()));
    Ok(out)
}

/// One term: `rational`, `sqrt(d)`, or `rational*sqrt(d)`.
fn parse_term(t: &str) -> Result<QuadExpr> {
    if let Some(idx) = t.find("sqrt(") {
        if !t.ends_with(')') {
            return Err(Error::Parse(format!("malformed sqrt term {t:?}")));
        }
        let inner = &t[idx + 5..t.len() - 1];
        let d: BigUint = inner
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("radicand must be a positive integer: {inner:?}")))?;
        if d.is_zero() {
            return Err(Error::Parse("radicand must be positive".into()));
        }
        let coef_str = t[..idx].trim();
        let coef = if coef_str.is_empty() {
            BigRational::one()
        } else {
            let c = coef_str
                .strip_suffix('*')
                .map(str::trim)
                .ok_or_else(|| Error::Parse(format!("expected `*` before sqrt in {t:?}")))?;
            parse_plain_number(c)?
        };
        let term = QuadExpr::sqrt_term(coef, &d);
        // literal radicands must certify square-free (after reduction they do)
        Ok(term)
    } else {
        Ok(QuadExpr::from_rational(parse_plain_number(t)?))
    }
}

/// `p/q`, integer, plain decimal, or scientific notation, read exactly.
fn parse_plain_number(s: &str) -> Result<BigRational> {
    let s = s.trim();
    if s.is_empty() {
        return Err(Error::Parse("empty number".into()));
    }
    if let Some((n, d)) = s.split_once('/') {
        let num: BigInt = n
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("bad numerator {n:?}")))?;
        let den: BigInt = d
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("bad denominator {d:?}")))?;
        if den.is_zero() {
            return Err(Error::Parse("zero denominator".into()));
        }
        return Ok(BigRational::new(num, den));
    }
    // scientific / decimal / integer
    let (mantissa, exp) = match s.find(['e', 'E']) {
        Some(i) => {
            let e: i64 = s[i + 1..]
                .parse()
                .map_err(|_| Error::Parse(format!("bad exponent in {s:?}")))?;
            (&s[..i], e)
        }
        None => (s, 0i64),
    };
    let (int_part, frac_part) = match mantissa.find('.') {
        Some(i) => (&mantissa[..i], &mantissa[i + 1..]),
        None => (mantissa, ""),
    };
    let neg = int_part.starts_with('-');
    let int_digits = int_part.trim_start_matches(['-', '+']);
    if !int_digits.chars().all(|c| c.is_ascii_digit())
        || !frac_part.chars().all(|c| c.is_ascii_digit())
        || (int_digits.is_empty() && frac_part.is_empty())
    {
        return Err(Error::Parse(format!("bad number {s:?}")));
    }
    let digits = format!(
        "{}{}",
        if int_digits.is_empty() { "0" } else { int_digits },
        frac_part
    );
    let mut value = BigRational::new(
        digits
            .parse::<BigInt>()
            .map_err(|_| Error::Parse(format!("bad number {s:?}")))?,
        BigInt::one(),
    );
    let shift = exp - frac_part.len() as i64;
    let ten = BigInt::from(10);
    if shift >= 0 {
        value *= BigRational::from_integer(ten.pow(shift as u32));
    } else {
        value /= BigRational::from_integer(ten.pow((-shift) as u32));
    }
    if neg {
        value = -value;
    }
    Ok(value)
}

/// Print a rational as an exact decimal if its denominator is 2^a·5^b,
/// otherwise as `p/q`.
fn format_rational_decimal(r: &BigRational) -> String {
    let mut den = r.denom().magnitude().clone();
    let mut twos = 0u32;
    let mut fives = 0u32;
    let two = BigUint::from(2u32);
    let five = BigUint::from(5u32);
    while (&den % &two).is_zero() {
        den /= &two;
        twos += 1;
    }
    while (&den % &five).is_zero() {
        den /= &five;
        fives += 1;
    }
    if !den.is_one() {
        return format!("{r}");
    }
    let digits = twos.max(fives);
    // r = m / 10^digits for integer m
    let scale = BigInt::from(10).pow(digits);
    let m = (r * BigRational::from_integer(scale)).to_integer();
    if digits == 0 {
        return format!("{m}");
    }
    let neg = m.is_negative();
    let mag = m.magnitude().to_string();
    let mag = if mag.len() <= digits as usize {
        format!("{}{}", "0".repeat(digits as usize + 1 - mag.len()), mag)
    } else {
        mag
    };
    let (int_part, frac_part) = mag.split_at(mag.len() - digits as usize);
    format!("{}{}.{}", if neg { "-" } else { "" }, int_part, frac_part)
}

impl fmt::Display for Real {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.repr {
            Repr::Exact(e) => write!(f, "{}", DisplayQuad(e)),
            Repr::Sqrt { expr, negated } => {
                if *negated {
                    write!(f, "-sqrt({})", DisplayQuad(expr))
                } else {
                    write!(f, "sqrt({})", DisplayQuad(expr))
                }
            }
            Repr::Ball { value, radius } => {
                write!(
                    f,
                    "{}~{}",
                    format_rational_decimal(value),
                    format_rational_decimal(radius)
                )
            }
        }
    }
}

impl serde::Serialize for Real {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> serde::Deserialize<'de> for Real {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Real::parse(&s).map_err(serde::de::Error::custom)
    }
}
