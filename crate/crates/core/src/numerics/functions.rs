//! Certified enclosures for the few transcendental quantities the library
//! needs: natural logarithms and rational powers of positive rationals.
//!
//! Every function here returns a [`RatInterval`] guaranteed to contain the
//! mathematical value.  All rounding is outward; no floating point is
//! consulted.  Widths shrink as the precision parameter grows, and a
//! function that cannot reach the requested width inside its escalation
//! ladder reports [`Error::Undecidable`] rather than silently returning a
//! loose answer.

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};

use super::RatInterval;

/// Round an interval outward onto the dyadic grid with step `2^-bits`.
///
/// Keeps denominators bounded during long series evaluations; the result
/// contains the input.
pub(crate) fn round_outward(iv: &RatInterval, bits: u32) -> RatInterval {
    let scale = BigInt::one() << bits as usize;
    let scale_r = BigRational::from_integer(scale.clone());
    let lo = (iv.lo() * &scale_r).floor() / scale_r.clone();
    let hi = (iv.hi() * &scale_r).ceil() / scale_r;
    RatInterval::hull(lo, hi)
}

/// `2^-bits` as a rational.
fn dyadic_eps(bits: u32) -> BigRational {
    BigRational::new(BigInt::one(), BigInt::one() << bits as usize)
}

/// atanh on a point `t` in `[0, 1/2]`, as a certified enclosure.
///
/// Uses the odd series `t + t^3/3 + t^5/5 + ...`.  After the term in
/// `t^(2N-1)` the tail is bounded by `t^(2N+1) / ((2N+1)(1 - t^2))`, and
/// `1/(1 - t^2) <= 4/3` on the domain.
fn atanh_point(t: &BigRational, bits: u32) -> RatInterval {
    debug_assert!(!t.is_negative());
    let work = bits + 8;
    let t2 = round_outward(&RatInterval::point(t * t), work);
    let mut power = round_outward(&RatInterval::point(t.clone()), work);
    let mut sum = RatInterval::point(BigRational::zero());
    let eps = dyadic_eps(bits + 4);
    let tail_factor = BigRational::new(BigInt::from(4), BigInt::from(3));
    let mut k = 0u32;
    loop {
        let denom = BigRational::from_integer(BigInt::from(2 * k + 1));
        sum = round_outward(&sum.add(&power.scale(&denom.recip())), work);
        // next power: t^(2k+3)
        power = round_outward(&power.mul(&t2), work);
        let tail_bound = power.hi() * &tail_factor
            / BigRational::from_integer(BigInt::from(2 * k + 3));
        if tail_bound < eps {
            let tail = RatInterval::hull(BigRational::zero(), tail_bound);
            return sum.add(&tail);
        }
        k += 1;
    }
}

/// Certified enclosure of `ln 2 = 2 atanh(1/3)`.
pub fn ln2_interval(bits: u32) -> RatInterval {
    let third = BigRational::new(BigInt::one(), BigInt::from(3));
    atanh_point(&third, bits + 1).scale(&BigRational::from_integer(BigInt::from(2)))
}

/// Locate `k` with `x / 2^k` in `[1, 2)` for `x > 0`.
fn log2_floor(x: &BigRational) -> i64 {
    debug_assert!(x.is_positive());
    let num_bits = x.numer().magnitude().bits() as i64;
    let den_bits = x.denom().magnitude().bits() as i64;
    let mut k = num_bits - den_bits;
    let two = BigRational::from_integer(BigInt::from(2));
    let scaled = |k: i64| -> BigRational {
        if k >= 0 {
            x / BigRational::from_integer(BigInt::one() << k as usize)
        } else {
            x * BigRational::from_integer(BigInt::one() << (-k) as usize)
        }
    };
    while scaled(k) < BigRational::one() {
        k -= 1;
    }
    while scaled(k) >= two {
        k += 1;
    }
    k
}

/// Certified enclosure of `ln x` for a positive rational `x`, with width at
/// most `2^-bits`.
pub fn ln_rational(x: &BigRational, bits: u32) -> Result<RatInterval> {
    if !x.is_positive() {
        return Err(Error::Domain(format!("ln requires a positive argument, got {x}")));
    }
    let mut work = bits + 16;
    for _ in 0..6 {
        let k = log2_floor(x);
        let m = if k >= 0 {
            x / BigRational::from_integer(BigInt::one() << k as usize)
        } else {
            x * BigRational::from_integer(BigInt::one() << (-k) as usize)
        };
        // ln m = 2 atanh((m-1)/(m+1)), argument in [0, 1/3) since m in [1,2)
        let t = (&m - BigRational::one()) / (&m + BigRational::one());
        let t = round_outward(&RatInterval::point(t), work + 8);
        let lo_part = atanh_point(t.lo(), work);
        let hi_part = atanh_point(t.hi(), work);
        let two = BigRational::from_integer(BigInt::from(2));
        let atanh_enc = RatInterval::hull(lo_part.lo().clone(), hi_part.hi().clone()).scale(&two);
        let kr = BigRational::from_integer(BigInt::from(k));
        let result = atanh_enc.add(&ln2_interval(work).scale(&kr));
        let result = round_outward(&result, work);
        if result.width() <= dyadic_eps(bits) {
            return Ok(result);
        }
        work *= 2;
    }
    Err(Error::undecidable("ln enclosure refinement", bits))
}

/// Certified enclosure of `ln` over a positive interval: the hull of the
/// endpoint logarithms (ln is increasing).
pub fn ln_interval(iv: &RatInterval, bits: u32) -> Result<RatInterval> {
    if !iv.lo().is_positive() {
        return Err(Error::Domain(format!(
            "ln over an interval requires a positive lower endpoint, got {}",
            iv.lo()
        )));
    }
    let lo = ln_rational(iv.lo(), bits + 1)?;
    let hi = ln_rational(iv.hi(), bits + 1)?;
    Ok(RatInterval::hull(lo.lo().clone(), hi.hi().clone()))
}

/// Certified enclosure of `ln ln x` for `x` with ln x > 0 (i.e. `x > 1`),
/// given as an interval with rational endpoints.
pub fn lnln_interval(iv: &RatInterval, bits: u32) -> Result<RatInterval> {
    let inner = ln_interval(iv, bits + 8)?;
    if !inner.lo().is_positive() {
        return Err(Error::Domain(format!(
            "ln ln requires the inner logarithm to be positive; ln lower bound was {}",
            inner.lo()
        )));
    }
    ln_interval(&inner, bits)
}

/// Floor of the `n`-th root of a nonnegative integer.
fn nth_root_floor(x: &BigUint, n: u32) -> BigUint {
    x.nth_root(n)
}

/// Certified enclosure of `base^(p/q)` for a positive rational base and a
/// rational exponent, with width at most `2^-bits`.
///
/// The integer power is taken exactly and the `q`-th root is bracketed with
/// integer root extraction on a scaled numerator, so both endpoints are
/// honest bounds.
pub fn pow_rational(base: &BigRational, exponent: &BigRational, bits: u32) -> Result<RatInterval> {
    if !base.is_positive() {
        return Err(Error::Domain(format!(
            "rational powers require a positive base, got {base}"
        )));
    }
    let exponent = exponent.clone();
    if exponent.is_negative() {
        // 1 / base^|e|, refined until the reciprocal interval is narrow
        // enough (its width scales like width(pos) / lo(pos)^2)
        let mut extra = 4u32;
        for _ in 0..8 {
            let pos = pow_rational(base, &-exponent.clone(), bits + extra)?;
            if pos.lo().is_positive() {
                let r = pos.recip()?;
                if r.width() <= dyadic_eps(bits) {
                    return Ok(r);
                }
            }
            extra = extra.saturating_mul(2);
        }
        return Err(Error::undecidable("reciprocal power enclosure", bits));
    }
    let p = exponent.numer().magnitude().clone();
    let q_big = exponent.denom().magnitude().clone();
    let q: u32 = q_big
        .try_into()
        .map_err(|_| Error::Domain("exponent denominator too large for root extraction".into()))?;
    if q == 0 {
        return Err(Error::Domain("zero exponent denominator".into()));
    }
    let p: u64 = p
        .try_into()
        .map_err(|_| Error::Domain("exponent numerator too large for exact powering".into()))?;
    // base^p exactly
    let powered = pow_rational_exact(base, p);
    if q == 1 {
        return Ok(RatInterval::point(powered));
    }
    // q-th root of u/v: scale by 2^(q*P), take integer roots of floor and
    // ceil of the scaled value.
    let prec = bits + 2;
    let u = powered.numer().magnitude().clone();
    let v = powered.denom().magnitude().clone();
    let scale_q = BigUint::one() << (q as usize * prec as usize);
    let scaled = &u * &scale_q;
    let floor_val = &scaled / &v;
    let ceil_val = if (&scaled % &v).is_zero() {
        floor_val.clone()
    } else {
        &floor_val + BigUint::one()
    };
    let denom = BigInt::one() << prec as usize;
    let root_lo = nth_root_floor(&floor_val, q);
    let root_hi = nth_root_floor(&ceil_val, q) + BigUint::one();
    let lo = BigRational::new(BigInt::from(root_lo), denom.clone());
    let hi = BigRational::new(BigInt::from(root_hi), denom);
    Ok(RatInterval::hull(lo, hi))
}

/// Exact `base^p` for a machine-sized nonnegative integer exponent.
pub fn pow_rational_exact(base: &BigRational, p: u64) -> BigRational {
    let mut acc = BigRational::one();
    let mut sq = base.clone();
    let mut e = p;
    while e > 0 {
        if e & 1 == 1 {
            acc *= &sq;
        }
        e >>= 1;
        if e > 0 {
            sq = &sq * &sq;
        }
    }
    acc
}

/// Certified enclosure of `x^(p/q)` over a positive interval base: the hull
/// of the endpoint powers (monotone increasing for positive exponents,
/// decreasing for negative ones).
pub fn pow_interval(iv: &RatInterval, exponent: &BigRational, bits: u32) -> Result<RatInterval> {
    if !iv.lo().is_positive() {
        return Err(Error::Domain(
            "interval powers require a positive lower endpoint".into(),
        ));
    }
    let a = pow_rational(iv.lo(), exponent, bits + 1)?;
    let b = pow_rational(iv.hi(), exponent, bits + 1)?;
    if exponent.is_negative() {
        Ok(RatInterval::hull(b.lo().clone(), a.hi().clone()))
    } else {
        Ok(RatInterval::hull(a.lo().clone(), b.hi().clone()))
    }
}
