//! The slit-production machinery: parameter derivation, the good / normal /
//! miracle predicates, the two child-enumeration procedures (Diophantine and
//! Liouville), the region schedule, and the tree builder.
//!
//! Everything here decides inequalities between quantities of the form
//! `x₁^{e₁}·x₂^{e₂}·…` with rational exponents.  Small integer exponents are
//! compared exactly through [`crate::numerics::real::Real`] powering; large or
//! fractional exponents go through certified logarithm enclosures
//! ([`LogExpr`]) at escalating precision.  No comparison is ever answered
//! from a floating-point estimate.

use std::cmp::Ordering;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::numerics::functions::{ln_interval, ln_rational};
use crate::numerics::real::Real;
use crate::numerics::{serialize_rational, RatInterval};

pub mod good;

pub use good::{
    check_good_children, enumerate_delta, is_good, is_miracle, is_normal, normal_coverage,
    spectrum, strips_clusters_audit, DeltaChild, DeltaChildren, GoodChildrenReport, LineTriple,
    MiracleReport, NormalityReport, Spectrum, StripEntry, StripsClustersReport,
};

pub mod liouville;

pub use liouville::{
    enumerate_lambda, initial_slit, utilde_pair, HeightWindow, LambdaChild, LambdaChildren,
};


/// Certified rational lower bound for `4/(27π)`, the universal constant in
/// the Δ-child counting lemma.  Equals `4·113/(27·355) = 452/9585`; the bound
/// `π < 355/113` makes it a strict lower bound for `4/(27π)`.
pub fn c0_lower_bound() -> BigRational {
    big_ratio(452, 9585)
}

fn big_ratio(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

/// Which schedule regime the parameters drive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// The paper-faithful schedule: every derived quantity is tied to its
    /// defining formula and every lemma certificate is fatal.
    FullSchedule,
    /// Desk-scale execution: the caller supplies small active exponents `N`,
    /// `N'` directly; lemma conclusions become runtime-checked certificates
    /// (warnings, not build failures).
    Toy,
    /// The alternate schedule for directions whose `ℓ_N` set is finite.
    FiniteEllN,
}

/// The construction's parameter pack.
///
/// The formula fields (`m`, `m_prime`, `n_formula`, `n_prime_formula`,
/// `rho`) are exact rationals satisfying the defining identities
/// `M(r−1) = 1`, `M′ = max(3M², Mr/δ)`, `N = 4M′r⁵`, `N′ = 4(N+1)r/(r−1)`,
/// `ρ = r + 1/2`.  The *active* exponents `n_active`, `n_prime_active` are
/// the integers actually raised to powers; in full-schedule mode they are
/// the ceilings of the formula values, in toy mode they are user-supplied.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstructionParams {
    pub epsilon: BigRational,
    pub r: BigRational,
    pub delta: BigRational,
    /// `M = 1/(r−1)`.
    pub m: BigRational,
    /// `M′ = max(3M², Mr/δ)`.
    pub m_prime: BigRational,
    /// Exact `N = 4M′r⁵`.
    pub n_formula: BigRational,
    /// The integer `N` used as an exponent and as the `ℓ_N` threshold.
    pub n_active: u32,
    /// Exact `N′ = 4(N+1)r/(r−1)` with the exact `N`.
    pub n_prime_formula: BigRational,
    /// The integer `N′` used as an exponent (e.g. in `ρ^{N′}`).
    pub n_prime_active: u32,
    /// `ρ = r + 1/2`.
    pub rho: BigRational,
    /// Certified rational lower bound for `4/(27π)`.
    pub c0: BigRational,
    /// Starting index into the best-approximation denominator sequence.
    pub k0: usize,
    /// The norm-equivalence constant `C′` (`sup ≤ C′·‖·‖`).
    pub c_prime: BigRational,
    /// `c = 5·C′⁵`, the miracle-uniqueness threshold.
    pub c: BigRational,
    pub mode: Mode,
}

impl Serialize for ConstructionParams {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("ConstructionParams", 16)?;
        macro_rules! rat {
            ($name:literal, $field:expr) => {
                st.serialize_field($name, &SerRat($field))?;
            };
        }
        rat!("epsilon", &self.epsilon);
        rat!("r", &self.r);
        rat!("delta", &self.delta);
        rat!("m", &self.m);
        rat!("m_prime", &self.m_prime);
        rat!("n_formula", &self.n_formula);
        st.serialize_field("n_active", &self.n_active)?;
        rat!("n_prime_formula", &self.n_prime_formula);
        st.serialize_field("n_prime_active", &self.n_prime_active)?;
        rat!("rho", &self.rho);
        rat!("c0", &self.c0);
        st.serialize_field("k0", &self.k0)?;
        rat!("c_prime", &self.c_prime);
        rat!("c", &self.c);
        st.serialize_field("mode", &self.mode)?;
        st.serialize_field("m_approx", &rat_f64(&self.m))?;
        st.end()
    }
}

struct SerRat<'a>(&'a BigRational);
impl Serialize for SerRat<'_> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        serialize_rational(self.0, s)
    }
}

fn rat_f64(r: &BigRational) -> f64 {
    use num_traits::ToPrimitive;
    r.to_f64().unwrap_or(f64::NAN)
}

/// Largest dyadic rational `c` with `c³ < x`, to `bits` fractional bits.
fn cbrt_lower(x: &BigRational, bits: u32) -> BigRational {
    // Binary search on numerators of c = k / 2^bits over k in [0, hi].
    let one = BigInt::one();
    let denom: BigInt = &one << bits;
    let denom_cubed = &denom * &denom * &denom;
    // k³ < x·2^{3·bits}  ⟺  (k/2^bits)³ < x.
    let target = (x.numer() * &denom_cubed) / x.denom();
    let mut lo = BigInt::zero();
    let mut hi = &denom * BigInt::from(4); // assumes x < 64
    while &lo + &one < hi {
        let mid: BigInt = (&lo + &hi) >> 1;
        if &mid * &mid * &mid < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    BigRational::new(lo, denom)
}

/// Truncate `x` downward to `digits` decimal places.
fn truncate_decimal(x: &BigRational, digits: u32) -> BigRational {
    let scale = BigInt::from(10u32).pow(digits);
    let scaled = x * BigRational::from(scale.clone());
    BigRational::new(scaled.floor().to_integer(), scale)
}

fn ceil_to_u32(x: &BigRational, what: &str) -> Result<u32> {
    use num_traits::ToPrimitive;
    let c = x.ceil().to_integer();
    c.to_u32().ok_or_else(|| {
        Error::Domain(format!(
            "{what} = {c} does not fit in a 32-bit exponent; the schedule is \
             outside the representable regime"
        ))
    })
}

impl ConstructionParams {
    /// Derive the full-schedule parameter pack from `ε` alone, or from an
    /// explicit admissible `r`.
    ///
    /// The admissible interval for `r` is `1 < r`, `r³ < 3/2`, and
    /// `1/(1+r) > 1/2 − ε`.  Without an explicit choice, `r` is the midpoint
    /// of that interval truncated down to four decimal places (the
    /// truncation keeps every later exact-rational computation small; all
    /// three constraints are preserved because they are monotone in `r`).
    /// An explicit `r_choice` violating the constraints is a domain error,
    /// never silently replaced.
    pub fn derive_params(epsilon: &BigRational, r_choice: Option<&BigRational>) -> Result<Self> {
        let half = big_ratio(1, 2);
        if !epsilon.is_positive() || *epsilon >= half {
            return Err(Error::Precondition(format!(
                "ε must lie strictly between 0 and 1/2, got {epsilon}"
            )));
        }
        // Upper endpoint of the admissible r-interval.
        let from_eps = (&half + epsilon) / (&half - epsilon); // r < (1/2+ε)/(1/2−ε)
        let three_halves = big_ratio(3, 2);
        let from_cube = cbrt_lower(&three_halves, 40);
        let r_sup = from_eps.min(from_cube);
        if r_sup <= BigRational::one() {
            return Err(Error::Domain(format!(
                "ε = {epsilon} leaves no admissible r in (1, min(∛(3/2), (1/2+ε)/(1/2−ε)))"
            )));
        }
        let r = match r_choice {
            Some(rc) => {
                Self::check_r(rc, epsilon)?;
                rc.clone()
            }
            None => {
                let mid = (BigRational::one() + &r_sup) / big_ratio(2, 1);
                let trunc = truncate_decimal(&mid, 4);
                if trunc > BigRational::one() {
                    trunc
                } else {
                    mid
                }
            }
        };
        Self::assemble(epsilon.clone(), r, None, None, None, Mode::FullSchedule)
    }

    /// Desk-scale parameters: admissibility of `r` is still enforced, `δ` is
    /// half its supremum, but the active exponents are the caller's small
    /// integers rather than the astronomically large formula ceilings.
    pub fn toy(
        epsilon: &BigRational,
        r: &BigRational,
        n_active: u32,
        n_prime_active: u32,
    ) -> Result<Self> {
        Self::check_r(r, epsilon)?;
        if n_active == 0 || n_prime_active == 0 {
            return Err(Error::Precondition(
                "toy exponents N and N' must be at least 1".into(),
            ));
        }
        Self::assemble(
            epsilon.clone(),
            r.clone(),
            None,
            Some(n_active),
            Some(n_prime_active),
            Mode::Toy,
        )
    }

    /// Parameters for the finite-`ℓ_N` alternate schedule.  Same desk-scale
    /// shape as [`ConstructionParams::toy`], different tree schedule.
    pub fn finite_ell_n(
        epsilon: &BigRational,
        r: &BigRational,
        n_active: u32,
        n_prime_active: u32,
    ) -> Result<Self> {
        let mut p = Self::toy(epsilon, r, n_active, n_prime_active)?;
        p.mode = Mode::FiniteEllN;
        Ok(p)
    }

    fn check_r(r: &BigRational, epsilon: &BigRational) -> Result<()> {
        let half = big_ratio(1, 2);
        let one = BigRational::one();
        if *r <= one {
            return Err(Error::Domain(format!("r = {r} must exceed 1")));
        }
        let r3 = r * r * r;
        if r3 >= big_ratio(3, 2) {
            return Err(Error::Domain(format!(
                "r = {r} violates r³ < 3/2 (r³ = {r3})"
            )));
        }
        // 1/(1+r) > 1/2 − ε  ⟺  (1/2−ε)(1+r) < 1.
        if (&half - epsilon) * (&one + r) >= one {
            return Err(Error::Domain(format!(
                "r = {r} violates 1/(1+r) > 1/2 − ε at ε = {epsilon}"
            )));
        }
        Ok(())
    }

    fn assemble(
        epsilon: BigRational,
        r: BigRational,
        delta_override: Option<BigRational>,
        n_override: Option<u32>,
        n_prime_override: Option<u32>,
        mode: Mode,
    ) -> Result<Self> {
        let one = BigRational::one();
        let half = big_ratio(1, 2);
        // δ_sup solves (1−δ) = (1/2−ε)(1+r+2δ):
        //   1 − (1/2−ε)(1+r) = δ·(2 − 2ε).
        let delta_sup =
            (&one - (&half - &epsilon) * (&one + &r)) / (big_ratio(2, 1) * (&one - &epsilon));
        if !delta_sup.is_positive() {
            return Err(Error::Domain(format!(
                "no admissible δ for r = {r}, ε = {epsilon}"
            )));
        }
        let delta = match delta_override {
            Some(d) => {
                if !d.is_positive() || d >= delta_sup {
                    return Err(Error::Domain(format!(
                        "δ = {d} outside (0, {delta_sup})"
                    )));
                }
                d
            }
            None => &delta_sup / big_ratio(2, 1),
        };
        let m = (&r - &one).recip();
        let three_m2 = big_ratio(3, 1) * &m * &m;
        let mr_over_delta = &m * &r / &delta;
        let m_prime = three_m2.max(mr_over_delta);
        let r5 = Real::from_rational(r.clone())
            .pow_int(5)
            .as_rational()
            .expect("rational power of a rational");
        let n_formula = big_ratio(4, 1) * &m_prime * &r5;
        let n_active = match n_override {
            Some(n) => n,
            None => ceil_to_u32(&n_formula, "N = ⌈4M′r⁵⌉")?,
        };
        let n_prime_formula = big_ratio(4, 1) * (&n_formula + &one) * &r / (&r - &one);
        let n_prime_active = match n_prime_override {
            Some(n) => n,
            None => ceil_to_u32(&n_prime_formula, "N′ = ⌈4(N+1)r/(r−1)⌉")?,
        };
        let rho = &r + &half;
        let c_prime = BigRational::one();
        let c = big_ratio(5, 1)
            * Real::from_rational(c_prime.clone())
                .pow_int(5)
                .as_rational()
                .expect("rational power of a rational");
        let params = ConstructionParams {
            epsilon,
            r,
            delta,
            m,
            m_prime,
            n_formula,
            n_active,
            n_prime_formula,
            n_prime_active,
            rho,
            c0: c0_lower_bound(),
            k0: 0,
            c_prime,
            c,
            mode,
        };
        params.validate()?;
        Ok(params)
    }

    /// Record the norm-equivalence constant `C′` (and with it the miracle
    /// threshold `c = 5C′⁵`).  The default pack assumes the sup norm
    /// (`C′ = 1`).
    pub fn with_norm_constant(mut self, c_prime: BigRational) -> Result<Self> {
        if !c_prime.is_positive() {
            return Err(Error::Domain("C′ must be positive".into()));
        }
        let c5 = Real::from_rational(c_prime.clone())
            .pow_int(5)
            .as_rational()
            .expect("rational power of a rational");
        self.c = big_ratio(5, 1) * c5;
        self.c_prime = c_prime;
        Ok(self)
    }

    /// Set the starting index `k0` into the denominator sequence.
    pub fn with_k0(mut self, k0: usize) -> Self {
        self.k0 = k0;
        self
    }

    /// Recompute every derived quantity from `(ε, r, δ)` and check the
    /// defining identities hold exactly; in full-schedule mode also tie the
    /// active exponents to their formula ceilings.
    pub fn validate(&self) -> Result<()> {
        let one = BigRational::one();
        let half = big_ratio(1, 2);
        Self::check_r(&self.r, &self.epsilon)?;
        if !self.epsilon.is_positive() || self.epsilon >= half {
            return Err(Error::Precondition(format!(
                "ε = {} outside (0, 1/2)",
                self.epsilon
            )));
        }
        // (1−δ)/(1+r+2δ) > 1/2 − ε, cross-multiplied (denominator positive).
        let lhs = &one - &self.delta;
        let rhs = (&half - &self.epsilon) * (&one + &self.r + big_ratio(2, 1) * &self.delta);
        if !self.delta.is_positive() || lhs <= rhs {
            return Err(Error::Domain(format!(
                "δ = {} violates (1−δ)/(1+r+2δ) > 1/2 − ε",
                self.delta
            )));
        }
        let identity = |name: &str, stored: &BigRational, recomputed: BigRational| -> Result<()> {
            if *stored != recomputed {
                return Err(Error::Domain(format!(
                    "{name} = {stored} does not match its defining formula value {recomputed}"
                )));
            }
            Ok(())
        };
        identity("M", &self.m, (&self.r - &one).recip())?;
        identity(
            "M'",
            &self.m_prime,
            (big_ratio(3, 1) * &self.m * &self.m).max(&self.m * &self.r / &self.delta),
        )?;
        let r5 = Real::from_rational(self.r.clone())
            .pow_int(5)
            .as_rational()
            .expect("rational power of a rational");
        identity("N", &self.n_formula, big_ratio(4, 1) * &self.m_prime * &r5)?;
        identity(
            "N'",
            &self.n_prime_formula,
            big_ratio(4, 1) * (&self.n_formula + &one) * &self.r / (&self.r - &one),
        )?;
        identity("rho", &self.rho, &self.r + &half)?;
        if self.c0 > c0_lower_bound() || !self.c0.is_positive() {
            return Err(Error::Domain(format!(
                "c0 = {} is not a certified positive lower bound for 4/(27π)",
                self.c0
            )));
        }
        let c5 = Real::from_rational(self.c_prime.clone())
            .pow_int(5)
            .as_rational()
            .expect("rational power of a rational");
        identity("c", &self.c, big_ratio(5, 1) * c5)?;
        if self.mode == Mode::FullSchedule {
            if BigRational::from(BigInt::from(self.n_active)) != self.n_formula.ceil() {
                return Err(Error::Domain(format!(
                    "active N = {} is not ⌈N formula⌉ = {} in full-schedule mode",
                    self.n_active,
                    self.n_formula.ceil()
                )));
            }
            if BigRational::from(BigInt::from(self.n_prime_active)) != self.n_prime_formula.ceil()
            {
                return Err(Error::Domain(format!(
                    "active N' = {} is not ⌈N' formula⌉ = {} in full-schedule mode",
                    self.n_prime_active,
                    self.n_prime_formula.ceil()
                )));
            }
        }
        Ok(())
    }

    /// `ρ^{N′}` with the active exponent, exact.
    pub fn rho_pow_n_prime(&self) -> BigRational {
        Real::from_rational(self.rho.clone())
            .pow_int(self.n_prime_active)
            .as_rational()
            .expect("rational power of a rational")
    }
}

// ---------------------------------------------------------------------------
// Certified comparison framework.
// ---------------------------------------------------------------------------

/// A logarithm base: an exact rational or a certified real.
#[derive(Debug, Clone)]
pub enum LogBase {
    Rat(BigRational),
    Real(Real),
}

/// A formal sum `Σ cᵢ · ln(xᵢ)` evaluated to a certified enclosure.
///
/// This is the work-horse for comparisons like `|w|^{r^j} < q_k^{M'}` whose
/// exponents are far beyond exact powering.
#[derive(Debug, Clone, Default)]
pub struct LogExpr {
    terms: Vec<(BigRational, LogBase)>,
}

impl LogExpr {
    pub fn new() -> Self {
        LogExpr { terms: Vec::new() }
    }

    /// Add `coeff · ln(base)` for a rational base.
    pub fn push_rat(&mut self, coeff: BigRational, base: BigRational) -> &mut Self {
        self.terms.push((coeff, LogBase::Rat(base)));
        self
    }

    /// Add `coeff · ln(base)` for a real base.
    pub fn push_real(&mut self, coeff: BigRational, base: Real) -> &mut Self {
        self.terms.push((coeff, LogBase::Real(base)));
        self
    }

    /// The difference `self − other`.
    pub fn sub(&self, other: &LogExpr) -> LogExpr {
        let mut terms = self.terms.clone();
        for (c, b) in &other.terms {
            terms.push((-c, b.clone()));
        }
        LogExpr { terms }
    }

    /// Certified enclosure of the sum at the given working precision.
    pub fn eval(&self, bits: u32) -> Result<RatInterval> {
        let mut acc = RatInterval::point(BigRational::zero());
        for (coeff, base) in &self.terms {
            if coeff.is_zero() {
                continue;
            }
            let ln = match base {
                LogBase::Rat(x) => ln_rational(x, bits)?,
                LogBase::Real(x) => ln_of_real(x, bits)?,
            };
            acc = acc.add(&ln.scale(coeff));
        }
        Ok(acc)
    }
}

/// Certified `ln` of a positive [`Real`]: the enclosure is refined until it
/// is strictly positive, then passed through the interval logarithm.
pub fn ln_of_real(x: &Real, bits: u32) -> Result<RatInterval> {
    if x.sign(bits.max(crate::numerics::DEFAULT_BUDGET_BITS))? <= 0 {
        return Err(Error::Domain(
            "logarithm of a non-positive real".into(),
        ));
    }
    let mut b = bits;
    for _ in 0..8 {
        let iv = x.enclose(b)?;
        if iv.lo().is_positive() {
            return ln_interval(&iv, bits);
        }
        b = b.saturating_mul(2);
    }
    Err(Error::undecidable(
        "positive lower enclosure bound for a logarithm base",
        b,
    ))
}

/// Decide the sign of a certified-enclosure expression by escalating the
/// working precision from 64 bits up to `budget_bits` (doubling each round).
///
/// `f(bits)` must return an enclosure that narrows as `bits` grows.  The
/// answer is `Less`/`Greater` when the enclosure excludes zero, `Equal` only
/// when it is the exact point zero.  An inner undecidable result is treated
/// as "needs more precision" until the budget is exhausted.
pub fn certify_cmp<F>(f: F, budget_bits: u32) -> Result<Ordering>
where
    F: Fn(u32) -> Result<RatInterval>,
{
    let mut bits = 64.min(budget_bits.max(1));
    loop {
        match f(bits) {
            Ok(iv) => match iv.uniform_sign() {
                Some(1) => return Ok(Ordering::Greater),
                Some(-1) => return Ok(Ordering::Less),
                Some(_) => return Ok(Ordering::Equal),
                None => {}
            },
            Err(e) if e.is_undecidable() && bits < budget_bits => {}
            Err(e) => return Err(e),
        }
        if bits >= budget_bits {
            return Err(Error::undecidable(
                "sign of a logarithmic comparison",
                budget_bits,
            ));
        }
        bits = bits.saturating_mul(2).min(budget_bits);
    }
}

/// Compare `x^e` against `y` for positive reals `x`, `y` and rational `e`.
///
/// Small exponents (numerator and denominator at most 128) are decided by
/// exact powering: `x^{p/q} ⋛ y  ⟺  x^p ⋛ y^q` (sign-adjusted for `p < 0`);
/// larger exponents go through the certified log framework, which can return
/// undecidable-at-budget but never an unsound answer.
pub fn cmp_pow(x: &Real, e: &BigRational, y: &Real, budget_bits: u32) -> Result<Ordering> {
    if x.sign(budget_bits)? <= 0 || y.sign(budget_bits)? <= 0 {
        return Err(Error::Precondition(
            "power comparison requires positive base and target".into(),
        ));
    }
    let small = BigInt::from(128u32);
    if e.numer().abs() <= small && *e.denom() <= small {
        use num_traits::ToPrimitive;
        let p = e.numer().abs().to_u32().expect("checked ≤ 128");
        let q = e.denom().to_u32().expect("checked ≤ 128");
        return if e.numer().is_negative() {
            // x^{-p/q} ⋛ y  ⟺  1 ⋛ y^q · x^p.
            Real::one().compare(&y.pow_int(q).mul(&x.pow_int(p)), budget_bits)
        } else {
            x.pow_int(p).compare(&y.pow_int(q), budget_bits)
        };
    }
    let mut lhs = LogExpr::new();
    lhs.push_real(e.clone(), x.clone());
    let mut rhs = LogExpr::new();
    rhs.push_real(BigRational::one(), y.clone());
    let diff = lhs.sub(&rhs);
    certify_cmp(|bits| diff.eval(bits), budget_bits)
}
