//! The Liouville-side child machinery: the unimodular complement pair of a
//! Liouville convergent, the `Λ(w, k)` enumeration with its counting, gcd,
//! and cross-product certificates, and the initial-slit walk.

use std::cmp::Ordering;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::Serialize;

use crate::bestapprox::BestApprox;
use crate::error::{Error, Result};
use crate::numerics::functions::pow_interval;
use crate::numerics::real::Real;
use crate::numerics::{RatInterval, DEFAULT_BUDGET_BITS};
use crate::surface::{cross_signed, liouville_convergent, Context, Loop, Slit};

use super::{cmp_pow, ConstructionParams};

/// The two unimodular complements of a primitive vector `u` with positive
/// height: `ũ ∈ ℤ×ℤ_{>0}` with `u×ũ = ±1` and `|ũ| ≤ |u|` (height-wise).
/// The first entry has `u×ũ = +1`, the second `−1`.
pub fn utilde_pair(u: &Loop) -> Result<(Loop, Loop)> {
    let (ux, uy) = (u.p().clone(), u.q().clone());
    if !uy.is_positive() {
        return Err(Error::Degenerate(format!(
            "the complement pair needs a vector of positive height, got ({ux}, {uy})"
        )));
    }
    // u×ũ = ux·ỹ − uy·x̃ = s, with ỹ reduced into (0, uy].
    let egcd = ux.extended_gcd(&uy);
    if !egcd.gcd.abs().is_one() {
        return Err(Error::Precondition(format!(
            "({ux}, {uy}) is not primitive"
        )));
    }
    // x0·ux + y0·uy = ±1; normalize to +1.
    let (x0, y0) = if egcd.gcd.is_one() {
        (egcd.x, egcd.y)
    } else {
        (-egcd.x, -egcd.y)
    };
    let reduce = |big_y: BigInt, big_x: BigInt| -> Result<Loop> {
        let y = (&big_y - BigInt::one()).mod_floor(&uy) + BigInt::one();
        let t = (&y - &big_y) / &uy;
        let x = big_x + t * &ux;
        Loop::new(x, y)
    };
    // ux·y0... : ux·(x0) − uy·(−y0) = 1, so ỹ-seed = x0, x̃-seed = −y0.
    let plus = reduce(x0.clone(), -y0.clone())?;
    let minus = reduce(-x0, y0)?;
    Ok((plus, minus))
}

/// One enumerated Λ-child.
#[derive(Debug, Clone, Serialize)]
pub struct LambdaChild {
    pub slit: Slit,
    pub v: Loop,
    /// Which complement the child came from: `+1` or `−1` for `u×ũ`.
    pub branch: i8,
    /// The step `a` in `v = ũ + a·u`.
    #[serde(serialize_with = "crate::numerics::serialize_bigint")]
    pub a: BigInt,
}

/// The enumerated Λ-set with its lemma certificates.
#[derive(Debug, Clone, Serialize)]
pub struct LambdaChildren {
    /// Children materialized up to the cap, `+1` branch first, steps
    /// ascending.
    pub children: Vec<LambdaChild>,
    pub truncated: bool,
    /// Analytic count of the `u×ũ = +1` branch (window arithmetic, not
    /// limited by the cap).
    #[serde(serialize_with = "crate::numerics::serialize_bigint")]
    pub count_plus: BigInt,
    #[serde(serialize_with = "crate::numerics::serialize_bigint")]
    pub count_minus: BigInt,
    /// `count_plus + count_minus`.
    #[serde(serialize_with = "crate::numerics::serialize_bigint")]
    pub raw_count: BigInt,
    /// Equal to `raw_count`: the two branches cannot produce the same
    /// child, since `u×(v⁺ − v⁻) = 2` for any pair of choices.
    #[serde(serialize_with = "crate::numerics::serialize_bigint")]
    pub dedup_count: BigInt,
    /// `|w|^{r−1} ≥ 2q_k`: the counting lemma's hypothesis.
    pub count_bound_applicable: bool,
    /// `dedup_count ≥ |w|^{r−1}/(2q_k)`; only meaningful when applicable.
    pub count_bound_ok: bool,
    /// Every materialized child has `d(w′, k) ≤ 2`.
    pub gcd_bound_ok: bool,
    /// Number of materialized children inside the `|v| < q_{k+1}^{1/2}/C̃`
    /// gate (0 when the next denominator is unknown).
    pub max_area_checked: usize,
    /// `|w×v| < 2|w|/|u|` on every gated child.
    pub max_area_ok: bool,
    /// The parent's Liouville convergent.
    pub u: Loop,
    #[serde(serialize_with = "crate::numerics::serialize_bigint")]
    pub d: BigInt,
    /// `|w| < q_{k+1}^{1/2}/(16·C1·q_k)`, carried over from the convergent
    /// computation (false when the next denominator is unknown).
    pub restriction_verified: bool,
    /// `q_k|w|/2 < d|u| < 2q_k|w|`, carried over likewise.
    pub bounds_certified: bool,
}

/// Certified integer bound for the `a`-window: returns `f((x − offset)/step)`
/// for the exact real behind `x_of(bits)`, where `f` is `ceil` (for `lo`)
/// or `floor` (for `hi`).  Escalates precision until both interval
/// endpoints give the same integer.
fn certified_window_bound<F>(
    x_of: F,
    offset: &BigRational,
    step: &BigRational,
    ceil: bool,
    budget_bits: u32,
) -> Result<BigInt>
where
    F: Fn(u32) -> Result<RatInterval>,
{
    let mut bits = 128u32.min(budget_bits);
    loop {
        let iv = x_of(bits)?;
        let lo = (iv.lo() - offset) / step;
        let hi = (iv.hi() - offset) / step;
        let (a, b) = if ceil {
            (lo.ceil().to_integer(), hi.ceil().to_integer())
        } else {
            (lo.floor().to_integer(), hi.floor().to_integer())
        };
        if a == b {
            return Ok(a);
        }
        if bits >= budget_bits {
            return Err(Error::undecidable(
                "Λ-window boundary lands on an integer step within the budget",
                budget_bits,
            ));
        }
        bits = (bits.saturating_mul(2)).min(budget_bits);
    }
}

/// `d(w, k) = gcd(p1 + m·q, p2 + n·q)` for the best approximation `ba`.
fn d_of(w: &Slit, ba: &BestApprox) -> BigInt {
    let a = &ba.p1 + w.m() * &ba.q;
    let b = &ba.p2 + w.n() * &ba.q;
    a.gcd(&b)
}

/// Enumerate `Λ(w, k) = {w + 2v ∈ Λ₁(w, k) : |w|^r ≤ |v| ≤ 2|w|^r}` where
/// `Λ₁` runs over `v = ũ + a·u`, `a > 0`, for both complements `ũ`.
///
/// The report carries analytic branch counts (so the counting certificate
/// does not depend on the cap), the counting-lemma verdict under its
/// hypothesis `|w|^{r−1} ≥ 2q_k`, the `d(w′, k) ≤ 2` certificate, and the
/// cross-product bound `|w×v| < 2|w|/|u|` on children inside the
/// `|v| < q_{k+1}^{1/2}/(16·C1)` gate.
pub fn enumerate_lambda(
    w: &Slit,
    ba: &BestApprox,
    next_q: Option<&BigInt>,
    params: &ConstructionParams,
    c1: &BigRational,
    cap: usize,
) -> Result<LambdaChildren> {
    enumerate_lambda_budget(w, ba, next_q, params, c1, cap, DEFAULT_BUDGET_BITS)
}

pub fn enumerate_lambda_budget(
    w: &Slit,
    ba: &BestApprox,
    next_q: Option<&BigInt>,
    params: &ConstructionParams,
    c1: &BigRational,
    cap: usize,
    budget_bits: u32,
) -> Result<LambdaChildren> {
    if cap == 0 {
        return Err(Error::Precondition("the enumeration cap must be positive".into()));
    }
    let lc = liouville_convergent(w, ba, next_q, c1, budget_bits)?;
    let (ut_plus, ut_minus) = utilde_pair(&lc.u)?;
    let height = w.height();
    let r = &params.r;
    let two = BigInt::from(2);

    // |w|^r as an escalating enclosure.
    let w_pow_r = |bits: u32| -> Result<RatInterval> {
        let iv = height.enclose(bits)?;
        if !iv.lo().is_positive() {
            return Err(Error::undecidable("positive enclosure of |w|", bits));
        }
        pow_interval(&iv, r, bits)
    };
    let w_pow_r_twice =
        |bits: u32| -> Result<RatInterval> { Ok(w_pow_r(bits)?.scale(&BigRational::from(two.clone()))) };

    let uy = BigRational::from(lc.u.q().clone());
    let mut branches = Vec::new();
    for (sign, ut) in [(1i8, &ut_plus), (-1i8, &ut_minus)] {
        let off = BigRational::from(ut.q().clone());
        let a_min_raw =
            certified_window_bound(&w_pow_r, &off, &uy, true, budget_bits)?;
        let a_min = a_min_raw.max(BigInt::one());
        let a_max =
            certified_window_bound(&w_pow_r_twice, &off, &uy, false, budget_bits)?;
        let count = if a_max >= a_min {
            &a_max - &a_min + BigInt::one()
        } else {
            BigInt::zero()
        };
        branches.push((sign, ut.clone(), a_min, a_max, count));
    }

    let count_plus = branches[0].4.clone();
    let count_minus = branches[1].4.clone();
    let raw_count = &count_plus + &count_minus;
    let dedup_count = raw_count.clone();

    // Counting lemma: |w|^{r−1} ≥ 2q_k  ⇒  #Λ ≥ |w|^{r−1}/(2q_k).
    let rm1 = r - BigRational::one();
    let two_qk = Real::from_integer(&two * &ba.q);
    let count_bound_applicable =
        cmp_pow(&height, &rm1, &two_qk, budget_bits)? != Ordering::Less;
    let count_bound_ok = if count_bound_applicable {
        if dedup_count.is_zero() {
            false
        } else {
            // dedup_count ≥ |w|^{r−1}/(2q_k)  ⟺  |w|^{r−1} ≤ 2q_k·count.
            let rhs = Real::from_integer(&two * &ba.q * &dedup_count);
            cmp_pow(&height, &rm1, &rhs, budget_bits)? != Ordering::Greater
        }
    } else {
        true
    };

    // Materialize up to the cap, certificates along the way.
    let mut children = Vec::new();
    let mut truncated = false;
    let mut gcd_bound_ok = true;
    let mut max_area_checked = 0usize;
    let mut max_area_ok = true;
    // Gate: |v| < q_{k+1}^{1/2}/(16·C1)  ⟺  (16·C1)²·|v|² < q_{k+1}.
    let c_tilde = BigRational::from(BigInt::from(16)) * c1;
    let c_tilde_sq = &c_tilde * &c_tilde;
    let (hx, hy) = w.holonomy();
    'outer: for (sign, ut, a_min, a_max, _) in &branches {
        let mut a = a_min.clone();
        while &a <= a_max {
            if children.len() == cap {
                truncated = true;
                break 'outer;
            }
            let v = Loop::new(ut.p() + &a * lc.u.p(), ut.q() + &a * lc.u.q())?;
            let child = w.twisted(&v, &two)?;
            let d_child = d_of(&child, ba);
            if d_child > two {
                gcd_bound_ok = false;
            }
            if let Some(qn) = next_q {
                let vy = BigRational::from(v.q().clone());
                if &c_tilde_sq * &vy * &vy < BigRational::from(qn.clone()) {
                    max_area_checked += 1;
                    // |w×v| < 2|w|/|u|  ⟺  |u|·|w×v| < 2|w|.
                    let cross = cross_signed(
                        (&hx, &hy),
                        (
                            &Real::from_integer(v.p().clone()),
                            &Real::from_integer(v.q().clone()),
                        ),
                    );
                    let lhs = Real::from_integer(lc.u.q().clone()).mul(&cross.abs());
                    let rhs = Real::from_integer(2).mul(&height);
                    if lhs.sub(&rhs).sign(budget_bits)? >= 0 {
                        max_area_ok = false;
                    }
                }
            }
            children.push(LambdaChild {
                slit: child,
                v,
                branch: *sign,
                a: a.clone(),
            });
            a += 1;
        }
    }

    Ok(LambdaChildren {
        children,
        truncated,
        count_plus,
        count_minus,
        raw_count,
        dedup_count,
        count_bound_applicable,
        count_bound_ok,
        gcd_bound_ok,
        max_area_checked,
        max_area_ok,
        u: lc.u,
        d: lc.d,
        restriction_verified: lc.restriction_verified,
        bounds_certified: lc.bounds_certified,
    })
}

/// Target height window for the initial slit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum HeightWindow {
    /// The full-scale window `[q_{k0}^{M′}, q_{k0}^{M′r})`.
    Full,
    /// A desk-scale override `[lo, hi)`.
    Toy { lo: BigInt, hi: BigInt },
}

impl Serialize for HeightWindow {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        match self {
            HeightWindow::Full => s.serialize_str("full"),
            HeightWindow::Toy { lo, hi } => {
                let mut st = s.serialize_struct("Toy", 2)?;
                st.serialize_field("lo", &lo.to_string())?;
                st.serialize_field("hi", &hi.to_string())?;
                st.end()
            }
        }
    }
}

/// Find the initial slit: a `Λ₁(seed, k0)` child whose height lands in the
/// target window, with `d(w0, k0) ≤ 2` guaranteed by the gcd lemma.
///
/// The walk uses the `u×ũ = +1` complement and the smallest admissible
/// step, so the result is deterministic.  The seed defaults to the base
/// slit and must have height below `q_{k0}/4`.
///
/// In full mode the window is `[q_{k0}^{M′}, q_{k0}^{M′r})`; if its lower
/// edge needs more than `max_height_bits` bits the walk refuses honestly
/// with a not-found-at-cap error (realistic parameters put the window
/// astronomically far out).
pub fn initial_slit(
    ctx: &Context,
    k0: usize,
    ba_seq: &[BestApprox],
    params: &ConstructionParams,
    window: &HeightWindow,
    seed: Option<&Slit>,
    c1: &BigRational,
    max_height_bits: u64,
) -> Result<Slit> {
    initial_slit_budget(
        ctx,
        k0,
        ba_seq,
        params,
        window,
        seed,
        c1,
        max_height_bits,
        DEFAULT_BUDGET_BITS,
    )
}

#[allow(clippy::too_many_arguments)]
pub fn initial_slit_budget(
    ctx: &Context,
    k0: usize,
    ba_seq: &[BestApprox],
    params: &ConstructionParams,
    window: &HeightWindow,
    seed: Option<&Slit>,
    c1: &BigRational,
    max_height_bits: u64,
    budget_bits: u32,
) -> Result<Slit> {
    let Some(ba) = ba_seq.get(k0) else {
        return Err(Error::Precondition(format!(
            "the best-approximation sequence has {} entries and does not cover \
             index k0 = {k0}",
            ba_seq.len()
        )));
    };
    let base;
    let seed = match seed {
        Some(s) => s,
        None => {
            base = Slit::new(ctx, 0, 0)?;
            &base
        }
    };
    // |seed| < q_{k0}/4.
    let q_quarter = BigRational::new(ba.q.clone(), BigInt::from(4));
    if seed.height().cmp_rational(&q_quarter, budget_bits)? != Ordering::Less {
        return Err(Error::Precondition(format!(
            "the seed slit must have height below q_k0/4 = {q_quarter}"
        )));
    }
    let next_q = ba_seq.get(k0 + 1).map(|b| &b.q);
    let lc = liouville_convergent(seed, ba, next_q, c1, budget_bits)?;
    let (ut_plus, _) = utilde_pair(&lc.u)?;

    // The window's lower edge as an escalating enclosure, plus a cheap size
    // estimate for the cap check.
    let q_rat = BigRational::from(ba.q.clone());
    let m_prime = &params.m_prime;
    let lo_bits_estimate = match window {
        HeightWindow::Full => {
            let mp = m_prime.numer().to_string().parse::<f64>().unwrap_or(f64::MAX)
                / m_prime.denom().to_string().parse::<f64>().unwrap_or(1.0);
            (mp * (ba.q.bits() as f64)).ceil() as u64
        }
        HeightWindow::Toy { lo, .. } => lo.bits(),
    };
    if lo_bits_estimate > max_height_bits {
        return Err(Error::NotFoundAtCap(format!(
            "the target window starts near 2^{lo_bits_estimate}, beyond the \
             {max_height_bits}-bit height cap; use a toy window or raise the cap"
        )));
    }
    // The walk lands within one 2u step of the window's lower edge, so
    // certifying membership takes precision proportional to the edge's own
    // size, not the default budget.
    let cert_bits = budget_bits.max(lo_bits_estimate.min(u32::MAX as u64 / 2) as u32 + 128);
    let lo_enclosure = |bits: u32| -> Result<RatInterval> {
        match window {
            HeightWindow::Full => {
                let q_iv = RatInterval::point(q_rat.clone());
                pow_interval(&q_iv, m_prime, bits)
            }
            HeightWindow::Toy { lo, .. } => {
                Ok(RatInterval::point(BigRational::from(lo.clone())))
            }
        }
    };

    // Pick the smallest a with |seed| + 2ũ_y + 2a·u_y ≥ window-lo.
    let seed_h = seed.height();
    let step = BigRational::from(BigInt::from(2) * lc.u.q());
    let offset_of = |bits: u32| -> Result<RatInterval> {
        let s = seed_h.enclose(bits)?;
        let shift = BigRational::from(BigInt::from(2) * ut_plus.q());
        Ok(lo_enclosure(bits)?.sub(&s).shift(&-shift))
    };
    let a = certified_window_bound(&offset_of, &BigRational::zero(), &step, true, cert_bits)?
        .max(BigInt::one());
    let v = Loop::new(ut_plus.p() + &a * lc.u.p(), ut_plus.q() + &a * lc.u.q())?;
    let w0 = seed.twisted(&v, &BigInt::from(2))?;

    // Certify the window.
    let h0 = w0.height();
    let in_window = match window {
        HeightWindow::Full => {
            let q_real = Real::from_integer(ba.q.clone());
            let above = cmp_pow(&q_real, m_prime, &h0, cert_bits)? != Ordering::Greater;
            let below =
                cmp_pow(&q_real, &(m_prime * &params.r), &h0, cert_bits)? == Ordering::Greater;
            above && below
        }
        HeightWindow::Toy { lo, hi } => {
            let above = h0.cmp_rational(&BigRational::from(lo.clone()), budget_bits)?
                != Ordering::Less;
            let below = h0.cmp_rational(&BigRational::from(hi.clone()), budget_bits)?
                == Ordering::Less;
            above && below
        }
    };
    if !in_window {
        return Err(Error::NotFoundAtCap(
            "the Λ₁ walk overshot the target window: the window is narrower \
             than one 2u step at this seed"
                .into(),
        ));
    }
    let d0 = d_of(&w0, ba);
    if d0 > BigInt::from(2) {
        return Err(Error::Degenerate(format!(
            "d(w0, k0) = {d0} > 2: the best-approximation vector \
             (p1, p2, q) is not primitive"
        )));
    }
    Ok(w0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;

    fn rat(p: i64, q: i64) -> BigRational {
        BigRational::new(BigInt::from(p), BigInt::from(q))
    }

    fn big(n: i64) -> BigInt {
        BigInt::from(n)
    }

    /// 10^24: the perturbation scale of the designed context.
    fn q24() -> BigInt {
        BigInt::from(10u64).pow(24)
    }

    /// λ = 1/2 + 10^{-24}, μ = 1/3 + 10^{-24}: the pair admits (3, 2, 6) as
    /// a best approximation with error 6·10^{-24}, and the next denominator
    /// is of order 10^{23}, so 10^{23} is a safe conservative stand-in.
    fn ctx_designed() -> Context {
        let q = BigRational::from(q24());
        let lam = rat(1, 2) + q.recip();
        let mu = rat(1, 3) + q.recip();
        Context::new(Real::from_rational(lam), Real::from_rational(mu)).unwrap()
    }

    fn ba_designed() -> BestApprox {
        BestApprox {
            p1: big(3),
            p2: big(2),
            q: big(6),
            err: Real::from_rational(rat(6, 1) / BigRational::from(q24())),
        }
    }

    fn next_q_designed() -> BigInt {
        BigInt::from(10u64).pow(23)
    }

    fn toy_params() -> ConstructionParams {
        ConstructionParams::toy(&rat(1, 10), &rat(9, 8), 2, 2).unwrap()
    }

    fn lp(p: i64, q: i64) -> Loop {
        Loop::new(p, q).unwrap()
    }

    // --- the complement pair ---

    #[test]
    fn utilde_frozen_instances() {
        // (ũ⁺, ũ⁻) computed by hand via the extended Euclid identities.
        assert_eq!(utilde_pair(&lp(3, 2)).unwrap(), (lp(1, 1), lp(2, 1)));
        assert_eq!(utilde_pair(&lp(9, 14)).unwrap(), (lp(7, 11), lp(2, 3)));
        assert_eq!(utilde_pair(&lp(5, 3)).unwrap(), (lp(3, 2), lp(2, 1)));
        assert_eq!(utilde_pair(&lp(0, 1)).unwrap(), (lp(-1, 1), lp(1, 1)));
    }

    #[test]
    fn utilde_unimodular_and_bounded() {
        for (p, q) in [(3i64, 2i64), (9, 14), (-7, 5), (22, 7), (-1, 1), (4, 25)] {
            let u = lp(p, q);
            let (plus, minus) = utilde_pair(&u).unwrap();
            for (ut, want) in [(&plus, 1i64), (&minus, -1i64)] {
                let cross = u.p() * ut.q() - u.q() * ut.p();
                assert_eq!(cross, big(want), "u = ({p}, {q})");
                assert!(ut.q() > &BigInt::zero() && ut.q() <= u.q());
            }
        }
    }

    #[test]
    fn utilde_needs_positive_height() {
        assert!(matches!(
            utilde_pair(&lp(1, 0)),
            Err(Error::Degenerate(_))
        ));
        assert!(matches!(
            utilde_pair(&lp(3, -2)),
            Err(Error::Degenerate(_))
        ));
    }

    // --- Λ enumeration ---

    /// s = 500 member of the designed family w = (6s, 4s): the convergent
    /// data is d = 12s + 1 = 6001 with u = (3, 2), so Λ₁ consists of all
    /// v with odd height and |u×v| = 1, two per height.  The window
    /// [|w|^r, 2|w|^r] ≈ [5173, 10346] keeps the set small enough to check
    /// exhaustively.
    #[test]
    fn lambda_exhaustive_small_family() {
        let ctx = ctx_designed();
        let w = Slit::new(&ctx, 3000, 2000).unwrap();
        let ba = ba_designed();
        let nq = next_q_designed();
        let params = toy_params();
        let c1 = BigRational::one();
        let out = enumerate_lambda(&w, &ba, Some(&nq), &params, &c1, 6000).unwrap();

        assert_eq!(out.u, lp(3, 2));
        assert_eq!(out.d, big(6001));
        assert!(out.restriction_verified);
        assert!(out.bounds_certified);
        assert!(!out.truncated);
        assert!(!out.count_bound_applicable); // |w|^{1/8} ≈ 2.59 < 2q_k = 12
        assert!(out.count_bound_ok); // vacuous
        assert!(out.gcd_bound_ok);
        assert_eq!(out.max_area_checked, out.children.len());
        assert!(out.max_area_ok);
        assert_eq!(out.raw_count, out.dedup_count);
        assert_eq!(
            BigInt::from(out.children.len()),
            out.raw_count,
            "cap was large enough to materialize everything"
        );

        // Independent boundary scan: membership of an integer height h is
        // |w|^r ≤ h ≤ 2|w|^r, decided by cmp_pow.  Candidate heights are
        // the odd integers (3h ∓ 1 must be even).
        let height = w.height();
        let r = &params.r;
        let member = |h: i64| -> bool {
            let above = cmp_pow(&height, r, &Real::from_integer(h), 256).unwrap()
                != Ordering::Greater;
            let below = cmp_pow(&height, r, &Real::from_rational(rat(h, 2)), 256).unwrap()
                != Ordering::Less;
            above && below
        };
        let mut first = 5161i64;
        while !member(first) {
            first += 2;
            assert!(first < 5200, "window start drifted out of the design band");
        }
        let mut last = 10357i64;
        while !member(last) {
            last -= 2;
            assert!(last > 10300, "window end drifted out of the design band");
        }
        let per_branch = (last - first) / 2 + 1;
        assert_eq!(out.raw_count, big(2 * per_branch));
        assert!((5100..=5250).contains(&(2 * per_branch)));

        // Full set equality: for every odd height h in the window the two
        // members are ((3h−1)/2, h) and ((3h+1)/2, h).
        let got: std::collections::BTreeSet<(BigInt, BigInt)> = out
            .children
            .iter()
            .map(|c| (c.v.p().clone(), c.v.q().clone()))
            .collect();
        assert_eq!(got.len(), out.children.len());
        let mut expected = std::collections::BTreeSet::new();
        let mut h = first;
        while h <= last {
            expected.insert((big((3 * h - 1) / 2), big(h)));
            expected.insert((big((3 * h + 1) / 2), big(h)));
            h += 2;
        }
        assert_eq!(got, expected);

        // The materialized steps really are v = ũ + a·u per branch.
        for c in &out.children {
            let ut = if c.branch == 1 { lp(1, 1) } else { lp(2, 1) };
            assert_eq!(c.v.p(), &(ut.p() + &c.a * big(3)));
            assert_eq!(c.v.q(), &(ut.q() + &c.a * big(2)));
            assert!(c.a.is_positive());
        }
    }

    /// s = 1.1·10^8: |w| = 4.4·10^8 + 1/3 + 10^{-24} clears the counting
    /// lemma's hypothesis |w|^{r−1} ≥ 2q_k (12^8 = 429981696 < |w|), the
    /// window holds about 5.3·10^9 children, and the certificate is checked
    /// analytically while only 64 children are materialized.
    #[test]
    fn lambda_counting_certificate_at_scale() {
        let ctx = ctx_designed();
        let w = Slit::new(&ctx, 660_000_000i64, 440_000_000i64).unwrap();
        let ba = ba_designed();
        let nq = next_q_designed();
        let params = toy_params();
        let c1 = BigRational::one();
        let out = enumerate_lambda(&w, &ba, Some(&nq), &params, &c1, 64).unwrap();

        assert_eq!(out.u, lp(3, 2));
        assert_eq!(out.d, big(12) * big(110_000_000) + big(1));
        assert!(out.truncated);
        assert_eq!(out.children.len(), 64);
        assert!(out.restriction_verified);
        assert!(out.bounds_certified);
        assert!(out.count_bound_applicable);
        assert!(out.count_bound_ok);
        assert!(out.gcd_bound_ok);
        assert_eq!(out.max_area_checked, 64);
        assert!(out.max_area_ok);

        // Both complements have height 1, so the two branch windows agree.
        assert_eq!(out.count_plus, out.count_minus);
        assert_eq!(out.raw_count, &out.count_plus * big(2));
        let lo = big(2_600_000_000i64);
        let hi = big(2_700_000_000i64);
        assert!(
            out.count_plus > lo && out.count_plus < hi,
            "branch count {} outside the design band",
            out.count_plus
        );
    }

    /// w = (1, 2) under the same context: u = (9, 14) and the window
    /// [|w|^r, 2|w|^r] ≈ [2.59, 5.19] sits below every admissible height,
    /// so Λ is empty.
    #[test]
    fn lambda_empty_window() {
        let ctx = ctx_designed();
        let w = Slit::new(&ctx, 1, 2).unwrap();
        let ba = ba_designed();
        let nq = next_q_designed();
        let params = toy_params();
        let out =
            enumerate_lambda(&w, &ba, Some(&nq), &params, &BigRational::one(), 16).unwrap();
        assert_eq!(out.u, lp(9, 14));
        assert_eq!(out.d, big(1));
        assert!(out.children.is_empty());
        assert!(out.raw_count.is_zero());
        assert!(!out.truncated);
        assert!(!out.count_bound_applicable);
        assert!(out.count_bound_ok);
        assert_eq!(out.max_area_checked, 0);
        assert!(out.bounds_certified);
    }

    #[test]
    fn lambda_without_next_denominator() {
        let ctx = ctx_designed();
        let w = Slit::new(&ctx, 3000, 2000).unwrap();
        let ba = ba_designed();
        let params = toy_params();
        let out =
            enumerate_lambda(&w, &ba, None, &params, &BigRational::one(), 32).unwrap();
        assert!(!out.restriction_verified);
        assert_eq!(out.max_area_checked, 0, "no gate without q_{{k+1}}");
        assert!(out.max_area_ok);
        assert!(out.truncated);
    }

    #[test]
    fn lambda_rejects_zero_cap() {
        let ctx = ctx_designed();
        let w = Slit::new(&ctx, 1, 2).unwrap();
        let out = enumerate_lambda(
            &w,
            &ba_designed(),
            None,
            &toy_params(),
            &BigRational::one(),
            0,
        );
        assert!(matches!(out, Err(Error::Precondition(_))));
    }

    // --- the initial slit ---

    fn ba_seq_designed() -> Vec<BestApprox> {
        vec![
            BestApprox {
                p1: big(1),
                p2: big(0),
                q: big(1),
                err: Real::from_rational(rat(1, 2)),
            },
            ba_designed(),
        ]
    }

    /// Toy window [1000, 10000) from the base slit at k0 = 1: the walk uses
    /// u = (3, 2), ũ⁺ = (1, 1), and the smallest admissible step is
    /// a = 250, landing on (m, n) = (1502, 1002) with height 1002.33….
    #[test]
    fn initial_slit_toy_window() {
        let ctx = ctx_designed();
        let params = toy_params();
        let window = HeightWindow::Toy {
            lo: big(1000),
            hi: big(10000),
        };
        let w0 = initial_slit(
            &ctx,
            1,
            &ba_seq_designed(),
            &params,
            &window,
            None,
            &BigRational::one(),
            4096,
        )
        .unwrap();
        assert_eq!(w0.m(), &big(1502));
        assert_eq!(w0.n(), &big(1002));
        // d(w0, k0) = gcd(3 + 6·1502, 2 + 6·1002) = gcd(9015, 6014) = 1.
        assert_eq!(big(9015).gcd(&big(6014)), big(1));
    }

    #[test]
    fn initial_slit_window_narrower_than_step() {
        let ctx = ctx_designed();
        let window = HeightWindow::Toy {
            lo: big(1000),
            hi: big(1001),
        };
        let out = initial_slit(
            &ctx,
            1,
            &ba_seq_designed(),
            &toy_params(),
            &window,
            None,
            &BigRational::one(),
            4096,
        );
        assert!(matches!(out, Err(Error::NotFoundAtCap(_))));
    }

    #[test]
    fn initial_slit_rejects_tall_seed() {
        let ctx = ctx_designed();
        let seed = Slit::new(&ctx, 0, 2).unwrap(); // height 2.33 ≥ q/4 = 1.5
        let out = initial_slit(
            &ctx,
            1,
            &ba_seq_designed(),
            &toy_params(),
            &HeightWindow::Toy {
                lo: big(1000),
                hi: big(10000),
            },
            Some(&seed),
            &BigRational::one(),
            4096,
        );
        assert!(matches!(out, Err(Error::Precondition(_))));
    }

    #[test]
    fn initial_slit_needs_covering_sequence() {
        let ctx = ctx_designed();
        let out = initial_slit(
            &ctx,
            7,
            &ba_seq_designed(),
            &toy_params(),
            &HeightWindow::Toy {
                lo: big(1000),
                hi: big(10000),
            },
            None,
            &BigRational::one(),
            4096,
        );
        assert!(matches!(out, Err(Error::Precondition(_))));
    }

    /// Full mode against a small height cap refuses honestly: the window
    /// starts at q_{k0}^{M′}, far beyond 2^64 for the toy parameters.
    #[test]
    fn initial_slit_full_mode_refuses_small_cap() {
        let ctx = ctx_designed();
        let out = initial_slit(
            &ctx,
            1,
            &ba_seq_designed(),
            &toy_params(),
            &HeightWindow::Full,
            None,
            &BigRational::one(),
            64,
        );
        assert!(matches!(out, Err(Error::NotFoundAtCap(_))));
    }

    /// With a generous cap the full-mode walk succeeds even though the
    /// window sits at astronomical heights, and the result is certified
    /// against both window edges.
    #[test]
    fn initial_slit_full_mode_succeeds_under_large_cap() {
        let ctx = ctx_designed();
        let params = toy_params();
        let seq = ba_seq_designed();
        let c1 = BigRational::one();
        let w0 = initial_slit(&ctx, 1, &seq, &params, &HeightWindow::Full, None, &c1, 4096)
            .unwrap();
        // Deterministic.
        let again = initial_slit(&ctx, 1, &seq, &params, &HeightWindow::Full, None, &c1, 4096)
            .unwrap();
        assert_eq!(w0.m(), again.m());
        assert_eq!(w0.n(), again.n());
        // Window membership, re-certified here.
        let q6 = Real::from_integer(6);
        assert_ne!(
            cmp_pow(&q6, &params.m_prime, &w0.height(), 4096).unwrap(),
            Ordering::Greater
        );
        assert_eq!(
            cmp_pow(
                &q6,
                &(&params.m_prime * &params.r),
                &w0.height(),
                4096
            )
            .unwrap(),
            Ordering::Greater
        );
        // d(w0, k0) ≤ 2.
        let ba = &seq[1];
        let d0 = (&ba.p1 + w0.m() * &ba.q).gcd(&(&ba.p2 + w0.n() * &ba.q));
        assert!(d0 <= big(2));
    }
}
