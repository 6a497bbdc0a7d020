//! Norms on the plane used to measure approximation vectors.
//!
//! Three built-in norms (`sup`, `l1`, `l2`) and a user-supplied positive
//! definite quadratic form are provided.  Each norm carries an equivalence
//! constant `C'` with `(1/C') sup <= N <= C' sup`; the built-ins use the
//! standard constants and a custom form must declare its own, which is
//! sanity-checked on an integer sample grid before use.
//!
//! Decision procedures never take square roots: comparisons involving `l2`
//! or quadratic-form norms are carried out on the exact squared values, so
//! exact inputs give exact answers.

use std::cmp::Ordering;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::real::{QuadExpr, Real};
use super::{precision_ladder, RatInterval, DEFAULT_BUDGET_BITS};

/// A norm on R^2.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Norm {
    /// `max(|x|, |y|)`, equivalence constant 1.
    Sup,
    /// `|x| + |y|`, equivalence constant 2.
    L1,
    /// `sqrt(x^2 + y^2)`, equivalence constant 2.
    L2,
    /// `sqrt(a x^2 + b x y + c y^2)` for a positive definite form, with a
    /// declared equivalence constant.
    QuadForm {
        a: BigRational,
        b: BigRational,
        c: BigRational,
        equiv_upper: BigRational,
    },
}

impl Norm {
    /// The constant `C'` with `(1/C') sup <= N <= C' sup`.
    pub fn equiv_upper(&self) -> BigRational {
        match self {
            Norm::Sup => BigRational::one(),
            Norm::L1 | Norm::L2 => BigRational::from_integer(BigInt::from(2)),
            Norm::QuadForm { equiv_upper, .. } => equiv_upper.clone(),
        }
    }

    /// Short identifier for reports.
    pub fn name(&self) -> &'static str {
        match self {
            Norm::Sup => "sup",
            Norm::L1 => "l1",
            Norm::L2 => "l2",
            Norm::QuadForm { .. } => "quad-form",
        }
    }

    /// Validate the norm definition.
    ///
    /// Built-ins are always valid.  A quadratic form must be positive
    /// definite and its declared equivalence constant must survive a sample
    /// of integer directions; sampling can only refute, so a passing check
    /// is a sanity screen, not a proof, and the constant remains the
    /// caller's responsibility.
    pub fn validate(&self) -> Result<()> {
        let Norm::QuadForm {
            a,
            b,
            c,
            equiv_upper,
        } = self
        else {
            return Ok(());
        };
        if !a.is_positive() {
            return Err(Error::Precondition(format!(
                "quadratic form needs a > 0, got a = {a}"
            )));
        }
        let four_ac = BigRational::from_integer(BigInt::from(4)) * a * c;
        let disc = &four_ac - &(b * b);
        if !disc.is_positive() {
            return Err(Error::Precondition(format!(
                "quadratic form is not positive definite: 4ac - b^2 = {disc}"
            )));
        }
        if equiv_upper < &BigRational::one() {
            return Err(Error::Precondition(format!(
                "equivalence constant must be at least 1, got {equiv_upper}"
            )));
        }
        let c2 = equiv_upper * equiv_upper;
        const GRID: i64 = 8;
        for x in -GRID..=GRID {
            for y in -GRID..=GRID {
                if x == 0 && y == 0 {
                    continue;
                }
                let xr = BigRational::from_integer(BigInt::from(x));
                let yr = BigRational::from_integer(BigInt::from(y));
                let form = a * &xr * &xr + b * &xr * &yr + c * &yr * &yr;
                let sup = xr.abs().max(yr.abs());
                let sup2 = &sup * &sup;
                if form > &c2 * &sup2 || &sup2 > &(&c2 * &form) {
                    return Err(Error::Precondition(format!(
                        "equivalence constant {equiv_upper} fails at direction ({x}, {y})"
                    )));
                }
            }
        }
        Ok(())
    }

    /// The exact squared norm of an exact vector, as a radical sum.
    ///
    /// Only meaningful for the `l2` and quadratic-form norms, whose squares
    /// are polynomial in the coordinates.
    fn squared_form(&self, x: &QuadExpr, y: &QuadExpr) -> Option<QuadExpr> {
        match self {
            Norm::L2 => Some(x.square().add(&y.square())),
            Norm::QuadForm { a, b, c, .. } => Some(
                x.square()
                    .scale(a)
                    .add(&x.mul(y).scale(b))
                    .add(&y.square().scale(c)),
            ),
            Norm::Sup | Norm::L1 => None,
        }
    }

    /// Evaluate the norm of an exact vector as a radical sum when the norm
    /// is polynomial after squaring, or via absolute values for `sup`/`l1`.
    fn eval_exact(&self, x: &QuadExpr, y: &QuadExpr, budget: u32) -> Result<Real> {
        match self {
            Norm::Sup => {
                let ord = x.square().compare(&y.square(), budget)?;
                let larger = if ord == Ordering::Less { y } else { x };
                let abs = match larger.sign(budget)? {
                    -1 => larger.neg(),
                    _ => larger.clone(),
                };
                Ok(Real::from_expr(abs))
            }
            Norm::L1 => {
                let ax = match x.sign(budget)? {
                    -1 => x.neg(),
                    _ => x.clone(),
                };
                let ay = match y.sign(budget)? {
                    -1 => y.neg(),
                    _ => y.clone(),
                };
                Ok(Real::from_expr(ax.add(&ay)))
            }
            Norm::L2 | Norm::QuadForm { .. } => {
                let sq = self
                    .squared_form(x, y)
                    .expect("squared form exists for these norms");
                Real::sqrt_expr(&sq, budget)
            }
        }
    }

    /// Evaluate the norm of a vector of computable reals.
    ///
    /// Exact inputs give an exact (possibly radical-valued) result; ball
    /// inputs give a ball.
    pub fn eval(&self, x: &Real, y: &Real) -> Result<Real> {
        if let (Some(ex), Some(ey)) = (x.as_expr(), y.as_expr()) {
            return self.eval_exact(ex, ey, DEFAULT_BUDGET_BITS);
        }
        let iv = self.eval_interval(x, y, DEFAULT_BUDGET_BITS / 2)?;
        Ok(Real::from_interval_hull(&iv))
    }

    /// A certified enclosure of the norm value.
    pub fn eval_interval(&self, x: &Real, y: &Real, bits: u32) -> Result<RatInterval> {
        let sx = x.enclose_best(bits + 2);
        let sy = y.enclose_best(bits + 2);
        self.interval_of(&sx, &sy, bits)
    }

    /// A certified enclosure of the norm of a vector given as component
    /// enclosures.  Pure rational interval arithmetic; the enumeration
    /// kernels use this as their cheap screening pass.
    pub fn interval_of(&self, sx: &RatInterval, sy: &RatInterval, bits: u32) -> Result<RatInterval> {
        let ix = sx.abs();
        let iy = sy.abs();
        match self {
            Norm::Sup => Ok(RatInterval::hull(
                ix.lo().max(iy.lo()).clone(),
                ix.hi().max(iy.hi()).clone(),
            )),
            Norm::L1 => Ok(ix.add(&iy)),
            Norm::L2 => {
                let sq = ix.mul(&ix).add(&iy.mul(&iy));
                sq.sqrt_outward(bits)
            }
            Norm::QuadForm { a, b, c, .. } => {
                // the signed enclosures resolve the cross term's sign
                let sq = sx
                    .mul(sx)
                    .scale(a)
                    .add(&sx.mul(sy).scale(b))
                    .add(&sy.mul(sy).scale(c));
                let lo = if sq.lo().is_negative() {
                    BigRational::zero()
                } else {
                    sq.lo().clone()
                };
                RatInterval::hull(lo, sq.hi().clone()).sqrt_outward(bits)
            }
        }
    }

    /// The exact squared norm of a rational vector.  Comparing squared
    /// values is equivalent to comparing norms, so integer heights sort
    /// exactly through this key.
    pub fn squared_rational(&self, x: &BigRational, y: &BigRational) -> BigRational {
        match self {
            Norm::Sup => {
                let x2 = x * x;
                let y2 = y * y;
                x2.max(y2)
            }
            Norm::L1 => {
                let s = x.abs() + y.abs();
                &s * &s
            }
            Norm::L2 => x * x + y * y,
            Norm::QuadForm { a, b, c, .. } => a * x * x + b * x * y + c * y * y,
        }
    }

    /// Compare `N(v)` with `N(w)`.
    ///
    /// Exact for exact vectors (squared values are compared symbolically);
    /// ball inputs refine along the precision ladder and report
    /// [`Error::Undecidable`] when the enclosures still overlap at the
    /// budget.
    pub fn compare(
        &self,
        v: (&Real, &Real),
        w: (&Real, &Real),
        budget: u32,
    ) -> Result<Ordering> {
        let exact = (
            v.0.as_expr(),
            v.1.as_expr(),
            w.0.as_expr(),
            w.1.as_expr(),
        );
        if let (Some(vx), Some(vy), Some(wx), Some(wy)) = exact {
            return self.compare_exact(vx, vy, wx, wy, budget);
        }
        for bits in precision_ladder(budget) {
            let a = self.eval_interval(v.0, v.1, bits)?;
            let b = self.eval_interval(w.0, w.1, bits)?;
            if let Some(ord) = a.partial_cmp_interval(&b) {
                return Ok(ord);
            }
        }
        Err(Error::undecidable("norm comparison of ball vectors", budget))
    }

    fn compare_exact(
        &self,
        vx: &QuadExpr,
        vy: &QuadExpr,
        wx: &QuadExpr,
        wy: &QuadExpr,
        budget: u32,
    ) -> Result<Ordering> {
        match self {
            Norm::Sup => {
                let a = max_square(vx, vy, budget)?;
                let b = max_square(wx, wy, budget)?;
                a.compare(&b, budget)
            }
            Norm::L1 => {
                let a = abs_expr(vx, budget)?.add(&abs_expr(vy, budget)?);
                let b = abs_expr(wx, budget)?.add(&abs_expr(wy, budget)?);
                a.compare(&b, budget)
            }
            Norm::L2 | Norm::QuadForm { .. } => {
                let a = self.squared_form(vx, vy).expect("polynomial square");
                let b = self.squared_form(wx, wy).expect("polynomial square");
                a.compare(&b, budget)
            }
        }
    }

    /// Compare `N(v)` with a nonnegative rational bound.
    ///
    /// Exact for exact vectors.  A negative bound always compares
    /// `Greater` (norms are nonnegative and the zero vector exceeds any
    /// negative number too).
    pub fn compare_to_rational(
        &self,
        v: (&Real, &Real),
        bound: &BigRational,
        budget: u32,
    ) -> Result<Ordering> {
        if bound.is_negative() {
            return Ok(Ordering::Greater);
        }
        if let (Some(vx), Some(vy)) = (v.0.as_expr(), v.1.as_expr()) {
            let bound2 = bound * bound;
            return match self {
                Norm::Sup => {
                    let x2 = vx.square().cmp_rational(&bound2, budget)?;
                    let y2 = vy.square().cmp_rational(&bound2, budget)?;
                    Ok(match (x2, y2) {
                        (Ordering::Greater, _) | (_, Ordering::Greater) => Ordering::Greater,
                        (Ordering::Less, Ordering::Less) => Ordering::Less,
                        _ => Ordering::Equal,
                    })
                }
                Norm::L1 => {
                    let sum = abs_expr(vx, budget)?.add(&abs_expr(vy, budget)?);
                    sum.cmp_rational(bound, budget)
                }
                Norm::L2 | Norm::QuadForm { .. } => {
                    let sq = self.squared_form(vx, vy).expect("polynomial square");
                    sq.cmp_rational(&bound2, budget)
                }
            };
        }
        for bits in precision_ladder(budget) {
            let iv = self.eval_interval(v.0, v.1, bits)?;
            if iv.lo() > bound {
                return Ok(Ordering::Greater);
            }
            if iv.hi() < bound {
                return Ok(Ordering::Less);
            }
            if iv.lo() == iv.hi() && iv.lo() == bound {
                return Ok(Ordering::Equal);
            }
        }
        Err(Error::undecidable(
            "norm comparison against a rational bound",
            budget,
        ))
    }

    /// Whether the norm of an exact vector is exactly zero.
    pub fn is_zero_vector(x: &Real, y: &Real) -> bool {
        x.is_zero() && y.is_zero()
    }
}

/// The absolute value of a radical sum, via its certified sign.
fn abs_expr(e: &QuadExpr, budget: u32) -> Result<QuadExpr> {
    Ok(match e.sign(budget)? {
        -1 => e.neg(),
        _ => e.clone(),
    })
}

/// The larger of `x^2` and `y^2`.
fn max_square(x: &QuadExpr, y: &QuadExpr, budget: u32) -> Result<QuadExpr> {
    let x2 = x.square();
    let y2 = y.square();
    Ok(match x2.compare(&y2, budget)? {
        Ordering::Less => y2,
        _ => x2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rat(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    fn r(n: i64) -> Real {
        Real::from_integer(n)
    }

    #[test]
    fn builtin_constants() {
        assert_eq!(Norm::Sup.equiv_upper(), rat(1, 1));
        assert_eq!(Norm::L1.equiv_upper(), rat(2, 1));
        assert_eq!(Norm::L2.equiv_upper(), rat(2, 1));
    }

    #[test]
    fn eval_on_integer_vectors() {
        let x = r(3);
        let y = r(-4);
        assert_eq!(
            Norm::Sup.eval(&x, &y).unwrap().as_rational(),
            Some(rat(4, 1))
        );
        assert_eq!(
            Norm::L1.eval(&x, &y).unwrap().as_rational(),
            Some(rat(7, 1))
        );
        assert_eq!(
            Norm::L2.eval(&x, &y).unwrap().as_rational(),
            Some(rat(5, 1))
        );
    }

    #[test]
    fn l2_irrational_value() {
        // |(1, 1)|_2 = sqrt(2)
        let v = Norm::L2.eval(&r(1), &r(1)).unwrap();
        let s2 = Real::parse("sqrt(2)").unwrap();
        assert_eq!(v.compare(&s2, 128).unwrap(), Ordering::Equal);
    }

    #[test]
    fn compare_vectors() {
        // |(1, 0)| < |(1, 1)| in every norm except sup, where they tie
        let v = (&r(1), &r(0));
        let w = (&r(1), &r(1));
        assert_eq!(Norm::Sup.compare(v, w, 64).unwrap(), Ordering::Equal);
        assert_eq!(Norm::L1.compare(v, w, 64).unwrap(), Ordering::Less);
        assert_eq!(Norm::L2.compare(v, w, 64).unwrap(), Ordering::Less);
    }

    #[test]
    fn compare_to_rational_bounds() {
        // |(1,1)|_2 = sqrt(2): less than 3/2, greater than 7/5
        let v = (&r(1), &r(1));
        assert_eq!(
            Norm::L2.compare_to_rational(v, &rat(3, 2), 64).unwrap(),
            Ordering::Less
        );
        assert_eq!(
            Norm::L2.compare_to_rational(v, &rat(7, 5), 64).unwrap(),
            Ordering::Greater
        );
        // exact hit: |(3,4)|_2 = 5
        let w = (&r(3), &r(4));
        assert_eq!(
            Norm::L2.compare_to_rational(w, &rat(5, 1), 64).unwrap(),
            Ordering::Equal
        );
        // negative bounds are always exceeded
        assert_eq!(
            Norm::Sup
                .compare_to_rational((&r(0), &r(0)), &rat(-1, 1), 64)
                .unwrap(),
            Ordering::Greater
        );
    }

    #[test]
    fn quad_form_validation() {
        // the l2 form in disguise
        let ok = Norm::QuadForm {
            a: rat(1, 1),
            b: rat(0, 1),
            c: rat(1, 1),
            equiv_upper: rat(2, 1),
        };
        assert!(ok.validate().is_ok());
        // not positive definite
        let bad = Norm::QuadForm {
            a: rat(1, 1),
            b: rat(3, 1),
            c: rat(1, 1),
            equiv_upper: rat(2, 1),
        };
        assert!(bad.validate().is_err());
        // constant too optimistic: N(1,0) = 2 sup(1,0)
        let tight = Norm::QuadForm {
            a: rat(4, 1),
            b: rat(0, 1),
            c: rat(1, 1),
            equiv_upper: rat(1, 1),
        };
        assert!(tight.validate().is_err());
    }

    #[test]
    fn quad_form_eval() {
        let form = Norm::QuadForm {
            a: rat(1, 1),
            b: rat(1, 1),
            c: rat(1, 1),
            equiv_upper: rat(2, 1),
        };
        form.validate().unwrap();
        // N(1, 1)^2 = 3
        let v = form.eval(&r(1), &r(1)).unwrap();
        let s3 = Real::parse("sqrt(3)").unwrap();
        assert_eq!(v.compare(&s3, 128).unwrap(), Ordering::Equal);
    }

    #[test]
    fn ball_vectors_compare_with_ladder() {
        let x = Real::parse("1.0~1e-6").unwrap();
        let y = Real::parse("1.0~1e-6").unwrap();
        // clearly below 3/2
        assert_eq!(
            Norm::L2
                .compare_to_rational((&x, &y), &rat(3, 2), 128)
                .unwrap(),
            Ordering::Less
        );
        // sqrt(2) against its own ball value: undecidable at any budget
        let exact_sqrt2 = Real::parse("1.41421356237~1e-3").unwrap();
        let err = Norm::Sup
            .compare_to_rational(
                (&exact_sqrt2, &Real::zero()),
                &rat(14142, 10000),
                64,
            )
            .unwrap_err();
        assert!(err.is_undecidable());
    }

    #[test]
    fn serde_names() {
        let s = serde_json::to_string(&Norm::Sup).unwrap();
        assert_eq!(s, "\"sup\"");
        let n: Norm = serde_json::from_str("\"l2\"").unwrap();
        assert_eq!(n, Norm::L2);
    }
}
