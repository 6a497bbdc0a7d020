//! Nearest rational affine lines of a planar vector.
//!
//! A line is a primitive integer triple `(a, b, c)` with `(a, b) ≠ (0, 0)`
//! and `gcd(a, b, c) = 1`, of *height* `‖(a, b)‖` in the chosen norm and
//! *distance* `|a·x1 + b·x2 + c|` from `x`.  The nearest-line sequence
//! `η_1, η_2, …` collects, in order of strictly increasing height, the
//! lines that (i) strictly beat the distance of every line of smaller
//! height and (ii) weakly minimize the distance among lines of the same
//! height; ties at equal height and distance are broken lexicographically
//! on `(a, b, c)`.
//!
//! `(a, b, c)` and `(−a, −b, −c)` define the same line, so the enumeration
//! canonicalizes signs (first nonzero of `(a, b)` positive).  For each
//! `(a, b)` the optimal `c` is one of the two integers nearest to
//! `−(a·x1 + b·x2)`; both candidates enter the pool (the primitivity
//! filter can eliminate one of them).
//!
//! When a line achieves exact distance 0 the vector is rationally
//! dependent; the zero-distance line is appended as terminal element and
//! the result carries a `uniquely_rational` flag.

use std::cmp::Ordering;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive};
use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::numerics::norm::Norm;
use crate::numerics::real::Real;
use crate::numerics::DEFAULT_BUDGET_BITS;

/// One nearest rational affine line.
#[derive(Debug, Clone)]
pub struct AffineLine {
    pub a: BigInt,
    pub b: BigInt,
    pub c: BigInt,
    /// `‖(a, b)‖` in the chosen norm.
    pub height: Real,
    /// `|a·x1 + b·x2 + c|`.
    pub distance: Real,
    /// Whether the distance is exactly zero (the terminal case).
    pub exact_zero: bool,
}

impl Serialize for AffineLine {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("AffineLine", 7)?;
        st.serialize_field("a", &self.a.to_string())?;
        st.serialize_field("b", &self.b.to_string())?;
        st.serialize_field("c", &self.c.to_string())?;
        st.serialize_field("height", &self.height)?;
        st.serialize_field("distance", &self.distance)?;
        st.serialize_field("distance_approx", &self.distance.approx_f64())?;
        st.serialize_field("exact_zero", &self.exact_zero)?;
        st.end()
    }
}

/// The nearest-line sequence up to a height bound.
#[derive(Debug, Clone, Serialize)]
pub struct NearestLines {
    pub lines: Vec<AffineLine>,
    /// True when the last line has exact distance 0: `x` lies on a single
    /// rational line of height within the bound.
    pub uniquely_rational: bool,
    /// The height bound the search was run to.  Any line absent from
    /// `lines` with sup-height ≤ this bound is certified not to improve on
    /// the recorded sequence.
    pub height_max: u64,
}

/// Compute the nearest rational affine lines of `x` with height at most
/// `height_max`, under the default precision budget.
pub fn nearest_affine_lines(
    x: (&Real, &Real),
    norm: &Norm,
    height_max: u64,
) -> Result<NearestLines> {
    nearest_affine_lines_budget(x, norm, height_max, DEFAULT_BUDGET_BITS)
}

/// As [`nearest_affine_lines`], with an explicit precision budget.
pub fn nearest_affine_lines_budget(
    x: (&Real, &Real),
    norm: &Norm,
    height_max: u64,
    budget_bits: u32,
) -> Result<NearestLines> {
    if height_max == 0 {
        return Err(Error::Precondition("height_max must be at least 1".into()));
    }
    norm.validate()?;

    // Sup-box radius covering every vector of norm ≤ height_max.
    let hm = BigRational::from(BigInt::from(height_max));
    let box_r = (&norm.equiv_upper() * &hm)
        .ceil()
        .to_integer()
        .to_i64()
        .ok_or_else(|| Error::Domain("height bound too large to enumerate".into()))?;
    let h2_max = &hm * &hm;

    // Candidate pool: (squared height, a, b, c, distance).
    struct Cand {
        key: (BigRational, BigInt, BigInt, BigInt),
        distance: Real,
    }
    let mut pool: Vec<Cand> = Vec::new();
    for a in 0..=box_r {
        let b_lo = if a == 0 { 1 } else { -box_r };
        for b in b_lo..=box_r {
            if a == 0 && b == 0 {
                continue;
            }
            let (ab, bb) = (BigInt::from(a), BigInt::from(b));
            let h2 = norm.squared_rational(
                &BigRational::from(ab.clone()),
                &BigRational::from(bb.clone()),
            );
            if h2 > h2_max {
                continue;
            }
            let t = x
                .0
                .mul(&Real::from_integer(ab.clone()))
                .add(&x.1.mul(&Real::from_integer(bb.clone())));
            let f = t.floor(budget_bits)?;
            for c in [-&f - BigInt::one(), -&f] {
                if !ab.gcd(&bb).gcd(&c).is_one() {
                    continue;
                }
                let distance = t.add(&Real::from_integer(c.clone())).abs();
                pool.push(Cand {
                    key: (h2.clone(), ab.clone(), bb.clone(), c),
                    distance,
                });
            }
        }
    }
    pool.sort_by(|u, v| u.key.cmp(&v.key));

    let mut lines: Vec<AffineLine> = Vec::new();
    let mut uniquely_rational = false;
    let mut incumbent: Option<Real> = None;
    let mut i = 0;
    'outer: while i < pool.len() {
        // One group of equal height.
        let mut j = i + 1;
        while j < pool.len() && pool[j].key.0 == pool[i].key.0 {
            j += 1;
        }
        // Weak minimum within the group; the sort order makes "strictly
        // less replaces" keep the lexicographically first minimizer.
        let mut min_idx = i;
        for k in i + 1..j {
            if pool[k]
                .distance
                .compare(&pool[min_idx].distance, budget_bits)?
                == Ordering::Less
            {
                min_idx = k;
            }
        }
        let cand = &pool[min_idx];
        let admit = match &incumbent {
            None => true,
            Some(best) => cand.distance.compare(best, budget_bits)? == Ordering::Less,
        };
        if admit {
            let (_, a, b, c) = &cand.key;
            let height = norm.eval(
                &Real::from_integer(a.clone()),
                &Real::from_integer(b.clone()),
            )?;
            let exact_zero = cand.distance.is_zero();
            lines.push(AffineLine {
                a: a.clone(),
                b: b.clone(),
                c: c.clone(),
                height,
                distance: cand.distance.clone(),
                exact_zero,
            });
            if exact_zero {
                uniquely_rational = true;
                break 'outer;
            }
            incumbent = Some(cand.distance.clone());
        }
        i = j;
    }
    Ok(NearestLines {
        lines,
        uniquely_rational,
        height_max,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::Signed;

    fn r(s: &str) -> Real {
        Real::parse(s).unwrap()
    }

    fn triples(nl: &NearestLines) -> Vec<(i64, i64, i64)> {
        nl.lines
            .iter()
            .map(|l| {
                (
                    l.a.to_i64().unwrap(),
                    l.b.to_i64().unwrap(),
                    l.c.to_i64().unwrap(),
                )
            })
            .collect()
    }

    #[test]
    fn rational_point_hits_exact_line() {
        // x = (1/2, 1/3) lies on 2x − 1 = 0: terminal (2, 0, −1).
        let x1 = r("1/2");
        let x2 = r("1/3");
        let nl = nearest_affine_lines((&x1, &x2), &Norm::Sup, 10).unwrap();
        assert!(nl.uniquely_rational);
        let last = nl.lines.last().unwrap();
        assert_eq!(
            (
                last.a.to_i64().unwrap(),
                last.b.to_i64().unwrap(),
                last.c.to_i64().unwrap()
            ),
            (2, 0, -1)
        );
        assert!(last.exact_zero);
        assert!(last.distance.is_zero());
    }

    #[test]
    fn diagonal_symmetry_is_uniquely_rational() {
        // x = (√2, √2) lies on x1 − x2 = 0.
        let x1 = r("sqrt(2)");
        let x2 = r("sqrt(2)");
        let nl = nearest_affine_lines((&x1, &x2), &Norm::Sup, 5).unwrap();
        assert!(nl.uniquely_rational);
        let last = nl.lines.last().unwrap();
        assert_eq!(
            (
                last.a.to_i64().unwrap(),
                last.b.to_i64().unwrap(),
                last.c.to_i64().unwrap()
            ),
            (1, -1, 0)
        );
        assert!(last.exact_zero);
    }

    #[test]
    fn quadratic_pair_sup_chain_oracle() {
        // x = (√2−1, √3−1), sup norm, heights ≤ 50 — frozen from an
        // independent high-precision scan.
        let x1 = r("-1 + sqrt(2)");
        let x2 = r("-1 + sqrt(3)");
        let nl = nearest_affine_lines((&x1, &x2), &Norm::Sup, 50).unwrap();
        assert!(!nl.uniquely_rational);
        assert_eq!(
            triples(&nl),
            vec![
                (1, 1, -1),
                (1, -2, 1),
                (2, 3, -3),
                (5, 4, -5),
                (16, 21, -22),
                (21, 25, -27),
                (35, -28, 6),
            ]
        );
        let dists: Vec<f64> = nl.lines.iter().map(|l| l.distance.approx_f64()).collect();
        let expect = [
            0.146_264_369_9,
            0.049_888_052_76,
            0.024_579_547_45,
            7.289_578_59e-4,
            4.839_569_159e-4,
            2.450_009_431e-4,
            5.207_112_976e-5,
        ];
        for (d, e) in dists.iter().zip(expect) {
            assert!((d - e).abs() < 1e-9, "distance {d} vs oracle {e}");
        }
    }

    #[test]
    fn heights_increase_and_distances_decrease() {
        let x1 = r("-1 + sqrt(2)");
        let x2 = r("-1 + sqrt(3)");
        for norm in [Norm::Sup, Norm::L1, Norm::L2] {
            let nl = nearest_affine_lines((&x1, &x2), &norm, 30).unwrap();
            assert!(nl.lines.len() >= 3, "chain long enough under {norm:?}");
            for pair in nl.lines.windows(2) {
                assert_eq!(
                    pair[0].height.compare(&pair[1].height, 256).unwrap(),
                    Ordering::Less,
                    "heights strictly increase"
                );
                assert_eq!(
                    pair[0].distance.compare(&pair[1].distance, 256).unwrap(),
                    Ordering::Greater,
                    "distances strictly decrease"
                );
            }
        }
    }

    #[test]
    fn primitivity_and_canonical_signs() {
        let x1 = r("-1 + sqrt(2)");
        let x2 = r("-1 + sqrt(3)");
        let nl = nearest_affine_lines((&x1, &x2), &Norm::L2, 40).unwrap();
        for l in &nl.lines {
            assert!(l.a.gcd(&l.b).gcd(&l.c).is_one());
            let lead_positive = if l.a.is_positive() {
                true
            } else {
                l.a.to_i64().unwrap() == 0 && l.b.is_positive()
            };
            assert!(lead_positive, "canonical sign for ({}, {})", l.a, l.b);
        }
    }

    #[test]
    fn height_max_zero_is_a_precondition_error() {
        let x1 = r("1/2");
        let x2 = r("1/3");
        let err = nearest_affine_lines((&x1, &x2), &Norm::Sup, 0).unwrap_err();
        assert!(matches!(err, Error::Precondition(_)));
    }
}
