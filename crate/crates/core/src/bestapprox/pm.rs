//! Analyzer for the slow series `Σ_k log log(q_{k+1}) / q_k` attached to a
//! denominator sequence, plus the norm-independence experiment that feeds
//! it with best-approximation denominators computed under several norms.
//!
//! Finite data cannot decide convergence of a series, so the report never
//! claims it: it carries certified rational enclosures of the terms and
//! partial sums, and a *classification hint* produced by an explicit,
//! conservative rule (`looks-convergent`, `looks-divergent`, or
//! `inconclusive`).  All decisions behind the hint are made with exact
//! rational comparisons on certified bounds — never with floating point.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Pow, Signed, ToPrimitive, Zero};
use serde::{Serialize, Serializer};

use crate::bestapprox::best_approx_sequence_budget;
use crate::error::{Error, Result};
use crate::numerics::functions::{lnln_interval, round_outward};
use crate::numerics::norm::Norm;
use crate::numerics::real::Real;
use crate::numerics::{serialize_bigint_seq, RatInterval};

/// Heuristic verdict on the finite data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PMClass {
    LooksConvergent,
    LooksDivergent,
    Inconclusive,
}

/// Tunable thresholds of the classification rule.
#[derive(Debug, Clone)]
pub struct PMOptions {
    /// A tail below this value counts as "looks-convergent" (default 10⁻³).
    pub eps_tail: BigRational,
    /// Terms staying at or above this floor over the last decade count as
    /// "looks-divergent" (default 10⁻²).
    pub floor: BigRational,
    /// Working precision for the logarithm enclosures.
    pub bits: u32,
}

impl Default for PMOptions {
    fn default() -> Self {
        PMOptions {
            eps_tail: BigRational::new(BigInt::one(), BigInt::from(1000)),
            floor: BigRational::new(BigInt::one(), BigInt::from(100)),
            bits: 64,
        }
    }
}

fn serialize_interval_seq<S: Serializer>(
    v: &[RatInterval],
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(v.len()))?;
    for iv in v {
        seq.serialize_element(&[iv.lo().to_string(), iv.hi().to_string()])?;
    }
    seq.end()
}

fn serialize_opt_rational<S: Serializer>(
    v: &Option<BigRational>,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    match v {
        Some(r) => s.serialize_some(&r.to_string()),
        None => s.serialize_none(),
    }
}

/// The analyzer's report: certified term and partial-sum enclosures and an
/// explicit classification hint.
#[derive(Debug, Clone, Serialize)]
pub struct PMReport {
    /// Certified enclosures of `log log(q_{k+1}) / q_k`, `k = 1, …`.
    #[serde(serialize_with = "serialize_interval_seq")]
    pub terms: Vec<RatInterval>,
    /// Certified enclosures of the partial sums (nondecreasing).
    #[serde(serialize_with = "serialize_interval_seq")]
    pub partial_sums: Vec<RatInterval>,
    /// Midpoint approximations of the terms, for plots and logs only.
    pub terms_approx: Vec<f64>,
    /// 1-based indices of terms clamped to zero because the double
    /// logarithm would not be positive there.
    pub clamped: Vec<usize>,
    pub classification: PMClass,
    /// Human-readable statement of the rule and thresholds that produced
    /// the classification.
    pub rule: String,
    /// Certified tail bound from the geometric fit, when one exists.
    #[serde(serialize_with = "serialize_opt_rational")]
    pub tail_bound: Option<BigRational>,
}

fn validate_qs(qs: &[BigInt]) -> Result<()> {
    if qs.len() < 2 {
        return Err(Error::Precondition(
            "need at least two denominators to form a term".into(),
        ));
    }
    if qs[0] < BigInt::from(2) {
        return Err(Error::Precondition(format!(
            "the first denominator must be at least 2, got {}",
            qs[0]
        )));
    }
    for w in qs.windows(2) {
        if w[1] <= w[0] {
            return Err(Error::Precondition(format!(
                "denominators must be strictly increasing, got {} after {}",
                w[1], w[0]
            )));
        }
    }
    Ok(())
}

/// Analyze a strictly increasing denominator list with default thresholds.
pub fn pm_analyze(qs: &[BigInt]) -> Result<PMReport> {
    pm_analyze_opts(qs, &PMOptions::default())
}

/// As [`pm_analyze`], with explicit thresholds and precision.
pub fn pm_analyze_opts(qs: &[BigInt], opts: &PMOptions) -> Result<PMReport> {
    validate_qs(qs)?;
    let mut terms = Vec::with_capacity(qs.len() - 1);
    let mut clamped = Vec::new();
    for (k, w) in qs.windows(2).enumerate() {
        // log log q is positive exactly when q > e; since the list is
        // strictly increasing from q_1 ≥ 2, only q_{k+1} = 2 (impossible
        // here) could make it nonpositive.  The clamp is kept defensively:
        // a nonpositive term is recorded as zero with a flag rather than
        // breaking the nondecreasing partial sums.
        if w[1] <= BigInt::from(2) {
            terms.push(RatInterval::point(BigRational::zero()));
            clamped.push(k + 1);
            continue;
        }
        let q_next = RatInterval::point(BigRational::from(w[1].clone()));
        let ll = lnln_interval(&q_next, opts.bits)?;
        let inv_qk = BigRational::new(BigInt::one(), w[0].clone());
        terms.push(round_outward(&ll.scale(&inv_qk), opts.bits));
    }
    build_report(terms, clamped, opts)
}

/// Assemble partial sums and the classification for prepared term
/// enclosures.
fn build_report(
    terms: Vec<RatInterval>,
    clamped: Vec<usize>,
    opts: &PMOptions,
) -> Result<PMReport> {
    let mut partial_sums = Vec::with_capacity(terms.len());
    let mut acc = RatInterval::point(BigRational::zero());
    for t in &terms {
        acc = round_outward(&acc.add(t), opts.bits);
        partial_sums.push(acc.clone());
    }

    let m = terms.len().min(10);
    let last = &terms[terms.len() - m..];
    // Fewer than three terms cannot support any hint.
    let enough = terms.len() >= 3;

    // Divergence signal: every term in the last decade stays ≥ floor,
    // certified by the lower enclosure endpoints.
    let divergent = enough && last.iter().all(|t| t.lo() >= &opts.floor);

    // Convergence signal, two certified routes: either the last decade
    // already sums below ε_tail, or the term upper bounds of the last
    // window fit under a geometric ratio ρ < 1 and the extrapolated tail
    // t_last·ρ/(1−ρ) stays below ε_tail.
    let mut tail_bound: Option<BigRational> = None;
    let decade_sum: BigRational = last.iter().map(|t| t.hi().clone()).sum();
    if enough && decade_sum < opts.eps_tail {
        tail_bound = Some(decade_sum);
    } else if enough {
        let w = terms.len().min(6);
        let window = &terms[terms.len() - w..];
        let mut rho: Option<BigRational> = None;
        let mut ok = true;
        for pair in window.windows(2) {
            if !pair[0].lo().is_positive() {
                ok = false;
                break;
            }
            let r = pair[1].hi() / pair[0].lo();
            if rho.as_ref().map_or(true, |m| r > *m) {
                rho = Some(r);
            }
        }
        if ok {
            if let Some(rho) = rho {
                if rho < BigRational::one() {
                    let t_last = window.last().expect("window nonempty").hi();
                    let bound = t_last * &rho / (BigRational::one() - &rho);
                    if bound < opts.eps_tail {
                        tail_bound = Some(bound);
                    }
                }
            }
        }
    }
    let convergent = tail_bound.is_some();

    let classification = match (divergent, convergent) {
        (true, false) => PMClass::LooksDivergent,
        (false, true) => PMClass::LooksConvergent,
        // Conflicting or absent signals: refuse to guess.
        _ => PMClass::Inconclusive,
    };
    if classification != PMClass::LooksConvergent {
        tail_bound = None;
    }

    let rule = format!(
        "looks-divergent when the last {m} terms all stay >= {}; looks-convergent \
         when the last decade sums below {} or a geometric fit of the last term \
         ratios certifies a tail bound below {}; fewer than three terms, or \
         conflicting signals, are reported as inconclusive",
        opts.floor, opts.eps_tail, opts.eps_tail
    );
    let terms_approx = terms
        .iter()
        .map(|t| t.midpoint().to_f64().unwrap_or(f64::NAN))
        .collect();
    Ok(PMReport {
        terms,
        partial_sums,
        terms_approx,
        clamped,
        classification,
        rule,
    tail_bound,
    })
}

/// Analytic report for the double-exponential tower `q_{k+1} = ⌈e^{e^{q_k}}⌉`.
///
/// The denominators explode far beyond any representable integer (already
/// `q_3` has more digits than atoms to write them on), but the terms are
/// pinched analytically: `log log q_{k+1} ≥ q_k` exactly, and the ceiling
/// costs at most `2^{−2^{q_k}}`, so `term_k ∈ [1, 1 + 2^{−2^{q_k}}]`.
/// Lower bounds for the `q_k` are tracked as saturating exponents, so no
/// giant integer is ever built.
pub fn pm_tower_report(q1: u64, count: usize) -> Result<PMReport> {
    pm_tower_report_opts(q1, count, &PMOptions::default())
}

/// As [`pm_tower_report`], with explicit thresholds.
pub fn pm_tower_report_opts(q1: u64, count: usize, opts: &PMOptions) -> Result<PMReport> {
    if q1 < 2 {
        return Err(Error::Precondition(format!(
            "the tower base must be at least 2, got {q1}"
        )));
    }
    if count == 0 {
        return Err(Error::Precondition("need at least one term".into()));
    }
    // Cap the certified gap at 2^-4096: tighter makes no observable
    // difference and keeps the rationals small.
    const CAP: u64 = 4096;
    let mut terms = Vec::with_capacity(count);
    // lb is a certified lower bound for q_k (saturating).
    let mut lb: u64 = q1;
    for _ in 0..count {
        // 2^{q_k} ≥ 2^{lb}; the ceiling error is ≤ 2^{−2^{q_k}} ≤ 2^{−e}
        // with e = min(2^{lb}, CAP).
        let e = if lb >= 63 { CAP } else { (1u64 << lb).min(CAP) };
        let delta = BigRational::new(BigInt::one(), BigInt::one() << e as usize);
        terms.push(RatInterval::hull(
            BigRational::one(),
            BigRational::one() + delta,
        ));
        // q_{k+1} = ⌈e^{e^{q_k}}⌉ ≥ 2^{2^{q_k}} ≥ 2^{2^{lb}} (saturating).
        lb = if lb >= 63 {
            u64::MAX
        } else {
            let expo = 1u64 << lb;
            if expo >= 63 {
                u64::MAX
            } else {
                1u64 << expo
            }
        };
    }
    build_report(terms, Vec::new(), opts)
}

/// Indices (1-based) of the intervals `(q_k, q_{k+1})` with
/// `q_{k+1} > q_k^N`, decided by exact integer powering of the cleared
/// inequality `q_{k+1}^d > q_k^n` for `N = n/d`.
pub fn ell_n(qs: &[BigInt], n: &BigRational) -> Result<Vec<usize>> {
    if !n.is_positive() {
        return Err(Error::Precondition(format!(
            "the exponent must be positive, got {n}"
        )));
    }
    if qs.iter().any(|q| !q.is_positive()) {
        return Err(Error::Precondition(
            "denominators must be positive integers".into(),
        ));
    }
    for w in qs.windows(2) {
        if w[1] <= w[0] {
            return Err(Error::Precondition(format!(
                "denominators must be strictly increasing, got {} after {}",
                w[1], w[0]
            )));
        }
    }
    let num = n
        .numer()
        .to_u32()
        .ok_or_else(|| Error::Domain(format!("exponent numerator too large: {}", n.numer())))?;
    let den = n
        .denom()
        .to_u32()
        .ok_or_else(|| Error::Domain(format!("exponent denominator too large: {}", n.denom())))?;
    let mut out = Vec::new();
    for (k, w) in qs.windows(2).enumerate() {
        if Pow::pow(&w[1], den) > Pow::pow(&w[0], num) {
            out.push(k + 1);
        }
    }
    Ok(out)
}

/// One norm's contribution to the comparison experiment.
#[derive(Debug, Clone, Serialize)]
pub struct NormSequenceReport {
    pub norm: String,
    #[serde(serialize_with = "serialize_bigint_seq")]
    pub denominators: Vec<BigInt>,
    /// The sequence ended on an exact hit (error 0): `x` is rational.
    pub terminated_exactly: bool,
    /// Absent when fewer than two denominators ≥ 2 are available.
    pub pm: Option<PMReport>,
}

/// Index offsets between two per-norm denominator sequences: entry `k`
/// maps the `k`-th denominator of `first` to the index of the last
/// denominator of `second` not exceeding it, minus `k`.
#[derive(Debug, Clone, Serialize)]
pub struct PairOffsets {
    pub first: String,
    pub second: String,
    pub index_offsets: Vec<i64>,
    pub max_abs_offset: u64,
}

/// Report of the norm-independence experiment.
#[derive(Debug, Clone, Serialize)]
pub struct PMComparison {
    pub per_norm: Vec<NormSequenceReport>,
    pub pairs: Vec<PairOffsets>,
    pub identical_sequences: bool,
    /// False when two norms produced flatly opposite classification hints
    /// (one looks-convergent, the other looks-divergent).
    pub consistent_classifications: bool,
}

/// Run the slow-series analyzer on best-approximation denominator
/// sequences computed under each of the given norms, and report how the
/// sequences interleave.
pub fn pm_compare_norms(
    x: (&Real, &Real),
    norms: &[Norm],
    q_max: u64,
    budget_bits: u32,
) -> Result<PMComparison> {
    if norms.len() < 2 {
        return Err(Error::Precondition(
            "the comparison needs at least two norms".into(),
        ));
    }
    let mut per_norm = Vec::with_capacity(norms.len());
    for norm in norms {
        let seq = best_approx_sequence_budget(x, norm, q_max, budget_bits)?;
        let denominators: Vec<BigInt> = seq.iter().map(|b| b.q.clone()).collect();
        let terminated_exactly = seq.last().map_or(false, |b| b.err.is_zero());
        let from_two: Vec<BigInt> = denominators
            .iter()
            .filter(|q| **q >= BigInt::from(2))
            .cloned()
            .collect();
        let pm = if from_two.len() >= 2 {
            Some(pm_analyze(&from_two)?)
        } else {
            None
        };
        per_norm.push(NormSequenceReport {
            norm: norm.name().to_string(),
            denominators,
            terminated_exactly,
            pm,
        });
    }

    let mut pairs = Vec::new();
    for i in 0..per_norm.len() {
        for j in i + 1..per_norm.len() {
            let a = &per_norm[i];
            let b = &per_norm[j];
            let mut index_offsets = Vec::with_capacity(a.denominators.len());
            let mut max_abs = 0u64;
            for (k, q) in a.denominators.iter().enumerate() {
                let pos = b.denominators.partition_point(|p| p <= q) as i64 - 1;
                let off = pos - k as i64;
                max_abs = max_abs.max(off.unsigned_abs());
                index_offsets.push(off);
            }
            pairs.push(PairOffsets {
                first: a.norm.clone(),
                second: b.norm.clone(),
                index_offsets,
                max_abs_offset: max_abs,
            });
        }
    }

    let identical_sequences = per_norm
        .windows(2)
        .all(|w| w[0].denominators == w[1].denominators);
    let mut consistent_classifications = true;
    for i in 0..per_norm.len() {
        for j in i + 1..per_norm.len() {
            if let (Some(pa), Some(pb)) = (&per_norm[i].pm, &per_norm[j].pm) {
                let opposite = matches!(
                    (pa.classification, pb.classification),
                    (PMClass::LooksConvergent, PMClass::LooksDivergent)
                        | (PMClass::LooksDivergent, PMClass::LooksConvergent)
                );
                if opposite {
                    consistent_classifications = false;
                }
            }
        }
    }
    Ok(PMComparison {
        per_norm,
        pairs,
        identical_sequences,
        consistent_classifications,
    })
}
