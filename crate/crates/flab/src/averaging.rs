//! Averaging schemes: Cesàro means with checkpoints, weighted means E^w
//! driven by increments of a Hardy weight, and finite differences. All
//! averages run on the deterministic block engine in `sum`.

use num_complex::Complex64;
use num_traits::{Signed, Zero};

use crate::error::{Error, Result};
use crate::eval::{eval_dd, PhaseEval};
use crate::exact::Rat;
use crate::hardy::{growth_compare, GrowthOrder, HardyExpr};
use crate::sum::cut_sums;

/// A bounded complex sequence evaluated by absolute index.
pub trait Sequence: Sync {
    /// First valid index.
    fn start(&self) -> u64;
    fn value(&self, n: u64) -> Complex64;
}

/// e({a(n)}) as a sequence.
pub struct PhaseSeq {
    eval: PhaseEval,
    start: u64,
}

impl PhaseSeq {
    pub fn new(e: &HardyExpr) -> PhaseSeq {
        PhaseSeq { eval: PhaseEval::compile(e), start: e.n_start() }
    }
}

impl Sequence for PhaseSeq {
    fn start(&self) -> u64 {
        self.start
    }

    fn value(&self, n: u64) -> Complex64 {
        self.eval.phase(n)
    }
}

/// Ad-hoc sequences from closures (start fixed at 2).
pub struct FnSeq<F>(pub F);

impl<F: Fn(u64) -> Complex64 + Sync> Sequence for FnSeq<F> {
    fn start(&self) -> u64 {
        2
    }

    fn value(&self, n: u64) -> Complex64 {
        (self.0)(n)
    }
}

#[derive(Debug, Clone)]
pub enum CheckpointRule {
    /// round(1024 * gamma^k), capped and closed with N_max itself
    PowersOf(f64),
    Explicit(Vec<u64>),
}

#[derive(Debug, Clone)]
pub enum AveragingScheme {
    Full { n_max: u64, rule: CheckpointRule },
    Subsequence { points: Vec<u64> },
    Weighted { w: HardyExpr, n_max: u64 },
}

pub const N_MAX_LIMIT: u64 = 1_000_000_000;

impl AveragingScheme {
    /// Full range with the default powers-of-2 checkpoint rule.
    pub fn full(n_max: u64) -> AveragingScheme {
        AveragingScheme::Full { n_max, rule: CheckpointRule::PowersOf(2.0) }
    }

    pub fn single(n: u64) -> AveragingScheme {
        AveragingScheme::Subsequence { points: vec![n] }
    }

    /// Validated, strictly increasing checkpoint sample counts.
    pub fn checkpoints(&self) -> Result<Vec<u64>> {
        let pts = match self {
            AveragingScheme::Full { n_max, rule } => rule_points(rule, *n_max)?,
            AveragingScheme::Weighted { n_max, .. } => {
                rule_points(&CheckpointRule::PowersOf(2.0), *n_max)?
            }
            AveragingScheme::Subsequence { points } => points.clone(),
        };
        let mut seen = 0u64;
        for &p in &pts {
            if p < 10 {
                return Err(Error::NotIncreasing(format!(
                    "checkpoint {p} below minimum 10"
                )));
            }
            if p <= seen {
                return Err(Error::NotIncreasing(format!(
                    "checkpoints must strictly increase (saw {p} after {seen})"
                )));
            }
            if p > N_MAX_LIMIT {
                return Err(Error::NotIncreasing(format!(
                    "checkpoint {p} beyond N_max limit {N_MAX_LIMIT}"
                )));
            }
            seen = p;
        }
        if pts.is_empty() {
            return Err(Error::NotIncreasing("no checkpoints".into()));
        }
        Ok(pts)
    }
}

fn rule_points(rule: &CheckpointRule, n_max: u64) -> Result<Vec<u64>> {
    match rule {
        CheckpointRule::Explicit(list) => {
            let mut list = list.clone();
            if list.last() != Some(&n_max) {
                list.push(n_max);
            }
            Ok(list)
        }
        CheckpointRule::PowersOf(gamma) => {
            if *gamma <= 1.0 {
                return Err(Error::NotIncreasing(
                    "checkpoint growth factor must exceed 1".into(),
                ));
            }
            let mut pts: Vec<u64> = Vec::new();
            let mut x = 1024f64;
            while (x.round() as u64) < n_max {
                let p = x.round() as u64;
                if pts.last() != Some(&p) {
                    pts.push(p);
                }
                x *= gamma;
            }
            pts.push(n_max);
            Ok(pts)
        }
    }
}

/// One checkpointed average.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesPoint {
    pub n: u64,
    pub value: Complex64,
    pub samples: u64,
}

/// Averages along the checkpoints of a scheme.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSeries {
    pub n_start: u64,
    pub points: Vec<SeriesPoint>,
}

impl ComplexSeries {
    pub fn final_value(&self) -> Complex64 {
        self.points.last().map_or(Complex64::zero(), |p| p.value)
    }

    /// Shortest-round-trip float formatting, so files are byte-comparable
    /// across runs and parse back to the exact values.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("N,re,im,abs,samples\n");
        for p in &self.points {
            s.push_str(&format!(
                "{},{},{},{},{}\n",
                p.n,
                p.value.re,
                p.value.im,
                p.value.norm(),
                p.samples
            ));
        }
        s
    }
}

/// Arithmetic means of source(n) over n in [start, start + N) at every
/// checkpoint N of the scheme. Deterministic for any thread count.
pub fn cesaro_average(
    source: &dyn Sequence,
    scheme: &AveragingScheme,
    threads: usize,
) -> Result<ComplexSeries> {
    if let AveragingScheme::Weighted { w, n_max } = scheme {
        let cps = AveragingScheme::full(*n_max).checkpoints()?;
        return weighted_series(source, w, &cps, threads);
    }
    let cps = scheme.checkpoints()?;
    let lo = source.start();
    let cuts: Vec<u64> = cps.iter().map(|n| lo + n).collect();
    let sums = cut_sums(lo, threads, &cuts, &|m| source.value(m));
    let points = cps
        .iter()
        .zip(&sums)
        .map(|(&n, &s)| SeriesPoint { n, value: s / n as f64, samples: n })
        .collect();
    Ok(ComplexSeries { n_start: lo, points })
}

/// Symbolic weight sanity: w must be unbounded and eventually increasing.
/// Checked on the leading terms of w and w'; a numeric spot check near the
/// start catches weights whose increments still dip negative there.
fn check_weight(w: &HardyExpr, lo: u64) -> Result<()> {
    let lead = match w.terms().first() {
        Some(t) => t,
        None => return Err(Error::BadWeight("weight is identically zero".into())),
    };
    let unbounded = lead.a.is_positive() || (lead.a.is_zero() && lead.b.is_positive());
    if !unbounded {
        return Err(Error::BadWeight(format!("weight {w} is bounded")));
    }
    let dw = w.derivative(1)?;
    let dlead = dw.terms().first();
    if dlead.is_none_or(|t| t.coef.signum() < 0) {
        return Err(Error::BadWeight(format!("weight {w} is eventually decreasing")));
    }
    for n in lo..lo + 64 {
        if weight_increment(w, n) < 0.0 {
            return Err(Error::BadWeight(format!(
                "weight {w} decreases at n={n}; start averaging past its monotonicity threshold"
            )));
        }
    }
    Ok(())
}

/// w(n+1) - w(n) in double-double to survive the cancellation.
fn weight_increment(w: &HardyExpr, n: u64) -> f64 {
    eval_dd(w, n + 1).sub(eval_dd(w, n)).to_f64()
}

fn weighted_series(
    source: &dyn Sequence,
    w: &HardyExpr,
    cps: &[u64],
    threads: usize,
) -> Result<ComplexSeries> {
    let lo = source.start().max(w.n_start());
    check_weight(w, lo)?;
    let cuts: Vec<u64> = cps.iter().map(|n| lo + n).collect();
    let sums = cut_sums(lo, threads, &cuts, &|m| {
        source.value(m) * weight_increment(w, m)
    });
    let points = cps
        .iter()
        .zip(&sums)
        .map(|(&n, &s)| {
            let divisor = eval_dd(w, lo + n).to_f64();
            SeriesPoint { n, value: s / divisor, samples: n }
        })
        .collect();
    Ok(ComplexSeries { n_start: lo, points })
}

/// E^w over the first N indices: (1/w(end)) sum of (w(n+1)-w(n)) source(n).
pub fn weighted_average(
    source: &dyn Sequence,
    w: &HardyExpr,
    n: u64,
    threads: usize,
) -> Result<Complex64> {
    let series = weighted_series(source, w, &[n], threads)?;
    Ok(series.final_value())
}

/// i-fold difference with step r as a new generator:
/// (Delta_r^i a)(n) = sum_j (-1)^(i-j) C(i,j) a(n + j r).
pub fn finite_difference<'a, F>(source: &'a F, r: u64, i: u32) -> impl Fn(u64) -> f64 + Sync + 'a
where
    F: Fn(u64) -> f64 + Sync + ?Sized,
{
    let coeffs: Vec<f64> = (0..=i)
        .map(|j| {
            let sign = if (i - j) % 2 == 0 { 1.0 } else { -1.0 };
            sign * binom_u64(i as u64, j as u64) as f64
        })
        .collect();
    move |n: u64| {
        coeffs
            .iter()
            .enumerate()
            .map(|(j, &c)| c * source(n + j as u64 * r))
            .sum()
    }
}

/// Same difference operator evaluated through the dd expression path, for
/// weights |Delta_r^d a| where f64 cancellation would dominate.
pub fn finite_difference_expr(e: &HardyExpr, r: u64, i: u32) -> impl Fn(u64) -> f64 + Sync + '_ {
    let coeffs: Vec<f64> = (0..=i)
        .map(|j| {
            let sign = if (i - j) % 2 == 0 { 1.0 } else { -1.0 };
            sign * binom_u64(i as u64, j as u64) as f64
        })
        .collect();
    move |n: u64| {
        let mut acc = crate::dd::Dd::ZERO;
        for (j, &c) in coeffs.iter().enumerate() {
            acc = acc.add(eval_dd(e, n + j as u64 * r).mul_f64(c));
        }
        acc.to_f64()
    }
}

pub fn binom_u64(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc = 1u64;
    for j in 0..k {
        acc = acc * (n - j) / (j + 1);
    }
    acc
}

/// The symbolic main term of |Delta_r^d a|: r^d a^(d), sign-normalized.
/// This is the paper-style weight w_r for partial summation checks.
pub fn difference_weight(a: &HardyExpr, r: u64, d: u32) -> Result<HardyExpr> {
    let dv = a.derivative(d)?;
    let scaled = dv.scale(Rat::from_integer((r as i64).pow(d)));
    match scaled.terms().first() {
        Some(t) if t.coef.signum() < 0 => Ok(scaled.scale(Rat::from_integer(-1))),
        Some(_) => Ok(scaled),
        None => Err(Error::BadWeight("difference weight vanished".into())),
    }
}

/// Weighted vs Cesaro average of the same source, with their deviation.
pub fn partial_summation_check(
    source: &dyn Sequence,
    w: &HardyExpr,
    n: u64,
    threads: usize,
) -> Result<(Complex64, Complex64, f64)> {
    let weighted = weighted_average(source, w, n, threads)?;
    let cesaro = cesaro_average(source, &AveragingScheme::single(n), threads)?.final_value();
    Ok((weighted, cesaro, (weighted - cesaro).norm()))
}

/// Convenience: symbolic check that t^eps ≺ a ≺ t^power for the partial
/// summation hypotheses, via growth_compare against pure powers.
pub fn sandwiched_between_powers(a: &HardyExpr, lower: Rat, upper: Rat) -> Result<bool> {
    use crate::exact::ExactCoefficient;
    use crate::hardy::Term;
    let mono = |p: Rat| {
        HardyExpr::canonicalize(vec![Term {
            coef: ExactCoefficient::int(1),
            a: p,
            b: Rat::zero(),
        }])
    };
    let lo = mono(lower)?;
    let hi = mono(upper)?;
    Ok(matches!(growth_compare(&lo, a), GrowthOrder::Precedes)
        && matches!(growth_compare(a, &hi), GrowthOrder::Precedes))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::parse_expr;

    #[test]
    fn constant_source_averages_to_one() {
        let src = FnSeq(|_| Complex64::new(1.0, 0.0));
        let s = cesaro_average(&src, &AveragingScheme::single(1000), 1).unwrap();
        assert_eq!(s.final_value(), Complex64::new(1.0, 0.0));
    }

    #[test]
    fn alternating_source_cancels() {
        let src = FnSeq(|n| {
            if n % 2 == 0 {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::new(-1.0, 0.0)
            }
        });
        let s = cesaro_average(&src, &AveragingScheme::single(1000), 1).unwrap();
        assert_eq!(s.final_value().re, 0.0);
        assert_eq!(s.final_value().im, 0.0);
    }

    #[test]
    fn golden_rotation_mean_is_small() {
        let e = parse_expr("phi*t").unwrap();
        let src = PhaseSeq::new(&e);
        let s = cesaro_average(&src, &AveragingScheme::single(1_000_000), 1).unwrap();
        assert!(s.final_value().norm() <= 1e-5, "{}", s.final_value().norm());
    }

    #[test]
    fn checkpoint_defaults_are_powers_of_two() {
        let cps = AveragingScheme::full(10_000).checkpoints().unwrap();
        assert_eq!(cps, vec![1024, 2048, 4096, 8192, 10_000]);
    }

    #[test]
    fn scheme_validation_rejects_bad_lists() {
        let s = AveragingScheme::Subsequence { points: vec![100, 50] };
        assert!(s.checkpoints().is_err());
        let s = AveragingScheme::Subsequence { points: vec![5] };
        assert!(s.checkpoints().is_err());
        let s = AveragingScheme::Subsequence { points: vec![2_000_000_000] };
        assert!(s.checkpoints().is_err());
    }

    #[test]
    fn weighted_constant_source_telescopes() {
        let w = parse_expr("t^(1/2)").unwrap();
        let src = FnSeq(|_| Complex64::new(1.0, 0.0));
        let n = 100_000u64;
        let got = weighted_average(&src, &w, n, 1).unwrap();
        let lo = 2f64;
        let want = 1.0 - lo.sqrt() / ((lo as u64 + n) as f64).sqrt();
        assert!((got.re - want).abs() < 1e-9, "{} vs {want}", got.re);
        assert!(got.im.abs() < 1e-12);
    }

    #[test]
    fn weighted_with_linear_weight_matches_cesaro() {
        let w = parse_expr("t").unwrap();
        let e = parse_expr("phi*t").unwrap();
        let src = PhaseSeq::new(&e);
        let n = 50_000u64;
        let weighted = weighted_average(&src, &w, n, 1).unwrap();
        let cesaro = cesaro_average(&src, &AveragingScheme::single(n), 1)
            .unwrap()
            .final_value();
        // identical sums, divisor differs by w(end)/N = (lo+N)/N
        let lo = src.start() as f64;
        let ratio = (lo + n as f64) / n as f64;
        assert!((weighted * ratio - cesaro).norm() < 1e-12);
    }

    #[test]
    fn bad_weights_are_rejected() {
        let w = parse_expr("t^(-1)").unwrap();
        let src = FnSeq(|_| Complex64::new(1.0, 0.0));
        assert!(matches!(
            weighted_average(&src, &w, 1000, 1),
            Err(Error::BadWeight(_))
        ));
        let w = parse_expr("-1*t").unwrap();
        assert!(matches!(
            weighted_average(&src, &w, 1000, 1),
            Err(Error::BadWeight(_))
        ));
    }

    #[test]
    fn finite_difference_polynomials() {
        let sq = |n: u64| (n * n) as f64;
        let d1 = finite_difference(&sq, 1, 1);
        assert_eq!(d1(10), 21.0);
        let d2 = finite_difference(&sq, 2, 2);
        assert_eq!(d2(5), 8.0);
        assert_eq!(d2(1234), 8.0);
    }

    #[test]
    fn finite_difference_approximates_derivative() {
        let e = parse_expr("t^(3/2)").unwrap();
        let f = move |n: u64| eval_dd(&e, n).to_f64();
        let d1 = finite_difference(&f, 1, 1);
        let n = 1_000_000u64;
        let want = 1.5 * (n as f64).sqrt();
        let got = d1(n);
        assert!((got - want).abs() / want < 1e-2, "{got} vs {want}");
    }

    #[test]
    fn difference_weight_normalizes_sign() {
        let a = parse_expr("-2*t^(3/2)").unwrap();
        let w = difference_weight(&a, 3, 1).unwrap();
        let lead = w.terms()[0];
        assert!(lead.coef.signum() > 0);
        assert_eq!(lead.coef.q, Rat::new(9, 1)); // |(-2)(3/2)| * 3^1
        assert_eq!(lead.a, Rat::new(1, 2));
    }

    #[test]
    fn csv_shape() {
        let src = FnSeq(|_| Complex64::new(0.5, -0.25));
        let s = cesaro_average(&src, &AveragingScheme::single(100), 1).unwrap();
        let csv = s.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "N,re,im,abs,samples");
        let row = lines.next().unwrap();
        assert!(row.starts_with("100,"));
        assert!(row.ends_with(",100"));
    }
}
