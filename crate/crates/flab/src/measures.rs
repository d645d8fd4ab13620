//! Empirical measures on the circle: histograms plus low Fourier
//! coefficients of {x(n)} along checkpoint ladders. These are the finite
//! stand-ins for weak-star limits of E_{n<=N} delta_{x(n)}, and the tests
//! that tell a uniform limit from an absolutely continuous one from a point
//! mass. Counting is exact; Fourier coefficients come from the raw samples,
//! never from the binned histogram, so bin width caps nothing.

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use num_complex::Complex64;
use num_traits::Zero;

use crate::averaging::AveragingScheme;
use crate::error::{Error, Result};
use crate::eval::{eval_slow, PhaseEval};
use crate::hardy::HardyExpr;
use crate::oracle::{MeasureSpec, MAX_FOURIER_K};
use crate::sum::{Kahan, BLOCK_LEN};

pub const DEFAULT_BINS: usize = 1024;
pub const DEFAULT_MEASURE_K: i64 = 16;
pub const DEFAULT_SEARCH_BUDGET: u64 = 1_000_000_000;

/// A real sequence already reduced mod 1, the raw material of a measure.
pub trait FracSource: Sync {
    /// First valid index.
    fn start(&self) -> u64;
    /// Value in [0, 1).
    fn frac(&self, n: u64) -> f64;
}

/// {a(n)} for a Hardy expression, compiled once.
pub struct ExprFrac {
    eval: PhaseEval,
    start: u64,
}

impl ExprFrac {
    pub fn new(e: &HardyExpr) -> ExprFrac {
        ExprFrac { eval: PhaseEval::compile(e), start: e.n_start() }
    }
}

impl FracSource for ExprFrac {
    fn start(&self) -> u64 {
        self.start
    }

    fn frac(&self, n: u64) -> f64 {
        self.eval.frac(n)
    }
}

/// Ad-hoc sources from closures (start fixed at 2).
pub struct FracFn<F>(pub F);

impl<F: Fn(u64) -> f64 + Sync> FracSource for FracFn<F> {
    fn start(&self) -> u64 {
        2
    }

    fn frac(&self, n: u64) -> f64 {
        (self.0)(n)
    }
}

/// Histogram over B equal bins of [0, 1) plus raw Fourier sums for
/// frequencies 1..=max_k. Counts are exact; lambda-hat(k) = sums[k-1]/total
/// and lambda-hat(-k) is its conjugate.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalMeasure {
    pub bins: Vec<u64>,
    pub total: u64,
    pub max_k: i64,
    /// Sum over samples of e(k x), k = 1..=max_k (not yet divided by total).
    pub sums: Vec<Complex64>,
}

impl EmpiricalMeasure {
    /// lambda-hat(k), the mean of e(k x) over the samples.
    pub fn fourier(&self, k: i64) -> Result<Complex64> {
        if k == 0 {
            return Ok(Complex64::new(1.0, 0.0));
        }
        if k.abs() > self.max_k {
            return Err(Error::FourierOutOfRange { k, max_k: self.max_k });
        }
        if self.total == 0 {
            return Ok(Complex64::zero());
        }
        let v = self.sums[(k.abs() - 1) as usize] / self.total as f64;
        Ok(if k < 0 { v.conj() } else { v })
    }

    /// Mass of bin i as a fraction of the total.
    pub fn bin_mass(&self, i: usize) -> f64 {
        self.bins[i] as f64 / self.total.max(1) as f64
    }

    /// Union of two measures over disjoint index ranges. Counts add
    /// exactly; Fourier sums add in floating point.
    pub fn merge(&self, other: &EmpiricalMeasure) -> Result<EmpiricalMeasure> {
        if self.bins.len() != other.bins.len() || self.max_k != other.max_k {
            return Err(Error::Measure(format!(
                "cannot merge {}x{} with {}x{} measures",
                self.bins.len(),
                self.max_k,
                other.bins.len(),
                other.max_k
            )));
        }
        Ok(EmpiricalMeasure {
            bins: self.bins.iter().zip(&other.bins).map(|(a, b)| a + b).collect(),
            total: self.total + other.total,
            max_k: self.max_k,
            sums: self.sums.iter().zip(&other.sums).map(|(a, b)| a + b).collect(),
        })
    }

    /// The measure as a Fourier-table spec usable by the prediction side.
    pub fn to_fourier_spec(&self) -> Result<MeasureSpec> {
        let mut entries = BTreeMap::new();
        for k in 1..=self.max_k {
            let v = self.fourier(k)?;
            entries.insert(k, v);
            entries.insert(-k, v.conj());
        }
        MeasureSpec::fourier_table(&entries)
    }

    pub fn histogram_csv(&self) -> String {
        let mut s = String::from("bin_lo,mass\n");
        let b = self.bins.len() as f64;
        for (i, &c) in self.bins.iter().enumerate() {
            let mass = c as f64 / self.total.max(1) as f64;
            s.push_str(&format!("{},{}\n", i as f64 / b, mass));
        }
        s
    }

    pub fn fourier_csv(&self) -> String {
        let mut s = String::from("k,re,im,abs\n");
        for k in 1..=self.max_k {
            let v = self.fourier(k).expect("k within range");
            s.push_str(&format!("{},{},{},{}\n", k, v.re, v.im, v.norm()));
        }
        s
    }
}

// Workers own whole superblocks of the sample index range; each superblock's
// accumulator runs serially in index order, and the global combine folds
// superblock values in superblock order. Checkpoints inside a superblock are
// produced by rescanning its prefix with the identical chain shape, so the
// result depends on the checkpoints but never on the thread count.
const SUPERBLOCK: u64 = 32 * BLOCK_LEN;

// Superblocks resident at once. Caps combine memory at WAVE histograms while
// leaving enough parallel grain for any sane thread count.
const WAVE: usize = 128;

#[derive(Clone)]
struct Acc {
    bins: Vec<u64>,
    count: u64,
    four: Vec<Kahan>,
}

impl Acc {
    fn new(bins: usize, max_k: i64) -> Acc {
        Acc { bins: vec![0; bins], count: 0, four: vec![Kahan::default(); max_k as usize] }
    }

    #[inline]
    fn push(&mut self, x: f64) {
        let b = self.bins.len();
        self.bins[((x * b as f64) as usize).min(b - 1)] += 1;
        self.count += 1;
        if self.four.is_empty() {
            return;
        }
        // e(kx) as powers of one e(x): K complex multiplies instead of K
        // sincos calls; the drift off the unit circle is ~K ulps
        let z = Complex64::from_polar(1.0, TAU * x);
        let mut zp = z;
        for acc in &mut self.four {
            acc.add(zp);
            zp *= z;
        }
    }

    fn scan(&mut self, source: &dyn FracSource, lo: u64, hi: u64) {
        for n in lo..hi {
            self.push(source.frac(n));
        }
    }

    /// Fold another accumulator's closed value into this one (one chain
    /// step per frequency; counts add exactly).
    fn absorb(&mut self, other: &Acc) {
        for (b, o) in self.bins.iter_mut().zip(&other.bins) {
            *b += o;
        }
        self.count += other.count;
        for (k, o) in self.four.iter_mut().zip(&other.four) {
            k.add(o.value());
        }
    }

    fn close(&self) -> EmpiricalMeasure {
        EmpiricalMeasure {
            bins: self.bins.clone(),
            total: self.count,
            max_k: self.four.len() as i64,
            sums: self.four.iter().map(Kahan::value).collect(),
        }
    }
}

fn scan_wave(
    source: &dyn FracSource,
    wave: &[(u64, u64)],
    bins: usize,
    max_k: i64,
    threads: usize,
) -> Vec<Acc> {
    let mut out: Vec<Acc> = wave.iter().map(|_| Acc::new(bins, max_k)).collect();
    let threads = threads.clamp(1, wave.len().max(1));
    if threads <= 1 {
        for (acc, &(lo, hi)) in out.iter_mut().zip(wave) {
            acc.scan(source, lo, hi);
        }
        return out;
    }
    let per = wave.len().div_ceil(threads);
    std::thread::scope(|scope| {
        let mut rest: &mut [Acc] = &mut out;
        let mut offset = 0usize;
        while !rest.is_empty() {
            let take = per.min(rest.len());
            let (chunk, tail) = rest.split_at_mut(take);
            let my = &wave[offset..offset + take];
            scope.spawn(move || {
                for (acc, &(lo, hi)) in chunk.iter_mut().zip(my) {
                    acc.scan(source, lo, hi);
                }
            });
            rest = tail;
            offset += take;
        }
    });
    out
}

/// The measure of {source(n) : n in [start, start+N)} at every checkpoint N
/// of the scheme. Bin counts are exact; Fourier coefficients are sample
/// sums on the deterministic superblock grid, so results are independent of
/// the thread count.
pub fn build_empirical_measure(
    source: &dyn FracSource,
    scheme: &AveragingScheme,
    bins: usize,
    max_k: i64,
    threads: usize,
) -> Result<Vec<(u64, EmpiricalMeasure)>> {
    if !bins.is_power_of_two() || !(8..=65536).contains(&bins) {
        return Err(Error::Measure(format!(
            "bin count {bins} is not a power of two in [8, 65536]"
        )));
    }
    if !(0..=MAX_FOURIER_K).contains(&max_k) {
        return Err(Error::Measure(format!(
            "frequency cap {max_k} outside 0..={MAX_FOURIER_K}"
        )));
    }
    if matches!(scheme, AveragingScheme::Weighted { .. }) {
        return Err(Error::Measure(
            "weighted schemes do not define a counting measure".into(),
        ));
    }
    let cps = scheme.checkpoints()?;
    let lo = source.start();
    let cuts: Vec<u64> = cps.iter().map(|n| lo + n).collect();
    let hi = *cuts.last().expect("validated nonempty");

    let ranges: Vec<(u64, u64)> = (0u64..)
        .map(|s| lo + s * SUPERBLOCK)
        .take_while(|&b| b < hi)
        .map(|b| (b, (b + SUPERBLOCK).min(hi)))
        .collect();

    let mut global = Acc::new(bins, max_k);
    let mut out = Vec::with_capacity(cps.len());
    let mut next_cut = 0usize;
    for wave in ranges.chunks(WAVE) {
        let stats = scan_wave(source, wave, bins, max_k, threads);
        for (stat, &(sb_lo, sb_hi)) in stats.iter().zip(wave) {
            while next_cut < cuts.len() && cuts[next_cut] < sb_hi {
                let cut = cuts[next_cut];
                let mut snap = global.clone();
                if cut > sb_lo {
                    let mut prefix = Acc::new(bins, max_k);
                    prefix.scan(source, sb_lo, cut);
                    snap.absorb(&prefix);
                }
                debug_assert_eq!(snap.count, cps[next_cut]);
                out.push((cps[next_cut], snap.close()));
                next_cut += 1;
            }
            global.absorb(stat);
            while next_cut < cuts.len() && cuts[next_cut] == sb_hi {
                debug_assert_eq!(global.count, cps[next_cut]);
                out.push((cps[next_cut], global.close()));
                next_cut += 1;
            }
        }
    }
    Ok(out)
}

/// The measure of the derivative sequence {c(n)}, c = a^(d)/d! with d from
/// the growth classification. This is the candidate limit measure lambda of
/// the torus model for a.
pub fn lambda_from_expr(
    a: &HardyExpr,
    scheme: &AveragingScheme,
    bins: usize,
    max_k: i64,
    threads: usize,
) -> Result<Vec<(u64, EmpiricalMeasure)>> {
    let cls = crate::hardy::classify(a)?;
    if cls.inner.is_some() {
        return Err(Error::HypothesisUnmet(
            "the expression has a rational polynomial part; measures are defined for its \
             arithmetic progressions a(rn+k), not for the expression itself"
                .into(),
        ));
    }
    let d = cls.d;
    let mut fact = 1i64;
    for i in 2..=d {
        fact *= i;
    }
    let c = a
        .derivative(d as u32)?
        .scale(crate::exact::Rat::new(1, fact));
    let source = ExprFrac::new(&c);
    build_empirical_measure(&source, scheme, bins, max_k, threads)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformityReport {
    pub pass: bool,
    pub worst_k: i64,
    pub worst_value: f64,
}

/// Equidistribution check: sup over 1 <= |k| <= max_k of |lambda-hat(k)|
/// against a tolerance. Negative frequencies carry the same modulus by
/// conjugate symmetry, so only positive k are scanned.
pub fn uniformity_test(m: &EmpiricalMeasure, max_k: i64, tol: f64) -> Result<UniformityReport> {
    if max_k < 1 {
        return Err(Error::Measure(format!("uniformity needs max_k >= 1, got {max_k}")));
    }
    let mut worst_k = 1;
    let mut worst_value = 0.0f64;
    for k in 1..=max_k {
        let v = m.fourier(k)?.norm();
        if v > worst_value {
            worst_value = v;
            worst_k = k;
        }
    }
    Ok(UniformityReport { pass: worst_value <= tol, worst_k, worst_value })
}

/// Fraction of the mass within the circular window (alpha - w, alpha + w),
/// read off the histogram: every bin whose interval meets the window counts
/// in full, so the answer is exact to one bin width at each edge.
pub fn concentration_test(m: &EmpiricalMeasure, alpha: f64, window: f64) -> f64 {
    if window <= 0.0 || m.total == 0 {
        return 0.0;
    }
    let span = 2.0 * window;
    if span >= 1.0 {
        return 1.0;
    }
    let b = m.bins.len() as f64;
    let lo = (alpha - window).rem_euclid(1.0);
    let mut hit = 0u64;
    for (i, &c) in m.bins.iter().enumerate() {
        // bin start relative to the window start, on the circle
        let rel = (i as f64 / b - lo).rem_euclid(1.0);
        if rel < span || rel + 1.0 / b > 1.0 {
            hit += c;
        }
    }
    hit as f64 / m.total as f64
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityReport {
    pub pass: bool,
    pub worst_lo: f64,
    pub worst_len: f64,
    pub worst_mass: f64,
}

/// Absolute-continuity surrogate: mass(I) <= C |I| over every dyadic
/// subinterval with |I| >= 8 bins. The worst interval is reported whether
/// or not the check passes.
pub fn density_bound_check(m: &EmpiricalMeasure, c: f64) -> DensityReport {
    let b = m.bins.len();
    let mut prefix = vec![0u64; b + 1];
    for (i, &n) in m.bins.iter().enumerate() {
        prefix[i + 1] = prefix[i] + n;
    }
    let total = m.total.max(1) as f64;
    let mut pass = true;
    let mut worst = (0.0, 1.0, 1.0, 0.0); // (lo, len, mass, excess density)
    let mut pieces = 1usize;
    while pieces <= b / 8 {
        let width = b / pieces;
        let len = 1.0 / pieces as f64;
        for j in 0..pieces {
            let mass = (prefix[(j + 1) * width] - prefix[j * width]) as f64 / total;
            if mass > c * len + 1e-12 {
                pass = false;
            }
            if mass / len > worst.3 {
                worst = (j as f64 * len, len, mass, mass / len);
            }
        }
        pieces *= 2;
    }
    DensityReport { pass, worst_lo: worst.0, worst_len: worst.1, worst_mass: worst.2 }
}

// Doubling past this point would overflow the arithmetic below; a level
// still unreached here is treated as unreachable.
const SEARCH_CEIL: u128 = u128::MAX / 4;

/// Times N with {c(N)} in (alpha - eps, alpha + eps), one per crossing: for
/// each successive integer part m the smallest N >= from where c enters the
/// window around m + alpha. For unbounded slowly varying c these are the
/// checkpoint ladders along which E_{n<=N} delta_{c(n)} concentrates.
///
/// The search brackets each level crossing by doubling and bisection on the
/// (eventually monotone) values of c, so hitting times that grow doubly
/// exponentially cost log-many evaluations, not a scan. Every evaluation
/// counts against the budget; a level that cannot be reached before the
/// budget or the u128 range runs out fails with SearchBudgetExceeded.
pub fn find_checkpoint_times(
    c: &HardyExpr,
    alpha: f64,
    eps: f64,
    count: usize,
    from: u128,
    budget: u64,
) -> Result<Vec<u128>> {
    if !(eps > 0.0 && eps < 0.25) {
        return Err(Error::Measure(format!(
            "window half-width {eps} outside (0, 0.25)"
        )));
    }
    let alpha = alpha.rem_euclid(1.0);
    let n0 = from.max(c.n_start() as u128).max(2);
    if count == 0 {
        return Ok(Vec::new());
    }

    if c.terms().iter().all(|t| t.a.is_zero() && t.b.is_zero()) {
        // constant value: either every N qualifies or none does
        let v: f64 = c.terms().iter().map(|t| t.coef.as_f64()).sum();
        let rel = (v - alpha).rem_euclid(1.0);
        return if rel < eps || rel > 1.0 - eps {
            Ok((0..count as u128).map(|i| n0 + i).collect())
        } else {
            Err(Error::SearchBudgetExceeded { budget })
        };
    }

    let mut evals = 0u64;
    let mut eval = |n: u128| -> Result<f64> {
        evals += 1;
        if evals > budget {
            return Err(Error::SearchBudgetExceeded { budget });
        }
        Ok(eval_slow(c, n).to_f64())
    };

    let mut out = Vec::with_capacity(count);
    let mut cur = n0;
    let mut cur_val = eval(cur)?;
    // first level whose window top lies strictly above c(n0)
    let mut m = (cur_val - alpha - eps).floor() as i64 + 1;
    while out.len() < count {
        let level = m as f64 + alpha;
        let (lower, upper) = (level - eps, level + eps);
        m += 1;
        if cur_val > lower {
            if cur_val < upper {
                // the range start truncates this crossing; cur is the
                // smallest admissible N for it
                out.push(cur);
            }
            continue;
        }
        // double out to a bracket, then bisect to the first N past lower
        let mut step = 1u128;
        let mut hi;
        loop {
            let probe = match cur.checked_add(step) {
                Some(p) if p <= SEARCH_CEIL => p,
                _ => return Err(Error::SearchBudgetExceeded { budget }),
            };
            if eval(probe)? > lower {
                hi = probe;
                break;
            }
            cur = probe;
            step *= 2;
        }
        while hi - cur > 1 {
            let mid = cur + (hi - cur) / 2;
            if eval(mid)? > lower {
                hi = mid;
            } else {
                cur = mid;
            }
        }
        cur = hi;
        cur_val = eval(cur)?;
        if cur_val < upper {
            out.push(cur);
        }
        // else c jumped over the window at this crossing; try the next one
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::averaging::CheckpointRule;
    use crate::exact::Kappa;
    use crate::hardy::{HardyExpr, Term};
    use crate::parse::parse_expr;
    use crate::torus::TorusPoint;
    use proptest::prelude::*;

    fn single(n: u64) -> AveragingScheme {
        AveragingScheme::single(n)
    }

    #[test]
    fn bad_parameters_are_rejected() {
        let src = FracFn(|_| 0.5);
        assert!(matches!(
            build_empirical_measure(&src, &single(100), 100, 4, 1),
            Err(Error::Measure(_))
        ));
        assert!(matches!(
            build_empirical_measure(&src, &single(100), 4, 4, 1),
            Err(Error::Measure(_))
        ));
        assert!(matches!(
            build_empirical_measure(&src, &single(100), 1 << 17, 4, 1),
            Err(Error::Measure(_))
        ));
        assert!(matches!(
            build_empirical_measure(&src, &single(100), 1024, 65, 1),
            Err(Error::Measure(_))
        ));
        let w = AveragingScheme::Weighted { w: parse_expr("t").unwrap(), n_max: 1000 };
        assert!(matches!(
            build_empirical_measure(&src, &w, 1024, 4, 1),
            Err(Error::Measure(_))
        ));
    }

    #[test]
    fn constant_source_fills_one_bin() {
        let src = FracFn(|_| 0.25);
        let out = build_empirical_measure(&src, &single(1000), 1024, 2, 1).unwrap();
        let (n, m) = &out[0];
        assert_eq!(*n, 1000);
        assert_eq!(m.total, 1000);
        assert_eq!(m.bins.iter().filter(|&&c| c > 0).count(), 1);
        assert_eq!(m.bins[256], 1000);
        let l1 = m.fourier(1).unwrap();
        assert!((l1 - Complex64::new(0.0, 1.0)).norm() < 1e-12);
        assert!((m.fourier(-1).unwrap() - Complex64::new(0.0, -1.0)).norm() < 1e-12);
        assert!(matches!(m.fourier(3), Err(Error::FourierOutOfRange { .. })));
        assert!(m.to_fourier_spec().is_ok());
    }

    #[test]
    fn golden_rotation_is_uniform() {
        let phi = TorusPoint::from_kappa(Kappa::Phi);
        let src = FracFn(move |n| phi.mul_u128(n as u128).to_f64());
        let out = build_empirical_measure(&src, &single(1_000_000), 1024, 8, 2).unwrap();
        let m = &out[0].1;
        for k in 1..=8 {
            assert!(
                m.fourier(k).unwrap().norm() <= 1e-3,
                "rotation Weyl mean at k={k} is {}",
                m.fourier(k).unwrap().norm()
            );
        }
        let rep = uniformity_test(m, 8, 1e-2).unwrap();
        assert!(rep.pass);
        // a window of width 0.1 on a uniform measure holds a tenth of it
        let mass = concentration_test(m, 0.3, 0.05);
        assert!((mass - 0.1).abs() < 0.02, "window mass {mass}");
        assert!(density_bound_check(m, 1.2).pass);
    }

    #[test]
    fn derivative_measure_of_three_halves_power_is_uniform() {
        let a = parse_expr("t^(3/2)").unwrap();
        let out = lambda_from_expr(&a, &single(200_000), 1024, 5, 1).unwrap();
        let rep = uniformity_test(&out[0].1, 5, 0.02).unwrap();
        assert!(rep.pass, "worst |lambda-hat| {} at k={}", rep.worst_value, rep.worst_k);
    }

    #[test]
    fn log_derivative_ladder_matches_benford_profile() {
        // a = t log t gives c = log t + 1; along N = round(e^k) the
        // fractional parts follow the Benford profile with density
        // e^u/(e-1), sup 1.582, and lambda-hat(1) = 1/(1 + 2 pi i)
        let a = parse_expr("t*log(t)").unwrap();
        let ladder: Vec<u64> = (10..=13).map(|k| (f64::exp(k as f64)).round() as u64).collect();
        let scheme = AveragingScheme::Subsequence { points: ladder };
        let out = lambda_from_expr(&a, &scheme, 1024, 2, 2).unwrap();
        let m = &out.last().unwrap().1;

        let sup_density = m
            .bins
            .iter()
            .map(|&c| c as f64 / m.total as f64 * 1024.0)
            .fold(0.0, f64::max);
        assert!(
            (1.45..=1.7).contains(&sup_density),
            "sup density {sup_density}, expected about e/(e-1) = 1.582"
        );
        assert!(density_bound_check(m, 2.0).pass);
        assert!(!density_bound_check(m, 1.2).pass);

        let expect = Complex64::new(1.0, 0.0) / Complex64::new(1.0, TAU);
        let got = m.fourier(1).unwrap();
        assert!(
            (got - expect).norm() < 0.02,
            "lambda-hat(1) = {got}, Benford value {expect}"
        );

        // the half-step ladder shifts the profile by 1/2, flipping the sign
        let ladder2: Vec<u64> =
            (10..=13).map(|k| (f64::exp(k as f64 + 0.5)).round() as u64).collect();
        let out2 = lambda_from_expr(
            &a,
            &AveragingScheme::Subsequence { points: ladder2 },
            1024,
            2,
            2,
        )
        .unwrap();
        let got2 = out2.last().unwrap().1.fourier(1).unwrap();
        assert!(
            (got - got2).norm() >= 0.25,
            "ladder coefficients {got} and {got2} should be far apart"
        );
    }

    #[test]
    fn irrational_leading_coefficient_gives_point_mass() {
        // c = a''/2! = sqrt2 exactly, so every sample lands on {sqrt2}
        let a = parse_expr("sqrt2*t^2").unwrap();
        let out = lambda_from_expr(&a, &single(10_000), 1024, 4, 1).unwrap();
        let m = &out[0].1;
        let target = 2f64.sqrt() - 1.0;
        assert!(concentration_test(m, target, 1e-3) >= 0.99);
        let rep = uniformity_test(m, 4, 0.5).unwrap();
        assert!(!rep.pass);
        assert!(rep.worst_value > 0.999);
        // a point mass packs density B/8 into the smallest checked interval
        assert!(!density_bound_check(m, 100.0).pass);
    }

    #[test]
    fn rational_polynomial_part_is_refused() {
        let a = parse_expr("1/2*t^2 + t^(2/3)").unwrap();
        assert!(matches!(
            lambda_from_expr(&a, &single(1000), 1024, 4, 1),
            Err(Error::HypothesisUnmet(_))
        ));
    }

    #[test]
    fn fourier_stays_within_bin_center_drift() {
        // moving every sample to its bin center changes e(kx) by at most
        // the arc pi k / B, so the binned coefficient must stay that close
        let phi = TorusPoint::from_kappa(Kappa::Phi);
        let src = FracFn(move |n| phi.mul_u128(n as u128).to_f64());
        let out = build_empirical_measure(&src, &single(50_000), 1024, 8, 1).unwrap();
        let m = &out[0].1;
        let b = m.bins.len() as f64;
        for k in 1..=8i64 {
            let mut from_bins = Complex64::zero();
            for (i, &c) in m.bins.iter().enumerate() {
                let center = (i as f64 + 0.5) / b;
                from_bins += c as f64 * Complex64::from_polar(1.0, TAU * k as f64 * center);
            }
            from_bins /= m.total as f64;
            let drift = (from_bins - m.fourier(k).unwrap()).norm();
            let bound = std::f64::consts::PI * k as f64 / b + 1e-12;
            assert!(drift <= bound, "k={k}: drift {drift} over bound {bound}");
        }
    }

    #[test]
    fn checkpoints_inside_and_between_superblocks_match_serial() {
        let src = FracFn(|n| (n as f64 * 0.3719).rem_euclid(1.0));
        let cps = vec![100_000, 131_072, 200_000, 300_000];
        let scheme = AveragingScheme::Subsequence { points: cps.clone() };
        let out = build_empirical_measure(&src, &scheme, 256, 4, 3).unwrap();
        assert_eq!(out.len(), cps.len());
        for (n, m) in &out {
            let mut reference = Acc::new(256, 4);
            reference.scan(&src, 2, 2 + n);
            let r = reference.close();
            assert_eq!(m.bins, r.bins);
            assert_eq!(m.total, r.total);
            for (a, b) in m.sums.iter().zip(&r.sums) {
                assert!((a - b).norm() < 1e-9, "chain shapes differ too much");
            }
        }
    }

    #[test]
    fn thread_count_does_not_change_bits() {
        let src = FracFn(|n| (n as f64 * 0.3719).rem_euclid(1.0));
        let scheme = AveragingScheme::Subsequence { points: vec![150_000, 300_000] };
        let base = build_empirical_measure(&src, &scheme, 512, 6, 1).unwrap();
        for threads in [2, 3, 8] {
            let other = build_empirical_measure(&src, &scheme, 512, 6, threads).unwrap();
            for ((_, a), (_, b)) in base.iter().zip(&other) {
                assert_eq!(a.bins, b.bins);
                for (x, y) in a.sums.iter().zip(&b.sums) {
                    assert_eq!(x.re.to_bits(), y.re.to_bits());
                    assert_eq!(x.im.to_bits(), y.im.to_bits());
                }
            }
        }
    }

    #[test]
    fn merge_equals_concatenation() {
        let src = FracFn(|n| (n as f64 * 0.111).rem_euclid(1.0));
        let mut left = Acc::new(128, 4);
        left.scan(&src, 2, 1000);
        let mut right = Acc::new(128, 4);
        right.scan(&src, 1000, 5000);
        let mut whole = Acc::new(128, 4);
        whole.scan(&src, 2, 5000);
        let merged = left.close().merge(&right.close()).unwrap();
        let whole = whole.close();
        assert_eq!(merged.bins, whole.bins);
        assert_eq!(merged.total, whole.total);
        for (a, b) in merged.sums.iter().zip(&whole.sums) {
            assert!((a - b).norm() < 1e-10);
        }
        assert!(left.close().merge(&Acc::new(64, 4).close()).is_err());
    }

    #[test]
    fn uniformity_reports_the_worst_frequency() {
        // alternating 0, 1/2: lambda-hat(1) = 0, lambda-hat(2) = 1
        let src = FracFn(|n| (n % 2) as f64 / 2.0);
        let out = build_empirical_measure(&src, &single(10_000), 64, 4, 1).unwrap();
        let rep = uniformity_test(&out[0].1, 4, 0.1).unwrap();
        assert!(!rep.pass);
        assert_eq!(rep.worst_k, 2);
        assert!(rep.worst_value > 0.999);
        assert!(out[0].1.fourier(1).unwrap().norm() < 1e-12);
    }

    #[test]
    fn checkpoint_times_walk_the_sqrt_log_ladder() {
        let c = parse_expr("log(t)^(1/2)").unwrap();
        let hits = find_checkpoint_times(&c, 0.5, 0.01, 3, 2, 1_000_000).unwrap();
        assert_eq!(hits.len(), 3);
        assert!(hits.windows(2).all(|w| w[0] < w[1]));
        // crossings of sqrt(ln N) = m + 0.5 sit near e^((m+0.5)^2)
        assert!(hits[0] < 1_000, "first hit {}", hits[0]);
        assert!((100_000..1_000_000).contains(&hits[1]), "second hit {}", hits[1]);
        assert!((100_000_000..1_000_000_000).contains(&hits[2]), "third hit {}", hits[2]);
        for &h in &hits {
            let v = eval_slow(&c, h).to_f64().rem_euclid(1.0);
            assert!((0.49..0.51).contains(&v), "hit {h} lands at {v}");
            let before = eval_slow(&c, h - 1).to_f64().rem_euclid(1.0);
            assert!(
                !(0.49..0.51).contains(&before),
                "hit {h} is not minimal, {} already inside",
                h - 1
            );
        }
        // a start inside the window is itself the first hit
        let resumed = find_checkpoint_times(&c, 0.5, 0.01, 1, hits[0] + 1, 1_000_000).unwrap();
        assert_eq!(resumed[0], hits[0] + 1);
    }

    #[test]
    fn checkpoint_times_reach_beyond_u64() {
        let c = parse_expr("log(t)^(1/2)").unwrap();
        let hits = find_checkpoint_times(&c, 0.5, 0.01, 6, 2, 1_000_000).unwrap();
        let last = *hits.last().unwrap();
        assert!(last > u64::MAX as u128, "sixth hit {last} should pass 1.8e19");
        assert!((2e24..4e24).contains(&(last as f64)), "sixth hit {last}");
        let v = eval_slow(&c, last).to_f64().rem_euclid(1.0);
        assert!((0.49..0.51).contains(&v));

        // slow variation behind the checkpoint: the whole back half of the
        // range carries values within 0.05 of c(N)
        let c_n = eval_slow(&c, last).to_f64();
        let mut max_dev = 0.0f64;
        for i in 0..=200u128 {
            let n = last / 2 + (last - last / 2) / 200 * i;
            let dev = c_n - eval_slow(&c, n).to_f64();
            assert!(dev >= -1e-9, "c should be nondecreasing, dev {dev} at {n}");
            max_dev = max_dev.max(dev);
        }
        assert!(max_dev <= 0.05, "c(N) - c(N/2) = {max_dev}");
    }

    #[test]
    fn constant_expressions_hit_immediately_or_never() {
        let c = HardyExpr::canonicalize(vec![Term {
            coef: crate::exact::ExactCoefficient::rational(crate::exact::Rat::new(1, 4)),
            a: crate::exact::Rat::new(0, 1),
            b: crate::exact::Rat::new(0, 1),
        }])
        .unwrap();
        let hits = find_checkpoint_times(&c, 0.25, 0.01, 3, 7, 1000).unwrap();
        assert_eq!(hits, vec![7, 8, 9]);
        assert!(matches!(
            find_checkpoint_times(&c, 0.7, 0.01, 1, 2, 1000),
            Err(Error::SearchBudgetExceeded { .. })
        ));
        let bad = find_checkpoint_times(&c, 0.25, 0.3, 1, 2, 1000);
        assert!(matches!(bad, Err(Error::Measure(_))));
    }

    #[test]
    fn tiny_budget_is_respected() {
        let c = parse_expr("log(t)^(1/2)").unwrap();
        assert!(matches!(
            find_checkpoint_times(&c, 0.5, 0.01, 3, 2, 10),
            Err(Error::SearchBudgetExceeded { budget: 10 })
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn invariants_hold_on_arbitrary_samples(
            xs in proptest::collection::vec(0.0f64..1.0, 1..200),
            ys in proptest::collection::vec(0.0f64..1.0, 1..200),
            log_b in 3u32..8,
            max_k in 0i64..6,
        ) {
            let b = 1usize << log_b;
            let mut acc = Acc::new(b, max_k);
            for &x in &xs {
                acc.push(x);
            }
            let m = acc.close();
            prop_assert_eq!(m.bins.iter().sum::<u64>(), xs.len() as u64);
            prop_assert_eq!(m.total, xs.len() as u64);
            for k in 1..=max_k {
                let v = m.fourier(k).unwrap();
                prop_assert!(v.norm() <= 1.0 + 1e-12);
                let neg = m.fourier(-k).unwrap();
                prop_assert_eq!(neg, v.conj());
            }
            for i in 0..b {
                prop_assert!(m.bin_mass(i) <= 1.0);
            }

            let mut acc2 = Acc::new(b, max_k);
            for &y in &ys {
                acc2.push(y);
            }
            let merged = m.merge(&acc2.close()).unwrap();
            let mut both = Acc::new(b, max_k);
            for &v in xs.iter().chain(&ys) {
                both.push(v);
            }
            prop_assert_eq!(merged.bins, both.close().bins);
            prop_assert_eq!(merged.total, (xs.len() + ys.len()) as u64);
        }
    }

    #[test]
    fn csv_outputs_are_well_formed() {
        let src = FracFn(|_| 0.25);
        let out = build_empirical_measure(&src, &single(100), 16, 2, 1).unwrap();
        let m = &out[0].1;
        let hist = m.histogram_csv();
        assert_eq!(hist.lines().count(), 17);
        assert!(hist.starts_with("bin_lo,mass\n"));
        assert!(hist.contains("0.25,1\n"));
        let four = m.fourier_csv();
        assert_eq!(four.lines().count(), 3);
        assert!(four.starts_with("k,re,im,abs\n"));
    }

    #[test]
    fn powers_of_rule_checkpoints_flow_through() {
        let src = FracFn(|n| (n as f64 * 0.017).rem_euclid(1.0));
        let scheme = AveragingScheme::Full {
            n_max: 40_000,
            rule: CheckpointRule::PowersOf(4.0),
        };
        let out = build_empirical_measure(&src, &scheme, 64, 2, 2).unwrap();
        let ns: Vec<u64> = out.iter().map(|(n, _)| *n).collect();
        assert_eq!(ns, vec![1024, 4096, 16384, 40_000]);
        for (n, m) in &out {
            assert_eq!(m.total, *n);
        }
    }
}
