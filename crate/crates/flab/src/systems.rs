//! Concrete measure-preserving systems and the observable sequences sampled
//! along them: circle rotations and their products, the unipotent torus
//! models, Beatty subsequence clocks, and a reproducible Bernoulli weight.
//! Orbits are computed in closed form, one fixed-point multiplication or one
//! binomial sum per sample, never by iterating the map, so a 10^8-step orbit
//! carries no accumulated rounding.

use num_bigint::BigInt;
use num_complex::Complex64;
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};

use crate::averaging::{FnSeq, Sequence};
use crate::error::{Error, Result};
use crate::eval::{floor_value, icbrt_u128, isqrt_u128};
use crate::exact::{ExactCoefficient, Rat};
use crate::hardy::{HardyExpr, D_MAX};
use crate::oracle::binom_i128;
use crate::torus::TorusPoint;

/// A system on a torus, described by what its time-t map does to the chosen
/// starting point. Coordinates live on 256-bit circles, so a rotation angle
/// is held far beyond the 128 bits the orbit sums need.
#[derive(Debug, Clone)]
pub enum TorusSystem {
    /// x -> x + alpha on one circle, started at y.
    Rotation { alpha: TorusPoint, y: TorusPoint },
    /// Cartesian product; coordinates concatenate in declaration order.
    Product(Vec<TorusSystem>),
    /// The affine unipotent tower on d+1 circles: at time t, coordinate i
    /// sits at sum_{k<=i} C(t,k) y_{i-k}, the binomial form of the orbit.
    Unipotent { d: i64, y: Vec<TorusPoint> },
}

impl TorusSystem {
    pub fn rotation(alpha: TorusPoint, y: TorusPoint) -> TorusSystem {
        TorusSystem::Rotation { alpha, y }
    }

    pub fn product(parts: Vec<TorusSystem>) -> TorusSystem {
        TorusSystem::Product(parts)
    }

    pub fn unipotent(d: i64, y: Vec<TorusPoint>) -> Result<TorusSystem> {
        if !(0..=D_MAX).contains(&d) {
            return Err(Error::Measure(format!(
                "model degree {d} outside the supported range 0..={D_MAX}"
            )));
        }
        if y.len() as i64 != d + 1 {
            return Err(Error::Measure(format!(
                "degree-{d} tower starts from {} coordinates, got {}",
                d + 1,
                y.len()
            )));
        }
        Ok(TorusSystem::Unipotent { d, y })
    }

    /// Number of circle coordinates, which is also the length of the
    /// frequency vector an observable over this system must supply.
    pub fn dim(&self) -> usize {
        match self {
            TorusSystem::Rotation { .. } => 1,
            TorusSystem::Product(parts) => parts.iter().map(TorusSystem::dim).sum(),
            TorusSystem::Unipotent { d, .. } => (*d + 1) as usize,
        }
    }

    /// sum_i freqs[i] * x_i(t) as a circle point, x(t) the orbit position at
    /// time t. The whole walk is fixed-point circle arithmetic; the one
    /// lossy step is the caller's eventual to_unit. The frequency slice must
    /// have exactly dim() entries.
    pub fn phase(&self, t: i128, freqs: &[i64]) -> TorusPoint {
        assert_eq!(freqs.len(), self.dim(), "frequency count must match dim");
        let mut acc = TorusPoint::ZERO;
        self.phase_into(t, freqs, &mut acc);
        acc
    }

    fn phase_into(&self, t: i128, freqs: &[i64], acc: &mut TorusPoint) {
        match self {
            TorusSystem::Rotation { alpha, y } => {
                if freqs[0] != 0 {
                    let x = y.add(alpha.mul_i128(t));
                    *acc = acc.add(x.mul_i128(freqs[0] as i128));
                }
            }
            TorusSystem::Product(parts) => {
                let mut at = 0;
                for p in parts {
                    let dim = p.dim();
                    p.phase_into(t, &freqs[at..at + dim], acc);
                    at += dim;
                }
            }
            TorusSystem::Unipotent { y, .. } => {
                for (i, &f) in freqs.iter().enumerate() {
                    if f == 0 {
                        continue;
                    }
                    let mut x = TorusPoint::ZERO;
                    for k in 0..=i {
                        x = x.add(y[i - k].mul_bigint(&binom_i128(t, k as u32)));
                    }
                    *acc = acc.add(x.mul_i128(f as i128));
                }
            }
        }
    }
}

/// An integer time sequence n -> t(n) driving an orbit. Pure in n, so
/// parallel block evaluation needs no state.
pub trait TimeSeq: Sync {
    /// First valid index.
    fn start(&self) -> u64;
    fn time(&self, n: u64) -> i128;
}

/// time(n) = n.
pub struct IdentityTime;

impl TimeSeq for IdentityTime {
    fn start(&self) -> u64 {
        2
    }

    fn time(&self, n: u64) -> i128 {
        n as i128
    }
}

/// time(n) = [a(n)], with an exact integer-root fast path for a single
/// unit-coefficient power t^(p/q), q in {1, 2, 3}, and the precision-raising
/// floor for everything else. A floor still undecidable at the 512-bit cap
/// aborts the run rather than rounding silently; [`floor_time`] is the
/// probing interface that reports the same condition as an error.
pub struct FloorTime {
    expr: HardyExpr,
    precision_bits: u32,
    start: u64,
    fast: Option<(u32, u32)>,
}

impl FloorTime {
    pub fn new(expr: &HardyExpr, precision_bits: u32) -> FloorTime {
        let fast = match expr.terms() {
            [t] if t.coef.kappa.is_none()
                && t.coef.q == Rat::one()
                && t.b.is_zero()
                && *t.a.numer() >= 1
                && *t.a.numer() <= 40
                && (1..=3).contains(t.a.denom()) =>
            {
                Some((*t.a.numer() as u32, *t.a.denom() as u32))
            }
            _ => None,
        };
        FloorTime { expr: expr.clone(), precision_bits, start: expr.n_start(), fast }
    }
}

impl TimeSeq for FloorTime {
    fn start(&self) -> u64 {
        self.start
    }

    fn time(&self, n: u64) -> i128 {
        if let Some((p, q)) = self.fast {
            if let Some(x) = (n as u128).checked_pow(p) {
                let r = match q {
                    1 => x,
                    2 => isqrt_u128(x),
                    _ => icbrt_u128(x),
                };
                if let Ok(t) = i128::try_from(r) {
                    return t;
                }
            }
        }
        let v = floor_value(&self.expr, n, self.precision_bits)
            .unwrap_or_else(|e| panic!("undecidable orbit time [a({n})]: {e}"));
        v.to_i128()
            .unwrap_or_else(|| panic!("orbit time [a({n})] overflows the 128-bit clock"))
    }
}

/// Fixed-point resolution for irrational Beatty slopes. The truncation band
/// is n + 1 units, about 2^-256 at desk-scale n, while n*alpha + beta stays
/// farther from integers than any such band for the closed constant set, so
/// the first resolution essentially always decides the floor.
const BEATTY_FBITS: u32 = 320;

enum BeattyKernel {
    /// Rational slope: floor((n*pn + pc) / den) in exact integers. Scaled
    /// truncation would be wrong here, since n*alpha + beta lands exactly on
    /// integers.
    Rational { pn: BigInt, pc: BigInt, den: BigInt },
    /// Irrational slope as floors of alpha and beta at fbits of fixed point.
    Scaled { s: BigInt, off: BigInt, modulus: BigInt },
}

impl BeattyKernel {
    fn build(alpha: &ExactCoefficient, beta: Rat, fbits: u32) -> BeattyKernel {
        let (bp, bq) = (BigInt::from(*beta.numer()), BigInt::from(*beta.denom()));
        if alpha.kappa.is_none() {
            let (p, q) = (BigInt::from(*alpha.q.numer()), BigInt::from(*alpha.q.denom()));
            BeattyKernel::Rational { pn: p * &bq, pc: bp * &q, den: q * bq }
        } else {
            let s = alpha.scaled(fbits);
            let off = (bp << fbits).div_floor(&bq);
            BeattyKernel::Scaled { s, off, modulus: BigInt::one() << fbits }
        }
    }

    /// None means this resolution cannot certify the floor at this n: both
    /// stored floors truncate downward, so the sum underestimates the true
    /// scaled value by less than n + 1 units, and a quotient is only
    /// trustworthy when the residue sits at least that far below the next
    /// multiple of the modulus.
    fn eval(&self, n: u64) -> Option<BigInt> {
        match self {
            BeattyKernel::Rational { pn, pc, den } => Some((pn * n + pc).div_floor(den)),
            BeattyKernel::Scaled { s, off, modulus } => {
                let (q, rem) = (s * n + off).div_mod_floor(modulus);
                if rem + n + 1u32 >= *modulus {
                    None
                } else {
                    Some(q)
                }
            }
        }
    }
}

fn beatty_slope_error(alpha: &ExactCoefficient) -> Error {
    Error::NotIncreasing(format!(
        "Beatty slope {alpha} is below 1, so [n*alpha + beta] repeats values"
    ))
}

/// [n*alpha + beta] exactly. Rational slopes go through integer arithmetic;
/// slopes with a named constant go through fixed point wide enough that the
/// truncation band cannot straddle an integer, escalating in the
/// astronomically unlikely case it does.
pub fn beatty(alpha: &ExactCoefficient, beta: Rat, n: u64) -> Result<BigInt> {
    if !alpha.ge_rat(Rat::one()) {
        return Err(beatty_slope_error(alpha));
    }
    let mut fbits = BEATTY_FBITS;
    loop {
        if let Some(v) = BeattyKernel::build(alpha, beta, fbits).eval(n) {
            return Ok(v);
        }
        if fbits >= 1 << 14 {
            return Err(Error::FloorUndecidable { n, precision_bits: fbits });
        }
        fbits *= 2;
    }
}

/// time(n) = [n*alpha + beta] with the kernel built once.
pub struct BeattyTime {
    alpha: ExactCoefficient,
    beta: Rat,
    kernel: BeattyKernel,
}

impl BeattyTime {
    pub fn new(alpha: ExactCoefficient, beta: Rat) -> Result<BeattyTime> {
        if !alpha.ge_rat(Rat::one()) {
            return Err(beatty_slope_error(&alpha));
        }
        let kernel = BeattyKernel::build(&alpha, beta, BEATTY_FBITS);
        Ok(BeattyTime { alpha, beta, kernel })
    }
}

impl TimeSeq for BeattyTime {
    fn start(&self) -> u64 {
        2
    }

    fn time(&self, n: u64) -> i128 {
        let v = match self.kernel.eval(n) {
            Some(v) => v,
            None => beatty(&self.alpha, self.beta, n)
                .unwrap_or_else(|e| panic!("Beatty time b({n}): {e}")),
        };
        v.to_i128()
            .unwrap_or_else(|| panic!("Beatty time b({n}) overflows the 128-bit clock"))
    }
}

/// The sampled observable n -> e(sum_i m_i x_i(t(n))) over a system orbit.
pub struct OrbitSeq<'a> {
    sys: &'a TorusSystem,
    time: &'a dyn TimeSeq,
    freqs: Vec<i64>,
}

/// Couples a system, a time sequence, and a character frequency vector into
/// a complex sequence ready for averaging. The frequency vector must name
/// one integer per system coordinate.
pub fn orbit_sample<'a>(
    sys: &'a TorusSystem,
    time: &'a dyn TimeSeq,
    freqs: Vec<i64>,
) -> Result<OrbitSeq<'a>> {
    if freqs.len() != sys.dim() {
        return Err(Error::Query(format!(
            "observable carries {} frequencies for a {}-coordinate system",
            freqs.len(),
            sys.dim()
        )));
    }
    Ok(OrbitSeq { sys, time, freqs })
}

impl Sequence for OrbitSeq<'_> {
    fn start(&self) -> u64 {
        self.time.start()
    }

    fn value(&self, n: u64) -> Complex64 {
        self.sys.phase(self.time.time(n), &self.freqs).to_unit()
    }
}

/// A bounded weight w(n) to average against: unimodular exponentials of
/// linear, quadratic, or floored-power phases, a plus-minus indicator sample
/// along a rotation, or the Bernoulli coin. Everything is a pure function
/// of n.
#[derive(Debug, Clone)]
pub enum WeightSpec {
    ExpLinear { alpha: TorusPoint },
    ExpQuadratic { beta: TorusPoint },
    RiemannSample { alpha: TorusPoint, u: f64, v: f64 },
    Bernoulli { seed: u64 },
    FloorPower { a: HardyExpr, alpha: TorusPoint },
}

impl WeightSpec {
    pub fn sequence(&self) -> Result<Box<dyn Sequence + '_>> {
        match self {
            WeightSpec::ExpLinear { alpha } => {
                let a = *alpha;
                Ok(Box::new(FnSeq(move |n| a.mul_u128(n as u128).to_unit())))
            }
            WeightSpec::ExpQuadratic { beta } => {
                let b = *beta;
                Ok(Box::new(FnSeq(move |n| {
                    b.mul_u128(n as u128 * n as u128).to_unit()
                })))
            }
            WeightSpec::RiemannSample { alpha, u, v } => {
                if !(0.0 <= *u && u < v && *v <= 1.0) {
                    return Err(Error::BadWeight(format!(
                        "sampling window [{u}, {v}) is not a nonempty subinterval of [0, 1)"
                    )));
                }
                let (a, u, v) = (*alpha, *u, *v);
                // centered so the weight has mean zero in the half-window
                // case instead of a constant offset
                Ok(Box::new(FnSeq(move |n| {
                    let x = a.mul_u128(n as u128).to_f64();
                    Complex64::new(if u <= x && x < v { 1.0 } else { -1.0 }, 0.0)
                })))
            }
            WeightSpec::Bernoulli { seed } => {
                let s = *seed;
                Ok(Box::new(FnSeq(move |n| {
                    Complex64::new(bernoulli_weight(s, n), 0.0)
                })))
            }
            WeightSpec::FloorPower { a, alpha } => {
                let time = FloorTime::new(a, 128);
                let al = *alpha;
                Ok(Box::new(FnSeq(move |n| al.mul_i128(time.time(n)).to_unit())))
            }
        }
    }
}

/// Counter-based coin: a fixed 64-bit mix of seed + n * golden, bit-exact on
/// every platform, so parallel index blocks need no generator state.
pub fn bernoulli_weight(seed: u64, n: u64) -> f64 {
    let mut z = seed.wrapping_add(n.wrapping_mul(0x9E3779B97F4A7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^= z >> 31;
    if z >> 63 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// [a(n)] as an exact integer, surfacing rather than hiding a floor the
/// evaluator cannot decide at its maximum working precision.
pub fn floor_time(a: &HardyExpr, n: u64, precision_bits: u32) -> Result<BigInt> {
    floor_value(a, n, precision_bits)
}
