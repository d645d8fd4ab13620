//! Evaluation of {a(n)}: a slow exact-as-you-like path through the
//! multiprecision engine with honest error bounds, and a compiled fast path
//! for the streaming averages, where each term picks the cheapest strategy
//! that keeps the phase error far below every test tolerance.

use num_bigint::BigInt;
use num_complex::Complex64;
use num_traits::{Signed, Zero};

use crate::dd::{ln_u128, Dd};
use crate::error::{Error, Result};
use crate::exact::Rat;
use crate::hardy::HardyExpr;
use crate::mp::{Fx, MpCtx};
use crate::torus::TorusPoint;

/// {a(n)} with a reported error bound, per the model
/// err ~ |a(n)| * 2^(1-P) * term_count * ops_per_term. The computation runs
/// with 64 guard bits over the requested precision and tracks its true error
/// alongside; the reported bound is the larger of model and tracked error.
pub fn eval_frac(e: &HardyExpr, n: u64, precision_bits: u32) -> Result<(f64, f64)> {
    assert!(precision_bits >= 64, "precision_bits below contract minimum");
    assert!(n >= e.n_start(), "n below domain start");
    let v = eval_mp(e, n, precision_bits)?;
    let err = v.err_model.max(v.err_tracked * 2.0);
    if err > 1e-10 {
        return Err(Error::PrecisionInsufficient {
            err_bound: err,
            precision_bits,
        });
    }
    Ok((v.frac, err))
}

/// Full multiprecision evaluation of a(n).
pub struct MpEval {
    pub floor: BigInt,
    pub frac: f64,
    /// contract error model |a(n)| * 2^(1-P) * terms * ops
    pub err_model: f64,
    /// propagated arithmetic error; exactly 0.0 when every step was exact
    pub err_tracked: f64,
}

pub fn eval_mp(e: &HardyExpr, n: u64, precision_bits: u32) -> Result<MpEval> {
    const OPS_PER_TERM: f64 = 8.0;
    let ctx = MpCtx::new(precision_bits + 64);
    let mut acc = ctx.zero();
    let mut ln_n: Option<Fx> = None;
    for t in e.terms() {
        let mut v: Option<Fx> = None;
        let push = |v: &mut Option<Fx>, f: Fx| {
            *v = Some(match v.take() {
                None => f,
                Some(x) => ctx.mul(&x, &f),
            });
        };
        let q_one = t.coef.q == Rat::from_integer(1);
        if !q_one {
            push(
                &mut v,
                ctx.from_rat(
                    &BigInt::from(*t.coef.q.numer()),
                    &BigInt::from(*t.coef.q.denom()),
                ),
            );
        }
        if let Some(k) = t.coef.kappa {
            push(&mut v, ctx.kappa(k));
        }
        if !t.a.is_zero() {
            push(&mut v, ctx.int_pow_rat(n, *t.a.numer(), *t.a.denom() as u32));
        }
        if !t.b.is_zero() {
            let l = ln_n.get_or_insert_with(|| ctx.ln(&ctx.from_u64(n))).clone();
            let lp = ctx.pow_i(&l, *t.b.numer());
            let lq = if *t.b.denom() == 1 {
                lp
            } else {
                ctx.root(&lp, *t.b.denom() as u32)
            };
            push(&mut v, lq);
        }
        let v = v.unwrap_or_else(|| ctx.from_u64(1));
        acc = ctx.add(&acc, &v);
    }
    let err_model = acc.approx.abs().max(1.0)
        * (1.0 - precision_bits as f64).exp2()
        * e.terms().len().max(1) as f64
        * OPS_PER_TERM;
    let err_tracked = acc.err;
    let (floor, frac) = ctx.split_floor(&acc);
    Ok(MpEval { floor, frac: frac.approx, err_model, err_tracked })
}

/// a(n) itself (not mod 1) in double-double, for difference quotients and
/// weights where absolute accuracy ~1e-30 relative is plenty.
pub fn eval_dd(e: &HardyExpr, n: u64) -> Dd {
    let x = Dd::from_u128(n as u128);
    let mut ln_x: Option<Dd> = None;
    let mut acc = Dd::ZERO;
    for t in e.terms() {
        let mut v = t.coef.as_dd();
        if !t.a.is_zero() {
            v = v.mul(x.pow_rat(*t.a.numer(), *t.a.denom() as u32));
        }
        if !t.b.is_zero() {
            let l = *ln_x.get_or_insert_with(|| x.ln());
            v = v.mul(l.pow_rat(*t.b.numer(), *t.b.denom() as u32));
        }
        acc = acc.add(v);
    }
    acc
}

/// eval_dd for index arguments beyond u64. Checkpoint searches for slowly
/// growing expressions like (log t)^(1/2) land at times around 10^24, where
/// the expression value is still small and double-double keeps ~30 digits.
pub fn eval_slow(e: &HardyExpr, n: u128) -> Dd {
    let x = Dd::from_u128(n);
    let mut ln_x: Option<Dd> = None;
    let mut acc = Dd::ZERO;
    for t in e.terms() {
        let mut v = t.coef.as_dd();
        if !t.a.is_zero() {
            v = v.mul(x.pow_rat(*t.a.numer(), *t.a.denom() as u32));
        }
        if !t.b.is_zero() {
            let l = *ln_x.get_or_insert_with(|| ln_u128(n));
            v = v.mul(l.pow_rat(*t.b.numer(), *t.b.denom() as u32));
        }
        acc = acc.add(v);
    }
    acc
}

/// Floor of a u128 square root.
pub fn isqrt_u128(x: u128) -> u128 {
    if x == 0 {
        return 0;
    }
    // the f64 seed can land one above the true root (or at 2^64 for inputs
    // near the top of the range, where squaring would overflow)
    let mut r = ((x as f64).sqrt() as u128).min(u64::MAX as u128);
    for _ in 0..4 {
        r = ((r + x / r) / 2).min(u64::MAX as u128);
    }
    while r > 0 && r.checked_mul(r).is_none_or(|s| s > x) {
        r -= 1;
    }
    while (r + 1).checked_mul(r + 1).is_some_and(|s| s <= x) {
        r += 1;
    }
    r
}

/// Floor of a u128 cube root.
pub fn icbrt_u128(x: u128) -> u128 {
    if x == 0 {
        return 0;
    }
    const CBRT_MAX: u128 = 6981463658331; // floor(cbrt(2^128 - 1))
    let mut r = ((x as f64).cbrt() as u128).min(CBRT_MAX);
    for _ in 0..4 {
        if r == 0 {
            r = 1;
        }
        r = ((2 * r + x / (r * r)) / 3).min(CBRT_MAX);
    }
    while r > 0 && r.checked_mul(r).and_then(|s| s.checked_mul(r)).is_none_or(|c| c > x) {
        r -= 1;
    }
    while (r + 1).checked_pow(3).is_some_and(|s| s <= x) {
        r += 1;
    }
    r
}

/// One term's compiled strategy.
enum Part {
    /// c * n^a with integer a >= 0: the angle c carries rational or named
    /// irrational coefficients at 256 bits; multiplying by n^a stays exact.
    Mono { angle: TorusPoint, a: u32, big_from: u64 },
    /// c * n^(p/q) for q in {2, 3}: exact integer root R plus a dd-refined
    /// fractional remainder f; {cR} comes from the angle, c*f from dd.
    RootPow { q: u32, p: u32, angle: TorusPoint, cdd: Dd },
    /// everything else (logs, other roots, decaying terms) in dd
    Generic { c: Dd, pa: i64, qa: u32, pb: i64, qb: u32 },
}

/// Compiled evaluator for {a(n)} along a stream of integers.
pub struct PhaseEval {
    parts: Vec<Part>,
}

impl PhaseEval {
    pub fn compile(e: &HardyExpr) -> PhaseEval {
        let parts = e
            .terms()
            .iter()
            .map(|t| {
                let (pa, qa) = (*t.a.numer(), *t.a.denom() as u32);
                let (pb, qb) = (*t.b.numer(), *t.b.denom() as u32);
                if t.b.is_zero() && t.a.is_integer() && !t.a.is_negative() {
                    let a = pa as u32;
                    // n^a overflows u128 past this point
                    let big_from = if a == 0 {
                        u64::MAX
                    } else {
                        (2f64.powf(127.0 / a as f64) as u64).saturating_sub(2)
                    };
                    Part::Mono { angle: TorusPoint::from_exact(&t.coef), a, big_from }
                } else if t.b.is_zero() && t.a.is_positive() && (qa == 2 || qa == 3) && pa <= 5 {
                    Part::RootPow {
                        q: qa,
                        p: pa as u32,
                        angle: TorusPoint::from_exact(&t.coef),
                        cdd: t.coef.as_dd(),
                    }
                } else {
                    Part::Generic { c: t.coef.as_dd(), pa, qa, pb, qb }
                }
            })
            .collect();
        PhaseEval { parts }
    }

    /// {a(n)} as f64 (absolute phase error well under 1e-13 for the class
    /// this path serves; the mp path is the arbiter).
    pub fn frac(&self, n: u64) -> f64 {
        let mut acc = 0.0f64;
        for part in &self.parts {
            acc += match *part {
                Part::Mono { angle, a, big_from } => {
                    if n >= big_from {
                        angle.mul_bigint(&BigInt::from(n).pow(a)).to_f64()
                    } else {
                        angle.mul_u128((n as u128).pow(a)).to_f64()
                    }
                }
                Part::RootPow { q, p, angle, cdd } => {
                    let x = (n as u128).pow(p);
                    let (root, fr) = if q == 2 {
                        let r = isqrt_u128(x);
                        (r, refine_sqrt_frac(x, r))
                    } else {
                        let r = icbrt_u128(x);
                        (r, refine_cbrt_frac(x, r))
                    };
                    let int_part = angle.mul_u128(root).to_f64();
                    let frac_part = cdd.mul(fr).to_f64();
                    int_part + frac_part
                }
                Part::Generic { c, pa, qa, pb, qb } => {
                    let x = Dd::from_u128(n as u128);
                    let mut v = c;
                    if pa != 0 {
                        v = v.mul(x.pow_rat(pa, qa));
                    }
                    if pb != 0 {
                        v = v.mul(x.ln().pow_rat(pb, qb));
                    }
                    v.frac().to_f64()
                }
            };
        }
        acc - acc.floor()
    }

    /// e({a(n)}).
    pub fn phase(&self, n: u64) -> Complex64 {
        let (s, c) = (std::f64::consts::TAU * self.frac(n)).sin_cos();
        Complex64::new(c, s)
    }
}

/// Fractional part of sqrt(x) given R = floor(sqrt(x)): one dd Newton step
/// from the f64 seed nails sqrt(x) to ~1e-32 relative, then subtract R.
fn refine_sqrt_frac(x: u128, r: u128) -> Dd {
    if x == r * r {
        return Dd::ZERO;
    }
    let xd = Dd::from_u128(x);
    let y0 = Dd::from_f64((x as f64).sqrt());
    let y = y0.add(xd.div(y0)).mul_f64(0.5);
    let y = y.add(xd.div(y)).mul_f64(0.5);
    y.sub(Dd::from_u128(r))
}

/// Fractional part of x^(1/3) given R = floor(cbrt(x)), same Newton scheme:
/// y <- (2y + x/y^2) / 3.
fn refine_cbrt_frac(x: u128, r: u128) -> Dd {
    if x == r * r * r {
        return Dd::ZERO;
    }
    let xd = Dd::from_u128(x);
    let third = Dd::ONE.div(Dd::from_f64(3.0));
    let mut y = Dd::from_f64((x as f64).cbrt());
    for _ in 0..2 {
        // dividing by an f64 1/3 here would cap the result at ~5e-17
        // relative error; the dd reciprocal keeps the full refinement
        y = y.mul_f64(2.0).add(xd.div(y.mul(y))).mul(third);
    }
    y.sub(Dd::from_u128(r))
}

/// Floor of a(n), raising working precision until the value clears the
/// nearest integer by a safe margin. Exact evaluations (integer-valued
/// algebraic cases like 100^(3/2)) resolve through the zero tracked error;
/// anything still straddling a boundary at 512 bits is refused.
pub fn floor_value(e: &HardyExpr, n: u64, precision_bits: u32) -> Result<BigInt> {
    let mut p = precision_bits.max(64);
    loop {
        let v = eval_mp(e, n, p)?;
        let err = v.err_tracked * 2.0;
        if v.err_tracked == 0.0 || (v.frac - err > 0.0 && v.frac + err < 1.0) {
            return Ok(v.floor);
        }
        if p >= 512 {
            return Err(Error::FloorUndecidable { n, precision_bits: p });
        }
        p = (p * 2).min(512);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::parse_expr;

    #[test]
    fn eval_frac_reference_points() {
        let e = parse_expr("t^(3/2)").unwrap();
        let (f, err) = eval_frac(&e, 10, 128).unwrap();
        assert!((f - 0.6227766016837933).abs() < 1e-12, "{f}");
        assert!(err < 1e-30);
        let (f, _) = eval_frac(&e, 100, 128).unwrap();
        assert!(f < 1e-30, "100^(3/2) = 1000 exactly, got frac {f}");

        let e = parse_expr("t*log(t)").unwrap();
        let (f, _) = eval_frac(&e, 10, 128).unwrap();
        assert!((f - 0.025850929940456840).abs() < 1e-12, "{f}");
    }

    #[test]
    fn eval_frac_cross_precision_small_sample() {
        let exprs = [
            "t^(3/2)",
            "sqrt2*t^2 + t^(3/2)",
            "t*log(t)",
            "1/2*t^2 + t^(2/3)",
            "t*log(t)^(1/16)",
        ];
        let mut n = 987_654u64;
        for src in exprs {
            let e = parse_expr(src).unwrap();
            for _ in 0..20 {
                n = n.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                let nn = 2 + n % 100_000_000;
                let (f128, err128) = eval_frac(&e, nn, 128).unwrap();
                let (f256, _) = eval_frac(&e, nn, 256).unwrap();
                let d = (f128 - f256).abs();
                let d = d.min(1.0 - d);
                assert!(d <= err128.max(1e-15), "{src} n={nn} d={d} err={err128}");
            }
        }
    }

    #[test]
    fn phase_eval_matches_mp_path() {
        let exprs = [
            "t^(3/2)",
            "sqrt2*t^2",
            "1/2*t^2 + t^(2/3)",
            "t*log(t)",
            "t*log(t)^(1/2)",
            "t*log(t)^(1/16)",
            "phi*t + t^(-1)",
            "5/3*t^3 + sqrt3*t",
        ];
        for src in exprs {
            let e = parse_expr(src).unwrap();
            let pe = PhaseEval::compile(&e);
            for n in [2u64, 17, 1000, 123_456, 9_999_991] {
                let (want, err) = eval_frac(&e, n, 192).unwrap();
                let got = pe.frac(n);
                let d = (got - want).abs();
                let d = d.min(1.0 - d);
                assert!(
                    d < 1e-12 + err,
                    "{src} at n={n}: fast {got} vs mp {want}"
                );
            }
        }
    }

    #[test]
    fn isqrt_icbrt_edges() {
        assert_eq!(isqrt_u128(0), 0);
        assert_eq!(isqrt_u128(1), 1);
        assert_eq!(isqrt_u128(3), 1);
        assert_eq!(isqrt_u128(4), 2);
        let big = u128::MAX;
        let r = isqrt_u128(big);
        assert!(r * r <= big);
        assert_eq!(r, (1u128 << 64) - 1);
        assert_eq!(icbrt_u128(26), 2);
        assert_eq!(icbrt_u128(27), 3);
        let r = icbrt_u128(10u128.pow(36) - 1);
        assert_eq!(r, 10u128.pow(12) - 1);
    }

    #[test]
    fn floor_value_exact_integer_case() {
        let e = parse_expr("t^(3/2)").unwrap();
        assert_eq!(floor_value(&e, 100, 128).unwrap(), BigInt::from(1000));
        assert_eq!(floor_value(&e, 10, 128).unwrap(), BigInt::from(31));
        let e = parse_expr("1/2*t^2").unwrap();
        assert_eq!(floor_value(&e, 5, 128).unwrap(), BigInt::from(12));
    }
}
