//! Multiprecision fixed-point arithmetic for expression evaluation and the
//! named constants.
//!
//! Values are BigInt mantissas at a shared scale of 2^fbits. Every operation
//! carries an explicit absolute error bound (in real units, tracked in f64
//! alongside an f64 shadow of the value), so callers can report honest error
//! bounds instead of hoping. Transcendentals stick to what the closed
//! expression class needs: ln, integer powers, and integer q-th roots; powers
//! t^(p/q) are computed from exact integer p-th powers, never through exp.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use num_bigint::{BigInt, BigUint, Sign};
use num_traits::{ToPrimitive, Zero};

use crate::exact::Kappa;

/// Evaluation context: the shared binary scale.
#[derive(Debug, Clone, Copy)]
pub struct MpCtx {
    pub fbits: u32,
}

/// A fixed-point value m / 2^fbits with an f64 shadow and an absolute error
/// bound in real units.
#[derive(Debug, Clone)]
pub struct Fx {
    pub m: BigInt,
    pub approx: f64,
    pub err: f64,
}

impl MpCtx {
    pub fn new(fbits: u32) -> Self {
        MpCtx { fbits }
    }

    fn ulp(&self) -> f64 {
        (-(self.fbits as f64)).exp2()
    }

    pub fn zero(&self) -> Fx {
        Fx { m: BigInt::zero(), approx: 0.0, err: 0.0 }
    }

    pub fn from_u64(&self, n: u64) -> Fx {
        Fx {
            m: BigInt::from(n) << self.fbits,
            approx: n as f64,
            err: 0.0,
        }
    }

    /// p/q rounded to the scale (error at most one ulp, zero when the
    /// division is exact, so dyadic rationals stay exact).
    pub fn from_rat(&self, p: &BigInt, q: &BigInt) -> Fx {
        use num_integer::Integer;
        debug_assert!(!q.is_zero());
        let (m, rem) = (p << self.fbits).div_rem(q);
        let approx = big_to_f64(p) / big_to_f64(q);
        let err = if rem.is_zero() { 0.0 } else { self.ulp() };
        Fx { m, approx, err }
    }

    pub fn add(&self, a: &Fx, b: &Fx) -> Fx {
        Fx {
            m: &a.m + &b.m,
            approx: a.approx + b.approx,
            err: a.err + b.err,
        }
    }

    pub fn sub(&self, a: &Fx, b: &Fx) -> Fx {
        Fx {
            m: &a.m - &b.m,
            approx: a.approx - b.approx,
            err: a.err + b.err,
        }
    }

    pub fn mul(&self, a: &Fx, b: &Fx) -> Fx {
        let prod = &a.m * &b.m;
        // products of exact inputs with no discarded low bits stay exact,
        // which is what lets floors of integer-valued expressions resolve
        let round = if a.err == 0.0
            && b.err == 0.0
            && prod.trailing_zeros().is_none_or(|z| z >= self.fbits as u64)
        {
            0.0
        } else {
            self.ulp()
        };
        Fx {
            m: prod >> self.fbits,
            approx: a.approx * b.approx,
            err: a.err * b.approx.abs() + b.err * a.approx.abs() + a.err * b.err + round,
        }
    }

    pub fn div(&self, a: &Fx, b: &Fx) -> Fx {
        debug_assert!(!b.m.is_zero());
        let m = (&a.m << self.fbits) / &b.m;
        let approx = a.approx / b.approx;
        let err = (a.err + b.err * approx.abs()) / b.approx.abs() + self.ulp();
        Fx { m, approx, err }
    }

    /// x^p for integer p (square-and-multiply; p may be negative).
    pub fn pow_i(&self, x: &Fx, p: i64) -> Fx {
        if p == 0 {
            return self.from_u64(1);
        }
        let mut base = x.clone();
        let mut pp = p.unsigned_abs();
        let mut acc: Option<Fx> = None;
        while pp > 0 {
            if pp & 1 == 1 {
                acc = Some(match acc {
                    None => base.clone(),
                    Some(a) => self.mul(&a, &base),
                });
            }
            pp >>= 1;
            if pp > 0 {
                base = self.mul(&base, &base);
            }
        }
        let acc = acc.unwrap();
        if p < 0 {
            self.div(&self.from_u64(1), &acc)
        } else {
            acc
        }
    }

    /// q-th root of a positive value.
    pub fn root(&self, x: &Fx, q: u32) -> Fx {
        debug_assert!(x.m.sign() == Sign::Plus);
        let (_, mag) = x.m.clone().into_parts();
        // (m * 2^((q-1) fbits))^(1/q) keeps the result at scale 2^fbits.
        let wide = &mag << ((q as u64 - 1) * self.fbits as u64);
        let m = wide.nth_root(q);
        let approx = x.approx.powf(1.0 / q as f64);
        let denom = q as f64 * x.approx.powf((q as f64 - 1.0) / q as f64);
        let err = x.err / denom.max(f64::MIN_POSITIVE) + self.ulp();
        Fx { m: BigInt::from(m), approx, err }
    }

    /// n^(p/q) for exact integer n >= 1 (p may be negative, q >= 1). Goes
    /// through the exact integer power, so the only rounding is the root.
    pub fn int_pow_rat(&self, n: u64, p: i64, q: u32) -> Fx {
        debug_assert!(n >= 1 && q >= 1);
        let np = BigUint::from(n).pow(p.unsigned_abs() as u32);
        let approx_pos = (n as f64).powf(p.unsigned_abs() as f64 / q as f64);
        let pos = if q == 1 {
            Fx { m: BigInt::from(np) << self.fbits, approx: approx_pos, err: 0.0 }
        } else {
            // perfect powers resolve exactly (and skip the wide root)
            let r0 = np.nth_root(q);
            if r0.pow(q) == np {
                Fx { m: BigInt::from(r0) << self.fbits, approx: approx_pos, err: 0.0 }
            } else {
                let wide = np << (q as u64 * self.fbits as u64);
                Fx {
                    m: BigInt::from(wide.nth_root(q)),
                    approx: approx_pos,
                    err: self.ulp(),
                }
            }
        };
        if p < 0 {
            self.div(&self.from_u64(1), &pos)
        } else {
            pos
        }
    }

    /// Natural log of a positive value via the atanh series after reduction
    /// to [sqrt2/2, sqrt2).
    pub fn ln(&self, x: &Fx) -> Fx {
        debug_assert!(x.m.sign() == Sign::Plus);
        let s = self.fbits as i64;
        let bits = x.m.bits() as i64;
        let mut e2 = bits - 1 - s;
        let mut m = if e2 >= 0 { &x.m >> e2 } else { &x.m << -e2 };
        // m in [2^s, 2^(s+1)); halve once more above sqrt2 * 2^s
        let sqrt2s = BigInt::from((BigUint::from(2u32) << (2 * s as u64)).sqrt());
        if m >= sqrt2s {
            m >>= 1;
            e2 += 1;
        }
        let one = BigInt::from(1) << s;
        // The series runs on |z| and restores the sign afterward: on a
        // negative mantissa offset the floored shifts would stall at -1
        // instead of reaching zero.
        let negative = m < one;
        let num = if negative { &one - &m } else { &m - &one };
        let z = (num << s) / (&m + &one);
        let zz = (&z * &z) >> s;
        let mut term = z.clone();
        let mut sum = z;
        let mut k = 1i64;
        loop {
            term = (&term * &zz) >> s;
            if term.is_zero() {
                break;
            }
            sum += &term / (2 * k + 1);
            k += 1;
            debug_assert!(k < self.fbits as i64);
        }
        let doubled: BigInt = sum << 1;
        let atanh2 = if negative { -doubled } else { doubled };
        let ln2 = ln2_scaled(self.fbits);
        let m_res = atanh2 + BigInt::from(ln2) * e2;
        let approx = x.approx.ln();
        // series truncation + per-term floor error + reduction, in ulps
        let err = (2 * k + 2 * e2.abs() + 4) as f64 * self.ulp()
            + x.err / x.approx.max(f64::MIN_POSITIVE);
        Fx { m: m_res, approx, err }
    }

    /// Named constant at this scale (error at most one ulp).
    pub fn kappa(&self, k: Kappa) -> Fx {
        Fx {
            m: BigInt::from(kappa_scaled(k, self.fbits)),
            approx: k.as_f64(),
            err: self.ulp(),
        }
    }

    /// Split into integer part and fractional part in [0, 1). The fractional
    /// part keeps the scale; the f64 view of it is exact to ~2^-53.
    pub fn split_floor(&self, x: &Fx) -> (BigInt, Fx) {
        let int = x.m.clone() >> self.fbits;
        let frac_m = &x.m - (&int << self.fbits);
        let frac_approx = frac_to_f64(&frac_m, self.fbits);
        (
            int,
            Fx { m: frac_m, approx: frac_approx, err: x.err },
        )
    }
}

/// Top bits of a nonnegative mantissa at the given scale, as f64 in [0, 1).
fn frac_to_f64(m: &BigInt, fbits: u32) -> f64 {
    debug_assert!(m.sign() != Sign::Minus);
    let shift = fbits as i64 - 63;
    let top = if shift > 0 { m >> shift } else { m << -shift };
    top.to_f64().unwrap_or(0.0) * (-63f64).exp2()
}

fn big_to_f64(x: &BigInt) -> f64 {
    x.to_f64().unwrap_or(f64::INFINITY)
}

// ---- named constants, integer fixed point, cached per (constant, scale) ----

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
enum ConstKey {
    Kappa(Kappa),
    Ln2,
}

static CONST_CACHE: OnceLock<Mutex<HashMap<(ConstKey, u32), BigUint>>> = OnceLock::new();

fn cached(key: ConstKey, fbits: u32, compute: impl FnOnce() -> BigUint) -> BigUint {
    let cache = CONST_CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(v) = cache.lock().unwrap().get(&(key, fbits)) {
        return v.clone();
    }
    // Computed off-lock: phi resolves sqrt5 through this same cache, so
    // holding the guard across compute() would self-deadlock.  A racing
    // duplicate computation is harmless; both sides produce identical bits.
    let v = compute();
    cache.lock().unwrap().insert((key, fbits), v.clone());
    v
}

/// kappa * 2^fbits, floored (error below one ulp).
pub fn kappa_scaled(k: Kappa, fbits: u32) -> BigUint {
    cached(ConstKey::Kappa(k), fbits, || compute_kappa(k, fbits))
}

/// ln 2 * 2^fbits, floored.
pub fn ln2_scaled(fbits: u32) -> BigUint {
    cached(ConstKey::Ln2, fbits, || {
        // ln 2 = 2 atanh(1/3), computed with guard bits
        let guard = 32u32;
        let s = fbits + guard;
        let x = BigUint::from(1u32) << s;
        let nine = BigUint::from(9u32);
        let mut p = &x / 3u32;
        let mut sum = p.clone();
        let mut k = 1u64;
        loop {
            p /= &nine;
            if p.is_zero() {
                break;
            }
            sum += &p / (2 * k + 1);
            k += 1;
        }
        (sum << 1) >> guard
    })
}

fn compute_kappa(k: Kappa, fbits: u32) -> BigUint {
    match k {
        Kappa::Sqrt2 => (BigUint::from(2u32) << (2 * fbits as u64)).sqrt(),
        Kappa::Sqrt3 => (BigUint::from(3u32) << (2 * fbits as u64)).sqrt(),
        Kappa::Sqrt5 => (BigUint::from(5u32) << (2 * fbits as u64)).sqrt(),
        Kappa::Phi => {
            // (1 + sqrt5) / 2
            (kappa_scaled(Kappa::Sqrt5, fbits + 1) + (BigUint::from(1u32) << (fbits + 1))) >> 2
        }
        Kappa::Pi => {
            // Machin: pi = 16 atan(1/5) - 4 atan(1/239), with guard bits
            let guard = 32u32;
            let s = fbits + guard;
            let a5 = atan_inv(5, s);
            let a239 = atan_inv(239, s);
            ((a5 << 4) - (a239 << 2)) >> guard
        }
        Kappa::EulerE => {
            let guard = 32u32;
            let s = fbits + guard;
            let mut term = BigUint::from(1u32) << s;
            let mut sum = term.clone();
            let mut k = 1u64;
            loop {
                term /= k;
                if term.is_zero() {
                    break;
                }
                sum += &term;
                k += 1;
            }
            sum >> guard
        }
    }
}

/// atan(1/x) * 2^s by the alternating series (x >= 2, so it converges).
fn atan_inv(x: u64, s: u32) -> BigUint {
    let xx = BigUint::from(x) * x;
    let mut p = (BigUint::from(1u32) << s) / x;
    let mut sum = p.clone();
    let mut k = 1u64;
    let mut sub = true;
    loop {
        p /= &xx;
        if p.is_zero() {
            break;
        }
        let t = &p / (2 * k + 1);
        if sub {
            sum -= &t;
        } else {
            sum += &t;
        }
        sub = !sub;
        k += 1;
    }
    sum
}

#[cfg(test)]
mod tests {
    use super::*;

    /// First `digits` decimal digits (after the point prepended by the
    /// integer part) of m / 2^fbits.
    fn decimal(m: &BigUint, fbits: u32, digits: u32) -> String {
        let int = m >> fbits;
        let frac = m - (&int << fbits);
        let scaled = frac * BigUint::from(10u32).pow(digits) >> fbits;
        format!("{int}.{:0>width$}", scaled.to_string(), width = digits as usize)
    }

    #[test]
    fn constants_match_reference_digits() {
        let cases = [
            (Kappa::Sqrt2, "1.414213562373095048801688724209698078569671875376"),
            (Kappa::Sqrt3, "1.732050807568877293527446341505872366942805253810"),
            (Kappa::Sqrt5, "2.236067977499789696409173668731276235440618359611"),
            (Kappa::Phi, "1.618033988749894848204586834365638117720309179805"),
            (Kappa::Pi, "3.141592653589793238462643383279502884197169399375"),
            (Kappa::EulerE, "2.718281828459045235360287471352662497757247093699"),
        ];
        for (k, want) in cases {
            let got = decimal(&kappa_scaled(k, 256), 256, 48);
            assert_eq!(&got[..=49], want, "{k:?}");
        }
    }

    #[test]
    fn ln2_matches_reference_digits() {
        let got = decimal(&ln2_scaled(256), 256, 48);
        assert_eq!(&got[..=49], "0.693147180559945309417232121458176568075500134360");
    }

    #[test]
    fn ln_of_ten() {
        let ctx = MpCtx::new(192);
        let x = ctx.from_u64(10);
        let l = ctx.ln(&x);
        // ln 10 = 2.302585092994045684017991454684364207601101488628...
        let (_, mag) = l.m.into_parts();
        let got = decimal(&mag, 192, 40);
        assert_eq!(&got[..=41], "2.3025850929940456840179914546843642076011");
        assert!(l.err < 1e-50);
    }

    #[test]
    fn int_pow_rat_exact_cases() {
        let ctx = MpCtx::new(128);
        // 100^(3/2) = 1000 exactly
        let v = ctx.int_pow_rat(100, 3, 2);
        let (int, frac) = ctx.split_floor(&v);
        assert_eq!(int, BigInt::from(1000));
        assert!(frac.approx < 1e-30);
        // 10^(3/2) = 31.6227766...
        let v = ctx.int_pow_rat(10, 3, 2);
        let (int, frac) = ctx.split_floor(&v);
        assert_eq!(int, BigInt::from(31));
        assert!((frac.approx - 0.6227766016837933).abs() < 1e-12);
    }

    #[test]
    fn root_of_power_round_trips() {
        // The f64 shadow cannot see agreement below ~1e-16, so measure the
        // drift directly on the mantissa: a few units in the last place.
        let ctx = MpCtx::new(200);
        let x = ctx.from_rat(&BigInt::from(7), &BigInt::from(3));
        let y = ctx.root(&ctx.pow_i(&x, 5), 5);
        let diff = ctx.sub(&y, &x);
        let ulps = diff.m.magnitude().to_u64().unwrap_or(u64::MAX);
        assert!(ulps <= 8, "drift {ulps} ulps at 200 bits");
    }

    #[test]
    fn error_tracking_stays_conservative() {
        let ctx = MpCtx::new(128);
        let x = ctx.from_rat(&BigInt::from(1), &BigInt::from(3));
        let mut acc = x.clone();
        for _ in 0..50 {
            acc = ctx.mul(&acc, &x);
        }
        // 51 multiplications by 1/3: tracked error must bound the true error
        // (true value 3^-51, both mantissa and shadow agree to f64 accuracy)
        assert!(acc.err >= 0.0 && acc.err < 1e-30);
        assert!((acc.approx - 3f64.powi(-51)).abs() <= acc.err + 1e-40);
    }
}
