//! Points on the circle R/Z at 256-bit resolution.
//!
//! Rotation orbits {n alpha} lose all accuracy if alpha is stored as f64 and
//! n runs to 10^7, so angles live as 256-bit fractions and only the final
//! reduced value drops to f64. Arithmetic mod 1 is wrapping arithmetic on the
//! 256-bit mantissa, which is exact.

use num_bigint::{BigInt, BigUint, Sign};
use num_complex::Complex64;

use crate::exact::{ExactCoefficient, Kappa};
use crate::mp;

const FRAC_BITS: u32 = 256;

/// A point on R/Z: value = mantissa / 2^256, limbs little-endian.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TorusPoint {
    limbs: [u64; 4],
}

impl TorusPoint {
    pub const ZERO: TorusPoint = TorusPoint { limbs: [0; 4] };

    /// Fractional part of an f64 (exact: f64 values are dyadic so all bits
    /// land inside 256).
    pub fn from_f64(x: f64) -> TorusPoint {
        let mut f = x - x.floor();
        if f >= 1.0 {
            f = 0.0;
        }
        let mut limbs = [0u64; 4];
        // peel 32 bits at a time; every step is exact in f64
        let mut parts = [0u64; 8];
        for p in parts.iter_mut() {
            f *= 4294967296.0;
            let ip = f.floor();
            *p = ip as u64;
            f -= ip;
        }
        for i in 0..4 {
            limbs[3 - i] = (parts[2 * i] << 32) | parts[2 * i + 1];
        }
        TorusPoint { limbs }
    }

    /// p/q mod 1 as a dyadic approximation (error below 2^-256).
    pub fn from_rat(p: i64, q: u64) -> TorusPoint {
        use num_integer::Integer;
        debug_assert!(q > 0);
        let qq = BigInt::from(q);
        let pp = BigInt::from(p).mod_floor(&qq);
        let scaled = (pp << FRAC_BITS) / qq;
        Self::from_biguint(scaled.magnitude())
    }

    /// Low 256 bits of a scaled value (the caller's value * 2^256).
    pub fn from_biguint(scaled: &BigUint) -> TorusPoint {
        let mut limbs = [0u64; 4];
        for (i, d) in scaled.iter_u64_digits().take(4).enumerate() {
            limbs[i] = d;
        }
        TorusPoint { limbs }
    }

    /// kappa mod 1.
    pub fn from_kappa(k: Kappa) -> TorusPoint {
        Self::from_biguint(&mp::kappa_scaled(k, FRAC_BITS))
    }

    /// q * kappa mod 1 (exact rational times scaled constant).
    pub fn from_exact(c: &ExactCoefficient) -> TorusPoint {
        use num_integer::Integer;
        let scaled = c.scaled(FRAC_BITS);
        let modulus = BigInt::from(1u32) << FRAC_BITS;
        let reduced = scaled.mod_floor(&modulus);
        Self::from_biguint(reduced.magnitude())
    }

    pub fn add(self, other: TorusPoint) -> TorusPoint {
        let mut limbs = [0u64; 4];
        let mut carry = 0u64;
        for i in 0..4 {
            let (s1, c1) = self.limbs[i].overflowing_add(other.limbs[i]);
            let (s2, c2) = s1.overflowing_add(carry);
            limbs[i] = s2;
            carry = (c1 as u64) + (c2 as u64);
        }
        TorusPoint { limbs }
    }

    pub fn neg(self) -> TorusPoint {
        if self.limbs == [0; 4] {
            return self;
        }
        let mut limbs = [0u64; 4];
        let mut borrow = false;
        for i in 0..4 {
            let (d, b1) = 0u64.overflowing_sub(self.limbs[i]);
            let (d, b2) = d.overflowing_sub(borrow as u64);
            limbs[i] = d;
            borrow = b1 || b2;
        }
        TorusPoint { limbs }
    }

    /// {k * self}: multiply by an integer, keep the fractional part. The
    /// 4x2-limb product is computed in full and the high limbs (the integer
    /// part) are discarded.
    pub fn mul_u128(self, k: u128) -> TorusPoint {
        self.mul_limbs(&[k as u64, (k >> 64) as u64])
    }

    /// {k * self} for signed k up to orbit-time width.
    pub fn mul_i128(self, k: i128) -> TorusPoint {
        let p = self.mul_u128(k.unsigned_abs());
        if k < 0 {
            p.neg()
        } else {
            p
        }
    }

    /// {k * self} for signed big k.
    pub fn mul_bigint(self, k: &BigInt) -> TorusPoint {
        let digits: Vec<u64> = k.magnitude().iter_u64_digits().take(4).collect();
        let p = self.mul_limbs(&digits);
        if k.sign() == Sign::Minus {
            p.neg()
        } else {
            p
        }
    }

    /// Schoolbook product by a little-endian multiplier, fraction kept.
    /// Positions at or above limb 4 are integer part and are discarded;
    /// nothing there feeds back down, so the loop stops at the boundary.
    fn mul_limbs(self, digits: &[u64]) -> TorusPoint {
        let mut limbs = [0u64; 4];
        for (j, &d) in digits.iter().enumerate() {
            if j >= 4 {
                break;
            }
            let mut carry = 0u128;
            for i in 0..4 - j {
                let v = limbs[i + j] as u128 + self.limbs[i] as u128 * d as u128 + carry;
                limbs[i + j] = v as u64;
                carry = v >> 64;
            }
        }
        TorusPoint { limbs }
    }

    pub fn to_f64(self) -> f64 {
        // top two limbs carry everything f64 can see
        let v = self.limbs[3] as f64 * (-64f64).exp2() + self.limbs[2] as f64 * (-128f64).exp2();
        // a point within half an ulp of the full turn rounds to 1.0, which
        // on the circle is the same point as 0
        if v >= 1.0 { 0.0 } else { v }
    }

    /// e(x) = exp(2 pi i x).
    pub fn to_unit(self) -> Complex64 {
        let (s, c) = (std::f64::consts::TAU * self.to_f64()).sin_cos();
        Complex64::new(c, s)
    }

    /// Distance to the nearest integer, |x| in the circle metric.
    pub fn dist_to_zero(self) -> f64 {
        let v = self.to_f64();
        v.min(1.0 - v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::ToPrimitive;

    #[test]
    fn f64_round_trip() {
        for &x in &[0.0, 0.25, 0.5, 1.0 / 3.0, 0.9999999999, 2.75, -0.25] {
            let p = TorusPoint::from_f64(x);
            let want = x - x.floor();
            assert!((p.to_f64() - want).abs() < 1e-15, "{x}");
        }
    }

    #[test]
    fn rational_points_are_exact_multiples() {
        let third = TorusPoint::from_rat(1, 3);
        let sum = third.add(third).add(third);
        // 3 * (1/3 rounded down) wraps to just under 0 or exactly 0
        assert!(sum.to_f64() < 1e-70 || sum.to_f64() > 1.0 - 1e-70);
        assert_eq!(TorusPoint::from_rat(-1, 4).to_f64(), 0.75);
    }

    #[test]
    fn mul_matches_direct_f64_at_small_n() {
        let alpha = TorusPoint::from_kappa(Kappa::Sqrt2);
        for n in [1u128, 2, 10, 1000, 12345] {
            let got = alpha.mul_u128(n).to_f64();
            let want = (n as f64 * std::f64::consts::SQRT_2).rem_euclid(1.0);
            // direct f64 product loses bits by n ~ 1e4; compare loosely
            assert!(
                (got - want).abs().min(1.0 - (got - want).abs()) < 1e-9,
                "n={n} got={got} want={want}"
            );
        }
    }

    #[test]
    fn mul_is_exact_at_large_n() {
        // {10^7 sqrt2} against the scaled-integer ground truth
        let alpha = TorusPoint::from_kappa(Kappa::Sqrt2);
        let n = 10_000_000u128;
        let scaled = mp::kappa_scaled(Kappa::Sqrt2, 320) * BigUint::from(n);
        let int = &scaled >> 320u32;
        let frac = scaled - (int << 320u32);
        let want = frac.to_f64().unwrap() * (-320f64).exp2();
        let got = alpha.mul_u128(n).to_f64();
        assert!((got - want).abs() < 1e-15, "got={got} want={want}");
    }

    #[test]
    fn bigint_and_u128_agree() {
        let alpha = TorusPoint::from_kappa(Kappa::Pi);
        let k = 987_654_321u128;
        let a = alpha.mul_u128(k);
        let b = alpha.mul_bigint(&BigInt::from(k));
        assert_eq!(a, b);
        let c = alpha.mul_bigint(&BigInt::from(-(k as i128)));
        assert_eq!(c, a.neg());
    }

    #[test]
    fn neg_wraps() {
        let p = TorusPoint::from_f64(0.3);
        assert!((p.neg().to_f64() - 0.7).abs() < 1e-15);
        assert_eq!(TorusPoint::ZERO.neg(), TorusPoint::ZERO);
    }
}
