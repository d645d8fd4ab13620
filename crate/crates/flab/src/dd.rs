//! Double-double arithmetic: an unevaluated sum of two f64s giving ~106
//! significand bits. Used on hot evaluation paths where full multiprecision
//! would dominate the runtime: natural logs of integers, square roots, and
//! fractional parts of products that stay below ~2^60 in magnitude, where the
//! ~1e-32 relative error leaves absolute errors far below every tolerance in
//! the crate.

/// Unevaluated sum hi + lo with |lo| <= ulp(hi)/2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

/// Error-free sum of two f64s (Knuth two-sum, no magnitude precondition).
#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let err = (a - (s - bb)) + (b - bb);
    (s, err)
}

/// Error-free sum assuming |a| >= |b| (or a == 0).
#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let err = b - (s - a);
    (s, err)
}

/// Error-free product via fused multiply-add.
#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    let err = a.mul_add(b, -p);
    (p, err)
}

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };
    pub const ONE: Dd = Dd { hi: 1.0, lo: 0.0 };

    /// ln 2 to double-double precision.
    pub const LN2: Dd = Dd {
        hi: 0.6931471805599453,
        lo: 2.3190468138462996e-17,
    };

    #[inline]
    pub fn from_f64(x: f64) -> Dd {
        Dd { hi: x, lo: 0.0 }
    }

    /// Exact conversion of a u128 (error <= |x| * 2^-105).
    pub fn from_u128(x: u128) -> Dd {
        if x == 0 {
            return Dd::ZERO;
        }
        let bits = 128 - x.leading_zeros();
        if bits <= 53 {
            return Dd::from_f64(x as u64 as f64);
        }
        // Split so the top part is exact in f64 and the bottom absorbs the rest.
        let k = bits - 53;
        let top = (x >> k) as u64 as f64 * (k as f64).exp2();
        let bot = (x & ((1u128 << k) - 1)) as f64;
        let (hi, lo) = two_sum(top, bot);
        Dd { hi, lo }
    }

    #[inline]
    pub fn add(self, o: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, o.hi);
        let e = e + self.lo + o.lo;
        let (hi, lo) = quick_two_sum(s, e);
        Dd { hi, lo }
    }

    #[inline]
    pub fn add_f64(self, o: f64) -> Dd {
        let (s, e) = two_sum(self.hi, o);
        let e = e + self.lo;
        let (hi, lo) = quick_two_sum(s, e);
        Dd { hi, lo }
    }

    #[inline]
    pub fn neg(self) -> Dd {
        Dd { hi: -self.hi, lo: -self.lo }
    }

    #[inline]
    pub fn sub(self, o: Dd) -> Dd {
        self.add(o.neg())
    }

    #[inline]
    pub fn mul(self, o: Dd) -> Dd {
        let (p, e) = two_prod(self.hi, o.hi);
        let e = e + self.hi * o.lo + self.lo * o.hi;
        let (hi, lo) = quick_two_sum(p, e);
        Dd { hi, lo }
    }

    #[inline]
    pub fn mul_f64(self, o: f64) -> Dd {
        let (p, e) = two_prod(self.hi, o);
        let e = e + self.lo * o;
        let (hi, lo) = quick_two_sum(p, e);
        Dd { hi, lo }
    }

    /// Quotient accurate to ~2^-104 relative.
    pub fn div(self, o: Dd) -> Dd {
        let q0 = self.hi / o.hi;
        let r = self.sub(o.mul_f64(q0));
        let q1 = r.hi / o.hi;
        let r = r.sub(o.mul_f64(q1));
        let q2 = r.hi / o.hi;
        let (s, e) = quick_two_sum(q0, q1);
        Dd { hi: s, lo: e }.add_f64(q2)
    }

    /// Square root (one dd Newton correction on the f64 seed).
    pub fn sqrt(self) -> Dd {
        if self.hi == 0.0 {
            return Dd::ZERO;
        }
        let s0 = self.hi.sqrt();
        // s = s0 + (x - s0^2) / (2 s0), with the residual formed exactly.
        let (p, e) = two_prod(s0, s0);
        let r = self.sub(Dd { hi: p, lo: e });
        let corr = r.hi / (2.0 * s0);
        let r2 = r.sub(Dd::from_f64(corr).mul_f64(2.0 * s0));
        let corr2 = r2.hi / (2.0 * s0);
        let (hi, lo) = quick_two_sum(s0, corr + corr2);
        Dd { hi, lo }
    }

    /// Natural log of a positive value, ~1e-31 relative error.
    ///
    /// Reduces to m in [1/sqrt2, sqrt2) times a power of two, then sums the
    /// atanh series in z = (m-1)/(m+1), which converges at ~5 bits per term.
    pub fn ln(self) -> Dd {
        debug_assert!(self.hi > 0.0);
        let mut e2 = (self.hi.to_bits() >> 52) as i32 - 1023;
        let mut m = self.mul_f64((-e2 as f64).exp2());
        if m.hi >= std::f64::consts::SQRT_2 {
            m = m.mul_f64(0.5);
            e2 += 1;
        }
        let z = m.add_f64(-1.0).div(m.add_f64(1.0));
        let z2 = z.mul(z);
        let mut term = z;
        let mut sum = z;
        for j in 1..=22 {
            term = term.mul(z2);
            sum = sum.add(term.mul(recip_dd(2 * j + 1)));
        }
        sum.mul_f64(2.0).add(Dd::LN2.mul_f64(e2 as f64))
    }

    /// exp(x) for moderate |x| (reduced by ln 2, Taylor on |r| <= ln2/2).
    pub fn exp(self) -> Dd {
        let k = (self.hi / std::f64::consts::LN_2).round();
        let r = self.sub(Dd::LN2.mul_f64(k));
        let mut term = Dd::ONE;
        let mut sum = Dd::ONE;
        for j in 1..=26 {
            term = term.mul(r).mul(recip_dd(j));
            sum = sum.add(term);
        }
        sum.mul_f64((k as i32 as f64).exp2())
    }

    /// Integer power by repeated squaring.
    pub fn powi(self, p: i64) -> Dd {
        if p == 0 {
            return Dd::ONE;
        }
        let mut base = self;
        let mut pp = p.unsigned_abs();
        let mut acc: Option<Dd> = None;
        while pp > 0 {
            if pp & 1 == 1 {
                acc = Some(match acc {
                    None => base,
                    Some(a) => a.mul(base),
                });
            }
            pp >>= 1;
            if pp > 0 {
                base = base.mul(base);
            }
        }
        let acc = acc.unwrap();
        if p < 0 {
            Dd::ONE.div(acc)
        } else {
            acc
        }
    }

    /// x^(p/q) for positive x: q-th roots are sqrt chains when q is a power
    /// of two, otherwise exp((p/q) ln x).
    pub fn pow_rat(self, p: i64, q: u32) -> Dd {
        debug_assert!(self.hi > 0.0 && q >= 1);
        if q.is_power_of_two() {
            let mut base = self;
            let mut qq = q;
            while qq > 1 {
                base = base.sqrt();
                qq >>= 1;
            }
            base.powi(p)
        } else {
            self.ln().mul(Dd::from_f64(p as f64).div(Dd::from_f64(q as f64))).exp()
        }
    }

    /// Fractional part reduced to [0, 1). Absolute error ~|x| * 2^-104.
    pub fn frac(self) -> Dd {
        let f = self.hi.floor();
        // hi - floor(hi) is exact; fold in lo and wrap the boundary cases.
        let mut r = Dd::from_f64(self.hi - f).add_f64(self.lo);
        if r.hi < 0.0 {
            r = r.add_f64(1.0);
        }
        if r.hi >= 1.0 {
            r = r.add_f64(-1.0);
        }
        if r.hi < 0.0 {
            // lo pushed an exact-integer value a hair negative
            r = Dd::ZERO;
        }
        r
    }

    #[inline]
    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }
}

/// 1/k as a double-double (one Newton correction).
#[inline]
fn recip_dd(k: i64) -> Dd {
    let kf = k as f64;
    let r0 = 1.0 / kf;
    let e = -(kf.mul_add(r0, -1.0)) * r0;
    Dd { hi: r0, lo: e }
}

/// Natural log of a u128, for checkpoint searches over huge ranges.
pub fn ln_u128(n: u128) -> Dd {
    debug_assert!(n > 0);
    Dd::from_u128(n).ln()
}
