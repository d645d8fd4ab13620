//! Exact coefficients: rationals, optionally times one named irrational
//! constant. Keeping coefficients in this closed form is what lets the
//! classifier decide rationality questions instead of guessing from floats.

use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::Ratio;
use num_traits::{One, Signed, Zero};

use crate::dd::Dd;
use crate::error::{Error, Result};
use crate::mp;

pub type Rat = Ratio<i64>;

/// The supported irrational constants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Kappa {
    Sqrt2,
    Sqrt3,
    Sqrt5,
    Phi,
    Pi,
    EulerE,
}

impl Kappa {
    pub const ALL: [Kappa; 6] = [
        Kappa::Sqrt2,
        Kappa::Sqrt3,
        Kappa::Sqrt5,
        Kappa::Phi,
        Kappa::Pi,
        Kappa::EulerE,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Kappa::Sqrt2 => "sqrt2",
            Kappa::Sqrt3 => "sqrt3",
            Kappa::Sqrt5 => "sqrt5",
            Kappa::Phi => "phi",
            Kappa::Pi => "pi",
            Kappa::EulerE => "e",
        }
    }

    pub fn from_name(s: &str) -> Option<Kappa> {
        Kappa::ALL.into_iter().find(|k| k.name() == s)
    }

    pub fn as_f64(self) -> f64 {
        match self {
            Kappa::Sqrt2 => std::f64::consts::SQRT_2,
            Kappa::Sqrt3 => 1.7320508075688772,
            Kappa::Sqrt5 => 2.23606797749979,
            Kappa::Phi => 1.618033988749895,
            Kappa::Pi => std::f64::consts::PI,
            Kappa::EulerE => std::f64::consts::E,
        }
    }

    /// Double-double view, good to ~2^-105.
    pub fn as_dd(self) -> Dd {
        use std::sync::OnceLock;
        static CACHE: OnceLock<[Dd; 6]> = OnceLock::new();
        let all = CACHE.get_or_init(|| {
            Kappa::ALL.map(|k| {
                let scaled = mp::kappa_scaled(k, 192);
                let hi = big_to_f64(&scaled) * (-192f64).exp2();
                let hi_scaled = BigInt::from(scaled.clone())
                    - exact_f64_to_bigint(hi * 192f64.exp2());
                let lo = big_to_f64_signed(&hi_scaled) * (-192f64).exp2();
                Dd { hi, lo }
            })
        });
        all[self as usize]
    }
}

fn big_to_f64(x: &num_bigint::BigUint) -> f64 {
    num_traits::ToPrimitive::to_f64(x).unwrap()
}

fn big_to_f64_signed(x: &BigInt) -> f64 {
    num_traits::ToPrimitive::to_f64(x).unwrap()
}

fn exact_f64_to_bigint(x: f64) -> BigInt {
    num_traits::FromPrimitive::from_f64(x).expect("finite")
}

/// q or q * kappa, with q rational.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExactCoefficient {
    pub q: Rat,
    pub kappa: Option<Kappa>,
}

impl ExactCoefficient {
    pub fn rational(q: Rat) -> Self {
        ExactCoefficient { q, kappa: None }
    }

    pub fn int(n: i64) -> Self {
        ExactCoefficient { q: Rat::from_integer(n), kappa: None }
    }

    pub fn with_kappa(q: Rat, k: Kappa) -> Self {
        ExactCoefficient { q, kappa: Some(k) }
    }

    pub fn is_zero(&self) -> bool {
        self.q.is_zero()
    }

    pub fn is_rational(&self) -> bool {
        self.kappa.is_none() || self.q.is_zero()
    }

    /// Addition is only defined when both sides live on the same ray
    /// (same constant, or one side rational zero / both rational).
    pub fn try_add(&self, other: &ExactCoefficient) -> Result<ExactCoefficient> {
        if self.is_zero() {
            return Ok(*other);
        }
        if other.is_zero() {
            return Ok(*self);
        }
        if self.kappa == other.kappa {
            let q = self.q + other.q;
            Ok(ExactCoefficient {
                q,
                kappa: if q.is_zero() { None } else { self.kappa },
            })
        } else {
            Err(Error::MixedConstants {
                a: self.to_string(),
                b: other.to_string(),
            })
        }
    }

    /// Product, defined when the result stays on a single ray: at most one
    /// side carries a constant, or both carry the same square root (whose
    /// square is rational). phi*phi, pi*pi, e*e leave the class.
    pub fn try_mul(&self, other: &ExactCoefficient) -> Result<ExactCoefficient> {
        let q = self.q * other.q;
        match (self.kappa, other.kappa) {
            (k, None) | (None, k) => Ok(ExactCoefficient {
                q,
                kappa: if q.is_zero() { None } else { k },
            }),
            (Some(a), Some(b)) if a == b => {
                let square = match a {
                    Kappa::Sqrt2 => 2,
                    Kappa::Sqrt3 => 3,
                    Kappa::Sqrt5 => 5,
                    _ => {
                        return Err(Error::MixedConstants {
                            a: a.name().into(),
                            b: b.name().into(),
                        })
                    }
                };
                Ok(ExactCoefficient::rational(q * Rat::from_integer(square)))
            }
            (Some(a), Some(b)) => Err(Error::MixedConstants {
                a: a.name().into(),
                b: b.name().into(),
            }),
        }
    }

    pub fn mul_rat(&self, r: Rat) -> ExactCoefficient {
        let q = self.q * r;
        ExactCoefficient {
            q,
            kappa: if q.is_zero() { None } else { self.kappa },
        }
    }

    pub fn neg(&self) -> ExactCoefficient {
        ExactCoefficient { q: -self.q, kappa: self.kappa }
    }

    pub fn signum(&self) -> i8 {
        // all named constants are positive, so the sign is the sign of q
        if self.q.is_positive() {
            1
        } else if self.q.is_negative() {
            -1
        } else {
            0
        }
    }

    pub fn as_f64(&self) -> f64 {
        let base = *self.q.numer() as f64 / *self.q.denom() as f64;
        match self.kappa {
            None => base,
            Some(k) => base * k.as_f64(),
        }
    }

    pub fn as_dd(&self) -> Dd {
        let q = Dd::from_f64(*self.q.numer() as f64).div(Dd::from_f64(*self.q.denom() as f64));
        match self.kappa {
            None => q,
            Some(k) => q.mul(k.as_dd()),
        }
    }

    /// floor(value * 2^fbits) as exact integer arithmetic on the scaled
    /// constant (floor, not truncation, so negatives round down).
    pub fn scaled(&self, fbits: u32) -> BigInt {
        let p = BigInt::from(*self.q.numer());
        let r = BigInt::from(*self.q.denom());
        let num = match self.kappa {
            None => p << fbits,
            Some(k) => p * BigInt::from(mp::kappa_scaled(k, fbits)),
        };
        num.div_floor(&r)
    }

    /// Exact comparison against a rational threshold.
    pub fn ge_rat(&self, r: Rat) -> bool {
        match self.kappa {
            None => self.q >= r,
            Some(k) => {
                // q * kappa >= r  <=>  sign-aware compare of q^2 kappa^2 vs r^2
                // for the quadratic constants; go through scaled integers for
                // uniformity instead (256 bits is far beyond any tie).
                let lhs = self.scaled(256);
                let rhs =
                    (BigInt::from(*r.numer()) << 256u32).div_floor(&BigInt::from(*r.denom()));
                // scaled() floors, so lhs may understate by one ulp; a real
                // tie would need q * kappa within 2^-256 of r, impossible for
                // these constants with i64 rationals
                let _ = k;
                lhs >= rhs
            }
        }
    }
}

pub fn fmt_rat(r: Rat) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

impl fmt::Display for ExactCoefficient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kappa {
            None => write!(f, "{}", fmt_rat(self.q)),
            Some(k) => {
                if self.q.is_one() {
                    write!(f, "{}", k.name())
                } else {
                    write!(f, "{}*{}", fmt_rat(self.q), k.name())
                }
            }
        }
    }
}
