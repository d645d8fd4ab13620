//! Symbolic Hardy-field expressions: sums of c * t^a * (log t)^b with exact
//! rational exponents, their calculus (differentiation, growth comparison),
//! and the five-case classification driving every model prediction.

use std::fmt;

use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::exact::{fmt_rat, ExactCoefficient, Rat};

/// Default cap on the leading power of t. Higher degrees blow up the
/// precision needed for {a(n)} without exercising anything new.
pub const D_MAX: i64 = 8;

/// One summand c * t^a * (log t)^b.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Term {
    pub coef: ExactCoefficient,
    pub a: Rat,
    pub b: Rat,
}

/// Canonical expression: terms strictly decreasing by (a, b), no duplicates,
/// no zeros. log is the natural logarithm throughout.
#[derive(Debug, Clone, PartialEq)]
pub struct HardyExpr {
    terms: Vec<Term>,
    t0: f64,
}

impl HardyExpr {
    /// Merge like terms, drop zeros, sort, and enforce the growth cap.
    pub fn canonicalize(raw: Vec<Term>) -> Result<HardyExpr> {
        Self::canonicalize_with(raw, D_MAX)
    }

    pub fn canonicalize_with(raw: Vec<Term>, d_max: i64) -> Result<HardyExpr> {
        let mut terms: Vec<Term> = Vec::with_capacity(raw.len());
        let mut sorted = raw;
        sorted.sort_by(|x, y| (y.a, y.b).cmp(&(x.a, x.b)));
        for t in sorted {
            if t.coef.is_zero() {
                continue;
            }
            match terms.last_mut() {
                Some(last) if last.a == t.a && last.b == t.b => {
                    last.coef = last.coef.try_add(&t.coef)?;
                }
                _ => terms.push(t),
            }
        }
        terms.retain(|t| !t.coef.is_zero());
        if let Some(lead) = terms.first() {
            if lead.a >= Rat::from_integer(d_max) {
                return Err(Error::GrowthTooLarge {
                    a_lead: fmt_rat(lead.a),
                    d_max,
                });
            }
        }
        Ok(HardyExpr { terms, t0: 2.0 })
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    /// First index where averages may start: n >= max(2, ceil(t0)).
    pub fn n_start(&self) -> u64 {
        (self.t0.ceil() as u64).max(2)
    }

    /// Exact term-by-term derivative,
    /// d/dt [c t^a (log t)^b] = c a t^(a-1) (log t)^b + c b t^(a-1) (log t)^(b-1).
    /// Like terms from different summands can collide; if they sit on
    /// different constant rays the sum leaves the coefficient class.
    pub fn derivative(&self, order: u32) -> Result<HardyExpr> {
        assert!((order as i64) <= D_MAX + 2, "derivative order over cap");
        let mut cur = self.clone();
        for _ in 0..order {
            let mut raw = Vec::with_capacity(cur.terms.len() * 2);
            for t in &cur.terms {
                if !t.a.is_zero() {
                    raw.push(Term {
                        coef: t.coef.mul_rat(t.a),
                        a: t.a - Rat::one(),
                        b: t.b,
                    });
                }
                if !t.b.is_zero() {
                    raw.push(Term {
                        coef: t.coef.mul_rat(t.b),
                        a: t.a - Rat::one(),
                        b: t.b - Rat::one(),
                    });
                }
            }
            // growth only shrinks under d/dt; keep the same cap as the input
            cur = HardyExpr::canonicalize_with(raw, D_MAX + 2)?;
        }
        Ok(cur)
    }

    /// Multiply by an exact coefficient. Fails only when some product
    /// coefficient leaves the closed class (two unlike constants, or a
    /// square that is not rational).
    pub fn scale_exact(&self, c: &ExactCoefficient) -> Result<HardyExpr> {
        let raw = self
            .terms
            .iter()
            .map(|t| Ok(Term { coef: t.coef.try_mul(c)?, ..*t }))
            .collect::<Result<Vec<Term>>>()?;
        Self::canonicalize(raw).map(|mut e| {
            e.t0 = e.t0.max(self.t0);
            e
        })
    }

    /// Multiply by a rational scalar.
    pub fn scale(&self, r: Rat) -> HardyExpr {
        if r.is_zero() {
            return HardyExpr { terms: Vec::new(), t0: self.t0 };
        }
        HardyExpr {
            terms: self
                .terms
                .iter()
                .map(|t| Term { coef: t.coef.mul_rat(r), ..*t })
                .collect(),
            t0: self.t0,
        }
    }

    /// Multiply by t^delta (shifts every power of t).
    pub fn shift_power(&self, delta: Rat) -> HardyExpr {
        HardyExpr {
            terms: self
                .terms
                .iter()
                .map(|t| Term { a: t.a + delta, ..*t })
                .collect(),
            t0: self.t0,
        }
    }
}

/// Outcome of the limit comparison a1(t) / a2(t) as t -> infinity.
#[derive(Debug, Clone, PartialEq)]
pub enum GrowthOrder {
    /// a1 / a2 -> 0
    Precedes,
    /// a1 / a2 -> a finite nonzero limit, described as a coefficient ratio
    Similar(SimilarRatio),
    /// |a1 / a2| -> infinity
    Dominates,
}

/// The limit of a1/a2 when both leading (a, b) pairs agree: the ratio of the
/// two leading coefficients. `exact()` simplifies it into a single
/// coefficient when the constants cancel or the denominator is rational.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimilarRatio {
    pub num: ExactCoefficient,
    pub den: ExactCoefficient,
}

impl SimilarRatio {
    pub fn exact(&self) -> Option<ExactCoefficient> {
        if self.num.kappa == self.den.kappa {
            return Some(ExactCoefficient::rational(self.num.q / self.den.q));
        }
        if self.den.kappa.is_none() {
            return Some(ExactCoefficient {
                q: self.num.q / self.den.q,
                kappa: self.num.kappa,
            });
        }
        None
    }

    pub fn as_f64(&self) -> f64 {
        self.num.as_f64() / self.den.as_f64()
    }
}

/// Compare growth by the leading (a, b) pairs, lexicographically.
pub fn growth_compare(e1: &HardyExpr, e2: &HardyExpr) -> GrowthOrder {
    let l1 = e1.terms.first().expect("growth_compare needs nonzero input");
    let l2 = e2.terms.first().expect("growth_compare needs nonzero input");
    match (l1.a, l1.b).cmp(&(l2.a, l2.b)) {
        std::cmp::Ordering::Less => GrowthOrder::Precedes,
        std::cmp::Ordering::Greater => GrowthOrder::Dominates,
        std::cmp::Ordering::Equal => GrowthOrder::Similar(SimilarRatio {
            num: l1.coef,
            den: l2.coef,
        }),
    }
}

/// Case tags of the five-way classification.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CaseId {
    I,
    II,
    III,
    IV,
    V,
}

impl fmt::Display for CaseId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            CaseId::I => "I",
            CaseId::II => "II",
            CaseId::III => "III",
            CaseId::IV => "IV",
            CaseId::V => "V",
        };
        f.write_str(s)
    }
}

/// Polynomial with rational coefficients, coeffs[i] on t^i.
#[derive(Debug, Clone, PartialEq)]
pub struct RationalPoly {
    pub coeffs: Vec<Rat>,
}

impl RationalPoly {
    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_zero())
    }

    /// lcm of coefficient denominators (1 for the zero polynomial); the
    /// progression modulus along which {p(rn+k)} is constant in n.
    pub fn denominator_lcm(&self) -> u64 {
        self.coeffs
            .iter()
            .fold(1i64, |acc, c| acc.lcm(c.denom()))
            .unsigned_abs()
    }

    /// Exact value at an integer (as a rational).
    pub fn eval_rat(&self, n: i64) -> Rat {
        let mut acc = Rat::zero();
        for &c in self.coeffs.iter().rev() {
            acc = acc * Rat::from_integer(n) + c;
        }
        acc
    }
}

impl fmt::Display for RationalPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut wrote = false;
        for (i, c) in self.coeffs.iter().enumerate().rev() {
            if c.is_zero() {
                continue;
            }
            if wrote {
                write!(f, " + ")?;
            }
            match i {
                0 => write!(f, "{}", fmt_rat(*c))?,
                1 if c.is_one() => write!(f, "t")?,
                1 => write!(f, "{}*t", fmt_rat(*c))?,
                _ if c.is_one() => write!(f, "t^{i}")?,
                _ => write!(f, "{}*t^{i}", fmt_rat(*c))?,
            }
            wrote = true;
        }
        if !wrote {
            write!(f, "0")?;
        }
        Ok(())
    }
}

/// Result of the five-case decision. For case V the polynomial part and the
/// modulus r are set and `inner` classifies the non-polynomial remainder
/// (absent when the remainder decays to zero); `d` then echoes the inner
/// degree so callers always have the torus dimension at hand.
#[derive(Debug, Clone, PartialEq)]
pub struct Classification {
    pub case_id: CaseId,
    pub d: i64,
    pub alpha: Option<ExactCoefficient>,
    pub poly_part: Option<RationalPoly>,
    pub modulus_r: Option<u64>,
    pub inner: Option<Box<Classification>>,
}

impl Classification {
    fn bare(case_id: CaseId, d: i64) -> Classification {
        Classification {
            case_id,
            d,
            alpha: None,
            poly_part: None,
            modulus_r: None,
            inner: None,
        }
    }
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "case {}, d={}", self.case_id, self.d)?;
        if let Some(a) = &self.alpha {
            write!(f, ", alpha={a}")?;
        }
        if let Some(p) = &self.poly_part {
            write!(f, ", poly={p}")?;
        }
        if let Some(r) = self.modulus_r {
            write!(f, ", r={r}")?;
        }
        if let Some(inner) = &self.inner {
            write!(f, "; inner: {inner}")?;
        }
        Ok(())
    }
}

/// Decide which of the five cases governs the expression, stripping leading
/// rational monomials into the polynomial part as they appear.
///
/// A term decays when a < 0, or a = 0 with b < 0; once the leading term
/// decays the whole tail is the epsilon part and classification stops.
pub fn classify(e: &HardyExpr) -> Result<Classification> {
    let mut poly: Vec<(i64, Rat)> = Vec::new();
    let mut rest: &[Term] = &e.terms;
    let core: Option<Classification> = loop {
        let Some(lead) = rest.first() else { break None };
        if lead.a.is_negative() || (lead.a.is_zero() && lead.b.is_negative()) {
            break None;
        }
        if !lead.a.is_integer() {
            break Some(Classification::bare(CaseId::I, lead.a.floor().to_integer()));
        }
        let ai = lead.a.to_integer();
        if lead.b > Rat::one() {
            break Some(Classification::bare(CaseId::I, ai));
        }
        if lead.b == Rat::one() {
            break Some(Classification::bare(CaseId::II, ai));
        }
        if lead.b.is_positive() {
            break Some(Classification::bare(CaseId::III, ai));
        }
        if lead.b.is_negative() {
            // ai >= 1 here: ai = 0 with b < 0 decayed above
            break Some(Classification::bare(CaseId::I, ai - 1));
        }
        // pure monomial c * t^ai
        if lead.coef.is_rational() {
            poly.push((ai, lead.coef.q));
            rest = &rest[1..];
            continue;
        }
        // irrational coefficient: the tail is automatically ≺ t^ai because
        // every remaining (a, b) is lexicographically below (ai, 0)
        let mut c = Classification::bare(CaseId::IV, ai);
        c.alpha = Some(lead.coef);
        break Some(c);
    };
    if poly.is_empty() {
        return Ok(match core {
            Some(c) => c,
            // everything decays: trivial polynomial part, remainder epsilon
            None => {
                let mut c = Classification::bare(CaseId::V, 0);
                c.poly_part = Some(RationalPoly { coeffs: Vec::new() });
                c.modulus_r = Some(1);
                c
            }
        });
    }
    let deg = poly.iter().map(|&(i, _)| i).max().unwrap() as usize;
    let mut coeffs = vec![Rat::zero(); deg + 1];
    for (i, q) in poly {
        coeffs[i as usize] = q;
    }
    let p = RationalPoly { coeffs };
    let r = p.denominator_lcm();
    let d = core.as_ref().map_or(0, |c| c.d);
    Ok(Classification {
        case_id: CaseId::V,
        d,
        alpha: None,
        poly_part: Some(p),
        modulus_r: Some(r),
        inner: core.map(Box::new),
    })
}

fn fmt_exponent(f: &mut fmt::Formatter<'_>, base: &str, e: Rat) -> fmt::Result {
    if e.is_one() {
        write!(f, "{base}")
    } else if e.is_integer() && e.is_positive() {
        write!(f, "{base}^{}", e.numer())
    } else {
        write!(f, "{base}^({})", fmt_rat(e))
    }
}

impl fmt::Display for HardyExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, t) in self.terms.iter().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            let has_factor = !t.a.is_zero() || !t.b.is_zero();
            let coef_is_bare_one = t.coef.kappa.is_none() && t.coef.q.is_one();
            if !(coef_is_bare_one && has_factor) {
                write!(f, "{}", t.coef)?;
                if has_factor {
                    write!(f, "*")?;
                }
            }
            if !t.a.is_zero() {
                fmt_exponent(f, "t", t.a)?;
                if !t.b.is_zero() {
                    write!(f, "*")?;
                }
            }
            if !t.b.is_zero() {
                fmt_exponent(f, "log(t)", t.b)?;
            }
        }
        Ok(())
    }
}
