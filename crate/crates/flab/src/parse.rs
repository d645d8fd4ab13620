//! Parser for the expression mini-language:
//!
//!   expr   := term ('+' term)*
//!   term   := [coef '*'] factor ('*' factor)* | coef
//!   factor := 't' ['^' exp] | 'log(t)' ['^' exp]
//!   exp    := int | '(' rat ')'
//!   coef   := rat ['*' const] | const
//!   const  := 'sqrt2' | 'sqrt3' | 'sqrt5' | 'phi' | 'pi' | 'e'
//!   rat    := int ['/' int]
//!
//! Rational exponents must be parenthesized: "t^(3/2)". "t^3/2" fails at the
//! stray '/' rather than silently meaning t^3 divided by 2.

use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::exact::{ExactCoefficient, Kappa, Rat};
use crate::hardy::{HardyExpr, Term};

pub fn parse_expr(src: &str) -> Result<HardyExpr> {
    let mut p = Parser { src: src.as_bytes(), pos: 0 };
    let mut raw = Vec::new();
    loop {
        raw.push(p.term()?);
        p.skip_ws();
        if p.eof() {
            break;
        }
        p.expect(b'+')?;
    }
    HardyExpr::canonicalize(raw)
}

/// Parses a bare coefficient ("1/2", "sqrt2", "-3/4*phi") with no t or log
/// factors. Job files spell rotation angles and Beatty slopes this way.
pub fn parse_coefficient(src: &str) -> Result<ExactCoefficient> {
    let mut p = Parser { src: src.as_bytes(), pos: 0 };
    let term = p.term()?;
    p.skip_ws();
    if !p.eof() {
        return p.err("trailing input after coefficient");
    }
    if !term.a.is_zero() || !term.b.is_zero() {
        return p.err("expected a constant, not a function of t");
    }
    Ok(term.coef)
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn err<T>(&self, msg: impl Into<String>) -> Result<T> {
        Err(Error::Parse { offset: self.pos, msg: msg.into() })
    }

    fn skip_ws(&mut self) {
        while self.src.get(self.pos).is_some_and(|c| c.is_ascii_whitespace()) {
            self.pos += 1;
        }
    }

    fn eof(&self) -> bool {
        self.pos >= self.src.len()
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn expect(&mut self, c: u8) -> Result<()> {
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            self.err(format!("expected '{}'", c as char))
        }
    }

    fn int(&mut self) -> Result<i64> {
        self.skip_ws();
        let start = self.pos;
        if self.src.get(self.pos) == Some(&b'-') {
            self.pos += 1;
        }
        let digits_from = self.pos;
        while self.src.get(self.pos).is_some_and(|c| c.is_ascii_digit()) {
            self.pos += 1;
        }
        if self.pos == digits_from {
            return self.err("expected integer");
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        match text.parse::<i64>() {
            Ok(v) => Ok(v),
            Err(_) => self.err("integer out of range"),
        }
    }

    fn rat(&mut self) -> Result<Rat> {
        let n = self.int()?;
        if self.peek_no_ws() == Some(b'/') {
            self.pos += 1;
            let d = self.int()?;
            if d == 0 {
                return self.err("zero denominator");
            }
            Ok(Rat::new(n, d))
        } else {
            Ok(Rat::from_integer(n))
        }
    }

    /// Like peek but without skipping whitespace first ("1 / 2" is not a
    /// rational; "1/2" is).
    fn peek_no_ws(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn ident(&mut self) -> Result<&'a str> {
        self.skip_ws();
        let start = self.pos;
        while self.src.get(self.pos).is_some_and(|c| c.is_ascii_alphanumeric()) {
            self.pos += 1;
        }
        if self.pos == start {
            return self.err("expected name");
        }
        Ok(std::str::from_utf8(&self.src[start..self.pos]).unwrap())
    }

    /// Exponent after '^': bare integer or parenthesized rational.
    fn exponent(&mut self) -> Result<Rat> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let r = self.rat()?;
                self.expect(b')')?;
                Ok(r)
            }
            _ => Ok(Rat::from_integer(self.int()?)),
        }
    }

    fn term(&mut self) -> Result<Term> {
        let mut q: Option<Rat> = None;
        let mut kappa: Option<Kappa> = None;
        let mut a = Rat::zero();
        let mut b = Rat::zero();
        let mut first = true;
        loop {
            match self.peek() {
                Some(c) if first && (c.is_ascii_digit() || c == b'-') => {
                    q = Some(self.rat()?);
                }
                Some(c) if c.is_ascii_alphabetic() => {
                    let at = self.pos;
                    let name = self.ident()?;
                    match name {
                        "t" => {
                            a += self.factor_exponent()?;
                        }
                        "log" => {
                            self.expect(b'(')?;
                            let inner = self.ident()?;
                            if inner != "t" {
                                return self.err("log argument must be t");
                            }
                            self.expect(b')')?;
                            b += self.factor_exponent()?;
                        }
                        _ => match Kappa::from_name(name) {
                            Some(k) if kappa.is_none() => kappa = Some(k),
                            Some(_) => {
                                self.pos = at;
                                return self.err("more than one named constant in a term");
                            }
                            None => {
                                self.pos = at;
                                return self.err(format!("unknown name '{name}'"));
                            }
                        },
                    }
                }
                _ => return self.err("expected coefficient or factor"),
            }
            first = false;
            if self.peek() == Some(b'*') {
                self.pos += 1;
            } else {
                break;
            }
        }
        let coef = ExactCoefficient {
            q: q.unwrap_or_else(Rat::one),
            kappa,
        };
        Ok(Term { coef, a, b })
    }

    fn factor_exponent(&mut self) -> Result<Rat> {
        if self.peek() == Some(b'^') {
            self.pos += 1;
            self.exponent()
        } else {
            Ok(Rat::one())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hardy::{classify, CaseId};

    #[test]
    fn parses_canonical_examples() {
        let e = parse_expr("sqrt2*t^2 + t^(3/2)").unwrap();
        assert_eq!(e.terms().len(), 2);
        assert_eq!(e.terms()[0].coef.kappa, Some(Kappa::Sqrt2));
        assert_eq!(e.terms()[1].a, Rat::new(3, 2));

        let e = parse_expr("1/2*t^2 + t^(2/3)").unwrap();
        let c = classify(&e).unwrap();
        assert_eq!(c.case_id, CaseId::V);

        let e = parse_expr("t*log(t)").unwrap();
        assert_eq!(e.terms()[0].b, Rat::one());

        let e = parse_expr("t*log(t)^(1/16)").unwrap();
        assert_eq!(e.terms()[0].b, Rat::new(1, 16));

        let e = parse_expr("log(t)^(-1/2)").unwrap();
        assert_eq!(e.terms()[0].b, Rat::new(-1, 2));
        assert_eq!(e.terms()[0].a, Rat::zero());
    }

    #[test]
    fn rejects_unparenthesized_fraction_exponent() {
        assert!(parse_expr("sqrt2*t^2 + t^3/2").is_err());
    }

    #[test]
    fn rejects_garbage() {
        assert!(parse_expr("").is_err());
        assert!(parse_expr("t^").is_err());
        assert!(parse_expr("u^2").is_err());
        assert!(parse_expr("sqrt2*sqrt3").is_err());
        assert!(parse_expr("1/0*t").is_err());
        assert!(parse_expr("t +").is_err());
        assert!(parse_expr("log(u)").is_err());
    }

    #[test]
    fn negative_and_merged_terms() {
        let e = parse_expr("3*t + -1*t").unwrap();
        assert_eq!(e.terms().len(), 1);
        assert_eq!(e.terms()[0].coef.q, Rat::from_integer(2));

        let e = parse_expr("t + -1*t").unwrap();
        assert!(e.is_zero());
    }

    #[test]
    fn display_parse_round_trip() {
        for src in [
            "sqrt2*t^2 + t^(3/2)",
            "3*t*log(t)",
            "t*log(t)^(1/16)",
            "1/2*t^2 + t^(2/3)",
            "phi*t + 5",
            "t^(5/2)*log(t)^(-2)",
        ] {
            let e = parse_expr(src).unwrap();
            let shown = e.to_string();
            let e2 = parse_expr(&shown).unwrap();
            assert_eq!(e, e2, "{src} -> {shown}");
        }
    }

    #[test]
    fn rejects_multiplied_rationals_after_first_position() {
        // "t*2" puts a rational in factor position
        assert!(parse_expr("t*2").is_err());
    }
}
