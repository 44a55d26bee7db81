//! Text form of word polynomials: `I[1] - h^(-1/2) * I[1,1]`.
//!
//! Grammar (whitespace insensitive):
//!
//! ```text
//! expr   := ['+'|'-'] term (('+'|'-') term)*
//! term   := unary (('*'|'/') unary)*
//! unary  := '-' unary | atom
//! atom   := INT | 'h' ['^' exp] | ('I'|'J') '[' [INT (',' INT)*] ']' | '(' expr ')'
//! exp    := INT | '(' ['-'] INT ['/' INT] ')'
//! ```
//!
//! `I[...]` and `J[...]` both denote a word read under the interpretation the
//! caller parses with; the empty word is written `1`. Divisors must be
//! monomials in `h`.

use std::fmt;

use num_bigint::BigInt;
use num_traits::{One, Zero};

use super::{split_sign, HPoly, Interp, StochError, WordPoly};
use crate::Rational;

pub(super) fn write_terms(f: &mut fmt::Formatter<'_>, poly: &WordPoly, sym: &str) -> fmt::Result {
    let mut first = true;
    for (word, coeff) in poly.terms() {
        for (k, c) in coeff.terms() {
            let (neg, abs) = split_sign(c);
            let mut factors: Vec<String> = Vec::new();
            if !abs.is_one() {
                factors.push(abs.to_string());
            }
            match k {
                0 => {}
                2 => factors.push("h".to_string()),
                k if k % 2 == 0 && k > 0 => factors.push(format!("h^{}", k / 2)),
                k if k % 2 == 0 => factors.push(format!("h^({})", k / 2)),
                k => factors.push(format!("h^({k}/2)")),
            }
            if !word.is_empty() {
                let letters: Vec<String> = word.letters().iter().map(|l| l.to_string()).collect();
                factors.push(format!("{sym}[{}]", letters.join(",")));
            }
            if factors.is_empty() {
                factors.push("1".to_string());
            }
            let body = factors.join(" * ");
            match (first, neg) {
                (true, false) => write!(f, "{body}")?,
                (true, true) => write!(f, "-{body}")?,
                (false, false) => write!(f, " + {body}")?,
                (false, true) => write!(f, " - {body}")?,
            }
            first = false;
        }
    }
    if first {
        write!(f, "0")?;
    }
    Ok(())
}

/// Parses an expression into a [`WordPoly`] read under `interp`.
pub fn parse_expr(src: &str, interp: Interp) -> Result<WordPoly, StochError> {
    let mut p = Parser { src: src.as_bytes(), pos: 0, interp };
    let out = p.expr()?;
    p.skip_ws();
    if p.pos < p.src.len() {
        return Err(p.error("unexpected trailing input"));
    }
    Ok(out)
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    interp: Interp,
}

impl Parser<'_> {
    fn error(&self, msg: &str) -> StochError {
        StochError::Parse { pos: self.pos, msg: msg.to_string() }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn eat(&mut self, b: u8) -> bool {
        if self.peek() == Some(b) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, b: u8) -> Result<(), StochError> {
        if self.eat(b) {
            Ok(())
        } else {
            Err(self.error(&format!("expected '{}'", b as char)))
        }
    }

    fn integer(&mut self) -> Result<BigInt, StochError> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.error("expected an integer"));
        }
        Ok(std::str::from_utf8(&self.src[start..self.pos]).unwrap().parse().unwrap())
    }

    fn small_int(&mut self) -> Result<i64, StochError> {
        let at = self.pos;
        let n = self.integer()?;
        i64::try_from(n).map_err(|_| StochError::Parse { pos: at, msg: "integer too large".into() })
    }

    fn expr(&mut self) -> Result<WordPoly, StochError> {
        let mut acc = if self.eat(b'-') {
            -&self.term()?
        } else {
            self.eat(b'+');
            self.term()?
        };
        loop {
            if self.eat(b'+') {
                acc = acc.try_add(&self.term()?)?;
            } else if self.eat(b'-') {
                acc = acc.try_sub(&self.term()?)?;
            } else {
                return Ok(acc);
            }
        }
    }

    fn term(&mut self) -> Result<WordPoly, StochError> {
        let mut acc = self.unary()?;
        loop {
            if self.eat(b'*') {
                acc = acc.product(&self.unary()?)?;
            } else if self.peek() == Some(b'/') {
                let at = self.pos;
                self.pos += 1;
                let d = self.unary()?;
                let inv = invert_monomial(&d).ok_or(StochError::Parse {
                    pos: at,
                    msg: "divisor must be a nonzero monomial in h".into(),
                })?;
                acc = acc.mul_hpoly(&inv);
            } else {
                return Ok(acc);
            }
        }
    }

    fn unary(&mut self) -> Result<WordPoly, StochError> {
        if self.eat(b'-') {
            Ok(-&self.unary()?)
        } else {
            self.atom()
        }
    }

    fn atom(&mut self) -> Result<WordPoly, StochError> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(b')')?;
                Ok(e)
            }
            Some(b'h') => {
                self.pos += 1;
                let k = if self.eat(b'^') { self.exponent()? } else { 2 };
                Ok(WordPoly::scalar(self.interp, HPoly::monomial(Rational::one(), k)))
            }
            Some(b'I') | Some(b'J') => {
                self.pos += 1;
                self.expect(b'[')?;
                let mut letters = Vec::new();
                if !self.eat(b']') {
                    loop {
                        let at = self.pos;
                        let l = self.small_int()?;
                        let l = u8::try_from(l)
                            .map_err(|_| StochError::Parse { pos: at, msg: "letter too large".into() })?;
                        letters.push(l);
                        if self.eat(b']') {
                            break;
                        }
                        self.expect(b',')?;
                    }
                }
                Ok(WordPoly::word(self.interp, &letters))
            }
            Some(b) if b.is_ascii_digit() => {
                let n = self.integer()?;
                Ok(WordPoly::scalar(self.interp, HPoly::monomial(Rational::from_integer(n), 0)))
            }
            _ => Err(self.error("expected a number, h, I[...] or '('")),
        }
    }

    /// Exponent of `h`, returned in powers of √h.
    fn exponent(&mut self) -> Result<i64, StochError> {
        if self.eat(b'(') {
            let neg = self.eat(b'-');
            let num = self.small_int()?;
            let den = if self.eat(b'/') { self.small_int()? } else { 1 };
            self.expect(b')')?;
            let num = if neg { -num } else { num };
            match den {
                1 => Ok(2 * num),
                2 => Ok(num),
                _ => Err(self.error("exponent must be a multiple of 1/2")),
            }
        } else {
            let neg = self.eat(b'-');
            let n = self.small_int()?;
            Ok(if neg { -2 * n } else { 2 * n })
        }
    }
}

fn invert_monomial(p: &WordPoly) -> Option<HPoly> {
    if p.words().next().is_some() {
        return None;
    }
    let (c, k) = p.scalar_part().as_monomial()?;
    if c.is_zero() {
        return None;
    }
    Some(HPoly::monomial(c.recip(), -k))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> WordPoly {
        parse_expr(s, Interp::Ito).unwrap()
    }

    #[test]
    fn display_format() {
        let p = parse("3/2 * h^(1/2) * I[1,1,0]");
        assert_eq!(p.to_string(), "3/2 * h^(1/2) * I[1,1,0]");
        assert_eq!(parse("I[1] - h^(-1/2)*I[1,1]").to_string(), "I[1] - h^(-1/2) * I[1,1]");
        assert_eq!(parse("1").to_string(), "1");
        assert_eq!(parse("0").to_string(), "0");
        assert_eq!(parse("h^3/6").to_string(), "1/6 * h^3");
        assert_eq!(parse("-h").to_string(), "-h");
    }

    #[test]
    fn parse_display_round_trip() {
        for s in [
            "I[1] - h^(-1/2) * I[1,1]",
            "1/2 * h + I[1,1]",
            "h^(1/2) * I[2,1] - 5/3 * I[0,1]",
            "-h^(-1) * I[1,2,1]",
        ] {
            let p = parse(s);
            assert_eq!(parse(&p.to_string()), p, "{s}");
        }
    }

    #[test]
    fn division_and_products() {
        assert_eq!(parse("I[1,1]/h^(1/2)"), parse("h^(-1/2)*I[1,1]"));
        assert_eq!(parse("I[1]*I[1]"), parse("2*I[1,1] + h"));
        assert_eq!(parse("h*I[1] - I[0,1]"), parse("I[1,0]"));
        assert!(parse_expr("I[1]/I[1]", Interp::Ito).is_err());
        assert!(parse_expr("I[1]/0", Interp::Ito).is_err());
    }

    #[test]
    fn parse_errors_carry_position() {
        match parse_expr("I[1] + * 2", Interp::Ito) {
            Err(StochError::Parse { pos, .. }) => assert_eq!(pos, 7),
            other => panic!("unexpected {other:?}"),
        }
        assert!(parse_expr("h^(1/3)", Interp::Ito).is_err());
        assert!(parse_expr("I[1", Interp::Ito).is_err());
        assert!(parse_expr("I[1] )", Interp::Ito).is_err());
    }
}
