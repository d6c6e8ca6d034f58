//! Small parsers for exact rationals and polynomial expressions in `x`.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use super::poly::RatPoly;
use crate::error::{Error, Result};

/// Parses `"3"`, `"-0.25"`, `"1.5e-3"` or `"7/3"` exactly.
pub fn parse_rational(s: &str) -> Result<BigRational> {
    let s = s.trim();
    let bad = || Error::Parse(format!("not a rational number: {s:?}"));
    if let Some((n, d)) = s.split_once('/') {
        let n = parse_rational(n)?;
        let d = parse_rational(d)?;
        if d.is_zero() {
            return Err(bad());
        }
        return Ok(n / d);
    }
    let (mant, exp) = match s.find(['e', 'E']) {
        Some(i) => (&s[..i], s[i + 1..].parse::<i32>().map_err(|_| bad())?),
        None => (s, 0),
    };
    let (neg, mant) = match mant.strip_prefix('-') {
        Some(m) => (true, m),
        None => (false, mant.strip_prefix('+').unwrap_or(mant)),
    };
    let (int, frac) = mant.split_once('.').unwrap_or((mant, ""));
    if int.is_empty() && frac.is_empty() {
        return Err(bad());
    }
    if !int.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    let digits: BigInt = format!("{int}{frac}").parse().map_err(|_| bad())?;
    let scale = exp - frac.len() as i32;
    let ten = BigInt::from(10);
    let mut q = BigRational::from_integer(digits);
    if scale >= 0 {
        q *= BigRational::from_integer(num_traits::pow(ten, scale as usize));
    } else {
        q /= BigRational::from_integer(num_traits::pow(ten, (-scale) as usize));
    }
    Ok(if neg { -q } else { q })
}

/// Parses a polynomial expression such as `"2.5x - 0.5x^2"` or `"(x - 1/2)^2"`.
pub fn parse_poly(s: &str) -> Result<RatPoly> {
    let tokens = tokenize(s)?;
    let mut p = Parser { tokens, pos: 0, src: s };
    let out = p.expr()?;
    if p.pos != p.tokens.len() {
        return Err(p.error("trailing input"));
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(BigRational),
    X,
    Op(char),
}

fn tokenize(s: &str) -> Result<Vec<Tok>> {
    let mut out = Vec::new();
    let chars: Vec<char> = s.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        match c {
            ' ' | '\t' => i += 1,
            'x' => {
                out.push(Tok::X);
                i += 1;
            }
            '+' | '-' | '*' | '/' | '^' | '(' | ')' => {
                out.push(Tok::Op(c));
                i += 1;
            }
            _ if c.is_ascii_digit() || c == '.' => {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                    i += 1;
                }
                let lit: String = chars[start..i].iter().collect();
                out.push(Tok::Num(parse_rational(&lit)?));
            }
            _ => return Err(Error::Parse(format!("unexpected character {c:?} in {s:?}"))),
        }
    }
    Ok(out)
}

struct Parser<'a> {
    tokens: Vec<Tok>,
    pos: usize,
    src: &'a str,
}

impl Parser<'_> {
    fn error(&self, what: &str) -> Error {
        Error::Parse(format!("{what} at token {} in {:?}", self.pos, self.src))
    }

    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos)
    }

    fn eat(&mut self, op: char) -> bool {
        if self.peek() == Some(&Tok::Op(op)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<RatPoly> {
        let mut acc = self.term()?;
        loop {
            if self.eat('+') {
                acc = acc.add(&self.term()?);
            } else if self.eat('-') {
                acc = acc.add(&self.term()?.neg());
            } else {
                return Ok(acc);
            }
        }
    }

    fn term(&mut self) -> Result<RatPoly> {
        let mut acc = self.unary()?;
        loop {
            if self.eat('*') {
                acc = acc.mul(&self.unary()?);
            } else if self.eat('/') {
                let d = self.unary()?;
                if d.degree() > 0 || d.0[0].is_zero() {
                    return Err(self.error("division by a non-constant or zero"));
                }
                let inv = BigRational::one() / &d.0[0];
                acc = acc.mul(&RatPoly::constant(inv));
            } else if matches!(self.peek(), Some(Tok::X) | Some(Tok::Num(_)) | Some(Tok::Op('('))) {
                acc = acc.mul(&self.power()?);
            } else {
                return Ok(acc);
            }
        }
    }

    fn unary(&mut self) -> Result<RatPoly> {
        if self.eat('-') {
            return Ok(self.unary()?.neg());
        }
        if self.eat('+') {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<RatPoly> {
        let base = self.atom()?;
        if self.eat('^') {
            match self.tokens.get(self.pos).cloned() {
                Some(Tok::Num(n)) if n.is_integer() && !n.is_negative() && n.to_integer() <= BigInt::from(64) => {
                    self.pos += 1;
                    let k: u32 = n.to_integer().try_into().map_err(|_| self.error("bad exponent"))?;
                    Ok(base.pow(k))
                }
                _ => Err(self.error("expected a small nonnegative integer exponent")),
            }
        } else {
            Ok(base)
        }
    }

    fn atom(&mut self) -> Result<RatPoly> {
        match self.tokens.get(self.pos).cloned() {
            Some(Tok::Num(q)) => {
                self.pos += 1;
                Ok(RatPoly::constant(q))
            }
            Some(Tok::X) => {
                self.pos += 1;
                Ok(RatPoly::x())
            }
            Some(Tok::Op('(')) => {
                self.pos += 1;
                let e = self.expr()?;
                if !self.eat(')') {
                    return Err(self.error("expected ')'"));
                }
                Ok(e)
            }
            _ => Err(self.error("expected a number, x or '('")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn rationals() {
        assert_eq!(parse_rational("0.66666667").unwrap(), r(66666667, 100000000));
        assert_eq!(parse_rational("-7/3").unwrap(), r(-7, 3));
        assert_eq!(parse_rational("1.5e-3").unwrap(), r(3, 2000));
        assert_eq!(parse_rational("2").unwrap(), r(2, 1));
        assert!(parse_rational("abc").is_err());
        assert!(parse_rational("1/0").is_err());
    }

    #[test]
    fn polynomials() {
        let p = parse_poly("2.5x - 0.5x^2").unwrap();
        assert_eq!(p, RatPoly(vec![r(0, 1), r(5, 2), r(-1, 2)]));
        let q = parse_poly("(x - 1/2)^2").unwrap();
        assert_eq!(q, RatPoly(vec![r(1, 4), r(-1, 1), r(1, 1)]));
        let c = parse_poly("3 * x * x / 4 + 1").unwrap();
        assert_eq!(c, RatPoly(vec![r(1, 1), r(0, 1), r(3, 4)]));
        assert_eq!(parse_poly("-x").unwrap(), RatPoly(vec![r(0, 1), r(-1, 1)]));
        assert!(parse_poly("x^x").is_err());
        assert!(parse_poly("x / x").is_err());
        assert!(parse_poly("sin(x)").is_err());
    }
}
