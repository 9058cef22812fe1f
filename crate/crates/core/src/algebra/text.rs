//! Text form of a series: a signed sum of terms `coeff * gen^k * ...`,
//! printed in canonical monomial order with `p/q` coefficients.

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use super::chart::ChartRef;
use super::monomial::Monomial;
use super::series::{Series, Trunc};
use crate::error::{Error, Result};

pub fn format_rational(q: &BigRational) -> String {
    if q.denom().is_one() {
        q.numer().to_string()
    } else {
        format!("{}/{}", q.numer(), q.denom())
    }
}

/// Parses `p`, `-p` or `p/q`. A zero denominator is a semantic error.
pub fn parse_rational(s: &str) -> Result<BigRational> {
    let s = s.trim();
    let bad = || Error::Semantic {
        block: "rational".into(),
        message: format!("`{s}` is not a rational of the form p/q"),
    };
    let (n, d) = match s.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (s, "1"),
    };
    let n: BigInt = n.parse().map_err(|_| bad())?;
    let d: BigInt = d.parse().map_err(|_| bad())?;
    if d.is_zero() {
        return Err(Error::Semantic {
            block: "rational".into(),
            message: format!("`{s}` has zero denominator"),
        });
    }
    Ok(BigRational::new(n, d))
}

pub(crate) fn format_monomial(m: &Monomial, chart: &ChartRef) -> String {
    let mut parts = Vec::new();
    for (i, &e) in m.exponents().iter().enumerate() {
        match e {
            0 => {}
            1 => parts.push(chart.generator(i).name.clone()),
            _ => parts.push(format!("{}^{}", chart.generator(i).name, e)),
        }
    }
    parts.join(" * ")
}

impl fmt::Display for Series {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        for (n, (m, c)) in self.terms().enumerate() {
            let negative = c.is_negative();
            let abs = c.abs();
            if n == 0 {
                if negative {
                    write!(f, "-")?;
                }
            } else {
                write!(f, "{}", if negative { " - " } else { " + " })?;
            }
            let mono = format_monomial(m, self.chart());
            if m.is_one() {
                write!(f, "{}", format_rational(&abs))?;
            } else if abs.is_one() {
                write!(f, "{mono}")?;
            } else {
                write!(f, "{} * {}", format_rational(&abs), mono)?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(BigInt),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
}

struct Lexer<'a> {
    text: &'a str,
    toks: Vec<(Tok, usize)>,
}

impl<'a> Lexer<'a> {
    fn run(text: &'a str) -> Result<Vec<(Tok, usize)>> {
        let mut lx = Lexer { text, toks: Vec::new() };
        let chars: Vec<(usize, char)> = text.char_indices().collect();
        let mut i = 0;
        while i < chars.len() {
            let (pos, c) = chars[i];
            match c {
                c if c.is_whitespace() => i += 1,
                '+' | '-' | '*' | '/' | '^' | '(' | ')' => {
                    let tok = match c {
                        '+' => Tok::Plus,
                        '-' => Tok::Minus,
                        '*' => Tok::Star,
                        '/' => Tok::Slash,
                        '^' => Tok::Caret,
                        '(' => Tok::LParen,
                        _ => Tok::RParen,
                    };
                    lx.toks.push((tok, pos));
                    i += 1;
                }
                c if c.is_ascii_digit() => {
                    let start = i;
                    while i < chars.len() && chars[i].1.is_ascii_digit() {
                        i += 1;
                    }
                    let end = chars.get(i).map_or(text.len(), |x| x.0);
                    let n: BigInt = text[pos..end].parse().expect("digits");
                    lx.toks.push((Tok::Num(n), chars[start].0));
                }
                c if c.is_alphabetic() || c == '_' => {
                    while i < chars.len() && (chars[i].1.is_alphanumeric() || chars[i].1 == '_') {
                        i += 1;
                    }
                    let end = chars.get(i).map_or(text.len(), |x| x.0);
                    lx.toks.push((Tok::Ident(text[pos..end].to_string()), pos));
                }
                other => return Err(lx.error(pos, format!("unexpected character `{other}`"))),
            }
        }
        Ok(lx.toks)
    }

    fn error(&self, pos: usize, message: String) -> Error {
        position_error(self.text, pos, message)
    }
}

fn position_error(text: &str, pos: usize, message: String) -> Error {
    let before = &text[..pos.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    Error::Parse { line, column, message }
}

struct Parser<'a> {
    text: &'a str,
    toks: Vec<(Tok, usize)>,
    pos: usize,
    chart: ChartRef,
    trunc: Trunc,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.0)
    }

    fn here(&self) -> usize {
        self.toks.get(self.pos).map_or(self.text.len(), |t| t.1)
    }

    fn err(&self, message: impl Into<String>) -> Error {
        position_error(self.text, self.here(), message.into())
    }

    fn expr(&mut self) -> Result<Series> {
        let mut acc = Series::zero(&self.chart, self.trunc);
        let mut first = true;
        loop {
            let negative = match self.peek() {
                Some(Tok::Plus) => {
                    self.pos += 1;
                    false
                }
                Some(Tok::Minus) => {
                    self.pos += 1;
                    true
                }
                _ if first => false,
                _ => break,
            };
            let t = self.product()?;
            acc = if negative { &acc - &t } else { &acc + &t };
            first = false;
        }
        Ok(acc)
    }

    fn product(&mut self) -> Result<Series> {
        let mut acc = self.factor()?;
        while let Some(Tok::Star) = self.peek() {
            self.pos += 1;
            let f = self.factor()?;
            acc = &acc * &f;
        }
        Ok(acc)
    }

    fn factor(&mut self) -> Result<Series> {
        let base = match self.toks.get(self.pos).cloned() {
            Some((Tok::Num(n), _)) => {
                self.pos += 1;
                let mut q = BigRational::from_integer(n);
                if let Some(Tok::Slash) = self.peek() {
                    self.pos += 1;
                    match self.toks.get(self.pos).cloned() {
                        Some((Tok::Num(d), _)) => {
                            if d.is_zero() {
                                return Err(Error::Semantic {
                                    block: "rational".into(),
                                    message: "zero denominator".into(),
                                });
                            }
                            self.pos += 1;
                            q /= BigRational::from_integer(d);
                        }
                        _ => return Err(self.err("expected denominator")),
                    }
                }
                Series::constant(&self.chart, self.trunc, q)
            }
            Some((Tok::Ident(name), pos)) => {
                self.pos += 1;
                let idx = self
                    .chart
                    .index_of(&name)
                    .map_err(|_| position_error(self.text, pos, format!("unknown generator `{name}`")))?;
                Series::generator(&self.chart, self.trunc, idx)
            }
            Some((Tok::LParen, _)) => {
                self.pos += 1;
                let inner = self.expr()?;
                match self.peek() {
                    Some(Tok::RParen) => self.pos += 1,
                    _ => return Err(self.err("expected `)`")),
                }
                inner
            }
            Some(_) => return Err(self.err("expected a number, generator or `(`")),
            None => return Err(self.err("unexpected end of input")),
        };
        if let Some(Tok::Caret) = self.peek() {
            self.pos += 1;
            match self.toks.get(self.pos).cloned() {
                Some((Tok::Num(k), _)) => {
                    self.pos += 1;
                    let k: u32 = k.try_into().map_err(|_| self.err("exponent too large"))?;
                    return Ok(base.pow(k));
                }
                _ => return Err(self.err("expected exponent")),
            }
        }
        Ok(base)
    }
}

/// Parses the text form over `chart`. Products are formed in the ring, so
/// out-of-order odd factors pick up their Koszul signs.
pub fn parse_series(text: &str, chart: &ChartRef, trunc: Trunc) -> Result<Series> {
    let toks = Lexer::run(text)?;
    let mut p = Parser {
        text,
        toks,
        pos: 0,
        chart: chart.clone(),
        trunc,
    };
    if p.toks.is_empty() {
        return Err(p.err("empty series"));
    }
    let s = p.expr()?;
    if p.pos != p.toks.len() {
        return Err(p.err("trailing input"));
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::chart::GradedChart;

    fn chart() -> ChartRef {
        GradedChart::from_degrees(&[("z", 0), ("th", 1), ("eta", 1)]).unwrap()
    }

    #[test]
    fn print_parse_roundtrip() {
        let c = chart();
        let s = parse_series("3/2 * z^2 * dz - eth*th + 1 - ez", &c, Trunc::DEFAULT).unwrap();
        let printed = s.to_string();
        let again = parse_series(&printed, &c, Trunc::DEFAULT).unwrap();
        assert_eq!(s, again);
        assert_eq!(printed, again.to_string());
    }

    #[test]
    fn out_of_order_odd_factors_pick_up_sign() {
        let c = chart();
        let a = parse_series("eta * th", &c, Trunc::DEFAULT).unwrap();
        let b = parse_series("-th * eta", &c, Trunc::DEFAULT).unwrap();
        assert_eq!(a, b);
        assert_eq!(b.to_string(), "-th * eta");
    }

    #[test]
    fn zero_denominator_is_semantic_error() {
        let c = chart();
        assert!(matches!(
            parse_series("1/0 * z", &c, Trunc::DEFAULT),
            Err(Error::Semantic { .. })
        ));
        assert!(matches!(parse_rational("1/0"), Err(Error::Semantic { .. })));
    }

    #[test]
    fn parse_errors_carry_position() {
        let c = chart();
        match parse_series("z +\n  w", &c, Trunc::DEFAULT) {
            Err(Error::Parse { line, column, .. }) => assert_eq!((line, column), (2, 3)),
            other => panic!("unexpected {other:?}"),
        }
    }
}
