//! Text syntax: `expr := ['+'|'-'] term (('+'|'-') term)*`,
//! `term := factor (('*'|'/') factor)*`, `factor := number | sqrt(integer) | '(' expr ')'`.
//! Both ASCII `-` and `−` (U+2212) are accepted as minus.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;

use super::{ExactError, ExactScalar, RadicandSet};

pub fn parse_scalar(input: &str, field: &RadicandSet) -> Result<ExactScalar, ExactError> {
    let mut p = Parser {
        input,
        chars: input.char_indices().collect(),
        pos: 0,
        field,
    };
    p.skip_ws();
    if p.at_end() {
        return Err(p.error("empty expression"));
    }
    let v = p.expr()?;
    p.skip_ws();
    if !p.at_end() {
        return Err(p.error("unexpected trailing input"));
    }
    Ok(v)
}

impl std::str::FromStr for ExactScalar {
    type Err = ExactError;

    /// Parses against the default radicand set {2, 3, 5}.
    fn from_str(s: &str) -> Result<Self, ExactError> {
        parse_scalar(s, &RadicandSet::default())
    }
}

struct Parser<'a> {
    input: &'a str,
    chars: Vec<(usize, char)>,
    pos: usize,
    field: &'a RadicandSet,
}

impl Parser<'_> {
    fn at_end(&self) -> bool {
        self.pos >= self.chars.len()
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).map(|(_, c)| *c)
    }

    fn offset(&self) -> usize {
        self.chars.get(self.pos).map(|(i, _)| *i).unwrap_or(self.input.len())
    }

    fn error(&self, message: &str) -> ExactError {
        ExactError::Parse {
            input: self.input.to_string(),
            position: self.offset(),
            message: message.to_string(),
        }
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(c) if c.is_whitespace()) {
            self.pos += 1;
        }
    }

    fn eat(&mut self, c: char) -> bool {
        self.skip_ws();
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn eat_minus(&mut self) -> bool {
        self.eat('-') || self.eat('\u{2212}')
    }

    fn expr(&mut self) -> Result<ExactScalar, ExactError> {
        let mut acc = if self.eat_minus() {
            -self.term()?
        } else {
            self.eat('+');
            self.term()?
        };
        loop {
            if self.eat('+') {
                acc = &acc + &self.term()?;
            } else if self.eat_minus() {
                acc = &acc - &self.term()?;
            } else {
                return Ok(acc);
            }
        }
    }

    fn term(&mut self) -> Result<ExactScalar, ExactError> {
        let mut acc = self.factor()?;
        loop {
            if self.eat('*') {
                acc = &acc * &self.factor()?;
            } else if self.eat('/') {
                let at = self.offset();
                let rhs = self.factor()?;
                acc = acc.checked_div(&rhs).map_err(|e| match e {
                    ExactError::DivisionByZero => ExactError::Parse {
                        input: self.input.to_string(),
                        position: at,
                        message: "division by zero".into(),
                    },
                    other => other,
                })?;
            } else {
                return Ok(acc);
            }
        }
    }

    fn factor(&mut self) -> Result<ExactScalar, ExactError> {
        self.skip_ws();
        match self.peek() {
            Some('(') => {
                self.pos += 1;
                let v = self.expr()?;
                if !self.eat(')') {
                    return Err(self.error("expected ')'"));
                }
                Ok(v)
            }
            Some(c) if c.is_ascii_digit() || c == '.' => self.number(),
            Some('s') => self.sqrt(),
            Some('-') | Some('\u{2212}') => {
                self.pos += 1;
                Ok(-self.factor()?)
            }
            _ => Err(self.error("expected a number, sqrt(..) or '('")),
        }
    }

    fn digits(&mut self) -> String {
        let mut s = String::new();
        while let Some(c) = self.peek() {
            if c.is_ascii_digit() {
                s.push(c);
                self.pos += 1;
            } else {
                break;
            }
        }
        s
    }

    fn number(&mut self) -> Result<ExactScalar, ExactError> {
        let int_part = self.digits();
        let mut frac_part = String::new();
        if self.peek() == Some('.') {
            self.pos += 1;
            frac_part = self.digits();
        }
        if int_part.is_empty() && frac_part.is_empty() {
            return Err(self.error("malformed number"));
        }
        let all: String = format!("{int_part}{frac_part}");
        let numer: BigInt = if all.is_empty() {
            BigInt::zero()
        } else {
            all.parse().expect("ascii digits")
        };
        let denom = num_traits::pow(BigInt::from(10u32), frac_part.len());
        Ok(ExactScalar::from_rational(BigRational::new(numer, denom)))
    }

    fn sqrt(&mut self) -> Result<ExactScalar, ExactError> {
        for expected in "sqrt".chars() {
            if self.peek() != Some(expected) {
                return Err(self.error("expected sqrt"));
            }
            self.pos += 1;
        }
        if !self.eat('(') {
            return Err(self.error("expected '(' after sqrt"));
        }
        self.skip_ws();
        let at = self.offset();
        let d = self.digits();
        if d.is_empty() {
            return Err(self.error("sqrt takes a nonnegative integer"));
        }
        let n: u64 = d.parse().map_err(|_| ExactError::Parse {
            input: self.input.to_string(),
            position: at,
            message: "radicand too large".into(),
        })?;
        if !self.eat(')') {
            return Err(self.error("expected ')'"));
        }
        self.field.sqrt(n)
    }
}
