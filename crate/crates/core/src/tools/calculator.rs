//! Exact decimal arithmetic over `+ - * / ( )`.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, Zero};

/// Fractional digits kept when printing a result.
pub const SCALE: u32 = 10;
const MAX_DEPTH: usize = 200;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CalcError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("unexpected {found} at position {pos}")]
    Unexpected { found: String, pos: usize },
    #[error("expression nested too deeply")]
    TooDeep,
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    depth: usize,
}

impl<'a> Parser<'a> {
    fn skip_ws(&mut self) {
        while self.src.get(self.pos).is_some_and(|b| b.is_ascii_whitespace()) {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn unexpected(&self) -> CalcError {
        let found = match self.src.get(self.pos) {
            Some(_) => format!(
                "{:?}",
                String::from_utf8_lossy(&self.src[self.pos..])
                    .chars()
                    .next()
                    .unwrap_or('?')
            ),
            None => "end of input".into(),
        };
        CalcError::Unexpected {
            found,
            pos: self.pos,
        }
    }

    fn expr(&mut self) -> Result<BigRational, CalcError> {
        let mut value = self.term()?;
        while let Some(op @ (b'+' | b'-')) = self.peek() {
            self.pos += 1;
            let rhs = self.term()?;
            value = if op == b'+' { value + rhs } else { value - rhs };
        }
        Ok(value)
    }

    fn term(&mut self) -> Result<BigRational, CalcError> {
        let mut value = self.factor()?;
        while let Some(op @ (b'*' | b'/')) = self.peek() {
            self.pos += 1;
            let rhs = self.factor()?;
            if op == b'*' {
                value *= rhs;
            } else if rhs.is_zero() {
                return Err(CalcError::DivisionByZero);
            } else {
                value /= rhs;
            }
        }
        Ok(value)
    }

    fn factor(&mut self) -> Result<BigRational, CalcError> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            return Err(CalcError::TooDeep);
        }
        let result = match self.peek() {
            Some(b'-') => {
                self.pos += 1;
                self.factor().map(|v| -v)
            }
            Some(b'+') => {
                self.pos += 1;
                self.factor()
            }
            Some(b'(') => {
                self.pos += 1;
                let value = self.expr()?;
                if self.peek() != Some(b')') {
                    return Err(self.unexpected());
                }
                self.pos += 1;
                Ok(value)
            }
            Some(b) if b.is_ascii_digit() || b == b'.' => self.number(),
            _ => Err(self.unexpected()),
        };
        self.depth -= 1;
        result
    }

    fn number(&mut self) -> Result<BigRational, CalcError> {
        let start = self.pos;
        let mut digits = String::new();
        let mut frac_len = 0u32;
        let mut seen_dot = false;
        while let Some(&b) = self.src.get(self.pos) {
            if b.is_ascii_digit() {
                digits.push(b as char);
                if seen_dot {
                    frac_len += 1;
                }
            } else if b == b'.' && !seen_dot {
                seen_dot = true;
            } else {
                break;
            }
            self.pos += 1;
        }
        if digits.is_empty() {
            self.pos = start;
            return Err(self.unexpected());
        }
        let numer: BigInt = digits.parse().expect("ascii digits");
        let denom = BigInt::from(10u8).pow(frac_len);
        Ok(BigRational::new(numer, denom))
    }
}

/// Evaluates an arithmetic expression exactly.
pub fn evaluate(expr: &str) -> Result<BigRational, CalcError> {
    let mut parser = Parser {
        src: expr.as_bytes(),
        pos: 0,
        depth: 0,
    };
    let value = parser.expr()?;
    if parser.peek().is_some() {
        return Err(parser.unexpected());
    }
    Ok(value)
}

/// Decimal rendering rounded half away from zero to [`SCALE`] places,
/// trailing zeros removed.
pub fn format_decimal(value: &BigRational) -> String {
    let scale = BigInt::from(10u8).pow(SCALE);
    let scaled = value * BigRational::from_integer(scale.clone());
    let magnitude = scaled.abs();
    let mut units = magnitude.floor().to_integer();
    let remainder = magnitude - BigRational::from_integer(units.clone());
    if remainder * BigInt::from(2u8) >= BigRational::from_integer(BigInt::from(1u8)) {
        units += 1;
    }
    let negative = value.is_negative() && !units.is_zero();
    let int_part = &units / &scale;
    let frac_part = &units % &scale;
    let mut out = String::new();
    if negative {
        out.push('-');
    }
    out.push_str(&int_part.to_string());
    if !frac_part.is_zero() {
        let frac = format!("{:0>width$}", frac_part.to_string(), width = SCALE as usize);
        out.push('.');
        out.push_str(frac.trim_end_matches('0'));
    }
    out
}

pub fn calculate(expr: &str) -> Result<String, CalcError> {
    evaluate(expr).map(|v| format_decimal(&v))
}
