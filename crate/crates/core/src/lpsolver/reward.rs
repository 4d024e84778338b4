//! Reward expressions for the command line.
//!
//! Grammar (whitespace insensitive):
//!
//! ```text
//! expr   := term (("+" | "-") term)*
//! term   := factor ("*" factor)*
//! factor := rational | "-" factor | "(" expr ")"
//!         | "indicator(t=K, OP a)"      OP in <=, <, >=, >, ==
//!         | "call(t, b)" | "put(t, b)" | "abs(t, b)"
//!         | "x(t)" | "tanh_sm(t)"
//! ```
//!
//! `call(t, b) = (x_t - b)^+`, `put(t, b) = (b - x_t)^+`, `abs(t, b) = |x_t - b|`
//! and `tanh_sm(t) = tanh(x_0) * sqrt(1 + x_t^2)`, which is only available in
//! float mode.

use num_traits::{Signed, Zero};

use crate::error::{MotError, Result};
use crate::rational::{parse_rational, positive_part, to_f64, Rational};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Comparison {
    Le,
    Lt,
    Ge,
    Gt,
    Eq,
}

impl Comparison {
    fn holds(self, x: &Rational, a: &Rational) -> bool {
        match self {
            Comparison::Le => x <= a,
            Comparison::Lt => x < a,
            Comparison::Ge => x >= a,
            Comparison::Gt => x > a,
            Comparison::Eq => x == a,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RewardExpr {
    Const(Rational),
    Coord(usize),
    Indicator { t: usize, op: Comparison, a: Rational },
    Call { t: usize, b: Rational },
    Put { t: usize, b: Rational },
    Abs { t: usize, b: Rational },
    TanhSm(usize),
    Neg(Box<RewardExpr>),
    Sum(Vec<RewardExpr>),
    Product(Vec<RewardExpr>),
}

impl RewardExpr {
    pub fn parse(src: &str) -> Result<Self> {
        let mut p = Parser { src, pos: 0 };
        let e = p.expr()?;
        p.skip_ws();
        if p.pos != src.len() {
            return Err(p.error("trailing input"));
        }
        Ok(e)
    }

    /// Largest time index referenced.
    pub fn max_time(&self) -> usize {
        match self {
            RewardExpr::Const(_) => 0,
            RewardExpr::Coord(t)
            | RewardExpr::TanhSm(t)
            | RewardExpr::Indicator { t, .. }
            | RewardExpr::Call { t, .. }
            | RewardExpr::Put { t, .. }
            | RewardExpr::Abs { t, .. } => *t,
            RewardExpr::Neg(e) => e.max_time(),
            RewardExpr::Sum(v) | RewardExpr::Product(v) => v.iter().map(|e| e.max_time()).max().unwrap_or(0),
        }
    }

    pub fn is_exact(&self) -> bool {
        match self {
            RewardExpr::TanhSm(_) => false,
            RewardExpr::Neg(e) => e.is_exact(),
            RewardExpr::Sum(v) | RewardExpr::Product(v) => v.iter().all(|e| e.is_exact()),
            _ => true,
        }
    }

    pub fn eval_exact(&self, x: &[Rational]) -> Result<Rational> {
        Ok(match self {
            RewardExpr::Const(c) => c.clone(),
            RewardExpr::Coord(t) => x[*t].clone(),
            RewardExpr::Indicator { t, op, a } => {
                if op.holds(&x[*t], a) {
                    Rational::from_integer(1.into())
                } else {
                    Rational::zero()
                }
            }
            RewardExpr::Call { t, b } => positive_part(&(&x[*t] - b)),
            RewardExpr::Put { t, b } => positive_part(&(b - &x[*t])),
            RewardExpr::Abs { t, b } => (&x[*t] - b).abs(),
            RewardExpr::TanhSm(_) => {
                return Err(MotError::InexactReward("tanh_sm needs float mode".into()));
            }
            RewardExpr::Neg(e) => -e.eval_exact(x)?,
            RewardExpr::Sum(v) => {
                let mut acc = Rational::zero();
                for e in v {
                    acc += e.eval_exact(x)?;
                }
                acc
            }
            RewardExpr::Product(v) => {
                let mut acc = Rational::from_integer(1.into());
                for e in v {
                    acc *= e.eval_exact(x)?;
                }
                acc
            }
        })
    }

    pub fn eval_f64(&self, x: &[Rational]) -> f64 {
        match self {
            RewardExpr::TanhSm(t) => to_f64(&x[0]).tanh() * (1.0 + to_f64(&x[*t]).powi(2)).sqrt(),
            RewardExpr::Neg(e) => -e.eval_f64(x),
            RewardExpr::Sum(v) => v.iter().map(|e| e.eval_f64(x)).sum(),
            RewardExpr::Product(v) => v.iter().map(|e| e.eval_f64(x)).product(),
            exact => to_f64(&exact.eval_exact(x).expect("exact leaf")),
        }
    }
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn error(&self, msg: &str) -> MotError {
        MotError::parse(format!("reward:{}", self.pos), msg)
    }

    fn skip_ws(&mut self) {
        while self.rest().starts_with(char::is_whitespace) {
            self.pos += 1;
        }
    }

    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn eat(&mut self, token: &str) -> bool {
        self.skip_ws();
        if self.rest().starts_with(token) {
            self.pos += token.len();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, token: &str) -> Result<()> {
        if self.eat(token) {
            Ok(())
        } else {
            Err(self.error(&format!("expected {token:?}")))
        }
    }

    fn expr(&mut self) -> Result<RewardExpr> {
        let mut terms = vec![self.term()?];
        loop {
            if self.eat("+") {
                terms.push(self.term()?);
            } else if self.eat("-") {
                terms.push(RewardExpr::Neg(Box::new(self.term()?)));
            } else {
                break;
            }
        }
        Ok(if terms.len() == 1 {
            terms.pop().expect("one term")
        } else {
            RewardExpr::Sum(terms)
        })
    }

    fn term(&mut self) -> Result<RewardExpr> {
        let mut factors = vec![self.factor()?];
        while self.eat("*") {
            factors.push(self.factor()?);
        }
        Ok(if factors.len() == 1 {
            factors.pop().expect("one factor")
        } else {
            RewardExpr::Product(factors)
        })
    }

    fn number(&mut self) -> Result<Rational> {
        self.skip_ws();
        let sign = usize::from(self.rest().starts_with('-'));
        let len = sign
            + self.rest()[sign..]
                .find(|c: char| !(c.is_ascii_digit() || c == '/' || c == '.'))
                .unwrap_or(self.rest().len() - sign);
        let text = &self.rest()[..len];
        let value = parse_rational(text).map_err(|_| self.error("expected a rational"))?;
        self.pos += len;
        Ok(value)
    }

    fn time(&mut self) -> Result<usize> {
        self.eat("t=");
        self.skip_ws();
        let len = self
            .rest()
            .find(|c: char| !c.is_ascii_digit())
            .unwrap_or(self.rest().len());
        let t = self.rest()[..len]
            .parse()
            .map_err(|_| self.error("expected a time index"))?;
        self.pos += len;
        Ok(t)
    }

    fn factor(&mut self) -> Result<RewardExpr> {
        self.skip_ws();
        if self.eat("(") {
            let e = self.expr()?;
            self.expect(")")?;
            return Ok(e);
        }
        if self.eat("-") {
            return Ok(RewardExpr::Neg(Box::new(self.factor()?)));
        }
        let ident_len = self
            .rest()
            .find(|c: char| !(c.is_ascii_alphabetic() || c == '_'))
            .unwrap_or(self.rest().len());
        if ident_len == 0 {
            return Ok(RewardExpr::Const(self.number()?));
        }
        let ident = &self.rest()[..ident_len];
        self.pos += ident_len;
        self.expect("(")?;
        let out = match ident {
            "indicator" => {
                let t = self.time()?;
                self.expect(",")?;
                let op = if self.eat("<=") {
                    Comparison::Le
                } else if self.eat(">=") {
                    Comparison::Ge
                } else if self.eat("==") {
                    Comparison::Eq
                } else if self.eat("<") {
                    Comparison::Lt
                } else if self.eat(">") {
                    Comparison::Gt
                } else {
                    return Err(self.error("expected a comparison"));
                };
                let a = self.number()?;
                RewardExpr::Indicator { t, op, a }
            }
            "call" | "put" | "abs" => {
                let t = self.time()?;
                self.expect(",")?;
                self.eat("b=");
                let b = self.number()?;
                match ident {
                    "call" => RewardExpr::Call { t, b },
                    "put" => RewardExpr::Put { t, b },
                    _ => RewardExpr::Abs { t, b },
                }
            }
            "x" => RewardExpr::Coord(self.time()?),
            "tanh_sm" => RewardExpr::TanhSm(self.time()?),
            other => return Err(self.error(&format!("unknown function {other:?}"))),
        };
        self.expect(")")?;
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, ratio};

    fn path(xs: &[i64]) -> Vec<Rational> {
        xs.iter().map(|&x| int(x)).collect()
    }

    #[test]
    fn product_reward() {
        let e = RewardExpr::parse("indicator(t=0, <=-1) * -call(2, 0)").unwrap();
        assert_eq!(e.max_time(), 2);
        assert_eq!(e.eval_exact(&path(&[-1, 0, 4])).unwrap(), int(-4));
        assert_eq!(e.eval_exact(&path(&[1, 0, 4])).unwrap(), int(0));
    }

    #[test]
    fn sums_and_constants() {
        let e = RewardExpr::parse("1/2*abs(1, 1) - put(t=1, b=0) + 3 + x(0)").unwrap();
        assert_eq!(e.eval_exact(&path(&[2, -2])).unwrap(), ratio(3, 2) - int(2) + int(3) + int(2));
    }

    #[test]
    fn tanh_requires_float() {
        let e = RewardExpr::parse("tanh_sm(2)").unwrap();
        assert!(!e.is_exact());
        assert!(e.eval_exact(&path(&[1, 0, 1])).is_err());
        let v = e.eval_f64(&path(&[1, 0, 1]));
        assert!((v - 1f64.tanh() * 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn rejects_garbage() {
        assert!(RewardExpr::parse("call(1)").is_err());
        assert!(RewardExpr::parse("foo(1, 2)").is_err());
        assert!(RewardExpr::parse("call(1, 2) )").is_err());
    }
}
