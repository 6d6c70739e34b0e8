//! Recursive-descent parser for the coefficient expression language.
//!
//! ```text
//! expr   := term (('+'|'-') term)*
//! term   := unary (('*'|'/') unary)*
//! unary  := ('-'|'+') unary | factor
//! factor := base ('^' integer)?
//! base   := number | ident | '(' expr ')' | func '(' expr ')'
//! ```
//!
//! Numbers are decimals (`12`, `0.25`); `a/b` rationals fall out of division.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;

use super::expr::{Expr, Func};
use super::ratfun::RationalFunction;
use super::{Backend, Chart, ScalarField};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(String),
    Ident(String),
    Op(char),
    LParen,
    RParen,
}

fn tokenize(text: &str) -> Result<Vec<(Tok, usize)>> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            let mut seen_dot = false;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                if chars[i] == '.' {
                    if seen_dot {
                        return Err(Error::Syntax { pos: i, msg: "second decimal point".into() });
                    }
                    seen_dot = true;
                }
                i += 1;
            }
            let s: String = chars[start..i].iter().collect();
            if s == "." {
                return Err(Error::Syntax { pos: start, msg: "lone decimal point".into() });
            }
            out.push((Tok::Num(s), start));
        } else if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push((Tok::Ident(chars[start..i].iter().collect()), start));
        } else {
            let tok = match c {
                '+' | '-' | '*' | '/' | '^' => Tok::Op(c),
                '(' => Tok::LParen,
                ')' => Tok::RParen,
                _ => {
                    return Err(Error::Syntax { pos: i, msg: format!("unexpected character `{c}`") })
                }
            };
            out.push((tok, i));
            i += 1;
        }
    }
    Ok(out)
}

fn parse_decimal(s: &str) -> BigRational {
    match s.split_once('.') {
        None => BigRational::from_integer(s.parse::<BigInt>().expect("digits")),
        Some((int, frac)) => {
            let int = if int.is_empty() { BigInt::zero() } else { int.parse().expect("digits") };
            if frac.is_empty() {
                return BigRational::from_integer(int);
            }
            let scale = num_traits::pow(BigInt::from(10), frac.len());
            let frac: BigInt = frac.parse().expect("digits");
            BigRational::new(int * &scale + frac, scale)
        }
    }
}

/// Semantic actions, one implementation per backend.
trait Builder {
    type Out: Clone;
    fn number(&self, q: BigRational) -> Self::Out;
    fn var(&self, i: usize) -> Self::Out;
    fn add(&self, a: Self::Out, b: Self::Out) -> Self::Out;
    fn sub(&self, a: Self::Out, b: Self::Out) -> Self::Out;
    fn mul(&self, a: Self::Out, b: Self::Out) -> Self::Out;
    fn div(&self, a: Self::Out, b: Self::Out, pos: usize) -> Result<Self::Out>;
    fn neg(&self, a: Self::Out) -> Self::Out;
    fn pow(&self, a: Self::Out, k: i32, pos: usize) -> Result<Self::Out>;
    fn call(&self, f: Func, a: Self::Out) -> Result<Self::Out>;
}

struct ExactBuilder {
    n: usize,
}

impl Builder for ExactBuilder {
    type Out = RationalFunction;
    fn number(&self, q: BigRational) -> RationalFunction {
        RationalFunction::constant(self.n, q)
    }
    fn var(&self, i: usize) -> RationalFunction {
        RationalFunction::var(self.n, i)
    }
    fn add(&self, a: RationalFunction, b: RationalFunction) -> RationalFunction {
        a.add(&b)
    }
    fn sub(&self, a: RationalFunction, b: RationalFunction) -> RationalFunction {
        a.sub(&b)
    }
    fn mul(&self, a: RationalFunction, b: RationalFunction) -> RationalFunction {
        a.mul(&b)
    }
    fn div(&self, a: RationalFunction, b: RationalFunction, pos: usize) -> Result<RationalFunction> {
        a.div(&b).map_err(|_| Error::Pole(format!("division by identically zero expression at position {pos}")))
    }
    fn neg(&self, a: RationalFunction) -> RationalFunction {
        a.neg()
    }
    fn pow(&self, a: RationalFunction, k: i32, pos: usize) -> Result<RationalFunction> {
        a.powi(k).map_err(|_| Error::Pole(format!("zero raised to a negative power at position {pos}")))
    }
    fn call(&self, f: Func, _a: RationalFunction) -> Result<RationalFunction> {
        Err(Error::Transcendental { name: f.name().to_string() })
    }
}

struct NumericBuilder;

impl Builder for NumericBuilder {
    type Out = Expr;
    fn number(&self, q: BigRational) -> Expr {
        Expr::Const(super::poly::rational_to_f64(&q))
    }
    fn var(&self, i: usize) -> Expr {
        Expr::Var(i)
    }
    fn add(&self, a: Expr, b: Expr) -> Expr {
        Expr::add(a, b)
    }
    fn sub(&self, a: Expr, b: Expr) -> Expr {
        Expr::sub(a, b)
    }
    fn mul(&self, a: Expr, b: Expr) -> Expr {
        Expr::mul(a, b)
    }
    fn div(&self, a: Expr, b: Expr, pos: usize) -> Result<Expr> {
        if b.is_const_zero() {
            return Err(Error::Pole(format!("division by zero at position {pos}")));
        }
        Ok(Expr::div(a, b))
    }
    fn neg(&self, a: Expr) -> Expr {
        Expr::neg(a)
    }
    fn pow(&self, a: Expr, k: i32, _pos: usize) -> Result<Expr> {
        Ok(Expr::pow(a, k))
    }
    fn call(&self, f: Func, a: Expr) -> Result<Expr> {
        Ok(Expr::call(f, a))
    }
}

struct Parser<'a, B: Builder> {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    end: usize,
    chart: &'a Chart,
    builder: B,
}

impl<B: Builder> Parser<'_, B> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    fn here(&self) -> usize {
        self.toks.get(self.pos).map(|(_, p)| *p).unwrap_or(self.end)
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|(t, _)| t.clone());
        self.pos += 1;
        t
    }

    fn expr(&mut self) -> Result<B::Out> {
        let mut acc = self.term()?;
        while let Some(Tok::Op(op @ ('+' | '-'))) = self.peek().cloned() {
            self.bump();
            let rhs = self.term()?;
            acc = if op == '+' { self.builder.add(acc, rhs) } else { self.builder.sub(acc, rhs) };
        }
        Ok(acc)
    }

    fn term(&mut self) -> Result<B::Out> {
        let mut acc = self.unary()?;
        while let Some(Tok::Op(op @ ('*' | '/'))) = self.peek().cloned() {
            self.bump();
            let at = self.here();
            let rhs = self.unary()?;
            acc = if op == '*' { self.builder.mul(acc, rhs) } else { self.builder.div(acc, rhs, at)? };
        }
        Ok(acc)
    }

    fn unary(&mut self) -> Result<B::Out> {
        match self.peek() {
            Some(Tok::Op('-')) => {
                self.bump();
                let v = self.unary()?;
                Ok(self.builder.neg(v))
            }
            Some(Tok::Op('+')) => {
                self.bump();
                self.unary()
            }
            _ => self.factor(),
        }
    }

    fn factor(&mut self) -> Result<B::Out> {
        let base = self.base()?;
        if let Some(Tok::Op('^')) = self.peek() {
            self.bump();
            let at = self.here();
            let negative = if let Some(Tok::Op('-')) = self.peek() {
                self.bump();
                true
            } else {
                false
            };
            let k = match self.bump() {
                Some(Tok::Num(s)) if !s.contains('.') => s
                    .parse::<i32>()
                    .map_err(|_| Error::Syntax { pos: at, msg: "exponent out of range".into() })?,
                _ => return Err(Error::Syntax { pos: at, msg: "expected integer exponent".into() }),
            };
            let k = if negative { -k } else { k };
            return self.builder.pow(base, k, at);
        }
        Ok(base)
    }

    fn base(&mut self) -> Result<B::Out> {
        let at = self.here();
        match self.bump() {
            Some(Tok::Num(s)) => Ok(self.builder.number(parse_decimal(&s))),
            Some(Tok::Ident(name)) => {
                if let Some(Tok::LParen) = self.peek() {
                    let Some(f) = Func::from_name(&name) else {
                        return Err(Error::UnknownIdentifier { name, pos: at });
                    };
                    self.bump();
                    let arg = self.expr()?;
                    self.expect_rparen()?;
                    return self.builder.call(f, arg);
                }
                match self.chart.index_of(&name) {
                    Some(i) => Ok(self.builder.var(i)),
                    None => Err(Error::UnknownIdentifier { name, pos: at }),
                }
            }
            Some(Tok::LParen) => {
                let v = self.expr()?;
                self.expect_rparen()?;
                Ok(v)
            }
            Some(t) => Err(Error::Syntax { pos: at, msg: format!("unexpected token {t:?}") }),
            None => Err(Error::Syntax { pos: at, msg: "unexpected end of input".into() }),
        }
    }

    fn expect_rparen(&mut self) -> Result<()> {
        let at = self.here();
        match self.bump() {
            Some(Tok::RParen) => Ok(()),
            _ => Err(Error::Syntax { pos: at, msg: "expected `)`".into() }),
        }
    }

    fn finish(mut self) -> Result<B::Out> {
        let v = self.expr()?;
        if self.pos < self.toks.len() {
            return Err(Error::Syntax { pos: self.here(), msg: "trailing input".into() });
        }
        Ok(v)
    }
}

fn run<B: Builder>(text: &str, chart: &Chart, builder: B) -> Result<B::Out> {
    let toks = tokenize(text)?;
    let end = text.chars().count();
    Parser { toks, pos: 0, end, chart, builder }.finish()
}

/// Parses `text` into a scalar field on `chart` with the requested backend.
pub fn parse_expression(text: &str, chart: &Chart, backend: Backend) -> Result<ScalarField> {
    match backend {
        Backend::Exact => {
            run(text, chart, ExactBuilder { n: chart.dim() }).map(ScalarField::Exact)
        }
        Backend::Numeric => run(text, chart, NumericBuilder).map(|e| ScalarField::numeric(chart.dim(), e)),
    }
}

/// Parses a bare rational literal such as `3`, `-1/2` or `0.25`.
pub fn parse_rational(text: &str) -> Result<BigRational> {
    let empty = Chart::anonymous(1);
    let f = run(text, &empty, ExactBuilder { n: 1 })?;
    f.as_constant()
        .ok_or_else(|| Error::Syntax { pos: 0, msg: format!("`{text}` is not a rational constant") })
}
