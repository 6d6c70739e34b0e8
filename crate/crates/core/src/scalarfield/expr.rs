//! Expression trees for the NUMERIC backend.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Sqrt,
}

impl Func {
    pub fn from_name(name: &str) -> Option<Func> {
        match name {
            "sin" => Some(Func::Sin),
            "cos" => Some(Func::Cos),
            "exp" => Some(Func::Exp),
            "sqrt" => Some(Func::Sqrt),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Sqrt => "sqrt",
        }
    }
}

/// Immutable expression node. Children are shared through `Arc`, so cloning
/// and differentiating large trees does not copy unchanged subtrees.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(usize),
    Add(Arc<Expr>, Arc<Expr>),
    Sub(Arc<Expr>, Arc<Expr>),
    Mul(Arc<Expr>, Arc<Expr>),
    Div(Arc<Expr>, Arc<Expr>),
    Neg(Arc<Expr>),
    Pow(Arc<Expr>, i32),
    Call(Func, Arc<Expr>),
}

impl Expr {
    pub fn as_const(&self) -> Option<f64> {
        match self {
            Expr::Const(c) => Some(*c),
            _ => None,
        }
    }

    pub fn is_const_zero(&self) -> bool {
        self.as_const() == Some(0.0)
    }

    // Smart constructors fold constants and drop additive/multiplicative identities.

    pub fn add(a: Expr, b: Expr) -> Expr {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) => Expr::Const(x + y),
            (Some(x), _) if x == 0.0 => b,
            (_, Some(y)) if y == 0.0 => a,
            _ => Expr::Add(Arc::new(a), Arc::new(b)),
        }
    }

    pub fn sub(a: Expr, b: Expr) -> Expr {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) => Expr::Const(x - y),
            (Some(x), _) if x == 0.0 => Expr::neg(b),
            (_, Some(y)) if y == 0.0 => a,
            _ => Expr::Sub(Arc::new(a), Arc::new(b)),
        }
    }

    pub fn mul(a: Expr, b: Expr) -> Expr {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) => Expr::Const(x * y),
            (Some(x), _) | (_, Some(x)) if x == 0.0 => Expr::Const(0.0),
            (Some(x), _) if x == 1.0 => b,
            (_, Some(y)) if y == 1.0 => a,
            (Some(x), _) if x == -1.0 => Expr::neg(b),
            (_, Some(y)) if y == -1.0 => Expr::neg(a),
            _ => Expr::Mul(Arc::new(a), Arc::new(b)),
        }
    }

    pub fn div(a: Expr, b: Expr) -> Expr {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) if y != 0.0 => Expr::Const(x / y),
            (Some(x), _) if x == 0.0 => Expr::Const(0.0),
            (_, Some(y)) if y == 1.0 => a,
            _ => Expr::Div(Arc::new(a), Arc::new(b)),
        }
    }

    pub fn neg(a: Expr) -> Expr {
        match a {
            Expr::Const(x) => Expr::Const(-x),
            Expr::Neg(inner) => (*inner).clone(),
            other => Expr::Neg(Arc::new(other)),
        }
    }

    pub fn pow(a: Expr, k: i32) -> Expr {
        match (k, a.as_const()) {
            (0, _) => Expr::Const(1.0),
            (1, _) => a,
            (_, Some(x)) if k > 0 || x != 0.0 => Expr::Const(x.powi(k)),
            _ => Expr::Pow(Arc::new(a), k),
        }
    }

    pub fn call(f: Func, a: Expr) -> Expr {
        match a.as_const() {
            Some(x) if f != Func::Sqrt || x >= 0.0 => Expr::Const(apply(f, x)),
            _ => Expr::Call(f, Arc::new(a)),
        }
    }

    pub fn eval(&self, point: &[f64]) -> Result<f64> {
        let v = match self {
            Expr::Const(c) => *c,
            Expr::Var(i) => point[*i],
            Expr::Add(a, b) => a.eval(point)? + b.eval(point)?,
            Expr::Sub(a, b) => a.eval(point)? - b.eval(point)?,
            Expr::Mul(a, b) => a.eval(point)? * b.eval(point)?,
            Expr::Div(a, b) => {
                let d = b.eval(point)?;
                if d == 0.0 {
                    return Err(Error::Pole(format!("division by zero in {self}")));
                }
                a.eval(point)? / d
            }
            Expr::Neg(a) => -a.eval(point)?,
            Expr::Pow(a, k) => {
                let base = a.eval(point)?;
                if base == 0.0 && *k < 0 {
                    return Err(Error::Pole(format!("zero to a negative power in {self}")));
                }
                base.powi(*k)
            }
            Expr::Call(f, a) => {
                let x = a.eval(point)?;
                if *f == Func::Sqrt && x < 0.0 {
                    return Err(Error::Pole(format!("square root of negative value {x}")));
                }
                apply(*f, x)
            }
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Pole(format!("non-finite value in {self}")))
        }
    }

    /// Symbolic derivative with respect to variable `i`.
    pub fn derivative(&self, i: usize) -> Expr {
        match self {
            Expr::Const(_) => Expr::Const(0.0),
            Expr::Var(j) => Expr::Const(if *j == i { 1.0 } else { 0.0 }),
            Expr::Add(a, b) => Expr::add(a.derivative(i), b.derivative(i)),
            Expr::Sub(a, b) => Expr::sub(a.derivative(i), b.derivative(i)),
            Expr::Mul(a, b) => Expr::add(
                Expr::mul(a.derivative(i), (**b).clone()),
                Expr::mul((**a).clone(), b.derivative(i)),
            ),
            Expr::Div(a, b) => {
                let da = a.derivative(i);
                let db = b.derivative(i);
                if db.is_const_zero() {
                    return Expr::div(da, (**b).clone());
                }
                Expr::div(
                    Expr::sub(Expr::mul(da, (**b).clone()), Expr::mul((**a).clone(), db)),
                    Expr::pow((**b).clone(), 2),
                )
            }
            Expr::Neg(a) => Expr::neg(a.derivative(i)),
            Expr::Pow(a, k) => {
                let da = a.derivative(i);
                if da.is_const_zero() {
                    return Expr::Const(0.0);
                }
                Expr::mul(
                    Expr::mul(Expr::Const(*k as f64), Expr::pow((**a).clone(), k - 1)),
                    da,
                )
            }
            Expr::Call(f, a) => {
                let da = a.derivative(i);
                if da.is_const_zero() {
                    return Expr::Const(0.0);
                }
                let inner = (**a).clone();
                let outer = match f {
                    Func::Sin => Expr::call(Func::Cos, inner),
                    Func::Cos => Expr::neg(Expr::call(Func::Sin, inner)),
                    Func::Exp => self.clone(),
                    Func::Sqrt => Expr::div(Expr::Const(0.5), self.clone()),
                };
                Expr::mul(outer, da)
            }
        }
    }

    pub fn variables(&self) -> BTreeSet<usize> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<usize>) {
        match self {
            Expr::Const(_) => {}
            Expr::Var(i) => {
                out.insert(*i);
            }
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::Call(_, a) => a.collect_vars(out),
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Add(..) | Expr::Sub(..) => 1,
            Expr::Mul(..) | Expr::Div(..) => 2,
            Expr::Neg(..) => 3,
            Expr::Pow(..) => 4,
            Expr::Const(c) if *c < 0.0 => 3,
            _ => 5,
        }
    }
}

fn apply(f: Func, x: f64) -> f64 {
    match f {
        Func::Sin => x.sin(),
        Func::Cos => x.cos(),
        Func::Exp => x.exp(),
        Func::Sqrt => x.sqrt(),
    }
}

/// Variable names used by `Display`; `x1, x2, ...`.
pub struct Named<'a> {
    pub expr: &'a Expr,
    pub names: &'a [String],
}

impl fmt::Display for Named<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_expr(self.expr, self.names, f)
    }
}

fn write_child(e: &Expr, min_prec: u8, names: &[String], f: &mut fmt::Formatter<'_>) -> fmt::Result {
    if e.precedence() < min_prec {
        f.write_str("(")?;
        write_expr(e, names, f)?;
        f.write_str(")")
    } else {
        write_expr(e, names, f)
    }
}

fn write_expr(e: &Expr, names: &[String], f: &mut fmt::Formatter<'_>) -> fmt::Result {
    match e {
        Expr::Const(c) => write!(f, "{c:?}"),
        Expr::Var(i) => match names.get(*i) {
            Some(n) => f.write_str(n),
            None => write!(f, "x{}", i + 1),
        },
        Expr::Add(a, b) => {
            write_child(a, 1, names, f)?;
            f.write_str(" + ")?;
            write_child(b, 2, names, f)
        }
        Expr::Sub(a, b) => {
            write_child(a, 1, names, f)?;
            f.write_str(" - ")?;
            write_child(b, 2, names, f)
        }
        Expr::Mul(a, b) => {
            write_child(a, 2, names, f)?;
            f.write_str("*")?;
            write_child(b, 3, names, f)
        }
        Expr::Div(a, b) => {
            write_child(a, 2, names, f)?;
            f.write_str("/")?;
            write_child(b, 4, names, f)
        }
        Expr::Neg(a) => {
            f.write_str("-")?;
            write_child(a, 4, names, f)
        }
        Expr::Pow(a, k) => {
            write_child(a, 5, names, f)?;
            write!(f, "^{k}")
        }
        Expr::Call(func, a) => {
            write!(f, "{}(", func.name())?;
            write_expr(a, names, f)?;
            f.write_str(")")
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_expr(self, &[], f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x(i: usize) -> Expr {
        Expr::Var(i)
    }

    #[test]
    fn folds_constants() {
        let e = Expr::add(Expr::mul(Expr::Const(0.0), x(0)), Expr::Const(2.0));
        assert_eq!(e, Expr::Const(2.0));
    }

    #[test]
    fn derivative_of_sin_product() {
        // d/dx0 [x0 * sin(x1)] = sin(x1)
        let e = Expr::mul(x(0), Expr::call(Func::Sin, x(1)));
        let d = e.derivative(0);
        let v = d.eval(&[0.3, 0.7]).unwrap();
        assert!((v - 0.7f64.sin()).abs() < 1e-15);
        assert!(e.derivative(0).derivative(0).eval(&[1.0, 1.0]).unwrap() == 0.0);
    }

    #[test]
    fn sqrt_derivative() {
        let e = Expr::call(Func::Sqrt, x(0));
        let d = e.derivative(0).eval(&[4.0]).unwrap();
        assert!((d - 0.25).abs() < 1e-15);
        assert!(matches!(e.eval(&[-1.0]), Err(Error::Pole(_))));
    }

    #[test]
    fn display_round_trips_precedence() {
        let e = Expr::div(Expr::Const(1.0), Expr::pow(Expr::sub(x(0), x(1)), 2));
        assert_eq!(e.to_string(), "1.0/(x1 - x2)^2");
    }
}
