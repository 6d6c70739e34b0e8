//! Coefficient functions of chart coordinates.
//!
//! A [`ScalarField`] is either an exact reduced rational function over ℚ or a
//! numeric expression tree. Both support evaluation and symbolic partial
//! derivatives; only the exact backend supports decidable zero tests.

pub mod expr;
pub mod parser;
pub mod poly;
pub mod ratfun;

use std::collections::BTreeSet;
use std::fmt;

use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::Rng;

use crate::error::{Error, Result};
use crate::sampling::SampleBox;
pub use expr::{Expr, Func};
pub use parser::{parse_expression, parse_rational};
pub use poly::MultiPoly;
pub use ratfun::RationalFunction;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Backend {
    Exact,
    Numeric,
}

impl std::str::FromStr for Backend {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "exact" => Ok(Backend::Exact),
            "numeric" => Ok(Backend::Numeric),
            other => Err(Error::Invalid(format!("unknown backend `{other}`"))),
        }
    }
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Backend::Exact => "exact",
            Backend::Numeric => "numeric",
        })
    }
}

/// Coordinate chart: dimension and coordinate names.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Chart {
    names: Vec<String>,
}

impl Chart {
    pub fn new<S: Into<String>>(names: impl IntoIterator<Item = S>) -> Result<Self> {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        if names.is_empty() {
            return Err(Error::InvalidChart("dimension must be at least 1".into()));
        }
        let mut seen = BTreeSet::new();
        for n in &names {
            let valid = n.chars().next().is_some_and(|c| c.is_alphabetic() || c == '_')
                && n.chars().all(|c| c.is_alphanumeric() || c == '_');
            if !valid {
                return Err(Error::InvalidChart(format!("`{n}` is not an identifier")));
            }
            if Func::from_name(n).is_some() {
                return Err(Error::InvalidChart(format!("`{n}` is a reserved function name")));
            }
            if !seen.insert(n.as_str()) {
                return Err(Error::InvalidChart(format!("duplicate coordinate name `{n}`")));
            }
        }
        Ok(Chart { names })
    }

    /// Chart with coordinates `x1, ..., xn`.
    pub fn standard(n: usize) -> Self {
        Chart::new((1..=n).map(|i| format!("x{i}"))).expect("standard names are valid")
    }

    pub(crate) fn anonymous(n: usize) -> Self {
        Chart { names: (1..=n).map(|i| format!("_{i}")).collect() }
    }

    pub fn dim(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }
}

/// Numeric payload: expression tree plus the chart dimension it lives on.
#[derive(Debug, Clone, PartialEq)]
pub struct NumericField {
    pub nvars: usize,
    pub expr: Expr,
}

#[derive(Clone, PartialEq)]
pub enum ScalarField {
    Exact(RationalFunction),
    Numeric(NumericField),
}

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScalarField::Exact(r) => write!(f, "Exact({r:?})"),
            ScalarField::Numeric(n) => write!(f, "Numeric({})", n.expr),
        }
    }
}

/// Outcome of [`ScalarField::variable_support`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SupportReport {
    /// Variables the field syntactically depends on (0-based).
    pub variables: BTreeSet<usize>,
    /// NUMERIC only: variables where the structural and sampled answers
    /// disagree (listed but never observed to change the value).
    pub discrepancies: BTreeSet<usize>,
}

impl ScalarField {
    pub fn numeric(nvars: usize, expr: Expr) -> Self {
        ScalarField::Numeric(NumericField { nvars, expr })
    }

    pub fn constant(backend: Backend, nvars: usize, c: BigRational) -> Self {
        match backend {
            Backend::Exact => ScalarField::Exact(RationalFunction::constant(nvars, c)),
            Backend::Numeric => Self::numeric(nvars, Expr::Const(poly::rational_to_f64(&c))),
        }
    }

    pub fn from_int(backend: Backend, nvars: usize, c: i64) -> Self {
        Self::constant(backend, nvars, BigRational::from_integer(c.into()))
    }

    pub fn zero(backend: Backend, nvars: usize) -> Self {
        Self::constant(backend, nvars, BigRational::zero())
    }

    pub fn one(backend: Backend, nvars: usize) -> Self {
        Self::constant(backend, nvars, BigRational::one())
    }

    pub fn var(backend: Backend, nvars: usize, i: usize) -> Self {
        match backend {
            Backend::Exact => ScalarField::Exact(RationalFunction::var(nvars, i)),
            Backend::Numeric => Self::numeric(nvars, Expr::Var(i)),
        }
    }

    pub fn backend(&self) -> Backend {
        match self {
            ScalarField::Exact(_) => Backend::Exact,
            ScalarField::Numeric(_) => Backend::Numeric,
        }
    }

    pub fn nvars(&self) -> usize {
        match self {
            ScalarField::Exact(r) => r.nvars(),
            ScalarField::Numeric(n) => n.nvars,
        }
    }

    pub fn as_exact(&self) -> Option<&RationalFunction> {
        match self {
            ScalarField::Exact(r) => Some(r),
            ScalarField::Numeric(_) => None,
        }
    }

    /// Converts to the NUMERIC backend (identity on numeric fields).
    pub fn to_numeric(&self) -> ScalarField {
        match self {
            ScalarField::Numeric(_) => self.clone(),
            ScalarField::Exact(r) => Self::numeric(r.nvars(), rational_to_expr(r)),
        }
    }

    pub fn to_backend(&self, backend: Backend) -> Result<ScalarField> {
        match (self, backend) {
            (_, Backend::Numeric) => Ok(self.to_numeric()),
            (ScalarField::Exact(_), Backend::Exact) => Ok(self.clone()),
            (ScalarField::Numeric(_), Backend::Exact) => Err(Error::BackendMismatch),
        }
    }

    /// Structural zero test: decisive for EXACT, constant-folded zero for NUMERIC.
    pub fn is_identically_zero(&self) -> bool {
        match self {
            ScalarField::Exact(r) => r.is_zero(),
            ScalarField::Numeric(n) => n.expr.is_const_zero(),
        }
    }

    pub fn evaluate(&self, point: &[f64]) -> Result<f64> {
        self.check_arity(point.len())?;
        match self {
            ScalarField::Exact(r) => r.eval_f64(point),
            ScalarField::Numeric(n) => n.expr.eval(point),
        }
    }

    /// Exact evaluation at a rational point; NUMERIC fields are rejected.
    pub fn evaluate_exact(&self, point: &[BigRational]) -> Result<BigRational> {
        self.check_arity(point.len())?;
        match self {
            ScalarField::Exact(r) => r.eval_rational(point),
            ScalarField::Numeric(_) => Err(Error::BackendMismatch),
        }
    }

    fn check_arity(&self, got: usize) -> Result<()> {
        if got != self.nvars() {
            return Err(Error::DimensionMismatch { expected: self.nvars(), got });
        }
        Ok(())
    }

    /// Partial derivative with respect to coordinate `i` (0-based).
    pub fn partial(&self, i: usize) -> ScalarField {
        assert!(i < self.nvars(), "coordinate index {i} out of range");
        match self {
            ScalarField::Exact(r) => ScalarField::Exact(r.partial(i)),
            ScalarField::Numeric(n) => Self::numeric(n.nvars, n.expr.derivative(i)),
        }
    }

    /// Coordinates the field depends on. For NUMERIC fields each structural
    /// dependency is confirmed by perturbation at 8 random points of `domain`,
    /// and each absent coordinate is probed the same way.
    pub fn variable_support<R: Rng>(&self, domain: &SampleBox, rng: &mut R) -> SupportReport {
        match self {
            ScalarField::Exact(r) => SupportReport {
                variables: r.variables().into_iter().collect(),
                discrepancies: BTreeSet::new(),
            },
            ScalarField::Numeric(n) => {
                let variables = n.expr.variables();
                let mut discrepancies = BTreeSet::new();
                for v in 0..n.nvars {
                    let observed = probe_dependence(&n.expr, n.nvars, v, domain, rng);
                    let structural = variables.contains(&v);
                    if observed != Some(structural) && observed.is_some() {
                        discrepancies.insert(v);
                    }
                }
                SupportReport { variables, discrepancies }
            }
        }
    }

    /// Exact-only support, no sampling needed.
    pub fn exact_support(&self) -> Option<BTreeSet<usize>> {
        self.as_exact().map(|r| r.variables().into_iter().collect())
    }

    pub fn add(&self, other: &Self) -> Self {
        match (self, other) {
            (ScalarField::Exact(a), ScalarField::Exact(b)) => ScalarField::Exact(a.add(b)),
            _ => Self::numeric(self.nvars(), Expr::add(self.expr(), other.expr())),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        match (self, other) {
            (ScalarField::Exact(a), ScalarField::Exact(b)) => ScalarField::Exact(a.sub(b)),
            _ => Self::numeric(self.nvars(), Expr::sub(self.expr(), other.expr())),
        }
    }

    pub fn mul(&self, other: &Self) -> Self {
        match (self, other) {
            (ScalarField::Exact(a), ScalarField::Exact(b)) => ScalarField::Exact(a.mul(b)),
            _ => Self::numeric(self.nvars(), Expr::mul(self.expr(), other.expr())),
        }
    }

    /// Fails with a pole error only when the divisor is identically zero.
    pub fn div(&self, other: &Self) -> Result<Self> {
        match (self, other) {
            (ScalarField::Exact(a), ScalarField::Exact(b)) => a.div(b).map(ScalarField::Exact),
            _ => {
                let d = other.expr();
                if d.is_const_zero() {
                    return Err(Error::Pole("division by the zero field".into()));
                }
                Ok(Self::numeric(self.nvars(), Expr::div(self.expr(), d)))
            }
        }
    }

    pub fn neg(&self) -> Self {
        match self {
            ScalarField::Exact(a) => ScalarField::Exact(a.neg()),
            ScalarField::Numeric(n) => Self::numeric(n.nvars, Expr::neg(n.expr.clone())),
        }
    }

    pub fn scale(&self, k: &BigRational) -> Self {
        match self {
            ScalarField::Exact(a) => ScalarField::Exact(a.scale(k)),
            ScalarField::Numeric(n) => {
                Self::numeric(n.nvars, Expr::mul(Expr::Const(poly::rational_to_f64(k)), n.expr.clone()))
            }
        }
    }

    pub fn scale_f64(&self, k: f64) -> Self {
        Self::numeric(self.nvars(), Expr::mul(Expr::Const(k), self.expr()))
    }

    pub fn sqrt(&self) -> Self {
        Self::numeric(self.nvars(), Expr::call(Func::Sqrt, self.expr()))
    }

    fn expr(&self) -> Expr {
        match self {
            ScalarField::Exact(r) => rational_to_expr(r),
            ScalarField::Numeric(n) => n.expr.clone(),
        }
    }

    /// Renders the field in the expression grammar. NUMERIC constants are
    /// written with Rust's shortest round-trip float formatting.
    pub fn to_expr_string(&self, chart: &Chart) -> String {
        match self {
            ScalarField::Exact(r) => r.to_expr_string(chart.names()),
            ScalarField::Numeric(n) => expr::Named { expr: &n.expr, names: chart.names() }.to_string(),
        }
    }

    /// Prepares the field for repeated `f64` evaluation.
    pub fn compile(&self) -> CompiledField {
        match self {
            ScalarField::Exact(r) => CompiledField::Rational {
                num: r.numer().to_f64_terms(),
                den: r.denom().to_f64_terms(),
            },
            ScalarField::Numeric(n) => CompiledField::Tree(n.expr.clone()),
        }
    }
}

fn probe_dependence<R: Rng>(e: &Expr, nvars: usize, v: usize, domain: &SampleBox, rng: &mut R) -> Option<bool> {
    let mut probes = 0;
    let mut attempts = 0;
    while probes < 8 && attempts < 64 {
        attempts += 1;
        let p = domain.sample_f64(nvars, rng);
        let mut q = p.clone();
        q[v] = domain.sample_f64(1, rng)[0];
        let (Ok(a), Ok(b)) = (e.eval(&p), e.eval(&q)) else { continue };
        probes += 1;
        if (a - b).abs() > 1e-12 * (1.0 + a.abs().max(b.abs())) {
            return Some(true);
        }
    }
    if probes == 0 {
        None
    } else {
        Some(false)
    }
}

fn rational_to_expr(r: &RationalFunction) -> Expr {
    let num = poly_to_expr(r.numer());
    if r.denom().is_one() {
        num
    } else {
        Expr::div(num, poly_to_expr(r.denom()))
    }
}

fn poly_to_expr(p: &MultiPoly) -> Expr {
    let mut acc = Expr::Const(0.0);
    for (m, c) in p.terms() {
        let mut t = Expr::Const(poly::rational_to_f64(c));
        for (v, &e) in m.iter().enumerate() {
            if e > 0 {
                t = Expr::mul(t, Expr::pow(Expr::Var(v), e as i32));
            }
        }
        acc = Expr::add(acc, t);
    }
    acc
}

/// A scalar field lowered for fast `f64` evaluation.
#[derive(Debug, Clone)]
pub enum CompiledField {
    Rational { num: Vec<(Vec<u32>, f64)>, den: Vec<(Vec<u32>, f64)> },
    Tree(Expr),
}

fn eval_terms(terms: &[(Vec<u32>, f64)], point: &[f64]) -> f64 {
    terms
        .iter()
        .map(|(m, c)| {
            m.iter().zip(point).fold(*c, |t, (&e, &x)| if e == 0 { t } else { t * x.powi(e as i32) })
        })
        .sum()
}

impl CompiledField {
    pub fn eval(&self, point: &[f64]) -> Result<f64> {
        match self {
            CompiledField::Rational { num, den } => {
                let d = if den.len() == 1 && den[0].0.iter().all(|&e| e == 0) {
                    den[0].1
                } else {
                    eval_terms(den, point)
                };
                if d == 0.0 || !d.is_finite() {
                    return Err(Error::Pole("denominator vanishes".into()));
                }
                let v = eval_terms(num, point) / d;
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(Error::Pole("non-finite value".into()))
                }
            }
            CompiledField::Tree(e) => e.eval(point),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigInt;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    fn exact(text: &str, chart: &Chart) -> ScalarField {
        parse_expression(text, chart, Backend::Exact).unwrap()
    }

    #[test]
    fn parse_literal_polynomial() {
        let c = Chart::standard(2);
        let f = exact("x1^2 + 1/2", &c);
        let x1 = RationalFunction::var(2, 0);
        let expected = x1.mul(&x1).add(&RationalFunction::constant(2, q(1, 2)));
        assert_eq!(f, ScalarField::Exact(expected));
        assert_eq!(f.evaluate_exact(&[q(2, 1), q(0, 1)]).unwrap(), q(9, 2));
    }

    #[test]
    fn parse_polar_entry() {
        let polar = Chart::new(["r", "theta"]).unwrap();
        let f = exact("1/r^2", &polar);
        let r = RationalFunction::var(2, 0);
        assert_eq!(f, ScalarField::Exact(r.powi(-2).unwrap()));
        assert_eq!(f.evaluate(&[1.0, 0.0]).unwrap(), 1.0);
        assert!(matches!(f.evaluate(&[0.0, 0.0]), Err(Error::Pole(_))));
        assert!(matches!(f.evaluate_exact(&[q(0, 1), q(0, 1)]), Err(Error::Pole(_))));
    }

    #[test]
    fn transcendental_rejected_under_exact() {
        let c = Chart::standard(2);
        let err = parse_expression("sin(x1)", &c, Backend::Exact).unwrap_err();
        assert_eq!(err, Error::Transcendental { name: "sin".into() });
        assert!(parse_expression("sin(x1)", &c, Backend::Numeric).is_ok());
    }

    #[test]
    fn syntax_errors_carry_position() {
        let c = Chart::standard(2);
        match parse_expression("x1 + * x2", &c, Backend::Exact) {
            Err(Error::Syntax { pos, .. }) => assert_eq!(pos, 5),
            other => panic!("unexpected {other:?}"),
        }
        match parse_expression("x1 + y", &c, Backend::Exact) {
            Err(Error::UnknownIdentifier { name, pos }) => {
                assert_eq!(name, "y");
                assert_eq!(pos, 5);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(parse_expression("(x1", &c, Backend::Exact), Err(Error::Syntax { .. })));
        assert!(matches!(parse_expression("x1^x2", &c, Backend::Exact), Err(Error::Syntax { .. })));
        assert!(matches!(parse_expression("", &c, Backend::Exact), Err(Error::Syntax { .. })));
        assert!(matches!(parse_expression("x1 x2", &c, Backend::Exact), Err(Error::Syntax { .. })));
    }

    #[test]
    fn decimals_are_exact() {
        let c = Chart::standard(1);
        assert_eq!(exact("0.25", &c).evaluate_exact(&[q(0, 1)]).unwrap(), q(1, 4));
        assert_eq!(exact("-1.5*x1", &c).evaluate_exact(&[q(2, 1)]).unwrap(), q(-3, 1));
    }

    #[test]
    fn partials() {
        let c = Chart::standard(2);
        assert_eq!(exact("x1^2", &c).partial(0), exact("2*x1", &c));
        assert_eq!(exact("1/x1^2", &c).partial(0), exact("-2/x1^3", &c));
        assert!(exact("1/x1^2", &c).partial(1).is_identically_zero());
    }

    #[test]
    fn support() {
        let c = Chart::standard(2);
        let dom = SampleBox::default();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = |t: &str| exact(t, &c).variable_support(&dom, &mut rng.clone()).variables;
        assert_eq!(s("1/x1^2"), BTreeSet::from([0]));
        assert_eq!(s("x2 - x1"), BTreeSet::from([0, 1]));
        assert_eq!(s("1"), BTreeSet::new());
        // cancellation is seen by the exact backend
        assert_eq!(s("x2 - x2 + x1"), BTreeSet::from([0]));

        let n = parse_expression("x2 - x2 + x1", &c, Backend::Numeric).unwrap();
        let rep = n.variable_support(&dom, &mut rng);
        assert_eq!(rep.variables, BTreeSet::from([0, 1]));
        assert_eq!(rep.discrepancies, BTreeSet::from([1]));
    }

    #[test]
    fn rendering_reparses() {
        let c = Chart::new(["r", "theta"]).unwrap();
        for text in ["1/r^2", "(theta - r)/(r^2 + 3)", "-3/4*r*theta + 2", "r/(r - theta)"] {
            let f = exact(text, &c);
            let g = exact(&f.to_expr_string(&c), &c);
            assert_eq!(f, g, "{text}");
        }
    }

    #[test]
    fn compiled_matches_direct() {
        let c = Chart::standard(2);
        let f = exact("(x1^2 - x2)/(x1 + 2*x2)", &c);
        let cf = f.compile();
        let p = [0.3, 1.7];
        assert!((cf.eval(&p).unwrap() - f.evaluate(&p).unwrap()).abs() < 1e-15);
    }
}
