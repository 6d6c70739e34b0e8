//! Polynomials in the fiber momenta with scalar-field coefficients, and the
//! canonical Poisson bracket on `T*M`.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use rand::Rng;

use crate::error::{Error, Result};
use crate::sampling::{random_coefficient, seeded, SampleBox};
use crate::scalarfield::{Backend, Chart, ScalarField};

/// Exponent vector over `p_1 .. p_n`.
pub type MomentumIndex = Vec<u32>;

/// Seed used by [`MomentaPolynomial::is_zero`] for NUMERIC sampling.
pub const ZERO_TEST_SEED: u64 = 0x005e_ed0f_2e70;
pub const ZERO_TEST_SAMPLES: usize = 32;
pub const ZERO_TEST_TOL: f64 = 1e-9;

/// A point `(x, p)` of the cotangent bundle in chart coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseState {
    pub position: Vec<f64>,
    pub momentum: Vec<f64>,
}

impl PhaseState {
    pub fn new(position: Vec<f64>, momentum: Vec<f64>) -> Result<Self> {
        if position.len() != momentum.len() {
            return Err(Error::DimensionMismatch { expected: position.len(), got: momentum.len() });
        }
        Ok(PhaseState { position, momentum })
    }

    pub fn dim(&self) -> usize {
        self.position.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZeroReport {
    pub is_zero: bool,
    /// Max |coefficient| over the sample points (0 for an EXACT zero).
    pub residual: f64,
}

#[derive(Clone, PartialEq)]
pub struct MomentaPolynomial {
    nvars: usize,
    backend: Backend,
    terms: BTreeMap<MomentumIndex, ScalarField>,
}

impl MomentaPolynomial {
    pub fn zero(backend: Backend, nvars: usize) -> Self {
        MomentaPolynomial { nvars, backend, terms: BTreeMap::new() }
    }

    /// `coeff · p^index`.
    pub fn monomial(index: MomentumIndex, coeff: ScalarField) -> Self {
        let nvars = coeff.nvars();
        assert_eq!(index.len(), nvars, "momentum index length must equal chart dimension");
        let mut out = Self::zero(coeff.backend(), nvars);
        out.insert_add(index, coeff);
        out
    }

    /// The linear function `p_i`.
    pub fn momentum(backend: Backend, nvars: usize, i: usize) -> Self {
        let mut idx = vec![0; nvars];
        idx[i] = 1;
        Self::monomial(idx, ScalarField::one(backend, nvars))
    }

    /// Degree-0 polynomial (a function on the base).
    pub fn scalar(f: ScalarField) -> Self {
        let n = f.nvars();
        Self::monomial(vec![0; n], f)
    }

    pub fn from_terms(
        backend: Backend,
        nvars: usize,
        terms: impl IntoIterator<Item = (MomentumIndex, ScalarField)>,
    ) -> Result<Self> {
        let mut out = Self::zero(backend, nvars);
        for (idx, c) in terms {
            if idx.len() != nvars {
                return Err(Error::DimensionMismatch { expected: nvars, got: idx.len() });
            }
            if c.backend() != backend {
                return Err(Error::BackendMismatch);
            }
            out.insert_add(idx, c);
        }
        Ok(out)
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn backend(&self) -> Backend {
        self.backend
    }

    pub fn terms(&self) -> impl Iterator<Item = (&MomentumIndex, &ScalarField)> {
        self.terms.iter()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn coefficient(&self, index: &[u32]) -> Option<&ScalarField> {
        self.terms.get(index)
    }

    /// True when no coefficients are stored. For NUMERIC polynomials this is
    /// only the structural test; use [`Self::is_zero`] for the sampled one.
    pub fn is_structurally_zero(&self) -> bool {
        self.terms.is_empty()
    }

    fn insert_add(&mut self, idx: MomentumIndex, c: ScalarField) {
        if c.is_identically_zero() {
            return;
        }
        use std::collections::btree_map::Entry;
        match self.terms.entry(idx) {
            Entry::Vacant(e) => {
                e.insert(c);
            }
            Entry::Occupied(mut e) => {
                let sum = e.get().add(&c);
                if sum.is_identically_zero() {
                    e.remove();
                } else {
                    *e.get_mut() = sum;
                }
            }
        }
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.backend != other.backend {
            return Err(Error::BackendMismatch);
        }
        if self.nvars != other.nvars {
            return Err(Error::DimensionMismatch { expected: self.nvars, got: other.nvars });
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        let mut out = self.clone();
        for (idx, c) in &other.terms {
            out.insert_add(idx.clone(), c.clone());
        }
        Ok(out)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Self {
        MomentaPolynomial {
            nvars: self.nvars,
            backend: self.backend,
            terms: self.terms.iter().map(|(k, c)| (k.clone(), c.neg())).collect(),
        }
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        let mut out = Self::zero(self.backend, self.nvars);
        for (ia, ca) in &self.terms {
            for (ib, cb) in &other.terms {
                let idx: MomentumIndex = ia.iter().zip(ib).map(|(a, b)| a + b).collect();
                out.insert_add(idx, ca.mul(cb));
            }
        }
        Ok(out)
    }

    /// Multiplies every coefficient by a field on the base.
    pub fn scale_field(&self, f: &ScalarField) -> Result<Self> {
        if f.backend() != self.backend {
            return Err(Error::BackendMismatch);
        }
        let mut out = Self::zero(self.backend, self.nvars);
        for (idx, c) in &self.terms {
            out.insert_add(idx.clone(), c.mul(f));
        }
        Ok(out)
    }

    pub fn scale(&self, k: &BigRational) -> Self {
        let mut out = Self::zero(self.backend, self.nvars);
        for (idx, c) in &self.terms {
            out.insert_add(idx.clone(), c.scale(k));
        }
        out
    }

    /// `∂/∂p_i`.
    pub fn partial_p(&self, i: usize) -> Self {
        let mut out = Self::zero(self.backend, self.nvars);
        for (idx, c) in &self.terms {
            if idx[i] > 0 {
                let mut d = idx.clone();
                d[i] -= 1;
                let k = BigRational::from_integer(BigInt::from(idx[i]));
                out.insert_add(d, c.scale(&k));
            }
        }
        out
    }

    /// `∂/∂x^i`, acting on the coefficients.
    pub fn partial_x(&self, i: usize) -> Self {
        let mut out = Self::zero(self.backend, self.nvars);
        for (idx, c) in &self.terms {
            out.insert_add(idx.clone(), c.partial(i));
        }
        out
    }

    /// Total momentum degree if every term has the same degree.
    pub fn homogeneous_degree(&self) -> Option<u32> {
        let mut degs = self.terms.keys().map(|k| k.iter().sum::<u32>());
        let first = degs.next()?;
        degs.all(|d| d == first).then_some(first)
    }

    pub fn evaluate(&self, s: &PhaseState) -> Result<f64> {
        if s.dim() != self.nvars {
            return Err(Error::DimensionMismatch { expected: self.nvars, got: s.dim() });
        }
        let mut acc = 0.0;
        for (idx, c) in &self.terms {
            let mono: f64 = idx.iter().zip(&s.momentum).map(|(&e, &p)| p.powi(e as i32)).product();
            if mono != 0.0 {
                acc += c.evaluate(&s.position)? * mono;
            }
        }
        Ok(acc)
    }

    pub fn to_numeric(&self) -> Self {
        MomentaPolynomial {
            nvars: self.nvars,
            backend: Backend::Numeric,
            terms: self.terms.iter().map(|(k, c)| (k.clone(), c.to_numeric())).collect(),
        }
    }

    /// Zero test with the default sampling regime.
    pub fn is_zero(&self) -> ZeroReport {
        self.is_zero_with(&SampleBox::default(), ZERO_TEST_SEED)
    }

    /// EXACT: decided structurally; the residual of a nonzero polynomial is
    /// still measured by sampling. NUMERIC: max |coefficient| over 32 points
    /// of `domain`, zero iff below [`ZERO_TEST_TOL`].
    pub fn is_zero_with(&self, domain: &SampleBox, seed: u64) -> ZeroReport {
        if self.terms.is_empty() {
            return ZeroReport { is_zero: true, residual: 0.0 };
        }
        let residual = self.sampled_max_coefficient(domain, seed);
        match self.backend {
            Backend::Exact => ZeroReport { is_zero: false, residual },
            Backend::Numeric => ZeroReport { is_zero: residual < ZERO_TEST_TOL, residual },
        }
    }

    fn sampled_max_coefficient(&self, domain: &SampleBox, seed: u64) -> f64 {
        let mut rng = seeded(seed);
        let mut max = 0.0f64;
        let mut taken = 0;
        let mut attempts = 0;
        while taken < ZERO_TEST_SAMPLES && attempts < 16 * ZERO_TEST_SAMPLES {
            attempts += 1;
            let x = domain.sample_f64(self.nvars, &mut rng);
            let vals: Result<Vec<f64>> = self.terms.values().map(|c| c.evaluate(&x)).collect();
            if let Ok(vals) = vals {
                taken += 1;
                for v in vals {
                    max = max.max(v.abs());
                }
            }
        }
        if taken == 0 {
            f64::INFINITY
        } else {
            max
        }
    }

    /// Renders as `c1*p1^2 + ...` using the chart's names and `p_<name>`.
    pub fn display(&self, chart: &Chart) -> String {
        if self.terms.is_empty() {
            return "0".into();
        }
        self.terms
            .iter()
            .rev()
            .map(|(idx, c)| {
                let mono: Vec<String> = idx
                    .iter()
                    .enumerate()
                    .filter(|(_, &e)| e > 0)
                    .map(|(i, &e)| {
                        let p = format!("p_{}", chart.names()[i]);
                        if e == 1 { p } else { format!("{p}^{e}") }
                    })
                    .collect();
                let coeff = c.to_expr_string(chart);
                if mono.is_empty() {
                    format!("({coeff})")
                } else {
                    format!("({coeff})*{}", mono.join("*"))
                }
            })
            .collect::<Vec<_>>()
            .join(" + ")
    }
}

impl fmt::Debug for MomentaPolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.display(&Chart::standard(self.nvars)))
    }
}

/// Canonical bracket `{F,G} = Σ_i ∂F/∂p_i ∂G/∂x^i − ∂F/∂x^i ∂G/∂p_i`.
pub fn poisson_bracket(f: &MomentaPolynomial, g: &MomentaPolynomial) -> Result<MomentaPolynomial> {
    f.check_compatible(g)?;
    let mut out = MomentaPolynomial::zero(f.backend, f.nvars);
    for i in 0..f.nvars {
        let a = f.partial_p(i).mul(&g.partial_x(i))?;
        let b = f.partial_x(i).mul(&g.partial_p(i))?;
        out = out.add(&a)?.sub(&b)?;
    }
    Ok(out)
}

/// Random exact coefficient: a polynomial of degree ≤ 2 in the positions
/// with small rational coefficients, sometimes divided by `c + x_k`.
pub fn random_coefficient_field<R: Rng>(nvars: usize, rng: &mut R) -> ScalarField {
    let mut f = ScalarField::constant(Backend::Exact, nvars, random_coefficient(rng));
    for _ in 0..rng.gen_range(0..=2) {
        let mut t = ScalarField::constant(Backend::Exact, nvars, random_coefficient(rng));
        for _ in 0..rng.gen_range(1..=2) {
            t = t.mul(&ScalarField::var(Backend::Exact, nvars, rng.gen_range(0..nvars)));
        }
        f = f.add(&t);
    }
    if rng.gen_ratio(1, 4) {
        let k = rng.gen_range(0..nvars);
        let shift = ScalarField::from_int(Backend::Exact, nvars, rng.gen_range(1..=3));
        let den = shift.add(&ScalarField::var(Backend::Exact, nvars, k));
        f = f.div(&den).expect("nonzero denominator");
    }
    f
}

/// Seeded random exact momenta polynomial with total momentum degree
/// `≤ max_degree` and up to four terms.
pub fn random_momenta_polynomial<R: Rng>(nvars: usize, max_degree: u32, rng: &mut R) -> MomentaPolynomial {
    let mut out = MomentaPolynomial::zero(Backend::Exact, nvars);
    for _ in 0..rng.gen_range(1..=4) {
        let deg = rng.gen_range(0..=max_degree);
        let mut idx = vec![0u32; nvars];
        for _ in 0..deg {
            idx[rng.gen_range(0..nvars)] += 1;
        }
        let term = MomentaPolynomial::monomial(idx, random_coefficient_field(nvars, rng));
        out = out.add(&term).expect("same backend and chart");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalarfield::parse_expression;

    fn poly(chart: &Chart, terms: &[(&[u32], &str)]) -> MomentaPolynomial {
        MomentaPolynomial::from_terms(
            Backend::Exact,
            chart.dim(),
            terms.iter().map(|(i, t)| (i.to_vec(), parse_expression(t, chart, Backend::Exact).unwrap())),
        )
        .unwrap()
    }

    #[test]
    fn evaluate_examples() {
        let c = Chart::standard(2);
        let p = poly(&c, &[(&[2, 0], "1"), (&[0, 2], "1")]);
        let s = PhaseState::new(vec![0.0, 0.0], vec![3.0, 4.0]).unwrap();
        assert_eq!(p.evaluate(&s).unwrap(), 25.0);

        let p = poly(&c, &[(&[2, 0], "1"), (&[0, 2], "1/x1^2")]);
        let s = PhaseState::new(vec![2.0, 0.0], vec![0.0, 2.0]).unwrap();
        assert_eq!(p.evaluate(&s).unwrap(), 1.0);

        let p = poly(&c, &[(&[0, 2], "1")]);
        let s = PhaseState::new(vec![0.7, -0.2], vec![5.0, 0.0]).unwrap();
        assert_eq!(p.evaluate(&s).unwrap(), 0.0);
    }

    #[test]
    fn bracket_examples() {
        let c = Chart::standard(2);
        let p1sq = poly(&c, &[(&[2, 0], "1")]);
        let p2sq = poly(&c, &[(&[0, 2], "1")]);
        assert!(poisson_bracket(&p1sq, &p2sq).unwrap().is_zero().is_zero);

        // {p1^2, x1 p2^2} = 2 p1 p2^2 (hand expansion of the defining sum)
        let g = poly(&c, &[(&[0, 2], "x1")]);
        let b = poisson_bracket(&p1sq, &g).unwrap();
        assert_eq!(b, poly(&c, &[(&[1, 2], "2")]));
        let rep = b.is_zero();
        assert!(!rep.is_zero);
        assert!(rep.residual > 0.0);

        // polar angular momentum commutes with the Hamiltonian
        let two_h = poly(&c, &[(&[2, 0], "1"), (&[0, 2], "1/x1^2")]);
        assert_eq!(poisson_bracket(&two_h, &p2sq).unwrap().is_zero(), ZeroReport { is_zero: true, residual: 0.0 });
    }

    #[test]
    fn exact_cancellation() {
        let c = Chart::standard(2);
        let p = poly(&c, &[(&[2, 0], "1")]);
        assert_eq!(p.sub(&p).unwrap().is_zero(), ZeroReport { is_zero: true, residual: 0.0 });
        assert_eq!(MomentaPolynomial::zero(Backend::Exact, 2).is_zero().residual, 0.0);
    }

    #[test]
    fn numeric_zero_test() {
        let c = Chart::standard(2);
        let f = parse_expression("sin(x1)^2 + cos(x1)^2 - 1", &c, Backend::Numeric).unwrap();
        let p = MomentaPolynomial::monomial(vec![1, 0], f);
        let rep = p.is_zero();
        assert!(rep.is_zero);
        assert!(rep.residual < 1e-15);
    }

    #[test]
    fn backend_mismatch() {
        let c = Chart::standard(2);
        let a = poly(&c, &[(&[2, 0], "1")]);
        let b = a.to_numeric();
        assert_eq!(poisson_bracket(&a, &b).unwrap_err(), Error::BackendMismatch);
    }

    #[test]
    fn degree_law() {
        let c = Chart::standard(2);
        let a = poly(&c, &[(&[2, 0], "x2"), (&[1, 1], "x1")]);
        let b = poly(&c, &[(&[0, 2], "x1^2"), (&[2, 0], "1/x2")]);
        let br = poisson_bracket(&a, &b).unwrap();
        assert_eq!(br.homogeneous_degree(), Some(3));
    }
}
