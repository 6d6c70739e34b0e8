//! Metrics and quadratic integrals as symmetric `(2,0)` tensor fields.

use std::sync::OnceLock;

use num_rational::BigRational;
use num_traits::Zero;
use rand::Rng;

use crate::error::{Error, Result};
use crate::matrix::{self, FieldMatrix};
use crate::phase_poly::{poisson_bracket, MomentaPolynomial};
use crate::sampling::{random_coefficient, seeded, SampleBox};
use crate::scalarfield::{Backend, Chart, ScalarField};

fn check_symmetric(chart: &Chart, m: &FieldMatrix) -> Result<Backend> {
    let n = chart.dim();
    if m.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: m.len() });
    }
    for row in m {
        if row.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: row.len() });
        }
    }
    let backend = m[0][0].backend();
    for i in 0..n {
        for j in 0..n {
            if m[i][j].backend() != backend {
                return Err(Error::BackendMismatch);
            }
            if m[i][j].nvars() != n {
                return Err(Error::DimensionMismatch { expected: n, got: m[i][j].nvars() });
            }
            if j > i && m[i][j] != m[j][i] {
                return Err(Error::NotSymmetric(i, j));
            }
        }
    }
    Ok(backend)
}

/// `K^{ij}`, the coefficient matrix of `I = K^{ij} p_i p_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticIntegral {
    chart: Chart,
    components: FieldMatrix,
    label: String,
}

impl QuadraticIntegral {
    pub fn new(chart: Chart, components: FieldMatrix, label: impl Into<String>) -> Result<Self> {
        check_symmetric(&chart, &components)?;
        Ok(QuadraticIntegral { chart, components, label: label.into() })
    }

    pub fn diagonal(chart: Chart, entries: Vec<ScalarField>, label: impl Into<String>) -> Result<Self> {
        let n = chart.dim();
        if entries.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: entries.len() });
        }
        let backend = entries[0].backend();
        let mut m = vec![vec![ScalarField::zero(backend, n); n]; n];
        for (i, e) in entries.into_iter().enumerate() {
            m[i][i] = e;
        }
        Self::new(chart, m, label)
    }

    pub fn chart(&self) -> &Chart {
        &self.chart
    }

    pub fn components(&self) -> &FieldMatrix {
        &self.components
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn backend(&self) -> Backend {
        self.components[0][0].backend()
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    /// True when every off-diagonal component is identically zero.
    pub fn is_coordinate_diagonal(&self) -> bool {
        let n = self.chart.dim();
        (0..n).all(|i| (0..n).all(|j| i == j || self.components[i][j].is_identically_zero()))
    }

    pub fn to_backend(&self, backend: Backend) -> Result<Self> {
        Ok(QuadraticIntegral {
            chart: self.chart.clone(),
            components: matrix::to_backend(&self.components, backend)?,
            label: self.label.clone(),
        })
    }
}

/// Metric stored by its inverse components `g^{ij}`.
#[derive(Debug)]
pub struct Metric {
    chart: Chart,
    inverse: FieldMatrix,
    lower: OnceLock<Result<FieldMatrix>>,
}

impl Clone for Metric {
    fn clone(&self) -> Self {
        Metric { chart: self.chart.clone(), inverse: self.inverse.clone(), lower: OnceLock::new() }
    }
}

impl PartialEq for Metric {
    fn eq(&self, other: &Self) -> bool {
        self.chart == other.chart && self.inverse == other.inverse
    }
}

impl Metric {
    pub fn new(chart: Chart, inverse_components: FieldMatrix) -> Result<Self> {
        let backend = check_symmetric(&chart, &inverse_components)?;
        let det = matrix::determinant(&inverse_components);
        match backend {
            Backend::Exact => {
                if det.is_identically_zero() {
                    return Err(Error::Singular("metric determinant is identically zero".into()));
                }
            }
            Backend::Numeric => {
                let mut rng = seeded(0);
                let domain = SampleBox::default();
                let mut seen_nonzero = false;
                for _ in 0..16 {
                    let x = domain.sample_f64(chart.dim(), &mut rng);
                    if let Ok(v) = det.evaluate(&x) {
                        if v.abs() > 1e-12 {
                            seen_nonzero = true;
                        }
                    }
                }
                if !seen_nonzero {
                    return Err(Error::Singular("metric determinant vanishes at all sampled points".into()));
                }
            }
        }
        Ok(Metric { chart, inverse: inverse_components, lower: OnceLock::new() })
    }

    pub fn diagonal(chart: Chart, entries: Vec<ScalarField>) -> Result<Self> {
        let k = QuadraticIntegral::diagonal(chart, entries, "2H")?;
        Metric::new(k.chart, k.components)
    }

    pub fn chart(&self) -> &Chart {
        &self.chart
    }

    pub fn inverse_components(&self) -> &FieldMatrix {
        &self.inverse
    }

    pub fn backend(&self) -> Backend {
        self.inverse[0][0].backend()
    }

    pub fn dim(&self) -> usize {
        self.chart.dim()
    }

    /// `g_{ij}`, computed symbolically on first use.
    pub fn lower(&self) -> Result<&FieldMatrix> {
        self.lower.get_or_init(|| matrix::inverse(&self.inverse)).as_ref().map_err(Clone::clone)
    }

    /// The metric viewed as the first integral `2H`.
    pub fn as_integral(&self) -> QuadraticIntegral {
        QuadraticIntegral { chart: self.chart.clone(), components: self.inverse.clone(), label: "2H".into() }
    }

    /// `H = ½ g^{ij} p_i p_j`.
    pub fn hamiltonian(&self) -> MomentaPolynomial {
        let half = BigRational::new(1.into(), 2.into());
        quadratic_to_poly(&self.as_integral()).scale(&half)
    }

    pub fn to_backend(&self, backend: Backend) -> Result<Self> {
        Ok(Metric {
            chart: self.chart.clone(),
            inverse: matrix::to_backend(&self.inverse, backend)?,
            lower: OnceLock::new(),
        })
    }
}

/// `λ_2, ..., λ_n` for a combination of the non-Hamiltonian integrals.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CombinationSpec {
    coefficients: Vec<BigRational>,
}

impl CombinationSpec {
    pub fn new(coefficients: Vec<BigRational>) -> Result<Self> {
        if coefficients.iter().all(Zero::is_zero) {
            return Err(Error::ZeroCombination);
        }
        Ok(CombinationSpec { coefficients })
    }

    /// Nonzero random rationals from [`random_coefficient`].
    pub fn random<R: Rng>(len: usize, rng: &mut R) -> Self {
        CombinationSpec { coefficients: (0..len).map(|_| random_coefficient(rng)).collect() }
    }

    pub fn coefficients(&self) -> &[BigRational] {
        &self.coefficients
    }

    pub fn len(&self) -> usize {
        self.coefficients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coefficients.is_empty()
    }

    pub fn scaled(&self, c: &BigRational) -> Result<Self> {
        Self::new(self.coefficients.iter().map(|l| l * c).collect())
    }
}

/// `Σ K^{ij} p_i p_j`, off-diagonal terms doubled.
pub fn quadratic_to_poly(k: &QuadraticIntegral) -> MomentaPolynomial {
    let n = k.chart.dim();
    let backend = k.backend();
    let two = BigRational::from_integer(2.into());
    let mut terms = Vec::new();
    for i in 0..n {
        for j in i..n {
            let c = &k.components[i][j];
            if c.is_identically_zero() {
                continue;
            }
            let mut idx = vec![0u32; n];
            idx[i] += 1;
            idx[j] += 1;
            terms.push((idx, if i == j { c.clone() } else { c.scale(&two) }));
        }
    }
    MomentaPolynomial::from_terms(backend, n, terms).expect("components share chart and backend")
}

/// `{g^{ij}p_ip_j, K^{kl}p_kp_l}`; zero iff `K` is a Killing tensor of `g`.
pub fn killing_residual(g: &Metric, k: &QuadraticIntegral) -> Result<MomentaPolynomial> {
    if g.chart.dim() != k.chart.dim() {
        return Err(Error::DimensionMismatch { expected: g.chart.dim(), got: k.chart.dim() });
    }
    poisson_bracket(&quadratic_to_poly(&g.as_integral()), &quadratic_to_poly(k))
}

/// The `(1,1)` tensor `K^i_j = K^{si} g_{sj}`, i.e. the matrix product `K · g_lower`.
pub fn one_one(k: &QuadraticIntegral, g: &Metric) -> Result<FieldMatrix> {
    if k.backend() != g.backend() {
        return Err(Error::BackendMismatch);
    }
    Ok(matrix::multiply(&k.components, g.lower()?))
}

/// `Σ λ_α K_α`, componentwise.
pub fn generic_combination(ks: &[QuadraticIntegral], lambda: &CombinationSpec) -> Result<QuadraticIntegral> {
    if ks.len() != lambda.len() {
        return Err(Error::DimensionMismatch { expected: ks.len(), got: lambda.len() });
    }
    let first = ks.first().ok_or_else(|| Error::Invalid("no integrals to combine".into()))?;
    let n = first.chart.dim();
    let backend = first.backend();
    let mut comps = vec![vec![ScalarField::zero(backend, n); n]; n];
    for (k, l) in ks.iter().zip(&lambda.coefficients) {
        if k.backend() != backend {
            return Err(Error::BackendMismatch);
        }
        if l.is_zero() {
            continue;
        }
        for i in 0..n {
            for j in 0..n {
                if !k.components[i][j].is_identically_zero() {
                    comps[i][j] = comps[i][j].add(&k.components[i][j].scale(l));
                }
            }
        }
    }
    QuadraticIntegral::new(first.chart.clone(), comps, "combination")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalarfield::parse_expression;

    fn field(c: &Chart, t: &str) -> ScalarField {
        parse_expression(t, c, Backend::Exact).unwrap()
    }

    fn diag(c: &Chart, e: &[&str], label: &str) -> QuadraticIntegral {
        QuadraticIntegral::diagonal(c.clone(), e.iter().map(|t| field(c, t)).collect(), label).unwrap()
    }

    fn sym(c: &Chart, rows: &[&[&str]]) -> QuadraticIntegral {
        let m = rows.iter().map(|r| r.iter().map(|t| field(c, t)).collect()).collect();
        QuadraticIntegral::new(c.clone(), m, "K").unwrap()
    }

    fn polar() -> (Chart, Metric) {
        let c = Chart::new(["r", "theta"]).unwrap();
        let g = Metric::diagonal(c.clone(), vec![field(&c, "1"), field(&c, "1/r^2")]).unwrap();
        (c, g)
    }

    #[test]
    fn quadratic_to_poly_examples() {
        let c = Chart::standard(2);
        let p = quadratic_to_poly(&diag(&c, &["1", "1"], "I"));
        assert_eq!(p.num_terms(), 2);
        assert_eq!(p.coefficient(&[2, 0]), Some(&field(&c, "1")));
        assert_eq!(p.coefficient(&[0, 2]), Some(&field(&c, "1")));

        let (pc, g) = polar();
        let p = quadratic_to_poly(&g.as_integral());
        assert_eq!(p.coefficient(&[0, 2]), Some(&field(&pc, "1/r^2")));

        let p = quadratic_to_poly(&sym(&c, &[&["0", "1"], &["1", "0"]]));
        assert_eq!(p.num_terms(), 1);
        assert_eq!(p.coefficient(&[1, 1]), Some(&field(&c, "2")));
    }

    #[test]
    fn asymmetric_rejected() {
        let c = Chart::standard(2);
        let m = vec![vec![field(&c, "1"), field(&c, "x1")], vec![field(&c, "x2"), field(&c, "1")]];
        assert_eq!(QuadraticIntegral::new(c, m, "K").unwrap_err(), Error::NotSymmetric(0, 1));
    }

    #[test]
    fn killing_examples() {
        let c = Chart::standard(2);
        let g = Metric::diagonal(c.clone(), vec![field(&c, "1"), field(&c, "1")]).unwrap();
        assert!(killing_residual(&g, &diag(&c, &["1", "0"], "K")).unwrap().is_zero().is_zero);

        let (pc, g) = polar();
        assert!(killing_residual(&g, &diag(&pc, &["0", "1"], "K")).unwrap().is_zero().is_zero);

        // {p_r^2 + p_θ^2/r^2, θ p_r^2} = 2 p_r^2 p_θ / r^2 + 4θ p_r p_θ^2 / r^3
        let res = killing_residual(&g, &diag(&pc, &["theta", "0"], "K")).unwrap();
        assert!(!res.is_zero().is_zero);
        assert_eq!(res.num_terms(), 2);
        assert_eq!(res.coefficient(&[2, 1]), Some(&field(&pc, "2/r^2")));
        assert_eq!(res.coefficient(&[1, 2]), Some(&field(&pc, "4*theta/r^3")));
    }

    #[test]
    fn one_one_examples() {
        let c = Chart::standard(2);
        let g = Metric::diagonal(c.clone(), vec![field(&c, "1"), field(&c, "1")]).unwrap();
        let k = sym(&c, &[&["2", "1"], &["1", "2"]]);
        assert_eq!(one_one(&k, &g).unwrap(), k.components().clone());
        assert_eq!(one_one(&g.as_integral(), &g).unwrap(), matrix::identity(Backend::Exact, 2));

        let (pc, g) = polar();
        let l = one_one(&diag(&pc, &["0", "1"], "K"), &g).unwrap();
        assert!(l[0][0].is_identically_zero());
        assert_eq!(l[1][1], field(&pc, "r^2"));
        assert_eq!(one_one(&g.as_integral(), &g).unwrap(), matrix::identity(Backend::Exact, 2));
    }

    #[test]
    fn combination_examples() {
        let (pc, _) = polar();
        let k = diag(&pc, &["0", "1"], "K2");
        let q = |n: i64| BigRational::from_integer(n.into());
        let one = CombinationSpec::new(vec![q(1)]).unwrap();
        assert_eq!(generic_combination(std::slice::from_ref(&k), &one).unwrap().components(), k.components());
        let three = CombinationSpec::new(vec![q(3)]).unwrap();
        assert_eq!(
            generic_combination(std::slice::from_ref(&k), &three).unwrap().components(),
            diag(&pc, &["0", "3"], "x").components()
        );
        let k3 = diag(&pc, &["r", "1"], "K3");
        let last = CombinationSpec::new(vec![q(0), q(1)]).unwrap();
        assert_eq!(generic_combination(&[k.clone(), k3.clone()], &last).unwrap().components(), k3.components());
        assert!(matches!(generic_combination(&[k], &last), Err(Error::DimensionMismatch { .. })));
        assert_eq!(CombinationSpec::new(vec![q(0)]).unwrap_err(), Error::ZeroCombination);
    }

    #[test]
    fn metric_commutes_with_itself() {
        let c = Chart::standard(2);
        let g = Metric::new(
            c.clone(),
            vec![vec![field(&c, "x1^2 + 1"), field(&c, "x2")], vec![field(&c, "x2"), field(&c, "1/x1")]],
        )
        .unwrap();
        assert!(killing_residual(&g, &g.as_integral()).unwrap().is_zero().is_zero);
    }
}
