//! Integrals generated by a Stäckel matrix.
//!
//! Given `S` with row `i` depending only on `x^i`, the integrals solve
//! `S · I = (p_1², …, p_n²)ᵀ`, so `I_α = Σ_j (S⁻¹)_{αj} p_j²`. One row of `S⁻¹`
//! (the first by default) is taken as `2H`.

use std::collections::BTreeSet;

use num_bigint::BigInt;
use num_rational::BigRational;
use rand::Rng;

use crate::error::{Error, Result};
use crate::matrix::{self, FieldMatrix};
use crate::phase_poly::{poisson_bracket, MomentaPolynomial, ZeroReport};
use crate::sampling::{seeded, SampleBox};
use crate::scalarfield::{parse_expression, Backend, Chart, ScalarField};
use crate::tensorcalc::{quadratic_to_poly, Metric, QuadraticIntegral};

#[derive(Debug, Clone, PartialEq)]
pub struct StackelMatrix {
    chart: Chart,
    entries: FieldMatrix,
}

impl StackelMatrix {
    /// Checks shape and backend only; see [`validate_stackel`] for the
    /// univariance and non-degeneracy conditions.
    pub fn new(chart: Chart, entries: FieldMatrix) -> Result<Self> {
        let n = chart.dim();
        if entries.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: entries.len() });
        }
        let backend = entries[0][0].backend();
        for row in &entries {
            if row.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: row.len() });
            }
            if row.iter().any(|e| e.backend() != backend) {
                return Err(Error::BackendMismatch);
            }
        }
        Ok(StackelMatrix { chart, entries })
    }

    /// Parses a matrix of expression strings.
    pub fn parse(chart: Chart, rows: &[Vec<String>], backend: Backend) -> Result<Self> {
        let entries = rows
            .iter()
            .map(|r| r.iter().map(|t| parse_expression(t, &chart, backend)).collect())
            .collect::<Result<FieldMatrix>>()?;
        Self::new(chart, entries)
    }

    pub fn chart(&self) -> &Chart {
        &self.chart
    }

    pub fn entries(&self) -> &FieldMatrix {
        &self.entries
    }

    pub fn backend(&self) -> Backend {
        self.entries[0][0].backend()
    }

    pub fn dim(&self) -> usize {
        self.chart.dim()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StackelWarning {
    /// `(S⁻¹)_{h,j}` vanishes identically (1-based `j`), so that row cannot serve as `2H`.
    FirstRowZero(usize),
    /// NUMERIC only: a coordinate appears in the entry `(row, col)` but
    /// sampling never saw it change the value.
    SupportDiscrepancy { row: usize, col: usize, var: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct StackelDiagnostics {
    pub warnings: Vec<StackelWarning>,
    /// Smallest `|det S|` over the sample points (NUMERIC), or `None` for EXACT.
    pub min_sampled_det: Option<f64>,
}

impl StackelDiagnostics {
    pub fn first_row_ok(&self) -> bool {
        !self.warnings.iter().any(|w| matches!(w, StackelWarning::FirstRowZero(_)))
    }
}

/// Validates univariance of every row and non-degeneracy of `S`, and
/// reports zero entries in the Hamiltonian row (0-based `hamiltonian_row`)
/// of `S⁻¹` as warnings. Indices in errors and warnings are 1-based.
pub fn validate_stackel_row(s: &StackelMatrix, hamiltonian_row: usize) -> Result<StackelDiagnostics> {
    let n = s.dim();
    if hamiltonian_row >= n {
        return Err(Error::Invalid(format!("Hamiltonian row {} out of range", hamiltonian_row + 1)));
    }
    let domain = SampleBox::default();
    let mut rng = seeded(0x57ac);
    let mut warnings = Vec::new();
    for (i, row) in s.entries.iter().enumerate() {
        for (j, e) in row.iter().enumerate() {
            let allowed = BTreeSet::from([i]);
            let rep = e.variable_support(&domain, &mut rng);
            for &v in &rep.variables {
                if allowed.contains(&v) {
                    continue;
                }
                if rep.discrepancies.contains(&v) {
                    warnings.push(StackelWarning::SupportDiscrepancy { row: i + 1, col: j + 1, var: v + 1 });
                } else {
                    return Err(Error::UnivarianceViolation { row: i + 1, col: j + 1 });
                }
            }
        }
    }

    let det = matrix::determinant(&s.entries);
    let min_sampled_det = match s.backend() {
        Backend::Exact => {
            if det.is_identically_zero() {
                return Err(Error::Singular("det S is identically zero".into()));
            }
            None
        }
        Backend::Numeric => {
            let mut min = f64::INFINITY;
            let mut taken = 0;
            let mut attempts = 0;
            while taken < 16 && attempts < 256 {
                attempts += 1;
                let x = domain.sample_f64(n, &mut rng);
                if let Ok(v) = det.evaluate(&x) {
                    taken += 1;
                    min = min.min(v.abs());
                }
            }
            if !(min > 1e-9) {
                return Err(Error::Singular(format!("|det S| = {min:e} at a sample point")));
            }
            Some(min)
        }
    };

    let inv = matrix::inverse(&s.entries)?;
    for (j, e) in inv[hamiltonian_row].iter().enumerate() {
        let zero = match e {
            ScalarField::Exact(r) => r.is_zero(),
            ScalarField::Numeric(_) => {
                let mut all_zero = true;
                for _ in 0..16 {
                    let x = domain.sample_f64(n, &mut rng);
                    if e.evaluate(&x).map_or(true, |v| v.abs() > 1e-12) {
                        all_zero = false;
                        break;
                    }
                }
                all_zero
            }
        };
        if zero {
            warnings.push(StackelWarning::FirstRowZero(j + 1));
        }
    }
    Ok(StackelDiagnostics { warnings, min_sampled_det })
}

pub fn validate_stackel(s: &StackelMatrix) -> Result<StackelDiagnostics> {
    validate_stackel_row(s, 0)
}

/// Metric and `n` integrals generated by a Stäckel matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct StackelSystem {
    pub metric: Metric,
    /// `integrals[0]` is the metric's own tensor; the others follow in row order of `S⁻¹`.
    pub integrals: Vec<QuadraticIntegral>,
    pub source: StackelMatrix,
    /// For each integral, the row of `S⁻¹` it came from (0-based).
    pub inverse_rows: Vec<usize>,
}

impl StackelSystem {
    pub fn polynomials(&self) -> Vec<MomentaPolynomial> {
        self.integrals.iter().map(quadratic_to_poly).collect()
    }

    pub fn dim(&self) -> usize {
        self.source.dim()
    }

    /// `Σ_α S_{jα} I_α − p_j²` for every row `j`; all zero for a correct system.
    pub fn round_trip_residuals(&self) -> Result<Vec<MomentaPolynomial>> {
        let n = self.dim();
        let backend = self.source.backend();
        let mut by_row = vec![None; n];
        for (k, &row) in self.inverse_rows.iter().enumerate() {
            by_row[row] = Some(quadratic_to_poly(&self.integrals[k]));
        }
        let polys: Vec<MomentaPolynomial> = by_row.into_iter().map(|p| p.expect("every row used")).collect();
        (0..n)
            .map(|j| {
                let mut idx = vec![0u32; n];
                idx[j] = 2;
                let mut acc = MomentaPolynomial::monomial(idx, ScalarField::one(backend, n)).neg();
                for (alpha, p) in polys.iter().enumerate() {
                    acc = acc.add(&p.scale_field(&self.source.entries[j][alpha])?)?;
                }
                Ok(acc)
            })
            .collect()
    }
}

pub fn stackel_integrals(s: &StackelMatrix) -> Result<StackelSystem> {
    stackel_integrals_with_row(s, 0)
}

/// Builds the system with row `hamiltonian_row` (0-based) of `S⁻¹` as `2H`.
pub fn stackel_integrals_with_row(s: &StackelMatrix, hamiltonian_row: usize) -> Result<StackelSystem> {
    let n = s.dim();
    if hamiltonian_row >= n {
        return Err(Error::Invalid(format!("Hamiltonian row {} out of range", hamiltonian_row + 1)));
    }
    let inv = matrix::inverse(&s.entries)?;
    let mut order = vec![hamiltonian_row];
    order.extend((0..n).filter(|&a| a != hamiltonian_row));
    let integrals = order
        .iter()
        .map(|&a| {
            let label = if a == hamiltonian_row { "2H".to_string() } else { format!("I{}", a + 1) };
            QuadraticIntegral::diagonal(s.chart.clone(), inv[a].clone(), label)
        })
        .collect::<Result<Vec<_>>>()?;
    let metric = Metric::new(s.chart.clone(), integrals[0].components().clone())
        .map_err(|_| Error::Singular("the Hamiltonian row of S⁻¹ has a vanishing entry".into()))?;
    Ok(StackelSystem { metric, integrals, source: s.clone(), inverse_rows: order })
}

/// Pairwise brackets `{I_α, I_β}` tested for zero.
pub fn involution_matrix(is: &[MomentaPolynomial]) -> Result<Vec<Vec<ZeroReport>>> {
    let n = is.len();
    let zero = ZeroReport { is_zero: true, residual: 0.0 };
    let mut out = vec![vec![zero; n]; n];
    for a in 0..n {
        for b in (a + 1)..n {
            let rep = poisson_bracket(&is[a], &is[b])?.is_zero();
            out[a][b] = rep;
            out[b][a] = rep;
        }
    }
    Ok(out)
}

/// Built-in Stäckel matrices.
pub mod library {
    use super::*;

    fn build(names: &[&str], rows: &[&[&str]]) -> StackelMatrix {
        let chart = Chart::new(names.iter().copied()).expect("valid names");
        let rows: Vec<Vec<String>> = rows.iter().map(|r| r.iter().map(|s| s.to_string()).collect()).collect();
        StackelMatrix::parse(chart, &rows, Backend::Exact).expect("built-in matrix parses")
    }

    /// `[[1, -1], [0, 1]]`: Euclidean plane in Cartesian coordinates.
    pub fn flat() -> StackelMatrix {
        build(&["x1", "x2"], &[&["1", "-1"], &["0", "1"]])
    }

    /// `[[1, -1/r^2], [0, 1]]`: Euclidean plane in polar coordinates.
    pub fn polar() -> StackelMatrix {
        build(&["r", "theta"], &[&["1", "-1/r^2"], &["0", "1"]])
    }

    /// `[[x1, -1], [x2, -1]]`: Liouville-type metric `(p2² − p1²)/(x2 − x1)`.
    pub fn liouville() -> StackelMatrix {
        build(&["x1", "x2"], &[&["x1", "-1"], &["x2", "-1"]])
    }

    pub fn shipped() -> Vec<(&'static str, StackelMatrix)> {
        vec![("flat", flat()), ("polar", polar()), ("liouville", liouville())]
    }

    fn small_rational<R: Rng>(rng: &mut R, zero_weight: u32) -> BigRational {
        if rng.gen_ratio(zero_weight, 10) {
            return BigRational::from_integer(BigInt::from(0));
        }
        let k: i64 = loop {
            let k = rng.gen_range(-4..=4);
            if k != 0 {
                break k;
            }
        };
        BigRational::new(BigInt::from(k), BigInt::from(rng.gen_range(1..=3)))
    }

    /// Random valid Stäckel matrix on `x1..xn` with entries
    /// `a + b·x_i + c·x_i²` in row `i` and small rational `a, b, c`.
    /// Redraws until `det S ≢ 0` and the first row of `S⁻¹` has no zero entry.
    pub fn random_stackel<R: Rng>(n: usize, rng: &mut R) -> StackelMatrix {
        let chart = Chart::standard(n);
        loop {
            let entries: FieldMatrix = (0..n)
                .map(|i| {
                    let x = ScalarField::var(Backend::Exact, n, i);
                    let x2 = x.mul(&x);
                    (0..n)
                        .map(|_| {
                            let a = small_rational(rng, 2);
                            let b = small_rational(rng, 4);
                            let c = small_rational(rng, 5);
                            ScalarField::constant(Backend::Exact, n, a)
                                .add(&x.scale(&b))
                                .add(&x2.scale(&c))
                        })
                        .collect()
                })
                .collect();
            let s = StackelMatrix::new(chart.clone(), entries).expect("square exact matrix");
            if let Ok(d) = validate_stackel(&s) {
                if d.first_row_ok() {
                    return s;
                }
            }
        }
    }
}
