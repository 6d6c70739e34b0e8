//! Pointwise form of the block-decomposition argument: expand `{2H, I}` in
//! frame momenta, read off the linear system on the directional derivatives
//! `v_s(ρ_j)`, solve it, and bound the dimension of its solution space.
//!
//! With `V_j = Σ_{s∈j} ε_s u_s²` and `I = Σ_j ρ_j V_j`,
//! `{2H, I} = Σ_{j,s} 2ε_s v_s(ρ_j) u_s V_j + Σ_j ρ_j {2H, V_j}`.
//! The coefficient of `u_t² u_s` involves only `v_s(ρ_{block(t)})`.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use num_traits::ToPrimitive;

use crate::error::{Error, Result};
use crate::framediag::{partition_values, rank_of_rows, BlockPartition, RANK_TOL};
use crate::matrix::{self, FieldMatrix};
use crate::phase_poly::{poisson_bracket, MomentaPolynomial};
use crate::scalarfield::{Chart, ScalarField};
use crate::stackel::StackelSystem;
use crate::tensorcalc::{quadratic_to_poly, CombinationSpec, Metric, QuadraticIntegral};

/// Relative tolerance for grouping combination eigenvalues into blocks.
pub const BLOCK_TOL: f64 = 1e-9;

/// Numeric polynomial in frame momenta `u`, keyed by exponent vector.
pub type FramePolynomial = BTreeMap<Vec<u32>, f64>;

#[derive(Clone, Debug)]
pub struct FrameField {
    pub chart: Chart,
    /// Row `s` holds the components of `v_s`.
    pub rows: FieldMatrix,
    pub blocks: BlockPartition,
    pub signs: Vec<i8>,
    /// `V_j = Σ_{s∈j} ε_s u_s²` as momenta polynomials.
    pub block_quadratics: Vec<MomentaPolynomial>,
}

impl FrameField {
    /// Frame from arbitrary rows; the block quadratics are assembled from
    /// the rows symbolically.
    pub fn from_rows(chart: Chart, rows: FieldMatrix, signs: Vec<i8>, blocks: BlockPartition) -> Result<Self> {
        let n = chart.dim();
        if rows.len() != n || rows.iter().any(|r| r.len() != n) || signs.len() != n || blocks.assignment.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: rows.len() });
        }
        if matrix::determinant(&rows).is_identically_zero() {
            return Err(Error::SingularFrame);
        }
        let backend = rows[0][0].backend();
        let mut block_quadratics = vec![MomentaPolynomial::zero(backend, n); blocks.m];
        for s in 0..n {
            let mut u = MomentaPolynomial::zero(backend, n);
            for (i, c) in rows[s].iter().enumerate() {
                if !c.is_identically_zero() {
                    u = u.add(&MomentaPolynomial::momentum(backend, n, i).scale_field(c)?)?;
                }
            }
            let mut sq = u.mul(&u)?;
            if signs[s] < 0 {
                sq = sq.neg();
            }
            let j = blocks.assignment[s];
            block_quadratics[j] = block_quadratics[j].add(&sq)?;
        }
        Ok(FrameField { chart, rows, blocks, signs, block_quadratics })
    }

    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    pub fn evaluate(&self, point: &[f64]) -> Result<DMatrix<f64>> {
        matrix::evaluate(&self.rows, point)
    }
}

/// `ρ_s = K^{ss}/g^{ss}` for a coordinate-diagonal integral: the eigenvalue
/// of its (1,1) tensor on `∂_s`.
pub fn diagonal_rho_fields(metric: &Metric, integral: &QuadraticIntegral) -> Result<Vec<ScalarField>> {
    let g = metric.inverse_components();
    let k = integral.components();
    (0..metric.dim())
        .map(|s| k[s][s].div(&g[s][s]).map_err(|_| Error::VanishingMetricComponent(s + 1)))
        .collect()
}

fn require_diagonal(metric: &Metric, integrals: &[QuadraticIntegral]) -> Result<()> {
    let diag = metric.as_integral().is_coordinate_diagonal() && integrals.iter().all(|k| k.is_coordinate_diagonal());
    if diag {
        Ok(())
    } else {
        Err(Error::Invalid("coordinate frame requires coordinate-diagonal metric and integrals".into()))
    }
}

/// Coordinate frame `v_s = √|g^{ss}| ∂_s` of a diagonal system at `point`,
/// blocks taken from the λ-combination of the integrals.
pub fn frame_from_diagonal(
    metric: &Metric,
    integrals: &[QuadraticIntegral],
    lambda: &CombinationSpec,
    point: &[f64],
) -> Result<FrameField> {
    require_diagonal(metric, integrals)?;
    if lambda.len() != integrals.len() {
        return Err(Error::DimensionMismatch { expected: integrals.len(), got: lambda.len() });
    }
    let n = metric.dim();
    let backend = metric.backend();
    let g = metric.inverse_components();
    let mut signs = Vec::with_capacity(n);
    let mut gdiag = Vec::with_capacity(n);
    for s in 0..n {
        let v = g[s][s].evaluate(point)?;
        if v == 0.0 || !v.is_finite() {
            return Err(Error::VanishingMetricComponent(s + 1));
        }
        signs.push(if v > 0.0 { 1i8 } else { -1 });
        gdiag.push(v);
    }
    let mut combo = vec![0.0; n];
    for (k, l) in integrals.iter().zip(lambda.coefficients()) {
        let l = l.to_f64().unwrap_or(0.0);
        for s in 0..n {
            combo[s] += l * k.components()[s][s].evaluate(point)? / gdiag[s];
        }
    }
    let blocks = partition_values(&combo, BLOCK_TOL);

    let mut rows = vec![vec![ScalarField::zero(backend, n); n]; n];
    for s in 0..n {
        let e = ScalarField::from_int(backend, n, i64::from(signs[s]));
        rows[s][s] = g[s][s].mul(&e).sqrt();
    }
    // ε_s u_s² = g^{ss} p_s², kept exact.
    let mut block_quadratics = vec![MomentaPolynomial::zero(backend, n); blocks.m];
    for s in 0..n {
        let mut idx = vec![0u32; n];
        idx[s] = 2;
        let j = blocks.assignment[s];
        block_quadratics[j] = block_quadratics[j].add(&MomentaPolynomial::monomial(idx, g[s][s].clone()))?;
    }
    Ok(FrameField { chart: metric.chart().clone(), rows, blocks, signs, block_quadratics })
}

pub fn frame_from_stackel(sys: &StackelSystem, lambda: &CombinationSpec, point: &[f64]) -> Result<FrameField> {
    frame_from_diagonal(&sys.metric, &sys.integrals, lambda, point)
}

fn poly_mul(a: &FramePolynomial, b: &FramePolynomial) -> FramePolynomial {
    let mut out = FramePolynomial::new();
    for (ma, ca) in a {
        for (mb, cb) in b {
            let m: Vec<u32> = ma.iter().zip(mb).map(|(x, y)| x + y).collect();
            *out.entry(m).or_insert(0.0) += ca * cb;
        }
    }
    out
}

/// Rewrites `P` in frame momenta `u = V p` at `point`, i.e. substitutes
/// `p = V⁻¹ u`.
pub fn to_frame_momenta(p: &MomentaPolynomial, frame: &FrameField, point: &[f64]) -> Result<FramePolynomial> {
    let n = frame.dim();
    let v = frame.evaluate(point)?;
    let w = v.try_inverse().ok_or(Error::SingularFrame)?;
    if w.iter().any(|x| !x.is_finite()) {
        return Err(Error::SingularFrame);
    }
    let linear: Vec<FramePolynomial> = (0..n)
        .map(|i| {
            (0..n)
                .filter(|&s| w[(i, s)] != 0.0)
                .map(|s| {
                    let mut e = vec![0u32; n];
                    e[s] = 1;
                    (e, w[(i, s)])
                })
                .collect()
        })
        .collect();
    let mut out = FramePolynomial::new();
    for (idx, c) in p.terms() {
        let cv = c.evaluate(point)?;
        let mut acc: FramePolynomial = [(vec![0u32; n], cv)].into_iter().collect();
        for (i, &e) in idx.iter().enumerate() {
            for _ in 0..e {
                acc = poly_mul(&acc, &linear[i]);
            }
        }
        for (m, v) in acc {
            *out.entry(m).or_insert(0.0) += v;
        }
    }
    Ok(out)
}

/// All exponent vectors of total degree `d` in `n` variables, graded
/// lexicographic descending (`u_1^d` first).
pub fn monomials_desc(n: usize, d: u32) -> Vec<Vec<u32>> {
    fn rec(n: usize, d: u32, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if prefix.len() == n - 1 {
            prefix.push(d);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for e in (0..=d).rev() {
            prefix.push(e);
            rec(n, d - e, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if n > 0 {
        rec(n, d, &mut Vec::new(), &mut out);
    }
    out
}

#[derive(Clone, Debug)]
pub struct RhoSystem {
    pub point: Vec<f64>,
    /// `(s, j)`, zero-based, naming the unknown `v_s(ρ_j)`.
    pub unknowns: Vec<(usize, usize)>,
    /// One row per cubic monomial in `u`, tagged in `monomials`.
    pub matrix: DMatrix<f64>,
    pub rhs: DVector<f64>,
    pub monomials: Vec<Vec<u32>>,
    pub rho_values: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct RhoSolution {
    /// `values[(s, j)]` = `v_s(ρ_j)`.
    pub values: DMatrix<f64>,
    pub residual: f64,
    pub rank: usize,
    pub unique: bool,
}

impl RhoSystem {
    pub fn unknown_index(&self, s: usize, j: usize) -> Option<usize> {
        self.unknowns.iter().position(|&u| u == (s, j))
    }

    /// Row tagged by the given monomial.
    pub fn row_of(&self, monomial: &[u32]) -> Option<usize> {
        self.monomials.iter().position(|m| m.as_slice() == monomial)
    }

    /// The single unknown a row involves with unit coefficient, if the row
    /// has exactly that shape.
    pub fn isolated_unknown(&self, row: usize) -> Option<(usize, usize)> {
        let nz: Vec<usize> = (0..self.matrix.ncols()).filter(|&c| self.matrix[(row, c)] != 0.0).collect();
        match nz.as_slice() {
            [c] if self.matrix[(row, *c)] == 1.0 => Some(self.unknowns[*c]),
            _ => None,
        }
    }

    pub fn solve(&self) -> Result<RhoSolution> {
        let n = self.point.len();
        let m = self.rho_values.len();
        let svd = self.matrix.clone().svd(true, true);
        let smax = svd.singular_values.iter().fold(0.0f64, |a, v| a.max(*v));
        let rank = svd.singular_values.iter().filter(|s| **s > RANK_TOL * smax).count();
        let x = svd.solve(&self.rhs, RANK_TOL * smax).map_err(|e| Error::Invalid(e.to_string()))?;
        let r = &self.matrix * &x - &self.rhs;
        let scale = 1.0 + self.rhs.amax();
        let mut values = DMatrix::zeros(n, m);
        for (c, &(s, j)) in self.unknowns.iter().enumerate() {
            values[(s, j)] = x[c];
        }
        Ok(RhoSolution { values, residual: r.amax() / scale, rank, unique: rank == self.unknowns.len() })
    }

    /// `A·D − b` for a candidate derivative table `d[(s, j)]`.
    pub fn residual_of(&self, d: &DMatrix<f64>) -> f64 {
        let x = DVector::from_iterator(self.unknowns.len(), self.unknowns.iter().map(|&(s, j)| d[(s, j)]));
        (&self.matrix * x - &self.rhs).amax()
    }
}

/// Per-block `ρ_j` of `integral` at `point` for a coordinate-diagonal frame.
pub fn block_rho_values(metric: &Metric, integral: &QuadraticIntegral, frame: &FrameField, point: &[f64]) -> Result<Vec<f64>> {
    let fields = diagonal_rho_fields(metric, integral)?;
    let vals: Vec<f64> = fields.iter().map(|f| f.evaluate(point)).collect::<Result<_>>()?;
    let mut out = Vec::with_capacity(frame.blocks.m);
    for j in 0..frame.blocks.m {
        let members = frame.blocks.members(j);
        let first = vals[members[0]];
        let scale = 1.0 + vals.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if members.iter().any(|&s| (vals[s] - first).abs() > 1e-8 * scale) {
            return Err(Error::InconsistentBlocks(format!("ρ differs inside block {}", j + 1)));
        }
        out.push(first);
    }
    Ok(out)
}

/// Directly differentiated `v_s(ρ_j)` for a coordinate-diagonal system,
/// differentiating the first member's `ρ` field of each block.
pub fn direct_rho_derivatives(
    metric: &Metric,
    integral: &QuadraticIntegral,
    frame: &FrameField,
    point: &[f64],
) -> Result<DMatrix<f64>> {
    let n = frame.dim();
    let fields = diagonal_rho_fields(metric, integral)?;
    let v = frame.evaluate(point)?;
    let mut out = DMatrix::zeros(n, frame.blocks.m);
    for j in 0..frame.blocks.m {
        let rep = &fields[frame.blocks.members(j)[0]];
        let grad: Vec<f64> = (0..n).map(|i| rep.partial(i).evaluate(point)).collect::<Result<_>>()?;
        for s in 0..n {
            out[(s, j)] = (0..n).map(|i| v[(s, i)] * grad[i]).sum();
        }
    }
    Ok(out)
}

/// Expands `{2H, Σ ρ_j V_j} = 0` at `point` into equations on `v_s(ρ_j)`.
pub fn build_rho_system(g: &Metric, frame: &FrameField, rho_values: &[f64], point: &[f64]) -> Result<RhoSystem> {
    let structure = ProofLab::new(g).structure(frame)?;
    build_rho_system_with(g, frame, &structure, rho_values, point)
}

/// As [`build_rho_system`] with the brackets `{2H, V_j}` precomputed.
pub fn build_rho_system_with(
    g: &Metric,
    frame: &FrameField,
    structure: &[MomentaPolynomial],
    rho_values: &[f64],
    point: &[f64],
) -> Result<RhoSystem> {
    let n = frame.dim();
    let m = frame.blocks.m;
    if rho_values.len() != m || structure.len() != m {
        return Err(Error::InconsistentBlocks(format!("expected {m} block values, got {}", rho_values.len())));
    }
    if frame.blocks.sizes.iter().sum::<usize>() != n {
        return Err(Error::InconsistentBlocks("block sizes do not sum to n".into()));
    }
    // The frame must diagonalize g with the recorded signs.
    let v = frame.evaluate(point)?;
    let gm = matrix::evaluate(g.inverse_components(), point)?;
    let e = DMatrix::from_diagonal(&DVector::from_iterator(n, frame.signs.iter().map(|&s| f64::from(s))));
    let recon = v.transpose() * e * &v;
    let err = (&recon - &gm).amax();
    if err > 1e-9 * (1.0 + gm.amax()) {
        return Err(Error::VerificationFailed { residual: err, bound: 1e-9 * (1.0 + gm.amax()) });
    }

    let mut known = FramePolynomial::new();
    for (sj, rho) in structure.iter().zip(rho_values) {
        for (mono, c) in to_frame_momenta(sj, frame, point)? {
            *known.entry(mono).or_insert(0.0) += rho * c;
        }
    }

    let unknowns: Vec<(usize, usize)> = (0..n).flat_map(|s| (0..m).map(move |j| (s, j))).collect();
    let monomials = monomials_desc(n, 3);
    let mut a = DMatrix::zeros(monomials.len(), unknowns.len());
    let mut b = DVector::zeros(monomials.len());
    for (r, mono) in monomials.iter().enumerate() {
        let rhs = -known.get(mono).copied().unwrap_or(0.0);
        // u_s u_t² with the derivative direction s and the block of t.
        let pair = if let Some(s) = mono.iter().position(|&e| e == 3) {
            Some((s, s))
        } else if let (Some(s), Some(t)) = (mono.iter().position(|&e| e == 1), mono.iter().position(|&e| e == 2)) {
            Some((s, t))
        } else {
            None
        };
        match pair {
            Some((s, t)) => {
                let coeff = 2.0 * f64::from(frame.signs[s]) * f64::from(frame.signs[t]);
                let col = s * m + frame.blocks.assignment[t];
                a[(r, col)] = 1.0;
                b[r] = rhs / coeff;
            }
            None => b[r] = rhs,
        }
    }
    Ok(RhoSystem { point: point.to_vec(), unknowns, matrix: a, rhs: b, monomials, rho_values: rho_values.to_vec() })
}

/// Caches the brackets `{2H, V_j}` per block layout for one metric.
pub struct ProofLab<'a> {
    metric: &'a Metric,
    h2: MomentaPolynomial,
    cache: Vec<(BlockPartition, Vec<MomentaPolynomial>)>,
}

/// Solved derivatives against directly differentiated ones at one point.
#[derive(Clone, Debug)]
pub struct RhoComparison {
    pub system: RhoSystem,
    pub solution: RhoSolution,
    pub direct: DMatrix<f64>,
    /// Max of `|solved − direct| / (1 + |direct|)`.
    pub max_error: f64,
    /// Every `u_s u_t²` and `u_s³` row isolates `v_s(ρ_{block(t)})`, every
    /// other row has no unknowns.
    pub structural: bool,
}

impl<'a> ProofLab<'a> {
    pub fn new(metric: &'a Metric) -> Self {
        ProofLab { metric, h2: quadratic_to_poly(&metric.as_integral()), cache: Vec::new() }
    }

    pub fn structure(&mut self, frame: &FrameField) -> Result<Vec<MomentaPolynomial>> {
        if let Some((_, s)) = self.cache.iter().find(|(b, _)| *b == frame.blocks) {
            return Ok(s.clone());
        }
        let s: Vec<MomentaPolynomial> =
            frame.block_quadratics.iter().map(|vj| poisson_bracket(&self.h2, vj)).collect::<Result<_>>()?;
        self.cache.push((frame.blocks.clone(), s.clone()));
        Ok(s)
    }

    pub fn rho_system(&mut self, frame: &FrameField, integral: &QuadraticIntegral, point: &[f64]) -> Result<RhoSystem> {
        let rho = block_rho_values(self.metric, integral, frame, point)?;
        let structure = self.structure(frame)?;
        build_rho_system_with(self.metric, frame, &structure, &rho, point)
    }

    pub fn compare(&mut self, frame: &FrameField, integral: &QuadraticIntegral, point: &[f64]) -> Result<RhoComparison> {
        let system = self.rho_system(frame, integral, point)?;
        let solution = system.solve()?;
        let direct = direct_rho_derivatives(self.metric, integral, frame, point)?;
        let max_error = solution
            .values
            .iter()
            .zip(direct.iter())
            .map(|(a, b)| (a - b).abs() / (1.0 + b.abs()))
            .fold(0.0, f64::max);
        let structural = rows_isolate_derivatives(&system, frame);
        Ok(RhoComparison { system, solution, direct, max_error, structural })
    }
}

/// Checks the row shapes predicted by the bracket expansion.
pub fn rows_isolate_derivatives(system: &RhoSystem, frame: &FrameField) -> bool {
    system.monomials.iter().enumerate().all(|(r, mono)| {
        let cube = mono.iter().position(|&e| e == 3);
        let lin = mono.iter().position(|&e| e == 1);
        let sq = mono.iter().position(|&e| e == 2);
        let expected = match (cube, lin, sq) {
            (Some(s), _, _) => Some((s, frame.blocks.assignment[s])),
            (None, Some(s), Some(t)) => Some((s, frame.blocks.assignment[t])),
            _ => None,
        };
        match expected {
            Some(u) => system.isolated_unknown(r) == Some(u),
            None => (0..system.matrix.ncols()).all(|c| system.matrix[(r, c)] == 0.0),
        }
    })
}

#[derive(Clone, Debug)]
pub struct SolutionBound {
    /// Dimension of the space of admissible `(ρ_1..ρ_m)` initial values.
    pub bound: usize,
    pub n: usize,
    /// Rank of the `n × m` matrix of the integrals' `ρ`-vectors, per point.
    pub witness_ranks: Vec<usize>,
    pub per_point_m: Vec<usize>,
    pub uniquely_solvable: bool,
    pub counterexample: Option<String>,
}

impl SolutionBound {
    pub fn holds(&self) -> bool {
        self.counterexample.is_none()
    }
}

/// At each point the derivatives of `ρ` are determined linearly by the
/// values of `ρ`, so admissible `ρ` form a space of dimension at most `m`.
/// The supplied integrals witness `n` independent solutions; the bound
/// holds when every point has a uniquely solvable system and witness rank
/// `n = m`.
pub fn solution_space_bound(
    metric: &Metric,
    integrals: &[QuadraticIntegral],
    lambda: &CombinationSpec,
    sample_points: &[Vec<f64>],
) -> Result<SolutionBound> {
    if sample_points.is_empty() {
        return Err(Error::Invalid("solution_space_bound needs at least one point".into()));
    }
    let n = metric.dim();
    let mut lab = ProofLab::new(metric);
    let mut witness_ranks = Vec::new();
    let mut per_point_m = Vec::new();
    let mut uniquely_solvable = true;
    let mut problems = Vec::new();
    for (pi, point) in sample_points.iter().enumerate() {
        let frame = frame_from_diagonal(metric, integrals, lambda, point)?;
        let m = frame.blocks.m;
        per_point_m.push(m);
        let mut rho_rows = Vec::with_capacity(integrals.len());
        for k in integrals {
            let sys = lab.rho_system(&frame, k, point)?;
            if sys.solve()?.rank != sys.unknowns.len() {
                uniquely_solvable = false;
            }
            rho_rows.push(sys.rho_values);
        }
        let rank = rank_of_rows(&rho_rows, RANK_TOL);
        witness_ranks.push(rank);
        if rank < integrals.len() {
            problems.push(format!("point {}: rho-vectors of the {} integrals have rank {rank}", pi + 1, integrals.len()));
        } else if m != n {
            problems.push(format!("point {}: {m} blocks but n = {n}", pi + 1));
        }
    }
    if !uniquely_solvable {
        problems.push("derivative system not uniquely solvable".into());
    }
    let bound = per_point_m.iter().copied().max().unwrap_or(0);
    Ok(SolutionBound {
        bound,
        n,
        witness_ranks,
        per_point_m,
        uniquely_solvable,
        counterexample: if problems.is_empty() { None } else { Some(problems.join("; ")) },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalarfield::{parse_expression, Backend};
    use crate::stackel::{library, stackel_integrals};
    use num_rational::BigRational;

    fn lambda(v: &[i64]) -> CombinationSpec {
        CombinationSpec::new(v.iter().map(|&x| BigRational::from_integer(x.into())).collect()).unwrap()
    }

    #[test]
    fn polar_frame_rows() {
        let sys = stackel_integrals(&library::polar()).unwrap();
        let f = frame_from_stackel(&sys, &lambda(&[1, 3]), &[2.0, 0.0]).unwrap();
        let v = f.evaluate(&[2.0, 0.0]).unwrap();
        assert!((v[(0, 0)] - 1.0).abs() < 1e-15 && (v[(1, 1)] - 0.5).abs() < 1e-15);
        assert_eq!(f.signs, vec![1, 1]);
        assert_eq!(f.blocks.m, 2);
    }

    #[test]
    fn lorentzian_signs() {
        let c = Chart::standard(2);
        let e = |t: &str| parse_expression(t, &c, Backend::Exact).unwrap();
        let g = Metric::diagonal(c.clone(), vec![e("1"), e("-1")]).unwrap();
        let f = frame_from_diagonal(&g, &[g.as_integral()], &lambda(&[1]), &[1.0, 1.0]).unwrap();
        assert_eq!(f.signs, vec![1, -1]);
        assert_eq!(f.blocks.m, 1);
    }

    #[test]
    fn frame_momenta_substitution() {
        let sys = stackel_integrals(&library::polar()).unwrap();
        let f = frame_from_stackel(&sys, &lambda(&[1, 3]), &[2.0, 0.0]).unwrap();
        let p2sq = MomentaPolynomial::monomial(vec![0, 2], ScalarField::one(Backend::Exact, 2));
        let u = to_frame_momenta(&p2sq, &f, &[2.0, 0.0]).unwrap();
        assert_eq!(u.len(), 1);
        assert!((u[&vec![0, 2]] - 4.0).abs() < 1e-12);
    }

    #[test]
    fn monomial_order() {
        assert_eq!(monomials_desc(2, 3), vec![vec![3, 0], vec![2, 1], vec![1, 2], vec![0, 3]]);
        assert_eq!(monomials_desc(3, 3).len(), 10);
    }

    #[test]
    fn polar_rho_system_recovers_derivative() {
        let sys = stackel_integrals(&library::polar()).unwrap();
        let x = [1.0, 0.0];
        let f = frame_from_stackel(&sys, &lambda(&[1, 3]), &x).unwrap();
        let rho = block_rho_values(&sys.metric, &sys.integrals[1], &f, &x).unwrap();
        assert_eq!(rho, vec![0.0, 1.0]);
        let rs = build_rho_system(&sys.metric, &f, &rho, &x).unwrap();
        let sol = rs.solve().unwrap();
        assert!(sol.unique);
        assert!((sol.values[(0, 1)] - 2.0).abs() < 1e-12);
        assert!(sol.values[(0, 0)].abs() < 1e-12);
        assert!(sol.values[(1, 0)].abs() < 1e-12 && sol.values[(1, 1)].abs() < 1e-12);
        // u_2² u_1 isolates v_1(ρ_2); u_1³ isolates v_1(ρ_1).
        assert_eq!(rs.isolated_unknown(rs.row_of(&[1, 2]).unwrap()), Some((0, 1)));
        assert_eq!(rs.isolated_unknown(rs.row_of(&[3, 0]).unwrap()), Some((0, 0)));
    }

    #[test]
    fn flat_has_zero_derivatives() {
        let sys = stackel_integrals(&library::flat()).unwrap();
        let x = [0.7, 1.3];
        let f = frame_from_stackel(&sys, &lambda(&[1, 3]), &x).unwrap();
        let rho = block_rho_values(&sys.metric, &sys.integrals[1], &f, &x).unwrap();
        let sol = build_rho_system(&sys.metric, &f, &rho, &x).unwrap().solve().unwrap();
        assert!(sol.values.amax() < 1e-14);
    }

    #[test]
    fn bounds() {
        let sys = stackel_integrals(&library::polar()).unwrap();
        let b = solution_space_bound(&sys.metric, &sys.integrals, &lambda(&[1, 3]), &[vec![1.0, 0.0], vec![2.0, 1.0]])
            .unwrap();
        assert_eq!((b.bound, b.witness_ranks.clone()), (2, vec![2, 2]));
        assert!(b.holds());
        let dup = [sys.integrals[0].clone(), sys.integrals[0].clone()];
        let b = solution_space_bound(&sys.metric, &dup, &lambda(&[1, 3]), &[vec![1.0, 0.0]]).unwrap();
        assert_eq!(b.witness_ranks, vec![1]);
        assert!(!b.holds());
    }
}
