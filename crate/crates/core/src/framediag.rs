//! Pointwise simultaneous diagonalization of quadratic integrals, block
//! partitions and the two pointwise checks behind the independence theorem.
//!
//! Tensors are passed as upper-index component matrices `K^{ij}` evaluated
//! at a point; the metric likewise as `g^{ij}`. Frame vectors `v_s` are the
//! rows of `PointFrame::basis` and satisfy `K = Vᵀ D V`, so in frame momenta
//! `u = V p` each tensor reads `Σ_s D_s u_s²`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_traits::ToPrimitive;
use rand::Rng;

use crate::error::{Error, Result};
use crate::matrix;
use crate::sampling::{random_coefficient, seeded, to_f64_point, SampleBox};
use crate::tensorcalc::{Metric, QuadraticIntegral};

/// Seed for the internal random combination used to split eigenspaces.
pub const COMBINATION_SEED: u64 = 0x00f2_a3e0;
const RETRIES: usize = 3;
pub const RANK_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct PointFrame {
    pub point: Vec<f64>,
    /// Rows are the frame vectors `v_1..v_n`.
    pub basis: DMatrix<f64>,
    /// `diagonals[α][s]`: diagonal entry of tensor α on `v_s`.
    pub diagonals: Vec<Vec<f64>>,
    pub signs: Vec<i8>,
}

impl PointFrame {
    pub fn dim(&self) -> usize {
        self.basis.nrows()
    }

    /// Eigenvalue of the (1,1)-tensor of `Σ λ_α K_α` on each frame vector,
    /// i.e. `ε_s Σ_α λ_α D_{α,s}`.
    pub fn combination_eigenvalues(&self, lambda: &[f64]) -> Vec<f64> {
        (0..self.dim())
            .map(|s| {
                let d: f64 = self.diagonals.iter().zip(lambda).map(|(row, l)| l * row[s]).sum();
                f64::from(self.signs[s]) * d
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BlockPartition {
    pub m: usize,
    pub sizes: Vec<usize>,
    /// Block index of every frame vector.
    pub assignment: Vec<usize>,
}

impl BlockPartition {
    pub fn members(&self, block: usize) -> Vec<usize> {
        (0..self.assignment.len()).filter(|&s| self.assignment[s] == block).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EigenGap {
    pub distinct: bool,
    pub min_gap: f64,
    pub eigenvalues: Vec<f64>,
    pub reason: Option<String>,
}

#[derive(Clone, Debug)]
pub struct DiagonalizationReport {
    pub frame: std::result::Result<PointFrame, String>,
    pub partition: Option<BlockPartition>,
    pub restriction_rank: usize,
    pub min_eigen_gap: f64,
    pub distinct: EigenGap,
}

fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0f64, |a, v| a.max(v.abs()))
}

fn lower(g_at: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = g_at.nrows();
    if n == 0 || g_at.ncols() != n {
        return Err(Error::DimensionMismatch { expected: n, got: g_at.ncols() });
    }
    let scale = max_abs(g_at).max(f64::MIN_POSITIVE);
    let lu = g_at.clone().lu();
    let det = lu.determinant();
    if !det.is_finite() || det.abs() <= 1e-14 * scale.powi(n as i32) {
        return Err(Error::Singular("metric is degenerate at the point".into()));
    }
    lu.try_inverse().ok_or_else(|| Error::Singular("metric is degenerate at the point".into()))
}

fn check_symmetric(m: &DMatrix<f64>, n: usize) -> Result<()> {
    if m.nrows() != n || m.ncols() != n {
        return Err(Error::DimensionMismatch { expected: n, got: m.nrows() });
    }
    let tol = 1e-12 * (1.0 + max_abs(m));
    for i in 0..n {
        for j in i + 1..n {
            if (m[(i, j)] - m[(j, i)]).abs() > tol {
                return Err(Error::NotSymmetric(i + 1, j + 1));
            }
        }
    }
    Ok(())
}

/// Right singular vectors of `a` for its `count` smallest singular values,
/// together with the largest of those singular values.
fn smallest_right_vectors(a: &DMatrix<f64>, count: usize) -> (DMatrix<f64>, f64) {
    let k = a.ncols();
    let svd = a.clone().svd(false, true);
    let v_t = svd.v_t.expect("requested V");
    let mut idx: Vec<usize> = (0..svd.singular_values.len()).collect();
    idx.sort_by(|&x, &y| svd.singular_values[x].total_cmp(&svd.singular_values[y]));
    // A wide SVD of a square matrix has k singular values; guard anyway.
    let mut out = DMatrix::zeros(k, count);
    let mut worst = 0.0f64;
    for (c, &i) in idx.iter().take(count).enumerate() {
        out.set_column(c, &v_t.row(i).transpose());
        worst = worst.max(svd.singular_values[i]);
    }
    (out, worst)
}

fn is_scalar(c: &DMatrix<f64>, scale: f64) -> bool {
    let k = c.nrows();
    let mean = c.trace() / k as f64;
    let tol = 1e-9 * (1.0 + scale);
    (0..k).all(|i| (0..k).all(|j| (c[(i, j)] - if i == j { mean } else { 0.0 }).abs() <= tol))
}

/// Splits the invariant subspace spanned by the columns of `b` into common
/// eigenspaces of all `ls`, returned as column bases.
fn split<R: Rng>(b: DMatrix<f64>, ls: &[DMatrix<f64>], rng: &mut R, depth: usize) -> Result<Vec<DMatrix<f64>>> {
    let k = b.ncols();
    let pinv = b
        .clone()
        .pseudo_inverse(1e-12)
        .map_err(|e| Error::NonDiagonalizable(format!("subspace basis: {e}")))?;
    let cs: Vec<DMatrix<f64>> = ls.iter().map(|l| &pinv * l * &b).collect();
    let scale = cs.iter().map(max_abs).fold(0.0, f64::max);
    if k == 1 || cs.iter().all(|c| is_scalar(c, scale)) || depth > 16 {
        return Ok(vec![b]);
    }
    let mut last = String::new();
    for _attempt in 0..=RETRIES {
        let coeffs: Vec<f64> = cs.iter().map(|_| random_coefficient(rng).to_f64().unwrap_or(1.0)).collect();
        let combo = cs.iter().zip(&coeffs).fold(DMatrix::zeros(k, k), |acc, (c, w)| acc + c * *w);
        let cscale = max_abs(&combo).max(f64::MIN_POSITIVE);
        let eig = combo.complex_eigenvalues();
        if eig.iter().any(|z| z.im.abs() > 1e-9 * (1.0 + cscale)) {
            last = "complex eigenvalues".into();
            continue;
        }
        let mut vals: Vec<f64> = eig.iter().map(|z| z.re).collect();
        vals.sort_by(|a, b| b.total_cmp(a));
        let clusters = cluster(&vals, 1e-7 * (1.0 + cscale));
        if clusters.len() == 1 {
            last = "combination is scalar on a non-scalar subspace".into();
            continue;
        }
        let mut pieces = Vec::new();
        let mut defective = false;
        for (value, mult) in clusters {
            let shifted = &combo - DMatrix::identity(k, k) * value;
            let (null, resid) = smallest_right_vectors(&shifted, mult);
            if resid > 1e-6 * (1.0 + cscale) {
                defective = true;
                break;
            }
            pieces.push(&b * null);
        }
        if defective {
            last = "defective eigenspace".into();
            continue;
        }
        let mut out = Vec::new();
        for piece in pieces {
            out.extend(split(piece, ls, rng, depth + 1)?);
        }
        return Ok(out);
    }
    Err(Error::NonDiagonalizable(last))
}

/// Groups a descending list into runs closer than `tol`; returns (mean, size).
fn cluster(sorted_desc: &[f64], tol: f64) -> Vec<(f64, usize)> {
    let mut out: Vec<(f64, usize, f64)> = Vec::new();
    for &v in sorted_desc {
        match out.last_mut() {
            Some((_, n, last)) if (*last - v).abs() <= tol => {
                *n += 1;
                *last = v;
            }
            _ => out.push((v, 1, v)),
        }
    }
    let mut i = 0;
    out.into_iter()
        .map(|(_, n, _)| {
            let mean = sorted_desc[i..i + n].iter().sum::<f64>() / n as f64;
            i += n;
            (mean, n)
        })
        .collect()
}

/// Index of the largest |component|, preferring the first among near ties.
fn leading_index(v: &DVector<f64>) -> usize {
    let m = v.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    v.iter().position(|x| x.abs() >= m * (1.0 - 1e-9)).unwrap_or(0)
}

/// Finds a basis in which every `K_α` and the metric are diagonal, with the
/// metric normalized to signs `±1`.
pub fn simultaneous_diagonalize(g_at: &DMatrix<f64>, ks_at: &[DMatrix<f64>], tol: f64) -> Result<PointFrame> {
    simultaneous_diagonalize_seeded(g_at, ks_at, tol, COMBINATION_SEED)
}

pub fn simultaneous_diagonalize_seeded(
    g_at: &DMatrix<f64>,
    ks_at: &[DMatrix<f64>],
    tol: f64,
    seed: u64,
) -> Result<PointFrame> {
    let n = g_at.nrows();
    check_symmetric(g_at, n)?;
    for k in ks_at {
        check_symmetric(k, n)?;
    }
    let gl = lower(g_at)?;
    let ls: Vec<DMatrix<f64>> = ks_at.iter().map(|k| k * &gl).collect();
    let mut rng = seeded(seed);
    let pieces = split(DMatrix::identity(n, n), &ls, &mut rng, 0)?;

    // g-orthonormalize each common eigenspace, +1 directions first.
    let mut groups: Vec<Vec<(DVector<f64>, i8)>> = Vec::new();
    for b in pieces {
        let gram = b.transpose() * &gl * &b;
        let gram = (&gram + gram.transpose()) * 0.5;
        let eig = SymmetricEigen::new(gram);
        let gscale = eig.eigenvalues.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let mut vecs = Vec::new();
        for i in 0..b.ncols() {
            let lam = eig.eigenvalues[i];
            if lam.abs() <= 1e-12 * gscale.max(1e-300) || lam == 0.0 {
                return Err(Error::NonDiagonalizable("null direction of the metric in a common eigenspace".into()));
            }
            let mut v: DVector<f64> = &b * eig.eigenvectors.column(i) / lam.abs().sqrt();
            let lead = leading_index(&v);
            if v[lead] < 0.0 {
                v = -v;
            }
            vecs.push((v, if lam > 0.0 { 1 } else { -1 }));
        }
        vecs.sort_by(|a, b| b.1.cmp(&a.1).then(leading_index(&a.0).cmp(&leading_index(&b.0))));
        groups.push(vecs);
    }

    // Combination eigenvalue of each group for ordering.
    let probe: Vec<f64> = (0..ls.len()).map(|a| 1.0 + a as f64 * 0.618).collect();
    let key = |g: &Vec<(DVector<f64>, i8)>| -> (usize, f64) {
        let v = &g[0].0;
        let lv = ls.iter().zip(&probe).fold(DVector::zeros(n), |acc, (l, w)| acc + (l * v) * *w);
        let rho = lv.dot(v) / v.dot(v);
        (leading_index(v), rho)
    };
    let mut keyed: Vec<((usize, f64), Vec<(DVector<f64>, i8)>)> = groups.into_iter().map(|g| (key(&g), g)).collect();
    keyed.sort_by(|a, b| a.0 .0.cmp(&b.0 .0).then(b.0 .1.total_cmp(&a.0 .1)));

    let mut basis = DMatrix::zeros(n, n);
    let mut signs = Vec::with_capacity(n);
    let mut row = 0;
    for (_, g) in keyed {
        for (v, e) in g {
            basis.set_row(row, &v.transpose());
            signs.push(e);
            row += 1;
        }
    }

    let e = DMatrix::from_diagonal(&DVector::from_iterator(n, signs.iter().map(|&s| f64::from(s))));
    let metric_in_frame = &basis * &gl * basis.transpose();
    let metric_err = max_abs(&(metric_in_frame - &e));
    if metric_err > tol.max(1e-12) * 1e3 {
        return Err(Error::VerificationFailed { residual: metric_err, bound: tol * 1e3 });
    }
    let mut diagonals = Vec::with_capacity(ks_at.len());
    for k in ks_at {
        let d = &e * &basis * &gl * k * &gl * basis.transpose() * &e;
        let bound = tol * max_abs(k).max(max_abs(&d));
        let mut off = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    off = off.max(d[(i, j)].abs());
                }
            }
        }
        if off > bound {
            return Err(Error::VerificationFailed { residual: off, bound });
        }
        diagonals.push((0..n).map(|s| d[(s, s)]).collect());
    }
    Ok(PointFrame { point: Vec::new(), basis, diagonals, signs })
}

/// Groups indices whose values differ by at most `tol·(1 + max|value|)`,
/// blocks numbered by first occurrence.
pub fn block_partition(_frame: &PointFrame, combo_diag: &[f64], tol: f64) -> BlockPartition {
    partition_values(combo_diag, tol)
}

pub fn partition_values(values: &[f64], tol: f64) -> BlockPartition {
    let scale = values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let thr = tol * (1.0 + scale);
    let mut reps: Vec<f64> = Vec::new();
    let mut sizes: Vec<usize> = Vec::new();
    let mut assignment = Vec::with_capacity(values.len());
    for &v in values {
        match reps.iter().position(|r| (r - v).abs() <= thr) {
            Some(b) => {
                sizes[b] += 1;
                assignment.push(b);
            }
            None => {
                reps.push(v);
                sizes.push(1);
                assignment.push(reps.len() - 1);
            }
        }
    }
    BlockPartition { m: reps.len(), sizes, assignment }
}

/// Numeric rank of the matrix of diagonal entries (one row per tensor).
pub fn restriction_rank(frame: &PointFrame) -> usize {
    rank_of_rows(&frame.diagonals, RANK_TOL)
}

pub fn rank_of_rows(rows: &[Vec<f64>], tol: f64) -> usize {
    if rows.is_empty() || rows[0].is_empty() {
        return 0;
    }
    let m = DMatrix::from_fn(rows.len(), rows[0].len(), |i, j| rows[i][j]);
    let sv = m.singular_values();
    let smax = sv.iter().fold(0.0f64, |a, v| a.max(*v));
    if smax == 0.0 || !smax.is_finite() {
        return 0;
    }
    sv.iter().filter(|s| **s > tol * smax).count()
}

/// Eigenvalues of `K·g_lower`; distinct iff every pairwise gap exceeds `tol`.
pub fn distinct_eigenvalue_check(g_at: &DMatrix<f64>, k_at: &DMatrix<f64>, tol: f64) -> Result<EigenGap> {
    let n = g_at.nrows();
    check_symmetric(k_at, n)?;
    let l = k_at * lower(g_at)?;
    let scale = max_abs(&l);
    let eig = l.complex_eigenvalues();
    if eig.iter().any(|z| z.im.abs() > 1e-9 * (1.0 + scale)) {
        return Ok(EigenGap {
            distinct: false,
            min_gap: 0.0,
            eigenvalues: eig.iter().map(|z| z.re).collect(),
            reason: Some("complex eigenvalues".into()),
        });
    }
    let mut vals: Vec<f64> = eig.iter().map(|z| z.re).collect();
    vals.sort_by(|a, b| b.total_cmp(a));
    let min_gap = vals.windows(2).map(|w| w[0] - w[1]).fold(f64::INFINITY, f64::min);
    Ok(EigenGap { distinct: min_gap > tol, min_gap, eigenvalues: vals, reason: None })
}

/// Runs every pointwise check for one point: frame, partition of the
/// `lambda`-combination, restriction rank and eigenvalue distinctness.
pub fn diagnose_point(
    point: &[f64],
    g_at: &DMatrix<f64>,
    ks_at: &[DMatrix<f64>],
    lambda: &[f64],
    tol: f64,
) -> Result<DiagonalizationReport> {
    let n = g_at.nrows();
    let combo = ks_at.iter().zip(lambda).fold(DMatrix::zeros(n, n), |acc, (k, l)| acc + k * *l);
    let distinct = distinct_eigenvalue_check(g_at, &combo, tol)?;
    let report = match simultaneous_diagonalize(g_at, ks_at, tol) {
        Ok(mut frame) => {
            frame.point = point.to_vec();
            let rho = frame.combination_eigenvalues(lambda);
            let partition = block_partition(&frame, &rho, tol);
            DiagonalizationReport {
                restriction_rank: restriction_rank(&frame),
                partition: Some(partition),
                frame: Ok(frame),
                min_eigen_gap: distinct.min_gap,
                distinct,
            }
        }
        Err(e) => DiagonalizationReport {
            frame: Err(e.to_string()),
            partition: None,
            restriction_rank: 0,
            min_eigen_gap: distinct.min_gap,
            distinct,
        },
    };
    Ok(report)
}

/// Component magnitude above which a sample point counts as near a pole.
pub const POLE_BOUND: f64 = 1e6;

/// `g^{ij}` and every `K_α` evaluated at `point`.
pub fn evaluate_system(
    metric: &Metric,
    tensors: &[QuadraticIntegral],
    point: &[f64],
) -> Result<(DMatrix<f64>, Vec<DMatrix<f64>>)> {
    let g = matrix::evaluate(metric.inverse_components(), point)?;
    let ks = tensors.iter().map(|k| matrix::evaluate(k.components(), point)).collect::<Result<_>>()?;
    Ok((g, ks))
}

/// Finite, bounded components and a metric determinant away from zero.
pub fn is_regular(g: &DMatrix<f64>, ks: &[DMatrix<f64>]) -> bool {
    let bounded = |m: &DMatrix<f64>| m.iter().all(|v| v.is_finite() && v.abs() <= POLE_BOUND);
    bounded(g) && ks.iter().all(bounded) && g.determinant().abs() >= 1.0 / POLE_BOUND
}

/// Seeded rational sample points at which the system is regular.
pub fn regular_points<R: Rng>(
    metric: &Metric,
    tensors: &[QuadraticIntegral],
    count: usize,
    domain: &SampleBox,
    rng: &mut R,
) -> Vec<Vec<f64>> {
    let n = metric.dim();
    let mut out = Vec::with_capacity(count);
    let mut attempts = 0;
    while out.len() < count && attempts < 64 * count.max(1) {
        attempts += 1;
        let x = to_f64_point(&domain.sample_rational(n, rng));
        if let Ok((g, ks)) = evaluate_system(metric, tensors, &x) {
            if is_regular(&g, &ks) {
                out.push(x);
            }
        }
    }
    out
}
