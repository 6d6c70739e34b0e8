//! Small dense matrices of scalar fields.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::scalarfield::{Backend, ScalarField};

pub type FieldMatrix = Vec<Vec<ScalarField>>;

pub fn identity(backend: Backend, n: usize) -> FieldMatrix {
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| if i == j { ScalarField::one(backend, n) } else { ScalarField::zero(backend, n) })
                .collect()
        })
        .collect()
}

pub fn is_square(m: &FieldMatrix) -> bool {
    m.iter().all(|row| row.len() == m.len())
}

/// Laplace expansion along the first row.
pub fn determinant(m: &FieldMatrix) -> ScalarField {
    let n = m.len();
    assert!(n > 0 && is_square(m), "determinant of a non-square matrix");
    match n {
        1 => m[0][0].clone(),
        2 => m[0][0].mul(&m[1][1]).sub(&m[0][1].mul(&m[1][0])),
        _ => {
            let mut acc = ScalarField::zero(m[0][0].backend(), m[0][0].nvars());
            for j in 0..n {
                if m[0][j].is_identically_zero() {
                    continue;
                }
                let term = m[0][j].mul(&determinant(&minor(m, 0, j)));
                acc = if j % 2 == 0 { acc.add(&term) } else { acc.sub(&term) };
            }
            acc
        }
    }
}

fn minor(m: &FieldMatrix, row: usize, col: usize) -> FieldMatrix {
    m.iter()
        .enumerate()
        .filter(|(i, _)| *i != row)
        .map(|(_, r)| r.iter().enumerate().filter(|(j, _)| *j != col).map(|(_, v)| v.clone()).collect())
        .collect()
}

/// Transposed cofactor matrix.
pub fn adjugate(m: &FieldMatrix) -> FieldMatrix {
    let n = m.len();
    let backend = m[0][0].backend();
    let nvars = m[0][0].nvars();
    if n == 1 {
        return vec![vec![ScalarField::one(backend, nvars)]];
    }
    let mut adj = vec![vec![ScalarField::zero(backend, nvars); n]; n];
    for i in 0..n {
        for j in 0..n {
            let c = determinant(&minor(m, i, j));
            adj[j][i] = if (i + j) % 2 == 0 { c } else { c.neg() };
        }
    }
    adj
}

/// Symbolic inverse via the adjugate. Fails when the determinant is
/// identically zero (EXACT) or structurally zero (NUMERIC).
pub fn inverse(m: &FieldMatrix) -> Result<FieldMatrix> {
    let det = determinant(m);
    if det.is_identically_zero() {
        return Err(Error::Singular("determinant is identically zero".into()));
    }
    adjugate(m)
        .into_iter()
        .map(|row| row.into_iter().map(|c| c.div(&det)).collect())
        .collect()
}

pub fn multiply(a: &FieldMatrix, b: &FieldMatrix) -> FieldMatrix {
    let n = a.len();
    let k = b.len();
    let m = b[0].len();
    let backend = a[0][0].backend();
    let nvars = a[0][0].nvars();
    (0..n)
        .map(|i| {
            (0..m)
                .map(|j| {
                    (0..k).fold(ScalarField::zero(backend, nvars), |acc, s| {
                        if a[i][s].is_identically_zero() || b[s][j].is_identically_zero() {
                            acc
                        } else {
                            acc.add(&a[i][s].mul(&b[s][j]))
                        }
                    })
                })
                .collect()
        })
        .collect()
}

pub fn transpose(a: &FieldMatrix) -> FieldMatrix {
    (0..a[0].len()).map(|j| a.iter().map(|row| row[j].clone()).collect()).collect()
}

pub fn evaluate(m: &FieldMatrix, point: &[f64]) -> Result<DMatrix<f64>> {
    let rows = m.len();
    let cols = m.first().map_or(0, Vec::len);
    let mut out = DMatrix::zeros(rows, cols);
    for (i, row) in m.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            out[(i, j)] = v.evaluate(point)?;
        }
    }
    Ok(out)
}

pub fn to_backend(m: &FieldMatrix, backend: Backend) -> Result<FieldMatrix> {
    m.iter().map(|row| row.iter().map(|v| v.to_backend(backend)).collect()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalarfield::{parse_expression, Chart};

    fn mat(chart: &Chart, rows: &[&[&str]]) -> FieldMatrix {
        rows.iter()
            .map(|r| r.iter().map(|t| parse_expression(t, chart, Backend::Exact).unwrap()).collect())
            .collect()
    }

    #[test]
    fn inverse_times_matrix_is_identity() {
        let c = Chart::standard(3);
        let m = mat(&c, &[&["x1", "1", "0"], &["x2^2", "-1", "x2"], &["1", "x3", "2"]]);
        let inv = inverse(&m).unwrap();
        assert_eq!(multiply(&m, &inv), identity(Backend::Exact, 3));
    }

    #[test]
    fn singular_detected() {
        let c = Chart::standard(2);
        let m = mat(&c, &[&["x1", "x2"], &["2*x1", "2*x2"]]);
        assert!(matches!(inverse(&m), Err(Error::Singular(_))));
    }
}
