//! JSON system and Stäckel files.

use serde::{Deserialize, Serialize};

use stackel_core::scalarfield::{parse_expression, Backend, Chart, ScalarField};
use stackel_core::stackel::{StackelMatrix, StackelSystem};
use stackel_core::tensorcalc::{Metric, QuadraticIntegral};
use stackel_core::Error;

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegralEntry {
    pub label: String,
    /// Upper triangle (row `i` has `n − i` entries) or full square.
    pub components: Vec<Vec<String>>,
}

/// A metric with its quadratic integrals. The metric itself is the
/// implicit first integral `2H`; `integrals` lists the others.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemFile {
    pub chart: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub backend: Option<String>,
    /// Inverse metric `g^{ij}`, upper triangle or full square.
    pub metric: Vec<Vec<String>>,
    #[serde(default)]
    pub integrals: Vec<IntegralEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stackel: Option<Vec<Vec<String>>>,
    /// 1-based row of `S⁻¹` used as `2H`; default 1.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hamiltonian_row: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StackelFile {
    pub chart: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub backend: Option<String>,
    pub stackel: Vec<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hamiltonian_row: Option<usize>,
}

/// A parsed system: `tensors[0]` is the metric as `2H`.
#[derive(Debug, Clone)]
pub struct LoadedSystem {
    pub chart: Chart,
    pub backend: Backend,
    pub metric: Metric,
    pub tensors: Vec<QuadraticIntegral>,
    pub stackel: Option<StackelMatrix>,
    pub hamiltonian_row: usize,
}

impl LoadedSystem {
    pub fn dim(&self) -> usize {
        self.chart.dim()
    }

    pub fn labels(&self) -> Vec<String> {
        self.tensors.iter().map(|k| k.label().to_string()).collect()
    }
}

fn input<E: std::fmt::Display>(context: &str) -> impl Fn(E) -> CliError + '_ {
    move |e| CliError::Input(format!("{context}: {e}"))
}

fn parse_backend(tag: Option<&str>) -> Result<Option<Backend>, CliError> {
    tag.map(|t| t.parse::<Backend>().map_err(input("backend"))).transpose()
}

fn parse_matrix(chart: &Chart, rows: &[Vec<String>], backend: Backend, what: &str) -> Result<Vec<Vec<ScalarField>>, CliError> {
    let n = chart.dim();
    let triangle = rows.len() == n && rows.iter().enumerate().all(|(i, r)| r.len() == n - i);
    let square = rows.len() == n && rows.iter().all(|r| r.len() == n);
    if !triangle && !square {
        return Err(CliError::Input(format!("{what}: expected an upper triangle or a {n}x{n} matrix")));
    }
    let parse = |text: &str| parse_expression(text, chart, backend);
    let mut out = vec![vec![ScalarField::zero(backend, n); n]; n];
    for i in 0..n {
        for j in 0..n {
            if triangle && j < i {
                continue;
            }
            let text = if triangle { &rows[i][j - i] } else { &rows[i][j] };
            out[i][j] = parse(text).map_err(|e| tag_error(e, &format!("{what}[{}][{}]", i + 1, j + 1)))?;
        }
    }
    if triangle {
        for i in 0..n {
            for j in 0..i {
                out[i][j] = out[j][i].clone();
            }
        }
    }
    Ok(out)
}

fn tag_error(e: Error, what: &str) -> CliError {
    match e {
        Error::Transcendental { .. } => CliError::Transcendental(format!("{what}: {e}")),
        _ => CliError::Input(format!("{what}: {e}")),
    }
}

fn chart_of(names: &[String]) -> Result<Chart, CliError> {
    Chart::new(names.iter().cloned()).map_err(input("chart"))
}

fn row_index(row: Option<usize>, n: usize) -> Result<usize, CliError> {
    match row {
        None => Ok(0),
        Some(r) if (1..=n).contains(&r) => Ok(r - 1),
        Some(r) => Err(CliError::Input(format!("hamiltonian_row {r} outside 1..={n}"))),
    }
}

/// Runs `build` under the requested backend, or EXACT with a NUMERIC
/// fallback when the expressions need transcendental functions.
fn with_backend<T>(
    requested: Option<Backend>,
    build: impl Fn(Backend) -> Result<T, CliError>,
) -> Result<T, CliError> {
    match requested {
        Some(b) => build(b),
        None => match build(Backend::Exact) {
            Err(CliError::Transcendental(_)) => build(Backend::Numeric),
            other => other,
        },
    }
}

impl SystemFile {
    pub fn load(&self, backend_override: Option<Backend>) -> Result<LoadedSystem, CliError> {
        let chart = chart_of(&self.chart)?;
        let requested = backend_override.or(parse_backend(self.backend.as_deref())?);
        let n = chart.dim();
        let hamiltonian_row = row_index(self.hamiltonian_row, n)?;
        with_backend(requested, |backend| {
            let g = parse_matrix(&chart, &self.metric, backend, "metric")?;
            let metric = Metric::new(chart.clone(), g).map_err(input("metric"))?;
            let mut tensors = vec![metric.as_integral()];
            for (k, entry) in self.integrals.iter().enumerate() {
                let what = format!("integrals[{}] ({})", k + 1, entry.label);
                let comps = parse_matrix(&chart, &entry.components, backend, &what)?;
                tensors.push(QuadraticIntegral::new(chart.clone(), comps, entry.label.clone()).map_err(input(&what))?);
            }
            let stackel = match &self.stackel {
                Some(rows) => Some(parse_stackel(&chart, rows, backend)?),
                None => None,
            };
            Ok(LoadedSystem { chart: chart.clone(), backend, metric, tensors, stackel, hamiltonian_row })
        })
    }

    /// Serializes a generated Stäckel system with EXACT-grammar strings.
    pub fn from_stackel(sys: &StackelSystem, hamiltonian_row: usize) -> Self {
        let chart = sys.metric.chart();
        let n = chart.dim();
        let tri = |m: &Vec<Vec<ScalarField>>| -> Vec<Vec<String>> {
            (0..n).map(|i| (i..n).map(|j| m[i][j].to_expr_string(chart)).collect()).collect()
        };
        SystemFile {
            chart: chart.names().to_vec(),
            backend: Some(sys.metric.backend().to_string()),
            metric: tri(sys.metric.inverse_components()),
            integrals: sys.integrals[1..]
                .iter()
                .map(|k| IntegralEntry { label: k.label().to_string(), components: tri(k.components()) })
                .collect(),
            stackel: Some(
                sys.source.entries().iter().map(|r| r.iter().map(|e| e.to_expr_string(chart)).collect()).collect(),
            ),
            hamiltonian_row: (hamiltonian_row != 0).then_some(hamiltonian_row + 1),
        }
    }
}

fn parse_stackel(chart: &Chart, rows: &[Vec<String>], backend: Backend) -> Result<StackelMatrix, CliError> {
    let n = chart.dim();
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        return Err(CliError::Input(format!("stackel: expected a {n}x{n} matrix")));
    }
    StackelMatrix::parse(chart.clone(), rows, backend).map_err(|e| tag_error(e, "stackel"))
}

impl StackelFile {
    /// Parsed matrix and 0-based Hamiltonian row.
    pub fn load(&self, backend_override: Option<Backend>) -> Result<(StackelMatrix, usize), CliError> {
        let chart = chart_of(&self.chart)?;
        let requested = backend_override.or(parse_backend(self.backend.as_deref())?);
        let row = row_index(self.hamiltonian_row, chart.dim())?;
        let s = with_backend(requested, |b| parse_stackel(&chart, &self.stackel, b))?;
        Ok((s, row))
    }
}
