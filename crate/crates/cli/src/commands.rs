//! The four subcommands as library functions returning reports.

use num_traits::ToPrimitive;
use serde_json::{json, Value};

use stackel_core::framediag::{diagnose_point, evaluate_system, regular_points, DiagonalizationReport};
use stackel_core::geoflow::{integrate, write_csv};
use stackel_core::phase_poly::{MomentaPolynomial, PhaseState};
use stackel_core::sampling::{seeded, SampleBox};
use stackel_core::scalarfield::Backend;
use stackel_core::stackel::{involution_matrix, stackel_integrals_with_row, validate_stackel_row, StackelSystem};
use stackel_core::tensorcalc::{killing_residual, quadratic_to_poly, CombinationSpec, QuadraticIntegral};
use stackel_core::theoremlab::{frame_from_diagonal, solution_space_bound, ProofLab};

use crate::report::{num, Check, Report};
use crate::schema::{LoadedSystem, StackelFile, SystemFile};
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleOptions {
    pub samples: usize,
    pub seed: u64,
    pub tol: f64,
    pub backend: Option<Backend>,
}

impl Default for SampleOptions {
    fn default() -> Self {
        SampleOptions { samples: 16, seed: 0, tol: 1e-9, backend: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowOptions {
    pub init: String,
    pub dt: f64,
    pub steps: usize,
    pub drift_tol: f64,
    pub backend: Option<Backend>,
}

/// Relative tolerance when comparing solved and differentiated `v_s(ρ_j)`.
pub const RHO_TOL: f64 = 1e-8;

fn parse_json<T: serde::de::DeserializeOwned>(input: &[u8]) -> Result<T, CliError> {
    serde_json::from_slice(input).map_err(|e| CliError::Input(format!("invalid JSON: {e}")))
}

pub fn load_system(input: &[u8], backend: Option<Backend>) -> Result<LoadedSystem, CliError> {
    parse_json::<SystemFile>(input)?.load(backend)
}

fn core_err(context: &str) -> impl Fn(stackel_core::Error) -> CliError + '_ {
    move |e| CliError::Input(format!("{context}: {e}"))
}

fn lambda_f64(l: &CombinationSpec) -> Vec<f64> {
    l.coefficients().iter().map(|c| c.to_f64().unwrap_or(0.0)).collect()
}

fn fmt_point(x: &[f64]) -> Value {
    Value::Array(x.iter().map(|v| num(*v)).collect())
}

fn killing_checks(sys: &LoadedSystem, report: &mut Report) -> Result<(), CliError> {
    for k in &sys.tensors[1..] {
        let res = killing_residual(&sys.metric, k).map_err(core_err("killing residual"))?;
        let z = res.is_zero();
        let details = if z.is_zero { "{2H, K} = 0".to_string() } else { format!("{{2H, K}} = {}", res.display(&sys.chart)) };
        report.push(Check::new(format!("killing:{}", k.label()), z.is_zero, Some(z.residual), details));
    }
    Ok(())
}

fn involution_checks(polys: &[MomentaPolynomial], labels: &[String], report: &mut Report) -> Result<(), CliError> {
    let inv = involution_matrix(polys).map_err(core_err("involution"))?;
    for a in 0..polys.len() {
        for b in a + 1..polys.len() {
            let z = inv[a][b];
            report.push(Check::new(
                format!("involution:{},{}", labels[a], labels[b]),
                z.is_zero,
                Some(z.residual),
                if z.is_zero { "bracket vanishes" } else { "bracket is nonzero" },
            ));
        }
    }
    Ok(())
}

fn sample(sys: &LoadedSystem, opts: &SampleOptions) -> (CombinationSpec, Vec<Vec<f64>>) {
    let mut rng = seeded(opts.seed);
    let lambda = CombinationSpec::random(sys.tensors.len(), &mut rng);
    let points = regular_points(&sys.metric, &sys.tensors, opts.samples, &SampleBox::default(), &mut rng);
    (lambda, points)
}

/// Frame, restriction rank and eigenvalue distinctness at every point.
fn pointwise_checks(
    sys: &LoadedSystem,
    lambda: &CombinationSpec,
    points: &[Vec<f64>],
    tol: f64,
    report: &mut Report,
) -> Result<Vec<DiagonalizationReport>, CliError> {
    let n = sys.dim();
    if points.is_empty() {
        report.push(Check::new("sampling", false, None, "no regular sample point found"));
        return Ok(Vec::new());
    }
    let lf = lambda_f64(lambda);
    let mut out = Vec::with_capacity(points.len());
    for x in points {
        let (g, ks) = evaluate_system(&sys.metric, &sys.tensors, x).map_err(core_err("evaluation"))?;
        out.push(diagnose_point(x, &g, &ks, &lf, tol).map_err(core_err("diagonalization"))?);
    }
    let failures: Vec<(usize, &String)> =
        out.iter().enumerate().filter_map(|(i, r)| r.frame.as_ref().err().map(|e| (i + 1, e))).collect();
    let details = match failures.first() {
        None => format!("frame found at {}/{} points", out.len(), out.len()),
        Some((i, e)) => format!("failed at {} of {} points; first at point {i}: {e}", failures.len(), out.len()),
    };
    report.push(Check::new("diagonalization", failures.is_empty(), Some(failures.len() as f64), details));

    let ranks: Vec<usize> = out.iter().map(|r| r.restriction_rank).collect();
    let (rmin, rmax) = (ranks.iter().min().copied().unwrap_or(0), ranks.iter().max().copied().unwrap_or(0));
    report.push(Check::new(
        "restriction_rank",
        rmin == n,
        Some((n - rmin.min(n)) as f64),
        format!("rank between {rmin} and {rmax} over {} points, n = {n}", out.len()),
    ));

    let min_gap = out.iter().map(|r| r.min_eigen_gap).fold(f64::INFINITY, f64::min);
    let bad = out.iter().filter(|r| !r.distinct.distinct).count();
    let reason = out.iter().find_map(|r| r.distinct.reason.clone());
    let mut details = format!("{} of {} points with {n} distinct eigenvalues, min gap {min_gap:e}", out.len() - bad, out.len());
    if let Some(r) = reason {
        details.push_str(&format!(" ({r})"));
    }
    report.push(Check::new("distinct_eigenvalues", bad == 0, Some(min_gap), details));

    let per_point: Vec<Value> = out
        .iter()
        .enumerate()
        .map(|(i, r)| {
            json!({
                "index": i + 1,
                "point": fmt_point(points.get(i).map_or(&[][..], |p| p.as_slice())),
                "frame": r.frame.as_ref().map_or_else(|e| e.clone(), |_| "ok".to_string()),
                "restriction_rank": r.restriction_rank,
                "blocks": r.partition.as_ref().map(|p| p.m),
                "min_eigen_gap": num(r.min_eigen_gap),
            })
        })
        .collect();
    report.observe("points", Value::Array(per_point));
    report.observe("lambda", Value::Array(lambda.coefficients().iter().map(|c| Value::String(c.to_string())).collect()));
    Ok(out)
}

fn stackel_checks(sys: &LoadedSystem, report: &mut Report) -> Result<(), CliError> {
    let Some(s) = &sys.stackel else { return Ok(()) };
    match validate_stackel_row(s, sys.hamiltonian_row) {
        Err(e) => {
            report.push(Check::new("stackel:valid", false, None, e.to_string()));
            return Ok(());
        }
        Ok(d) => {
            let details = if d.warnings.is_empty() { "valid".to_string() } else { format!("valid with warnings {:?}", d.warnings) };
            report.push(Check::new("stackel:valid", true, None, details));
        }
    }
    let generated = stackel_integrals_with_row(s, sys.hamiltonian_row).map_err(core_err("stackel"))?;
    let mut worst = 0.0f64;
    let mut same = generated.integrals.len() == sys.tensors.len();
    if same {
        for (a, b) in generated.integrals.iter().zip(&sys.tensors) {
            let diff = quadratic_to_poly(a).sub(&quadratic_to_poly(b)).map_err(core_err("stackel comparison"))?;
            let z = diff.is_zero();
            worst = worst.max(z.residual);
            same &= z.is_zero;
        }
    }
    report.push(Check::new(
        "stackel:matches",
        same,
        Some(worst),
        if same { "metric and integrals equal the Stäckel construction" } else { "system differs from the Stäckel construction" },
    ));
    Ok(())
}

/// Killing equations, involution, and pointwise diagonalization checks.
pub fn verify(input: &[u8], opts: &SampleOptions) -> Result<Report, CliError> {
    let sys = load_system(input, opts.backend)?;
    let mut report = Report::new("verify", input, opts.seed);
    killing_checks(&sys, &mut report)?;
    let polys: Vec<MomentaPolynomial> = sys.tensors.iter().map(quadratic_to_poly).collect();
    involution_checks(&polys, &sys.labels(), &mut report)?;
    stackel_checks(&sys, &mut report)?;
    let (lambda, points) = sample(&sys, opts);
    pointwise_checks(&sys, &lambda, &points, opts.tol, &mut report)?;
    report.observe("backend", sys.backend.to_string());
    report.observe("n", sys.dim());
    Ok(report)
}

fn is_diagonal(sys: &LoadedSystem) -> bool {
    sys.tensors.iter().all(QuadraticIntegral::is_coordinate_diagonal)
}

/// Pointwise independence checks plus the derivative-system proof lab.
pub fn theorem1(input: &[u8], opts: &SampleOptions) -> Result<Report, CliError> {
    let sys = load_system(input, opts.backend)?;
    let n = sys.dim();
    let mut report = Report::new("theorem1", input, opts.seed);
    let (lambda, points) = sample(&sys, opts);
    let diag = pointwise_checks(&sys, &lambda, &points, opts.tol, &mut report)?;

    let ranks: Vec<usize> = diag.iter().map(|r| r.restriction_rank).collect();
    report.observe(
        "rank",
        json!({
            "min": ranks.iter().min(),
            "max": ranks.iter().max(),
            "full_rank_points": ranks.iter().filter(|&&r| r == n).count(),
            "points": ranks.len(),
        }),
    );
    let gap = diag.iter().map(|r| r.min_eigen_gap).fold(f64::INFINITY, f64::min);
    report.observe("min_eigen_gap", num(gap));

    if points.is_empty() {
        return Ok(report);
    }
    if !is_diagonal(&sys) {
        let ms: Vec<usize> = diag.iter().filter_map(|r| r.partition.as_ref().map(|p| p.m)).collect();
        report.observe("m", ms.iter().max().copied());
        report.observe("proof_lab", "skipped: integrals are not diagonal in the chart coordinates");
        return Ok(report);
    }

    let bound = solution_space_bound(&sys.metric, &sys.tensors, &lambda, &points).map_err(core_err("proof lab"))?;
    report.observe("m", bound.bound);
    report.push(Check::new(
        "solution_space_bound",
        bound.holds(),
        None,
        match &bound.counterexample {
            None => format!("bound m = {}, witness rank {} at every point, n = m = {n}", bound.bound, n),
            Some(c) => format!("counterexample: {c}"),
        },
    ));
    report.observe(
        "witness_ranks",
        Value::Array(bound.witness_ranks.iter().map(|&r| Value::from(r)).collect()),
    );

    let mut lab = ProofLab::new(&sys.metric);
    let mut worst = 0.0f64;
    let mut structural = true;
    let mut unique = true;
    for x in &points {
        let frame = frame_from_diagonal(&sys.metric, &sys.tensors, &lambda, x).map_err(core_err("frame"))?;
        for k in &sys.tensors {
            let cmp = lab.compare(&frame, k, x).map_err(core_err("proof lab"))?;
            worst = worst.max(cmp.max_error);
            structural &= cmp.structural;
            unique &= cmp.solution.unique;
        }
    }
    report.push(Check::new(
        "rho_derivatives",
        worst <= RHO_TOL && unique,
        Some(worst),
        format!("solved v_s(rho_j) vs direct differentiation, uniquely solvable: {unique}"),
    ));
    report.push(Check::new(
        "rho_rows_isolate",
        structural,
        None,
        "u_s u_t^2 and u_s^3 rows each isolate v_s(rho_block(t))",
    ));
    Ok(report)
}

/// Generated system (when valid) and a report of its checks.
pub fn generate(input: &[u8], backend: Option<Backend>, row: Option<usize>) -> Result<(Report, Option<SystemFile>), CliError> {
    let file: StackelFile = parse_json(input)?;
    let (s, file_row) = file.load(backend)?;
    let row = match row {
        Some(r) if (1..=s.dim()).contains(&r) => r - 1,
        Some(r) => return Err(CliError::Input(format!("hamiltonian row {r} outside 1..={}", s.dim()))),
        None => file_row,
    };
    let mut report = Report::new("generate", input, 0);
    match validate_stackel_row(&s, row) {
        Err(e) => {
            report.push(Check::new("stackel:valid", false, None, e.to_string()));
            return Ok((report, None));
        }
        Ok(d) => report.push(Check::new("stackel:valid", true, None, format!("warnings: {:?}", d.warnings))),
    }
    let sys = match stackel_integrals_with_row(&s, row) {
        Ok(sys) => sys,
        Err(e) => {
            report.push(Check::new("stackel:integrals", false, None, e.to_string()));
            return Ok((report, None));
        }
    };
    generated_checks(&sys, &mut report)?;
    Ok((report, Some(SystemFile::from_stackel(&sys, row))))
}

fn generated_checks(sys: &StackelSystem, report: &mut Report) -> Result<(), CliError> {
    let residuals = sys.round_trip_residuals().map_err(core_err("round trip"))?;
    let worst = residuals.iter().map(|r| r.is_zero().residual).fold(0.0, f64::max);
    let ok = residuals.iter().all(|r| r.is_zero().is_zero);
    report.push(Check::new("round_trip", ok, Some(worst), "S * I = P componentwise"));
    for k in &sys.integrals[1..] {
        let z = killing_residual(&sys.metric, k).map_err(core_err("killing"))?.is_zero();
        report.push(Check::new(format!("killing:{}", k.label()), z.is_zero, Some(z.residual), ""));
    }
    let labels: Vec<String> = sys.integrals.iter().map(|k| k.label().to_string()).collect();
    involution_checks(&sys.polynomials(), &labels, report)
}

/// Integrates the geodesic flow and reports drift of every integral.
/// Returns the report and the trajectory CSV.
pub fn flow(input: &[u8], opts: &FlowOptions) -> Result<(Report, String), CliError> {
    let sys = load_system(input, opts.backend)?;
    let n = sys.dim();
    let values: Vec<f64> = opts
        .init
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| CliError::Input(format!("init: `{}`: {e}", t.trim()))))
        .collect::<Result<_, _>>()?;
    if values.len() != 2 * n {
        return Err(CliError::Input(format!("init needs {} numbers (x then p), got {}", 2 * n, values.len())));
    }
    if !(opts.dt.is_finite() && opts.dt > 0.0) || opts.steps == 0 {
        return Err(CliError::Input("dt must be positive and steps at least 1".into()));
    }
    let s0 = PhaseState::new(values[..n].to_vec(), values[n..].to_vec()).map_err(core_err("init"))?;
    let monitors: Vec<MomentaPolynomial> = sys.tensors.iter().map(quadratic_to_poly).collect();
    let labels = sys.labels();
    let mut report = Report::new("flow", input, 0);
    report.observe("dt", num(opts.dt));
    report.observe("steps", opts.steps);
    let (traj, drift) = match integrate(&sys.metric.hamiltonian(), &s0, opts.dt, opts.steps, &monitors) {
        Ok(v) => v,
        Err(e) => {
            report.push(Check::new("integration", false, None, e.to_string()));
            return Ok((report, String::new()));
        }
    };
    report.push(Check::new("integration", true, None, format!("{} steps", opts.steps)));
    let mut table = serde_json::Map::new();
    for (label, d) in labels.iter().zip(&drift.integrals) {
        report.push(Check::new(
            format!("drift:{label}"),
            d.relative <= opts.drift_tol,
            Some(d.relative),
            format!("max |I(t) - I(0)| = {:e}, I(0) = {}", d.max_abs, d.initial),
        ));
        table.insert(
            label.clone(),
            json!({ "initial": num(d.initial), "max_abs": num(d.max_abs), "relative": num(d.relative) }),
        );
    }
    report.observe("drift", Value::Object(table));
    if let Some(last) = traj.states.last() {
        report.observe("final", json!({ "x": fmt_point(&last.position), "p": fmt_point(&last.momentum) }));
    }
    let mut csv = Vec::new();
    write_csv(&mut csv, &traj, &monitors).map_err(core_err("csv"))?;
    Ok((report, String::from_utf8(csv).expect("ascii csv")))
}
