//! Runs every acceptance criterion, one PASS/FAIL line each.
//! Exits non-zero when any criterion fails.

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use nalgebra::DMatrix;

use stackel_core::framediag::{diagnose_point, evaluate_system, regular_points, simultaneous_diagonalize};
use stackel_core::geoflow::integrate;
use stackel_core::phase_poly::{poisson_bracket, random_momenta_polynomial, MomentaPolynomial, PhaseState};
use stackel_core::sampling::{seeded, SampleBox};
use stackel_core::stackel::{involution_matrix, library, stackel_integrals, StackelSystem};
use stackel_core::tensorcalc::{killing_residual, CombinationSpec};
use stackel_core::theoremlab::{frame_from_stackel, solution_space_bound, ProofLab};
use stackel_core::Error;

const SEED: u64 = 20_240_601;

const BRACKET_BUDGET: Duration = Duration::from_secs(10);
const STACKEL_BUDGET: Duration = Duration::from_secs(60);
const FLOW_BUDGET: Duration = Duration::from_secs(30);

const POINTS_PER_SYSTEM: usize = 32;
const MIN_GAP: f64 = 1e-9;
const LAB_POINTS: usize = 16;
const RHO_TOL: f64 = 1e-8;
const EIGEN_TOL: f64 = 1e-12;
const DRIFT_TOL: f64 = 1e-8;
const POSITION_TOL: f64 = 1e-6;
const ORDER_RANGE: (f64, f64) = (3.5, 4.5);

struct Outcome {
    pass: bool,
    detail: String,
}

type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn brackets() -> Outcome {
    let start = Instant::now();
    let mut rng = seeded(SEED);
    // 7 + 7 + 6 polynomials in 3, 2 and 1 variables.
    let groups: Vec<Vec<MomentaPolynomial>> = [(3, 7), (2, 7), (1, 6)]
        .iter()
        .map(|&(n, k)| (0..k).map(|_| random_momenta_polynomial(n, 2, &mut rng)).collect())
        .collect();
    let br = |a: &MomentaPolynomial, b: &MomentaPolynomial| poisson_bracket(a, b).expect("same arity");
    let mut failures = Vec::new();
    let mut checked = 0;
    for (gi, g) in groups.iter().enumerate() {
        let k = g.len();
        for i in 0..k {
            for j in 0..k {
                checked += 1;
                if !br(&g[i], &g[j]).add(&br(&g[j], &g[i])).unwrap().is_structurally_zero() {
                    failures.push(format!("antisymmetry g{gi} ({i},{j})"));
                }
            }
            let (f, a, b) = (&g[i], &g[(i + 1) % k], &g[(i + 2) % k]);
            let leibniz = br(f, &a.mul(b).unwrap())
                .sub(&br(f, a).mul(b).unwrap())
                .unwrap()
                .sub(&a.mul(&br(f, b)).unwrap())
                .unwrap();
            if !leibniz.is_structurally_zero() {
                failures.push(format!("leibniz g{gi} {i}"));
            }
            let jacobi = br(f, &br(a, b)).add(&br(a, &br(b, f))).unwrap().add(&br(b, &br(f, a))).unwrap();
            if !jacobi.is_structurally_zero() {
                failures.push(format!("jacobi g{gi} {i}"));
            }
            checked += 2;
        }
    }
    let elapsed = start.elapsed();
    let pass = failures.is_empty() && elapsed < BRACKET_BUDGET;
    outcome(pass, format!("20 polynomials, {checked} identities, {} failures, {elapsed:.2?}", failures.len()))
}

fn criterion_systems() -> Vec<(String, StackelSystem)> {
    let mut out: Vec<(String, StackelSystem)> = library::shipped()
        .into_iter()
        .map(|(name, s)| (name.to_string(), stackel_integrals(&s).expect("shipped system")))
        .collect();
    let mut rng = seeded(SEED);
    for k in 0..20 {
        let n = 2 + k % 2;
        let s = library::random_stackel(n, &mut rng);
        out.push((format!("random{k}(n={n})"), stackel_integrals(&s).expect("random system")));
    }
    out
}

fn stackel_round_trip(systems: &[(String, StackelSystem)], build_time: Duration) -> Outcome {
    let start = Instant::now();
    let mut failures = Vec::new();
    for (name, sys) in systems {
        if !sys.round_trip_residuals().unwrap().iter().all(MomentaPolynomial::is_structurally_zero) {
            failures.push(format!("{name}: round trip"));
        }
        for k in &sys.integrals {
            if !killing_residual(&sys.metric, k).unwrap().is_structurally_zero() {
                failures.push(format!("{name}: killing {}", k.label()));
            }
        }
        let inv = involution_matrix(&sys.polynomials()).unwrap();
        if !inv.iter().flatten().all(|z| z.is_zero && z.residual == 0.0) {
            failures.push(format!("{name}: involution"));
        }
    }
    let elapsed = start.elapsed() + build_time;
    let pass = failures.is_empty() && elapsed < STACKEL_BUDGET;
    outcome(pass, format!("{} systems, failures {:?}, {elapsed:.2?}", systems.len(), failures))
}

fn independence(systems: &[(String, StackelSystem)]) -> Outcome {
    let mut failures = Vec::new();
    let mut worst_gap = f64::INFINITY;
    for (si, (name, sys)) in systems.iter().enumerate() {
        let n = sys.dim();
        let mut rng = seeded(SEED ^ si as u64);
        let lambda = CombinationSpec::random(n, &mut rng);
        let lf: Vec<f64> = lambda.coefficients().iter().map(|c| num_traits::ToPrimitive::to_f64(c).unwrap()).collect();
        let points = regular_points(&sys.metric, &sys.integrals, POINTS_PER_SYSTEM, &SampleBox::default(), &mut rng);
        if points.len() < POINTS_PER_SYSTEM {
            failures.push(format!("{name}: only {} regular points", points.len()));
        }
        for x in &points {
            let (g, ks) = evaluate_system(&sys.metric, &sys.integrals, x).unwrap();
            let r = diagnose_point(x, &g, &ks, &lf, 1e-9).unwrap();
            worst_gap = worst_gap.min(r.min_eigen_gap);
            if r.frame.is_err() || r.restriction_rank != n || !r.distinct.distinct || r.min_eigen_gap <= MIN_GAP {
                failures.push(format!("{name} at {x:?}: rank {} gap {:e}", r.restriction_rank, r.min_eigen_gap));
            }
        }
    }
    outcome(
        failures.is_empty(),
        format!("{} systems x {POINTS_PER_SYSTEM} points, min gap {worst_gap:.3e}, failures {:?}", systems.len(), failures),
    )
}

fn proof_lab() -> Outcome {
    let mut failures = Vec::new();
    let mut worst = 0.0f64;
    for (name, s) in [("polar", library::polar()), ("liouville", library::liouville())] {
        let sys = stackel_integrals(&s).unwrap();
        let mut rng = seeded(SEED);
        let lambda = CombinationSpec::random(sys.dim(), &mut rng);
        let points = regular_points(&sys.metric, &sys.integrals, LAB_POINTS, &SampleBox::default(), &mut rng);
        let mut lab = ProofLab::new(&sys.metric);
        for x in &points {
            let frame = frame_from_stackel(&sys, &lambda, x).unwrap();
            for k in &sys.integrals {
                let cmp = lab.compare(&frame, k, x).unwrap();
                worst = worst.max(cmp.max_error);
                if cmp.max_error > RHO_TOL || !cmp.solution.unique || !cmp.structural {
                    failures.push(format!("{name} {} at {x:?}", k.label()));
                }
            }
        }
        let bound = solution_space_bound(&sys.metric, &sys.integrals, &lambda, &points).unwrap();
        let m_ok = bound.per_point_m.iter().all(|&m| m == 2);
        if !(bound.holds() && bound.n == 2 && bound.bound == 2 && m_ok && points.len() == LAB_POINTS) {
            failures.push(format!("{name}: bound {:?}", bound));
        }
    }
    outcome(failures.is_empty(), format!("max relative error {worst:.2e}, failures {failures:?}"))
}

fn diagonalization() -> Outcome {
    let lorentz = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
    let rotation = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
    let refused = matches!(simultaneous_diagonalize(&lorentz, &[rotation], 1e-9), Err(Error::NonDiagonalizable(_)));
    let k = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
    let (got, err) = match simultaneous_diagonalize(&DMatrix::identity(2, 2), &[k], 1e-9) {
        Ok(f) => {
            let d = f.diagonals[0].clone();
            let err = (d[0] - 3.0).abs().max((d[1] - 1.0).abs());
            (d, err)
        }
        Err(_) => (Vec::new(), f64::INFINITY),
    };
    outcome(refused && err <= EIGEN_TOL, format!("NON_DIAGONALIZABLE reported: {refused}, eigenvalues {got:?} (error {err:.1e})"))
}

fn polar_position_error(sys: &StackelSystem, dt: f64, steps: usize) -> (f64, Vec<f64>) {
    let s0 = PhaseState::new(vec![1.0, 0.0], vec![0.0, 1.0]).unwrap();
    let (traj, drift) = integrate(&sys.metric.hamiltonian(), &s0, dt, steps, &sys.polynomials()).unwrap();
    let mut worst = 0.0f64;
    for (t, s) in traj.times.iter().zip(&traj.states) {
        // Straight line x = 1, y = t in polar coordinates.
        let (r, th) = ((1.0 + t * t).sqrt(), t.atan());
        worst = worst.max((s.position[0] - r).abs().max((s.position[1] - th).abs()));
    }
    (worst, drift.integrals.iter().map(|d| d.relative).collect())
}

fn flow() -> Outcome {
    let start = Instant::now();
    let sys = stackel_integrals(&library::polar()).unwrap();
    let (e1, drift) = polar_position_error(&sys, 1e-3, 10_000);
    let (e2, _) = polar_position_error(&sys, 5e-4, 20_000);
    let ratio = e1 / e2;
    let elapsed = start.elapsed();
    let drift_ok = drift.iter().all(|&d| d < DRIFT_TOL);
    let pass = drift_ok && e1 < POSITION_TOL && (ORDER_RANGE.0..=ORDER_RANGE.1).contains(&ratio) && elapsed < FLOW_BUDGET;
    outcome(
        pass,
        format!(
            "drift 2H {:.3e} p_theta^2 {:.3e} (tol {DRIFT_TOL:e}), position error {e1:.3e}, halving ratio {ratio:.3}, {elapsed:.2?}",
            drift[0], drift[1]
        ),
    )
}

fn examples_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../docs/examples")
}

fn run_cli(args: &[&str]) -> (i32, Vec<u8>, Vec<u8>) {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = stackel_cli::app::run(std::iter::once("stackel").chain(args.iter().copied()), &mut out, &mut err);
    (code, out, err)
}

fn determinism() -> Outcome {
    let dir = examples_dir();
    let mut failures = Vec::new();
    let mut runs = 0;
    for name in ["flat", "polar", "liouville"] {
        let system = dir.join(format!("{name}.json")).display().to_string();
        let stackel = dir.join(format!("{name}.stackel.json")).display().to_string();
        let init = match name {
            "liouville" => "0.5,2,0.3,-0.4",
            _ => "1,0.5,0.2,1",
        };
        let invocations: Vec<Vec<&str>> = vec![
            vec!["verify", &system, "--seed", "7"],
            vec!["theorem1", &system, "--seed", "7"],
            vec!["generate", &stackel],
            vec!["flow", &system, "--init", init, "--steps", "500"],
        ];
        for args in &invocations {
            let a = run_cli(args);
            let b = run_cli(args);
            runs += 2;
            if a != b || a.1.is_empty() {
                failures.push(args.join(" "));
            }
        }
    }
    outcome(failures.is_empty(), format!("{runs} runs over 3 examples, differing: {failures:?}"))
}

fn main() {
    let build = Instant::now();
    let systems = criterion_systems();
    let build_time = build.elapsed();
    let criteria: Vec<Criterion> = vec![
        ("bracket axioms", Box::new(brackets)),
        ("stackel round trip", Box::new(|| stackel_round_trip(&systems, build_time))),
        ("restriction independence", Box::new(|| independence(&systems))),
        ("rho derivative system", Box::new(proof_lab)),
        ("diagonalization", Box::new(diagonalization)),
        ("geodesic flow", Box::new(flow)),
        ("cli determinism", Box::new(determinism)),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let o = run();
        println!("criterion {} {name}: {} ({})", i + 1, if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.pass);
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
