//! Geodesic flow of `H = ½ g^{ij} p_i p_j` by the implicit midpoint rule,
//! with drift monitoring of conserved quantities.

use std::io::Write;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::phase_poly::{MomentaPolynomial, PhaseState};
use crate::scalarfield::CompiledField;

pub const NEWTON_TOL: f64 = 1e-12;
pub const MAX_ITER: usize = 50;

/// Momenta polynomial lowered for fast evaluation.
#[derive(Debug, Clone)]
pub struct CompiledMomenta {
    terms: Vec<(Vec<u32>, CompiledField)>,
}

impl CompiledMomenta {
    pub fn new(p: &MomentaPolynomial) -> Self {
        CompiledMomenta { terms: p.terms().map(|(i, c)| (i.clone(), c.compile())).collect() }
    }

    pub fn eval(&self, x: &[f64], p: &[f64]) -> Result<f64> {
        let mut acc = 0.0;
        for (idx, c) in &self.terms {
            let mono: f64 = idx.iter().zip(p).map(|(&e, &v)| v.powi(e as i32)).product();
            if mono != 0.0 {
                acc += c.eval(x)? * mono;
            }
        }
        Ok(acc)
    }

    pub fn eval_state(&self, s: &PhaseState) -> Result<f64> {
        self.eval(&s.position, &s.momentum)
    }
}

/// `H`, its gradient and second partials, compiled once.
#[derive(Debug, Clone)]
pub struct HamiltonianFlow {
    n: usize,
    dh_dx: Vec<CompiledMomenta>,
    dh_dp: Vec<CompiledMomenta>,
    /// Jacobian of `(∂H/∂p, −∂H/∂x)` with respect to `(x, p)`.
    jac: Vec<Vec<Option<CompiledMomenta>>>,
}

impl HamiltonianFlow {
    pub fn new(h: &MomentaPolynomial) -> Self {
        let n = h.nvars();
        let dh_dx: Vec<MomentaPolynomial> = (0..n).map(|i| h.partial_x(i)).collect();
        let dh_dp: Vec<MomentaPolynomial> = (0..n).map(|i| h.partial_p(i)).collect();
        let compile = |p: MomentaPolynomial| if p.num_terms() == 0 { None } else { Some(CompiledMomenta::new(&p)) };
        let mut jac = Vec::with_capacity(2 * n);
        for i in 0..n {
            let row: Vec<_> = (0..n)
                .map(|j| compile(dh_dp[i].partial_x(j)))
                .chain((0..n).map(|j| compile(dh_dp[i].partial_p(j))))
                .collect();
            jac.push(row);
        }
        for i in 0..n {
            let row: Vec<_> = (0..n)
                .map(|j| compile(dh_dx[i].partial_x(j).neg()))
                .chain((0..n).map(|j| compile(dh_dx[i].partial_p(j).neg())))
                .collect();
            jac.push(row);
        }
        HamiltonianFlow {
            n,
            dh_dx: dh_dx.iter().map(CompiledMomenta::new).collect(),
            dh_dp: dh_dp.iter().map(CompiledMomenta::new).collect(),
            jac,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// `(dx/dt, dp/dt) = (∂H/∂p, −∂H/∂x)` packed as one vector.
    fn field(&self, z: &DVector<f64>) -> Result<DVector<f64>> {
        let n = self.n;
        let (x, p) = (&z.as_slice()[..n], &z.as_slice()[n..]);
        let mut out = DVector::zeros(2 * n);
        for i in 0..n {
            out[i] = self.dh_dp[i].eval(x, p)?;
            out[n + i] = -self.dh_dx[i].eval(x, p)?;
        }
        Ok(out)
    }

    fn jacobian(&self, z: &DVector<f64>) -> Result<DMatrix<f64>> {
        let n = self.n;
        let (x, p) = (&z.as_slice()[..n], &z.as_slice()[n..]);
        let mut out = DMatrix::zeros(2 * n, 2 * n);
        for (i, row) in self.jac.iter().enumerate() {
            for (j, c) in row.iter().enumerate() {
                if let Some(c) = c {
                    out[(i, j)] = c.eval(x, p)?;
                }
            }
        }
        Ok(out)
    }

    pub fn vector_field(&self, s: &PhaseState) -> Result<(Vec<f64>, Vec<f64>)> {
        let f = self.field(&pack(s))?;
        Ok((f.as_slice()[..self.n].to_vec(), f.as_slice()[self.n..].to_vec()))
    }

    /// One implicit midpoint step `z' = z + dt·X_H((z+z')/2)`, solved by
    /// Newton's method with a fixed-point fallback.
    pub fn midpoint_step(&self, s: &PhaseState, dt: f64, newton_tol: f64, max_iter: usize) -> Result<PhaseState> {
        if s.dim() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: s.dim() });
        }
        if dt == 0.0 {
            return Ok(s.clone());
        }
        let n2 = 2 * self.n;
        let z = pack(s);
        let mut znew = &z + self.field(&z)? * dt;
        let mut last = f64::INFINITY;
        for _ in 0..max_iter {
            let mid = (&z + &znew) * 0.5;
            let f = self.field(&mid)?;
            let resid = &znew - &z - &f * dt;
            let jm = DMatrix::identity(n2, n2) - self.jacobian(&mid)? * (0.5 * dt);
            let delta = match jm.lu().solve(&resid) {
                Some(d) if d.iter().all(|v| v.is_finite()) => d,
                _ => resid.clone(),
            };
            znew -= &delta;
            last = delta.amax();
            if last <= newton_tol * (1.0 + znew.amax()) {
                return Ok(unpack(&znew, self.n));
            }
        }
        Err(Error::NoConvergence { iterations: max_iter, residual: last })
    }
}

fn pack(s: &PhaseState) -> DVector<f64> {
    DVector::from_iterator(2 * s.dim(), s.position.iter().chain(&s.momentum).copied())
}

fn unpack(z: &DVector<f64>, n: usize) -> PhaseState {
    PhaseState { position: z.as_slice()[..n].to_vec(), momentum: z.as_slice()[n..].to_vec() }
}

pub fn hamiltonian_vector_field(h: &MomentaPolynomial, s: &PhaseState) -> Result<(Vec<f64>, Vec<f64>)> {
    HamiltonianFlow::new(h).vector_field(s)
}

pub fn implicit_midpoint_step(
    h: &MomentaPolynomial,
    s: &PhaseState,
    dt: f64,
    newton_tol: f64,
    max_iter: usize,
) -> Result<PhaseState> {
    HamiltonianFlow::new(h).midpoint_step(s, dt, newton_tol, max_iter)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub states: Vec<PhaseState>,
    pub times: Vec<f64>,
    pub dt: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Drift {
    pub initial: f64,
    pub max_abs: f64,
    /// `max_abs / |initial|`, or `max_abs` when the initial value is zero.
    pub relative: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DriftReport {
    pub integrals: Vec<Drift>,
}

impl DriftReport {
    pub fn max_relative(&self) -> f64 {
        self.integrals.iter().map(|d| d.relative).fold(0.0, f64::max)
    }
}

pub fn integrate(
    h: &MomentaPolynomial,
    s0: &PhaseState,
    dt: f64,
    steps: usize,
    monitors: &[MomentaPolynomial],
) -> Result<(Trajectory, DriftReport)> {
    if steps == 0 {
        return Err(Error::Invalid("steps must be at least 1".into()));
    }
    let flow = HamiltonianFlow::new(h);
    let mons: Vec<CompiledMomenta> = monitors.iter().map(CompiledMomenta::new).collect();
    let initial: Vec<f64> = mons.iter().map(|m| m.eval_state(s0)).collect::<Result<_>>()?;
    let mut max_abs = vec![0.0f64; mons.len()];
    let mut states = Vec::with_capacity(steps + 1);
    let mut times = Vec::with_capacity(steps + 1);
    states.push(s0.clone());
    times.push(0.0);
    let mut s = s0.clone();
    for k in 1..=steps {
        let wrap = |e: Error| Error::Step { step: k, source: Box::new(e) };
        s = flow.midpoint_step(&s, dt, NEWTON_TOL, MAX_ITER).map_err(wrap)?;
        for (i, m) in mons.iter().enumerate() {
            let v = m.eval_state(&s).map_err(wrap)?;
            max_abs[i] = max_abs[i].max((v - initial[i]).abs());
        }
        states.push(s.clone());
        times.push(k as f64 * dt);
    }
    let integrals = initial
        .iter()
        .zip(&max_abs)
        .map(|(&i0, &d)| Drift { initial: i0, max_abs: d, relative: if i0 != 0.0 { d / i0.abs() } else { d } })
        .collect();
    Ok((Trajectory { states, times, dt }, DriftReport { integrals }))
}

/// CSV with header `t,x1..xn,p1..pn,I1..Ik`, 17 significant digits.
pub fn write_csv<W: Write>(out: &mut W, traj: &Trajectory, monitors: &[MomentaPolynomial]) -> Result<()> {
    let io = |e: std::io::Error| Error::Invalid(format!("write failed: {e}"));
    let n = traj.states.first().map_or(0, PhaseState::dim);
    let mut header: Vec<String> = vec!["t".into()];
    header.extend((1..=n).map(|i| format!("x{i}")));
    header.extend((1..=n).map(|i| format!("p{i}")));
    header.extend((1..=monitors.len()).map(|i| format!("I{i}")));
    writeln!(out, "{}", header.join(",")).map_err(io)?;
    let mons: Vec<CompiledMomenta> = monitors.iter().map(CompiledMomenta::new).collect();
    for (t, s) in traj.times.iter().zip(&traj.states) {
        let mut row = vec![format!("{t:.16e}")];
        row.extend(s.position.iter().chain(&s.momentum).map(|v| format!("{v:.16e}")));
        for m in &mons {
            row.push(format!("{:.16e}", m.eval_state(s)?));
        }
        writeln!(out, "{}", row.join(",")).map_err(io)?;
    }
    Ok(())
}
