//! Two-step implicit Euler integration of `M q̈ + K q = f (+ Cᵀλ)`.
//!
//! The second derivative is replaced by `(q_i − 2q_{i−1} + q_{i−2})/h²`, so
//! every step solves `(M + h²K) q_i = h²f_i + 2M q_{i−1} − M q_{i−2}`. The
//! second state comes from an explicit Euler step `q_1 = q_0 + h v_0`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::{Cholesky, Dyn};

use crate::error::{Error, Result};
use crate::lcp::{ContactRunDiagnostics, ContactStepper};
use crate::linalg::{Matrix, Vector};
use crate::model::{ContactConstraints, ForceSignal, PartitionedSystem};
use crate::mtx::fmt_f64;

/// Sampled solution on an equidistant grid `t_i = t0 + i·h`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub t0: f64,
    pub h: f64,
    /// One column per time step.
    pub states: Matrix,
    pub forces: Matrix,
    pub multipliers: Option<Matrix>,
}

impl Trajectory {
    pub fn new(
        t0: f64,
        h: f64,
        states: Matrix,
        forces: Matrix,
        multipliers: Option<Matrix>,
    ) -> Result<Self> {
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::InvalidParameter(format!("time step must be positive, got {h}")));
        }
        let k = states.ncols();
        if k < 3 {
            return Err(Error::InvalidParameter(format!(
                "trajectory needs at least 3 time steps, got {k}"
            )));
        }
        if forces.ncols() != k {
            return Err(Error::dims("force samples", k, forces.ncols()));
        }
        if let Some(l) = &multipliers {
            if l.ncols() != k {
                return Err(Error::dims("multiplier samples", k, l.ncols()));
            }
            if let Some(v) = l.iter().find(|v| !(**v >= 0.0)) {
                return Err(Error::InvalidParameter(format!("negative contact multiplier {v}")));
            }
        }
        Ok(Self {
            t0,
            h,
            states,
            forces,
            multipliers,
        })
    }

    pub fn len(&self) -> usize {
        self.states.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.states.ncols() == 0
    }

    pub fn dim(&self) -> usize {
        self.states.nrows()
    }

    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.h
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.time(i)).collect()
    }

    /// Rows `start..start+count` of the states.
    pub fn state_rows(&self, start: usize, count: usize) -> Matrix {
        self.states.rows(start, count).into_owned()
    }

    pub fn to_csv_string(&self) -> String {
        let n = self.dim();
        let m = self.multipliers.as_ref().map_or(0, |l| l.nrows());
        let mut out = String::from("t");
        for i in 0..n {
            let _ = write!(out, ",q_{i}");
        }
        for j in 0..m {
            let _ = write!(out, ",lambda_{j}");
        }
        out.push('\n');
        for c in 0..self.len() {
            out.push_str(&fmt_f64(self.time(c)));
            for v in self.states.column(c).iter() {
                out.push(',');
                out.push_str(&fmt_f64(*v));
            }
            if let Some(l) = &self.multipliers {
                for v in l.column(c).iter() {
                    out.push(',');
                    out.push_str(&fmt_f64(*v));
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        fs::write(path, self.to_csv_string()).map_err(|e| Error::io(path, e))
    }

    /// Reads a trajectory CSV. The file holds no loads, so `forces` comes back
    /// as zeros of the state shape.
    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_path(path)
            .map_err(|e| Error::Csv { path: path.into(), source: e })?;
        let headers = reader
            .headers()
            .map_err(|e| Error::Csv { path: path.into(), source: e })?
            .clone();
        if headers.get(0) != Some("t") {
            return Err(Error::malformed(path, "first column must be `t`"));
        }
        let n = headers.iter().filter(|h| h.starts_with("q_")).count();
        let m = headers.iter().filter(|h| h.starts_with("lambda_")).count();
        if 1 + n + m != headers.len() {
            return Err(Error::malformed(path, "unexpected column names"));
        }
        let mut times = Vec::new();
        let mut columns: Vec<Vec<f64>> = Vec::new();
        for record in reader.records() {
            let record = record.map_err(|e| Error::Csv { path: path.into(), source: e })?;
            let values: Vec<f64> = record
                .iter()
                .map(|s| {
                    s.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::malformed(path, format!("bad number `{s}`")))
                })
                .collect::<Result<_>>()?;
            times.push(values[0]);
            columns.push(values[1..].to_vec());
        }
        if times.len() < 3 {
            return Err(Error::malformed(path, "fewer than 3 rows"));
        }
        let k = times.len();
        let h = times[1] - times[0];
        let states = Matrix::from_fn(n, k, |i, c| columns[c][i]);
        let multipliers = (m > 0).then(|| Matrix::from_fn(m, k, |j, c| columns[c][n + j]));
        Trajectory::new(times[0], h, states, Matrix::zeros(n, k), multipliers)
    }
}

/// Factorized `M + h²K` together with the data of one time step.
pub(crate) struct ImplicitEuler {
    mass: Matrix,
    stiffness: Matrix,
    h: f64,
    factor: Cholesky<f64, Dyn>,
}

impl ImplicitEuler {
    pub(crate) fn new(mass: &Matrix, stiffness: &Matrix, h: f64) -> Result<Self> {
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::InvalidParameter(format!("time step must be positive, got {h}")));
        }
        let s = mass + stiffness * (h * h);
        let factor = Cholesky::new(s).ok_or_else(|| Error::Singular("M + h²K".into()))?;
        Ok(Self {
            mass: mass.clone(),
            stiffness: stiffness.clone(),
            h,
            factor,
        })
    }

    pub(crate) fn refactor(&mut self) -> Result<()> {
        let s = &self.mass + &self.stiffness * (self.h * self.h);
        self.factor = Cholesky::new(s).ok_or_else(|| Error::Singular("M + h²K".into()))?;
        Ok(())
    }

    /// `h²f + 2M q_prev − M q_prev2`.
    pub(crate) fn rhs(&self, f: &Vector, q_prev: &Vector, q_prev2: &Vector) -> Vector {
        let mut hist = q_prev * 2.0;
        hist -= q_prev2;
        &self.mass * hist + f * (self.h * self.h)
    }

    /// Contact-free state for the next step.
    pub(crate) fn step(&self, f: &Vector, q_prev: &Vector, q_prev2: &Vector) -> Vector {
        self.factor.solve(&self.rhs(f, q_prev, q_prev2))
    }
}

fn check_time_grid(h: f64, steps: usize) -> Result<()> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::InvalidParameter(format!("time step must be positive, got {h}")));
    }
    if steps < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 steps, got {steps}")));
    }
    Ok(())
}

fn check_len(context: &str, v: &Vector, n: usize) -> Result<()> {
    if v.len() != n {
        return Err(Error::dims(context, n, v.len()));
    }
    Ok(())
}

/// Shared recursion for the contact-free runs. `refactor_each_step` exists
/// only to test that reusing the factorization changes nothing.
#[allow(clippy::too_many_arguments)]
fn integrate(
    mass: &Matrix,
    stiffness: &Matrix,
    force: impl Fn(f64) -> Vector,
    q0: &Vector,
    v0: &Vector,
    h: f64,
    steps: usize,
    refactor_each_step: bool,
) -> Result<Trajectory> {
    check_time_grid(h, steps)?;
    let n = mass.nrows();
    check_len("initial displacement", q0, n)?;
    check_len("initial velocity", v0, n)?;
    let mut stepper = ImplicitEuler::new(mass, stiffness, h)?;
    let k = steps + 1;
    let mut states = Matrix::zeros(n, k);
    let mut forces = Matrix::zeros(n, k);
    for i in 0..k {
        let f = force(i as f64 * h);
        check_len("force sample", &f, n)?;
        forces.set_column(i, &f);
    }
    states.set_column(0, q0);
    states.set_column(1, &(q0 + v0 * h));
    for i in 2..k {
        if refactor_each_step {
            stepper.refactor()?;
        }
        let q = stepper.step(
            &forces.column(i).into_owned(),
            &states.column(i - 1).into_owned(),
            &states.column(i - 2).into_owned(),
        );
        states.set_column(i, &q);
    }
    Trajectory::new(0.0, h, states, forces, None)
}

/// Contact-free full-order run on `steps + 1` grid points starting at t = 0.
pub fn simulate_free(
    system: &PartitionedSystem,
    force: &ForceSignal,
    q0: &Vector,
    v0: &Vector,
    h: f64,
    steps: usize,
) -> Result<Trajectory> {
    if force.dim() != system.n() {
        return Err(Error::dims("force signal", system.n(), force.dim()));
    }
    integrate(
        system.mass(),
        system.stiffness(),
        |t| force.sample(t),
        q0,
        v0,
        h,
        steps,
        false,
    )
}

/// Interior subsystem with the boundary DOFs held at zero. States and forces
/// of the result are interior-only.
pub fn simulate_fixed_boundary(
    system: &PartitionedSystem,
    force: &ForceSignal,
    q0_interior: &Vector,
    v0_interior: &Vector,
    h: f64,
    steps: usize,
) -> Result<Trajectory> {
    if force.dim() != system.n() {
        return Err(Error::dims("force signal", system.n(), force.dim()));
    }
    let n_b = system.n_boundary();
    let n_i = system.n_interior();
    integrate(
        &system.m_ii(),
        &system.k_ii(),
        |t| force.sample(t).rows(n_b, n_i).into_owned(),
        q0_interior,
        v0_interior,
        h,
        steps,
        false,
    )
}

/// Trajectory and solver statistics of a contact run.
#[derive(Debug, Clone)]
pub struct ContactRun {
    pub trajectory: Trajectory,
    pub diagnostics: ContactRunDiagnostics,
}

/// Full-order reference solution with node-to-node contact. The first two
/// states are prescribed and carry zero multipliers.
pub fn solve_contact_fom(
    system: &PartitionedSystem,
    constraints: &ContactConstraints,
    force: &ForceSignal,
    q0: &Vector,
    v0: &Vector,
    h: f64,
    steps: usize,
) -> Result<ContactRun> {
    check_time_grid(h, steps)?;
    let n = system.n();
    if force.dim() != n {
        return Err(Error::dims("force signal", n, force.dim()));
    }
    if constraints.n_boundary() != system.n_boundary() {
        return Err(Error::dims(
            "constraint matrix columns",
            system.n_boundary(),
            constraints.n_boundary(),
        ));
    }
    check_len("initial displacement", q0, n)?;
    check_len("initial velocity", v0, n)?;
    let mut stepper = ContactStepper::new(
        system.mass(),
        system.stiffness(),
        &constraints.padded(n),
        constraints.offsets(),
        h,
    )?;
    let mut forces = Matrix::zeros(n, steps + 1);
    for i in 0..=steps {
        forces.set_column(i, &force.sample(i as f64 * h));
    }
    let (states, multipliers) = stepper.run(&forces, q0.clone(), q0 + v0 * h)?;
    let trajectory = Trajectory::new(0.0, h, states, forces, Some(multipliers))?;
    Ok(ContactRun {
        trajectory,
        diagnostics: stepper.into_diagnostics(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_mass_spring_chain, harmonic_force, DofKind, DofLabel};

    fn scalar_system() -> PartitionedSystem {
        // Two decoupled unit oscillators: boundary and interior.
        let labels = (0..2).map(|node| DofLabel { node, kind: DofKind::Displacement }).collect();
        PartitionedSystem::new(Matrix::identity(2, 2), Matrix::identity(2, 2), 1, labels).unwrap()
    }

    #[test]
    fn scalar_recursion_value() {
        let s = scalar_system();
        let f = ForceSignal::constant(Vector::from_vec(vec![1.0, 1.0]));
        let z = Vector::zeros(2);
        let tr = simulate_free(&s, &f, &z, &z, 0.1, 2).unwrap();
        let expected = 0.01 / 1.01;
        assert!((tr.states[(0, 2)] - expected).abs() < 1e-16);
        assert!((tr.states[(1, 2)] - expected).abs() < 1e-16);
    }

    #[test]
    fn zero_dynamics_stay_zero() {
        let (s, _) = build_mass_spring_chain(&[1.0; 3], &[1.0; 3], &[0], &[1.0]).unwrap();
        let z = Vector::zeros(3);
        let tr = simulate_free(&s, &ForceSignal::zero(3), &z, &z, 0.05, 20).unwrap();
        assert_eq!(tr.states.amax(), 0.0);
        let fixed = simulate_fixed_boundary(&s, &ForceSignal::zero(3), &Vector::zeros(2), &Vector::zeros(2), 0.05, 20)
            .unwrap();
        assert_eq!(fixed.states.amax(), 0.0);
        assert_eq!(fixed.dim(), 2);
    }

    #[test]
    fn refactoring_is_bitwise_identical() {
        let (s, _) = build_mass_spring_chain(&[1.0, 2.0, 0.5], &[3.0, 1.0, 2.0], &[0], &[1.0]).unwrap();
        let f = harmonic_force(2.0, 0.3, &[2], 3).unwrap();
        let q0 = Vector::from_vec(vec![0.1, -0.2, 0.3]);
        let v0 = Vector::from_vec(vec![0.0, 1.0, 0.0]);
        let once = integrate(s.mass(), s.stiffness(), |t| f.sample(t), &q0, &v0, 0.01, 200, false).unwrap();
        let each = integrate(s.mass(), s.stiffness(), |t| f.sample(t), &q0, &v0, 0.01, 200, true).unwrap();
        assert_eq!(once.states, each.states);
    }

    #[test]
    fn rejects_bad_grid() {
        let s = scalar_system();
        let z = Vector::zeros(2);
        assert!(simulate_free(&s, &ForceSignal::zero(2), &z, &z, 0.0, 10).is_err());
        assert!(simulate_free(&s, &ForceSignal::zero(2), &z, &z, 0.1, 1).is_err());
        assert!(simulate_free(&s, &ForceSignal::zero(3), &z, &z, 0.1, 5).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let s = scalar_system();
        let f = ForceSignal::constant(Vector::from_vec(vec![1.0, -0.5]));
        let z = Vector::zeros(2);
        let tr = simulate_free(&s, &f, &z, &z, 0.1, 5).unwrap();
        let mut with_lambda = tr.clone();
        with_lambda.multipliers = Some(Matrix::from_element(1, 6, 0.25));
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("traj.csv");
        with_lambda.write_csv(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("t,q_0,q_1,lambda_0\n"));
        let back = Trajectory::read_csv(&path).unwrap();
        assert_eq!(back.states, tr.states);
        assert_eq!(back.multipliers, with_lambda.multipliers);
        assert!((back.h - 0.1).abs() < 1e-16);
    }

    #[test]
    fn trajectory_invariants() {
        let m = Matrix::zeros(1, 3);
        assert!(Trajectory::new(0.0, 0.1, Matrix::zeros(1, 2), Matrix::zeros(1, 2), None).is_err());
        assert!(Trajectory::new(0.0, -0.1, m.clone(), m.clone(), None).is_err());
        assert!(Trajectory::new(0.0, 0.1, m.clone(), m.clone(), Some(Matrix::from_element(1, 3, -1.0))).is_err());
    }
}
