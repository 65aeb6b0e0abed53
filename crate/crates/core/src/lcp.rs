//! Linear complementarity: find `λ ≥ 0` with `w = B + Aλ ≥ 0` and `λᵀw = 0`.
//!
//! [`lemke_solve`] is a dense complementary-pivoting solver with a covering
//! vector of ones and lexicographic ratio tests. [`ContactStepper`] couples it
//! to the implicit Euler recursion for both the full-order and the reduced
//! contact problems.

use std::cmp::Ordering;
use std::fmt::Write as _;

use nalgebra::{Cholesky, Dyn, LU};

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix, Vector};
use crate::model::{ContactConstraints, ForceSignal};
use crate::opinf::ReducedModel;
use crate::timestep::Trajectory;

/// Relative tolerance used when comparing ratios for ties.
const TIE_TOL: f64 = 1e-12;
/// Pivot entries below this fraction of the column scale count as zero.
const PIVOT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct LcpProblem {
    a: Matrix,
    b: Vector,
}

impl LcpProblem {
    pub fn new(a: Matrix, b: Vector) -> Result<Self> {
        let m = b.len();
        if m == 0 {
            return Err(Error::InvalidParameter("empty LCP".into()));
        }
        if a.shape() != (m, m) {
            return Err(Error::dims("LCP matrix", format!("{m}x{m}"), format!("{}x{}", a.nrows(), a.ncols())));
        }
        if a.iter().chain(b.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("LCP data must be finite".into()));
        }
        Ok(Self { a, b })
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }

    pub fn b(&self) -> &Vector {
        &self.b
    }

    pub fn size(&self) -> usize {
        self.b.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LcpStatus {
    Solved,
    RayTermination,
    IterationCap,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LcpSolution {
    pub lambda: Vector,
    pub w: Vector,
    pub status: LcpStatus,
    pub pivot_count: usize,
}

impl LcpSolution {
    /// `|λᵀw|` divided by `‖λ‖∞ · max(‖B‖∞, ‖A‖∞‖λ‖∞)`; zero when `λ = 0`.
    pub fn complementarity_residual(&self, problem: &LcpProblem) -> f64 {
        scaled_complementarity(&self.lambda, &self.w, problem)
    }
}

pub(crate) fn scaled_complementarity(lambda: &Vector, w: &Vector, problem: &LcpProblem) -> f64 {
    let lnorm = lambda.amax();
    if lnorm == 0.0 {
        return 0.0;
    }
    let scale = problem.b.amax().max(problem.a.amax() * lnorm);
    if scale == 0.0 {
        return 0.0;
    }
    lambda.dot(w).abs() / (lnorm * scale)
}

/// Variables of the tableau: `w_0..w_{m−1}`, `z_0..z_{m−1}`, then `z0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Var {
    W(usize),
    Z(usize),
    Artificial,
}

struct Tableau {
    m: usize,
    /// Columns: w (m), z (m), artificial, rhs.
    t: Matrix,
    basis: Vec<Var>,
}

impl Tableau {
    fn col(&self, v: Var) -> usize {
        match v {
            Var::W(i) => i,
            Var::Z(i) => self.m + i,
            Var::Artificial => 2 * self.m,
        }
    }

    fn rhs_col(&self) -> usize {
        2 * self.m + 1
    }

    fn pivot(&mut self, row: usize, entering: Var) {
        let col = self.col(entering);
        let p = self.t[(row, col)];
        let width = self.t.ncols();
        for j in 0..width {
            self.t[(row, j)] /= p;
        }
        for i in 0..self.m {
            if i == row {
                continue;
            }
            let factor = self.t[(i, col)];
            if factor != 0.0 {
                for j in 0..width {
                    let v = self.t[(row, j)];
                    self.t[(i, j)] -= factor * v;
                }
                self.t[(i, col)] = 0.0;
            }
        }
        self.basis[row] = entering;
    }

    /// Lexicographic key of row `i` for entering column `col`: the rhs ratio
    /// followed by the basis-inverse row (the `w` columns), all divided by the
    /// pivot candidate.
    fn key(&self, i: usize, col: usize) -> impl Iterator<Item = f64> + '_ {
        let d = self.t[(i, col)];
        std::iter::once(self.t[(i, self.rhs_col())] / d)
            .chain((0..self.m).map(move |j| self.t[(i, j)] / d))
    }

    fn lex_cmp(&self, a: usize, b: usize, col: usize) -> Ordering {
        for (x, y) in self.key(a, col).zip(self.key(b, col)) {
            let tol = TIE_TOL * x.abs().max(y.abs());
            if (x - y).abs() > tol {
                return x.total_cmp(&y);
            }
        }
        Ordering::Equal
    }

    /// Lexicographic minimum ratio row, preferring the artificial variable
    /// when it ties for the minimum ratio.
    fn ratio_test(&self, entering: Var) -> Option<usize> {
        let col = self.col(entering);
        let scale = (0..self.m).fold(0.0_f64, |acc, i| acc.max(self.t[(i, col)].abs()));
        let tol = PIVOT_TOL * scale;
        let candidates: Vec<usize> = (0..self.m).filter(|&i| self.t[(i, col)] > tol).collect();
        let first = *candidates.first()?;
        let best_ratio = candidates
            .iter()
            .map(|&i| self.t[(i, self.rhs_col())] / self.t[(i, col)])
            .fold(f64::INFINITY, f64::min);
        if let Some(&art) = candidates.iter().find(|&&i| self.basis[i] == Var::Artificial) {
            let r = self.t[(art, self.rhs_col())] / self.t[(art, col)];
            if (r - best_ratio).abs() <= TIE_TOL * best_ratio.abs().max(r.abs()) {
                return Some(art);
            }
        }
        let mut best = first;
        for &i in &candidates[1..] {
            if self.lex_cmp(i, best, col) == Ordering::Less {
                best = i;
            }
        }
        Some(best)
    }
}

/// Re-solves the final active set directly. Pivoting accumulates rounding,
/// while a single LU solve of the active block restores full precision.
fn polish(problem: &LcpProblem, active: &[usize]) -> Option<(Vector, Vector)> {
    let m = problem.size();
    let mut lambda = Vector::zeros(m);
    if !active.is_empty() {
        let k = active.len();
        let a_ss = Matrix::from_fn(k, k, |i, j| problem.a[(active[i], active[j])]);
        let rhs = Vector::from_iterator(k, active.iter().map(|&i| -problem.b[i]));
        let sol = LU::new(a_ss).solve(&rhs)?;
        let scale = sol.amax();
        for (idx, &i) in active.iter().enumerate() {
            if sol[idx] < -1e-10 * scale {
                return None;
            }
            lambda[i] = sol[idx].max(0.0);
        }
    }
    let mut w = &problem.b + &problem.a * &lambda;
    let wscale = problem.b.amax().max(problem.a.amax() * lambda.amax());
    for &i in active {
        w[i] = 0.0;
    }
    if w.iter().any(|&v| v < -1e-10 * wscale) {
        return None;
    }
    Some((lambda, w))
}

pub fn lemke_solve(problem: &LcpProblem) -> LcpSolution {
    let m = problem.size();
    if problem.b.iter().all(|&v| v >= 0.0) {
        return LcpSolution {
            lambda: Vector::zeros(m),
            w: problem.b.clone(),
            status: LcpStatus::Solved,
            pivot_count: 0,
        };
    }

    // w − A z − 1·z0 = B
    let mut t = Matrix::zeros(m, 2 * m + 2);
    for i in 0..m {
        t[(i, i)] = 1.0;
        for j in 0..m {
            t[(i, m + j)] = -problem.a[(i, j)];
        }
        t[(i, 2 * m)] = -1.0;
        t[(i, 2 * m + 1)] = problem.b[i];
    }
    let mut tab = Tableau {
        m,
        t,
        basis: (0..m).map(Var::W).collect(),
    };

    // Initial pivot: most negative B, ties broken lexicographically.
    let art_col = tab.col(Var::Artificial);
    let mut row = 0;
    for i in 1..m {
        // Ratios B_i / (−1) turn the minimum of B into the maximum ratio, so
        // compare the negated keys.
        if tab.lex_cmp(row, i, art_col) == Ordering::Less {
            row = i;
        }
    }
    let cap = 50 * m;
    let mut pivots = 0;
    let mut leaving = tab.basis[row];
    tab.pivot(row, Var::Artificial);
    pivots += 1;

    let status = loop {
        let entering = match leaving {
            Var::W(i) => Var::Z(i),
            Var::Z(i) => Var::W(i),
            Var::Artificial => break LcpStatus::Solved,
        };
        if pivots >= cap {
            break LcpStatus::IterationCap;
        }
        let Some(r) = tab.ratio_test(entering) else {
            break LcpStatus::RayTermination;
        };
        leaving = tab.basis[r];
        tab.pivot(r, entering);
        pivots += 1;
        if leaving == Var::Artificial {
            break LcpStatus::Solved;
        }
    };

    let rhs = tab.rhs_col();
    let mut lambda = Vector::zeros(m);
    let mut w = Vector::zeros(m);
    let mut active = Vec::new();
    for (i, v) in tab.basis.iter().enumerate() {
        let value = tab.t[(i, rhs)];
        match *v {
            Var::Z(j) => {
                lambda[j] = value.max(0.0);
                active.push(j);
            }
            Var::W(j) => w[j] = value.max(0.0),
            Var::Artificial => {}
        }
    }
    if status == LcpStatus::Solved {
        active.sort_unstable();
        if let Some((l, wp)) = polish(problem, &active) {
            lambda = l;
            w = wp;
        } else {
            w = &problem.b + &problem.a * &lambda;
        }
    }
    LcpSolution {
        lambda,
        w,
        status,
        pivot_count: pivots,
    }
}

/// `h² C (M + h²K)⁻¹ Cᵀ` with the constraint operator padded to the full
/// (reduced) dimension.
pub fn assemble_lcp_matrix(mass: &Matrix, stiffness: &Matrix, c_b: &Matrix, h: f64) -> Result<Matrix> {
    let stepper = ContactStepper::new(mass, stiffness, &pad(c_b, mass.nrows())?, &Vector::zeros(c_b.nrows()), h)?;
    Ok(stepper.lcp_matrix().clone())
}

fn pad(c_b: &Matrix, total: usize) -> Result<Matrix> {
    if c_b.ncols() > total {
        return Err(Error::dims("constraint matrix columns", format!("≤ {total}"), c_b.ncols()));
    }
    let mut c = Matrix::zeros(c_b.nrows(), total);
    c.view_mut((0, 0), c_b.shape()).copy_from(c_b);
    Ok(c)
}

/// `B̂_i = C_B (M̂ + h²K̂)⁻¹ (h²f̂_i + 2M̂q̂_{i−1} − M̂q̂_{i−2}) + b`.
pub fn assemble_lcp_rhs(
    model: &ReducedModel,
    constraints: &ContactConstraints,
    h: f64,
    f_hat: &Vector,
    q_prev: &Vector,
    q_prev2: &Vector,
) -> Result<Vector> {
    let stepper = ContactStepper::for_model(model, constraints, h)?;
    stepper.check_state_dims(f_hat, q_prev, q_prev2)?;
    Ok(stepper.lcp_rhs(f_hat, q_prev, q_prev2))
}

/// Reduced state after a step with the given multipliers.
pub fn step_reduced(
    model: &ReducedModel,
    constraints: &ContactConstraints,
    h: f64,
    f_hat: &Vector,
    q_prev: &Vector,
    q_prev2: &Vector,
    lambda: &Vector,
) -> Result<Vector> {
    let stepper = ContactStepper::for_model(model, constraints, h)?;
    stepper.check_state_dims(f_hat, q_prev, q_prev2)?;
    if lambda.len() != constraints.count() {
        return Err(Error::dims("multipliers", constraints.count(), lambda.len()));
    }
    if lambda.iter().any(|&l| l < 0.0) {
        return Err(Error::InvalidParameter("multipliers must be nonnegative".into()));
    }
    let predicted = stepper.predict(f_hat, q_prev, q_prev2);
    Ok(stepper.correct(&predicted, lambda))
}

/// Solver counters and residuals of one contact simulation.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ContactRunDiagnostics {
    pub factorizations: usize,
    pub lcp_matrix_assemblies: usize,
    pub pivots_per_step: Vec<usize>,
    pub max_complementarity: f64,
    pub max_gap_violation: f64,
    pub warnings: Vec<String>,
}

impl ContactRunDiagnostics {
    pub fn to_report(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "factorizations = {}", self.factorizations);
        let _ = writeln!(out, "lcp_matrix_assemblies = {}", self.lcp_matrix_assemblies);
        let _ = writeln!(out, "max_complementarity = {:e}", self.max_complementarity);
        let _ = writeln!(out, "max_gap_violation = {:e}", self.max_gap_violation);
        let total: usize = self.pivots_per_step.iter().sum();
        let _ = writeln!(out, "total_pivots = {total}");
        let list: Vec<String> = self.pivots_per_step.iter().map(usize::to_string).collect();
        let _ = writeln!(out, "pivots_per_step = {}", list.join(" "));
        for w in &self.warnings {
            let _ = writeln!(out, "warning = {w}");
        }
        out
    }
}

/// Implicit Euler with contact: one factorization of `M + h²K`, the LCP
/// matrix `A = h² C (M + h²K)⁻¹ Cᵀ` assembled once, one LCP per step.
pub struct ContactStepper {
    mass: Matrix,
    h: f64,
    factor: Cholesky<f64, Dyn>,
    c: Matrix,
    offsets: Vector,
    /// `(M + h²K)⁻¹ Cᵀ`.
    response: Matrix,
    lcp_matrix: Matrix,
    diagnostics: ContactRunDiagnostics,
}

impl ContactStepper {
    /// `c` acts on the whole state vector (boundary block first, zero
    /// elsewhere).
    pub fn new(mass: &Matrix, stiffness: &Matrix, c: &Matrix, offsets: &Vector, h: f64) -> Result<Self> {
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::InvalidParameter(format!("time step must be positive, got {h}")));
        }
        let n = mass.nrows();
        if stiffness.shape() != (n, n) || mass.ncols() != n {
            return Err(Error::dims("mass/stiffness", format!("{n}x{n}"), format!("{}x{}", stiffness.nrows(), stiffness.ncols())));
        }
        if c.ncols() != n {
            return Err(Error::dims("constraint operator columns", n, c.ncols()));
        }
        if offsets.len() != c.nrows() {
            return Err(Error::dims("contact offsets", c.nrows(), offsets.len()));
        }
        let s = mass + stiffness * (h * h);
        let factor = Cholesky::new(s).ok_or_else(|| Error::Singular("M + h²K".into()))?;
        let response = factor.solve(&c.transpose());
        let lcp_matrix = linalg::symmetrize(&(c * &response * (h * h)));
        let mut diagnostics = ContactRunDiagnostics {
            factorizations: 1,
            lcp_matrix_assemblies: 1,
            ..Default::default()
        };
        if linalg::min_eigenvalue(&lcp_matrix) <= 0.0 {
            diagnostics
                .warnings
                .push("LCP matrix is only positive semidefinite (constraint rows are dependent)".into());
        }
        Ok(Self {
            mass: mass.clone(),
            h,
            factor,
            c: c.clone(),
            offsets: offsets.clone(),
            response,
            lcp_matrix,
            diagnostics,
        })
    }

    pub fn for_model(model: &ReducedModel, constraints: &ContactConstraints, h: f64) -> Result<Self> {
        let d = model.m_hat.nrows();
        if constraints.n_boundary() != model.n_boundary() {
            return Err(Error::dims("constraint matrix columns", model.n_boundary(), constraints.n_boundary()));
        }
        Self::new(&model.m_hat, &model.k_hat, &constraints.padded(d), constraints.offsets(), h)
    }

    pub fn lcp_matrix(&self) -> &Matrix {
        &self.lcp_matrix
    }

    pub fn dim(&self) -> usize {
        self.mass.nrows()
    }

    fn check_state_dims(&self, f: &Vector, q_prev: &Vector, q_prev2: &Vector) -> Result<()> {
        let d = self.dim();
        for (name, v) in [("force", f), ("previous state", q_prev), ("state before previous", q_prev2)] {
            if v.len() != d {
                return Err(Error::dims(name, d, v.len()));
            }
        }
        Ok(())
    }

    /// Contact-free prediction `(M + h²K)⁻¹(h²f + 2Mq_{i−1} − Mq_{i−2})`.
    pub fn predict(&self, f: &Vector, q_prev: &Vector, q_prev2: &Vector) -> Vector {
        let mut hist = q_prev * 2.0;
        hist -= q_prev2;
        let rhs = &self.mass * hist + f * (self.h * self.h);
        self.factor.solve(&rhs)
    }

    /// `C q_pred + b`.
    pub fn lcp_rhs(&self, f: &Vector, q_prev: &Vector, q_prev2: &Vector) -> Vector {
        &self.c * self.predict(f, q_prev, q_prev2) + &self.offsets
    }

    /// `q_pred + h² (M + h²K)⁻¹ Cᵀ λ`.
    pub fn correct(&self, predicted: &Vector, lambda: &Vector) -> Vector {
        predicted + &self.response * lambda * (self.h * self.h)
    }

    /// One contact step at time index `step` (used in error messages).
    pub fn step(
        &mut self,
        step: usize,
        f: &Vector,
        q_prev: &Vector,
        q_prev2: &Vector,
    ) -> Result<(Vector, LcpSolution)> {
        let predicted = self.predict(f, q_prev, q_prev2);
        let b = &self.c * &predicted + &self.offsets;
        let problem = LcpProblem::new(self.lcp_matrix.clone(), b)
            .map_err(|e| Error::Lcp { step, reason: e.to_string() })?;
        let sol = lemke_solve(&problem);
        match sol.status {
            LcpStatus::Solved => {}
            LcpStatus::RayTermination => {
                return Err(Error::Lcp { step, reason: "ray termination".into() })
            }
            LcpStatus::IterationCap => {
                return Err(Error::Lcp { step, reason: "pivot limit reached".into() })
            }
        }
        let q = self.correct(&predicted, &sol.lambda);
        let gap = &self.c * &q + &self.offsets;
        let violation = gap.iter().fold(0.0_f64, |acc, &g| acc.max(-g));
        let d = &mut self.diagnostics;
        d.max_gap_violation = d.max_gap_violation.max(violation);
        d.max_complementarity = d.max_complementarity.max(sol.complementarity_residual(&problem));
        d.pivots_per_step.push(sol.pivot_count);
        Ok((q, sol))
    }

    /// Runs the recursion over all force columns given the first two states.
    /// Multipliers of the two starting columns are zero.
    pub fn run(&mut self, forces: &Matrix, q0: Vector, q1: Vector) -> Result<(Matrix, Matrix)> {
        let d = self.dim();
        let k = forces.ncols();
        if forces.nrows() != d {
            return Err(Error::dims("force samples", d, forces.nrows()));
        }
        let mut states = Matrix::zeros(d, k);
        let mut multipliers = Matrix::zeros(self.c.nrows(), k);
        states.set_column(0, &q0);
        states.set_column(1, &q1);
        for i in 2..k {
            let (q, sol) = self.step(
                i,
                &forces.column(i).into_owned(),
                &states.column(i - 1).into_owned(),
                &states.column(i - 2).into_owned(),
            )?;
            states.set_column(i, &q);
            multipliers.set_column(i, &sol.lambda);
        }
        Ok((states, multipliers))
    }

    pub fn diagnostics(&self) -> &ContactRunDiagnostics {
        &self.diagnostics
    }

    pub fn into_diagnostics(self) -> ContactRunDiagnostics {
        self.diagnostics
    }
}

/// Output of a reduced contact simulation.
#[derive(Debug, Clone)]
pub struct RomRun {
    /// Reduced coordinates `q̂` with multipliers.
    pub reduced: Trajectory,
    /// `q = V q̂` with the same multipliers and the full-order loads.
    pub lifted: Trajectory,
    pub diagnostics: ContactRunDiagnostics,
}

/// Reduced coordinates of a full-order state:
/// `(q_B, V_I⁺ (q_I − Φ q_B))`, the inverse of the lifting `q = V q̂`.
pub fn reduce_state(model: &ReducedModel, q: &Vector) -> Result<Vector> {
    let n_b = model.n_boundary();
    let n_i = model.interior_basis.nrows();
    if q.len() != n_b + n_i {
        return Err(Error::dims("full-order state", n_b + n_i, q.len()));
    }
    let q_b = q.rows(0, n_b).into_owned();
    let rel = q.rows(n_b, n_i) - model.coupling.phi() * &q_b;
    let (coeffs, _) = linalg::lstsq_min_norm(&model.interior_basis, &Matrix::from_column_slice(n_i, 1, rel.as_slice()))?;
    let r = model.interior_basis.ncols();
    let mut out = Vector::zeros(n_b + r);
    out.rows_mut(0, n_b).copy_from(&q_b);
    out.rows_mut(n_b, r).copy_from(&coeffs.column(0));
    Ok(out)
}

/// Reduced contact simulation followed by lifting to full order.
pub fn simulate_contact_rom(
    model: &ReducedModel,
    constraints: &ContactConstraints,
    force: &ForceSignal,
    q0: &Vector,
    v0: &Vector,
    h: f64,
    steps: usize,
) -> Result<RomRun> {
    if steps < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 steps, got {steps}")));
    }
    let v = &model.global_basis;
    let n = v.nrows();
    if force.dim() != n {
        return Err(Error::dims("force signal", n, force.dim()));
    }
    let mut stepper = ContactStepper::for_model(model, constraints, h)?;
    let k = steps + 1;
    let mut forces = Matrix::zeros(n, k);
    for i in 0..k {
        forces.set_column(i, &force.sample(i as f64 * h));
    }
    let reduced_forces = v.transpose() * &forces;
    let q0_hat = reduce_state(model, q0)?;
    let v0_hat = reduce_state(model, v0)?;
    let q1_hat = &q0_hat + v0_hat * h;
    let (states, multipliers) = stepper.run(&reduced_forces, q0_hat, q1_hat)?;
    let lifted_states = v * &states;
    let reduced = Trajectory::new(0.0, h, states, reduced_forces, Some(multipliers.clone()))?;
    let lifted = Trajectory::new(0.0, h, lifted_states, forces, Some(multipliers))?;
    Ok(RomRun {
        reduced,
        lifted,
        diagnostics: stepper.into_diagnostics(),
    })
}
