//! SPD-constrained operator inference.
//!
//! [`solve_spd_lsq`] minimizes `‖M Q̈ + K Q − F‖_F²` over symmetric `M`, `K`
//! with `M ⪰ εI`, `K ⪰ εI`, optionally with a trailing diagonal block of both
//! matrices fixed. The unknowns are the free upper-triangle entries. The
//! method is a log-det barrier with damped Newton steps; each Newton system
//! is solved as a stacked least-squares problem so the (often badly scaled)
//! data never has to be squared.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::{Cholesky, QR};

use crate::coupling::{coupling_from_static_modes, coupling_full_lsq, coupling_reduced_lsq, CouplingMatrix, CouplingMethod};
use crate::error::{Error, Result};
use crate::linalg::{self, Matrix, Vector};
use crate::mtx::{self, Symmetry};
use crate::snapshots::{pod, reduce_interior_data, reduce_training_data, PodBasis, PodTruncation, ReducedTrainingData, SnapshotSet};

/// Relative size of the default margin: `ε = 1e-8 · ‖R‖_F / ‖D‖_F`.
pub const DEFAULT_MARGIN_FACTOR: f64 = 1e-8;

/// Block of `M` and `K` held at given values: rows/columns `start..d`.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedBlock {
    pub start: usize,
    pub mass: Matrix,
    pub stiffness: Matrix,
}

/// `min ‖D [M; K] − R‖_F²` with `D = [Q̈ᵀ, Qᵀ]` (k × 2d) and `R = Fᵀ` (k × d).
#[derive(Debug, Clone, PartialEq)]
pub struct SpdLsqProblem {
    data_matrix: Matrix,
    rhs: Matrix,
    margin: f64,
    fixed: Option<FixedBlock>,
}

impl SpdLsqProblem {
    pub fn new(data_matrix: Matrix, rhs: Matrix, margin: f64) -> Result<Self> {
        let d = rhs.ncols();
        if d == 0 {
            return Err(Error::InvalidParameter("empty operator dimension".into()));
        }
        if data_matrix.ncols() != 2 * d {
            return Err(Error::dims("data matrix columns", 2 * d, data_matrix.ncols()));
        }
        if data_matrix.nrows() != rhs.nrows() {
            return Err(Error::dims("data matrix rows", rhs.nrows(), data_matrix.nrows()));
        }
        if !(margin > 0.0) || !margin.is_finite() {
            return Err(Error::InvalidParameter(format!("SPD margin must be positive, got {margin}")));
        }
        if data_matrix.iter().chain(rhs.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite training data".into()));
        }
        Ok(Self {
            data_matrix,
            rhs,
            margin,
            fixed: None,
        })
    }

    /// Builds `D` and `R` from snapshot-layout matrices (one column per sample).
    pub fn from_snapshots(qdd: &Matrix, q: &Matrix, f: &Matrix, margin: f64) -> Result<Self> {
        let (d, k) = q.shape();
        if qdd.shape() != (d, k) || f.shape() != (d, k) {
            return Err(Error::dims(
                "training data",
                format!("{d}x{k}"),
                format!("{}x{} and {}x{}", qdd.nrows(), qdd.ncols(), f.nrows(), f.ncols()),
            ));
        }
        let mut data = Matrix::zeros(k, 2 * d);
        data.columns_mut(0, d).copy_from(&qdd.transpose());
        data.columns_mut(d, d).copy_from(&q.transpose());
        Self::new(data, f.transpose(), margin)
    }

    /// Fixes rows/columns `start..d` of both operators.
    pub fn with_fixed_block(mut self, start: usize, mass: Matrix, stiffness: Matrix) -> Result<Self> {
        let d = self.dim();
        if start == 0 || start >= d {
            return Err(Error::InvalidParameter(format!("fixed block start {start} outside 1..{d}")));
        }
        let size = d - start;
        for (name, m) in [("mass", &mass), ("stiffness", &stiffness)] {
            if m.shape() != (size, size) {
                return Err(Error::dims(
                    format!("fixed {name} block"),
                    format!("{size}x{size}"),
                    format!("{}x{}", m.nrows(), m.ncols()),
                ));
            }
            if linalg::symmetry_defect(m) > 1e-10 {
                return Err(Error::InfeasibleTargets(format!("fixed {name} block is not symmetric")));
            }
        }
        self.fixed = Some(FixedBlock {
            start,
            mass: linalg::symmetrize(&mass),
            stiffness: linalg::symmetrize(&stiffness),
        });
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.rhs.ncols()
    }

    pub fn margin(&self) -> f64 {
        self.margin
    }

    pub fn data_matrix(&self) -> &Matrix {
        &self.data_matrix
    }

    pub fn rhs(&self) -> &Matrix {
        &self.rhs
    }

    pub fn fixed_block(&self) -> Option<&FixedBlock> {
        self.fixed.as_ref()
    }
}

/// `1e-8 · ‖R‖_F / ‖D‖_F` for snapshot-layout data.
pub fn default_margin(qdd: &Matrix, q: &Matrix, f: &Matrix) -> Result<f64> {
    let dnorm = (qdd.norm_squared() + q.norm_squared()).sqrt();
    let rnorm = f.norm();
    if dnorm == 0.0 || rnorm == 0.0 {
        return Err(Error::InvalidParameter(
            "cannot derive an SPD margin from all-zero training data".into(),
        ));
    }
    Ok(DEFAULT_MARGIN_FACTOR * rnorm / dnorm)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpdLsqOptions {
    /// Newton iteration cap over all barrier rounds.
    pub max_iterations: usize,
    /// `δ_opt = tolerance · ‖R‖_F²` bounds the final suboptimality.
    pub tolerance: f64,
}

impl Default for SpdLsqOptions {
    fn default() -> Self {
        Self {
            max_iterations: 10_000,
            tolerance: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpdLsqDiagnostics {
    pub objective: f64,
    pub unconstrained_objective: f64,
    pub initial_objective: f64,
    /// Upper bound on `objective − optimum` from the barrier schedule.
    pub gap_bound: f64,
    pub min_eig_mass: f64,
    pub min_eig_stiffness: f64,
    pub margin: f64,
    pub effective_margin: f64,
    pub iterations: usize,
    pub barrier_rounds: usize,
    pub data_rank: usize,
    pub unknowns: usize,
    pub unconstrained_feasible: bool,
    pub snapped: bool,
    pub warnings: Vec<String>,
}

impl SpdLsqDiagnostics {
    pub fn to_report(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "objective = {:e}", self.objective);
        let _ = writeln!(out, "unconstrained_objective = {:e}", self.unconstrained_objective);
        let _ = writeln!(out, "initial_objective = {:e}", self.initial_objective);
        let _ = writeln!(out, "gap_bound = {:e}", self.gap_bound);
        let _ = writeln!(out, "min_eig_mass = {:e}", self.min_eig_mass);
        let _ = writeln!(out, "min_eig_stiffness = {:e}", self.min_eig_stiffness);
        let _ = writeln!(out, "feasibility_residual = {:e}", self.feasibility_residual());
        let _ = writeln!(out, "epsilon = {:e}", self.margin);
        let _ = writeln!(out, "effective_epsilon = {:e}", self.effective_margin);
        let _ = writeln!(out, "iterations = {}", self.iterations);
        let _ = writeln!(out, "barrier_rounds = {}", self.barrier_rounds);
        let _ = writeln!(out, "data_rank = {}", self.data_rank);
        let _ = writeln!(out, "unknowns = {}", self.unknowns);
        let _ = writeln!(out, "unconstrained_feasible = {}", self.unconstrained_feasible);
        let _ = writeln!(out, "snapped = {}", self.snapped);
        for w in &self.warnings {
            let _ = writeln!(out, "warning = {w}");
        }
        out
    }

    /// `max(0, ε − λ_min)` over both operators.
    pub fn feasibility_residual(&self) -> f64 {
        (self.margin - self.min_eig_mass.min(self.min_eig_stiffness)).max(0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpdLsqSolution {
    pub mass: Matrix,
    pub stiffness: Matrix,
    pub diagnostics: SpdLsqDiagnostics,
}

/// Free unknowns: upper-triangle positions `(i, j)`, `i ≤ j`, outside the
/// fixed block.
fn free_entries(d: usize, fixed_start: Option<usize>) -> Vec<(usize, usize)> {
    let mut idx = Vec::new();
    for i in 0..d {
        for j in i..d {
            if matches!(fixed_start, Some(s) if i >= s && j >= s) {
                continue;
            }
            idx.push((i, j));
        }
    }
    idx
}

/// Problem data in the entry parametrization:
/// `f(x) = ‖R_a x + y‖² + c0` and `S(x) = S0 + Σ x_a E_a`.
struct Parametrized {
    d: usize,
    idx: Vec<(usize, usize)>,
    m0: Matrix,
    k0: Matrix,
    r_a: Matrix,
    y: Vector,
    c0: f64,
}

impl Parametrized {
    fn build(problem: &SpdLsqProblem) -> Self {
        let d = problem.dim();
        let k = problem.data_matrix.nrows();
        let fixed_start = problem.fixed.as_ref().map(|f| f.start);
        let idx = free_entries(d, fixed_start);
        let p = idx.len();
        let mut m0 = Matrix::zeros(d, d);
        let mut k0 = Matrix::zeros(d, d);
        if let Some(f) = &problem.fixed {
            let s = f.start;
            m0.view_mut((s, s), (d - s, d - s)).copy_from(&f.mass);
            k0.view_mut((s, s), (d - s, d - s)).copy_from(&f.stiffness);
        }
        let d_m = problem.data_matrix.columns(0, d);
        let d_k = problem.data_matrix.columns(d, d);
        let r0_mat = &d_m * &m0 + &d_k * &k0 - &problem.rhs;
        let r0 = Vector::from_column_slice(r0_mat.as_slice());

        // Column a of the design matrix is vec(D_part E_a): D_part[:, i]
        // lands in result column j and D_part[:, j] in column i.
        let mut a = Matrix::zeros(k * d, 2 * p);
        for (part, dp) in [d_m, d_k].iter().enumerate() {
            for (c, &(i, j)) in idx.iter().enumerate() {
                let col = part * p + c;
                for t in 0..k {
                    a[(j * k + t, col)] += dp[(t, i)];
                    if i != j {
                        a[(i * k + t, col)] += dp[(t, j)];
                    }
                }
            }
        }
        let n_unknowns = 2 * p;
        let (r_a, y, c0) = if a.nrows() >= n_unknowns {
            let qr = QR::new(a);
            let q = qr.q();
            let y = q.transpose() * &r0;
            let c0 = (&r0 - &q * &y).norm_squared();
            (qr.r(), y, c0)
        } else {
            // Fewer residual entries than unknowns: keep the design matrix
            // itself, which serves the same role.
            (a, r0, 0.0)
        };
        Self {
            d,
            idx,
            m0,
            k0,
            r_a,
            y,
            c0,
        }
    }

    fn p(&self) -> usize {
        self.idx.len()
    }

    fn objective(&self, x: &Vector) -> f64 {
        (&self.r_a * x + &self.y).norm_squared() + self.c0
    }

    fn matrices(&self, x: &Vector) -> (Matrix, Matrix) {
        let p = self.p();
        let mut m = self.m0.clone();
        let mut k = self.k0.clone();
        for (c, &(i, j)) in self.idx.iter().enumerate() {
            m[(i, j)] = x[c];
            m[(j, i)] = x[c];
            k[(i, j)] = x[p + c];
            k[(j, i)] = x[p + c];
        }
        (m, k)
    }

    fn vars(&self, m: &Matrix, k: &Matrix) -> Vector {
        let p = self.p();
        let mut x = Vector::zeros(2 * p);
        for (c, &(i, j)) in self.idx.iter().enumerate() {
            x[c] = 0.5 * (m[(i, j)] + m[(j, i)]);
            x[p + c] = 0.5 * (k[(i, j)] + k[(j, i)]);
        }
        x
    }
}

/// Log-det barrier `−log det(M − εI) − log det(K − εI)` with its gradient
/// and a square-root factor `J` of the Hessian (`H = JᵀJ`). With
/// `S − εI = L Lᵀ` and `W = L⁻¹`, row `(p, q)` of `J` holds the entries of
/// `W E_a Wᵀ`, weighted by √2 off the diagonal. `None` outside the domain.
fn barrier(par: &Parametrized, x: &Vector, eps: f64) -> Option<(f64, Vector, Matrix)> {
    let p = par.p();
    let d = par.d;
    let tri = d * (d + 1) / 2;
    let (m, k) = par.matrices(x);
    let mut value = 0.0;
    let mut grad = Vector::zeros(2 * p);
    let mut factor = Matrix::zeros(2 * tri, 2 * p);
    let eye = Matrix::identity(d, d);
    for (block, s) in [m, k].into_iter().enumerate() {
        let chol = Cholesky::new(s - &eye * eps)?;
        let l = chol.l();
        value -= 2.0 * l.diagonal().iter().map(|v| v.ln()).sum::<f64>();
        let w = l.solve_lower_triangular(&eye)?;
        let off = block * p;
        for (a, &(i, j)) in par.idx.iter().enumerate() {
            let mut row = block * tri;
            let mut g = 0.0;
            for pp in 0..d {
                for qq in pp..d {
                    let y = if i == j {
                        w[(pp, i)] * w[(qq, i)]
                    } else {
                        w[(pp, i)] * w[(qq, j)] + w[(pp, j)] * w[(qq, i)]
                    };
                    if pp == qq {
                        factor[(row, off + a)] = y;
                        g += y;
                    } else {
                        factor[(row, off + a)] = std::f64::consts::SQRT_2 * y;
                    }
                    row += 1;
                }
            }
            grad[off + a] = -g;
        }
    }
    Some((value, grad, factor))
}

fn barrier_value(par: &Parametrized, x: &Vector, eps: f64) -> Option<f64> {
    let (m, k) = par.matrices(x);
    let eye = Matrix::identity(par.d, par.d);
    let mut value = 0.0;
    for s in [m, k] {
        let chol = Cholesky::new(s - &eye * eps)?;
        value -= 2.0 * chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    }
    Some(value)
}

/// Eigenvalues raised to at least `floor`.
fn clip_eigenvalues(s: &Matrix, floor: f64) -> Matrix {
    let (vals, vecs) = linalg::sorted_symmetric_eigen(&linalg::symmetrize(s));
    let clipped = vals.map(|v| v.max(floor));
    linalg::symmetrize(&(&vecs * Matrix::from_diagonal(&clipped) * vecs.transpose()))
}

/// Strictly feasible point with a fixed trailing block `T`: keeps the
/// coupling rows and raises the Schur complement of `S − εI` to at least `lift`.
fn clip_with_fixed_block(s: &Matrix, start: usize, eps: f64, lift: f64) -> Result<Matrix> {
    let d = s.nrows();
    let nb = start;
    let nt = d - start;
    let t = s.view((nb, nb), (nt, nt)).into_owned() - Matrix::identity(nt, nt) * eps;
    let s_bi = s.view((0, nb), (nb, nt)).into_owned();
    let chol = linalg::cholesky(&t, "fixed block minus margin")?;
    let coupling = &s_bi * chol.solve(&s_bi.transpose());
    let schur = s.view((0, 0), (nb, nb)).into_owned() - Matrix::identity(nb, nb) * eps - &coupling;
    let schur = clip_eigenvalues(&schur, lift);
    let mut out = s.clone();
    out.view_mut((0, 0), (nb, nb))
        .copy_from(&linalg::symmetrize(&(Matrix::identity(nb, nb) * eps + schur + coupling)));
    Ok(out)
}

/// Replaces eigenvalues within `tol` of `eps` by `eps` exactly.
fn snap_to_margin(s: &Matrix, eps: f64, tol: f64) -> Option<Matrix> {
    let (vals, vecs) = linalg::sorted_symmetric_eigen(s);
    if !vals.iter().any(|&v| v - eps <= tol) {
        return None;
    }
    let snapped = vals.map(|v| if v - eps <= tol { eps } else { v });
    Some(linalg::symmetrize(&(&vecs * Matrix::from_diagonal(&snapped) * vecs.transpose())))
}

/// Newton step from the stacked system `[√(2t) R_a; Lᵀ] Δ = −[√(2t)(R_a x + y); L⁻¹ g]`.
fn newton_direction(par: &Parametrized, x: &Vector, t: f64, factor: &Matrix) -> Option<Vector> {
    let nu = x.len();
    let d = par.d;
    let tri = d * (d + 1) / 2;
    let st = (2.0 * t).sqrt();
    let rows_a = par.r_a.nrows();
    let rows_b = factor.nrows();
    let mut stacked = Matrix::zeros(rows_a + rows_b, nu);
    stacked.rows_mut(0, rows_a).copy_from(&(&par.r_a * st));
    stacked.rows_mut(rows_a, rows_b).copy_from(factor);
    let mut rhs = Vector::zeros(rows_a + rows_b);
    rhs.rows_mut(0, rows_a).copy_from(&((&par.r_a * x + &par.y) * (-st)));
    // The barrier gradient is −Jᵀ svec(I).
    for block in 0..2 {
        let mut row = rows_a + block * tri;
        for pp in 0..d {
            rhs[row] = 1.0;
            row += d - pp;
        }
    }
    let qr = QR::new(stacked);
    let qtb = qr.q().transpose() * rhs;
    qr.r().solve_upper_triangular(&qtb)
}

pub fn solve_spd_lsq(problem: &SpdLsqProblem) -> Result<SpdLsqSolution> {
    solve_spd_lsq_with(problem, &SpdLsqOptions::default())
}

pub fn solve_spd_lsq_with(problem: &SpdLsqProblem, options: &SpdLsqOptions) -> Result<SpdLsqSolution> {
    let eps = problem.margin;
    let d = problem.dim();
    let mut warnings = Vec::new();

    let data_sv: Vec<f64> = problem.data_matrix.singular_values().iter().copied().collect();
    let data_rank = linalg::numerical_rank(&data_sv, problem.data_matrix.nrows(), problem.data_matrix.ncols());
    if data_rank < 2 * d {
        warnings.push(format!(
            "data matrix rank {data_rank} below 2·d = {}; operators are not identifiable from this data",
            2 * d
        ));
    }

    let mut eps_eff = eps;
    if let Some(f) = &problem.fixed {
        for (name, m) in [("mass", &f.mass), ("stiffness", &f.stiffness)] {
            let lmin = linalg::min_eigenvalue(m);
            let norm = linalg::symmetric_norm2(m);
            if lmin <= 0.0 || lmin < eps - 1e-8 * norm {
                return Err(Error::InfeasibleTargets(format!(
                    "fixed {name} block has smallest eigenvalue {lmin:e}, below the margin {eps:e}"
                )));
            }
            eps_eff = eps_eff.min(lmin * (1.0 - 1e-6));
        }
    }

    let par = Parametrized::build(problem);
    let nu = 2 * par.p();
    let rnorm2 = problem.rhs.norm_squared();
    let delta_opt = options.tolerance * rnorm2;
    let dnorm = problem.data_matrix.norm();
    let data_scale = if dnorm > 0.0 { problem.rhs.norm() / dnorm } else { eps };

    // Minimum-norm unconstrained solution.
    let (x_ls, _) = linalg::lstsq_min_norm(&par.r_a, &Matrix::from_column_slice(par.y.len(), 1, (-&par.y).as_slice()))?;
    let x_ls = x_ls.column(0).into_owned();
    let unconstrained_objective = par.objective(&x_ls);
    let (m_ls, k_ls) = par.matrices(&x_ls);
    let unconstrained_feasible =
        linalg::min_eigenvalue(&m_ls) > eps && linalg::min_eigenvalue(&k_ls) > eps;

    let finish = |m: Matrix,
                  k: Matrix,
                  objective: f64,
                  initial_objective: f64,
                  gap_bound: f64,
                  iterations: usize,
                  rounds: usize,
                  snapped: bool,
                  warnings: Vec<String>| SpdLsqSolution {
        diagnostics: SpdLsqDiagnostics {
            objective,
            unconstrained_objective,
            initial_objective,
            gap_bound,
            min_eig_mass: linalg::min_eigenvalue(&m),
            min_eig_stiffness: linalg::min_eigenvalue(&k),
            margin: eps,
            effective_margin: eps_eff,
            iterations,
            barrier_rounds: rounds,
            data_rank,
            unknowns: nu,
            unconstrained_feasible,
            snapped,
            warnings,
        },
        mass: m,
        stiffness: k,
    };

    if unconstrained_feasible {
        return Ok(finish(m_ls, k_ls, unconstrained_objective, unconstrained_objective, 0.0, 0, 0, false, warnings));
    }

    // The clip floor sits `lift` above the margin. Large operator norms can
    // swallow a floor of order ε in rounding, so it is raised until the
    // initializer is strictly inside the barrier domain.
    let scale = linalg::symmetric_norm2(&m_ls).max(linalg::symmetric_norm2(&k_ls));
    let mut lift = eps_eff;
    let mut start = None;
    for _ in 0..8 {
        let (m_init, k_init) = match &problem.fixed {
            None => (clip_eigenvalues(&m_ls, eps_eff + lift), clip_eigenvalues(&k_ls, eps_eff + lift)),
            Some(f) => (
                clip_with_fixed_block(&m_ls, f.start, eps_eff, lift)?,
                clip_with_fixed_block(&k_ls, f.start, eps_eff, lift)?,
            ),
        };
        let x = par.vars(&m_init, &k_init);
        if barrier_value(&par, &x, eps_eff).is_some() {
            start = Some(x);
            break;
        }
        lift = lift.max(1e-12 * scale) * 100.0;
    }
    let x0 = start.ok_or_else(|| Error::Singular("barrier initializer is not strictly feasible".into()))?;
    let f0 = par.objective(&x0);
    if f0 <= delta_opt {
        let (m, k) = par.matrices(&x0);
        return Ok(finish(m, k, f0, f0, f0, 0, 0, false, warnings));
    }

    const ALPHA: f64 = 0.25;
    const BETA: f64 = 0.5;
    const CENTERING_TOL: f64 = 1e-10;
    let n_bar = (2 * d) as f64;
    let mut t = n_bar / f0.max(delta_opt);
    let mut x = x0.clone();
    let mut iterations = 0;
    let mut rounds = 0;
    loop {
        rounds += 1;
        loop {
            let (bval, g_b, factor) =
                barrier(&par, &x, eps_eff).ok_or_else(|| Error::Singular("barrier left its domain".into()))?;
            let res = &par.r_a * &x + &par.y;
            let grad = par.r_a.transpose() * &res * (2.0 * t) + &g_b;
            let Some(dx) = newton_direction(&par, &x, t, &factor) else {
                return Err(Error::Singular("barrier Newton system".into()));
            };
            iterations += 1;
            let dec = -grad.dot(&dx);
            // Relative to the scaled objective; an absolute threshold sits below
            // rounding once t·f is large.
            if dec / 2.0 < CENTERING_TOL * (t * par.objective(&x)).max(1.0) {
                break;
            }
            if iterations >= options.max_iterations {
                return Err(Error::SolverNonConvergence {
                    iterations,
                    objective: par.objective(&x),
                    decrement: dec,
                });
            }
            let f_x = par.objective(&x);
            let r_dx = &par.r_a * &dx;
            let lin = 2.0 * res.dot(&r_dx);
            let quad = r_dx.norm_squared();
            let phi = t * f_x + bval;
            let mut s = 1.0;
            let mut gain = 0.0;
            while s > 1e-20 {
                let cand = &x + &dx * s;
                if let Some(bv) = barrier_value(&par, &cand, eps_eff) {
                    let f_new = f_x + s * lin + s * s * quad;
                    if t * f_new + bv <= phi - ALPHA * s * dec {
                        x = cand;
                        gain = phi - (t * f_new + bv);
                        break;
                    }
                }
                s *= BETA;
            }
            // No step, or progress at the rounding level of the merit value.
            if gain <= 1e-14 * phi.abs().max(1.0) {
                break;
            }
        }
        if n_bar / t <= 0.1 * delta_opt {
            break;
        }
        t *= 10.0;
    }

    let mut objective = par.objective(&x);
    let (mut m, mut k) = par.matrices(&x);
    let mut snapped = false;
    if problem.fixed.is_none() {
        let tol_m = 1e-6 * linalg::symmetric_norm2(&m).max(data_scale);
        let tol_k = 1e-6 * linalg::symmetric_norm2(&k).max(data_scale);
        let ms = snap_to_margin(&m, eps, tol_m);
        let ks = snap_to_margin(&k, eps, tol_k);
        if ms.is_some() || ks.is_some() {
            let m2 = ms.unwrap_or_else(|| m.clone());
            let k2 = ks.unwrap_or_else(|| k.clone());
            let x2 = par.vars(&m2, &k2);
            let f2 = par.objective(&x2);
            if f2 <= objective + delta_opt {
                let (m3, k3) = par.matrices(&x2);
                m = m3;
                k = k3;
                objective = f2;
                snapped = true;
            }
        }
    }
    if f0 < objective {
        let (mi, ki) = par.matrices(&x0);
        m = mi;
        k = ki;
        objective = f0;
        snapped = false;
    }
    Ok(finish(m, k, objective, f0, n_bar / t, iterations, rounds, snapped, warnings))
}

/// Interior operators from the fixed-boundary data (reduced coordinates).
pub fn infer_interior(
    q: &Matrix,
    qdd: &Matrix,
    f: &Matrix,
    margin: f64,
) -> Result<(Matrix, Matrix, SpdLsqDiagnostics)> {
    let problem = SpdLsqProblem::from_snapshots(qdd, q, f, margin)?;
    let sol = solve_spd_lsq(&problem)?;
    Ok((sol.mass, sol.stiffness, sol.diagnostics))
}

/// Global operators with the interior blocks held at the given targets.
pub fn infer_global(
    training: &ReducedTrainingData,
    interior_targets: (&Matrix, &Matrix),
    margin: f64,
) -> Result<(Matrix, Matrix, SpdLsqDiagnostics)> {
    let d = training.dim();
    let r = interior_targets.0.nrows();
    if r == 0 || r >= d {
        return Err(Error::dims("interior target size", format!("1..{d}"), r));
    }
    let problem = SpdLsqProblem::from_snapshots(&training.qdd_hat, &training.q_hat, &training.f_hat, margin)?
        .with_fixed_block(d - r, interior_targets.0.clone(), interior_targets.1.clone())?;
    let sol = solve_spd_lsq(&problem)?;
    Ok((sol.mass, sol.stiffness, sol.diagnostics))
}

/// `V = [[I, 0], [Φ, V_I]]`.
pub fn assemble_basis_matrices(phi: &Matrix, interior_basis: &Matrix) -> Result<Matrix> {
    let (n_i, n_b) = phi.shape();
    if interior_basis.nrows() != n_i {
        return Err(Error::dims("interior basis rows", n_i, interior_basis.nrows()));
    }
    let r = interior_basis.ncols();
    let mut v = Matrix::zeros(n_b + n_i, n_b + r);
    v.view_mut((0, 0), (n_b, n_b)).fill_with_identity();
    v.view_mut((n_b, 0), (n_i, n_b)).copy_from(phi);
    v.view_mut((n_b, n_b), (n_i, r)).copy_from(interior_basis);
    Ok(v)
}

pub fn assemble_basis(coupling: &CouplingMatrix, interior_basis: &PodBasis) -> Result<Matrix> {
    assemble_basis_matrices(coupling.phi(), &interior_basis.basis)
}

/// Where a reduced model came from.
#[derive(Debug, Clone, PartialEq)]
pub struct Provenance {
    /// `intrusive` or `operator-inference`.
    pub source: String,
    pub coupling_method: CouplingMethod,
    pub coupling_residual: f64,
    pub interior_objective: Option<f64>,
    pub global_objective: Option<f64>,
}

impl Provenance {
    pub fn intrusive() -> Self {
        Self {
            source: "intrusive".into(),
            coupling_method: CouplingMethod::Intrusive,
            coupling_residual: 0.0,
            interior_objective: None,
            global_objective: None,
        }
    }
}

/// Reduced operators in the coordinates `q̂ = (q_B, q̂_I)`, lifted by
/// `q = V q̂`. Contact constraints act on `q_B` and are kept separately.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedModel {
    pub m_hat: Matrix,
    pub k_hat: Matrix,
    pub interior_basis: Matrix,
    pub coupling: CouplingMatrix,
    pub global_basis: Matrix,
    pub spd_margin: f64,
    pub provenance: Provenance,
}

impl ReducedModel {
    pub fn n_boundary(&self) -> usize {
        self.coupling.phi().ncols()
    }

    pub fn rank(&self) -> usize {
        self.interior_basis.ncols()
    }

    pub fn dim(&self) -> usize {
        self.m_hat.nrows()
    }

    pub fn lift(&self, q_hat: &Matrix) -> Matrix {
        &self.global_basis * q_hat
    }

    pub fn write_dir(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        mtx::write_matrix_market(dir.join("m_hat.mtx"), &self.m_hat, Symmetry::Symmetric)?;
        mtx::write_matrix_market(dir.join("k_hat.mtx"), &self.k_hat, Symmetry::Symmetric)?;
        mtx::write_matrix_market(dir.join("interior_basis.mtx"), &self.interior_basis, Symmetry::General)?;
        mtx::write_matrix_market(dir.join("global_basis.mtx"), &self.global_basis, Symmetry::General)?;
        self.coupling.write(dir.join("coupling.mtx"))?;
        let p = &self.provenance;
        let mut out = String::new();
        let _ = writeln!(out, "epsilon = {}", mtx::fmt_f64(self.spd_margin));
        let _ = writeln!(out, "source = {}", p.source);
        let _ = writeln!(out, "coupling_method = {}", p.coupling_method);
        let _ = writeln!(out, "coupling_residual = {}", mtx::fmt_f64(p.coupling_residual));
        if let Some(v) = p.interior_objective {
            let _ = writeln!(out, "interior_objective = {}", mtx::fmt_f64(v));
        }
        if let Some(v) = p.global_objective {
            let _ = writeln!(out, "global_objective = {}", mtx::fmt_f64(v));
        }
        let path = dir.join("model.txt");
        fs::write(&path, out).map_err(|e| Error::io(&path, e))
    }

    pub fn read_dir(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let m_hat = mtx::read_matrix_market(dir.join("m_hat.mtx"))?;
        let k_hat = mtx::read_matrix_market(dir.join("k_hat.mtx"))?;
        let interior_basis = mtx::read_matrix_market(dir.join("interior_basis.mtx"))?;
        let global_basis = mtx::read_matrix_market(dir.join("global_basis.mtx"))?;
        let coupling = CouplingMatrix::read(dir.join("coupling.mtx"))?;
        let path = dir.join("model.txt");
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let get = |key: &str| -> Option<String> {
            text.lines().find_map(|l| {
                let (k, v) = l.split_once('=')?;
                (k.trim() == key).then(|| v.trim().to_string())
            })
        };
        let num = |key: &str| -> Result<Option<f64>> {
            get(key)
                .map(|v| v.parse::<f64>().map_err(|_| Error::malformed(&path, format!("bad `{key}`"))))
                .transpose()
        };
        let spd_margin = num("epsilon")?.ok_or_else(|| Error::malformed(&path, "missing `epsilon`"))?;
        let provenance = Provenance {
            source: get("source").unwrap_or_else(|| "unknown".into()),
            coupling_method: coupling.method(),
            coupling_residual: num("coupling_residual")?.unwrap_or(coupling.residual()),
            interior_objective: num("interior_objective")?,
            global_objective: num("global_objective")?,
        };
        let expected = assemble_basis_matrices(coupling.phi(), &interior_basis)?;
        if expected != global_basis {
            return Err(Error::malformed(dir.join("global_basis.mtx"), "not of the form [[I, 0], [Φ, V_I]]"));
        }
        let d = global_basis.ncols();
        if m_hat.shape() != (d, d) || k_hat.shape() != (d, d) {
            return Err(Error::dims("reduced operators", format!("{d}x{d}"), format!("{}x{}", m_hat.nrows(), m_hat.ncols())));
        }
        Ok(Self {
            m_hat,
            k_hat,
            interior_basis,
            coupling,
            global_basis,
            spd_margin,
            provenance,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InferenceSettings {
    pub interior_rank: PodTruncation,
    pub coupling: CouplingMethod,
    /// Rank of the subspace used by the reduced least-squares coupling.
    pub coupling_rank: usize,
    /// `None` derives the margin from the interior training data.
    pub margin: Option<f64>,
}

impl Default for InferenceSettings {
    fn default() -> Self {
        Self {
            interior_rank: PodTruncation::Rank(2),
            coupling: CouplingMethod::StaticModes,
            coupling_rank: 2,
            margin: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct InferenceResult {
    pub model: ReducedModel,
    pub interior_pod: PodBasis,
    /// Interior operators from the fixed-boundary fit; the global fit holds
    /// its trailing block at these.
    pub interior_mass: Matrix,
    pub interior_stiffness: Matrix,
    pub interior_diagnostics: SpdLsqDiagnostics,
    pub global_diagnostics: SpdLsqDiagnostics,
    pub training: ReducedTrainingData,
}

/// The full non-intrusive construction: POD of the fixed-boundary run,
/// interior fit, coupling, projected data, global fit.
///
/// `static_modes` supplies the constrained modes for
/// [`CouplingMethod::StaticModes`]; the fitted methods ignore it.
pub fn infer_reduced_model(
    snapshots: &SnapshotSet,
    settings: &InferenceSettings,
    static_modes: Option<&Matrix>,
) -> Result<InferenceResult> {
    let interior_pod = pod(&snapshots.q1, settings.interior_rank)?;
    let interior = reduce_interior_data(snapshots, &interior_pod)?;
    let margin = match settings.margin {
        Some(e) => e,
        None => default_margin(&interior.qdd_hat, &interior.q_hat, &interior.f_hat)?,
    };
    let (m_ii, k_ii, interior_diagnostics) =
        infer_interior(&interior.q_hat, &interior.qdd_hat, &interior.f_hat, margin)?;

    let coupling = match settings.coupling {
        CouplingMethod::FullLsq => coupling_full_lsq(snapshots)?,
        CouplingMethod::ReducedLsq => coupling_reduced_lsq(snapshots, settings.coupling_rank)?,
        CouplingMethod::StaticModes | CouplingMethod::Intrusive => {
            let modes = static_modes.ok_or_else(|| {
                Error::InvalidParameter("static-modes coupling requires constrained modes".into())
            })?;
            coupling_from_static_modes(modes, snapshots.n_interior(), snapshots.n_boundary())?
        }
    };
    let training = reduce_training_data(snapshots, &interior_pod, &coupling)?;
    let (m_hat, k_hat, global_diagnostics) = infer_global(&training, (&m_ii, &k_ii), margin)?;
    let global_basis = assemble_basis(&coupling, &interior_pod)?;
    let provenance = Provenance {
        source: "operator-inference".into(),
        coupling_method: coupling.method(),
        coupling_residual: coupling.residual(),
        interior_objective: Some(interior_diagnostics.objective),
        global_objective: Some(global_diagnostics.objective),
    };
    let model = ReducedModel {
        m_hat,
        k_hat,
        interior_basis: interior_pod.basis.clone(),
        coupling,
        global_basis,
        spd_margin: margin,
        provenance,
    };
    Ok(InferenceResult {
        model,
        interior_pod,
        interior_mass: m_ii,
        interior_stiffness: k_ii,
        interior_diagnostics,
        global_diagnostics,
        training,
    })
}
