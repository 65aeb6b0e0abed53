//! Snapshot matrices from the two training runs, second-derivative
//! snapshots, POD bases and the projected training data.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::coupling::CouplingMatrix;
use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::mtx::fmt_f64;
use crate::timestep::Trajectory;

/// Training data of the contact-free run (split at `n_B`) and of the run
/// with the boundary held fixed.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotSet {
    pub q_b: Matrix,
    pub q_i: Matrix,
    pub f_b: Matrix,
    pub f_i: Matrix,
    /// Interior states of the fixed-boundary run.
    pub q1: Matrix,
    /// Interior loads of the fixed-boundary run; identical to `f_i`.
    pub f1_i: Matrix,
    pub h: f64,
}

impl SnapshotSet {
    pub fn n_boundary(&self) -> usize {
        self.q_b.nrows()
    }

    pub fn n_interior(&self) -> usize {
        self.q_i.nrows()
    }

    pub fn len(&self) -> usize {
        self.q_b.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.q_b.ncols() == 0
    }

    fn header(&self) -> SnapshotHeader {
        SnapshotHeader {
            h: self.h,
            k: self.len(),
            n_b: self.n_boundary(),
            n_i: self.n_interior(),
        }
    }

    /// Writes one CSV per matrix into `dir`.
    pub fn write_dir(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let header = self.header();
        for (name, m) in self.named() {
            write_snapshot_csv(dir.join(format!("{name}.csv")), m, &header)?;
        }
        Ok(())
    }

    pub fn read_dir(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let mut mats = Vec::new();
        let mut header: Option<SnapshotHeader> = None;
        for name in SNAPSHOT_NAMES {
            let (m, hd) = read_snapshot_csv(dir.join(format!("{name}.csv")))?;
            if let Some(prev) = &header {
                if prev != &hd {
                    return Err(Error::SnapshotMismatch(format!("header of {name}.csv differs")));
                }
            }
            header = Some(hd);
            mats.push(m);
        }
        let header = header.expect("at least one snapshot file");
        let mut it = mats.into_iter();
        let mut next = || it.next().expect("six snapshot matrices");
        let set = SnapshotSet {
            q_b: next(),
            q_i: next(),
            f_b: next(),
            f_i: next(),
            q1: next(),
            f1_i: next(),
            h: header.h,
        };
        set.validate()?;
        Ok(set)
    }

    fn named(&self) -> [(&'static str, &Matrix); 6] {
        [
            (SNAPSHOT_NAMES[0], &self.q_b),
            (SNAPSHOT_NAMES[1], &self.q_i),
            (SNAPSHOT_NAMES[2], &self.f_b),
            (SNAPSHOT_NAMES[3], &self.f_i),
            (SNAPSHOT_NAMES[4], &self.q1),
            (SNAPSHOT_NAMES[5], &self.f1_i),
        ]
    }

    fn validate(&self) -> Result<()> {
        let k = self.len();
        let n_b = self.n_boundary();
        let n_i = self.n_interior();
        let shapes = [
            (&self.f_b, n_b),
            (&self.f_i, n_i),
            (&self.q1, n_i),
            (&self.f1_i, n_i),
        ];
        for (m, rows) in shapes {
            if m.shape() != (rows, k) {
                return Err(Error::SnapshotMismatch(format!(
                    "expected {rows}x{k} snapshot matrix, found {}x{}",
                    m.nrows(),
                    m.ncols()
                )));
            }
        }
        if self.f_i != self.f1_i {
            return Err(Error::SnapshotMismatch(
                "interior loads of the two training runs differ".into(),
            ));
        }
        Ok(())
    }
}

const SNAPSHOT_NAMES: [&str; 6] = ["q_b", "q_i", "f_b", "f_i", "q1", "f1_i"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct SnapshotHeader {
    h: f64,
    k: usize,
    n_b: usize,
    n_i: usize,
}

/// CSV with one row per DOF and one column per time step, preceded by a
/// `# {...}` JSON comment line.
fn write_snapshot_csv(path: impl AsRef<Path>, m: &Matrix, header: &SnapshotHeader) -> Result<()> {
    let path = path.as_ref();
    let json = serde_json::to_string(header).expect("header serializes");
    let mut out = format!("# {json}\n");
    for row in m.row_iter() {
        let line: Vec<String> = row.iter().map(|v| fmt_f64(*v)).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

fn read_snapshot_csv(path: impl AsRef<Path>) -> Result<(Matrix, SnapshotHeader)> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let first = text.lines().next().unwrap_or_default();
    let json = first
        .strip_prefix('#')
        .ok_or_else(|| Error::malformed(path, "missing `# {...}` header line"))?;
    let header: SnapshotHeader = serde_json::from_str(json.trim())
        .map_err(|e| Error::malformed(path, format!("bad header: {e}")))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Csv { path: path.into(), source: e })?;
        let row = record
            .iter()
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::malformed(path, format!("bad number `{s}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        if row.len() != header.k {
            return Err(Error::malformed(path, format!("expected {} columns, found {}", header.k, row.len())));
        }
        rows.push(row);
    }
    let m = Matrix::from_fn(rows.len(), header.k, |i, j| rows[i][j]);
    Ok((m, header))
}

/// Splits the training trajectories into snapshot matrices.
pub fn collect(free_run: &Trajectory, fixed_run: &Trajectory, n_boundary: usize) -> Result<SnapshotSet> {
    let n = free_run.dim();
    if n_boundary == 0 || n_boundary >= n {
        return Err(Error::InvalidParameter(format!("n_B = {n_boundary} invalid for {n} DOFs")));
    }
    let n_i = n - n_boundary;
    if fixed_run.dim() != n_i {
        return Err(Error::SnapshotMismatch(format!(
            "fixed-boundary run has {} DOFs, expected {n_i}",
            fixed_run.dim()
        )));
    }
    if free_run.len() != fixed_run.len() {
        return Err(Error::SnapshotMismatch(format!(
            "runs have {} and {} time steps",
            free_run.len(),
            fixed_run.len()
        )));
    }
    if (free_run.h - fixed_run.h).abs() > 1e-12 * free_run.h || free_run.t0 != fixed_run.t0 {
        return Err(Error::SnapshotMismatch("runs use different time grids".into()));
    }
    let set = SnapshotSet {
        q_b: free_run.state_rows(0, n_boundary),
        q_i: free_run.state_rows(n_boundary, n_i),
        f_b: free_run.forces.rows(0, n_boundary).into_owned(),
        f_i: free_run.forces.rows(n_boundary, n_i).into_owned(),
        q1: fixed_run.states.clone(),
        f1_i: fixed_run.forces.clone(),
        h: free_run.h,
    };
    set.validate()?;
    Ok(set)
}

/// Central differences `(q_{j+1} − 2q_j + q_{j−1})/h²` for the interior
/// columns `1..k−1`; the result has `k − 2` columns.
pub fn second_derivatives(states: &Matrix, h: f64) -> Result<Matrix> {
    let k = states.ncols();
    if k < 3 {
        return Err(Error::InvalidParameter(format!("need at least 3 samples, got {k}")));
    }
    if !(h > 0.0) {
        return Err(Error::InvalidParameter(format!("time step must be positive, got {h}")));
    }
    let inv = 1.0 / (h * h);
    Ok(Matrix::from_fn(states.nrows(), k - 2, |i, j| {
        (states[(i, j + 2)] - 2.0 * states[(i, j + 1)] + states[(i, j)]) * inv
    }))
}

/// Columns `1..k−1`, matching the output of [`second_derivatives`].
pub fn trim(m: &Matrix) -> Matrix {
    m.columns(1, m.ncols().saturating_sub(2)).into_owned()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PodTruncation {
    Rank(usize),
    /// Smallest `r` with `σ_{r+1}/σ₁ ≤ τ`.
    Tolerance(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PodBasis {
    pub basis: Matrix,
    /// All singular values of the data, nonincreasing.
    pub singular_values: Vec<f64>,
}

impl PodBasis {
    pub fn rank(&self) -> usize {
        self.basis.ncols()
    }
}

/// Truncated left singular vectors with sign-fixed columns.
pub fn pod(data: &Matrix, truncation: PodTruncation) -> Result<PodBasis> {
    if data.is_empty() || data.iter().all(|&v| v == 0.0) {
        return Err(Error::InvalidParameter("POD of all-zero data".into()));
    }
    let svd = data.clone().svd(true, false);
    let u = svd.u.expect("requested U");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let sv: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
    let effective = linalg::numerical_rank(&sv, data.nrows(), data.ncols());
    let r = match truncation {
        PodTruncation::Rank(r) => {
            if r == 0 {
                return Err(Error::InvalidParameter("POD rank must be at least 1".into()));
            }
            if r > effective {
                return Err(Error::RankExceeded { requested: r, effective });
            }
            r
        }
        PodTruncation::Tolerance(tau) => {
            if !(tau > 0.0) {
                return Err(Error::InvalidParameter(format!("POD tolerance must be positive, got {tau}")));
            }
            let s1 = sv[0];
            (1..=sv.len()).find(|&r| sv.get(r).map_or(true, |s| s / s1 <= tau)).unwrap_or(sv.len())
        }
    };
    let mut basis = Matrix::zeros(data.nrows(), r);
    for (dst, &src) in order.iter().take(r).enumerate() {
        basis.set_column(dst, &u.column(src));
    }
    linalg::fix_column_signs(&mut basis);
    Ok(PodBasis { basis, singular_values: sv })
}

/// Projected, trimmed training data `(Q̂, Q̈̂, F̂)` sharing `k − 2` columns.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedTrainingData {
    pub q_hat: Matrix,
    pub qdd_hat: Matrix,
    pub f_hat: Matrix,
    pub h: f64,
}

impl ReducedTrainingData {
    /// Trims the states and loads and differentiates the states.
    pub fn from_untrimmed(q: &Matrix, f: &Matrix, h: f64) -> Result<Self> {
        if q.shape() != f.shape() {
            return Err(Error::dims(
                "reduced loads",
                format!("{}x{}", q.nrows(), q.ncols()),
                format!("{}x{}", f.nrows(), f.ncols()),
            ));
        }
        Ok(Self {
            qdd_hat: second_derivatives(q, h)?,
            q_hat: trim(q),
            f_hat: trim(f),
            h,
        })
    }

    pub fn dim(&self) -> usize {
        self.q_hat.nrows()
    }
}

/// `Q̂ = [Q_B; V_Iᵀ Q1]`, `F̂ = [F_B + Φᵀ F_I; V_Iᵀ F_I]`, trimmed together
/// with `Q̈̂`.
pub fn reduce_training_data(
    snapshots: &SnapshotSet,
    interior_basis: &PodBasis,
    coupling: &CouplingMatrix,
) -> Result<ReducedTrainingData> {
    let n_b = snapshots.n_boundary();
    let n_i = snapshots.n_interior();
    let v_i = &interior_basis.basis;
    if v_i.nrows() != n_i {
        return Err(Error::dims("interior basis rows", n_i, v_i.nrows()));
    }
    if coupling.phi().shape() != (n_i, n_b) {
        return Err(Error::dims(
            "coupling matrix",
            format!("{n_i}x{n_b}"),
            format!("{}x{}", coupling.phi().nrows(), coupling.phi().ncols()),
        ));
    }
    let r = v_i.ncols();
    let k = snapshots.len();
    let mut q = Matrix::zeros(n_b + r, k);
    q.rows_mut(0, n_b).copy_from(&snapshots.q_b);
    q.rows_mut(n_b, r).copy_from(&(v_i.transpose() * &snapshots.q1));
    let mut f = Matrix::zeros(n_b + r, k);
    f.rows_mut(0, n_b)
        .copy_from(&(&snapshots.f_b + coupling.phi().transpose() * &snapshots.f_i));
    f.rows_mut(n_b, r).copy_from(&(v_i.transpose() * &snapshots.f_i));
    ReducedTrainingData::from_untrimmed(&q, &f, snapshots.h)
}

/// Projected fixed-boundary data `(V_Iᵀ Q1, V_Iᵀ F1_I)` for the interior fit.
pub fn reduce_interior_data(snapshots: &SnapshotSet, interior_basis: &PodBasis) -> Result<ReducedTrainingData> {
    let v_i = &interior_basis.basis;
    if v_i.nrows() != snapshots.n_interior() {
        return Err(Error::dims("interior basis rows", snapshots.n_interior(), v_i.nrows()));
    }
    let q = v_i.transpose() * &snapshots.q1;
    let f = v_i.transpose() * &snapshots.f1_i;
    ReducedTrainingData::from_untrimmed(&q, &f, snapshots.h)
}
