//! Relative error curves and contact-quality diagnostics.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};
use crate::model::ContactConstraints;
use crate::mtx::fmt_f64;
use crate::timestep::Trajectory;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Displacement,
    Multiplier,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormConvention {
    /// `‖e(t)‖² / max_t ‖q(t)‖²`.
    Squared,
    /// `‖e(t)‖ / max_t ‖q(t)‖`.
    Unsquared,
}

/// Which state rows enter the displacement error.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowSelection {
    All,
    /// The first `n_B` rows.
    Boundary(usize),
    /// Everything after the first `n_B` rows.
    Interior(usize),
}

impl RowSelection {
    fn range(self, n: usize) -> Result<(usize, usize)> {
        match self {
            RowSelection::All => Ok((0, n)),
            RowSelection::Boundary(nb) if nb <= n => Ok((0, nb)),
            RowSelection::Interior(nb) if nb <= n => Ok((nb, n - nb)),
            _ => Err(Error::InvalidParameter(format!("row selection {self:?} exceeds {n} rows"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorCurve {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub kind: ErrorKind,
    pub convention: NormConvention,
}

impl ErrorCurve {
    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    pub fn mean(&self) -> f64 {
        if self.values.is_empty() {
            return 0.0;
        }
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("t,eps\n");
        for (t, v) in self.times.iter().zip(&self.values) {
            let _ = writeln!(out, "{},{}", fmt_f64(*t), fmt_f64(*v));
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_csv_string()).map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: impl AsRef<Path>, kind: ErrorKind, convention: NormConvention) -> Result<Self> {
        let path = path.as_ref();
        let mut reader = csv::Reader::from_path(path).map_err(|e| Error::Csv { path: path.into(), source: e })?;
        let mut times = Vec::new();
        let mut values = Vec::new();
        for record in reader.records() {
            let record = record.map_err(|e| Error::Csv { path: path.into(), source: e })?;
            let parse = |i: usize| -> Result<f64> {
                record
                    .get(i)
                    .and_then(|s| s.trim().parse().ok())
                    .ok_or_else(|| Error::malformed(path, "expected `t,eps` rows"))
            };
            times.push(parse(0)?);
            values.push(parse(1)?);
        }
        Ok(Self {
            times,
            values,
            kind,
            convention,
        })
    }
}

fn curve(reference: &Matrix, approx: &Matrix, times: Vec<f64>, kind: ErrorKind, convention: NormConvention) -> Result<ErrorCurve> {
    let denom = reference
        .column_iter()
        .map(|c| c.norm_squared())
        .fold(0.0, f64::max);
    if denom == 0.0 {
        return Err(Error::InvalidParameter(format!(
            "reference {} trajectory is identically zero",
            match kind {
                ErrorKind::Displacement => "displacement",
                ErrorKind::Multiplier => "multiplier",
            }
        )));
    }
    let values = reference
        .column_iter()
        .zip(approx.column_iter())
        .map(|(r, a)| {
            let e = (r - a).norm_squared() / denom;
            match convention {
                NormConvention::Squared => e,
                NormConvention::Unsquared => e.sqrt(),
            }
        })
        .collect();
    Ok(ErrorCurve {
        times,
        values,
        kind,
        convention,
    })
}

/// Displacement error over the selected rows and, when both trajectories
/// carry them, the multiplier error.
pub fn relative_error_curves(
    reference: &Trajectory,
    approx: &Trajectory,
    rows: RowSelection,
    convention: NormConvention,
) -> Result<(ErrorCurve, Option<ErrorCurve>)> {
    if reference.states.shape() != approx.states.shape() {
        return Err(Error::dims(
            "trajectories",
            format!("{}x{}", reference.dim(), reference.len()),
            format!("{}x{}", approx.dim(), approx.len()),
        ));
    }
    if (reference.h - approx.h).abs() > 1e-12 * reference.h || reference.t0 != approx.t0 {
        return Err(Error::InvalidParameter("trajectories use different time grids".into()));
    }
    let (start, count) = rows.range(reference.dim())?;
    let q = curve(
        &reference.states.rows(start, count).into_owned(),
        &approx.states.rows(start, count).into_owned(),
        reference.times(),
        ErrorKind::Displacement,
        convention,
    )?;
    let lambda = match (&reference.multipliers, &approx.multipliers) {
        (Some(a), Some(b)) => {
            if a.shape() != b.shape() {
                return Err(Error::dims("multipliers", a.nrows(), b.nrows()));
            }
            Some(curve(a, b, reference.times(), ErrorKind::Multiplier, convention)?)
        }
        _ => None,
    };
    Ok((q, lambda))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContactReport {
    /// Largest `−(C_B q_B + b)` (0 when no penetration).
    pub max_gap_violation: f64,
    /// Largest `−λ` (0 when all multipliers are nonnegative).
    pub max_negative_multiplier: f64,
    /// Largest `|λᵀ gap| / (‖λ‖∞ ‖b‖∞)`.
    pub max_complementarity: f64,
    /// Steps where some multiplier becomes positive after a step without contact.
    pub contact_onsets: Vec<usize>,
    /// Steps where all multipliers return to zero.
    pub contact_releases: Vec<usize>,
}

impl ContactReport {
    pub fn to_report(&self) -> String {
        let list = |v: &[usize]| v.iter().map(usize::to_string).collect::<Vec<_>>().join(" ");
        let mut out = String::new();
        let _ = writeln!(out, "max_gap_violation = {:e}", self.max_gap_violation);
        let _ = writeln!(out, "max_negative_multiplier = {:e}", self.max_negative_multiplier);
        let _ = writeln!(out, "max_complementarity = {:e}", self.max_complementarity);
        let _ = writeln!(out, "contact_onsets = {}", list(&self.contact_onsets));
        let _ = writeln!(out, "contact_releases = {}", list(&self.contact_releases));
        out
    }

    /// True when every check is within the given tolerances.
    pub fn passes(&self, gap_tol: f64, complementarity_tol: f64) -> bool {
        self.max_gap_violation <= gap_tol
            && self.max_negative_multiplier == 0.0
            && self.max_complementarity <= complementarity_tol
    }
}

/// Recomputes gaps from the stored states (boundary rows first) and checks
/// the complementarity conditions at every step.
pub fn contact_diagnostics(trajectory: &Trajectory, constraints: &ContactConstraints) -> Result<ContactReport> {
    let lambda = trajectory
        .multipliers
        .as_ref()
        .ok_or_else(|| Error::InvalidParameter("trajectory carries no multipliers".into()))?;
    let n_b = constraints.n_boundary();
    if trajectory.dim() < n_b || lambda.nrows() != constraints.count() {
        return Err(Error::dims("contact trajectory", constraints.count(), lambda.nrows()));
    }
    let mut report = ContactReport {
        max_gap_violation: 0.0,
        max_negative_multiplier: 0.0,
        max_complementarity: 0.0,
        contact_onsets: Vec::new(),
        contact_releases: Vec::new(),
    };
    let gap_scale = constraints.offsets().amax();
    let mut in_contact = false;
    for i in 0..trajectory.len() {
        let q_b: Vector = trajectory.states.column(i).rows(0, n_b).into_owned();
        let gap = constraints.gap(&q_b);
        let l: Vector = lambda.column(i).into_owned();
        report.max_gap_violation = report.max_gap_violation.max(gap.iter().fold(0.0_f64, |a, &g| if -g > a { -g } else { a }));
        report.max_negative_multiplier =
            report.max_negative_multiplier.max(l.iter().fold(0.0_f64, |a, &v| if -v > a { -v } else { a }));
        let lmax = l.amax();
        if lmax > 0.0 && gap_scale > 0.0 {
            report.max_complementarity = report.max_complementarity.max(l.dot(&gap).abs() / (lmax * gap_scale));
        }
        let active = l.iter().any(|&v| v > 0.0);
        if active && !in_contact {
            report.contact_onsets.push(i);
        }
        if !active && in_contact {
            report.contact_releases.push(i);
        }
        in_contact = active;
    }
    Ok(report)
}

/// Largest distance between matched events of two sorted step lists; `None`
/// when the lists differ in length.
pub fn event_timing_difference(a: &[usize], b: &[usize]) -> Option<usize> {
    if a.len() != b.len() {
        return None;
    }
    Some(a.iter().zip(b).map(|(x, y)| x.abs_diff(*y)).max().unwrap_or(0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn traj(states: Matrix, lambda: Option<Matrix>) -> Trajectory {
        let f = Matrix::zeros(states.nrows(), states.ncols());
        Trajectory { t0: 0.0, h: 0.1, states, forces: f, multipliers: lambda }
    }

    #[test]
    fn identical_and_zero_approximations() {
        let q = Matrix::from_fn(2, 5, |i, j| (i + j) as f64);
        let a = traj(q.clone(), None);
        let (c, l) = relative_error_curves(&a, &a, RowSelection::All, NormConvention::Squared).unwrap();
        assert!(c.values.iter().all(|&v| v == 0.0));
        assert!(l.is_none());
        let z = traj(Matrix::zeros(2, 5), None);
        let (c, _) = relative_error_curves(&a, &z, RowSelection::All, NormConvention::Squared).unwrap();
        assert_eq!(c.max(), 1.0);
        assert!((c.values[2] - (4.0 + 9.0) / (16.0 + 25.0)).abs() < 1e-15);
        assert!(relative_error_curves(&z, &a, RowSelection::All, NormConvention::Squared).is_err());
    }

    #[test]
    fn row_selection_and_unsquared() {
        let r = traj(Matrix::from_row_slice(2, 3, &[1.0, 2.0, 1.0, 4.0, 4.0, 4.0]), None);
        let a = traj(Matrix::from_row_slice(2, 3, &[1.0, 1.0, 1.0, 4.0, 4.0, 2.0]), None);
        let (b, _) = relative_error_curves(&r, &a, RowSelection::Boundary(1), NormConvention::Squared).unwrap();
        assert_eq!(b.values, vec![0.0, 0.25, 0.0]);
        let (i, _) = relative_error_curves(&r, &a, RowSelection::Interior(1), NormConvention::Unsquared).unwrap();
        assert_eq!(i.values, vec![0.0, 0.0, 0.5]);
    }

    #[test]
    fn flags_negative_multiplier_and_events() {
        let c = ContactConstraints::identity(Vector::from_element(1, 1.0)).unwrap();
        let states = Matrix::from_row_slice(1, 5, &[0.0, -0.5, -1.0, -1.0, -0.2]);
        let lambda = Matrix::from_row_slice(1, 5, &[0.0, 0.0, 2.0, 1.0, 0.0]);
        let rep = contact_diagnostics(&traj(states.clone(), Some(lambda)), &c).unwrap();
        assert_eq!(rep.contact_onsets, vec![2]);
        assert_eq!(rep.contact_releases, vec![4]);
        assert!(rep.passes(1e-9, 1e-8));
        let bad = Matrix::from_row_slice(1, 5, &[0.0, 0.0, -1.0, 0.0, 0.0]);
        let rep = contact_diagnostics(&traj(states, Some(bad)), &c).unwrap();
        assert_eq!(rep.max_negative_multiplier, 1.0);
        assert!(!rep.passes(1e-9, 1e-8));
    }

    #[test]
    fn timing_difference() {
        assert_eq!(event_timing_difference(&[3, 10], &[4, 8]), Some(2));
        assert_eq!(event_timing_difference(&[3], &[4, 8]), None);
    }
}
