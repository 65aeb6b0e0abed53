//! Approximations of the coupling matrix `Φ_IB` that maps boundary
//! displacements to the quasi-static interior response.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::mtx::{self, Symmetry};
use crate::snapshots::{pod, PodTruncation, SnapshotSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CouplingMethod {
    FullLsq,
    ReducedLsq,
    StaticModes,
    /// Exact `−K_II⁻¹K_IB` from the assembled matrices (reference only).
    Intrusive,
}

impl CouplingMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            CouplingMethod::FullLsq => "full-lsq",
            CouplingMethod::ReducedLsq => "reduced-lsq",
            CouplingMethod::StaticModes => "static-modes",
            CouplingMethod::Intrusive => "intrusive",
        }
    }
}

impl fmt::Display for CouplingMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CouplingMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().replace('_', "-").as_str() {
            "full-lsq" => Ok(CouplingMethod::FullLsq),
            "reduced-lsq" => Ok(CouplingMethod::ReducedLsq),
            "static-modes" => Ok(CouplingMethod::StaticModes),
            "intrusive" => Ok(CouplingMethod::Intrusive),
            other => Err(Error::InvalidParameter(format!(
                "unknown coupling method `{other}` (expected full-lsq, reduced-lsq or static-modes)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CouplingMatrix {
    phi: Matrix,
    method: CouplingMethod,
    residual: f64,
    underdetermined: bool,
}

impl CouplingMatrix {
    pub fn new(phi: Matrix, method: CouplingMethod, residual: f64) -> Result<Self> {
        if phi.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("coupling matrix has non-finite entries".into()));
        }
        if !(residual >= 0.0) {
            return Err(Error::InvalidParameter(format!("residual must be nonnegative, got {residual}")));
        }
        Ok(Self {
            phi,
            method,
            residual,
            underdetermined: false,
        })
    }

    pub fn phi(&self) -> &Matrix {
        &self.phi
    }

    pub fn method(&self) -> CouplingMethod {
        self.method
    }

    /// Frobenius norm of `(Q_I − Q1) − Φ Q_B` for the fitted methods.
    pub fn residual(&self) -> f64 {
        self.residual
    }

    /// True when the boundary snapshots had rank below `n_B`, so the
    /// minimum-norm solution was returned.
    pub fn underdetermined(&self) -> bool {
        self.underdetermined
    }

    /// Writes `path` (Matrix Market) and a sidecar `<path>.txt` line.
    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        mtx::write_matrix_market(path, &self.phi, Symmetry::General)?;
        let side = sidecar(path);
        let line = format!(
            "method = {} residual = {} underdetermined = {}\n",
            self.method,
            mtx::fmt_f64(self.residual),
            self.underdetermined
        );
        fs::write(&side, line).map_err(|e| Error::io(&side, e))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let phi = mtx::read_matrix_market(path)?;
        let side = sidecar(path);
        let text = fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
        let tokens: Vec<&str> = text.split_whitespace().collect();
        let value = |key: &str| -> Result<&str> {
            tokens
                .windows(3)
                .find(|w| w[0] == key && w[1] == "=")
                .map(|w| w[2])
                .ok_or_else(|| Error::malformed(&side, format!("missing `{key}`")))
        };
        let method: CouplingMethod = value("method")?.parse()?;
        let residual: f64 = value("residual")?
            .parse()
            .map_err(|_| Error::malformed(&side, "bad residual"))?;
        let underdetermined = value("underdetermined").map(|v| v == "true").unwrap_or(false);
        let mut c = CouplingMatrix::new(phi, method, residual)?;
        c.underdetermined = underdetermined;
        Ok(c)
    }
}

fn sidecar(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".txt");
    PathBuf::from(s)
}

/// Minimum-norm `X` with `X Q_B ≈ target`, plus the rank of `Q_B`.
fn fit_right(target: &Matrix, q_b: &Matrix) -> Result<(Matrix, usize)> {
    let (xt, rank) = linalg::lstsq_min_norm(&q_b.transpose(), &target.transpose())?;
    Ok((xt.transpose(), rank))
}

/// `Φ = argmin ‖(Q_I − Q1) − Φ Q_B‖_F`.
pub fn coupling_full_lsq(snapshots: &SnapshotSet) -> Result<CouplingMatrix> {
    let target = &snapshots.q_i - &snapshots.q1;
    let (phi, rank) = fit_right(&target, &snapshots.q_b)?;
    let residual = (&target - &phi * &snapshots.q_b).norm();
    let mut c = CouplingMatrix::new(phi, CouplingMethod::FullLsq, residual)?;
    c.underdetermined = rank < snapshots.n_boundary();
    Ok(c)
}

/// Fit restricted to the span of the first `r2` POD modes of `Q_I`:
/// `Φ = V2 Φ̃` with `Φ̃ = argmin ‖V2ᵀ(Q_I − Q1) − Φ̃ Q_B‖_F`.
pub fn coupling_reduced_lsq(snapshots: &SnapshotSet, r2: usize) -> Result<CouplingMatrix> {
    let v2 = pod(&snapshots.q_i, PodTruncation::Rank(r2))?.basis;
    let target = &snapshots.q_i - &snapshots.q1;
    let (phi_tilde, rank) = fit_right(&(v2.transpose() * &target), &snapshots.q_b)?;
    let phi = v2 * phi_tilde;
    let residual = (&target - &phi * &snapshots.q_b).norm();
    let mut c = CouplingMatrix::new(phi, CouplingMethod::ReducedLsq, residual)?;
    c.underdetermined = rank < snapshots.n_boundary();
    Ok(c)
}

/// Coupling taken directly from constrained modes (residual 0).
pub fn coupling_from_static_modes(modes: &Matrix, n_interior: usize, n_boundary: usize) -> Result<CouplingMatrix> {
    if modes.shape() != (n_interior, n_boundary) {
        return Err(Error::dims(
            "static modes",
            format!("{n_interior}x{n_boundary}"),
            format!("{}x{}", modes.nrows(), modes.ncols()),
        ));
    }
    CouplingMatrix::new(modes.clone(), CouplingMethod::StaticModes, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn manufactured(phi: &Matrix, k: usize) -> SnapshotSet {
        let n_i = phi.nrows();
        let n_b = phi.ncols();
        let q_b = Matrix::from_fn(n_b, k, |i, j| ((i + 1) as f64 * 0.37 * j as f64).sin() + 0.1 * i as f64);
        let q1 = Matrix::from_fn(n_i, k, |i, j| ((i + 2) as f64 * 0.11 * j as f64).cos());
        let q_i = phi * &q_b + &q1;
        let zeros_b = Matrix::zeros(n_b, k);
        let zeros_i = Matrix::zeros(n_i, k);
        SnapshotSet {
            q_b,
            q_i,
            f_b: zeros_b,
            f_i: zeros_i.clone(),
            q1,
            f1_i: zeros_i,
            h: 0.1,
        }
    }

    #[test]
    fn recovers_manufactured_coupling() {
        let phi = Matrix::from_row_slice(3, 2, &[0.5, -0.25, 1.0, 2.0, -0.3, 0.7]);
        let set = manufactured(&phi, 40);
        let c = coupling_full_lsq(&set).unwrap();
        assert!(linalg::relative_frobenius(c.phi(), &phi) < 1e-10);
        assert!(c.residual() <= 1e-10 * set.q_i.norm());
        assert!(!c.underdetermined());
    }

    #[test]
    fn zero_target_gives_zero_coupling() {
        let phi = Matrix::zeros(3, 2);
        let set = manufactured(&phi, 20);
        assert!(coupling_full_lsq(&set).unwrap().phi().amax() < 1e-14);
    }

    #[test]
    fn reduced_at_full_rank_matches_full() {
        let phi = Matrix::from_row_slice(3, 1, &[0.5, 1.0, -0.3]);
        let set = manufactured(&phi, 30);
        let full = coupling_full_lsq(&set).unwrap();
        let red = coupling_reduced_lsq(&set, 3).unwrap();
        assert!(linalg::relative_frobenius(red.phi(), full.phi()) < 1e-10);
        let red1 = coupling_reduced_lsq(&set, 1).unwrap();
        assert!(red1.residual() >= full.residual());
    }

    #[test]
    fn underdetermined_flag() {
        let phi = Matrix::from_row_slice(2, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        let set = manufactured(&phi, 2);
        assert!(coupling_full_lsq(&set).unwrap().underdetermined());
    }

    #[test]
    fn static_modes_dimension_check_and_persistence() {
        let modes = Matrix::from_row_slice(2, 1, &[2.0 / 3.0, 1.0 / 3.0]);
        assert!(coupling_from_static_modes(&modes, 3, 1).is_err());
        let c = coupling_from_static_modes(&modes, 2, 1).unwrap();
        assert_eq!(c.residual(), 0.0);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("coupling.mtx");
        c.write(&p).unwrap();
        assert_eq!(CouplingMatrix::read(&p).unwrap(), c);
        assert!("bogus".parse::<CouplingMethod>().is_err());
        assert_eq!("static_modes".parse::<CouplingMethod>().unwrap(), CouplingMethod::StaticModes);
    }
}
