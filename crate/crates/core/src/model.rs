//! Full-order structural models: partitioned mass/stiffness pairs, contact
//! constraints, load signals, the built-in test structures and the intrusive
//! Craig-Bampton reduction used as a reference.

use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use nalgebra::LU;

use crate::coupling::{CouplingMatrix, CouplingMethod};
use crate::error::{Error, Result};
use crate::linalg::{self, Matrix, Vector};
use crate::mtx::{self, Symmetry};
use crate::opinf::{Provenance, ReducedModel};

/// Relative asymmetry tolerated for a constructed system.
pub const SYMMETRY_TOL: f64 = 1e-12;
/// Relative asymmetry that `load_system` repairs by averaging.
pub const LOAD_SYMMETRIZE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DofKind {
    /// Translation of a lumped mass along the chain axis.
    Displacement,
    /// Transverse beam deflection.
    Deflection,
    /// Beam cross-section rotation.
    Rotation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DofLabel {
    pub node: usize,
    pub kind: DofKind,
}

impl fmt::Display for DofLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let k = match self.kind {
            DofKind::Displacement => "u",
            DofKind::Deflection => "w",
            DofKind::Rotation => "theta",
        };
        write!(f, "{k}{}", self.node)
    }
}

/// Symmetric positive-definite mass/stiffness pair in boundary-first order.
#[derive(Debug, Clone)]
pub struct PartitionedSystem {
    mass: Matrix,
    stiffness: Matrix,
    n_boundary: usize,
    dof_labels: Vec<DofLabel>,
}

impl PartitionedSystem {
    pub fn new(
        mass: Matrix,
        stiffness: Matrix,
        n_boundary: usize,
        dof_labels: Vec<DofLabel>,
    ) -> Result<Self> {
        let n = mass.nrows();
        if mass.ncols() != n {
            return Err(Error::dims("mass matrix", format!("{n}x{n}"), format!("{}x{}", n, mass.ncols())));
        }
        if stiffness.shape() != (n, n) {
            return Err(Error::dims(
                "stiffness matrix",
                format!("{n}x{n}"),
                format!("{}x{}", stiffness.nrows(), stiffness.ncols()),
            ));
        }
        if dof_labels.len() != n {
            return Err(Error::dims("DOF labels", n, dof_labels.len()));
        }
        if n_boundary == 0 {
            return Err(Error::InvalidParameter("at least one boundary DOF is required".into()));
        }
        if n_boundary >= n {
            return Err(Error::InvalidParameter(format!(
                "at least one interior DOF is required (n = {n}, n_B = {n_boundary})"
            )));
        }
        if n_boundary > n - n_boundary {
            return Err(Error::InvalidParameter(format!(
                "contact zone larger than interior (n_B = {n_boundary}, n_I = {})",
                n - n_boundary
            )));
        }
        linalg::check_spd(&mass, "mass", SYMMETRY_TOL)?;
        linalg::check_spd(&stiffness, "stiffness", SYMMETRY_TOL)?;
        Ok(Self {
            mass,
            stiffness,
            n_boundary,
            dof_labels,
        })
    }

    pub fn mass(&self) -> &Matrix {
        &self.mass
    }

    pub fn stiffness(&self) -> &Matrix {
        &self.stiffness
    }

    pub fn n(&self) -> usize {
        self.mass.nrows()
    }

    pub fn n_boundary(&self) -> usize {
        self.n_boundary
    }

    pub fn n_interior(&self) -> usize {
        self.n() - self.n_boundary
    }

    pub fn dof_labels(&self) -> &[DofLabel] {
        &self.dof_labels
    }

    /// Position of a labelled DOF in boundary-first order.
    pub fn dof_index(&self, label: DofLabel) -> Option<usize> {
        self.dof_labels.iter().position(|&l| l == label)
    }

    fn block(a: &Matrix, rows: (usize, usize), cols: (usize, usize)) -> Matrix {
        a.view((rows.0, cols.0), (rows.1, cols.1)).into_owned()
    }

    fn ranges(&self) -> ((usize, usize), (usize, usize)) {
        ((0, self.n_boundary), (self.n_boundary, self.n_interior()))
    }

    pub fn m_bb(&self) -> Matrix {
        let (b, _) = self.ranges();
        Self::block(&self.mass, b, b)
    }
    pub fn m_bi(&self) -> Matrix {
        let (b, i) = self.ranges();
        Self::block(&self.mass, b, i)
    }
    pub fn m_ib(&self) -> Matrix {
        let (b, i) = self.ranges();
        Self::block(&self.mass, i, b)
    }
    pub fn m_ii(&self) -> Matrix {
        let (_, i) = self.ranges();
        Self::block(&self.mass, i, i)
    }
    pub fn k_bb(&self) -> Matrix {
        let (b, _) = self.ranges();
        Self::block(&self.stiffness, b, b)
    }
    pub fn k_bi(&self) -> Matrix {
        let (b, i) = self.ranges();
        Self::block(&self.stiffness, b, i)
    }
    pub fn k_ib(&self) -> Matrix {
        let (b, i) = self.ranges();
        Self::block(&self.stiffness, i, b)
    }
    pub fn k_ii(&self) -> Matrix {
        let (_, i) = self.ranges();
        Self::block(&self.stiffness, i, i)
    }
}

/// Node-to-node non-penetration: `gap = C_B q_B + b ≥ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct ContactConstraints {
    c_matrix: Matrix,
    offsets: Vector,
}

impl ContactConstraints {
    pub fn new(c_matrix: Matrix, offsets: Vector) -> Result<Self> {
        if c_matrix.nrows() == 0 {
            return Err(Error::InvalidParameter("no contact constraints".into()));
        }
        if offsets.len() != c_matrix.nrows() {
            return Err(Error::dims("contact offsets", c_matrix.nrows(), offsets.len()));
        }
        for (i, row) in c_matrix.row_iter().enumerate() {
            let nonzero: Vec<f64> = row.iter().copied().filter(|&v| v != 0.0).collect();
            if nonzero.len() != 1 || nonzero[0].abs() != 1.0 {
                return Err(Error::InvalidParameter(format!(
                    "constraint row {i} must hold exactly one entry equal to ±1"
                )));
            }
        }
        if let Some((i, b)) = offsets.iter().enumerate().find(|(_, b)| !(**b >= 0.0)) {
            return Err(Error::InvalidParameter(format!(
                "offset b[{i}] = {b} makes the reference configuration penetrate"
            )));
        }
        Ok(Self { c_matrix, offsets })
    }

    /// Unit selection with sign +1 for each of `n_boundary` DOFs.
    pub fn identity(offsets: Vector) -> Result<Self> {
        let n = offsets.len();
        Self::new(Matrix::identity(n, n), offsets)
    }

    pub fn c_matrix(&self) -> &Matrix {
        &self.c_matrix
    }

    pub fn offsets(&self) -> &Vector {
        &self.offsets
    }

    pub fn count(&self) -> usize {
        self.c_matrix.nrows()
    }

    pub fn n_boundary(&self) -> usize {
        self.c_matrix.ncols()
    }

    /// `C_B q_B + b` for a boundary displacement vector.
    pub fn gap(&self, q_boundary: &Vector) -> Vector {
        &self.c_matrix * q_boundary + &self.offsets
    }

    /// `[C_B 0]`, the constraint operator padded to `total` columns.
    pub fn padded(&self, total: usize) -> Matrix {
        let mut c = Matrix::zeros(self.count(), total);
        c.view_mut((0, 0), self.c_matrix.shape()).copy_from(&self.c_matrix);
        c
    }
}

type Sampler = dyn Fn(f64) -> Vector + Send + Sync;

/// Deterministic time-dependent load `t ↦ f(t)`.
#[derive(Clone)]
pub struct ForceSignal {
    dim: usize,
    description: String,
    sampler: Arc<Sampler>,
}

impl fmt::Debug for ForceSignal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ForceSignal")
            .field("dim", &self.dim)
            .field("description", &self.description)
            .finish()
    }
}

impl ForceSignal {
    pub fn from_fn(
        dim: usize,
        description: impl Into<String>,
        sampler: impl Fn(f64) -> Vector + Send + Sync + 'static,
    ) -> Self {
        Self {
            dim,
            description: description.into(),
            sampler: Arc::new(sampler),
        }
    }

    pub fn zero(dim: usize) -> Self {
        Self::from_fn(dim, "zero load", move |_| Vector::zeros(dim))
    }

    pub fn constant(value: Vector) -> Self {
        let dim = value.len();
        Self::from_fn(dim, "constant load", move |_| value.clone())
    }

    pub fn sample(&self, t: f64) -> Vector {
        let v = (self.sampler)(t);
        debug_assert_eq!(v.len(), self.dim);
        v
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn description(&self) -> &str {
        &self.description
    }
}

/// `f(t) = amplitude · sin(2π · frequency · t)` on each loaded DOF.
pub fn harmonic_force(
    amplitude: f64,
    frequency: f64,
    loaded_dofs: &[usize],
    dim: usize,
) -> Result<ForceSignal> {
    if !(frequency > 0.0) || !frequency.is_finite() {
        return Err(Error::InvalidParameter(format!("frequency must be positive, got {frequency}")));
    }
    if !amplitude.is_finite() {
        return Err(Error::InvalidParameter("amplitude must be finite".into()));
    }
    if loaded_dofs.is_empty() {
        return Err(Error::InvalidParameter("harmonic load needs at least one loaded DOF".into()));
    }
    if let Some(&d) = loaded_dofs.iter().find(|&&d| d >= dim) {
        return Err(Error::InvalidParameter(format!("loaded DOF {d} out of range (n = {dim})")));
    }
    let dofs = loaded_dofs.to_vec();
    let omega = 2.0 * std::f64::consts::PI * frequency;
    let description = format!("harmonic {amplitude} N at {frequency} Hz on DOFs {dofs:?}");
    Ok(ForceSignal::from_fn(dim, description, move |t| {
        let mut f = Vector::zeros(dim);
        let value = amplitude * (omega * t).sin();
        for &d in &dofs {
            f[d] = value;
        }
        f
    }))
}

/// Euler–Bernoulli cantilever resting above a rigid plane.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct BeamSpec {
    pub length: f64,
    pub element_count: usize,
    pub youngs_modulus: f64,
    pub poisson_ratio: f64,
    pub density: f64,
    pub width: f64,
    pub height: f64,
    pub contact_node_count: usize,
    pub obstacle_gap: f64,
}

impl Default for BeamSpec {
    fn default() -> Self {
        Self {
            length: 10.0,
            element_count: 50,
            youngs_modulus: 210e9,
            poisson_ratio: 0.3,
            density: 7860.0,
            width: 0.1,
            height: 0.1,
            contact_node_count: 3,
            obstacle_gap: 1.0,
        }
    }
}

impl BeamSpec {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("length", self.length),
            ("youngs_modulus", self.youngs_modulus),
            ("density", self.density),
            ("width", self.width),
            ("height", self.height),
            ("obstacle_gap", self.obstacle_gap),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.poisson_ratio > 0.0 && self.poisson_ratio < 0.5) {
            return Err(Error::InvalidParameter(format!(
                "poisson_ratio must lie in (0, 0.5), got {}",
                self.poisson_ratio
            )));
        }
        if self.element_count < 2 {
            return Err(Error::InvalidParameter("element_count must be at least 2".into()));
        }
        if self.contact_node_count == 0 || self.contact_node_count >= self.element_count {
            return Err(Error::InvalidParameter(format!(
                "contact_node_count must lie in [1, element_count), got {}",
                self.contact_node_count
            )));
        }
        Ok(())
    }

    pub fn second_moment(&self) -> f64 {
        self.width * self.height.powi(3) / 12.0
    }

    pub fn area(&self) -> f64 {
        self.width * self.height
    }
}

/// Cantilever clamped at node 0 with two DOFs (deflection, rotation) per
/// free node and a consistent mass matrix. The deflections of the last
/// `contact_node_count` nodes are the boundary DOFs; each is constrained by
/// `w + gap ≥ 0` against a plane `obstacle_gap` below the beam.
pub fn build_cantilever_beam(spec: &BeamSpec) -> Result<(PartitionedSystem, ContactConstraints)> {
    spec.validate()?;
    let ne = spec.element_count;
    let le = spec.length / ne as f64;
    let ei = spec.youngs_modulus * spec.second_moment();
    let rho_a = spec.density * spec.area();

    let ke = Matrix::from_row_slice(
        4,
        4,
        &[
            12.0, 6.0 * le, -12.0, 6.0 * le,
            6.0 * le, 4.0 * le * le, -6.0 * le, 2.0 * le * le,
            -12.0, -6.0 * le, 12.0, -6.0 * le,
            6.0 * le, 2.0 * le * le, -6.0 * le, 4.0 * le * le,
        ],
    ) * (ei / le.powi(3));
    let me = Matrix::from_row_slice(
        4,
        4,
        &[
            156.0, 22.0 * le, 54.0, -13.0 * le,
            22.0 * le, 4.0 * le * le, 13.0 * le, -3.0 * le * le,
            54.0, 13.0 * le, 156.0, -22.0 * le,
            -13.0 * le, -3.0 * le * le, -22.0 * le, 4.0 * le * le,
        ],
    ) * (rho_a * le / 420.0);

    // Natural numbering over all nodes, node 0 clamped afterwards.
    let total = 2 * (ne + 1);
    let mut k = Matrix::zeros(total, total);
    let mut m = Matrix::zeros(total, total);
    for e in 0..ne {
        let base = 2 * e;
        for a in 0..4 {
            for b in 0..4 {
                k[(base + a, base + b)] += ke[(a, b)];
                m[(base + a, base + b)] += me[(a, b)];
            }
        }
    }

    let nc = spec.contact_node_count;
    let free_labels: Vec<DofLabel> = (1..=ne)
        .flat_map(|node| {
            [
                DofLabel { node, kind: DofKind::Deflection },
                DofLabel { node, kind: DofKind::Rotation },
            ]
        })
        .collect();
    let is_boundary =
        |l: &DofLabel| l.kind == DofKind::Deflection && l.node > ne - nc;
    let order: Vec<DofLabel> = free_labels
        .iter()
        .copied()
        .filter(is_boundary)
        .chain(free_labels.iter().copied().filter(|l| !is_boundary(l)))
        .collect();
    let global_index = |l: &DofLabel| 2 * l.node + usize::from(l.kind == DofKind::Rotation);
    let perm: Vec<usize> = order.iter().map(global_index).collect();
    let n = perm.len();
    let kp = Matrix::from_fn(n, n, |i, j| k[(perm[i], perm[j])]);
    let mp = Matrix::from_fn(n, n, |i, j| m[(perm[i], perm[j])]);

    let system = PartitionedSystem::new(mp, kp, nc, order)?;
    let constraints = ContactConstraints::identity(Vector::from_element(nc, spec.obstacle_gap))?;
    Ok((system, constraints))
}

/// Chain of point masses. Spring `i < n−1` joins masses `i` and `i+1`; the
/// last spring anchors mass `n−1` to the wall. Boundary DOFs come first in
/// the order given, interior DOFs follow in ascending index order.
pub fn build_mass_spring_chain(
    masses: &[f64],
    spring_constants: &[f64],
    boundary_indices: &[usize],
    obstacle_gaps: &[f64],
) -> Result<(PartitionedSystem, ContactConstraints)> {
    let n = masses.len();
    if n == 0 {
        return Err(Error::InvalidParameter("chain needs at least one mass".into()));
    }
    if spring_constants.len() + 1 == n {
        return Err(Error::InvalidParameter(
            "chain is not anchored to ground (stiffness would be singular)".into(),
        ));
    }
    if spring_constants.len() != n {
        return Err(Error::dims("spring constants", n, spring_constants.len()));
    }
    if let Some(v) = masses.iter().chain(spring_constants).find(|v| !(**v > 0.0)) {
        return Err(Error::InvalidParameter(format!("masses and stiffnesses must be positive, got {v}")));
    }
    if obstacle_gaps.len() != boundary_indices.len() {
        return Err(Error::dims("obstacle gaps", boundary_indices.len(), obstacle_gaps.len()));
    }
    let mut seen = vec![false; n];
    for &b in boundary_indices {
        if b >= n || seen[b] {
            return Err(Error::InvalidParameter(format!("invalid boundary index {b}")));
        }
        seen[b] = true;
    }

    let mut k = Matrix::zeros(n, n);
    for (i, &ks) in spring_constants.iter().enumerate() {
        if i + 1 < n {
            k[(i, i)] += ks;
            k[(i + 1, i + 1)] += ks;
            k[(i, i + 1)] -= ks;
            k[(i + 1, i)] -= ks;
        } else {
            k[(i, i)] += ks;
        }
    }
    let m = Matrix::from_diagonal(&Vector::from_column_slice(masses));

    let perm: Vec<usize> = boundary_indices
        .iter()
        .copied()
        .chain((0..n).filter(|i| !seen[*i]))
        .collect();
    let kp = Matrix::from_fn(n, n, |i, j| k[(perm[i], perm[j])]);
    let mp = Matrix::from_fn(n, n, |i, j| m[(perm[i], perm[j])]);
    let labels = perm
        .iter()
        .map(|&node| DofLabel { node, kind: DofKind::Displacement })
        .collect();
    let system = PartitionedSystem::new(mp, kp, boundary_indices.len(), labels)?;
    let constraints = ContactConstraints::identity(Vector::from_column_slice(obstacle_gaps))?;
    Ok((system, constraints))
}

/// Paths of an externally exported full-order model.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SystemFiles {
    pub mass: PathBuf,
    pub stiffness: PathBuf,
    pub constraint_matrix: PathBuf,
    pub offsets: PathBuf,
    pub partition: PathBuf,
}

impl SystemFiles {
    /// Conventional file names inside one directory.
    pub fn in_dir(dir: impl AsRef<Path>) -> Self {
        let d = dir.as_ref();
        Self {
            mass: d.join("mass.mtx"),
            stiffness: d.join("stiffness.mtx"),
            constraint_matrix: d.join("constraints.mtx"),
            offsets: d.join("offsets.txt"),
            partition: d.join("partition.txt"),
        }
    }
}

fn symmetrize_loaded(a: Matrix, name: &str) -> Result<Matrix> {
    let defect = linalg::symmetry_defect(&a);
    if defect > LOAD_SYMMETRIZE_TOL {
        return Err(Error::NotSymmetric {
            name: name.to_string(),
            defect,
        });
    }
    Ok(linalg::symmetrize(&a))
}

/// Reads mass, stiffness, partition and constraint files. Matrices are given
/// in the exporter's DOF order and are permuted to boundary-first order here.
pub fn load_system(files: &SystemFiles) -> Result<(PartitionedSystem, ContactConstraints)> {
    let mass = mtx::read_matrix_market(&files.mass)?;
    let stiffness = mtx::read_matrix_market(&files.stiffness)?;
    let boundary = mtx::read_partition(&files.partition)?;
    let c_matrix = mtx::read_matrix_market(&files.constraint_matrix)?;
    let offsets = mtx::read_vector(&files.offsets)?;

    let n = mass.nrows();
    if mass.ncols() != n || stiffness.shape() != (n, n) {
        return Err(Error::dims(
            "mass/stiffness files",
            format!("{n}x{n} pair"),
            format!(
                "{}x{} and {}x{}",
                mass.nrows(),
                mass.ncols(),
                stiffness.nrows(),
                stiffness.ncols()
            ),
        ));
    }
    let mass = symmetrize_loaded(mass, "mass")?;
    let stiffness = symmetrize_loaded(stiffness, "stiffness")?;

    let mut seen = vec![false; n];
    for &b in &boundary {
        if b >= n || seen[b] {
            return Err(Error::malformed(
                &files.partition,
                format!("boundary index {b} out of range or repeated (n = {n})"),
            ));
        }
        seen[b] = true;
    }
    if c_matrix.ncols() != boundary.len() {
        return Err(Error::dims("constraint matrix columns", boundary.len(), c_matrix.ncols()));
    }
    let perm: Vec<usize> = boundary
        .iter()
        .copied()
        .chain((0..n).filter(|i| !seen[*i]))
        .collect();
    let mp = Matrix::from_fn(n, n, |i, j| mass[(perm[i], perm[j])]);
    let kp = Matrix::from_fn(n, n, |i, j| stiffness[(perm[i], perm[j])]);
    let labels = perm
        .iter()
        .map(|&node| DofLabel { node, kind: DofKind::Displacement })
        .collect();
    let system = PartitionedSystem::new(mp, kp, boundary.len(), labels)?;
    let constraints = ContactConstraints::new(c_matrix, offsets)?;
    Ok((system, constraints))
}

/// Writes a system in the format read by [`load_system`]. The files describe
/// the already permuted system, so the partition lists `0..n_B`.
pub fn write_system(
    dir: impl AsRef<Path>,
    system: &PartitionedSystem,
    constraints: &ContactConstraints,
) -> Result<SystemFiles> {
    let files = SystemFiles::in_dir(dir);
    mtx::write_matrix_market(&files.mass, system.mass(), Symmetry::Symmetric)?;
    mtx::write_matrix_market(&files.stiffness, system.stiffness(), Symmetry::Symmetric)?;
    mtx::write_matrix_market(&files.constraint_matrix, constraints.c_matrix(), Symmetry::General)?;
    mtx::write_vector(&files.offsets, constraints.offsets())?;
    let boundary: Vec<usize> = (0..system.n_boundary()).collect();
    mtx::write_partition(&files.partition, &boundary)?;
    Ok(files)
}

/// Constrained (static) modes: column `j` is the interior response to a unit
/// displacement of boundary DOF `j` with every other boundary DOF held fixed,
/// i.e. the solution of `K_II x = −K_IB e_j`.
pub fn static_modes(system: &PartitionedSystem) -> Result<Matrix> {
    let chol = linalg::cholesky(&system.k_ii(), "K_II")?;
    let k_ib = system.k_ib();
    let mut modes = Matrix::zeros(system.n_interior(), system.n_boundary());
    for j in 0..system.n_boundary() {
        let rhs = -k_ib.column(j).into_owned();
        modes.set_column(j, &chol.solve(&rhs));
    }
    Ok(modes)
}

/// Intrusive Craig-Bampton reduction: exact coupling `−K_II⁻¹K_IB`, the
/// first `r` fixed-interface modes (mass-orthonormal), and the congruence
/// projections `VᵀMV`, `VᵀKV`.
pub fn intrusive_craig_bampton(system: &PartitionedSystem, r: usize) -> Result<ReducedModel> {
    let n_i = system.n_interior();
    if r == 0 || r > n_i {
        return Err(Error::InvalidParameter(format!("rank r = {r} must lie in [1, {n_i}]")));
    }
    let k_ii = system.k_ii();
    let lu = LU::new(k_ii.clone());
    let phi = lu
        .solve(&(-system.k_ib()))
        .ok_or_else(|| Error::Singular("K_II in Craig-Bampton coupling".into()))?;
    let (_, modes) = linalg::generalized_eigen(&k_ii, &system.m_ii())?;
    let interior_basis = modes.columns(0, r).into_owned();
    let coupling = CouplingMatrix::new(phi, CouplingMethod::Intrusive, 0.0)?;
    let v = crate::opinf::assemble_basis_matrices(coupling.phi(), &interior_basis)?;
    let m_hat = linalg::symmetrize(&(v.transpose() * system.mass() * &v));
    let k_hat = linalg::symmetrize(&(v.transpose() * system.stiffness() * &v));
    let margin = linalg::min_eigenvalue(&m_hat).min(linalg::min_eigenvalue(&k_hat));
    Ok(ReducedModel {
        m_hat,
        k_hat,
        interior_basis,
        coupling,
        global_basis: v,
        spd_margin: margin,
        provenance: Provenance::intrusive(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain3() -> (PartitionedSystem, ContactConstraints) {
        build_mass_spring_chain(&[1.0; 3], &[1.0; 3], &[0], &[0.5]).unwrap()
    }

    #[test]
    fn chain_blocks_match_hand_assembly() {
        let (s, c) = chain3();
        assert_eq!(s.k_ii(), Matrix::from_row_slice(2, 2, &[2.0, -1.0, -1.0, 2.0]));
        assert_eq!(s.k_ib(), Matrix::from_row_slice(2, 1, &[-1.0, 0.0]));
        assert_eq!(s.k_bb(), Matrix::from_row_slice(1, 1, &[1.0]));
        assert_eq!(s.m_ii(), Matrix::identity(2, 2));
        assert_eq!(c.offsets()[0], 0.5);
    }

    #[test]
    fn chain_rejects_invalid_inputs() {
        // n_I = 0
        assert!(build_mass_spring_chain(&[1.0], &[1.0], &[0], &[1.0]).is_err());
        // not anchored
        assert!(matches!(
            build_mass_spring_chain(&[1.0; 3], &[1.0; 2], &[0], &[1.0]),
            Err(Error::InvalidParameter(_))
        ));
        assert!(build_mass_spring_chain(&[1.0, -1.0, 1.0], &[1.0; 3], &[0], &[1.0]).is_err());
        assert!(build_mass_spring_chain(&[1.0; 3], &[1.0; 3], &[0], &[-1.0]).is_err());
        assert!(build_mass_spring_chain(&[1.0; 3], &[1.0; 3], &[5], &[1.0]).is_err());
    }

    #[test]
    fn ten_mass_chain_is_spd() {
        let (s, _) = build_mass_spring_chain(&[1.0; 10], &[1.0; 10], &[0], &[1.0]).unwrap();
        assert!(linalg::min_eigenvalue(s.stiffness()) > 0.0);
        assert_eq!(linalg::symmetry_defect(s.stiffness()), 0.0);
    }

    #[test]
    fn static_modes_of_three_mass_chain() {
        let (s, _) = chain3();
        let modes = static_modes(&s).unwrap();
        assert!((modes[(0, 0)] - 2.0 / 3.0).abs() < 1e-15);
        assert!((modes[(1, 0)] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn decoupled_system_has_zero_static_modes() {
        let m = Matrix::identity(3, 3);
        let k = Matrix::from_row_slice(3, 3, &[2.0, 0.0, 0.0, 0.0, 2.0, -1.0, 0.0, -1.0, 2.0]);
        let labels = (0..3).map(|node| DofLabel { node, kind: DofKind::Displacement }).collect();
        let s = PartitionedSystem::new(m, k, 1, labels).unwrap();
        assert_eq!(static_modes(&s).unwrap(), Matrix::zeros(2, 1));
        let rom = intrusive_craig_bampton(&s, 2).unwrap();
        assert_eq!(rom.coupling.phi().norm(), 0.0);
    }

    #[test]
    fn beam_dof_counts_and_constants() {
        let spec = BeamSpec {
            element_count: 2,
            contact_node_count: 1,
            ..BeamSpec::default()
        };
        let (s, c) = build_cantilever_beam(&spec).unwrap();
        assert_eq!((s.n(), s.n_boundary(), s.n_interior()), (4, 1, 3));
        assert_eq!(s.dof_labels()[0], DofLabel { node: 2, kind: DofKind::Deflection });
        // Tip deflection is touched by one element only.
        let le = spec.length / 2.0;
        let ei = 210e9 * spec.second_moment();
        let rho_a = 7860.0 * spec.area();
        assert!((s.stiffness()[(0, 0)] / (12.0 * ei / le.powi(3)) - 1.0).abs() < 1e-14);
        assert!((s.mass()[(0, 0)] / (156.0 * rho_a * le / 420.0) - 1.0).abs() < 1e-14);
        assert_eq!(c.c_matrix()[(0, 0)], 1.0);
        assert_eq!(c.offsets()[0], spec.obstacle_gap);
    }

    #[test]
    fn beam_spec_validation() {
        let bad = [
            BeamSpec { youngs_modulus: 0.0, ..BeamSpec::default() },
            BeamSpec { density: -1.0, ..BeamSpec::default() },
            BeamSpec { poisson_ratio: 0.5, ..BeamSpec::default() },
            BeamSpec { contact_node_count: 50, ..BeamSpec::default() },
            BeamSpec { contact_node_count: 0, ..BeamSpec::default() },
            BeamSpec { element_count: 1, contact_node_count: 1, ..BeamSpec::default() },
            BeamSpec { obstacle_gap: 0.0, ..BeamSpec::default() },
        ];
        for spec in bad {
            assert!(build_cantilever_beam(&spec).is_err(), "{spec:?}");
        }
    }

    #[test]
    fn constraint_validation() {
        let c = Matrix::from_row_slice(1, 2, &[1.0, 1.0]);
        assert!(ContactConstraints::new(c, Vector::from_vec(vec![1.0])).is_err());
        let c = Matrix::from_row_slice(1, 2, &[0.0, 2.0]);
        assert!(ContactConstraints::new(c, Vector::from_vec(vec![1.0])).is_err());
        let c = Matrix::from_row_slice(1, 2, &[0.0, -1.0]);
        assert!(ContactConstraints::new(c.clone(), Vector::from_vec(vec![-0.1])).is_err());
        let ok = ContactConstraints::new(c, Vector::from_vec(vec![0.25])).unwrap();
        assert!((ok.gap(&Vector::from_vec(vec![3.0, 0.2]))[0] - 0.05).abs() < 1e-15);
    }

    #[test]
    fn harmonic_force_values() {
        let f = harmonic_force(3000.0, 0.16, &[1], 3).unwrap();
        assert_eq!(f.sample(0.0), Vector::zeros(3));
        let g = harmonic_force(3000.0, 0.32, &[0, 2], 3).unwrap();
        let v = g.sample(1.0 / (4.0 * 0.32));
        assert!((v[0] - 3000.0).abs() < 1e-9 && (v[2] - 3000.0).abs() < 1e-9 && v[1] == 0.0);
        assert_eq!(f.sample(1.234), f.sample(1.234));
        assert!(harmonic_force(1.0, 0.0, &[0], 3).is_err());
        assert!(harmonic_force(1.0, 1.0, &[], 3).is_err());
        assert!(harmonic_force(1.0, 1.0, &[3], 3).is_err());
    }

    #[test]
    fn loader_round_trip_and_validation() {
        let (s, c) = chain3();
        let dir = tempfile::tempdir().unwrap();
        let files = write_system(dir.path(), &s, &c).unwrap();
        let (s2, c2) = load_system(&files).unwrap();
        assert!((s2.mass() - s.mass()).amax() <= 1e-15);
        assert!((s2.stiffness() - s.stiffness()).amax() <= 1e-15);
        assert_eq!(c2, c);

        // Partition {0} applied to the unpermuted chain matrices.
        let mut k = Matrix::from_row_slice(3, 3, &[1.0, -1.0, 0.0, -1.0, 2.0, -1.0, 0.0, -1.0, 2.0]);
        mtx::write_matrix_market(&files.stiffness, &k, Symmetry::General).unwrap();
        let (s3, _) = load_system(&files).unwrap();
        assert_eq!(s3.n_boundary(), 1);
        assert_eq!(s3.stiffness(), s.stiffness());

        k[(0, 1)] += 1e-3;
        mtx::write_matrix_market(&files.stiffness, &k, Symmetry::General).unwrap();
        let err = load_system(&files).unwrap_err();
        assert!(matches!(err, Error::NotSymmetric { .. }));
        assert!(err.to_string().contains("stiffness"));

        let indefinite = Matrix::from_row_slice(3, 3, &[1.0, 2.0, 0.0, 2.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
        mtx::write_matrix_market(&files.stiffness, &indefinite, Symmetry::General).unwrap();
        assert!(matches!(load_system(&files), Err(Error::NotPositiveDefinite { .. })));

        mtx::write_matrix_market(&files.stiffness, &Matrix::identity(2, 2), Symmetry::General).unwrap();
        assert!(matches!(load_system(&files), Err(Error::DimensionMismatch { .. })));
    }
}
