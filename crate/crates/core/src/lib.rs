//! Substructured operator inference with SPD constraints and reduced
//! node-to-node contact.
//!
//! A full-order structure `M q̈ + K q = f` is split into boundary DOFs (the
//! potential contact nodes, never reduced) and interior DOFs. From two
//! contact-free training runs the crate infers reduced operators `M̂`, `K̂`
//! in the coordinates `(q_B, q̂_I)` and then solves contact problems on the
//! reduced model with one linear complementarity problem per time step.
//!
//! Modules, in pipeline order:
//! - [`model`]: full-order systems, constraints, loads, reference reduction
//! - [`timestep`]: implicit Euler for free, fixed-boundary and contact runs
//! - [`snapshots`]: snapshot matrices, second derivatives, POD
//! - [`coupling`]: boundary-to-interior coupling approximations
//! - [`opinf`]: SPD-constrained least squares and the reduced model
//! - [`lcp`]: Lemke's method and the reduced contact loop
//! - [`metrics`]: error curves and contact diagnostics
//! - [`experiment`]: the whole chain in memory

pub mod coupling;
pub mod error;
pub mod experiment;
pub mod lcp;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod mtx;
pub mod opinf;
pub mod snapshots;
pub mod timestep;

pub use coupling::{coupling_from_static_modes, coupling_full_lsq, coupling_reduced_lsq, CouplingMatrix, CouplingMethod};
pub use error::{Error, ErrorCategory, Result};
pub use lcp::{
    assemble_lcp_matrix, assemble_lcp_rhs, lemke_solve, simulate_contact_rom, step_reduced, ContactRunDiagnostics,
    ContactStepper, LcpProblem, LcpSolution, LcpStatus, RomRun,
};
pub use linalg::{Matrix, Vector};
pub use metrics::{contact_diagnostics, relative_error_curves, ContactReport, ErrorCurve, ErrorKind, NormConvention, RowSelection};
pub use model::{
    build_cantilever_beam, build_mass_spring_chain, harmonic_force, intrusive_craig_bampton, load_system, static_modes,
    write_system, BeamSpec, ContactConstraints, DofKind, DofLabel, ForceSignal, PartitionedSystem, SystemFiles,
};
pub use opinf::{
    assemble_basis, infer_global, infer_interior, infer_reduced_model, solve_spd_lsq, InferenceResult,
    InferenceSettings, ReducedModel, SpdLsqDiagnostics, SpdLsqProblem, SpdLsqSolution,
};
pub use snapshots::{
    collect, pod, reduce_training_data, second_derivatives, PodBasis, PodTruncation, ReducedTrainingData, SnapshotSet,
};
pub use timestep::{simulate_fixed_boundary, simulate_free, solve_contact_fom, ContactRun, Trajectory};
