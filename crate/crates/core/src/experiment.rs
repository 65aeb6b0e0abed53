//! End-to-end experiment: training runs, inference, full-order contact
//! reference, reduced contact run and error curves.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::coupling::CouplingMethod;
use crate::error::{Error, Result};
use crate::lcp::{simulate_contact_rom, RomRun};
use crate::linalg::Vector;
use crate::metrics::{contact_diagnostics, relative_error_curves, ContactReport, ErrorCurve, NormConvention, RowSelection};
use crate::model::{
    build_cantilever_beam, build_mass_spring_chain, harmonic_force, load_system, static_modes, BeamSpec,
    ContactConstraints, DofKind, ForceSignal, PartitionedSystem, SystemFiles,
};
use crate::opinf::{infer_reduced_model, InferenceResult, InferenceSettings};
use crate::snapshots::{collect, PodTruncation, SnapshotSet};
use crate::timestep::{simulate_fixed_boundary, simulate_free, solve_contact_fom, ContactRun, Trajectory};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ModelSource {
    Beam(BeamSpec),
    Chain {
        masses: Vec<f64>,
        springs: Vec<f64>,
        boundary: Vec<usize>,
        gaps: Vec<f64>,
    },
    Files {
        mass: std::path::PathBuf,
        stiffness: std::path::PathBuf,
        constraints: std::path::PathBuf,
        offsets: std::path::PathBuf,
        partition: std::path::PathBuf,
    },
}

impl ModelSource {
    pub fn build(&self) -> Result<(PartitionedSystem, ContactConstraints)> {
        match self {
            ModelSource::Beam(spec) => build_cantilever_beam(spec),
            ModelSource::Chain {
                masses,
                springs,
                boundary,
                gaps,
            } => build_mass_spring_chain(masses, springs, boundary, gaps),
            ModelSource::Files {
                mass,
                stiffness,
                constraints,
                offsets,
                partition,
            } => load_system(&SystemFiles {
                mass: mass.clone(),
                stiffness: stiffness.clone(),
                constraint_matrix: constraints.clone(),
                offsets: offsets.clone(),
                partition: partition.clone(),
            }),
        }
    }
}

/// Which DOFs (boundary-first indexing) carry the harmonic load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LoadedDofs {
    Indices(Vec<usize>),
    /// Every interior DOF.
    Interior,
    /// Interior beam deflections (falls back to all interior DOFs for
    /// systems without deflection labels).
    InteriorDeflections,
}

impl LoadedDofs {
    pub fn resolve(&self, system: &PartitionedSystem) -> Vec<usize> {
        let n_b = system.n_boundary();
        match self {
            LoadedDofs::Indices(v) => v.clone(),
            LoadedDofs::Interior => (n_b..system.n()).collect(),
            LoadedDofs::InteriorDeflections => {
                let defl: Vec<usize> = (n_b..system.n())
                    .filter(|&i| system.dof_labels()[i].kind == DofKind::Deflection)
                    .collect();
                if defl.is_empty() {
                    (n_b..system.n()).collect()
                } else {
                    defl
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoadSpec {
    /// Newtons; negative values push toward the obstacle.
    pub amplitude: f64,
    pub frequency: f64,
    pub dofs: LoadedDofs,
}

impl LoadSpec {
    pub fn signal(&self, system: &PartitionedSystem) -> Result<ForceSignal> {
        harmonic_force(self.amplitude, self.frequency, &self.dofs.resolve(system), system.n())
    }
}

/// Missing fields take their values from [`ExperimentConfig::beam_default`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelSource,
    pub train: LoadSpec,
    pub test: LoadSpec,
    pub h: f64,
    pub train_steps: usize,
    pub test_steps: usize,
    pub rank: usize,
    /// When set, the interior rank is chosen by singular-value decay instead.
    pub pod_tolerance: Option<f64>,
    pub coupling_rank: usize,
    pub coupling: CouplingMethod,
    /// `None` derives the margin from the interior training data.
    pub epsilon: Option<f64>,
}

impl ExperimentConfig {
    /// Cantilever analogue of the reference experiment: 50 elements, three
    /// contact nodes, training at 0.16 Hz and testing at 0.32 Hz.
    pub fn beam_default() -> Self {
        Self {
            model: ModelSource::Beam(BeamSpec::default()),
            train: LoadSpec {
                amplitude: -3000.0,
                frequency: 0.16,
                dofs: LoadedDofs::InteriorDeflections,
            },
            test: LoadSpec {
                amplitude: -3000.0,
                frequency: 0.32,
                dofs: LoadedDofs::InteriorDeflections,
            },
            h: 0.01,
            train_steps: 1000,
            test_steps: 1000,
            rank: 2,
            pod_tolerance: None,
            coupling_rank: 2,
            coupling: CouplingMethod::StaticModes,
            epsilon: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.h > 0.0) || !self.h.is_finite() {
            return Err(Error::InvalidParameter(format!("h must be positive, got {}", self.h)));
        }
        if self.rank == 0 {
            return Err(Error::InvalidParameter("rank must be at least 1".into()));
        }
        if self.coupling_rank == 0 {
            return Err(Error::InvalidParameter("coupling_rank must be at least 1".into()));
        }
        if matches!(self.pod_tolerance, Some(t) if !(t > 0.0 && t < 1.0)) {
            return Err(Error::InvalidParameter("pod_tolerance must lie in (0, 1)".into()));
        }
        if self.coupling == CouplingMethod::Intrusive {
            return Err(Error::InvalidParameter(
                "coupling must be full-lsq, reduced-lsq or static-modes".into(),
            ));
        }
        if self.train_steps < 2 || self.test_steps < 2 {
            return Err(Error::InvalidParameter("need at least 2 steps per run".into()));
        }
        if matches!(self.epsilon, Some(e) if !(e > 0.0)) {
            return Err(Error::InvalidParameter("epsilon must be positive".into()));
        }
        Ok(())
    }

    pub fn inference_settings(&self) -> InferenceSettings {
        InferenceSettings {
            interior_rank: match self.pod_tolerance {
                Some(tau) => PodTruncation::Tolerance(tau),
                None => PodTruncation::Rank(self.rank),
            },
            coupling: self.coupling,
            coupling_rank: self.coupling_rank,
            margin: self.epsilon,
        }
    }
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::beam_default()
    }
}

/// Pipeline stage names used in error reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    LoadSystem,
    Training,
    Collect,
    Inference,
    FullOrderContact,
    ReducedContact,
    Metrics,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::LoadSystem => "load_system",
            Stage::Training => "training",
            Stage::Collect => "collect",
            Stage::Inference => "inference",
            Stage::FullOrderContact => "fom_contact",
            Stage::ReducedContact => "rom_contact",
            Stage::Metrics => "metrics",
        }
    }
}

#[derive(Debug)]
pub struct StageError {
    pub stage: Stage,
    pub error: Error,
}

impl std::fmt::Display for StageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "stage {}: {}", self.stage.as_str(), self.error)
    }
}

impl std::error::Error for StageError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

trait AtStage<T> {
    fn at(self, stage: Stage) -> std::result::Result<T, StageError>;
}

impl<T> AtStage<T> for Result<T> {
    fn at(self, stage: Stage) -> std::result::Result<T, StageError> {
        self.map_err(|error| StageError { stage, error })
    }
}

/// Squared (canonical) and unsquared error curves of one ROM run.
#[derive(Debug, Clone)]
pub struct ErrorSummary {
    pub boundary: ErrorCurve,
    pub interior: ErrorCurve,
    pub multiplier: Option<ErrorCurve>,
    pub boundary_unsquared: ErrorCurve,
    pub interior_unsquared: ErrorCurve,
    pub multiplier_unsquared: Option<ErrorCurve>,
}

impl ErrorSummary {
    pub fn compute(reference: &Trajectory, approx: &Trajectory, n_boundary: usize) -> Result<Self> {
        let sq = NormConvention::Squared;
        let un = NormConvention::Unsquared;
        let (boundary, multiplier) = relative_error_curves(reference, approx, RowSelection::Boundary(n_boundary), sq)?;
        let (interior, _) = relative_error_curves(reference, approx, RowSelection::Interior(n_boundary), sq)?;
        let (boundary_unsquared, multiplier_unsquared) =
            relative_error_curves(reference, approx, RowSelection::Boundary(n_boundary), un)?;
        let (interior_unsquared, _) = relative_error_curves(reference, approx, RowSelection::Interior(n_boundary), un)?;
        Ok(Self {
            boundary,
            interior,
            multiplier,
            boundary_unsquared,
            interior_unsquared,
            multiplier_unsquared,
        })
    }

    pub fn max_multiplier(&self) -> Option<f64> {
        self.multiplier.as_ref().map(ErrorCurve::max)
    }
}

/// Training snapshots and the trajectories they came from.
#[derive(Debug, Clone)]
pub struct TrainingData {
    pub free_run: Trajectory,
    pub fixed_run: Trajectory,
    pub snapshots: SnapshotSet,
}

pub fn run_training(
    system: &PartitionedSystem,
    config: &ExperimentConfig,
) -> std::result::Result<TrainingData, StageError> {
    let force = config.train.signal(system).at(Stage::Training)?;
    let n = system.n();
    let n_i = system.n_interior();
    let zero = Vector::zeros(n);
    let free_run = simulate_free(system, &force, &zero, &zero, config.h, config.train_steps).at(Stage::Training)?;
    let zero_i = Vector::zeros(n_i);
    let fixed_run =
        simulate_fixed_boundary(system, &force, &zero_i, &zero_i, config.h, config.train_steps).at(Stage::Training)?;
    let snapshots = collect(&free_run, &fixed_run, system.n_boundary()).at(Stage::Collect)?;
    Ok(TrainingData {
        free_run,
        fixed_run,
        snapshots,
    })
}

#[derive(Debug, Clone)]
pub struct ExperimentOutputs {
    pub system: PartitionedSystem,
    pub constraints: ContactConstraints,
    pub training: TrainingData,
    pub inference: InferenceResult,
    pub fom: ContactRun,
    pub rom: RomRun,
    pub errors: ErrorSummary,
    pub fom_contact: ContactReport,
    pub rom_contact: ContactReport,
    pub elapsed: Duration,
}

/// Runs every stage in memory. Initial displacement and velocity are zero.
pub fn run_experiment(config: &ExperimentConfig) -> std::result::Result<ExperimentOutputs, StageError> {
    let start = Instant::now();
    config.validate().at(Stage::LoadSystem)?;
    let (system, constraints) = config.model.build().at(Stage::LoadSystem)?;
    let training = run_training(&system, config)?;
    let modes = static_modes(&system).at(Stage::Inference)?;
    let inference =
        infer_reduced_model(&training.snapshots, &config.inference_settings(), Some(&modes)).at(Stage::Inference)?;

    let test_force = config.test.signal(&system).at(Stage::FullOrderContact)?;
    let zero = Vector::zeros(system.n());
    let fom = solve_contact_fom(&system, &constraints, &test_force, &zero, &zero, config.h, config.test_steps)
        .at(Stage::FullOrderContact)?;
    let rom = simulate_contact_rom(
        &inference.model,
        &constraints,
        &test_force,
        &zero,
        &zero,
        config.h,
        config.test_steps,
    )
    .at(Stage::ReducedContact)?;
    let errors = ErrorSummary::compute(&fom.trajectory, &rom.lifted, system.n_boundary()).at(Stage::Metrics)?;
    let fom_contact = contact_diagnostics(&fom.trajectory, &constraints).at(Stage::Metrics)?;
    let rom_contact = contact_diagnostics(&rom.reduced, &constraints).at(Stage::Metrics)?;
    Ok(ExperimentOutputs {
        system,
        constraints,
        training,
        inference,
        fom,
        rom,
        errors,
        fom_contact,
        rom_contact,
        elapsed: start.elapsed(),
    })
}
