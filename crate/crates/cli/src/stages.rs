//! Stage runners. Each reads its inputs from the run directory and writes
//! its artifacts next to them:
//!
//! ```text
//! config.resolved
//! system/     mass.mtx stiffness.mtx constraints.mtx offsets.txt partition.txt
//! training/   free.csv fixed.csv
//! snapshots/  q_b.csv q_i.csv f_b.csv f_i.csv q1.csv f1_i.csv
//! fom/        trajectory.csv diagnostics.txt
//! model/      m_hat.mtx k_hat.mtx interior_basis.mtx global_basis.mtx coupling.mtx(.txt) model.txt inference.txt
//! rom/        trajectory.csv reduced.csv diagnostics.txt
//! errors/     boundary.csv interior.csv multiplier.csv *_unsquared.csv summary.csv
//! ```

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use contact_rom::experiment::{run_training, ErrorSummary, Stage};
use contact_rom::mtx::fmt_f64;
use contact_rom::{
    contact_diagnostics, infer_reduced_model, simulate_contact_rom, solve_contact_fom, static_modes, write_system,
    ContactConstraints, ErrorCurve, PartitionedSystem, ReducedModel, SnapshotSet, Trajectory, Vector,
};

use crate::config::{write_resolved, RunConfig};
use crate::error::CliError;

pub struct Layout {
    root: PathBuf,
}

impl Layout {
    pub fn new(root: &Path) -> Self {
        Self { root: root.to_path_buf() }
    }

    pub fn system(&self) -> PathBuf {
        self.root.join("system")
    }
    pub fn training(&self) -> PathBuf {
        self.root.join("training")
    }
    pub fn snapshots(&self) -> PathBuf {
        self.root.join("snapshots")
    }
    pub fn fom(&self) -> PathBuf {
        self.root.join("fom")
    }
    pub fn model(&self) -> PathBuf {
        self.root.join("model")
    }
    pub fn rom(&self) -> PathBuf {
        self.root.join("rom")
    }
    pub fn errors(&self) -> PathBuf {
        self.root.join("errors")
    }
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
    }
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn ensure_dir(dir: PathBuf) -> Result<PathBuf, CliError> {
    fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    Ok(dir)
}

fn build_system(config: &RunConfig) -> Result<(PartitionedSystem, ContactConstraints), CliError> {
    config.experiment.model.build().map_err(CliError::stage(Stage::LoadSystem))
}

/// Training runs, snapshots and the full-order contact reference.
pub fn simulate_fom(config: &RunConfig) -> Result<(), CliError> {
    write_resolved(config)?;
    let layout = Layout::new(&config.out);
    let (system, constraints) = build_system(config)?;
    write_system(layout.system(), &system, &constraints).map_err(CliError::stage(Stage::LoadSystem))?;

    let training = run_training(&system, &config.experiment)?;
    training
        .free_run
        .write_csv(ensure_dir(layout.training())?.join("free.csv"))
        .map_err(CliError::stage(Stage::Training))?;
    training
        .fixed_run
        .write_csv(ensure_dir(layout.training())?.join("fixed.csv"))
        .map_err(CliError::stage(Stage::Training))?;
    training
        .snapshots
        .write_dir(layout.snapshots())
        .map_err(CliError::stage(Stage::Collect))?;

    let exp = &config.experiment;
    let force = exp.test.signal(&system).map_err(CliError::stage(Stage::FullOrderContact))?;
    let zero = Vector::zeros(system.n());
    let fom = solve_contact_fom(&system, &constraints, &force, &zero, &zero, exp.h, exp.test_steps)
        .map_err(CliError::stage(Stage::FullOrderContact))?;
    fom.trajectory
        .write_csv(ensure_dir(layout.fom())?.join("trajectory.csv"))
        .map_err(CliError::stage(Stage::FullOrderContact))?;
    let report = contact_diagnostics(&fom.trajectory, &constraints).map_err(CliError::stage(Stage::Metrics))?;
    let text = format!("{}{}", report.to_report(), fom.diagnostics.to_report());
    write_text(&layout.fom().join("diagnostics.txt"), &text)?;
    println!(
        "simulate-fom: {} DOFs ({} boundary), {} training steps, {} contact phases in the reference run",
        system.n(),
        system.n_boundary(),
        exp.train_steps,
        report.contact_onsets.len()
    );
    Ok(())
}

/// Reduced model from the persisted snapshots.
pub fn infer(config: &RunConfig) -> Result<(), CliError> {
    write_resolved(config)?;
    let layout = Layout::new(&config.out);
    let (system, _) = build_system(config)?;
    let snapshots = SnapshotSet::read_dir(layout.snapshots()).map_err(CliError::stage(Stage::Collect))?;
    if snapshots.n_boundary() != system.n_boundary() || snapshots.n_interior() != system.n_interior() {
        return Err(CliError::config("snapshots do not match the configured model"));
    }
    let modes = static_modes(&system).map_err(CliError::stage(Stage::Inference))?;
    let result = infer_reduced_model(&snapshots, &config.experiment.inference_settings(), Some(&modes))
        .map_err(CliError::stage(Stage::Inference))?;
    result
        .model
        .write_dir(layout.model())
        .map_err(CliError::stage(Stage::Inference))?;

    let mut text = String::new();
    let sv: Vec<String> = result.interior_pod.singular_values.iter().map(|v| fmt_f64(*v)).collect();
    let _ = writeln!(text, "[pod]\nrank = {}\nsingular_values = {}", result.interior_pod.rank(), sv.join(" "));
    let _ = writeln!(
        text,
        "\n[coupling]\nmethod = {}\nresidual = {}\nunderdetermined = {}",
        result.model.coupling.method(),
        fmt_f64(result.model.coupling.residual()),
        result.model.coupling.underdetermined()
    );
    let _ = writeln!(text, "\n[interior]\n{}", result.interior_diagnostics.to_report());
    let _ = writeln!(text, "[global]\n{}", result.global_diagnostics.to_report());
    write_text(&layout.model().join("inference.txt"), &text)?;
    for w in result.interior_diagnostics.warnings.iter().chain(&result.global_diagnostics.warnings) {
        eprintln!("warning: {w}");
    }
    println!(
        "infer: r = {}, coupling {}, epsilon {:e}, global objective {:e}",
        result.model.rank(),
        result.model.coupling.method(),
        result.model.spd_margin,
        result.global_diagnostics.objective
    );
    Ok(())
}

/// Reduced contact run from the persisted model, plus error curves when a
/// full-order reference exists.
pub fn simulate_rom(config: &RunConfig) -> Result<(), CliError> {
    write_resolved(config)?;
    let layout = Layout::new(&config.out);
    let (system, constraints) = build_system(config)?;
    let model = ReducedModel::read_dir(layout.model()).map_err(CliError::stage(Stage::ReducedContact))?;
    if model.global_basis.nrows() != system.n() || model.n_boundary() != system.n_boundary() {
        return Err(CliError::config("stored model does not match the configured system"));
    }
    let exp = &config.experiment;
    let force = exp.test.signal(&system).map_err(CliError::stage(Stage::ReducedContact))?;
    let zero = Vector::zeros(system.n());
    let run = simulate_contact_rom(&model, &constraints, &force, &zero, &zero, exp.h, exp.test_steps)
        .map_err(CliError::stage(Stage::ReducedContact))?;
    let stage = || CliError::stage(Stage::ReducedContact);
    run.lifted.write_csv(ensure_dir(layout.rom())?.join("trajectory.csv")).map_err(stage())?;
    run.reduced.write_csv(layout.rom().join("reduced.csv")).map_err(stage())?;
    let report = contact_diagnostics(&run.lifted, &constraints).map_err(CliError::stage(Stage::Metrics))?;
    write_text(
        &layout.rom().join("diagnostics.txt"),
        &format!("{}{}", report.to_report(), run.diagnostics.to_report()),
    )?;
    println!(
        "simulate-rom: {} reduced coordinates, {} contact phases",
        model.dim(),
        report.contact_onsets.len()
    );

    let reference = layout.fom().join("trajectory.csv");
    if reference.is_file() {
        let fom = Trajectory::read_csv(&reference).map_err(CliError::stage(Stage::Metrics))?;
        let errors = ErrorSummary::compute(&fom, &run.lifted, system.n_boundary()).map_err(CliError::stage(Stage::Metrics))?;
        write_errors(&layout.errors(), &errors)?;
    } else {
        println!("simulate-rom: no full-order reference at {}, skipping error curves", reference.display());
    }
    Ok(())
}

/// `(file stem, quantity label, curve)` for every curve in the summary.
pub fn named_curves(errors: &ErrorSummary) -> Vec<(&'static str, &'static str, &ErrorCurve)> {
    let mut out = vec![
        ("boundary", "q_B", &errors.boundary),
        ("interior", "q_I", &errors.interior),
    ];
    if let Some(c) = &errors.multiplier {
        out.push(("multiplier", "lambda", c));
    }
    out.push(("boundary_unsquared", "q_B", &errors.boundary_unsquared));
    out.push(("interior_unsquared", "q_I", &errors.interior_unsquared));
    if let Some(c) = &errors.multiplier_unsquared {
        out.push(("multiplier_unsquared", "lambda", c));
    }
    out
}

fn write_errors(dir: &Path, errors: &ErrorSummary) -> Result<(), CliError> {
    let dir = &ensure_dir(dir.to_path_buf())?;
    let mut summary = String::from("quantity,convention,max,mean\n");
    for (stem, quantity, curve) in named_curves(errors) {
        curve
            .write_csv(dir.join(format!("{stem}.csv")))
            .map_err(CliError::stage(Stage::Metrics))?;
        let convention = if stem.ends_with("_unsquared") { "unsquared" } else { "squared" };
        let _ = writeln!(summary, "{quantity},{convention},{},{}", fmt_f64(curve.max()), fmt_f64(curve.mean()));
    }
    write_text(&dir.join("summary.csv"), &summary)?;
    println!(
        "errors (squared, max): q_B {:.3e}  q_I {:.3e}  lambda {}",
        errors.boundary.max(),
        errors.interior.max(),
        errors.max_multiplier().map_or("n/a".into(), |v| format!("{v:.3e}"))
    );
    Ok(())
}

pub fn pipeline(config: &RunConfig) -> Result<(), CliError> {
    simulate_fom(config)?;
    infer(config)?;
    simulate_rom(config)
}
