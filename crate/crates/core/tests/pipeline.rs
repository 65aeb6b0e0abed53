use contact_rom::experiment::{run_experiment, ExperimentConfig, LoadSpec, LoadedDofs, ModelSource};
use contact_rom::{CouplingMethod, ReducedModel, SnapshotSet, Trajectory};

fn chain_config() -> ExperimentConfig {
    let load = |frequency| LoadSpec {
        amplitude: 40.0,
        frequency,
        dofs: LoadedDofs::Interior,
    };
    ExperimentConfig {
        model: ModelSource::Chain {
            masses: vec![1.0, 1.2, 0.8, 1.5, 1.1, 0.9],
            springs: vec![30.0, 25.0, 40.0, 35.0, 20.0, 50.0],
            boundary: vec![0],
            gaps: vec![0.3],
        },
        train: load(0.2),
        test: load(0.4),
        h: 0.01,
        train_steps: 800,
        test_steps: 800,
        rank: 2,
        pod_tolerance: None,
        coupling_rank: 2,
        coupling: CouplingMethod::StaticModes,
        epsilon: None,
    }
}

#[test]
fn chain_pipeline_runs_and_persists() {
    let out = run_experiment(&chain_config()).unwrap();
    let model = &out.inference.model;
    assert_eq!(model.dim(), 3);
    assert_eq!(out.rom.lifted.dim(), 6);
    assert_eq!(out.rom.lifted.len(), out.fom.trajectory.len());
    assert!(out.fom_contact.passes(1e-9, 1e-8));
    assert!(out.rom_contact.max_negative_multiplier == 0.0);
    assert!(!out.fom_contact.contact_onsets.is_empty());

    let dir = tempfile::tempdir().unwrap();
    model.write_dir(dir.path().join("model")).unwrap();
    let back = ReducedModel::read_dir(dir.path().join("model")).unwrap();
    assert_eq!(back.m_hat, model.m_hat);
    assert_eq!(back.k_hat, model.k_hat);
    assert_eq!(back.coupling.method(), CouplingMethod::StaticModes);

    out.training.snapshots.write_dir(dir.path().join("snap")).unwrap();
    let snaps = SnapshotSet::read_dir(dir.path().join("snap")).unwrap();
    assert_eq!(snaps, out.training.snapshots);

    out.fom.trajectory.write_csv(dir.path().join("fom.csv")).unwrap();
    let traj = Trajectory::read_csv(dir.path().join("fom.csv")).unwrap();
    assert_eq!(traj.states, out.fom.trajectory.states);
    assert_eq!(traj.multipliers, out.fom.trajectory.multipliers);
}

#[test]
fn all_couplings_give_spd_models() {
    for method in [CouplingMethod::StaticModes, CouplingMethod::FullLsq, CouplingMethod::ReducedLsq] {
        let mut cfg = chain_config();
        cfg.coupling = method;
        let out = run_experiment(&cfg).unwrap();
        let m = &out.inference.model;
        assert!(contact_rom::linalg::cholesky(&m.m_hat, "M").is_ok(), "{method}");
        assert!(contact_rom::linalg::cholesky(&m.k_hat, "K").is_ok(), "{method}");
        assert_eq!(m.provenance.coupling_method, method);
    }
}

#[test]
fn invalid_config_reports_stage() {
    let mut cfg = chain_config();
    cfg.h = -1.0;
    let err = run_experiment(&cfg).unwrap_err();
    assert_eq!(err.stage.as_str(), "load_system");
    assert_eq!(err.error.category(), contact_rom::ErrorCategory::Config);
}
