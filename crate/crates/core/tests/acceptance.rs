//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits nonzero if any of them fails.

use std::process::ExitCode;
use std::time::Instant;

use contact_rom::experiment::{run_experiment, ExperimentConfig, ExperimentOutputs};
use contact_rom::linalg::{self, generalized_eigen, min_eigenvalue, relative_frobenius, symmetric_norm2};
use contact_rom::metrics::event_timing_difference;
use contact_rom::opinf::{default_margin, infer_global, infer_interior};
use contact_rom::snapshots::second_derivatives;
use contact_rom::{
    assemble_lcp_matrix, build_cantilever_beam, build_mass_spring_chain, contact_diagnostics, coupling_full_lsq,
    intrusive_craig_bampton, lemke_solve, simulate_free, solve_contact_fom, static_modes, BeamSpec,
    ContactConstraints, CouplingMethod, ForceSignal, LcpProblem, LcpStatus, Matrix, PartitionedSystem,
    ReducedTrainingData, SnapshotSet, Vector,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
        }
    }
}

struct BeamRuns {
    static_modes: ExperimentOutputs,
    full_lsq: ExperimentOutputs,
    reduced_lsq: ExperimentOutputs,
    wall_seconds: f64,
}

fn beam_runs() -> Result<BeamRuns, String> {
    let start = Instant::now();
    let run = |method: CouplingMethod| {
        let mut cfg = ExperimentConfig::beam_default();
        cfg.coupling = method;
        run_experiment(&cfg).map_err(|e| format!("{method}: {e}"))
    };
    let static_modes = run(CouplingMethod::StaticModes)?;
    let wall_seconds = start.elapsed().as_secs_f64();
    Ok(BeamRuns {
        static_modes,
        full_lsq: run(CouplingMethod::FullLsq)?,
        reduced_lsq: run(CouplingMethod::ReducedLsq)?,
        wall_seconds,
    })
}

fn displacement_errors(o: &ExperimentOutputs) -> (f64, f64) {
    (o.errors.boundary.max(), o.errors.interior.max())
}

fn multiplier_error(o: &ExperimentOutputs) -> f64 {
    o.errors.max_multiplier().unwrap_or(f64::INFINITY)
}

fn criterion_1(runs: &BeamRuns) -> Outcome {
    let o = &runs.static_modes;
    let (eb, ei) = displacement_errors(o);
    let el = multiplier_error(o);
    let pass = eb <= 1e-2 && ei <= 1e-2 && el <= 1e-2 && runs.wall_seconds <= 60.0;
    Outcome::new(
        pass,
        format!(
            "boundary {eb:.3e}, interior {ei:.3e}, multiplier {el:.3e} (each <= 1e-2), runtime {:.2} s (<= 60)",
            runs.wall_seconds
        ),
    )
}

fn criterion_2(runs: &BeamRuns) -> Outcome {
    let reference = multiplier_error(&runs.static_modes);
    let fom = &runs.static_modes.fom_contact;
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, o) in [("full-lsq", &runs.full_lsq), ("reduced-lsq", &runs.reduced_lsq)] {
        let (eb, ei) = displacement_errors(o);
        let el = multiplier_error(o);
        let onsets = event_timing_difference(&fom.contact_onsets, &o.rom_contact.contact_onsets);
        let releases = event_timing_difference(&fom.contact_releases, &o.rom_contact.contact_releases);
        let timing_ok = matches!((onsets, releases), (Some(a), Some(b)) if a <= 2 && b <= 2);
        let ok = el > reference && eb <= 1e-2 && ei <= 1e-2 && timing_ok;
        pass &= ok;
        parts.push(format!(
            "{name}: multiplier {el:.3e} vs static {reference:.3e}, boundary {eb:.3e}, interior {ei:.3e}, \
             onset shift {onsets:?}, release shift {releases:?}"
        ));
    }
    Outcome::new(pass, parts.join("; "))
}

/// Sum of sinusoids with distinct frequencies per coordinate; `[Q̈; Q]` spans
/// `2·dim` directions when four or more frequencies are used.
fn manufactured(dim: usize, freqs: &[f64], h: f64, k: usize, seed: u64) -> (Matrix, Matrix) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let amps: Vec<(f64, f64)> = (0..dim * freqs.len())
        .map(|_| (rng.random_range(0.5..1.5), rng.random_range(0.0..std::f64::consts::TAU)))
        .collect();
    let mut q = Matrix::zeros(dim, k);
    let mut qdd = Matrix::zeros(dim, k);
    for c in 0..k {
        let t = c as f64 * h;
        for j in 0..dim {
            for (l, w) in freqs.iter().enumerate() {
                let (a, phase) = amps[j * freqs.len() + l];
                let s = a * (w * t + phase).sin();
                q[(j, c)] += s;
                qdd[(j, c)] -= w * w * s;
            }
        }
    }
    (q, qdd)
}

fn chain10() -> (PartitionedSystem, ContactConstraints) {
    let masses: Vec<f64> = (0..10).map(|i| 1.0 + 0.1 * i as f64).collect();
    let springs: Vec<f64> = (0..10).map(|i| 100.0 + 10.0 * i as f64).collect();
    build_mass_spring_chain(&masses, &springs, &[0], &[0.5]).expect("chain")
}

fn criterion_3() -> Result<Outcome, String> {
    let (system, _) = chain10();
    let r = 3;
    let reference = intrusive_craig_bampton(&system, r).map_err(|e| e.to_string())?;
    let d = system.n_boundary() + r;
    let h = 1e-3;
    let k = 20_001;
    let freqs = [0.7, 1.3, 2.1, 2.9];

    // Interior subsystem data generated by the projected interior operators.
    let m_ii = reference.m_hat.view((1, 1), (r, r)).into_owned();
    let k_ii = reference.k_hat.view((1, 1), (r, r)).into_owned();
    let (eta, eta_dd) = manufactured(r, &freqs, h, k, 11);
    let f_i = &m_ii * &eta_dd + &k_ii * &eta;
    let interior = ReducedTrainingData::from_untrimmed(&eta, &f_i, h).map_err(|e| e.to_string())?;
    let eps = default_margin(&interior.qdd_hat, &interior.q_hat, &interior.f_hat).map_err(|e| e.to_string())?;
    let (m_ii_hat, k_ii_hat, _) =
        infer_interior(&interior.q_hat, &interior.qdd_hat, &interior.f_hat, eps).map_err(|e| e.to_string())?;

    // Global data generated by the full projected operators.
    let (q, qdd) = manufactured(d, &freqs, h, k, 12);
    let f = &reference.m_hat * &qdd + &reference.k_hat * &q;
    let training = ReducedTrainingData::from_untrimmed(&q, &f, h).map_err(|e| e.to_string())?;
    let mut stacked = Matrix::zeros(2 * d, training.q_hat.ncols());
    stacked.rows_mut(0, d).copy_from(&training.qdd_hat);
    stacked.rows_mut(d, d).copy_from(&training.q_hat);
    let sv: Vec<f64> = stacked.singular_values().iter().copied().collect();
    let rank = linalg::numerical_rank(&sv, stacked.nrows(), stacked.ncols());
    let (m_hat, k_hat, _) = infer_global(&training, (&m_ii_hat, &k_ii_hat), eps).map_err(|e| e.to_string())?;

    let em = relative_frobenius(&m_hat, &reference.m_hat);
    let ek = relative_frobenius(&k_hat, &reference.k_hat);
    let pass = rank >= 2 * d && em <= 1e-4 && ek <= 1e-4;
    Ok(Outcome::new(
        pass,
        format!("data rank {rank} (>= {}), mass {em:.3e}, stiffness {ek:.3e} (<= 1e-4)", 2 * d),
    ))
}

fn criterion_4() -> Result<Outcome, String> {
    let mut worst: f64 = 0.0;
    let beam = build_cantilever_beam(&BeamSpec::default()).map_err(|e| e.to_string())?.0;
    let chain = chain10().0;
    let chain_mid = build_mass_spring_chain(&[1.0, 2.0, 3.0, 4.0], &[5.0, 6.0, 7.0, 8.0], &[2, 0], &[0.1, 0.2])
        .map_err(|e| e.to_string())?
        .0;
    // Round trip through the Matrix Market loader.
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (s, c) = build_mass_spring_chain(&[1.0; 6], &[2.0; 6], &[5, 1], &[0.3, 0.3]).map_err(|e| e.to_string())?;
    let files = contact_rom::write_system(dir.path(), &s, &c).map_err(|e| e.to_string())?;
    let loaded = contact_rom::load_system(&files).map_err(|e| e.to_string())?.0;
    for system in [&beam, &chain, &chain_mid, &loaded] {
        let phi = static_modes(system).map_err(|e| e.to_string())?;
        let exact = system
            .k_ii()
            .lu()
            .solve(&(-system.k_ib()))
            .ok_or("singular K_II")?;
        worst = worst.max(relative_frobenius(&phi, &exact));
    }

    let phi_star = Matrix::from_row_slice(4, 2, &[0.5, -0.2, 1.0, 0.3, -0.7, 0.9, 0.25, 0.0]);
    let k = 60;
    let q_b = Matrix::from_fn(2, k, |i, j| ((i as f64 + 1.0) * 0.3 * j as f64).sin() + 0.2 * i as f64);
    let q1 = Matrix::from_fn(4, k, |i, j| ((i as f64 + 2.0) * 0.17 * j as f64).cos());
    let set = SnapshotSet {
        q_i: &phi_star * &q_b + &q1,
        q_b,
        f_b: Matrix::zeros(2, k),
        f_i: Matrix::zeros(4, k),
        q1,
        f1_i: Matrix::zeros(4, k),
        h: 0.01,
    };
    let lsq = coupling_full_lsq(&set).map_err(|e| e.to_string())?;
    let e_lsq = relative_frobenius(lsq.phi(), &phi_star);
    Ok(Outcome::new(
        worst <= 1e-12 && e_lsq <= 1e-10,
        format!("static modes {worst:.3e} (<= 1e-12), full-lsq recovery {e_lsq:.3e} (<= 1e-10)"),
    ))
}

/// Enumerates all active sets of `w = Aλ + B` and returns the feasible one.
fn brute_force_lcp(a: &Matrix, b: &Vector) -> Option<Vector> {
    let m = b.len();
    for mask in 0u32..(1 << m) {
        let active: Vec<usize> = (0..m).filter(|i| mask & (1 << i) != 0).collect();
        let mut lambda = Vector::zeros(m);
        if !active.is_empty() {
            let n = active.len();
            let a_ss = Matrix::from_fn(n, n, |i, j| a[(active[i], active[j])]);
            let b_s = Vector::from_fn(n, |i, _| -b[active[i]]);
            let Some(x) = a_ss.lu().solve(&b_s) else { continue };
            for (i, &idx) in active.iter().enumerate() {
                lambda[idx] = x[i];
            }
        }
        let w = a * &lambda + b;
        let tol = 1e-12 * (1.0 + b.amax());
        if lambda.iter().all(|v| *v >= -tol) && w.iter().all(|v| *v >= -tol) {
            return Some(lambda.map(|v| v.max(0.0)));
        }
    }
    None
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst_diff: f64 = 0.0;
    let mut worst_comp: f64 = 0.0;
    let mut rays = 0;
    let mut unsolved = 0;
    for _ in 0..1000 {
        let m = rng.random_range(1..=10);
        let g = Matrix::from_fn(m, m, |_, _| rng.random_range(-1.0..1.0));
        let a = &g * g.transpose() + Matrix::identity(m, m) * 0.05;
        let b = Vector::from_fn(m, |_, _| rng.random_range(-1.0..1.0));
        let problem = LcpProblem::new(a.clone(), b.clone()).expect("valid LCP");
        let sol = lemke_solve(&problem);
        match sol.status {
            LcpStatus::RayTermination => rays += 1,
            LcpStatus::IterationCap => unsolved += 1,
            LcpStatus::Solved => {}
        }
        let Some(oracle) = brute_force_lcp(&a, &b) else {
            unsolved += 1;
            continue;
        };
        worst_diff = worst_diff.max((&sol.lambda - &oracle).amax() / oracle.amax().max(1.0));
        worst_comp = worst_comp.max(sol.complementarity_residual(&problem));
    }
    Outcome::new(
        worst_diff <= 1e-9 && worst_comp <= 1e-8 && rays == 0 && unsolved == 0,
        format!(
            "max deviation {worst_diff:.3e} (<= 1e-9), complementarity {worst_comp:.3e} (<= 1e-8), \
             ray terminations {rays}, other failures {unsolved}"
        ),
    )
}

fn criterion_6(runs: &BeamRuns) -> Outcome {
    let mut pass = true;
    let mut worst_eig: f64 = f64::INFINITY;
    let mut worst_block: f64 = 0.0;
    let mut all_spd = true;
    for o in [&runs.static_modes, &runs.full_lsq, &runs.reduced_lsq] {
        let model = &o.inference.model;
        let eps = model.spd_margin;
        for m in [&model.m_hat, &model.k_hat] {
            let slack = min_eigenvalue(m) - (eps - 1e-8 * symmetric_norm2(m));
            worst_eig = worst_eig.min(slack);
            pass &= slack >= 0.0;
        }
        let nb = model.n_boundary();
        let r = model.rank();
        let mb = model.m_hat.view((nb, nb), (r, r)).into_owned();
        let kb = model.k_hat.view((nb, nb), (r, r)).into_owned();
        let e = relative_frobenius(&mb, &o.inference.interior_mass)
            .max(relative_frobenius(&kb, &o.inference.interior_stiffness));
        worst_block = worst_block.max(e);
        pass &= e <= 1e-6;
        let c_b = o.constraints.c_matrix();
        match assemble_lcp_matrix(&model.m_hat, &model.k_hat, c_b, 0.01) {
            Ok(a) => all_spd &= linalg::cholesky(&linalg::symmetrize(&a), "A").is_ok(),
            Err(_) => all_spd = false,
        }
    }
    Outcome::new(
        pass && all_spd,
        format!(
            "min eigenvalue slack {worst_eig:.3e} (>= 0), interior block deviation {worst_block:.3e} (<= 1e-6), \
             LCP matrices SPD: {all_spd}"
        ),
    )
}

fn criterion_7() -> Result<Outcome, String> {
    let w = std::f64::consts::TAU * 0.16;
    let fd_error = |h: f64| -> Result<f64, String> {
        let k = (20.0 / h).round() as usize + 1;
        let q = Matrix::from_fn(1, k, |_, c| (w * c as f64 * h).sin());
        let qdd = second_derivatives(&q, h).map_err(|e| e.to_string())?;
        Ok((0..qdd.ncols())
            .map(|c| (qdd[(0, c)] + w * w * (w * (c + 1) as f64 * h).sin()).abs())
            .fold(0.0, f64::max))
    };
    let e = [fd_error(0.1)?, fd_error(0.05)?, fd_error(0.025)?];
    let fd_ratios = [e[0] / e[1], e[1] / e[2]];

    // Two-mass chain released from rest; the modal solution is the oracle.
    let (system, _) =
        build_mass_spring_chain(&[1.0, 2.0], &[3.0, 1.0], &[0], &[1.0]).map_err(|e| e.to_string())?;
    let (omega2, modes) = generalized_eigen(system.stiffness(), system.mass()).map_err(|e| e.to_string())?;
    let q0 = Vector::from_vec(vec![0.1, -0.05]);
    let modal0 = modes.transpose() * system.mass() * &q0;
    let exact = |t: f64| -> Vector {
        let c = Vector::from_fn(2, |i, _| modal0[i] * (omega2[i].sqrt() * t).cos());
        &modes * c
    };
    let ie_error = |h: f64| -> Result<f64, String> {
        let steps = (5.0 / h).round() as usize;
        let traj = simulate_free(&system, &ForceSignal::zero(2), &q0, &Vector::zeros(2), h, steps)
            .map_err(|e| e.to_string())?;
        Ok((0..traj.len())
            .map(|c| (traj.states.column(c) - exact(traj.time(c))).amax())
            .fold(0.0, f64::max))
    };
    let g = [ie_error(0.004)?, ie_error(0.002)?, ie_error(0.001)?];
    let ie_ratios = [g[0] / g[1], g[1] / g[2]];
    let pass = fd_ratios.iter().all(|r| (r - 4.0).abs() <= 0.4) && ie_ratios.iter().all(|r| (r - 2.0).abs() <= 0.3);
    Ok(Outcome::new(
        pass,
        format!(
            "second-derivative ratios {:.3}, {:.3} (4 +/- 10%), implicit Euler ratios {:.3}, {:.3} (2 +/- 15%)",
            fd_ratios[0], fd_ratios[1], ie_ratios[0], ie_ratios[1]
        ),
    ))
}

fn criterion_8(runs: &BeamRuns) -> Result<Outcome, String> {
    let mut reports = vec![("beam", runs.static_modes.fom_contact.clone())];
    let (system, constraints) = chain10();
    let force = contact_rom::harmonic_force(400.0, 0.5, &[3, 5], system.n()).map_err(|e| e.to_string())?;
    let z = Vector::zeros(system.n());
    let run = solve_contact_fom(&system, &constraints, &force, &z, &z, 0.01, 2000).map_err(|e| e.to_string())?;
    reports.push(("chain", contact_diagnostics(&run.trajectory, &constraints).map_err(|e| e.to_string())?));
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, r) in &reports {
        let ok = r.passes(1e-9, 1e-8) && !r.contact_onsets.is_empty();
        pass &= ok;
        parts.push(format!(
            "{name}: gap violation {:.3e} m, negative multiplier {:.3e}, complementarity {:.3e}, {} contact phases",
            r.max_gap_violation,
            r.max_negative_multiplier,
            r.max_complementarity,
            r.contact_onsets.len()
        ));
    }
    Ok(Outcome::new(pass, parts.join("; ")))
}

fn main() -> ExitCode {
    let runs = beam_runs();
    let from_runs = |f: fn(&BeamRuns) -> Outcome| match &runs {
        Ok(r) => f(r),
        Err(e) => Outcome::new(false, format!("beam experiment failed: {e}")),
    };
    let flatten = |r: Result<Outcome, String>| r.unwrap_or_else(|e| Outcome::new(false, e));
    let outcomes = [
        ("beam-analogue reproduction", from_runs(criterion_1)),
        ("coupling-method ordering", from_runs(criterion_2)),
        ("intrusive-oracle equivalence", flatten(criterion_3())),
        ("coupling exactness", flatten(criterion_4())),
        ("LCP solver oracle", criterion_5()),
        ("SPD and equality constraints", from_runs(criterion_6)),
        ("numerical consistency", flatten(criterion_7())),
        (
            "full-order contact reference",
            match &runs {
                Ok(r) => flatten(criterion_8(r)),
                Err(e) => Outcome::new(false, format!("beam experiment failed: {e}")),
            },
        ),
    ];
    let mut failed = 0;
    for (i, (name, o)) in outcomes.iter().enumerate() {
        println!("criterion {} [{name}]: {} | {}", i + 1, if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.pass);
    }
    println!("acceptance: {} of {} criteria pass", outcomes.len() - failed, outcomes.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
