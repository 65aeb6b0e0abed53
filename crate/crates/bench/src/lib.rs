//! Deterministic fixtures shared by the benchmarks.

use contact_rom::experiment::{run_training, ExperimentConfig};
use contact_rom::{
    harmonic_force, infer_reduced_model, static_modes, ForceSignal, LcpProblem, Matrix, PartitionedSystem,
    SpdLsqProblem, Vector,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random SPD LCP of size `m`: `A = GGᵀ + 0.1 I`, entries of `G` and `b` uniform in [-1, 1].
pub fn random_lcp(m: usize, seed: u64) -> LcpProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = Matrix::from_fn(m, m, |_, _| rng.random_range(-1.0..1.0));
    let b = Vector::from_fn(m, |_, _| rng.random_range(-1.0..1.0));
    LcpProblem::new(&g * g.transpose() + Matrix::identity(m, m) * 0.1, b).expect("valid LCP")
}

/// Global SPD least-squares problem from the default beam training data.
pub fn beam_spd_lsq() -> SpdLsqProblem {
    let config = ExperimentConfig::beam_default();
    let (system, _) = config.model.build().expect("beam");
    let training = run_training(&system, &config).expect("training");
    let modes = static_modes(&system).expect("static modes");
    let result = infer_reduced_model(&training.snapshots, &config.inference_settings(), Some(&modes)).expect("inference");
    let data = &result.training;
    SpdLsqProblem::from_snapshots(&data.qdd_hat, &data.q_hat, &data.f_hat, result.model.spd_margin).expect("problem")
}

/// Default beam with its training load.
pub fn beam_free_run() -> (PartitionedSystem, ForceSignal) {
    let config = ExperimentConfig::beam_default();
    let (system, _) = config.model.build().expect("beam");
    let force = config.train.signal(&system).expect("load");
    (system, force)
}

/// Chain of `n` unit masses with one contact node, loaded at the free end.
pub fn chain_free_run(n: usize) -> (PartitionedSystem, ForceSignal) {
    let (system, _) =
        contact_rom::build_mass_spring_chain(&vec![1.0; n], &vec![50.0; n], &[0], &[0.5]).expect("chain");
    let force = harmonic_force(10.0, 0.3, &[n - 1], n).expect("load");
    (system, force)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_are_deterministic() {
        assert_eq!(random_lcp(5, 1).a(), random_lcp(5, 1).a());
        let (system, _) = chain_free_run(8);
        assert_eq!(system.n(), 8);
    }
}
