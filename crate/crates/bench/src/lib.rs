//! Seeded workloads shared by the benchmarks.

use kbandit_core::harness::{Algorithm, ExperimentConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `n` points with coordinates uniform in `[-1, 1)^d`, scaled into the unit ball.
pub fn points(n: usize, d: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = 1.0 / (d as f64).sqrt();
    (0..n)
        .map(|_| (0..d).map(|_| scale * rng.random_range(-1.0..1.0)).collect())
        .collect()
}

pub fn rewards(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

/// A single-replicate synthetic experiment.
pub fn experiment(algorithm: Algorithm, n_clients: usize, rounds: usize, dim: usize) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::synthetic(algorithm, n_clients, rounds, dim);
    cfg.replicates = 1;
    cfg
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn workloads_are_seeded_and_bounded() {
        assert_eq!(points(5, 3, 1), points(5, 3, 1));
        assert!(points(50, 4, 2).iter().all(|x| x.iter().map(|v| v * v).sum::<f64>() <= 1.0));
        assert_eq!(rewards(7, 3).len(), 7);
        assert!(experiment(Algorithm::DiskernelExact, 2, 3, 2).validate().is_ok());
    }
}
