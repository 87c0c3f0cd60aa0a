//! Reward-generating environments.
//!
//! Algorithms only ever see [`CandidateSet::features`]; true means stay
//! private to the candidate set and are used for regret only.

mod arm_pool;
mod synthetic;

pub use arm_pool::{load_arm_pool, write_arm_pool, ArmPool, ArmPoolEnv, CandidatePolicy};
pub use synthetic::{RewardFn, SyntheticEnv};

use crate::error::Result;

/// The arms offered at one time step together with their hidden means.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSet {
    features: Vec<Vec<f64>>,
    means: Vec<f64>,
}

impl CandidateSet {
    pub(crate) fn new(features: Vec<Vec<f64>>, means: Vec<f64>) -> Self {
        debug_assert_eq!(features.len(), means.len());
        Self { features, means }
    }

    pub fn features(&self) -> &[Vec<f64>] {
        &self.features
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn best_mean(&self) -> f64 {
        self.means.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// `max_a f(a) - f(chosen)`, never negative.
    pub fn regret(&self, choice: usize) -> f64 {
        (self.best_mean() - self.means[choice]).max(0.0)
    }

    pub(crate) fn mean(&self, choice: usize) -> f64 {
        self.means[choice]
    }
}

pub trait Environment {
    fn dim(&self) -> usize;

    fn draw_candidates(&mut self) -> Result<CandidateSet>;

    /// Noisy reward of arm `choice` from `candidates`.
    fn observe(&mut self, candidates: &CandidateSet, choice: usize) -> Result<f64>;
}
