use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{CandidateSet, Environment};
use crate::error::{check_dim, Error, Result};
use crate::kernel::dot;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardFn {
    /// `cos(3 x^T theta)`
    F1,
    /// `u^3 - 3u^2 - u + 3` with `u = x^T theta`
    F2,
}

impl RewardFn {
    pub fn eval(self, x: &[f64], theta: &[f64]) -> Result<f64> {
        check_dim(theta.len(), x.len())?;
        let u = dot(x, theta);
        Ok(match self {
            RewardFn::F1 => (3.0 * u).cos(),
            RewardFn::F2 => u * u * u - 3.0 * u * u - u + 3.0,
        })
    }
}

/// Uniform draw from the unit ball: a normalized Gaussian direction scaled
/// by `U^{1/d}`.
pub(crate) fn unit_ball<R: Rng + ?Sized>(rng: &mut R, d: usize) -> Vec<f64> {
    loop {
        let g: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let norm = dot(&g, &g).sqrt();
        if norm > 0.0 {
            let u: f64 = rng.random();
            let r = u.powf(1.0 / d as f64);
            return g.into_iter().map(|v| v * r / norm).collect();
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticEnv {
    theta: Vec<f64>,
    reward_fn: RewardFn,
    noise_std: f64,
    candidate_size: usize,
    rng: ChaCha8Rng,
}

impl SyntheticEnv {
    /// `theta_star` is the first draw of the environment stream.
    pub fn new(d: usize, reward_fn: RewardFn, noise_std: f64, candidate_size: usize, seed: u64) -> Result<Self> {
        if d == 0 || candidate_size == 0 {
            return Err(Error::InvalidParameter(
                "dimension and candidate size must be at least 1".into(),
            ));
        }
        if !(noise_std >= 0.0 && noise_std.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "noise std must be finite and nonnegative, got {noise_std}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let theta = unit_ball(&mut rng, d);
        Ok(Self {
            theta,
            reward_fn,
            noise_std,
            candidate_size,
            rng,
        })
    }

    pub fn theta_star(&self) -> &[f64] {
        &self.theta
    }

    pub fn reward_fn(&self) -> RewardFn {
        self.reward_fn
    }

    pub fn mean_reward(&self, x: &[f64]) -> Result<f64> {
        self.reward_fn.eval(x, &self.theta)
    }

    /// `f(x) + noise` for an arbitrary arm.
    pub fn observe_x(&mut self, x: &[f64]) -> Result<f64> {
        let f = self.mean_reward(x)?;
        let eta: f64 = self.rng.sample(StandardNormal);
        Ok(f + self.noise_std * eta)
    }
}

impl Environment for SyntheticEnv {
    fn dim(&self) -> usize {
        self.theta.len()
    }

    fn draw_candidates(&mut self) -> Result<CandidateSet> {
        let d = self.theta.len();
        let mut features = Vec::with_capacity(self.candidate_size);
        let mut means = Vec::with_capacity(self.candidate_size);
        for _ in 0..self.candidate_size {
            let x = unit_ball(&mut self.rng, d);
            means.push(self.reward_fn.eval(&x, &self.theta)?);
            features.push(x);
        }
        Ok(CandidateSet::new(features, means))
    }

    fn observe(&mut self, candidates: &CandidateSet, choice: usize) -> Result<f64> {
        if choice >= candidates.len() {
            return Err(Error::InvalidParameter(format!(
                "arm {choice} out of range for {} candidates",
                candidates.len()
            )));
        }
        let eta: f64 = self.rng.sample(StandardNormal);
        Ok(candidates.mean(choice) + self.noise_std * eta)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reward_function_examples() {
        let theta = [0.0, 1.0];
        assert_eq!(RewardFn::F1.eval(&[1.0, 0.0], &theta).unwrap(), 1.0);
        assert_eq!(RewardFn::F2.eval(&[1.0, 0.0], &theta).unwrap(), 3.0);
        assert_eq!(RewardFn::F2.eval(&[0.0, 1.0], &theta).unwrap(), 0.0);
        assert!(RewardFn::F1.eval(&[1.0], &theta).is_err());
    }

    #[test]
    fn candidates_live_in_the_ball() {
        let mut env = SyntheticEnv::new(5, RewardFn::F1, 0.1, 20, 3).unwrap();
        assert!(dot(env.theta_star(), env.theta_star()) <= 1.0);
        for _ in 0..50 {
            let c = env.draw_candidates().unwrap();
            assert_eq!(c.len(), 20);
            for x in c.features() {
                assert!(dot(x, x) <= 1.0 + 1e-12);
            }
            for i in 0..c.len() {
                assert!(c.regret(i) >= 0.0);
            }
        }
    }

    #[test]
    fn zero_noise_is_exact() {
        let mut env = SyntheticEnv::new(3, RewardFn::F2, 0.0, 4, 9).unwrap();
        let c = env.draw_candidates().unwrap();
        let y = env.observe(&c, 2).unwrap();
        assert_eq!(y, env.mean_reward(&c.features()[2]).unwrap());
    }

    #[test]
    fn same_seed_same_stream() {
        let mut a = SyntheticEnv::new(4, RewardFn::F1, 0.1, 5, 11).unwrap();
        let mut b = SyntheticEnv::new(4, RewardFn::F1, 0.1, 5, 11).unwrap();
        for _ in 0..3 {
            let ca = a.draw_candidates().unwrap();
            let cb = b.draw_candidates().unwrap();
            assert_eq!(ca, cb);
            assert_eq!(a.observe(&ca, 0).unwrap(), b.observe(&cb, 0).unwrap());
        }
    }

    #[test]
    fn stream_does_not_depend_on_choice() {
        let mut a = SyntheticEnv::new(4, RewardFn::F1, 0.1, 5, 11).unwrap();
        let mut b = SyntheticEnv::new(4, RewardFn::F1, 0.1, 5, 11).unwrap();
        let ca = a.draw_candidates().unwrap();
        let cb = b.draw_candidates().unwrap();
        a.observe(&ca, 0).unwrap();
        b.observe(&cb, 4).unwrap();
        assert_eq!(a.draw_candidates().unwrap(), b.draw_candidates().unwrap());
    }
}
