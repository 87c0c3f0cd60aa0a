use super::config::{AlphaConfig, Algorithm, EnvironmentConfig, ExperimentConfig};
use super::trace::{MetricsTrace, StepRecord, SyncRecord};
use crate::baselines::{DisLinUcb, NKernelUcb, OneKernelUcb};
use crate::env::{load_arm_pool, ArmPoolEnv, Environment, SyntheticEnv};
use crate::error::{Error, Result};
use crate::kernel::{information_gain, KernelSpec};
use crate::protocol::{
    AlphaRule, ApproxDisKernelUcb, DictionarySampling, DisKernelUcb, Policy, TheoryAlpha, World,
};

/// Outcome of one replicate.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub seed: u64,
    pub trace: MetricsTrace,
    /// Chosen arms in global time order.
    pub chosen: Vec<Vec<f64>>,
    /// Index of the chosen arm within each candidate set.
    pub choices: Vec<usize>,
}

impl RunOutput {
    pub fn gamma_hat(&self) -> f64 {
        self.trace.gamma_hat
    }

    pub fn sync_count(&self) -> usize {
        self.trace.sync_count()
    }
}

fn alpha_rule(alpha: &AlphaConfig) -> AlphaRule {
    match *alpha {
        AlphaConfig::GridConstant { value } => AlphaRule::Constant(value),
        AlphaConfig::Theory {
            theta_norm_bound,
            noise_bound,
            delta,
            gamma_bound,
        } => AlphaRule::Theory(TheoryAlpha {
            theta_norm_bound,
            noise_bound,
            delta,
            gamma_bound: gamma_bound.unwrap_or(0.0),
        }),
    }
}

pub fn build_policy(config: &ExperimentConfig, seed: u64) -> Result<Box<dyn Policy>> {
    let n = config.n_clients;
    let d = config.dim;
    let k = config.kernel;
    let lambda = config.lambda;
    let alpha = alpha_rule(&config.alpha);
    Ok(match config.algorithm {
        Algorithm::DiskernelExact => Box::new(DisKernelUcb::new(n, d, k, lambda, config.threshold(), alpha)?),
        Algorithm::ApproxDiskernel => {
            let sampling = if config.approx.sample_all {
                DictionarySampling::All
            } else {
                DictionarySampling::Rls { qbar: config.qbar()? }
            };
            Box::new(ApproxDisKernelUcb::new(
                n,
                d,
                k,
                lambda,
                config.threshold(),
                alpha,
                sampling,
                config.approx.epsilon,
                seed,
            )?)
        }
        Algorithm::Dislinucb => Box::new(DisLinUcb::new(n, d, lambda, config.threshold(), alpha)?),
        Algorithm::OneKernelucb => Box::new(OneKernelUcb::new(n, d, k, lambda, alpha)?),
        Algorithm::NKernelucb => Box::new(NKernelUcb::new(n, d, k, lambda, alpha)?),
    })
}

pub fn build_env(config: &ExperimentConfig, seed: u64) -> Result<Box<dyn Environment>> {
    Ok(match &config.environment {
        EnvironmentConfig::Synthetic {
            reward_fn,
            noise_std,
            candidate_size,
        } => Box::new(SyntheticEnv::new(config.dim, *reward_fn, *noise_std, *candidate_size, seed)?),
        EnvironmentConfig::ArmPool {
            path,
            policy,
            noise_std,
            candidate_size,
        } => {
            let pool = load_arm_pool(path)?;
            if pool.dim() != config.dim {
                return Err(Error::Config(format!(
                    "arm pool {} has {} features, config dim is {}",
                    path.display(),
                    pool.dim(),
                    config.dim
                )));
            }
            Box::new(ArmPoolEnv::new(pool, *policy, *candidate_size, *noise_std, seed)?)
        }
    })
}

/// Kernel under which the information gain of a run is measured.
fn gain_kernel(config: &ExperimentConfig) -> KernelSpec {
    match config.algorithm {
        Algorithm::Dislinucb => KernelSpec::linear(),
        _ => config.kernel,
    }
}

/// Runs one replicate with the given seed. The seed drives the environment
/// stream and, for the approximated protocol, the clients' sampling streams.
pub fn run_replicate(config: &ExperimentConfig, seed: u64) -> Result<RunOutput> {
    config.validate()?;
    let env = build_env(config, seed)?;
    let policy = build_policy(config, seed)?;
    let mut world = World::new(env, policy);
    let n = config.n_clients;
    let horizon = n * config.rounds;
    let mut trace = MetricsTrace {
        algorithm: config.algorithm.as_str().to_string(),
        steps: Vec::with_capacity(horizon),
        ..MetricsTrace::default()
    };
    let mut chosen = Vec::with_capacity(horizon);
    let mut choices = Vec::with_capacity(horizon);
    let mut cum_regret = 0.0;
    for round in 1..=config.rounds {
        for client in 1..=n {
            let out = world.step_round_robin(round, client)?;
            cum_regret += out.regret;
            trace.steps.push(StepRecord {
                t: out.t,
                regret: out.regret,
                cum_regret,
                cum_comm_scalars: world.policy().ledger().cumulative_scalars(),
            });
            if let Some(ev) = out.sync {
                trace.syncs.push(SyncRecord {
                    t: ev.t,
                    scalars: ev.scalars,
                    dictionary_size: ev.dictionary_size,
                });
            }
            choices.push(out.choice);
            chosen.push(out.chosen);
        }
    }
    trace.gamma_hat = information_gain(&gain_kernel(config), config.lambda, &chosen)?;
    log::info!(
        "{} seed {seed}: regret {:.4}, scalars {}, syncs {}",
        trace.algorithm,
        trace.cumulative_regret(),
        trace.cumulative_scalars(),
        trace.sync_count()
    );
    Ok(RunOutput {
        seed,
        trace,
        chosen,
        choices,
    })
}

/// All replicates, seeded `seed, seed + 1, ...`.
pub fn run(config: &ExperimentConfig) -> Result<Vec<RunOutput>> {
    config.validate()?;
    (0..config.replicates as u64)
        .map(|r| run_replicate(config, config.seed.wrapping_add(r)))
        .collect()
}
