use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::env::{CandidatePolicy, RewardFn};
use crate::error::{Error, Result};
use crate::kernel::KernelSpec;
use crate::nystrom::theory_alpha_approx;
use crate::rls::qbar_from_theory;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    DiskernelExact,
    ApproxDiskernel,
    Dislinucb,
    OneKernelucb,
    NKernelucb,
}

impl Algorithm {
    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::DiskernelExact => "diskernel_exact",
            Algorithm::ApproxDiskernel => "approx_diskernel",
            Algorithm::Dislinucb => "dislinucb",
            Algorithm::OneKernelucb => "one_kernelucb",
            Algorithm::NKernelucb => "n_kernelucb",
        }
    }

    pub fn default_threshold(self) -> f64 {
        match self {
            Algorithm::ApproxDiskernel => 5.0,
            _ => 20.0,
        }
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum AlphaConfig {
    GridConstant {
        value: f64,
    },
    Theory {
        theta_norm_bound: f64,
        noise_bound: f64,
        delta: f64,
        /// Required by the approximated protocol only.
        #[serde(default)]
        gamma_bound: Option<f64>,
    },
}

impl Default for AlphaConfig {
    fn default() -> Self {
        AlphaConfig::GridConstant { value: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ApproxConfig {
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_delta")]
    pub delta: f64,
    /// Overrides the theoretical oversampling factor.
    #[serde(default)]
    pub qbar: Option<f64>,
    /// Put every local point in the dictionary instead of sampling.
    #[serde(default)]
    pub sample_all: bool,
}

fn default_epsilon() -> f64 {
    0.25
}

fn default_delta() -> f64 {
    0.05
}

impl Default for ApproxConfig {
    fn default() -> Self {
        Self {
            epsilon: default_epsilon(),
            delta: default_delta(),
            qbar: None,
            sample_all: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EnvironmentConfig {
    Synthetic {
        #[serde(default = "default_reward_fn")]
        reward_fn: RewardFn,
        #[serde(default = "default_noise")]
        noise_std: f64,
        #[serde(default = "default_candidates")]
        candidate_size: usize,
    },
    ArmPool {
        path: PathBuf,
        #[serde(default = "default_candidate_policy")]
        policy: CandidatePolicy,
        #[serde(default = "default_noise")]
        noise_std: f64,
        #[serde(default = "default_candidates")]
        candidate_size: usize,
    },
}

fn default_reward_fn() -> RewardFn {
    RewardFn::F1
}

fn default_noise() -> f64 {
    0.1
}

fn default_candidates() -> usize {
    20
}

fn default_candidate_policy() -> CandidatePolicy {
    CandidatePolicy::UniformK
}

impl Default for EnvironmentConfig {
    fn default() -> Self {
        EnvironmentConfig::Synthetic {
            reward_fn: default_reward_fn(),
            noise_std: default_noise(),
            candidate_size: default_candidates(),
        }
    }
}

/// One experiment, read from a TOML document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub algorithm: Algorithm,
    pub n_clients: usize,
    /// Rounds per client; the horizon is `n_clients * rounds`.
    pub rounds: usize,
    pub dim: usize,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    /// Event-trigger threshold `D`; defaults to 20, or 5 for the approximated protocol.
    #[serde(default)]
    pub threshold: Option<f64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    /// Bound `L` on arm norms, used only by the sync-count bound.
    #[serde(default = "default_arm_norm")]
    pub arm_norm_bound: f64,
    #[serde(default)]
    pub kernel: KernelSpec,
    #[serde(default)]
    pub alpha: AlphaConfig,
    #[serde(default)]
    pub approx: ApproxConfig,
    #[serde(default)]
    pub environment: EnvironmentConfig,
}

fn default_lambda() -> f64 {
    1.0
}

fn default_replicates() -> usize {
    3
}

fn default_arm_norm() -> f64 {
    1.0
}

impl ExperimentConfig {
    /// A synthetic-environment config with every optional field at its default.
    pub fn synthetic(algorithm: Algorithm, n_clients: usize, rounds: usize, dim: usize) -> Self {
        Self {
            algorithm,
            n_clients,
            rounds,
            dim,
            lambda: default_lambda(),
            threshold: None,
            seed: 0,
            replicates: default_replicates(),
            arm_norm_bound: default_arm_norm(),
            kernel: KernelSpec::default(),
            alpha: AlphaConfig::default(),
            approx: ApproxConfig::default(),
            environment: EnvironmentConfig::default(),
        }
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads and validates a config file. A relative arm-pool path is
    /// resolved against the directory of the config file.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml_str(&text)?;
        if let EnvironmentConfig::ArmPool { path: pool, .. } = &mut cfg.environment {
            if pool.is_relative() {
                if let Some(dir) = path.parent() {
                    *pool = dir.join(&*pool);
                }
            }
        }
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn threshold(&self) -> f64 {
        self.threshold.unwrap_or_else(|| self.algorithm.default_threshold())
    }

    /// Oversampling factor used by the approximated protocol.
    pub fn qbar(&self) -> Result<f64> {
        match self.approx.qbar {
            Some(q) => Ok(q),
            None => qbar_from_theory(
                self.approx.epsilon,
                self.approx.delta,
                self.n_clients,
                self.rounds.max(1),
            )
            .map_err(|e| Error::Config(e.to_string())),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.n_clients == 0 {
            return bad("n_clients must be at least 1".into());
        }
        if self.dim == 0 {
            return bad("dim must be at least 1".into());
        }
        if self.replicates == 0 {
            return bad("replicates must be at least 1".into());
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return bad(format!("lambda must be positive, got {}", self.lambda));
        }
        let d = self.threshold();
        if !(d > 0.0 && d.is_finite()) {
            return bad(format!("threshold must be positive, got {d}"));
        }
        if !(self.arm_norm_bound > 0.0) {
            return bad("arm_norm_bound must be positive".into());
        }
        self.kernel.validate().map_err(|e| Error::Config(e.to_string()))?;
        match &self.alpha {
            AlphaConfig::GridConstant { value } => {
                if !(*value >= 0.0 && value.is_finite()) {
                    return bad(format!("alpha must be nonnegative, got {value}"));
                }
            }
            AlphaConfig::Theory {
                theta_norm_bound,
                noise_bound,
                delta,
                gamma_bound,
            } => {
                if !(*theta_norm_bound >= 0.0 && *noise_bound >= 0.0) {
                    return bad("theory bounds must be nonnegative".into());
                }
                if !(*delta > 0.0 && *delta < 1.0) {
                    return bad(format!("alpha.delta must lie in (0, 1), got {delta}"));
                }
                if self.algorithm == Algorithm::ApproxDiskernel {
                    let Some(g) = gamma_bound else {
                        return bad("theory alpha for approx_diskernel needs alpha.gamma_bound".into());
                    };
                    theory_alpha_approx(
                        self.lambda,
                        *theta_norm_bound,
                        *noise_bound,
                        *delta,
                        self.n_clients,
                        self.approx.epsilon,
                        d,
                        *g,
                    )
                    .map_err(|e| Error::Config(e.to_string()))?;
                }
            }
        }
        if self.algorithm == Algorithm::ApproxDiskernel && !self.approx.sample_all {
            let q = self.qbar()?;
            if !(q > 0.0 && q.is_finite()) {
                return bad(format!("qbar must be positive, got {q}"));
            }
        }
        let (noise, k) = match &self.environment {
            EnvironmentConfig::Synthetic {
                noise_std,
                candidate_size,
                ..
            } => (*noise_std, *candidate_size),
            EnvironmentConfig::ArmPool {
                noise_std,
                candidate_size,
                ..
            } => (*noise_std, *candidate_size),
        };
        if !(noise >= 0.0 && noise.is_finite()) {
            return bad(format!("noise_std must be nonnegative, got {noise}"));
        }
        if k == 0 {
            return bad("candidate_size must be at least 1".into());
        }
        Ok(())
    }
}
