//! Distributed kernelized contextual bandits.
//!
//! `N` clients and one coordinating server run kernel UCB over a shared
//! unknown reward function. Two protocols are provided:
//!
//! * [`protocol::DisKernelUcb`] keeps the exact dual-form posterior on every
//!   client and ships raw `(x, y)` pairs when a log-determinant trigger fires.
//! * [`protocol::ApproxDisKernelUcb`] agrees on a shared Nystrom dictionary,
//!   sampled with ridge leverage scores, and ships only embedded statistics
//!   when a variance-sum trigger fires.
//!
//! The baselines in [`baselines`] share the same accounting so that regret
//! and communication (counted in transferred scalars) are directly
//! comparable. [`harness`] drives whole experiments and writes traces.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod env;
mod error;
pub mod exact;
pub mod harness;
pub mod kernel;
pub mod nystrom;
pub mod protocol;
pub mod rls;

pub use error::{Error, Result};

pub use baselines::{DisLinUcb, LinearStats, NKernelUcb, OneKernelUcb};
pub use env::{ArmPoolEnv, CandidateSet, Environment, RewardFn, SyntheticEnv};
pub use exact::{theory_alpha_exact, ExactPosterior};
pub use harness::{ExperimentConfig, MetricsTrace, RunOutput};
pub use kernel::{
    information_gain, kernel_eval, kernel_matrix, logdet_ratio, spd_factor, KernelFamily,
    KernelSpec, SymFactor,
};
pub use nystrom::{
    approx_mean_var, epsilon_accuracy, theory_alpha_approx, Dictionary, EmbeddedStats,
    NystromPosterior,
};
pub use protocol::{
    AlphaRule, ApproxDisKernelUcb, CommLedger, DictionarySampling, DisKernelUcb, Policy,
    SyncMessage, TheoryAlpha, World,
};
pub use rls::{qbar_from_theory, rls_sample, RlsConfig};
