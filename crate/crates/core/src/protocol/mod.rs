//! Star-network protocols: client state, event triggers, synchronization
//! procedures and the round-robin interaction loop.

mod approx;
mod exact;
mod ledger;

pub use approx::{ApproxClient, ApproxDisKernelUcb, DictionarySampling};
pub use exact::{DisKernelUcb, ExactClient};
pub use ledger::{CommLedger, Direction, PayloadKind, SyncMessage};

use crate::env::{CandidateSet, Environment};
use crate::error::{Error, Result};

/// One interaction `(t, x_t, y_t)` as stored in a client's local log.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub t: usize,
    pub x: Vec<f64>,
    pub y: f64,
}

/// Parameters of the theoretical confidence widths.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheoryAlpha {
    pub theta_norm_bound: f64,
    pub noise_bound: f64,
    pub delta: f64,
    /// Bound on the maximum information gain, used by the approximated width.
    pub gamma_bound: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AlphaRule {
    Constant(f64),
    Theory(TheoryAlpha),
}

/// Summary of a synchronization, reported back to the driver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyncEvent {
    pub t: usize,
    pub scalars: u64,
    pub dictionary_size: Option<usize>,
}

/// A distributed bandit algorithm driven by the round-robin loop.
///
/// Clients are addressed by zero-based index; `t` is the one-based global
/// time step.
pub trait Policy {
    fn name(&self) -> &'static str;

    fn n_clients(&self) -> usize;

    /// Index of the chosen arm for `client` among `arms`.
    fn select(&self, client: usize, arms: &[Vec<f64>]) -> Result<usize>;

    /// Feeds the observed reward back, evaluates the acting client's
    /// trigger and runs a synchronization if it fires.
    fn update(&mut self, client: usize, t: usize, x: &[f64], y: f64) -> Result<Option<SyncEvent>>;

    fn ledger(&self) -> &CommLedger;
}

/// Argmax of `score` over `arms`; ties go to the lowest index.
pub(crate) fn argmax_by<F>(arms: &[Vec<f64>], mut score: F) -> Result<usize>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    let mut best: Option<(usize, f64)> = None;
    for (i, a) in arms.iter().enumerate() {
        let s = score(a)?;
        match best {
            Some((_, b)) if !(s > b) => {}
            _ => best = Some((i, s)),
        }
    }
    best.map(|(i, _)| i)
        .ok_or_else(|| Error::Exhausted("empty candidate set".into()))
}

pub(crate) fn check_client(client: usize, n: usize) -> Result<()> {
    if client < n {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "client index {client} out of range for {n} clients"
        )))
    }
}

/// Global time step `t = N (l - 1) + i` for one-based round `l` and client `i`.
pub fn global_time(n_clients: usize, round: usize, client: usize) -> usize {
    n_clients * (round - 1) + client
}

/// Result of a single client interaction.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub t: usize,
    pub choice: usize,
    pub chosen: Vec<f64>,
    pub reward: f64,
    pub regret: f64,
    pub sync: Option<SyncEvent>,
}

/// Environment plus policy: one owned simulation timeline.
pub struct World {
    env: Box<dyn Environment>,
    policy: Box<dyn Policy>,
}

impl World {
    pub fn new(env: Box<dyn Environment>, policy: Box<dyn Policy>) -> Self {
        Self { env, policy }
    }

    pub fn policy(&self) -> &dyn Policy {
        self.policy.as_ref()
    }

    pub fn env(&self) -> &dyn Environment {
        self.env.as_ref()
    }

    /// Client `client` (one-based) acts in round `round` (one-based).
    pub fn step_round_robin(&mut self, round: usize, client: usize) -> Result<StepOutcome> {
        let n = self.policy.n_clients();
        if round == 0 || client == 0 || client > n {
            return Err(Error::InvalidParameter(format!(
                "round {round} / client {client} out of range for {n} clients"
            )));
        }
        let t = global_time(n, round, client);
        let candidates: CandidateSet = self.env.draw_candidates()?;
        let choice = self.policy.select(client - 1, candidates.features())?;
        let reward = self.env.observe(&candidates, choice)?;
        let regret = candidates.regret(choice);
        let chosen = candidates.features()[choice].clone();
        let sync = self.policy.update(client - 1, t, &chosen, reward)?;
        Ok(StepOutcome {
            t,
            choice,
            chosen,
            reward,
            regret,
            sync,
        })
    }
}
