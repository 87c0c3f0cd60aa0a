//! Exact distributed kernel UCB: raw-data synchronization triggered by the
//! growth of `log det(I + K/lambda)` on the acting client.

use super::ledger::{CommLedger, Direction, PayloadKind, SyncMessage};
use super::{argmax_by, check_client, AlphaRule, Observation, Policy, SyncEvent};
use crate::error::{Error, Result};
use crate::exact::{theory_alpha_exact, ExactPosterior};
use crate::kernel::KernelSpec;

#[derive(Debug, Clone)]
pub struct ExactClient {
    local: Vec<Observation>,
    posterior: ExactPosterior,
    buffer: Vec<Observation>,
    merged: usize,
    logdet_at_sync: f64,
}

impl ExactClient {
    /// `N_t(i)`: the client's own interactions.
    pub fn local_log(&self) -> &[Observation] {
        &self.local
    }

    /// Posterior over `D_t(i)`.
    pub fn posterior(&self) -> &ExactPosterior {
        &self.posterior
    }

    /// `Delta D_t(i)`: points collected since the last synchronization.
    pub fn upload_buffer(&self) -> &[Observation] {
        &self.buffer
    }

    /// `|D_t(i)|`.
    pub fn merged_len(&self) -> usize {
        self.merged
    }

    /// `|Delta| * log(det(I + K_D/lambda) / det(I + K_{D \ Delta}/lambda))`.
    pub fn trigger_value(&self) -> f64 {
        if self.buffer.is_empty() {
            return 0.0;
        }
        let ratio = (self.posterior.logdet() - self.logdet_at_sync).max(0.0);
        self.buffer.len() as f64 * ratio
    }
}

#[derive(Debug, Clone)]
pub struct DisKernelUcb {
    dim: usize,
    threshold: f64,
    alpha: AlphaRule,
    clients: Vec<ExactClient>,
    // D = [t_last], the state every client receives at synchronization
    server: ExactPosterior,
    t_last: usize,
    ledger: CommLedger,
}

impl DisKernelUcb {
    pub fn new(
        n_clients: usize,
        dim: usize,
        kernel: KernelSpec,
        lambda: f64,
        threshold: f64,
        alpha: AlphaRule,
    ) -> Result<Self> {
        if n_clients == 0 || dim == 0 {
            return Err(Error::InvalidParameter("N and d must be at least 1".into()));
        }
        if !(threshold > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "threshold must be positive, got {threshold}"
            )));
        }
        let server = ExactPosterior::new(kernel, lambda)?;
        let client = ExactClient {
            local: Vec::new(),
            posterior: server.clone(),
            buffer: Vec::new(),
            merged: 0,
            logdet_at_sync: 0.0,
        };
        Ok(Self {
            dim,
            threshold,
            alpha,
            clients: vec![client; n_clients],
            server,
            t_last: 0,
            ledger: CommLedger::new(),
        })
    }

    pub fn client(&self, i: usize) -> &ExactClient {
        &self.clients[i]
    }

    pub fn t_last(&self) -> usize {
        self.t_last
    }

    pub fn exact_trigger(&self, client: usize) -> bool {
        let c = &self.clients[client];
        !c.buffer.is_empty() && c.trigger_value() > self.threshold
    }

    fn alpha_for(&self, client: usize) -> Result<f64> {
        match self.alpha {
            AlphaRule::Constant(a) => Ok(a),
            AlphaRule::Theory(th) => {
                let p = &self.clients[client].posterior;
                theory_alpha_exact(
                    p.lambda(),
                    th.theta_norm_bound,
                    th.noise_bound,
                    th.delta,
                    self.clients.len(),
                    p.logdet(),
                )
            }
        }
    }

    /// Raw-data synchronization at time `t`: every client uploads its
    /// buffer, the server merges in time order and each client downloads
    /// exactly the points it does not hold yet.
    pub fn sync_exact(&mut self, t: usize) -> Result<SyncEvent> {
        let mut msgs = Vec::with_capacity(2 * self.clients.len());
        let mut incoming: Vec<Observation> = Vec::new();
        for (j, c) in self.clients.iter_mut().enumerate() {
            if !c.buffer.is_empty() {
                msgs.push(SyncMessage::points(
                    Direction::Up,
                    PayloadKind::RawPoints,
                    j,
                    c.buffer.len(),
                    self.dim,
                ));
            }
            incoming.append(&mut c.buffer);
        }
        incoming.sort_by_key(|o| o.t);
        for o in &incoming {
            self.server.append(&o.x, o.y)?;
        }
        debug_assert_eq!(self.server.len(), t);

        let logdet = self.server.logdet();
        for (j, c) in self.clients.iter_mut().enumerate() {
            let missing = t - c.merged;
            if missing > 0 {
                msgs.push(SyncMessage::points(
                    Direction::Down,
                    PayloadKind::RawPoints,
                    j,
                    missing,
                    self.dim,
                ));
            }
            c.posterior = self.server.clone();
            c.merged = t;
            c.logdet_at_sync = logdet;
        }
        self.t_last = t;
        let scalars = self.ledger.record_sync(t, &msgs);
        Ok(SyncEvent {
            t,
            scalars,
            dictionary_size: None,
        })
    }
}

impl Policy for DisKernelUcb {
    fn name(&self) -> &'static str {
        "diskernel_exact"
    }

    fn n_clients(&self) -> usize {
        self.clients.len()
    }

    fn select(&self, client: usize, arms: &[Vec<f64>]) -> Result<usize> {
        check_client(client, self.clients.len())?;
        let alpha = self.alpha_for(client)?;
        let p = &self.clients[client].posterior;
        argmax_by(arms, |x| p.ucb_score(x, alpha))
    }

    fn update(&mut self, client: usize, t: usize, x: &[f64], y: f64) -> Result<Option<SyncEvent>> {
        check_client(client, self.clients.len())?;
        let obs = Observation {
            t,
            x: x.to_vec(),
            y,
        };
        let c = &mut self.clients[client];
        c.posterior.append(x, y)?;
        c.local.push(obs.clone());
        c.buffer.push(obs);
        c.merged += 1;
        if self.exact_trigger(client) {
            Ok(Some(self.sync_exact(t)?))
        } else {
            Ok(None)
        }
    }

    fn ledger(&self) -> &CommLedger {
        &self.ledger
    }
}
