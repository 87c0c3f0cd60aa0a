//! Approximated distributed kernel UCB: clients share a Nystrom dictionary
//! sampled by ridge leverage scores and exchange embedded statistics only.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::ledger::{CommLedger, Direction, PayloadKind, SyncMessage};
use super::{argmax_by, check_client, AlphaRule, Observation, Policy, SyncEvent};
use crate::error::{Error, Result};
use crate::kernel::KernelSpec;
use crate::nystrom::{theory_alpha_approx, Dictionary, EmbeddedStats, NystromPosterior};
use crate::rls::rls_sample;

/// How each client picks its dictionary candidates at synchronization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DictionarySampling {
    /// Ridge leverage score sampling with oversampling factor `qbar`.
    Rls { qbar: f64 },
    /// Every local point enters the dictionary.
    All,
}

#[derive(Debug, Clone)]
struct Record {
    obs: Observation,
    // sigma~^2 under the frozen model of `epoch`
    frozen_var: f64,
    epoch: u64,
}

#[derive(Debug, Clone)]
pub struct ApproxClient {
    records: Vec<Record>,
    model: NystromPosterior,
    accumulator: f64,
    merged: usize,
    rng: ChaCha8Rng,
}

impl ApproxClient {
    pub fn local_len(&self) -> usize {
        self.records.len()
    }

    pub fn local_log(&self) -> impl Iterator<Item = &Observation> {
        self.records.iter().map(|r| &r.obs)
    }

    /// Current local model: global statistics plus points since the last sync.
    pub fn model(&self) -> &NystromPosterior {
        &self.model
    }

    /// Sum of `sigma~^2_{t_last}(x_s)` over the points since the last sync.
    pub fn accumulator(&self) -> f64 {
        self.accumulator
    }

    pub fn merged_len(&self) -> usize {
        self.merged
    }
}

#[derive(Debug, Clone)]
pub struct ApproxDisKernelUcb {
    dim: usize,
    kernel: KernelSpec,
    lambda: f64,
    threshold: f64,
    sampling: DictionarySampling,
    alpha: f64,
    clients: Vec<ApproxClient>,
    // model at t_last, against which the trigger and the RLS are evaluated
    frozen: NystromPosterior,
    epoch: u64,
    t_last: usize,
    ledger: CommLedger,
}

impl ApproxDisKernelUcb {
    /// `epsilon` only enters the theoretical width; `seed` feeds the
    /// per-client sampling streams.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        n_clients: usize,
        dim: usize,
        kernel: KernelSpec,
        lambda: f64,
        threshold: f64,
        alpha: AlphaRule,
        sampling: DictionarySampling,
        epsilon: f64,
        seed: u64,
    ) -> Result<Self> {
        if n_clients == 0 || dim == 0 {
            return Err(Error::InvalidParameter("N and d must be at least 1".into()));
        }
        if !(threshold > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "threshold must be positive, got {threshold}"
            )));
        }
        if let DictionarySampling::Rls { qbar } = sampling {
            if !(qbar > 0.0) {
                return Err(Error::InvalidParameter(format!("qbar must be positive, got {qbar}")));
            }
        }
        let alpha = match alpha {
            AlphaRule::Constant(a) => a,
            AlphaRule::Theory(th) => theory_alpha_approx(
                lambda,
                th.theta_norm_bound,
                th.noise_bound,
                th.delta,
                n_clients,
                epsilon,
                threshold,
                th.gamma_bound,
            )?,
        };
        let frozen = NystromPosterior::prior(kernel, lambda)?;
        let clients = (0..n_clients)
            .map(|i| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(1 + i as u64);
                ApproxClient {
                    records: Vec::new(),
                    model: frozen.clone(),
                    accumulator: 0.0,
                    merged: 0,
                    rng,
                }
            })
            .collect();
        Ok(Self {
            dim,
            kernel,
            lambda,
            threshold,
            sampling,
            alpha,
            clients,
            frozen,
            epoch: 0,
            t_last: 0,
            ledger: CommLedger::new(),
        })
    }

    pub fn client(&self, i: usize) -> &ApproxClient {
        &self.clients[i]
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn t_last(&self) -> usize {
        self.t_last
    }

    /// Model shared by all clients right after the last synchronization.
    pub fn global_model(&self) -> &NystromPosterior {
        &self.frozen
    }

    pub fn dictionary(&self) -> &Arc<Dictionary> {
        self.frozen.dictionary()
    }

    pub fn approx_trigger(&self, client: usize) -> bool {
        self.clients[client].accumulator > self.threshold
    }

    /// Recomputes `sigma~^2_{t_last}` for records cached under an older model.
    fn refresh_frozen_variances(&mut self) -> Result<()> {
        let epoch = self.epoch;
        let stale: Vec<(usize, usize)> = self
            .clients
            .iter()
            .enumerate()
            .flat_map(|(j, c)| {
                c.records
                    .iter()
                    .enumerate()
                    .filter(move |(_, r)| r.epoch != epoch)
                    .map(move |(p, _)| (j, p))
            })
            .collect();
        if stale.is_empty() {
            return Ok(());
        }
        let xs: Vec<&[f64]> = stale
            .iter()
            .map(|&(j, p)| self.clients[j].records[p].obs.x.as_slice())
            .collect();
        let vars = self.frozen.variance_batch(&xs)?;
        for (&(j, p), v) in stale.iter().zip(vars) {
            let r = &mut self.clients[j].records[p];
            r.frozen_var = v;
            r.epoch = epoch;
        }
        Ok(())
    }

    /// Dictionary update followed by the embedded-statistics exchange.
    pub fn sync_approx(&mut self, t: usize) -> Result<SyncEvent> {
        let mut msgs = Vec::with_capacity(4 * self.clients.len());

        self.refresh_frozen_variances()?;

        // each client samples from its own history under the frozen model
        let mut union: Vec<(usize, Vec<f64>)> = Vec::new();
        for (j, c) in self.clients.iter_mut().enumerate() {
            if c.records.is_empty() {
                continue;
            }
            let positions: Vec<usize> = (0..c.records.len()).collect();
            let picked = match self.sampling {
                DictionarySampling::All => positions,
                DictionarySampling::Rls { qbar } => {
                    let recs = &c.records;
                    rls_sample(&positions, |p| recs[p].frozen_var, qbar, &mut c.rng)
                }
            };
            msgs.push(SyncMessage::points(
                Direction::Up,
                PayloadKind::DictionaryPoints,
                j,
                picked.len(),
                self.dim,
            ));
            union.extend(picked.into_iter().map(|p| (c.records[p].obs.t, c.records[p].obs.x.clone())));
        }
        union.sort_by_key(|(t, _)| *t);
        let (indices, features): (Vec<usize>, Vec<Vec<f64>>) = union.into_iter().unzip();
        let dict = Arc::new(Dictionary::new(self.kernel, indices, features)?);
        let s = dict.size();
        for j in 0..self.clients.len() {
            msgs.push(SyncMessage::points(
                Direction::Down,
                PayloadKind::DictionaryPoints,
                j,
                s,
                self.dim,
            ));
        }

        // clients embed their full history in the new dictionary
        let mut total = EmbeddedStats::zeros(s);
        for (j, c) in self.clients.iter().enumerate() {
            let xs: Vec<&[f64]> = c.records.iter().map(|r| r.obs.x.as_slice()).collect();
            let ys: Vec<f64> = c.records.iter().map(|r| r.obs.y).collect();
            let stats = dict.embed_stats(&xs, &ys)?;
            msgs.push(SyncMessage::stats(Direction::Up, PayloadKind::EmbeddedStats, j, s));
            total.add_assign(&stats)?;
        }
        let global = NystromPosterior::new(dict, total, self.lambda)?;
        for (j, c) in self.clients.iter_mut().enumerate() {
            msgs.push(SyncMessage::stats(Direction::Down, PayloadKind::AggregatedStats, j, s));
            c.model = global.clone();
            c.accumulator = 0.0;
            c.merged = t;
        }
        self.frozen = global;
        self.epoch += 1;
        self.t_last = t;
        let scalars = self.ledger.record_sync(t, &msgs);
        Ok(SyncEvent {
            t,
            scalars,
            dictionary_size: Some(s),
        })
    }
}

impl Policy for ApproxDisKernelUcb {
    fn name(&self) -> &'static str {
        "approx_diskernel"
    }

    fn n_clients(&self) -> usize {
        self.clients.len()
    }

    fn select(&self, client: usize, arms: &[Vec<f64>]) -> Result<usize> {
        check_client(client, self.clients.len())?;
        let model = &self.clients[client].model;
        let alpha = self.alpha;
        argmax_by(arms, |x| {
            let (m, s) = model.mean_std(x)?;
            Ok(m + alpha * s)
        })
    }

    fn update(&mut self, client: usize, t: usize, x: &[f64], y: f64) -> Result<Option<SyncEvent>> {
        check_client(client, self.clients.len())?;
        crate::error::check_dim(self.dim, x.len())?;
        let v = self.frozen.variance(x)?;
        let epoch = self.epoch;
        let c = &mut self.clients[client];
        c.accumulator += v;
        c.records.push(Record {
            obs: Observation { t, x: x.to_vec(), y },
            frozen_var: v,
            epoch,
        });
        c.model.observe(x, y)?;
        c.merged += 1;
        if self.approx_trigger(client) {
            Ok(Some(self.sync_approx(t)?))
        } else {
            Ok(None)
        }
    }

    fn ledger(&self) -> &CommLedger {
        &self.ledger
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn build(n: usize, threshold: f64, sampling: DictionarySampling) -> ApproxDisKernelUcb {
        ApproxDisKernelUcb::new(
            n,
            1,
            KernelSpec::gaussian(1.0),
            1.0,
            threshold,
            AlphaRule::Constant(1.0),
            sampling,
            0.1,
            7,
        )
        .unwrap()
    }

    #[test]
    fn accumulator_uses_frozen_variance() {
        // at t = 0 the frozen model is the prior, variance k(x,x)/lambda = 1
        let mut w = build(1, 1.5, DictionarySampling::All);
        assert!(w.update(0, 1, &[0.0], 1.0).unwrap().is_none());
        assert_eq!(w.client(0).accumulator(), 1.0);
        // the local update would have shrunk the variance at 0, the trigger does not see it
        let ev = w.update(0, 2, &[0.0], 1.0).unwrap().expect("sync");
        assert_eq!(ev.dictionary_size, Some(2));
        assert_eq!(w.client(0).accumulator(), 0.0);
    }

    #[test]
    fn sync_traffic_formula() {
        let mut w = build(3, 1e9, DictionarySampling::All);
        let mut t = 0;
        for _ in 0..2 {
            for c in 0..3 {
                t += 1;
                w.update(c, t, &[t as f64 / 10.0], 0.0).unwrap();
            }
        }
        let ev = w.sync_approx(t).unwrap();
        let s = 6u64;
        let d1 = 2u64;
        let expected = s * d1 + 3 * s * d1 + 2 * 3 * (s * s + s + 1);
        assert_eq!(ev.scalars, expected);
        assert_eq!(w.dictionary().indices(), &[1, 2, 3, 4, 5, 6]);
    }

    #[test]
    fn all_clients_share_the_model_after_sync() {
        let mut w = build(2, 1e9, DictionarySampling::Rls { qbar: 2.0 });
        for t in 1..=6 {
            w.update((t - 1) % 2, t, &[t as f64 * 0.3 - 1.0], t as f64).unwrap();
        }
        w.sync_approx(6).unwrap();
        assert!(w.dictionary().size() >= 1);
        let q = [0.4];
        let a = w.client(0).model().mean_std(&q).unwrap();
        let b = w.client(1).model().mean_std(&q).unwrap();
        assert_eq!(a, b);
        assert_eq!(w.global_model().stats().count, 6);
    }

    #[test]
    fn sampling_is_seeded() {
        let run = || {
            let mut w = build(2, 1e9, DictionarySampling::Rls { qbar: 0.6 });
            for t in 1..=20 {
                w.update((t - 1) % 2, t, &[(t as f64).sin()], 0.0).unwrap();
            }
            w.sync_approx(20).unwrap();
            w.dictionary().indices().to_vec()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn infeasible_theory_width_is_rejected() {
        let th = super::super::TheoryAlpha {
            theta_norm_bound: 1.0,
            noise_bound: 1.0,
            delta: 0.1,
            gamma_bound: 1.0,
        };
        let r = ApproxDisKernelUcb::new(
            2,
            1,
            KernelSpec::gaussian(1.0),
            1.0,
            10.0,
            AlphaRule::Theory(th),
            DictionarySampling::All,
            0.3,
            0,
        );
        assert!(matches!(r, Err(Error::Config(_))));
    }
}
