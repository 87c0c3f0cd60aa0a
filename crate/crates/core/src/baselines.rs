//! Comparison algorithms: distributed linear UCB with event-triggered
//! statistic sharing, a kernel UCB that shares every point immediately and
//! a kernel UCB per client with no communication at all.

use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, Error, Result};
use crate::exact::{theory_alpha_exact, ExactPosterior};
use crate::kernel::{dot, spd_factor, KernelSpec, SymFactor};
use crate::protocol::{
    argmax_by, check_client, AlphaRule, CommLedger, Direction, PayloadKind, Policy, SyncEvent,
    SyncMessage,
};

/// Linear sufficient statistics `(A, b, count)`.
///
/// A prior instance carries `A = lambda I`; a delta instance starts from zero.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearStats {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub count: usize,
}

impl LinearStats {
    pub fn zeros(dim: usize) -> Self {
        Self {
            a: DMatrix::zeros(dim, dim),
            b: DVector::zeros(dim),
            count: 0,
        }
    }

    pub fn prior(dim: usize, lambda: f64) -> Self {
        Self {
            a: DMatrix::identity(dim, dim) * lambda,
            b: DVector::zeros(dim),
            count: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.b.len()
    }

    pub fn accumulate(&mut self, x: &[f64], y: f64) -> Result<()> {
        check_dim(self.dim(), x.len())?;
        let xv = DVector::from_column_slice(x);
        self.a.ger(1.0, &xv, &xv, 1.0);
        self.b.axpy(y, &xv, 1.0);
        self.count += 1;
        Ok(())
    }

    pub fn add_assign(&mut self, other: &LinearStats) -> Result<()> {
        check_dim(self.dim(), other.dim())?;
        self.a += &other.a;
        self.b += &other.b;
        self.count += other.count;
        Ok(())
    }
}

fn alpha_value(rule: &AlphaRule, lambda: f64, n_clients: usize, logdet: f64) -> Result<f64> {
    match rule {
        AlphaRule::Constant(a) => Ok(*a),
        AlphaRule::Theory(th) => theory_alpha_exact(
            lambda,
            th.theta_norm_bound,
            th.noise_bound,
            th.delta,
            n_clients,
            logdet,
        ),
    }
}

fn check_common(n_clients: usize, dim: usize) -> Result<()> {
    if n_clients == 0 || dim == 0 {
        return Err(Error::InvalidParameter("N and d must be at least 1".into()));
    }
    Ok(())
}

#[derive(Debug, Clone)]
struct LinClient {
    delta: LinearStats,
    // factor of A = global + delta
    factor: SymFactor,
    weights: Vec<f64>,
    logdet_at_sync: f64,
}

impl LinClient {
    fn from_global(global: &LinearStats) -> Result<Self> {
        let factor = spd_factor(&global.a, 0.0)?;
        let weights = factor.solve(global.b.as_slice());
        let logdet_at_sync = factor.logdet();
        Ok(Self {
            delta: LinearStats::zeros(global.dim()),
            factor,
            weights,
            logdet_at_sync,
        })
    }
}

#[derive(Debug, Clone)]
pub struct DisLinUcb {
    dim: usize,
    lambda: f64,
    threshold: f64,
    alpha: AlphaRule,
    global: LinearStats,
    clients: Vec<LinClient>,
    ledger: CommLedger,
}

impl DisLinUcb {
    pub fn new(n_clients: usize, dim: usize, lambda: f64, threshold: f64, alpha: AlphaRule) -> Result<Self> {
        check_common(n_clients, dim)?;
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidParameter(format!("lambda must be positive, got {lambda}")));
        }
        if !(threshold > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "threshold must be positive, got {threshold}"
            )));
        }
        let global = LinearStats::prior(dim, lambda);
        let client = LinClient::from_global(&global)?;
        Ok(Self {
            dim,
            lambda,
            threshold,
            alpha,
            global,
            clients: vec![client; n_clients],
            ledger: CommLedger::new(),
        })
    }

    /// `A` and `b` currently held by `client`.
    pub fn client_stats(&self, client: usize) -> LinearStats {
        let mut s = self.global.clone();
        s.add_assign(&self.clients[client].delta).expect("same dimension");
        s
    }

    pub fn global_stats(&self) -> &LinearStats {
        &self.global
    }

    /// `(x^T A^{-1} b, sqrt(x^T A^{-1} x))` for `client`.
    pub fn mean_std(&self, client: usize, x: &[f64]) -> Result<(f64, f64)> {
        check_client(client, self.clients.len())?;
        check_dim(self.dim, x.len())?;
        let c = &self.clients[client];
        let mut u = x.to_vec();
        c.factor.forward_solve(&mut u);
        Ok((dot(x, &c.weights), dot(&u, &u).sqrt()))
    }

    pub fn trigger_value(&self, client: usize) -> f64 {
        let c = &self.clients[client];
        c.delta.count as f64 * (c.factor.logdet() - c.logdet_at_sync).max(0.0)
    }

    pub fn sync(&mut self, t: usize) -> Result<SyncEvent> {
        let n = self.clients.len();
        let mut msgs = Vec::with_capacity(2 * n);
        for j in 0..n {
            msgs.push(SyncMessage::linear_stats(Direction::Up, j, self.dim));
            let delta = self.clients[j].delta.clone();
            self.global.add_assign(&delta)?;
        }
        let fresh = LinClient::from_global(&self.global)?;
        for j in 0..n {
            msgs.push(SyncMessage::linear_stats(Direction::Down, j, self.dim));
            self.clients[j] = fresh.clone();
        }
        let scalars = self.ledger.record_sync(t, &msgs);
        Ok(SyncEvent {
            t,
            scalars,
            dictionary_size: None,
        })
    }
}

impl Policy for DisLinUcb {
    fn name(&self) -> &'static str {
        "dislinucb"
    }

    fn n_clients(&self) -> usize {
        self.clients.len()
    }

    fn select(&self, client: usize, arms: &[Vec<f64>]) -> Result<usize> {
        check_client(client, self.clients.len())?;
        let logdet = self.clients[client].factor.logdet() - self.dim as f64 * self.lambda.ln();
        let alpha = alpha_value(&self.alpha, self.lambda, self.clients.len(), logdet)?;
        argmax_by(arms, |x| {
            let (m, s) = self.mean_std(client, x)?;
            Ok(m + alpha * s)
        })
    }

    fn update(&mut self, client: usize, t: usize, x: &[f64], y: f64) -> Result<Option<SyncEvent>> {
        check_client(client, self.clients.len())?;
        check_dim(self.dim, x.len())?;
        let c = &mut self.clients[client];
        c.delta.accumulate(x, y)?;
        c.factor.rank_one_update(x);
        let mut b = self.global.b.clone();
        b += &c.delta.b;
        c.weights = c.factor.solve(b.as_slice());
        if self.trigger_value(client) > self.threshold {
            Ok(Some(self.sync(t)?))
        } else {
            Ok(None)
        }
    }

    fn ledger(&self) -> &CommLedger {
        &self.ledger
    }
}

/// Kernel UCB over the pooled data of all clients, shared after every step.
#[derive(Debug, Clone)]
pub struct OneKernelUcb {
    n_clients: usize,
    dim: usize,
    alpha: AlphaRule,
    posterior: ExactPosterior,
    ledger: CommLedger,
}

impl OneKernelUcb {
    pub fn new(n_clients: usize, dim: usize, kernel: KernelSpec, lambda: f64, alpha: AlphaRule) -> Result<Self> {
        check_common(n_clients, dim)?;
        Ok(Self {
            n_clients,
            dim,
            alpha,
            posterior: ExactPosterior::new(kernel, lambda)?,
            ledger: CommLedger::new(),
        })
    }

    pub fn posterior(&self) -> &ExactPosterior {
        &self.posterior
    }
}

impl Policy for OneKernelUcb {
    fn name(&self) -> &'static str {
        "one_kernelucb"
    }

    fn n_clients(&self) -> usize {
        self.n_clients
    }

    fn select(&self, client: usize, arms: &[Vec<f64>]) -> Result<usize> {
        check_client(client, self.n_clients)?;
        let p = &self.posterior;
        let alpha = alpha_value(&self.alpha, p.lambda(), self.n_clients, p.logdet())?;
        argmax_by(arms, |x| p.ucb_score(x, alpha))
    }

    fn update(&mut self, client: usize, _t: usize, x: &[f64], y: f64) -> Result<Option<SyncEvent>> {
        check_client(client, self.n_clients)?;
        self.posterior.append(x, y)?;
        let mut msgs = vec![SyncMessage::points(Direction::Up, PayloadKind::RawPoints, client, 1, self.dim)];
        msgs.extend(
            (0..self.n_clients)
                .filter(|&j| j != client)
                .map(|j| SyncMessage::points(Direction::Down, PayloadKind::RawPoints, j, 1, self.dim)),
        );
        self.ledger.record_stream(&msgs);
        Ok(None)
    }

    fn ledger(&self) -> &CommLedger {
        &self.ledger
    }
}

/// Independent kernel UCB per client.
#[derive(Debug, Clone)]
pub struct NKernelUcb {
    alpha: AlphaRule,
    posteriors: Vec<ExactPosterior>,
    ledger: CommLedger,
}

impl NKernelUcb {
    pub fn new(n_clients: usize, dim: usize, kernel: KernelSpec, lambda: f64, alpha: AlphaRule) -> Result<Self> {
        check_common(n_clients, dim)?;
        let p = ExactPosterior::new(kernel, lambda)?;
        Ok(Self {
            alpha,
            posteriors: vec![p; n_clients],
            ledger: CommLedger::new(),
        })
    }

    pub fn posterior(&self, client: usize) -> &ExactPosterior {
        &self.posteriors[client]
    }
}

impl Policy for NKernelUcb {
    fn name(&self) -> &'static str {
        "n_kernelucb"
    }

    fn n_clients(&self) -> usize {
        self.posteriors.len()
    }

    fn select(&self, client: usize, arms: &[Vec<f64>]) -> Result<usize> {
        check_client(client, self.posteriors.len())?;
        let p = &self.posteriors[client];
        let alpha = alpha_value(&self.alpha, p.lambda(), 1, p.logdet())?;
        argmax_by(arms, |x| p.ucb_score(x, alpha))
    }

    fn update(&mut self, client: usize, _t: usize, x: &[f64], y: f64) -> Result<Option<SyncEvent>> {
        check_client(client, self.posteriors.len())?;
        self.posteriors[client].append(x, y)?;
        Ok(None)
    }

    fn ledger(&self) -> &CommLedger {
        &self.ledger
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dislin_prior_score() {
        let w = DisLinUcb::new(2, 2, 4.0, 1.0, AlphaRule::Constant(3.0)).unwrap();
        let (m, s) = w.mean_std(0, &[0.6, 0.8]).unwrap();
        assert_eq!(m, 0.0);
        assert!((3.0 * s - 3.0 * 1.0 / 2.0).abs() < 1e-15);
    }

    #[test]
    fn dislin_one_point_hand_example() {
        let mut w = DisLinUcb::new(1, 1, 1.0, 1e9, AlphaRule::Constant(1.0)).unwrap();
        w.update(0, 1, &[1.0], 1.0).unwrap();
        let (m, s) = w.mean_std(0, &[1.0]).unwrap();
        assert!((m - 0.5).abs() < 1e-15);
        assert!((s - 0.5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn dislin_sync_traffic() {
        let n = 3;
        let d = 2;
        let mut w = DisLinUcb::new(n, d, 1.0, 1e9, AlphaRule::Constant(1.0)).unwrap();
        w.update(1, 1, &[0.3, 0.4], 1.0).unwrap();
        let ev = w.sync(1).unwrap();
        assert_eq!(ev.scalars, 2 * (n * (d * d + d)) as u64);
        assert_eq!(w.client_stats(0), w.client_stats(2));
        assert_eq!(w.global_stats().count, 1);
    }

    #[test]
    fn one_kernel_stream_accounting() {
        let mut single = OneKernelUcb::new(1, 2, KernelSpec::gaussian(1.0), 1.0, AlphaRule::Constant(1.0)).unwrap();
        single.update(0, 1, &[0.1, 0.2], 0.0).unwrap();
        assert_eq!(single.ledger().total_for(Direction::Down, PayloadKind::RawPoints), 0);

        let (n, d) = (4usize, 3usize);
        let mut w = OneKernelUcb::new(n, d, KernelSpec::gaussian(1.0), 1.0, AlphaRule::Constant(1.0)).unwrap();
        let rounds = 5;
        for t in 1..=n * rounds {
            w.update((t - 1) % n, t, &[0.1, 0.0, t as f64 / 100.0], 0.0).unwrap();
        }
        assert_eq!(w.ledger().cumulative_scalars(), (n * rounds * (d + 1) * n) as u64);
        assert_eq!(w.ledger().sync_count(), 0);
    }

    #[test]
    fn n_kernel_is_silent_and_local() {
        let mut w = NKernelUcb::new(3, 1, KernelSpec::gaussian(1.0), 1.0, AlphaRule::Constant(1.0)).unwrap();
        for t in 1..=9 {
            assert!(w.update((t - 1) % 3, t, &[t as f64], 0.0).unwrap().is_none());
        }
        assert_eq!(w.ledger().cumulative_scalars(), 0);
        for j in 0..3 {
            assert_eq!(w.posterior(j).len(), 3);
        }
    }
}
