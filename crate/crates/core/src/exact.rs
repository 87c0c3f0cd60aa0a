//! Exact dual-form kernel ridge regression posterior.

use nalgebra::DMatrix;

use crate::error::{check_dim, Error, Result};
use crate::kernel::{dot, kernel_matrix, spd_factor, KernelSpec, SymFactor};

/// Posterior of kernel ridge regression over a growing point set.
///
/// Holds the Cholesky factor `L` of `K + lambda I` and `L^{-1} y`; both grow
/// by one bordered row per appended point, so a query costs one triangular
/// solve against the stored kernel column.
#[derive(Debug, Clone)]
pub struct ExactPosterior {
    kernel: KernelSpec,
    lambda: f64,
    dim: Option<usize>,
    points: Vec<Vec<f64>>,
    rewards: Vec<f64>,
    factor: SymFactor,
    // L^{-1} y
    whitened: Vec<f64>,
}

impl ExactPosterior {
    pub fn new(kernel: KernelSpec, lambda: f64) -> Result<Self> {
        kernel.validate()?;
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "lambda must be positive, got {lambda}"
            )));
        }
        Ok(Self {
            kernel,
            lambda,
            dim: None,
            points: Vec::new(),
            rewards: Vec::new(),
            factor: SymFactor::empty(),
            whitened: Vec::new(),
        })
    }

    /// Builds the posterior in one shot from a full factorization.
    pub fn from_data(
        kernel: KernelSpec,
        lambda: f64,
        points: Vec<Vec<f64>>,
        rewards: Vec<f64>,
    ) -> Result<Self> {
        let mut p = Self::new(kernel, lambda)?;
        check_dim(points.len(), rewards.len())?;
        if let Some(first) = points.first() {
            let d = first.len();
            for x in &points {
                check_dim(d, x.len())?;
            }
            p.dim = Some(d);
        }
        p.points = points;
        p.rewards = rewards;
        p.refactor()?;
        Ok(p)
    }

    fn refactor(&mut self) -> Result<()> {
        if self.points.is_empty() {
            self.factor = SymFactor::empty();
            self.whitened.clear();
            return Ok(());
        }
        let mut m = kernel_matrix(&self.kernel, &self.points, &self.points)?;
        for i in 0..m.nrows() {
            m[(i, i)] += self.lambda;
        }
        self.factor = spd_factor(&m, 0.0)?;
        self.whitened = self.rewards.clone();
        self.factor.forward_solve(&mut self.whitened);
        Ok(())
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn rewards(&self) -> &[f64] {
        &self.rewards
    }

    pub fn factor(&self) -> &SymFactor {
        &self.factor
    }

    fn check_query(&self, x: &[f64]) -> Result<()> {
        match self.dim {
            Some(d) => check_dim(d, x.len()),
            None => Ok(()),
        }
    }

    /// Adds one observation, bordering the factor by one row.
    pub fn append(&mut self, x: &[f64], y: f64) -> Result<()> {
        self.check_query(x)?;
        self.dim.get_or_insert(x.len());
        let col = self.kernel.column(&self.points, x);
        let diag = self.kernel.diag(x) + self.lambda;
        self.points.push(x.to_vec());
        self.rewards.push(y);
        match self.factor.try_append(&col, diag) {
            Some(pivot) => {
                let row_dot = {
                    let n = self.factor.dim() - 1;
                    (0..n).map(|j| self.factor.entry(n, j) * self.whitened[j]).sum::<f64>()
                };
                self.whitened.push((y - row_dot) / pivot);
                Ok(())
            }
            None => {
                log::warn!(
                    "bordered factor update failed at n = {}; refactoring from scratch",
                    self.points.len()
                );
                self.refactor()
            }
        }
    }

    /// Posterior mean and standard deviation at `x`.
    ///
    /// The standard deviation is `lambda^{-1/2} sqrt(k(x,x) - k_D(x)^T (K + lambda I)^{-1} k_D(x))`,
    /// clamped at zero inside the root.
    pub fn mean_std(&self, x: &[f64]) -> Result<(f64, f64)> {
        self.check_query(x)?;
        let kxx = self.kernel.diag(x);
        if self.points.is_empty() {
            return Ok((0.0, (kxx / self.lambda).sqrt()));
        }
        let mut w = self.kernel.column(&self.points, x);
        self.factor.forward_solve(&mut w);
        let mean = dot(&w, &self.whitened);
        let var = (kxx - dot(&w, &w)).max(0.0) / self.lambda;
        Ok((mean, var.sqrt()))
    }

    /// Posterior variance `sigma^2(x)` on the same scale as [`Self::mean_std`].
    pub fn variance(&self, x: &[f64]) -> Result<f64> {
        let (_, s) = self.mean_std(x)?;
        Ok(s * s)
    }

    pub fn ucb_score(&self, x: &[f64], alpha: f64) -> Result<f64> {
        let (m, s) = self.mean_std(x)?;
        Ok(m + alpha * s)
    }

    /// `log det(I + K/lambda)` of the stored points.
    pub fn logdet(&self) -> f64 {
        self.factor.logdet() - self.points.len() as f64 * self.lambda.ln()
    }

    /// Dense `(K + lambda I)` for tests and diagnostics.
    pub fn regularized_gram(&self) -> DMatrix<f64> {
        let mut m = DMatrix::from_fn(self.len(), self.len(), |i, j| {
            self.kernel.eval_unchecked(&self.points[i], &self.points[j])
        });
        for i in 0..self.len() {
            m[(i, i)] += self.lambda;
        }
        m
    }
}

/// Confidence width `sqrt(lambda) * S + R * sqrt(4 ln(N/delta) + 2 logdet)`
/// for the exact estimator.
pub fn theory_alpha_exact(
    lambda: f64,
    theta_norm_bound: f64,
    noise_bound: f64,
    delta: f64,
    n_clients: usize,
    logdet: f64,
) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "delta must lie in (0, 1), got {delta}"
        )));
    }
    if !(lambda > 0.0) || n_clients == 0 {
        return Err(Error::InvalidParameter(
            "lambda must be positive and N at least 1".into(),
        ));
    }
    let logdet = logdet.max(0.0);
    let inner = 4.0 * (n_clients as f64 / delta).ln() + 2.0 * logdet;
    Ok(lambda.sqrt() * theta_norm_bound + noise_bound * inner.max(0.0).sqrt())
}
