//! Shared Nystrom dictionary, embedded statistics and the approximated
//! posterior built from them.
//!
//! A dictionary `S` induces the embedding `z(x; S) = K_SS^{-1/2} K_S(x)`.
//! Clients never exchange raw data after the dictionary is agreed on; they
//! exchange `(Z^T Z, Z^T y, count)` instead, and every estimate below is a
//! function of those statistics alone.

use std::sync::Arc;

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};

use crate::error::{check_dim, Error, Result};
use crate::kernel::{dot, kernel_matrix, solve_lower_in_place, spd_factor, KernelSpec, SymFactor};

/// Jitter above which the Cholesky route is abandoned for an eigendecomposition.
const EIGEN_FALLBACK_JITTER: f64 = 1e-6;
/// Eigenvalues of `K_SS` below this are treated as zero.
const EIGEN_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone)]
enum EmbeddingMap {
    Empty,
    /// `z = L^{-1} k_S(x)` with `L L^T = K_SS`, packed and dense.
    Cholesky(SymFactor, DMatrix<f64>),
    /// `z = Lambda^{-1/2} U^T k_S(x)`, rows for negligible eigenvalues zeroed.
    Eigen(DMatrix<f64>),
}

#[derive(Debug, Clone)]
pub struct Dictionary {
    kernel: KernelSpec,
    indices: Vec<usize>,
    features: Vec<Vec<f64>>,
    map: EmbeddingMap,
}

impl Dictionary {
    pub fn empty(kernel: KernelSpec) -> Self {
        Self {
            kernel,
            indices: Vec::new(),
            features: Vec::new(),
            map: EmbeddingMap::Empty,
        }
    }

    /// Builds a dictionary from global time indices and the matching arms.
    pub fn new(kernel: KernelSpec, indices: Vec<usize>, features: Vec<Vec<f64>>) -> Result<Self> {
        kernel.validate()?;
        check_dim(indices.len(), features.len())?;
        if features.is_empty() {
            return Ok(Self::empty(kernel));
        }
        let d = features[0].len();
        for f in &features {
            check_dim(d, f.len())?;
        }
        let kss = kernel_matrix(&kernel, &features, &features)?;
        let map = match spd_factor(&kss, 0.0) {
            Ok(f) if f.jitter() <= EIGEN_FALLBACK_JITTER => {
                let dense = f.to_matrix();
                EmbeddingMap::Cholesky(f, dense)
            }
            _ => {
                log::debug!(
                    "dictionary of size {} is near-singular; using eigendecomposition",
                    features.len()
                );
                let eig = SymmetricEigen::new(kss);
                let mut proj = eig.eigenvectors.transpose();
                for (i, &v) in eig.eigenvalues.iter().enumerate() {
                    let scale = if v > EIGEN_FLOOR { v.sqrt().recip() } else { 0.0 };
                    proj.row_mut(i).scale_mut(scale);
                }
                EmbeddingMap::Eigen(proj)
            }
        };
        Ok(Self {
            kernel,
            indices,
            features,
            map,
        })
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn size(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn features(&self) -> &[Vec<f64>] {
        &self.features
    }

    /// Cholesky factor of `K_SS`, absent for the empty dictionary or when
    /// the eigendecomposition fallback is in use.
    pub fn kss_factor(&self) -> Option<&SymFactor> {
        match &self.map {
            EmbeddingMap::Cholesky(f, _) => Some(f),
            _ => None,
        }
    }

    pub fn embed(&self, x: &[f64]) -> Result<Vec<f64>> {
        if self.is_empty() {
            return Err(Error::EmptyDictionary);
        }
        check_dim(self.features[0].len(), x.len())?;
        Ok(self.embed_unchecked(x))
    }

    fn embed_unchecked(&self, x: &[f64]) -> Vec<f64> {
        let mut k = self.kernel.column(&self.features, x);
        match &self.map {
            EmbeddingMap::Empty => Vec::new(),
            EmbeddingMap::Cholesky(f, _) => {
                f.forward_solve(&mut k);
                k
            }
            EmbeddingMap::Eigen(proj) => (proj * DVector::from_vec(k)).data.into(),
        }
    }

    /// Statistics `(Z^T Z, Z^T y, n)` of a point set embedded in this dictionary.
    pub fn embed_stats<P: AsRef<[f64]>>(&self, xs: &[P], ys: &[f64]) -> Result<EmbeddedStats> {
        check_dim(xs.len(), ys.len())?;
        if self.is_empty() {
            return Ok(EmbeddedStats {
                gram: DMatrix::zeros(0, 0),
                moment: DVector::zeros(0),
                count: xs.len(),
            });
        }
        let z = self.embed_batch(xs)?;
        let mut gram = &z * z.transpose();
        symmetrize_lower(&mut gram);
        let moment = &z * DVector::from_column_slice(ys);
        Ok(EmbeddedStats {
            gram,
            moment,
            count: xs.len(),
        })
    }

    /// Embeddings of `xs` as the columns of an `s x n` matrix.
    pub fn embed_batch<P: AsRef<[f64]>>(&self, xs: &[P]) -> Result<DMatrix<f64>> {
        if self.is_empty() {
            return Err(Error::EmptyDictionary);
        }
        let mut k = kernel_matrix(&self.kernel, &self.features, xs)?;
        Ok(match &self.map {
            EmbeddingMap::Empty => unreachable!("nonempty dictionary"),
            EmbeddingMap::Cholesky(_, dense) => {
                solve_lower_in_place(dense, &mut k);
                k
            }
            EmbeddingMap::Eigen(proj) => proj * k,
        })
    }
}

// gemm blocking can break exact symmetry; keep the lower triangle
fn symmetrize_lower(m: &mut DMatrix<f64>) {
    for j in 1..m.ncols() {
        for i in 0..j {
            m[(i, j)] = m[(j, i)];
        }
    }
}

/// `(Z^T Z, Z^T y, count)` of a data set against a fixed dictionary.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddedStats {
    pub gram: DMatrix<f64>,
    pub moment: DVector<f64>,
    pub count: usize,
}

impl EmbeddedStats {
    pub fn zeros(dim: usize) -> Self {
        Self {
            gram: DMatrix::zeros(dim, dim),
            moment: DVector::zeros(dim),
            count: 0,
        }
    }

    /// One-shot construction from embedded rows.
    pub fn from_embeddings(dim: usize, rows: &[Vec<f64>], ys: &[f64]) -> Result<Self> {
        check_dim(rows.len(), ys.len())?;
        for r in rows {
            check_dim(dim, r.len())?;
        }
        let z = DMatrix::from_fn(dim, rows.len(), |i, j| rows[j][i]);
        let mut gram = &z * z.transpose();
        symmetrize_lower(&mut gram);
        let moment = &z * DVector::from_column_slice(ys);
        Ok(Self {
            gram,
            moment,
            count: rows.len(),
        })
    }

    pub fn dim(&self) -> usize {
        self.moment.len()
    }

    pub fn accumulate(&mut self, z: &[f64], y: f64) -> Result<()> {
        check_dim(self.dim(), z.len())?;
        let zv = DVector::from_column_slice(z);
        self.gram.ger(1.0, &zv, &zv, 1.0);
        self.moment.axpy(y, &zv, 1.0);
        self.count += 1;
        Ok(())
    }

    /// Entrywise sum, used by the server to aggregate client statistics.
    pub fn add_assign(&mut self, other: &EmbeddedStats) -> Result<()> {
        check_dim(self.dim(), other.dim())?;
        self.gram += &other.gram;
        self.moment += &other.moment;
        self.count += other.count;
        Ok(())
    }

    /// Scalars needed to transmit these statistics: gram, moment and count.
    pub fn scalar_count(&self) -> u64 {
        let s = self.dim() as u64;
        s * s + s + 1
    }
}

/// Approximated posterior `(mu~, sigma~)` from a dictionary and embedded
/// statistics, with the factor of `Z^T Z + lambda I` cached and rank-one
/// updated as local points arrive.
#[derive(Debug, Clone)]
pub struct NystromPosterior {
    dict: Arc<Dictionary>,
    stats: EmbeddedStats,
    lambda: f64,
    reg: SymFactor,
    // (Z^T Z + lambda I)^{-1} Z^T y
    weights: Vec<f64>,
}

impl NystromPosterior {
    pub fn new(dict: Arc<Dictionary>, stats: EmbeddedStats, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "lambda must be positive, got {lambda}"
            )));
        }
        check_dim(dict.size(), stats.dim())?;
        let (reg, weights) = if dict.is_empty() {
            (SymFactor::empty(), Vec::new())
        } else {
            let mut m = stats.gram.clone();
            for i in 0..m.nrows() {
                m[(i, i)] += lambda;
            }
            let reg = spd_factor(&m, 0.0)?;
            let weights = reg.solve(stats.moment.as_slice());
            (reg, weights)
        };
        Ok(Self {
            dict,
            stats,
            lambda,
            reg,
            weights,
        })
    }

    /// The model before any dictionary exists: mean 0, std `sqrt(k(x,x)/lambda)`.
    pub fn prior(kernel: KernelSpec, lambda: f64) -> Result<Self> {
        Self::new(Arc::new(Dictionary::empty(kernel)), EmbeddedStats::zeros(0), lambda)
    }

    pub fn dictionary(&self) -> &Arc<Dictionary> {
        &self.dict
    }

    pub fn stats(&self) -> &EmbeddedStats {
        &self.stats
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn mean_std(&self, x: &[f64]) -> Result<(f64, f64)> {
        let kxx = self.dict.kernel().diag(x);
        if self.dict.is_empty() {
            return Ok((0.0, (kxx / self.lambda).sqrt()));
        }
        let z = self.dict.embed(x)?;
        let mean = dot(&z, &self.weights);
        // z^T G (G + lambda I)^{-1} z = |z|^2 - lambda |C^{-1} z|^2
        let mut u = z.clone();
        self.reg.forward_solve(&mut u);
        let quad = dot(&z, &z) - self.lambda * dot(&u, &u);
        let var = (kxx - quad).max(0.0) / self.lambda;
        Ok((mean, var.sqrt()))
    }

    pub fn variance(&self, x: &[f64]) -> Result<f64> {
        let (_, s) = self.mean_std(x)?;
        Ok(s * s)
    }

    /// `sigma~^2` at every point of `xs`.
    pub fn variance_batch<P: AsRef<[f64]>>(&self, xs: &[P]) -> Result<Vec<f64>> {
        let kernel = self.dict.kernel();
        if self.dict.is_empty() {
            return Ok(xs.iter().map(|x| kernel.diag(x.as_ref()) / self.lambda).collect());
        }
        let z = self.dict.embed_batch(xs)?;
        let mut u = z.clone();
        solve_lower_in_place(&self.reg.to_matrix(), &mut u);
        Ok(xs
            .iter()
            .enumerate()
            .map(|(i, x)| {
                let quad = z.column(i).norm_squared() - self.lambda * u.column(i).norm_squared();
                (kernel.diag(x.as_ref()) - quad).max(0.0) / self.lambda
            })
            .collect())
    }

    /// Folds one local observation into the statistics under the current
    /// dictionary. With an empty dictionary only the count moves.
    pub fn observe(&mut self, x: &[f64], y: f64) -> Result<()> {
        if self.dict.is_empty() {
            self.stats.count += 1;
            return Ok(());
        }
        let z = self.dict.embed(x)?;
        self.stats.accumulate(&z, y)?;
        self.reg.rank_one_update(&z);
        self.weights = self.reg.solve(self.stats.moment.as_slice());
        Ok(())
    }
}

/// One-shot approximated mean and standard deviation.
pub fn approx_mean_var(
    dict: &Dictionary,
    stats: &EmbeddedStats,
    lambda: f64,
    x: &[f64],
) -> Result<(f64, f64)> {
    NystromPosterior::new(Arc::new(dict.clone()), stats.clone(), lambda)?.mean_std(x)
}

/// Confidence width of the approximated estimator:
/// `(1/sqrt(-eps + 1/(1 + c D)) + 1) sqrt(lambda) S + 2 R sqrt(ln(N/delta) + gamma)`
/// with `c = (1 + eps)/(1 - eps)`.
#[allow(clippy::too_many_arguments)]
pub fn theory_alpha_approx(
    lambda: f64,
    theta_norm_bound: f64,
    noise_bound: f64,
    delta: f64,
    n_clients: usize,
    epsilon: f64,
    threshold: f64,
    gamma_bound: f64,
) -> Result<f64> {
    if !(0.0..1.0 / 3.0).contains(&epsilon) {
        return Err(Error::Config(format!(
            "epsilon must lie in [0, 1/3), got {epsilon}"
        )));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "delta must lie in (0, 1), got {delta}"
        )));
    }
    if !(threshold > 0.0) || !(lambda > 0.0) || n_clients == 0 {
        return Err(Error::InvalidParameter(
            "threshold and lambda must be positive, N at least 1".into(),
        ));
    }
    let c = (1.0 + epsilon) / (1.0 - epsilon);
    let inner = -epsilon + 1.0 / (1.0 + c * threshold);
    if !(inner > 0.0) {
        return Err(Error::Config(format!(
            "epsilon = {epsilon} and threshold D = {threshold} violate -eps + 1/(1 + (1+eps)/(1-eps) D) > 0"
        )));
    }
    let coef = 1.0 / inner.sqrt() + 1.0;
    let tail = ((n_clients as f64 / delta).ln() + gamma_bound).max(0.0).sqrt();
    Ok(coef * lambda.sqrt() * theta_norm_bound + 2.0 * noise_bound * tail)
}

/// Smallest `eps` with
/// `(1-eps)(Phi^T Phi + lambda I) <= Phi^T W Phi + lambda I <= (1+eps)(Phi^T Phi + lambda I)`
/// for explicit feature rows `Phi` and diagonal weights `W`.
pub fn epsilon_accuracy(features: &[Vec<f64>], weights: &[f64], lambda: f64) -> Result<f64> {
    check_dim(features.len(), weights.len())?;
    if !(lambda > 0.0) {
        return Err(Error::InvalidParameter("lambda must be positive".into()));
    }
    let p = features.first().map_or(0, Vec::len);
    if p == 0 {
        return Ok(0.0);
    }
    let phi = DMatrix::from_fn(features.len(), p, |i, j| features[i][j]);
    let weighted = DMatrix::from_fn(features.len(), p, |i, j| weights[i] * features[i][j]);
    let ident = DMatrix::<f64>::identity(p, p) * lambda;
    let full = phi.tr_mul(&phi) + &ident;
    let sampled = phi.tr_mul(&weighted) + &ident;
    let l = Cholesky::new(full)
        .ok_or(Error::Numerical { min_eigenvalue: f64::NAN })?
        .l();
    let x = l
        .solve_lower_triangular(&sampled)
        .ok_or(Error::Numerical { min_eigenvalue: f64::NAN })?;
    let b = l
        .solve_lower_triangular(&x.transpose())
        .ok_or(Error::Numerical { min_eigenvalue: f64::NAN })?;
    let b = (&b + b.transpose()) * 0.5;
    Ok(SymmetricEigen::new(b)
        .eigenvalues
        .iter()
        .map(|v| (v - 1.0).abs())
        .fold(0.0, f64::max))
}
