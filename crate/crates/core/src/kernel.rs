//! Kernel functions, kernel matrices and the symmetric positive-definite
//! factorization shared by every estimator in the crate.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelFamily {
    /// `exp(-gamma * |x - y|^2)`
    Gaussian,
    /// `x . y`
    Linear,
}

/// A kernel family together with its hyperparameter.
///
/// `gamma` is the Gaussian bandwidth and is ignored by the linear kernel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSpec {
    pub family: KernelFamily,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
}

fn default_gamma() -> f64 {
    1.0
}

impl Default for KernelSpec {
    fn default() -> Self {
        Self::gaussian(1.0)
    }
}

impl KernelSpec {
    pub fn gaussian(gamma: f64) -> Self {
        Self {
            family: KernelFamily::Gaussian,
            gamma,
        }
    }

    pub fn linear() -> Self {
        Self {
            family: KernelFamily::Linear,
            gamma: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.family == KernelFamily::Gaussian && !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "gaussian kernel requires gamma > 0, got {}",
                self.gamma
            )));
        }
        Ok(())
    }

    /// Kernel value without the dimension check. Callers guarantee equal lengths.
    #[inline]
    pub(crate) fn eval_unchecked(&self, x: &[f64], y: &[f64]) -> f64 {
        match self.family {
            KernelFamily::Gaussian => {
                let sq: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
                (-self.gamma * sq).exp()
            }
            KernelFamily::Linear => dot(x, y),
        }
    }

    /// `k(x, x)`.
    #[inline]
    pub fn diag(&self, x: &[f64]) -> f64 {
        match self.family {
            KernelFamily::Gaussian => 1.0,
            KernelFamily::Linear => dot(x, x),
        }
    }

    /// Column of kernel values `[k(p, x)]` for every stored point `p`.
    pub(crate) fn column<P: AsRef<[f64]>>(&self, points: &[P], x: &[f64]) -> Vec<f64> {
        points
            .iter()
            .map(|p| self.eval_unchecked(p.as_ref(), x))
            .collect()
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn kernel_eval(spec: &KernelSpec, x: &[f64], y: &[f64]) -> Result<f64> {
    check_dim(x.len(), y.len())?;
    Ok(spec.eval_unchecked(x, y))
}

/// Matrix with entry `(i, j) = k(a_i, b_j)`.
pub fn kernel_matrix<A, B>(spec: &KernelSpec, a: &[A], b: &[B]) -> Result<DMatrix<f64>>
where
    A: AsRef<[f64]>,
    B: AsRef<[f64]>,
{
    let dim = a
        .first()
        .map(|r| r.as_ref().len())
        .or_else(|| b.first().map(|r| r.as_ref().len()));
    if let Some(dim) = dim {
        for row in a.iter().map(AsRef::as_ref).chain(b.iter().map(AsRef::as_ref)) {
            check_dim(dim, row.len())?;
        }
    }
    Ok(DMatrix::from_fn(a.len(), b.len(), |i, j| {
        spec.eval_unchecked(a[i].as_ref(), b[j].as_ref())
    }))
}

const TRSM_BLOCK: usize = 64;

/// Overwrites `b` with `L^{-1} b` for dense lower-triangular `l`.
///
/// Blocked so that the bulk of the work is a matrix product.
pub(crate) fn solve_lower_in_place(l: &DMatrix<f64>, b: &mut DMatrix<f64>) {
    let n = l.nrows();
    debug_assert_eq!(n, b.nrows());
    let m = b.ncols();
    let mut r0 = 0;
    while r0 < n {
        let nb = TRSM_BLOCK.min(n - r0);
        let mut xk = b.rows(r0, nb).into_owned();
        l.view((r0, r0), (nb, nb)).solve_lower_triangular_unchecked_mut(&mut xk);
        b.rows_mut(r0, nb).copy_from(&xk);
        let r1 = r0 + nb;
        if r1 < n {
            b.view_mut((r1, 0), (n - r1, m))
                .gemm(-1.0, &l.view((r1, r0), (n - r1, nb)), &xk, 1.0);
        }
        r0 = r1;
    }
}

const JITTER_FIRST: f64 = 1e-10;
const JITTER_MAX: f64 = 1e-4;

/// Lower-triangular factor `L` with `L L^T = M + jitter * I`.
///
/// Rows are stored packed (`row i` holds `i + 1` entries) so the factor can
/// grow by one bordered row without moving existing data.
#[derive(Debug, Clone, PartialEq)]
pub struct SymFactor {
    rows: Vec<Vec<f64>>,
    jitter: f64,
}

impl SymFactor {
    pub fn empty() -> Self {
        Self {
            rows: Vec::new(),
            jitter: 0.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// Entry `L[i][j]`, zero above the diagonal.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        if j > i {
            0.0
        } else {
            self.rows[i][j]
        }
    }

    pub fn diagonal(&self) -> impl Iterator<Item = f64> + '_ {
        self.rows.iter().enumerate().map(|(i, r)| r[i])
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut m = DMatrix::zeros(n, n);
        for (i, row) in self.rows.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                m[(i, j)] = *v;
            }
        }
        m
    }

    /// `log det(M + jitter * I)`.
    pub fn logdet(&self) -> f64 {
        2.0 * self.diagonal().map(f64::ln).sum::<f64>()
    }

    /// Solves `L y = b` in place.
    pub fn forward_solve(&self, b: &mut [f64]) {
        debug_assert_eq!(b.len(), self.dim());
        for (i, row) in self.rows.iter().enumerate() {
            let s = dot(&row[..i], &b[..i]);
            b[i] = (b[i] - s) / row[i];
        }
    }

    /// Solves `L^T x = y` in place.
    pub fn backward_solve(&self, y: &mut [f64]) {
        debug_assert_eq!(y.len(), self.dim());
        for i in (0..self.dim()).rev() {
            let row = &self.rows[i];
            y[i] /= row[i];
            let xi = y[i];
            for (yj, lij) in y[..i].iter_mut().zip(&row[..i]) {
                *yj -= lij * xi;
            }
        }
    }

    /// `(M + jitter I)^{-1} b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.forward_solve(&mut x);
        self.backward_solve(&mut x);
        x
    }

    /// Borders the factor with one row/column of the underlying matrix.
    ///
    /// `column` holds the new off-diagonal entries against the existing
    /// rows, `diag` the new diagonal entry (before jitter). Returns the new
    /// pivot, or `None` (leaving the factor untouched) when the bordered
    /// matrix is not numerically positive definite.
    pub fn try_append(&mut self, column: &[f64], diag: f64) -> Option<f64> {
        debug_assert_eq!(column.len(), self.dim());
        let mut row = column.to_vec();
        self.forward_solve(&mut row);
        let shifted = diag + self.jitter;
        let d = shifted - dot(&row, &row);
        let tol = (self.dim() + 1) as f64 * f64::EPSILON * shifted.abs();
        if !(d > tol) || !d.is_finite() {
            return None;
        }
        let pivot = d.sqrt();
        row.push(pivot);
        self.rows.push(row);
        Some(pivot)
    }

    /// Updates the factor in place so that it factors `M + v v^T`.
    pub fn rank_one_update(&mut self, v: &[f64]) {
        debug_assert_eq!(v.len(), self.dim());
        let n = self.dim();
        let mut w = v.to_vec();
        for k in 0..n {
            let lkk = self.rows[k][k];
            let r = lkk.hypot(w[k]);
            let c = r / lkk;
            let s = w[k] / lkk;
            self.rows[k][k] = r;
            for (row, wi) in self.rows.iter_mut().zip(w.iter_mut()).skip(k + 1) {
                let lik = (row[k] + s * *wi) / c;
                *wi = c * *wi - s * lik;
                row[k] = lik;
            }
        }
    }
}

fn cholesky_rows(m: &DMatrix<f64>, jitter: f64) -> Option<Vec<Vec<f64>>> {
    let n = m.nrows();
    let max_diag = (0..n)
        .map(|i| (m[(i, i)] + jitter).abs())
        .fold(0.0_f64, f64::max);
    let tol = n as f64 * f64::EPSILON * max_diag;
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(n);
    for i in 0..n {
        let mut row = vec![0.0; i + 1];
        for j in 0..i {
            let s = m[(i, j)] - dot(&row[..j], &rows[j][..j]);
            row[j] = s / rows[j][j];
        }
        let d = m[(i, i)] + jitter - dot(&row[..i], &row[..i]);
        if !(d > tol) || !d.is_finite() {
            return None;
        }
        row[i] = d.sqrt();
        rows.push(row);
    }
    Some(rows)
}

/// Cholesky factor of a symmetric matrix with escalating diagonal jitter.
///
/// The first attempt uses `base_jitter`; each retry starts at `1e-10` (or
/// ten times the previous jitter) and the schedule stops at `1e-4`.
pub fn spd_factor(m: &DMatrix<f64>, base_jitter: f64) -> Result<SymFactor> {
    if m.nrows() != m.ncols() {
        return Err(Error::Dimension {
            expected: m.nrows(),
            got: m.ncols(),
        });
    }
    if m.nrows() == 0 {
        return Err(Error::InvalidParameter(
            "cannot factor an empty matrix".into(),
        ));
    }
    if !(base_jitter >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "jitter must be nonnegative, got {base_jitter}"
        )));
    }
    let mut jitter = base_jitter;
    loop {
        if let Some(rows) = cholesky_rows(m, jitter) {
            return Ok(SymFactor { rows, jitter });
        }
        let next = if jitter < JITTER_FIRST {
            JITTER_FIRST
        } else {
            jitter * 10.0
        };
        if next > JITTER_MAX * (1.0 + 1e-9) {
            break;
        }
        jitter = next;
    }
    let min_eigenvalue = SymmetricEigen::new(m.clone())
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    Err(Error::Numerical { min_eigenvalue })
}

/// Factor of `I + K/lambda` for the given rows.
fn regularized_factor<P: AsRef<[f64]>>(
    spec: &KernelSpec,
    lambda: f64,
    rows: &[P],
) -> Result<SymFactor> {
    if rows.is_empty() {
        return Ok(SymFactor::empty());
    }
    let mut m = kernel_matrix(spec, rows, rows)?;
    m /= lambda;
    for i in 0..m.nrows() {
        m[(i, i)] += 1.0;
    }
    spd_factor(&m, 0.0)
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda > 0.0 && lambda.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "lambda must be positive, got {lambda}"
        )))
    }
}

/// `log det(I + K_all/lambda) - log det(I + K_old/lambda)` where `all` is
/// `old` followed by `new_rows`.
pub fn logdet_ratio<A, B>(
    spec: &KernelSpec,
    lambda: f64,
    old: &[A],
    new_rows: &[B],
) -> Result<f64>
where
    A: AsRef<[f64]>,
    B: AsRef<[f64]>,
{
    check_lambda(lambda)?;
    if new_rows.is_empty() {
        return Ok(0.0);
    }
    let mut all: Vec<&[f64]> = old.iter().map(AsRef::as_ref).collect();
    all.extend(new_rows.iter().map(AsRef::as_ref));
    let dim = all[0].len();
    for r in &all {
        check_dim(dim, r.len())?;
    }

    let mut factor = regularized_factor(spec, lambda, &all[..old.len()])?;
    let mut gain = 0.0;
    for (k, x) in all.iter().enumerate().skip(old.len()) {
        let col: Vec<f64> = spec
            .column(&all[..k], x)
            .into_iter()
            .map(|v| v / lambda)
            .collect();
        match factor.try_append(&col, 1.0 + spec.diag(x) / lambda) {
            Some(pivot) => gain += 2.0 * pivot.ln(),
            None => {
                let full = regularized_factor(spec, lambda, &all)?;
                let base = regularized_factor(spec, lambda, &all[..old.len()])?;
                return Ok((full.logdet() - base.logdet()).max(0.0));
            }
        }
    }
    Ok(gain.max(0.0))
}

/// `1/2 log det(I + K/lambda)`; zero for an empty point set.
pub fn information_gain<P: AsRef<[f64]>>(spec: &KernelSpec, lambda: f64, rows: &[P]) -> Result<f64> {
    check_lambda(lambda)?;
    Ok(0.5 * regularized_factor(spec, lambda, rows)?.logdet())
}
