//! Ridge leverage score sampling of dictionary candidates.

use rand::Rng;

use crate::error::{Error, Result};

/// Oversampling factor and the accuracy targets it was derived from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RlsConfig {
    pub qbar: f64,
    pub epsilon: f64,
    pub delta: f64,
}

impl RlsConfig {
    pub fn from_theory(epsilon: f64, delta: f64, n_clients: usize, rounds: usize) -> Result<Self> {
        Ok(Self {
            qbar: qbar_from_theory(epsilon, delta, n_clients, rounds)?,
            epsilon,
            delta,
        })
    }
}

/// `6 (1+eps)/(1-eps) ln(4 N T / delta) / eps^2`.
pub fn qbar_from_theory(epsilon: f64, delta: f64, n_clients: usize, rounds: usize) -> Result<f64> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "epsilon must lie in (0, 1), got {epsilon}"
        )));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "delta must lie in (0, 1), got {delta}"
        )));
    }
    let nt = (n_clients as f64) * (rounds as f64);
    if !(nt >= 1.0) {
        return Err(Error::InvalidParameter("N * T must be at least 1".into()));
    }
    Ok(6.0 * (1.0 + epsilon) / (1.0 - epsilon) * (4.0 * nt / delta).ln() / (epsilon * epsilon))
}

/// Inclusion probability `min(1, qbar * variance)`.
#[inline]
pub fn inclusion_probability(qbar: f64, variance: f64) -> f64 {
    (qbar * variance.max(0.0)).min(1.0)
}

/// Keeps each index independently with probability `min(1, qbar * var(s))`.
///
/// One uniform is drawn per index regardless of its probability, so the
/// stream position after the call depends only on `indices.len()`. If
/// nothing is drawn from a nonempty input, the index with the largest
/// probability is kept (smallest index on ties).
pub fn rls_sample<F, R>(indices: &[usize], variance_of: F, qbar: f64, rng: &mut R) -> Vec<usize>
where
    F: Fn(usize) -> f64,
    R: Rng + ?Sized,
{
    let mut kept = Vec::new();
    let mut best: Option<(f64, usize)> = None;
    for &s in indices {
        let p = inclusion_probability(qbar, variance_of(s));
        let u: f64 = rng.random();
        if u < p {
            kept.push(s);
        }
        best = match best {
            Some((bp, bs)) if bp > p || (bp == p && bs < s) => Some((bp, bs)),
            _ => Some((p, s)),
        };
    }
    if kept.is_empty() {
        if let Some((_, s)) = best {
            kept.push(s);
        }
    }
    kept
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn certain_inclusion() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let idx = [3, 7, 9];
        assert_eq!(rls_sample(&idx, |_| 2.0, 1.0, &mut rng), vec![3, 7, 9]);
    }

    #[test]
    fn all_zero_variances_force_smallest() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(rls_sample(&[8, 2, 5], |_| 0.0, 10.0, &mut rng), vec![2]);
        let empty: Vec<usize> = rls_sample(&[], |_| 1.0, 10.0, &mut rng);
        assert!(empty.is_empty());
    }

    #[test]
    fn forced_pick_is_the_most_likely() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let var = |s: usize| if s == 5 { 1e-9 } else { 1e-12 };
        assert_eq!(rls_sample(&[1, 5, 9], var, 1.0, &mut rng), vec![5]);
    }

    #[test]
    fn deterministic_per_seed() {
        let idx: Vec<usize> = (0..50).collect();
        let var = |s: usize| s as f64 / 100.0;
        let a = rls_sample(&idx, var, 1.0, &mut ChaCha8Rng::seed_from_u64(42));
        let b = rls_sample(&idx, var, 1.0, &mut ChaCha8Rng::seed_from_u64(42));
        assert_eq!(a, b);
        assert!(a.iter().all(|s| idx.contains(s)));
    }

    #[test]
    fn qbar_formula() {
        // ln(4NT/delta) = 2 with N = T = 1, delta = 4/e^2
        let delta = 4.0 / 1f64.exp().powi(2);
        let q = qbar_from_theory(0.5, delta, 1, 1).unwrap();
        assert!((q - 144.0).abs() < 1e-10);

        let a = qbar_from_theory(0.25, 0.05, 10, 50).unwrap();
        let b = qbar_from_theory(0.25, 0.05, 20, 50).unwrap();
        let step = 6.0 * (1.25 / 0.75) * 2f64.ln() / 0.0625;
        assert!((b - a - step).abs() < 1e-9);

        assert!(qbar_from_theory(1.0, 0.1, 1, 1).is_err());
        assert!(qbar_from_theory(0.5, 1.0, 1, 1).is_err());
        assert!(qbar_from_theory(0.5, 0.1, 0, 1).is_err());
    }
}
