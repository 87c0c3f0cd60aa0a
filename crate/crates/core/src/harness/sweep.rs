use std::fmt::Write as _;

use serde::Deserialize;

use super::config::{AlphaConfig, Algorithm, ExperimentConfig};
use super::run::run;
use super::trace::fmt_f64;
use crate::error::{Error, Result};

/// Axes of a sweep. Every absent axis keeps the base config's value.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepGrid {
    #[serde(default)]
    pub algorithm: Vec<Algorithm>,
    /// Constant exploration widths.
    #[serde(default)]
    pub alpha: Vec<f64>,
    /// Gaussian kernel bandwidths.
    #[serde(default)]
    pub gamma: Vec<f64>,
    #[serde(default)]
    pub threshold: Vec<f64>,
    #[serde(default)]
    pub lambda: Vec<f64>,
}

impl SweepGrid {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }

    /// Cartesian product in the order algorithm, alpha, gamma, threshold,
    /// lambda (last axis fastest). Every point is validated up front.
    pub fn expand(&self, base: &ExperimentConfig) -> Result<Vec<ExperimentConfig>> {
        fn axis<T: Copy>(v: &[T]) -> Vec<Option<T>> {
            if v.is_empty() {
                vec![None]
            } else {
                v.iter().copied().map(Some).collect()
            }
        }
        let mut out = Vec::new();
        for algo in axis(&self.algorithm) {
            for alpha in axis(&self.alpha) {
                for gamma in axis(&self.gamma) {
                    for threshold in axis(&self.threshold) {
                        for lambda in axis(&self.lambda) {
                            let mut c = base.clone();
                            if let Some(a) = algo {
                                c.algorithm = a;
                            }
                            if let Some(a) = alpha {
                                c.alpha = AlphaConfig::GridConstant { value: a };
                            }
                            if let Some(g) = gamma {
                                c.kernel.gamma = g;
                            }
                            if threshold.is_some() {
                                c.threshold = threshold;
                            }
                            if let Some(l) = lambda {
                                c.lambda = l;
                            }
                            c.validate()?;
                            out.push(c);
                        }
                    }
                }
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub algorithm: Algorithm,
    pub alpha: Option<f64>,
    pub gamma: f64,
    pub threshold: f64,
    pub lambda: f64,
    pub seed: u64,
    pub cum_regret: f64,
    pub cum_comm_scalars: u64,
    pub sync_count: usize,
    pub gamma_hat: f64,
}

pub const SUMMARY_HEADER: &str =
    "algorithm,alpha,gamma,threshold,lambda,seed,cum_regret,cum_comm_scalars,sync_count,gamma_hat";

pub fn sweep(base: &ExperimentConfig, grid: &SweepGrid) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::new();
    for cfg in grid.expand(base)? {
        let alpha = match cfg.alpha {
            AlphaConfig::GridConstant { value } => Some(value),
            AlphaConfig::Theory { .. } => None,
        };
        for out in run(&cfg)? {
            rows.push(SweepRow {
                algorithm: cfg.algorithm,
                alpha,
                gamma: cfg.kernel.gamma,
                threshold: cfg.threshold(),
                lambda: cfg.lambda,
                seed: out.seed,
                cum_regret: out.trace.cumulative_regret(),
                cum_comm_scalars: out.trace.cumulative_scalars(),
                sync_count: out.sync_count(),
                gamma_hat: out.gamma_hat(),
            });
        }
    }
    Ok(rows)
}

pub fn summary_csv(rows: &[SweepRow]) -> String {
    let mut out = String::new();
    out.push_str(SUMMARY_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            r.algorithm,
            r.alpha.map_or("theory".to_string(), fmt_f64),
            fmt_f64(r.gamma),
            fmt_f64(r.threshold),
            fmt_f64(r.lambda),
            r.seed,
            fmt_f64(r.cum_regret),
            r.cum_comm_scalars,
            r.sync_count,
            fmt_f64(r.gamma_hat)
        );
    }
    out
}
