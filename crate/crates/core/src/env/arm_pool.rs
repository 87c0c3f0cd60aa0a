//! Arm pools loaded from preprocessed datasets.
//!
//! File format: a CSV with header `f0,f1,...,f{d-1},reward`, one arm per
//! row, `.` as decimal separator. Feature rows are typically cluster
//! centroids and the reward column the averaged response of the cluster.

use std::io::{Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{CandidateSet, Environment};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ArmPool {
    pub features: Vec<Vec<f64>>,
    pub rewards: Vec<f64>,
}

impl ArmPool {
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.first().map_or(0, Vec::len)
    }

    pub fn from_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(true)
            .from_reader(reader);
        let header = rdr.headers().map_err(|e| csv_error(e, 1))?.clone();
        let cols: Vec<&str> = header.iter().map(str::trim).collect();
        if cols.last() != Some(&"reward") {
            return Err(Error::Schema(format!(
                "last column must be `reward`, header is `{}`",
                cols.join(",")
            )));
        }
        let d = cols.len() - 1;
        for (i, c) in cols[..d].iter().enumerate() {
            if *c != format!("f{i}") {
                return Err(Error::Schema(format!("column {i} must be `f{i}`, found `{c}`")));
            }
        }
        let mut features = Vec::new();
        let mut rewards = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| csv_error(e, 0))?;
            let line = rec.position().map_or(0, |p| p.line());
            if rec.len() != d + 1 {
                return Err(Error::Parse {
                    line,
                    message: format!("expected {} fields, found {}", d + 1, rec.len()),
                });
            }
            let mut row = Vec::with_capacity(d + 1);
            for (j, field) in rec.iter().enumerate() {
                let v: f64 = field.trim().parse().map_err(|_| Error::Parse {
                    line,
                    message: format!("`{field}` in column {} is not a number", cols[j]),
                })?;
                if !v.is_finite() {
                    return Err(Error::Parse {
                        line,
                        message: format!("non-finite value `{field}` in column {}", cols[j]),
                    });
                }
                row.push(v);
            }
            rewards.push(row.pop().expect("reward column"));
            features.push(row);
        }
        Ok(Self { features, rewards })
    }

    pub fn to_writer<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(writer);
        let d = self.dim();
        let mut header: Vec<String> = (0..d).map(|i| format!("f{i}")).collect();
        header.push("reward".into());
        w.write_record(&header).map_err(|e| csv_error(e, 0))?;
        for (x, r) in self.features.iter().zip(&self.rewards) {
            let row: Vec<String> = x.iter().chain(std::iter::once(r)).map(|v| format!("{v}")).collect();
            w.write_record(&row).map_err(|e| csv_error(e, 0))?;
        }
        w.flush()?;
        Ok(())
    }
}

fn csv_error(e: csv::Error, fallback_line: u64) -> Error {
    let line = e.position().map_or(fallback_line, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Parse {
            line,
            message: format!("{other:?}"),
        },
    }
}

pub fn load_arm_pool(path: impl AsRef<Path>) -> Result<ArmPool> {
    ArmPool::from_reader(std::fs::File::open(path)?)
}

pub fn write_arm_pool(pool: &ArmPool, path: impl AsRef<Path>) -> Result<()> {
    pool.to_writer(std::fs::File::create(path)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CandidatePolicy {
    /// `k` arms drawn uniformly with replacement.
    UniformK,
    /// One arm with reward 1 at a random position, the rest with reward 0.
    OnePositiveRestNegative,
}

#[derive(Debug, Clone)]
pub struct ArmPoolEnv {
    pool: ArmPool,
    policy: CandidatePolicy,
    candidate_size: usize,
    noise_std: f64,
    positives: Vec<usize>,
    negatives: Vec<usize>,
    rng: ChaCha8Rng,
}

impl ArmPoolEnv {
    pub fn new(
        pool: ArmPool,
        policy: CandidatePolicy,
        candidate_size: usize,
        noise_std: f64,
        seed: u64,
    ) -> Result<Self> {
        if pool.is_empty() || pool.dim() == 0 {
            return Err(Error::Schema("arm pool has no arms or no feature columns".into()));
        }
        if candidate_size == 0 || candidate_size > pool.len() {
            return Err(Error::Config(format!(
                "candidate size {candidate_size} must lie in [1, {}]",
                pool.len()
            )));
        }
        if !(noise_std >= 0.0 && noise_std.is_finite()) {
            return Err(Error::Config(format!("noise std must be nonnegative, got {noise_std}")));
        }
        let positives: Vec<usize> = (0..pool.len()).filter(|&i| pool.rewards[i] == 1.0).collect();
        let negatives: Vec<usize> = (0..pool.len()).filter(|&i| pool.rewards[i] == 0.0).collect();
        if policy == CandidatePolicy::OnePositiveRestNegative
            && (positives.is_empty() || negatives.len() < candidate_size - 1)
        {
            return Err(Error::Config(format!(
                "one-positive policy needs 1 arm with reward 1 and {} with reward 0; pool has {} and {}",
                candidate_size - 1,
                positives.len(),
                negatives.len()
            )));
        }
        Ok(Self {
            pool,
            policy,
            candidate_size,
            noise_std,
            positives,
            negatives,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn pool(&self) -> &ArmPool {
        &self.pool
    }
}

impl Environment for ArmPoolEnv {
    fn dim(&self) -> usize {
        self.pool.dim()
    }

    fn draw_candidates(&mut self) -> Result<CandidateSet> {
        let k = self.candidate_size;
        let picks: Vec<usize> = match self.policy {
            CandidatePolicy::UniformK => (0..k).map(|_| self.rng.random_range(0..self.pool.len())).collect(),
            CandidatePolicy::OnePositiveRestNegative => {
                let pos = self.positives[self.rng.random_range(0..self.positives.len())];
                let mut v: Vec<usize> = (1..k)
                    .map(|_| self.negatives[self.rng.random_range(0..self.negatives.len())])
                    .collect();
                let at = self.rng.random_range(0..k);
                v.insert(at, pos);
                v
            }
        };
        let features = picks.iter().map(|&i| self.pool.features[i].clone()).collect();
        let means = picks.iter().map(|&i| self.pool.rewards[i]).collect();
        Ok(CandidateSet::new(features, means))
    }

    fn observe(&mut self, candidates: &CandidateSet, choice: usize) -> Result<f64> {
        if choice >= candidates.len() {
            return Err(Error::InvalidParameter(format!(
                "arm {choice} out of range for {} candidates",
                candidates.len()
            )));
        }
        let eta: f64 = self.rng.sample(StandardNormal);
        Ok(candidates.mean(choice) + self.noise_std * eta)
    }
}
