//! Label sources: Bernoulli simulation from a true model, or fixed replayed labels.

use alloc::vec::Vec;

use rand::distr::{Bernoulli, Distribution};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::model::{ArmSet, TrueModel};
use crate::{CoreError, Result};

/// Anything that answers "which response is preferred for arm `i`".
pub trait LabelOracle {
    fn query(&mut self, arm: usize) -> Result<bool>;

    /// Queries `arm` `count` times and returns the number of positive labels.
    fn query_many(&mut self, arm: usize, count: u64) -> Result<u64> {
        let mut ones = 0;
        for _ in 0..count {
            ones += u64::from(self.query(arm)?);
        }
        Ok(ones)
    }

    /// Total labels served so far.
    fn calls(&self) -> u64;

    fn n_arms(&self) -> usize;
}

/// Draws `y ~ Bernoulli(ψ(zᵀθ*))` from a seeded ChaCha8 stream.
#[derive(Debug, Clone)]
pub struct SimulatedOracle {
    dists: Vec<Bernoulli>,
    rng: ChaCha8Rng,
    calls: u64,
}

impl SimulatedOracle {
    pub fn new(arms: &ArmSet, model: &TrueModel, seed: u64) -> Result<Self> {
        let dists = model
            .probabilities(arms)?
            .into_iter()
            .map(|p| Bernoulli::new(p).map_err(|_| CoreError::Domain("label probability outside [0, 1]")))
            .collect::<Result<Vec<_>>>()?;
        Ok(SimulatedOracle { dists, rng: ChaCha8Rng::seed_from_u64(seed), calls: 0 })
    }
}

impl LabelOracle for SimulatedOracle {
    fn query(&mut self, arm: usize) -> Result<bool> {
        let dist = self.dists.get(arm).ok_or(CoreError::InvalidIndex { index: arm, len: self.dists.len() })?;
        self.calls += 1;
        Ok(dist.sample(&mut self.rng))
    }

    fn query_many(&mut self, arm: usize, count: u64) -> Result<u64> {
        let dist = *self.dists.get(arm).ok_or(CoreError::InvalidIndex { index: arm, len: self.dists.len() })?;
        let mut ones = 0;
        for _ in 0..count {
            ones += u64::from(dist.sample(&mut self.rng));
        }
        self.calls += count;
        Ok(ones)
    }

    fn calls(&self) -> u64 {
        self.calls
    }

    fn n_arms(&self) -> usize {
        self.dists.len()
    }
}

/// Returns one fixed recorded label per arm, however often it is asked.
#[derive(Debug, Clone)]
pub struct ReplayOracle {
    labels: Vec<bool>,
    calls: u64,
}

impl ReplayOracle {
    pub fn new(labels: Vec<bool>) -> Self {
        ReplayOracle { labels, calls: 0 }
    }

    pub fn labels(&self) -> &[bool] {
        &self.labels
    }
}

impl LabelOracle for ReplayOracle {
    fn query(&mut self, arm: usize) -> Result<bool> {
        let y = *self.labels.get(arm).ok_or(CoreError::InvalidIndex { index: arm, len: self.labels.len() })?;
        self.calls += 1;
        Ok(y)
    }

    fn query_many(&mut self, arm: usize, count: u64) -> Result<u64> {
        let y = self.query(arm)?;
        self.calls += count.saturating_sub(1);
        Ok(if y { count } else { 0 })
    }

    fn calls(&self) -> u64 {
        self.calls
    }

    fn n_arms(&self) -> usize {
        self.labels.len()
    }
}

/// Either label source behind one type.
#[derive(Debug, Clone)]
pub enum QueryOracle {
    Simulate(SimulatedOracle),
    Replay(ReplayOracle),
}

impl LabelOracle for QueryOracle {
    fn query(&mut self, arm: usize) -> Result<bool> {
        match self {
            QueryOracle::Simulate(o) => o.query(arm),
            QueryOracle::Replay(o) => o.query(arm),
        }
    }

    fn query_many(&mut self, arm: usize, count: u64) -> Result<u64> {
        match self {
            QueryOracle::Simulate(o) => o.query_many(arm, count),
            QueryOracle::Replay(o) => o.query_many(arm, count),
        }
    }

    fn calls(&self) -> u64 {
        match self {
            QueryOracle::Simulate(o) => o.calls(),
            QueryOracle::Replay(o) => o.calls(),
        }
    }

    fn n_arms(&self) -> usize {
        match self {
            QueryOracle::Simulate(o) => o.n_arms(),
            QueryOracle::Replay(o) => o.n_arms(),
        }
    }
}
