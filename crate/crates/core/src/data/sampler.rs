//! Minibatch samplers over a subset of dataset indices.

use rand::seq::SliceRandom;
use rand::Rng as _;

use crate::error::{Error, Result};
use crate::rng::{rng_from_seed, Rng};

use super::dataset::Dataset;

/// Infinite stream of group-balanced batches.
///
/// Each batch holds exactly `batch_size / n_groups` samples per group, drawn
/// uniformly with replacement from that group's pool, so minority groups are
/// upsampled.
#[derive(Debug, Clone)]
pub struct BalancedBatches {
    pools: Vec<Vec<usize>>,
    per_group: usize,
    rng: Rng,
}

impl BalancedBatches {
    pub fn new(dataset: &Dataset, indices: &[usize], batch_size: usize, seed: u64) -> Result<Self> {
        let k = dataset.n_groups();
        if batch_size == 0 || batch_size % k != 0 {
            return Err(Error::config(format!(
                "batch size {batch_size} is not a positive multiple of the {k} groups"
            )));
        }
        let mut pools = vec![Vec::new(); k];
        for &i in indices {
            pools[dataset.samples()[i].group].push(i);
        }
        if let Some(g) = pools.iter().position(Vec::is_empty) {
            return Err(Error::data(format!(
                "group {:?} has no samples to draw from",
                dataset.group_vocab()[g]
            )));
        }
        Ok(BalancedBatches {
            pools,
            per_group: batch_size / k,
            rng: rng_from_seed(seed),
        })
    }
}

impl Iterator for BalancedBatches {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let mut batch = Vec::with_capacity(self.per_group * self.pools.len());
        for pool in &self.pools {
            for _ in 0..self.per_group {
                batch.push(pool[self.rng.random_range(0..pool.len())]);
            }
        }
        Some(batch)
    }
}

/// Infinite stream of batches drawn by reshuffled passes over the indices.
#[derive(Debug, Clone)]
pub struct UniformBatches {
    pool: Vec<usize>,
    cursor: usize,
    batch_size: usize,
    rng: Rng,
}

impl UniformBatches {
    pub fn new(indices: &[usize], batch_size: usize, seed: u64) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::data("cannot sample from an empty index set"));
        }
        if batch_size == 0 {
            return Err(Error::config("batch size must be positive"));
        }
        let mut rng = rng_from_seed(seed);
        let mut pool = indices.to_vec();
        pool.shuffle(&mut rng);
        Ok(UniformBatches {
            pool,
            cursor: 0,
            batch_size,
            rng,
        })
    }
}

impl Iterator for UniformBatches {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let mut batch = Vec::with_capacity(self.batch_size);
        while batch.len() < self.batch_size {
            if self.cursor == self.pool.len() {
                self.pool.shuffle(&mut self.rng);
                self.cursor = 0;
            }
            batch.push(self.pool[self.cursor]);
            self.cursor += 1;
        }
        Some(batch)
    }
}

/// Either sampler behind one type.
#[derive(Debug, Clone)]
pub enum Batches {
    Balanced(BalancedBatches),
    Uniform(UniformBatches),
}

impl Iterator for Batches {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        match self {
            Batches::Balanced(b) => b.next(),
            Batches::Uniform(u) => u.next(),
        }
    }
}

/// Convenience constructor for [`BalancedBatches`].
pub fn balanced_batches(dataset: &Dataset, indices: &[usize], batch_size: usize, seed: u64) -> Result<BalancedBatches> {
    BalancedBatches::new(dataset, indices, batch_size, seed)
}
