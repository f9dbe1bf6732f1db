use std::collections::HashSet;

use super::config::{KeyOrder, KeyPattern, WorkloadConfig};
use super::popularity::PopularityModel;
use super::rng::WorkloadRng;
use super::WorkloadError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Operation {
    Fetch { key: u64 },
    Insert { key: u64, value: u64 },
    Delete { key: u64 },
}

impl Operation {
    #[inline]
    pub fn key(&self) -> u64 {
        match *self {
            Operation::Fetch { key } | Operation::Insert { key, .. } | Operation::Delete { key } => key,
        }
    }

    /// Opcode used by the workload file.
    pub fn opcode(&self) -> u8 {
        match self {
            Operation::Fetch { .. } => 0,
            Operation::Insert { .. } => 1,
            Operation::Delete { .. } => 2,
        }
    }
}

/// Preloaded keys plus a seeded, reproducible stream of operations.
///
/// Random draws happen in a fixed order: preload keys (random pattern only),
/// preload values, the rank permutation (random order only), then per
/// operation the kind and whatever the kind needs. Churn is applied before
/// operation `i` whenever `i` is a positive multiple of `dist_shift_freq`.
#[derive(Clone, Debug)]
pub struct Workload {
    config: WorkloadConfig,
    preload: Vec<(u64, u64)>,
    model: PopularityModel,
    rng: WorkloadRng,
    present: HashSet<u64>,
    next_sequential: u64,
    emitted: u64,
    churn_events: u64,
}

impl Workload {
    pub fn new(config: WorkloadConfig) -> Result<Self, WorkloadError> {
        config.validate()?;
        let mut rng = WorkloadRng::new(config.random_seed);
        let n = config.initial_size as usize;

        let mut present = HashSet::with_capacity(n);
        let keys: Vec<u64> = match config.key_pattern {
            KeyPattern::Sequential => {
                let keys: Vec<u64> = (1..=config.initial_size).collect();
                present.extend(keys.iter().copied());
                keys
            }
            KeyPattern::Random => {
                let mut keys = Vec::with_capacity(n);
                while keys.len() < n {
                    let k = rng.next_u64();
                    if present.insert(k) {
                        keys.push(k);
                    }
                }
                keys
            }
        };
        let preload: Vec<(u64, u64)> = keys.iter().map(|&k| (k, rng.next_u64())).collect();

        let keys_by_rank = match config.key_order {
            KeyOrder::Random => {
                let mut perm = keys;
                rng.shuffle(&mut perm);
                perm
            }
            KeyOrder::Sorted => {
                let mut rev = keys;
                rev.reverse();
                rev
            }
        };
        let model = PopularityModel::new(config.zipf, keys_by_rank);

        Ok(Self {
            next_sequential: config.initial_size + 1,
            config,
            preload,
            model,
            rng,
            present,
            emitted: 0,
            churn_events: 0,
        })
    }

    pub fn config(&self) -> &WorkloadConfig {
        &self.config
    }

    /// `(key, value)` pairs in insertion order.
    pub fn preload(&self) -> &[(u64, u64)] {
        &self.preload
    }

    pub fn model(&self) -> &PopularityModel {
        &self.model
    }

    pub fn emitted(&self) -> u64 {
        self.emitted
    }

    pub fn remaining(&self) -> u64 {
        self.config.operation_count - self.emitted
    }

    pub fn churn_events(&self) -> u64 {
        self.churn_events
    }

    fn fresh_key(&mut self) -> u64 {
        match self.config.key_pattern {
            KeyPattern::Sequential => {
                let k = self.next_sequential;
                self.next_sequential += 1;
                k
            }
            KeyPattern::Random => loop {
                let k = self.rng.next_u64();
                if !self.present.contains(&k) {
                    return k;
                }
            },
        }
    }

    pub fn next_op(&mut self) -> Option<Operation> {
        if self.emitted >= self.config.operation_count {
            return None;
        }
        let c = &self.config;
        if c.churn_enabled() && self.emitted > 0 && self.emitted.is_multiple_of(c.dist_shift_freq) && self.model.population() > 0 {
            let prct = c.dist_shift_prct;
            self.model.apply_churn(&mut self.rng, prct);
            self.churn_events += 1;
        }
        self.emitted += 1;

        let c = &self.config;
        if c.fetch_proportion >= 1.0 {
            return Some(Operation::Fetch { key: self.model.sample_key(&mut self.rng) });
        }
        let u = self.rng.next_f64();
        let op = if u < c.fetch_proportion {
            if self.model.population() == 0 {
                Operation::Fetch { key: self.fresh_key() }
            } else {
                Operation::Fetch { key: self.model.sample_key(&mut self.rng) }
            }
        } else if u < c.fetch_proportion + c.insert_proportion {
            let key = self.fresh_key();
            let value = self.rng.next_u64();
            let rank = 1 + self.rng.below(self.model.population() as u64 + 1) as usize;
            self.model.insert_at_rank(rank, key);
            self.present.insert(key);
            Operation::Insert { key, value }
        } else if self.model.population() == 0 {
            // Nothing left to delete or fetch.
            Operation::Fetch { key: self.fresh_key() }
        } else {
            let rank = 1 + self.rng.below(self.model.population() as u64) as usize;
            let key = self.model.remove_at_rank(rank);
            self.present.remove(&key);
            Operation::Delete { key }
        };
        Some(op)
    }

    /// Appends up to `max` operations to `buf`, returning how many were added.
    pub fn fill_batch(&mut self, buf: &mut Vec<Operation>, max: usize) -> usize {
        let start = buf.len();
        while buf.len() - start < max {
            match self.next_op() {
                Some(op) => buf.push(op),
                None => break,
            }
        }
        buf.len() - start
    }
}

impl Iterator for Workload {
    type Item = Operation;

    fn next(&mut self) -> Option<Operation> {
        self.next_op()
    }
}
