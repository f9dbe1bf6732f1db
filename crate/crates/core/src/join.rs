//! Primary-key / foreign-key hash join.
//!
//! `R` holds keys `1..=|R|`. `S` draws its keys from a Zipf distribution
//! over a seeded random permutation of `R`'s keys. The build phase inserts
//! every `R` tuple; the probe phase looks up every `S` key and records the
//! index pair of each match. The VIP variant runs learn+adapt for the first
//! `min(|R|, floor(|S| / 61))` probes and plain lookups afterwards.

use std::time::Instant;

use thiserror::Error;

use crate::adapt::{NoopReclaim, RequestCounts};
use crate::table::{ChainedTable, TableConfig};
use crate::workload::{PopularityModel, WorkloadRng};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum JoinError {
    #[error("invalid join configuration: {0}")]
    InvalidConfig(String),
    #[error("probe tuple {probe_index} has key {key} with no match in the build relation")]
    JoinIntegrity { probe_index: usize, key: u64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RelationRole {
    PrimaryKey,
    ForeignKey,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Relation {
    pub role: RelationRole,
    /// `(key, payload)`
    pub tuples: Vec<(u64, u64)>,
}

impl Relation {
    pub fn len(&self) -> usize {
        self.tuples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tuples.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JoinConfig {
    pub pk_cardinality: u64,
    /// `|S| / |R|`.
    pub ratio: u64,
    pub zipf: f64,
    pub load_factor: f64,
    pub random_seed: u64,
}

impl Default for JoinConfig {
    fn default() -> Self {
        Self { pk_cardinality: 100_000, ratio: 16, zipf: 2.0, load_factor: 1.4, random_seed: 0 }
    }
}

impl JoinConfig {
    pub fn validate(&self) -> Result<(), JoinError> {
        let bad = |m: &str| Err(JoinError::InvalidConfig(m.into()));
        if self.pk_cardinality == 0 || self.pk_cardinality > u32::MAX as u64 {
            return bad("build cardinality must lie in [1, 2^32)");
        }
        if self.ratio == 0 || self.pk_cardinality.saturating_mul(self.ratio) > u32::MAX as u64 {
            return bad("ratio must be at least 1 and |S| must fit in 32 bits");
        }
        if !(self.zipf.is_finite() && self.zipf >= 0.0) {
            return bad("zipf must be a non-negative number");
        }
        if !(self.load_factor > 0.0 && self.load_factor.is_finite()) {
            return bad("load factor must be positive");
        }
        Ok(())
    }

    pub fn probe_cardinality(&self) -> u64 {
        self.pk_cardinality * self.ratio
    }

    pub fn table_config(&self) -> TableConfig {
        TableConfig::for_load_factor(self.pk_cardinality, self.load_factor)
    }
}

/// Learn-phase probes for the VIP join.
pub fn learn_budget(build: usize, probe: usize) -> usize {
    build.min(probe / 61)
}

pub fn generate_relations(config: &JoinConfig) -> Result<(Relation, Relation), JoinError> {
    config.validate()?;
    let mut rng = WorkloadRng::new(config.random_seed);
    let r: Vec<(u64, u64)> = (1..=config.pk_cardinality).map(|k| (k, rng.next_u64())).collect();
    let mut by_rank: Vec<u64> = (1..=config.pk_cardinality).collect();
    rng.shuffle(&mut by_rank);
    let model = PopularityModel::new(config.zipf, by_rank);
    let s: Vec<(u64, u64)> = (0..config.probe_cardinality()).map(|_| (model.sample_key(&mut rng), rng.next_u64())).collect();
    Ok((
        Relation { role: RelationRole::PrimaryKey, tuples: r },
        Relation { role: RelationRole::ForeignKey, tuples: s },
    ))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum JoinEngine {
    Default,
    Vip,
}

#[derive(Clone, Debug, PartialEq)]
pub struct JoinReport {
    pub engine: JoinEngine,
    pub bucket_count: usize,
    pub build_ns: u64,
    pub probe_ns: u64,
    /// Part of `probe_ns` spent in learn+adapt probes.
    pub learn_ns: u64,
    pub learn_probes: usize,
    pub output_cardinality: usize,
    pub total_displacement: u64,
    pub avg_displacement: f64,
    /// `(build index, probe index)` of every match, in probe order.
    pub output: Vec<(u32, u32)>,
}

pub fn hash_join(r: &Relation, s: &Relation, config: TableConfig, engine: JoinEngine) -> Result<JoinReport, JoinError> {
    if r.role != RelationRole::PrimaryKey || s.role != RelationRole::ForeignKey {
        return Err(JoinError::InvalidConfig("build side must be the primary-key relation".into()));
    }
    let t0 = Instant::now();
    let mut table = ChainedTable::with_capacity(config, r.len());
    for (i, &(k, _)) in r.tuples.iter().enumerate() {
        table.insert(k, i as u64);
    }
    let build_ns = t0.elapsed().as_nanos() as u64;

    let budget = match engine {
        JoinEngine::Default => 0,
        JoinEngine::Vip => learn_budget(r.len(), s.len()),
    };
    let mut output = Vec::with_capacity(s.len());
    let mut total_displacement = 0u64;
    let miss = |i: usize| JoinError::JoinIntegrity { probe_index: i, key: s.tuples[i].0 };

    let t1 = Instant::now();
    if budget > 0 {
        let mut counts = RequestCounts::begin_learn(&table);
        for (i, &(k, _)) in s.tuples[..budget].iter().enumerate() {
            let f = counts.fetch_adaptive(&mut table, k);
            let Some(ri) = f.value else { return Err(miss(i)) };
            total_displacement += f.displacement as u64;
            output.push((ri as u32, i as u32));
        }
        counts.end_learn(&mut NoopReclaim);
    }
    let learn_ns = t1.elapsed().as_nanos() as u64;
    for (i, &(k, _)) in s.tuples.iter().enumerate().skip(budget) {
        let f = table.fetch(k);
        let Some(ri) = f.value else { return Err(miss(i)) };
        total_displacement += f.displacement as u64;
        output.push((ri as u32, i as u32));
    }
    let probe_ns = t1.elapsed().as_nanos() as u64;

    Ok(JoinReport {
        engine,
        bucket_count: table.bucket_count(),
        build_ns,
        probe_ns,
        learn_ns,
        learn_probes: budget,
        output_cardinality: output.len(),
        total_displacement,
        avg_displacement: if s.is_empty() { 0.0 } else { total_displacement as f64 / s.len() as f64 },
        output,
    })
}

/// Medians over a seed sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct ComparisonReport {
    pub seeds: Vec<u64>,
    pub default_avg_displacement: f64,
    pub vip_avg_displacement: f64,
    pub default_probe_ns: f64,
    pub vip_probe_ns: f64,
    pub default_total_ns: f64,
    pub vip_total_ns: f64,
    pub learn_probes: usize,
    pub output_cardinality: usize,
    pub trials: Vec<(JoinReport, JoinReport)>,
}

impl ComparisonReport {
    /// `(vip - default) / default` of the median end-to-end join time.
    pub fn time_delta(&self) -> f64 {
        (self.vip_total_ns - self.default_total_ns) / self.default_total_ns
    }

    pub fn displacement_delta(&self) -> f64 {
        self.vip_avg_displacement - self.default_avg_displacement
    }
}

pub fn median(values: &mut [f64]) -> f64 {
    assert!(!values.is_empty());
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

/// Runs both engines on the same data for every seed. Output pairs are
/// dropped from the per-trial reports to bound memory.
pub fn compare_join(config: &JoinConfig, seeds: &[u64]) -> Result<ComparisonReport, JoinError> {
    if seeds.is_empty() {
        return Err(JoinError::InvalidConfig("at least one seed is required".into()));
    }
    let mut trials = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        let c = JoinConfig { random_seed: seed, ..*config };
        let (r, s) = generate_relations(&c)?;
        let tc = c.table_config();
        let mut d = hash_join(&r, &s, tc, JoinEngine::Default)?;
        let mut v = hash_join(&r, &s, tc, JoinEngine::Vip)?;
        d.output = Vec::new();
        v.output = Vec::new();
        trials.push((d, v));
    }
    let med = |f: &dyn Fn(&(JoinReport, JoinReport)) -> f64| median(&mut trials.iter().map(f).collect::<Vec<_>>());
    Ok(ComparisonReport {
        seeds: seeds.to_vec(),
        default_avg_displacement: med(&|t| t.0.avg_displacement),
        vip_avg_displacement: med(&|t| t.1.avg_displacement),
        default_probe_ns: med(&|t| t.0.probe_ns as f64),
        vip_probe_ns: med(&|t| t.1.probe_ns as f64),
        default_total_ns: med(&|t| (t.0.build_ns + t.0.probe_ns) as f64),
        vip_total_ns: med(&|t| (t.1.build_ns + t.1.probe_ns) as f64),
        learn_probes: trials[0].1.learn_probes,
        output_cardinality: trials[0].1.output_cardinality,
        trials,
    })
}
