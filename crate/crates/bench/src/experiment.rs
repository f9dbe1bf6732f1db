//! Named experiments and the batch runner.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use anyhow::{bail, Result};
use viphash::controller::{ControllerParams, TriggerEvent};
use viphash::hash::{bucket_index, hash};
use viphash::join::JoinConfig;
use viphash::table::{ChainedTable, TableConfig, MIN_BUCKET_COUNT_LOG2};
use viphash::workload::{Operation, PopularityModel, Workload, WorkloadConfig};

use crate::engine::{build_engine, EngineKind};
use crate::metrics::{throughput, trigger_counts, BatchMetrics, SummaryRow, TriggerRecord};

pub const BATCH_OPS: usize = 1_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ExperimentName {
    Roofline,
    RooflineLf,
    CounterOverhead,
    Static,
    MediumChurn,
    HighChurn,
    SteadyState,
    ReadMostly,
    Join,
}

impl ExperimentName {
    pub const ALL: [ExperimentName; 9] = [
        ExperimentName::Roofline,
        ExperimentName::RooflineLf,
        ExperimentName::CounterOverhead,
        ExperimentName::Static,
        ExperimentName::MediumChurn,
        ExperimentName::HighChurn,
        ExperimentName::SteadyState,
        ExperimentName::ReadMostly,
        ExperimentName::Join,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentName::Roofline => "roofline",
            ExperimentName::RooflineLf => "roofline-lf",
            ExperimentName::CounterOverhead => "counter-overhead",
            ExperimentName::Static => "static",
            ExperimentName::MediumChurn => "medium-churn",
            ExperimentName::HighChurn => "high-churn",
            ExperimentName::SteadyState => "steady-state",
            ExperimentName::ReadMostly => "read-mostly",
            ExperimentName::Join => "join",
        }
    }
}

impl fmt::Display for ExperimentName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentName {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        ExperimentName::ALL.into_iter().find(|e| e.name() == s).ok_or_else(|| format!("unknown experiment `{s}`"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Scale {
    Desk,
    Paper,
}

impl FromStr for Scale {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "desk" => Ok(Scale::Desk),
            "paper" => Ok(Scale::Paper),
            _ => Err(format!("unknown scale `{s}`")),
        }
    }
}

/// How the table is sized before the preload goes in.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TableSizing {
    /// The size a table reaches when grown from the minimum by inserting
    /// every preload key.
    Natural,
    FixedLog2(u32),
}

/// Smallest power-of-two bucket count that holds `keys` under the growth rule.
pub fn natural_config(keys: u64) -> TableConfig {
    let base = TableConfig::default();
    let mut log2 = MIN_BUCKET_COUNT_LOG2;
    while keys as f64 > base.load_factor_max * (1u64 << log2) as f64 {
        log2 += 1;
    }
    TableConfig::with_bucket_count_log2(log2)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentSpec {
    pub name: ExperimentName,
    /// Written to the `experiment` column; includes the load factor for
    /// `roofline-lf` points.
    pub label: String,
    pub workload: WorkloadConfig,
    pub sizing: TableSizing,
    pub engines: Vec<EngineKind>,
    pub seeds: Vec<u64>,
    pub scale: Scale,
    pub params: ControllerParams,
    pub batch_ops: usize,
}

pub fn default_seeds() -> Vec<u64> {
    (0..10).collect()
}

impl ExperimentSpec {
    /// The point-query experiments; `join` is handled by [`join_config`].
    pub fn named(name: ExperimentName, scale: Scale) -> Result<Vec<ExperimentSpec>> {
        let desk = scale == Scale::Desk;
        let ops = if desk { 100_000_000 } else { 500_000_000 };
        let base = WorkloadConfig { operation_count: ops, initial_size: 1_000_000, zipf: 1.0, ..Default::default() };
        let mk = |workload: WorkloadConfig, sizing, engines: &[EngineKind]| ExperimentSpec {
            name,
            label: name.name().to_string(),
            workload,
            sizing,
            engines: engines.to_vec(),
            seeds: default_seeds(),
            scale,
            params: ControllerParams::default(),
            batch_ops: BATCH_OPS,
        };
        use EngineKind::{Counter17, Default as Plain, Vip, VipPreconfigured};
        let online = [Plain, Vip, VipPreconfigured];
        let specs = match name {
            ExperimentName::Roofline => {
                let log2 = if desk { 20 } else { 24 };
                let keys = (0.6 * (1u64 << log2) as f64).round() as u64;
                let w = WorkloadConfig { initial_size: keys, operation_count: if desk { ops } else { 1_000_000_000 }, zipf: 2.0, ..base };
                vec![mk(w, TableSizing::FixedLog2(log2), &[Plain, VipPreconfigured])]
            }
            ExperimentName::RooflineLf => {
                let log2 = if desk { 20 } else { 24 };
                [0.5, 0.75, 1.0, 1.25, 1.5]
                    .into_iter()
                    .map(|lf| {
                        let keys = (lf * (1u64 << log2) as f64).round() as u64;
                        let w = WorkloadConfig { initial_size: keys, operation_count: if desk { ops } else { 1_000_000_000 }, zipf: 2.0, ..base.clone() };
                        let mut s = mk(w, TableSizing::FixedLog2(log2), &[Plain, VipPreconfigured]);
                        s.label = format!("roofline-lf@{lf}");
                        s
                    })
                    .collect()
            }
            ExperimentName::CounterOverhead => {
                // Desk scale keeps the table several times larger than a
                // server last-level cache.
                let keys = if desk { 8_000_000 } else { 1_000_000 };
                vec![mk(WorkloadConfig { zipf: 0.0, initial_size: keys, ..base }, TableSizing::Natural, &[Plain, Counter17])]
            }
            ExperimentName::Static => vec![mk(base, TableSizing::Natural, &online)],
            ExperimentName::MediumChurn => {
                let freq = if desk { 10_000_000 } else { 100_000_000 };
                vec![mk(WorkloadConfig { dist_shift_freq: freq, dist_shift_prct: 25.0, ..base }, TableSizing::Natural, &online)]
            }
            ExperimentName::HighChurn => {
                let freq = if desk { 2_000_000 } else { 10_000_000 };
                vec![mk(WorkloadConfig { dist_shift_freq: freq, dist_shift_prct: 50.0, ..base }, TableSizing::Natural, &online)]
            }
            ExperimentName::SteadyState => vec![mk(
                WorkloadConfig { fetch_proportion: 0.98, insert_proportion: 0.01, delete_proportion: 0.01, ..base },
                TableSizing::Natural,
                &[Plain, Vip],
            )],
            ExperimentName::ReadMostly => vec![mk(
                WorkloadConfig { fetch_proportion: 0.98, insert_proportion: 0.02, ..base },
                TableSizing::Natural,
                &[Plain, Vip],
            )],
            ExperimentName::Join => bail!("join is not a point-query experiment"),
        };
        Ok(specs)
    }

    pub fn table_config(&self) -> TableConfig {
        match self.sizing {
            TableSizing::Natural => natural_config(self.workload.initial_size),
            TableSizing::FixedLog2(l) => TableConfig::with_bucket_count_log2(l),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.workload.validate()?;
        if self.engines.is_empty() {
            bail!("no engines selected");
        }
        if self.seeds.is_empty() {
            bail!("no seeds selected");
        }
        if self.batch_ops == 0 {
            bail!("batch size must be positive");
        }
        if self.engines.contains(&EngineKind::VipPreconfigured) && self.workload.initial_size as f64 > 1.5 * self.table_config().bucket_count() as f64 {
            bail!("preconfigured table would rehash during the preload");
        }
        Ok(())
    }
}

pub fn join_config(scale: Scale) -> JoinConfig {
    match scale {
        Scale::Desk => JoinConfig { pk_cardinality: 100_000, ratio: 16, zipf: 2.0, load_factor: 1.4, random_seed: 0 },
        Scale::Paper => JoinConfig { pk_cardinality: 12_000_000, ratio: 16, zipf: 2.0, load_factor: 1.4, random_seed: 0 },
    }
}

/// Everything one (engine, seed) run produced.
#[derive(Clone, Debug)]
pub struct TrialResult {
    pub engine: EngineKind,
    pub seed: u64,
    pub batches: Vec<BatchMetrics>,
    pub events: Vec<TriggerEvent>,
    pub ops: u64,
    pub elapsed_ns: u64,
    pub fetches: u64,
    pub total_displacement: u64,
    pub misses: u64,
    pub occupancy: [u64; 3],
    /// Fetch results hashed in op order, for cross-engine comparison.
    pub answer_digest: u64,
}

impl TrialResult {
    pub fn throughput(&self) -> f64 {
        throughput(self.ops, self.elapsed_ns)
    }

    pub fn avg_displacement(&self) -> f64 {
        if self.fetches == 0 {
            0.0
        } else {
            self.total_displacement as f64 / self.fetches as f64
        }
    }
}

#[inline]
fn fold_answer(digest: u64, r: &viphash::controller::OpResult) -> u64 {
    use viphash::controller::OpResult;
    let x = match r {
        OpResult::Fetched(f) => f.value.map_or(0x9e37_79b9_7f4a_7c15, |v| v ^ 1),
        OpResult::Inserted(b) => 2 + *b as u64,
        OpResult::Deleted(b) => 4 + *b as u64,
    };
    hash(digest ^ x, 0x5eed)
}

/// Replays one seed's workload on every engine of `spec`. All engines see
/// the same batches; within a batch they run one after another, in an
/// order that rotates from batch to batch so none always runs first.
///
/// With `track_answers` each engine also folds its answers into a digest,
/// which costs one extra pass over the batch outside the timed region.
pub fn run_seed(spec: &ExperimentSpec, seed: u64, track_answers: bool) -> Result<Vec<TrialResult>> {
    spec.validate()?;
    let mut workload = Workload::new(WorkloadConfig { random_seed: seed, ..spec.workload.clone() })?;
    let config = spec.table_config();
    let mut engines: Vec<_> = spec
        .engines
        .iter()
        .map(|&k| build_engine(k, config, workload.preload(), workload.model(), spec.params))
        .collect();
    let mut results: Vec<TrialResult> = spec
        .engines
        .iter()
        .map(|&engine| TrialResult {
            engine,
            seed,
            batches: Vec::new(),
            events: Vec::new(),
            ops: 0,
            elapsed_ns: 0,
            fetches: 0,
            total_displacement: 0,
            misses: 0,
            occupancy: [0; 3],
            answer_digest: 0,
        })
        .collect();

    let mut buf: Vec<Operation> = Vec::with_capacity(spec.batch_ops);
    let mut batch = 0u64;
    loop {
        buf.clear();
        let n = workload.fill_batch(&mut buf, spec.batch_ops);
        if n == 0 {
            break;
        }
        let k = engines.len();
        for j in 0..k {
            let i = (batch as usize + j) % k;
            let engine = &mut engines[i];
            let res = &mut results[i];
            let occ_before = engine.occupancy();
            let ev_before = engine.events().len();
            let (tally, elapsed_ns) = if track_answers {
                let t0 = Instant::now();
                let mut tally = crate::engine::BatchTally::default();
                for op in &buf {
                    let r = engine.step(op);
                    res.answer_digest = fold_answer(res.answer_digest, &r);
                    if let viphash::controller::OpResult::Fetched(f) = r {
                        tally.fetches += 1;
                        tally.total_displacement += f.displacement as u64;
                        tally.misses += !f.found as u64;
                    }
                }
                (tally, t0.elapsed().as_nanos() as u64)
            } else {
                let t0 = Instant::now();
                let tally = engine.run(&buf);
                (tally, t0.elapsed().as_nanos() as u64)
            };
            let occ = engine.occupancy();
            let new_events = &engine.events()[ev_before..];
            let (learn_triggers, sense_triggers) = trigger_counts(new_events);
            res.batches.push(BatchMetrics {
                experiment: spec.label.clone(),
                engine: res.engine.name().to_string(),
                seed,
                batch,
                ops: n as u64,
                elapsed_ns,
                throughput_ops_s: throughput(n as u64, elapsed_ns),
                total_displacement: tally.total_displacement,
                avg_displacement: if tally.fetches == 0 { 0.0 } else { tally.total_displacement as f64 / tally.fetches as f64 },
                miss_count: tally.misses,
                mode_learn_ops: occ[0] - occ_before[0],
                mode_sense_ops: occ[1] - occ_before[1],
                mode_default_ops: occ[2] - occ_before[2],
                learn_triggers,
                sense_triggers,
                warmup: batch == 0,
                trigger_events: new_events.iter().map(TriggerRecord::from).collect(),
            });
            res.ops += n as u64;
            res.elapsed_ns += elapsed_ns;
            res.fetches += tally.fetches;
            res.total_displacement += tally.total_displacement;
            res.misses += tally.misses;
        }
        batch += 1;
    }
    for (res, engine) in results.iter_mut().zip(&engines) {
        res.events = engine.events().to_vec();
        res.occupancy = engine.occupancy();
    }
    Ok(results)
}

#[derive(Clone, Debug)]
pub struct ExperimentReport {
    pub spec: ExperimentSpec,
    pub trials: Vec<TrialResult>,
}

impl ExperimentReport {
    pub fn trials_for(&self, engine: EngineKind) -> impl Iterator<Item = &TrialResult> {
        self.trials.iter().filter(move |t| t.engine == engine)
    }

    pub fn median_of(&self, engine: EngineKind, f: impl Fn(&TrialResult) -> f64) -> f64 {
        let mut v: Vec<f64> = self.trials_for(engine).map(f).collect();
        viphash::join::median(&mut v)
    }

    pub fn batches(&self) -> Vec<BatchMetrics> {
        self.trials.iter().flat_map(|t| t.batches.iter().cloned()).collect()
    }

    pub fn summary(&self) -> Vec<SummaryRow> {
        self.spec
            .engines
            .iter()
            .map(|&e| SummaryRow {
                experiment: self.spec.label.clone(),
                engine: e.name().to_string(),
                seeds: self.trials_for(e).count(),
                median_throughput_ops_s: self.median_of(e, TrialResult::throughput),
                median_avg_displacement: self.median_of(e, TrialResult::avg_displacement),
                median_total_displacement: self.median_of(e, |t| t.total_displacement as f64),
                median_learn_ops: self.median_of(e, |t| t.occupancy[0] as f64),
                median_learn_triggers: self.median_of(e, |t| trigger_counts(&t.events).0 as f64),
            })
            .collect()
    }
}

pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    spec.validate()?;
    let mut trials = Vec::new();
    for &seed in &spec.seeds {
        trials.extend(run_seed(spec, seed, false)?);
    }
    Ok(ExperimentReport { spec: spec.clone(), trials })
}

/// Expected displacement of a fetch under `model` when every chain of a
/// table with `config` is in descending popularity: the smallest value any
/// arrangement of the same buckets can reach.
pub fn optimal_expected_displacement(model: &PopularityModel, config: TableConfig) -> f64 {
    let p = model.probabilities();
    let keys = model.keys_by_rank();
    let mut depth = vec![0u32; config.bucket_count()];
    let mut e = 0.0;
    // Ranks ascend, so each bucket is filled in descending popularity.
    for (rank0, &k) in keys.iter().enumerate() {
        let b = bucket_index(hash(k, config.hash_seed), config.bucket_count_log2);
        depth[b] += 1;
        e += p[rank0] * depth[b] as f64;
    }
    e
}

/// Expected displacement of a fetch under `model` for the table as laid out.
pub fn layout_expected_displacement(model: &PopularityModel, table: &ChainedTable) -> f64 {
    let p = model.probabilities();
    let prob: HashMap<u64, f64> = model.keys_by_rank().into_iter().zip(p).collect();
    table
        .chains()
        .iter()
        .flat_map(|c| c.iter().enumerate().map(|(i, k)| prob[k] * (i + 1) as f64))
        .sum()
}

/// Keys-by-rank for a workload config without generating any operations.
pub fn initial_model(config: &WorkloadConfig) -> Result<(PopularityModel, Vec<(u64, u64)>)> {
    let w = Workload::new(config.clone())?;
    Ok((w.model().clone(), w.preload().to_vec()))
}
