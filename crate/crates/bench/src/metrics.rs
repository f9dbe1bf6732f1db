//! Per-batch metrics and their CSV / JSON reports.

use std::io::{Read, Write};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use viphash::controller::{Mode, TriggerEvent};

pub const CSV_HEADER: [&str; 15] = [
    "experiment",
    "engine",
    "seed",
    "batch",
    "ops",
    "elapsed_ns",
    "throughput_ops_s",
    "total_displacement",
    "avg_displacement",
    "miss_count",
    "mode_learn_ops",
    "mode_sense_ops",
    "mode_default_ops",
    "learn_triggers",
    "sense_triggers",
];

/// A mode transition as reported.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TriggerRecord {
    pub op_index: u64,
    pub from: Option<String>,
    pub to: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub current: Option<[f64; 2]>,
}

impl From<&TriggerEvent> for TriggerRecord {
    fn from(e: &TriggerEvent) -> Self {
        Self {
            op_index: e.op_index,
            from: e.from.map(|m| m.name().to_string()),
            to: e.to.name().to_string(),
            baseline: e.baseline.map(|s| [s.u, s.w]),
            current: e.current.map(|s| [s.u, s.w]),
        }
    }
}

/// One batch of one (engine, seed) trial. Field order is the CSV column
/// order; `warmup` and `trigger_events` appear only in JSON.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchMetrics {
    pub experiment: String,
    pub engine: String,
    pub seed: u64,
    pub batch: u64,
    pub ops: u64,
    pub elapsed_ns: u64,
    pub throughput_ops_s: f64,
    pub total_displacement: u64,
    pub avg_displacement: f64,
    pub miss_count: u64,
    pub mode_learn_ops: u64,
    pub mode_sense_ops: u64,
    pub mode_default_ops: u64,
    pub learn_triggers: u64,
    pub sense_triggers: u64,
    #[serde(default)]
    pub warmup: bool,
    #[serde(default)]
    pub trigger_events: Vec<TriggerRecord>,
}

impl BatchMetrics {
    pub fn mode_ops(&self) -> [u64; 3] {
        [self.mode_learn_ops, self.mode_sense_ops, self.mode_default_ops]
    }

    fn csv_row(&self) -> [String; 15] {
        [
            self.experiment.clone(),
            self.engine.clone(),
            self.seed.to_string(),
            self.batch.to_string(),
            self.ops.to_string(),
            self.elapsed_ns.to_string(),
            self.throughput_ops_s.to_string(),
            self.total_displacement.to_string(),
            self.avg_displacement.to_string(),
            self.miss_count.to_string(),
            self.mode_learn_ops.to_string(),
            self.mode_sense_ops.to_string(),
            self.mode_default_ops.to_string(),
            self.learn_triggers.to_string(),
            self.sense_triggers.to_string(),
        ]
    }
}

pub fn throughput(ops: u64, elapsed_ns: u64) -> f64 {
    if elapsed_ns == 0 {
        0.0
    } else {
        ops as f64 * 1e9 / elapsed_ns as f64
    }
}

/// Counts transitions into learn and into sense.
pub fn trigger_counts(events: &[TriggerEvent]) -> (u64, u64) {
    let learn = events.iter().filter(|e| e.to == Mode::LearnAdapt).count() as u64;
    let sense = events.iter().filter(|e| e.to == Mode::Sense).count() as u64;
    (learn, sense)
}

pub fn write_csv<W: Write>(out: W, rows: &[BatchMetrics]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in rows {
        w.write_record(r.csv_row())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(input: R) -> Result<Vec<BatchMetrics>> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    anyhow::ensure!(header == CSV_HEADER, "unexpected CSV header {header:?}");
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        anyhow::ensure!(rec.len() == CSV_HEADER.len(), "row {i} has {} fields", rec.len());
        let f = |j: usize| &rec[j];
        let int = |j: usize| f(j).parse::<u64>().with_context(|| format!("row {i}, column {}", CSV_HEADER[j]));
        let real = |j: usize| f(j).parse::<f64>().with_context(|| format!("row {i}, column {}", CSV_HEADER[j]));
        rows.push(BatchMetrics {
            experiment: f(0).to_string(),
            engine: f(1).to_string(),
            seed: int(2)?,
            batch: int(3)?,
            ops: int(4)?,
            elapsed_ns: int(5)?,
            throughput_ops_s: real(6)?,
            total_displacement: int(7)?,
            avg_displacement: real(8)?,
            miss_count: int(9)?,
            mode_learn_ops: int(10)?,
            mode_sense_ops: int(11)?,
            mode_default_ops: int(12)?,
            learn_triggers: int(13)?,
            sense_triggers: int(14)?,
            warmup: int(3)? == 0,
            trigger_events: Vec::new(),
        });
    }
    Ok(rows)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JsonReport {
    pub batches: Vec<BatchMetrics>,
    #[serde(default)]
    pub summary: Vec<SummaryRow>,
}

/// Medians over seeds for one (experiment, engine).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub experiment: String,
    pub engine: String,
    pub seeds: usize,
    pub median_throughput_ops_s: f64,
    pub median_avg_displacement: f64,
    pub median_total_displacement: f64,
    pub median_learn_ops: f64,
    pub median_learn_triggers: f64,
}

pub fn write_json<W: Write>(out: W, report: &JsonReport) -> Result<()> {
    serde_json::to_writer_pretty(out, report)?;
    Ok(())
}

pub fn read_json<R: Read>(input: R) -> Result<JsonReport> {
    Ok(serde_json::from_reader(input)?)
}
