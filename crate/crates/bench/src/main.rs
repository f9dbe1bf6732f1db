use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, ValueEnum};
use viphash::join::{compare_join, JoinEngine, JoinReport};
use viphash::workload::{write_workload, KeyOrder, KeyPattern, WorkloadConfig};
use viphash_bench::experiment::{join_config, run_experiment, ExperimentName, ExperimentSpec, Scale, TableSizing, BATCH_OPS};
use viphash_bench::metrics::{throughput, write_csv, write_json, BatchMetrics, JsonReport, SummaryRow};
use viphash_bench::EngineKind;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum StorageEngine {
    #[value(name = "ChainedHashing")]
    ChainedHashing,
    #[value(name = "VIPHashing")]
    VipHashing,
    /// Write the workload to `--out` instead of running it.
    #[value(name = "none")]
    None,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum PatternArg {
    Random,
    Sequential,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum OrderArg {
    Random,
    Sorted,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

/// Runs skewed point-query and hash-join workloads against the default and
/// VIP chained hash tables and reports per-batch metrics.
#[derive(Debug, Parser)]
#[command(name = "vipbench", version)]
struct Cli {
    #[arg(long)]
    zipf: Option<f64>,
    #[arg(long)]
    initial_size: Option<u64>,
    #[arg(long)]
    operation_count: Option<u64>,
    #[arg(long)]
    fetch_proportion: Option<f64>,
    #[arg(long)]
    insert_proportion: Option<f64>,
    #[arg(long)]
    delete_proportion: Option<f64>,
    #[arg(long)]
    dist_shift_freq: Option<u64>,
    #[arg(long)]
    dist_shift_prct: Option<f64>,
    #[arg(long, value_enum)]
    storage_engine: Option<StorageEngine>,
    #[arg(long, value_enum)]
    key_pattern: Option<PatternArg>,
    #[arg(long, value_enum)]
    key_order: Option<OrderArg>,
    #[arg(long)]
    random_seed: Option<u64>,

    /// Named experiment; without it a single custom workload is run.
    #[arg(long)]
    experiment: Option<ExperimentName>,
    /// Comma-separated seeds or a half-open range such as `0..10`.
    #[arg(long)]
    seeds: Option<String>,
    #[arg(long, default_value = "desk")]
    scale: Scale,
    /// Report path; stdout when absent. Required with `--storage-engine none`.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

/// Misconfiguration, reported with exit code 2.
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage<T>(msg: impl Into<String>) -> Result<T> {
    Err(Usage(msg.into()).into())
}

fn parse_seeds(s: &str) -> Result<Vec<u64>> {
    let seeds: Vec<u64> = if let Some((a, b)) = s.split_once("..") {
        let a: u64 = a.trim().parse().context("seed range start")?;
        let b: u64 = b.trim().parse().context("seed range end")?;
        (a..b).collect()
    } else {
        s.split(',').map(|x| x.trim().parse::<u64>().with_context(|| format!("bad seed `{x}`"))).collect::<Result<_>>()?
    };
    if seeds.is_empty() {
        bail!("seed list is empty");
    }
    Ok(seeds)
}

impl Cli {
    fn apply_workload_flags(&self, w: &mut WorkloadConfig) {
        macro_rules! set {
            ($flag:ident, $field:ident) => {
                if let Some(v) = self.$flag {
                    w.$field = v;
                }
            };
        }
        set!(zipf, zipf);
        set!(initial_size, initial_size);
        set!(operation_count, operation_count);
        set!(fetch_proportion, fetch_proportion);
        set!(insert_proportion, insert_proportion);
        set!(delete_proportion, delete_proportion);
        set!(dist_shift_freq, dist_shift_freq);
        set!(dist_shift_prct, dist_shift_prct);
        set!(random_seed, random_seed);
        if let Some(p) = self.key_pattern {
            w.key_pattern = match p {
                PatternArg::Random => KeyPattern::Random,
                PatternArg::Sequential => KeyPattern::Sequential,
            };
        }
        if let Some(o) = self.key_order {
            w.key_order = match o {
                OrderArg::Random => KeyOrder::Random,
                OrderArg::Sorted => KeyOrder::Sorted,
            };
        }
    }

    fn seeds(&self, fallback: Vec<u64>) -> Result<Vec<u64>> {
        match (&self.seeds, self.random_seed) {
            (Some(s), _) => parse_seeds(s).map_err(|e| Usage(format!("--seeds: {e:#}")).into()),
            (None, Some(seed)) => Ok(vec![seed]),
            (None, None) => Ok(fallback),
        }
    }

    fn specs(&self) -> Result<Vec<ExperimentSpec>> {
        let mut specs = match self.experiment {
            Some(name) => ExperimentSpec::named(name, self.scale)?,
            None => {
                let engines = match self.storage_engine {
                    Some(StorageEngine::VipHashing) => vec![EngineKind::Vip],
                    _ => vec![EngineKind::Default],
                };
                vec![ExperimentSpec {
                    name: ExperimentName::Static,
                    label: "custom".into(),
                    workload: WorkloadConfig::default(),
                    sizing: TableSizing::Natural,
                    engines,
                    seeds: vec![0],
                    scale: self.scale,
                    params: Default::default(),
                    batch_ops: BATCH_OPS,
                }]
            }
        };
        for s in &mut specs {
            self.apply_workload_flags(&mut s.workload);
            s.seeds = self.seeds(s.seeds.clone())?;
            if self.experiment.is_some() {
                match self.storage_engine {
                    Some(StorageEngine::ChainedHashing) => s.engines = vec![EngineKind::Default],
                    Some(StorageEngine::VipHashing) => s.engines = vec![EngineKind::Vip],
                    _ => {}
                }
            }
            if let Err(e) = s.validate() {
                return usage(format!("{e:#}"));
            }
        }
        Ok(specs)
    }
}

fn join_rows(trials: &[(JoinReport, JoinReport)], seeds: &[u64]) -> Vec<BatchMetrics> {
    let mut rows = Vec::new();
    for ((d, v), &seed) in trials.iter().zip(seeds) {
        for r in [d, v] {
            let elapsed = r.build_ns + r.probe_ns;
            let probes = r.output_cardinality as u64;
            let learn = r.learn_probes as u64;
            rows.push(BatchMetrics {
                experiment: "join".into(),
                engine: match r.engine {
                    JoinEngine::Default => "default".into(),
                    JoinEngine::Vip => "vip".into(),
                },
                seed,
                batch: 0,
                ops: probes,
                elapsed_ns: elapsed,
                throughput_ops_s: throughput(probes, r.probe_ns),
                total_displacement: r.total_displacement,
                avg_displacement: r.avg_displacement,
                miss_count: 0,
                mode_learn_ops: learn,
                mode_sense_ops: 0,
                mode_default_ops: probes - learn,
                learn_triggers: (learn > 0) as u64,
                sense_triggers: 0,
                warmup: true,
                trigger_events: Vec::new(),
            });
        }
    }
    rows
}

fn run(cli: &Cli) -> Result<()> {
    if cli.storage_engine == Some(StorageEngine::None) {
        let Some(out) = &cli.out else { return usage("--storage-engine none needs --out") };
        let mut w = match cli.experiment {
            Some(name) => match ExperimentSpec::named(name, cli.scale) {
                Ok(mut s) => s.remove(0).workload,
                Err(e) => return usage(format!("{e:#}")),
            },
            None => WorkloadConfig::default(),
        };
        cli.apply_workload_flags(&mut w);
        if let Err(e) = w.validate() {
            return usage(e.to_string());
        }
        write_workload(&w, out).with_context(|| format!("writing {}", out.display()))?;
        eprintln!("wrote workload to {}", out.display());
        return Ok(());
    }

    let (batches, summary) = if cli.experiment == Some(ExperimentName::Join) {
        let mut cfg = join_config(cli.scale);
        if let Some(z) = cli.zipf {
            cfg.zipf = z;
        }
        if let Some(n) = cli.initial_size {
            cfg.pk_cardinality = n;
        }
        if let Err(e) = cfg.validate() {
            return usage(e.to_string());
        }
        let seeds = cli.seeds((0..10).collect())?;
        let report = compare_join(&cfg, &seeds)?;
        eprintln!(
            "join |R|={} |S|={} learn probes={} avg displacement default={:.4} vip={:.4} time delta={:+.2}%",
            cfg.pk_cardinality,
            cfg.probe_cardinality(),
            report.learn_probes,
            report.default_avg_displacement,
            report.vip_avg_displacement,
            100.0 * report.time_delta()
        );
        let summary = vec![
            SummaryRow {
                experiment: "join".into(),
                engine: "default".into(),
                seeds: seeds.len(),
                median_throughput_ops_s: throughput(cfg.probe_cardinality(), report.default_probe_ns as u64),
                median_avg_displacement: report.default_avg_displacement,
                median_total_displacement: report.default_avg_displacement * cfg.probe_cardinality() as f64,
                median_learn_ops: 0.0,
                median_learn_triggers: 0.0,
            },
            SummaryRow {
                experiment: "join".into(),
                engine: "vip".into(),
                seeds: seeds.len(),
                median_throughput_ops_s: throughput(cfg.probe_cardinality(), report.vip_probe_ns as u64),
                median_avg_displacement: report.vip_avg_displacement,
                median_total_displacement: report.vip_avg_displacement * cfg.probe_cardinality() as f64,
                median_learn_ops: report.learn_probes as f64,
                median_learn_triggers: 1.0,
            },
        ];
        (join_rows(&report.trials, &seeds), summary)
    } else {
        let mut batches = Vec::new();
        let mut summary = Vec::new();
        for spec in cli.specs()? {
            let report = run_experiment(&spec)?;
            for row in report.summary() {
                eprintln!(
                    "{} {}: median throughput {:.0} ops/s, avg displacement {:.4}, learn ops {:.0}",
                    row.experiment, row.engine, row.median_throughput_ops_s, row.median_avg_displacement, row.median_learn_ops
                );
                summary.push(row);
            }
            batches.extend(report.batches());
        }
        (batches, summary)
    };

    let sink: Box<dyn Write> = match &cli.out {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    };
    match cli.format {
        Format::Csv => write_csv(sink, &batches)?,
        Format::Json => write_json(sink, &JsonReport { batches, summary })?,
    }
    Ok(())
}

/// Process exit status for the outcome of [`run`].
fn status(outcome: &Result<()>) -> u8 {
    match outcome {
        Ok(()) => 0,
        Err(e) if e.downcast_ref::<Usage>().is_some() => 2,
        Err(_) => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = run(&cli);
    if let Err(e) = &outcome {
        eprintln!("error: {e:#}");
    }
    ExitCode::from(status(&outcome))
}
