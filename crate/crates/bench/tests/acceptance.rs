//! Acceptance checks for the table, the controller and the harness.
//!
//! Each test prints one `PASS` or `FAIL` line to stderr, so the verdicts
//! show up in `cargo test` output whether or not output is captured.
//! Throughput comparisons hold a process-wide lock so they never overlap.

use std::collections::HashMap;
use std::io::Write;
use std::sync::{Mutex, MutexGuard};

use itertools::Itertools;
use viphash::adapt::RequestCounts;
use viphash::controller::{ControllerParams, Mode, SenseRole, TriggerEvent, VipEngine};
use viphash::join::{compare_join, generate_relations, hash_join, learn_budget, JoinConfig, JoinEngine, Relation};
use viphash::sense::SenseAccumulator;
use viphash::table::{ChainedTable, TableConfig};
use viphash::workload::{decode, encode, write_workload, PopularityModel, Workload, WorkloadConfig, WorkloadFile, WorkloadRng};
use viphash::Operation;
use viphash_bench::engine::populate;
use viphash_bench::experiment::{join_config, layout_expected_displacement, natural_config, optimal_expected_displacement, TableSizing};
use viphash_bench::metrics::BatchMetrics;
use viphash_bench::{build_vip_preconfigured, run_experiment, run_seed, EngineKind, ExperimentName, ExperimentSpec, Scale, TrialResult};

static TIMING: Mutex<()> = Mutex::new(());

fn timing() -> MutexGuard<'static, ()> {
    TIMING.lock().unwrap_or_else(|e| e.into_inner())
}

fn verdict(name: &str, ok: bool, detail: String) {
    let _ = writeln!(std::io::stderr().lock(), "{} {name}: {detail}", if ok { "PASS" } else { "FAIL" });
    assert!(ok, "{name}: {detail}");
}

fn desk(name: ExperimentName) -> ExperimentSpec {
    ExperimentSpec::named(name, Scale::Desk).unwrap().remove(0)
}

fn median(mut v: Vec<f64>) -> f64 {
    viphash::join::median(&mut v)
}

fn trial(trials: &[TrialResult], engine: EngineKind) -> &TrialResult {
    trials.iter().find(|t| t.engine == engine).unwrap()
}

#[test]
fn roofline_displacement() {
    let mut spec = desk(ExperimentName::Roofline);
    spec.workload.zipf = 1.5;
    spec.workload.operation_count = 100_000_000;
    assert_eq!(spec.table_config().bucket_count(), 1 << 20);
    let mut worst = 0.0f64;
    let mut default_above = true;
    for seed in 0..10 {
        let trials = run_seed(&spec, seed, false).unwrap();
        let (model, _) = viphash_bench::experiment::initial_model(&WorkloadConfig { random_seed: seed, ..spec.workload.clone() }).unwrap();
        let pre = trial(&trials, EngineKind::VipPreconfigured);
        let optimal = optimal_expected_displacement(&model, spec.table_config()) * pre.fetches as f64;
        worst = worst.max((pre.total_displacement as f64 - optimal).abs() / optimal);
        default_above &= trial(&trials, EngineKind::Default).total_displacement > pre.total_displacement;
    }
    verdict(
        "roofline displacement",
        worst <= 0.005 && default_above,
        format!("worst relative error {worst:.2e} (limit 5e-3), default above in every seed: {default_above}"),
    );
}

#[test]
fn roofline_throughput() {
    let _t = timing();
    let mut spec = desk(ExperimentName::Roofline);
    spec.workload.operation_count = 20_000_000;
    let r = run_experiment(&spec).unwrap();
    let d = r.median_of(EngineKind::Default, TrialResult::throughput);
    let v = r.median_of(EngineKind::VipPreconfigured, TrialResult::throughput);
    verdict("roofline throughput", v >= 1.15 * d, format!("preconfigured {v:.3e} ops/s vs default {d:.3e} ops/s, ratio {:.3}", v / d));
}

#[test]
fn load_factor_scaling() {
    let specs = ExperimentSpec::named(ExperimentName::RooflineLf, Scale::Desk).unwrap();
    let mut gaps = Vec::new();
    for lf in ["0.5", "1", "1.5"] {
        let mut spec = specs.iter().find(|s| s.label == format!("roofline-lf@{lf}")).unwrap().clone();
        spec.workload.operation_count = 10_000_000;
        let r = run_experiment(&spec).unwrap();
        let d = r.median_of(EngineKind::Default, TrialResult::avg_displacement);
        let v = r.median_of(EngineKind::VipPreconfigured, TrialResult::avg_displacement);
        gaps.push(d - v);
    }
    let monotone = gaps.windows(2).all(|w| w[1] >= w[0]);
    verdict("load factor scaling", monotone, format!("displacement gap at lf 0.5/1.0/1.5: {gaps:.4?}"));
}

#[test]
fn learning_overhead_cap() {
    let _t = timing();
    let mut spec = desk(ExperimentName::Static);
    spec.workload.zipf = 0.0;
    spec.engines = vec![EngineKind::Default, EngineKind::Vip];
    let budget = spec.params.learn_budget(spec.table_config().bucket_count());
    let r = run_experiment(&spec).unwrap();
    let learn_ops: Vec<u64> = r.trials_for(EngineKind::Vip).map(|t| t.occupancy[0]).collect();
    let exact = learn_ops.iter().all(|&n| n == budget);
    let d = r.median_of(EngineKind::Default, TrialResult::throughput);
    let v = r.median_of(EngineKind::Vip, TrialResult::throughput);
    verdict(
        "learning overhead cap",
        exact && v >= 0.95 * d,
        format!("learn ops {learn_ops:?} (budget {budget}), throughput ratio {:.3} (limit 0.95)", v / d),
    );
}

/// Average displacement over the batches in which `vip` did no learning,
/// after its first learn episode, for `vip` and the matching batches of
/// `reference`. The static runs issue fetches only.
fn post_learn_displacement(vip: &TrialResult, reference: &TrialResult) -> (f64, f64) {
    let first = vip.batches.iter().position(|b| b.mode_learn_ops == 0).unwrap();
    let quiet: Vec<usize> = (first..vip.batches.len()).filter(|&i| vip.batches[i].mode_learn_ops == 0).collect();
    let avg = |bs: &[BatchMetrics]| {
        let d: u64 = quiet.iter().map(|&i| bs[i].total_displacement).sum();
        let n: u64 = quiet.iter().map(|&i| bs[i].ops).sum();
        d as f64 / n as f64
    };
    (avg(&vip.batches), avg(&reference.batches))
}

#[test]
fn static_skew_gain() {
    let _t = timing();
    let mut lines = Vec::new();
    let mut ok = true;
    for zipf in [1.0, 1.5, 2.0] {
        let mut spec = desk(ExperimentName::Static);
        spec.workload.zipf = zipf;
        spec.workload.operation_count = 30_000_000;
        let r = run_experiment(&spec).unwrap();
        let (mut vip, mut pre) = (Vec::new(), Vec::new());
        for &seed in &spec.seeds {
            let t: Vec<TrialResult> = r.trials.iter().filter(|t| t.seed == seed).cloned().collect();
            let (v, p) = post_learn_displacement(trial(&t, EngineKind::Vip), trial(&t, EngineKind::VipPreconfigured));
            vip.push(v);
            pre.push(p);
        }
        let (v, p) = (median(vip), median(pre));
        let gain = r.median_of(EngineKind::Vip, TrialResult::throughput) / r.median_of(EngineKind::Default, TrialResult::throughput) - 1.0;
        let close = (v - p).abs() <= 0.02 * p;
        ok &= close && gain > 0.0;
        lines.push(format!("s={zipf}: vip {v:.5} vs preconfigured {p:.5} ({:+.2}%), throughput gain {:+.1}%", 100.0 * (v / p - 1.0), 100.0 * gain));
    }
    verdict("static skew gain", ok, lines.join("; "));
}

fn bucket_zero_keys(n: usize) -> Vec<u64> {
    let probe = ChainedTable::new(TableConfig::with_bucket_count_log2(3));
    (1u64..).filter(|&k| probe.bucket_of(k) == 0).take(n).collect()
}

#[test]
fn single_chain_convergence() {
    let keys = bucket_zero_keys(5);
    let model = PopularityModel::new(1.0, keys.clone());
    let sorted = (0..100u64)
        .filter(|&seed| {
            let mut rng = WorkloadRng::new(seed);
            let mut order = keys.clone();
            rng.shuffle(&mut order);
            let mut t = ChainedTable::new(TableConfig::with_bucket_count_log2(3));
            for &k in order.iter().rev() {
                t.insert(k, k);
            }
            let mut counts = RequestCounts::begin_learn(&t);
            for _ in 0..100_000 {
                counts.fetch_adaptive(&mut t, model.sample_key(&mut rng));
            }
            t.chain_keys(0) == keys
        })
        .count();
    verdict("single chain convergence", sorted >= 99, format!("{sorted}/100 seeds sorted"));
}

/// Smallest expected displacement any reordering of `table`'s chains
/// reaches, by trying every permutation of every chain.
fn brute_force_minimum(table: &ChainedTable, prob: &HashMap<u64, f64>) -> f64 {
    table
        .chains()
        .iter()
        .map(|chain| {
            chain
                .iter()
                .permutations(chain.len())
                .map(|p| p.iter().enumerate().map(|(i, k)| prob[*k] * (i + 1) as f64).sum::<f64>())
                .fold(f64::INFINITY, f64::min)
        })
        .sum()
}

#[test]
fn descending_order_is_minimal() {
    let mut rng = WorkloadRng::new(77);
    let mut instances = 0;
    let mut worst = 0.0f64;
    let mut ordered = true;
    while instances < 100 {
        let n = 2 + rng.below(30) as usize;
        let log2 = 1 + rng.below(3) as u32;
        let exponent = rng.next_f64() * 3.0;
        let mut keys: Vec<u64> = (0..n).map(|_| rng.next_u64()).collect();
        keys.sort_unstable();
        keys.dedup();
        rng.shuffle(&mut keys);
        let model = PopularityModel::new(exponent, keys.clone());
        let preload: Vec<(u64, u64)> = keys.iter().map(|&k| (k, !k)).collect();
        let mut t = ChainedTable::new(TableConfig::with_bucket_count_log2(log2));
        build_vip_preconfigured(&model, &preload, &mut t);
        if t.bucket_count_log2() != log2 || (0..t.bucket_count()).any(|b| t.chain_len(b) > 6) {
            continue;
        }
        instances += 1;
        let prob: HashMap<u64, f64> = model.keys_by_rank().into_iter().zip(model.probabilities()).collect();
        let best = brute_force_minimum(&t, &prob);
        let got = layout_expected_displacement(&model, &t);
        worst = worst.max((got - best).abs());
        ordered &= t.chains().iter().all(|c| c.windows(2).all(|w| prob[&w[0]] >= prob[&w[1]]));
    }
    verdict(
        "descending order is minimal",
        worst <= 1e-12 && ordered,
        format!("{instances} instances, worst excess over exhaustive minimum {worst:.1e}, chains descending: {ordered}"),
    );
}

#[test]
fn sensing_calibration() {
    let values = [1u32, 2, 3, 4, 6];
    let weights = [0.5, 0.2, 0.15, 0.1, 0.05];
    let mu: f64 = values.iter().zip(weights).map(|(&v, w)| v as f64 * w).sum();
    let mut rng = WorkloadRng::new(31);
    let (mut covered, mut worst_mean, mut worst_var) = (0, 0.0f64, 0.0f64);
    for _ in 0..1000 {
        let samples: Vec<u32> = (0..1000)
            .map(|_| {
                let x = rng.next_f64();
                let mut acc = 0.0;
                *values.iter().zip(weights).find(|(_, w)| {
                    acc += w;
                    x < acc
                }).map(|(v, _)| v).unwrap_or(&6)
            })
            .collect();
        let mut acc = SenseAccumulator::default();
        samples.iter().for_each(|&d| acc.record(d));
        let s = acc.finalize().unwrap();
        covered += ((s.u - mu).abs() <= s.w) as usize;
        let n = samples.len() as f64;
        let mean = samples.iter().map(|&d| d as f64).sum::<f64>() / n;
        let var = samples.iter().map(|&d| (d as f64 - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let v = s.w * s.w * n / (-2.0 * (1.0 - acc.confidence).ln());
        worst_mean = worst_mean.max((s.u - mean).abs() / mean);
        worst_var = worst_var.max((v - var).abs() / var);
    }
    verdict(
        "sensing calibration",
        covered >= 900 && worst_mean <= 1e-9 && worst_var <= 1e-9,
        format!("coverage {covered}/1000, worst relative error mean {worst_mean:.1e} variance {worst_var:.1e}"),
    );
}

/// Runs a fresh engine until its first compare window closes and reports
/// whether that window asked for learning.
fn first_compare_triggers(config: WorkloadConfig, params: ControllerParams) -> bool {
    let mut w = Workload::new(config).unwrap();
    let mut t = ChainedTable::with_capacity(natural_config(w.preload().len() as u64), w.preload().len());
    populate(&mut t, w.preload());
    let mut e = VipEngine::from_table(t, params);
    let closed = |ev: &TriggerEvent| ev.from == Some(Mode::Sense) && ev.role == Some(SenseRole::Compare);
    while let Some(op) = w.next_op() {
        e.step(&op);
        if let Some(ev) = e.events().last().filter(|ev| closed(ev)) {
            return ev.to == Mode::LearnAdapt;
        }
    }
    panic!("workload ended before the first compare window");
}

#[test]
fn change_detection() {
    // Load factor 0.95, as in the churn runs, on a quarter of their table.
    // The default span only separates the two windows, so it is cut short.
    let keys = 250_000;
    let params = ControllerParams { default_multiple: 1, ..Default::default() };
    let nl = params.learn_budget(natural_config(keys).bucket_count());
    let shift = nl + params.sense_span + nl / 2;
    let base = WorkloadConfig { initial_size: keys, operation_count: 4 * nl, zipf: 1.0, ..Default::default() };
    let false_triggers = (0..100).filter(|&seed| first_compare_triggers(WorkloadConfig { random_seed: seed, ..base.clone() }, params)).count();
    let detected = (0..100)
        .filter(|&seed| {
            let c = WorkloadConfig { random_seed: 1000 + seed, dist_shift_freq: shift, dist_shift_prct: 25.0, ..base.clone() };
            first_compare_triggers(c, params)
        })
        .count();
    verdict(
        "change detection",
        false_triggers <= 10 && detected >= 90,
        format!("false triggers {false_triggers}/100 (limit 10), churn detected {detected}/100 (need 90)"),
    );
}

#[test]
fn churn_robustness() {
    let mut spec = desk(ExperimentName::MediumChurn);
    spec.engines = vec![EngineKind::Default, EngineKind::Vip];
    let trials = run_seed(&spec, 0, false).unwrap();
    let d = trial(&trials, EngineKind::Default).total_displacement;
    let vip = trial(&trials, EngineKind::Vip);
    let learns: Vec<&TriggerEvent> = vip.events.iter().filter(|e| e.to == Mode::LearnAdapt).skip(1).collect();
    let audited = learns.iter().all(|e| {
        e.from == Some(Mode::Sense)
            && e.role == Some(SenseRole::Compare)
            && match (e.baseline, e.current) {
                (Some(b), Some(c)) => (b.u - c.u).abs() > b.w + c.w,
                _ => false,
            }
    });
    verdict(
        "churn robustness",
        vip.total_displacement < d && audited,
        format!("vip {} vs default {d} total displacement, {} relearn triggers all justified: {audited}", vip.total_displacement, learns.len()),
    );
}

fn nested_loop(r: &Relation, s: &Relation) -> Vec<(u32, u32)> {
    let mut out = Vec::new();
    for (j, &(sk, _)) in s.tuples.iter().enumerate() {
        for (i, &(rk, _)) in r.tuples.iter().enumerate() {
            if rk == sk {
                out.push((i as u32, j as u32));
            }
        }
    }
    out.sort_unstable();
    out
}

#[test]
fn skewed_join() {
    let _t = timing();
    let c = join_config(Scale::Desk);
    let report = compare_join(&c, &(0..10).collect::<Vec<_>>()).unwrap();
    let budget = learn_budget(c.pk_cardinality as usize, c.probe_cardinality() as usize);
    let small = JoinConfig { pk_cardinality: 625, ..c };
    let (r, s) = generate_relations(&small).unwrap();
    assert!(s.len() <= 10_000);
    let oracle = nested_loop(&r, &s);
    let matches = [JoinEngine::Default, JoinEngine::Vip].into_iter().all(|e| {
        let mut out = hash_join(&r, &s, small.table_config(), e).unwrap().output;
        out.sort_unstable();
        out == oracle
    });
    let ok = report.vip_avg_displacement <= 1.01
        && report.default_avg_displacement >= 1.1
        && report.learn_probes == budget
        && budget == 26_229
        && matches
        && report.time_delta() < 0.0;
    verdict(
        "skewed join",
        ok,
        format!(
            "displacement vip {:.5} default {:.5}, learn probes {} (expected {budget}), oracle match {matches}, time delta {:+.1}%",
            report.vip_avg_displacement,
            report.default_avg_displacement,
            report.learn_probes,
            100.0 * report.time_delta()
        ),
    );
}

#[test]
fn counter_overhead() {
    let _t = timing();
    let mut spec = desk(ExperimentName::CounterOverhead);
    spec.workload.operation_count = 10_000_000;
    let r = run_experiment(&spec).unwrap();
    let d = r.median_of(EngineKind::Default, TrialResult::throughput);
    let c = r.median_of(EngineKind::Counter17, TrialResult::throughput);
    verdict("counter overhead", c < d, format!("17-byte entries {c:.3e} ops/s vs 16-byte {d:.3e} ops/s, ratio {:.3}", c / d));
}

fn oracle_run(seed: u64) -> bool {
    let mut rng = WorkloadRng::new(seed);
    let mut t = ChainedTable::new(TableConfig::default());
    let mut m = HashMap::new();
    let range = 1 + rng.below(5000);
    for _ in 0..100_000 {
        let k = rng.below(range);
        let agree = match rng.below(10) {
            0..=4 => {
                let f = t.fetch(k);
                f.value == m.get(&k).copied() && f.found == m.contains_key(&k)
            }
            5..=7 => {
                let v = rng.next_u64();
                t.insert(k, v) == m.insert(k, v).is_none()
            }
            _ => t.delete(k) == m.remove(&k).is_some(),
        };
        if !agree || t.len() != m.len() {
            return false;
        }
    }
    let mut a: Vec<_> = t.iter().collect();
    let mut b: Vec<_> = m.into_iter().collect();
    a.sort_unstable();
    b.sort_unstable();
    a == b
}

#[test]
fn oracle_equivalence() {
    let table_ok = (0..1000).filter(|&s| oracle_run(s)).count();
    let mut spec = desk(ExperimentName::MediumChurn);
    spec.workload = WorkloadConfig {
        initial_size: 50_000,
        operation_count: 3_000_000,
        fetch_proportion: 0.9,
        insert_proportion: 0.05,
        delete_proportion: 0.05,
        dist_shift_freq: 200_000,
        dist_shift_prct: 50.0,
        zipf: 1.0,
        ..Default::default()
    };
    spec.engines = EngineKind::ALL.to_vec();
    spec.sizing = TableSizing::Natural;
    let mut engines_ok = 0;
    for seed in 0..10 {
        let trials = run_seed(&spec, seed, true).unwrap();
        engines_ok += trials.iter().all(|t| t.answer_digest == trials[0].answer_digest && t.ops == trials[0].ops) as usize;
    }
    verdict(
        "oracle equivalence",
        table_ok == 1000 && engines_ok == 10,
        format!("table agreed with map in {table_ok}/1000 seeds, engines agreed in {engines_ok}/10 seeds"),
    );
}

#[test]
fn workload_determinism_and_format() {
    let config = WorkloadConfig {
        initial_size: 10_000,
        operation_count: 200_000,
        fetch_proportion: 0.8,
        insert_proportion: 0.1,
        delete_proportion: 0.1,
        dist_shift_freq: 30_000,
        dist_shift_prct: 25.0,
        random_seed: 9,
        ..Default::default()
    };
    let a = encode(&WorkloadFile::generate(config.clone()).unwrap());
    let b = encode(&WorkloadFile::generate(config.clone()).unwrap());
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("w.vipw");
    write_workload(&config, &path).unwrap();
    let on_disk = std::fs::read(&path).unwrap();
    let identical = a == b && a == on_disk;
    let decoded = decode(&a).unwrap();
    let round_trip = encode(&decoded) == a && decoded == WorkloadFile::generate(config).unwrap();
    let m = PopularityModel::new(1.0, (1..=1_000_000).collect());
    let (m25, m50) = (m.churn_prefix(25.0), m.churn_prefix(50.0));
    verdict(
        "workload determinism and format",
        identical && round_trip && m25 == 21 && m50 == 750,
        format!("identical streams {identical}, round trip {round_trip}, churn prefixes at s=1 {m25} (want 21) and {m50} (want 750)"),
    );
}

#[test]
fn fetch_stream_is_fetches_only() {
    // Guards the roofline runs above, which count every op as a fetch.
    let spec = desk(ExperimentName::Roofline);
    let mut w = Workload::new(WorkloadConfig { operation_count: 10_000, ..spec.workload }).unwrap();
    assert!(std::iter::from_fn(|| w.next_op()).all(|op| matches!(op, Operation::Fetch { .. })));
}
