use std::collections::{BTreeMap, HashMap};

use proptest::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF};
use viphash::hash::{bucket_index, hash};
use viphash::table::{ChainedTable, TableConfig};
use viphash::workload::WorkloadRng;

fn in_band(t: &ChainedTable) -> bool {
    let lf = t.load_factor();
    t.bucket_count_log2() == 1 && lf <= 1.5 || (0.5..=1.5).contains(&lf)
}

fn entries(t: &ChainedTable) -> BTreeMap<u64, u64> {
    t.iter().collect()
}

/// Replays a random insert/delete/fetch mix against a `HashMap`.
fn check_against_oracle(seed: u64, ops: usize, key_space: u64) {
    let mut rng = WorkloadRng::new(seed);
    let mut t = ChainedTable::new(TableConfig::default());
    let mut oracle = HashMap::new();
    for i in 0..ops {
        let key = rng.below(key_space);
        match rng.below(10) {
            0..=3 => {
                let v = rng.next_u64();
                assert_eq!(t.insert(key, v), oracle.insert(key, v).is_none(), "seed {seed} op {i}");
            }
            4..=6 => assert_eq!(t.delete(key), oracle.remove(&key).is_some(), "seed {seed} op {i}"),
            _ => assert_eq!(t.fetch(key).value, oracle.get(&key).copied(), "seed {seed} op {i}"),
        }
        assert_eq!(t.len(), oracle.len());
    }
    assert_eq!(entries(&t), oracle.into_iter().collect());
}

#[test]
fn matches_hashmap_on_long_sequences() {
    for seed in 0..20 {
        check_against_oracle(seed, 100_000, 1 + seed * 500);
    }
}

#[test]
fn fetch_displacement_follows_chain_position() {
    let mut t = ChainedTable::new(TableConfig::with_bucket_count_log2(3));
    let keys: Vec<u64> = (1..).filter(|&k| t.bucket_of(k) == 5).take(3).collect();
    for &k in keys.iter().rev() {
        t.insert(k, k);
    }
    let d: Vec<u32> = keys.iter().map(|&k| t.fetch(k).displacement).collect();
    assert_eq!(d, [1, 2, 3]);
    // Fig. 6a: two requests to each of the three keys touch 12 entries.
    assert_eq!(2 * d.iter().sum::<u32>(), 12);
    let absent = (1..).find(|&k| t.bucket_of(k) == 5 && !keys.contains(&k)).unwrap();
    let miss = t.fetch(absent);
    assert!(!miss.found);
    assert_eq!(miss.displacement, 3);
    let empty = (1..).find(|&k| t.bucket_of(k) == 1).unwrap();
    assert_eq!(t.fetch(empty).displacement, 0);
}

#[test]
fn grows_past_one_and_a_half_per_bucket() {
    let n = 1usize << 20;
    let mut t = ChainedTable::with_capacity(TableConfig::with_bucket_count_log2(20), 3 * n / 2 + 1);
    for k in 0..(3 * n / 2) as u64 {
        t.insert(k, k);
    }
    assert_eq!(t.bucket_count(), n);
    t.insert(u64::MAX, 0);
    assert_eq!(t.bucket_count(), 2 * n);
    assert!((t.load_factor() - 0.75).abs() < 1e-6);
}

#[test]
fn shrinks_below_half_per_bucket() {
    let n = 1usize << 20;
    let mut t = ChainedTable::with_capacity(TableConfig::with_bucket_count_log2(20), n / 2);
    for k in 0..(n / 2) as u64 {
        t.insert(k, k);
    }
    assert_eq!(t.bucket_count(), n);
    t.delete(0);
    assert_eq!(t.bucket_count(), n / 2);
}

#[test]
fn never_shrinks_below_two_buckets() {
    let mut t = ChainedTable::new(TableConfig::default());
    t.insert(9, 9);
    assert!(t.delete(9));
    assert_eq!(t.bucket_count(), 2);
    assert!(t.is_empty());
}

#[test]
fn bucket_chi_square() {
    let mut rng = WorkloadRng::new(11);
    let buckets = 1usize << 16;
    let mut counts = vec![0u64; buckets];
    let samples = 100_000u64;
    for _ in 0..samples {
        counts[bucket_index(hash(rng.next_u64(), 0), 16)] += 1;
    }
    let expected = samples as f64 / buckets as f64;
    let stat: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    let p = 1.0 - ChiSquared::new((buckets - 1) as f64).unwrap().cdf(stat);
    assert!(p > 1e-3, "chi-square {stat}, p = {p}");
}

#[test]
fn sequential_keys_spread_evenly() {
    let buckets = 1usize << 16;
    let mut counts = vec![0u64; buckets];
    for k in 1..=100_000u64 {
        counts[bucket_index(hash(k, 0), 16)] += 1;
    }
    let expected = 100_000.0 / buckets as f64;
    let stat: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    let p = 1.0 - ChiSquared::new((buckets - 1) as f64).unwrap().cdf(stat);
    assert!(p > 1e-3, "p = {p}");
}

#[test]
fn avalanche() {
    let mut rng = WorkloadRng::new(3);
    for bit in 0..64 {
        let mut flipped = 0u64;
        let samples = 10_000;
        for _ in 0..samples {
            let k = rng.next_u64();
            flipped += (hash(k, 0) ^ hash(k ^ (1 << bit), 0)).count_ones() as u64;
        }
        let mean = flipped as f64 / samples as f64;
        assert!((mean - 32.0).abs() <= 4.0, "bit {bit}: {mean}");
    }
}

#[derive(Clone, Debug)]
enum Op {
    Insert(u64, u64),
    Delete(u64),
    Fetch(u64),
}

fn op(keys: u64) -> impl Strategy<Value = Op> {
    prop_oneof![
        3 => (0..keys, any::<u64>()).prop_map(|(k, v)| Op::Insert(k, v)),
        2 => (0..keys).prop_map(Op::Delete),
        1 => (0..keys).prop_map(Op::Fetch),
    ]
}

proptest! {
    #[test]
    fn oracle_and_band(ops in prop::collection::vec(op(200), 1..2000)) {
        let mut t = ChainedTable::new(TableConfig::default());
        let mut oracle = HashMap::new();
        for o in &ops {
            match *o {
                Op::Insert(k, v) => prop_assert_eq!(t.insert(k, v), oracle.insert(k, v).is_none()),
                Op::Delete(k) => prop_assert_eq!(t.delete(k), oracle.remove(&k).is_some()),
                Op::Fetch(k) => prop_assert_eq!(t.fetch(k).value, oracle.get(&k).copied()),
            }
            prop_assert!(t.bucket_count().is_power_of_two());
            prop_assert!(in_band(&t), "load factor {} at {} buckets", t.load_factor(), t.bucket_count());
        }
        prop_assert_eq!(entries(&t), oracle.into_iter().collect::<BTreeMap<_, _>>());
    }

    #[test]
    fn every_key_sits_in_its_own_bucket(keys in prop::collection::vec(any::<u64>(), 0..500)) {
        let mut t = ChainedTable::new(TableConfig::default());
        for &k in &keys {
            t.insert(k, !k);
        }
        let mut seen = std::collections::HashSet::new();
        for (b, chain) in t.chains().iter().enumerate() {
            for &k in chain {
                prop_assert_eq!(t.bucket_of(k), b);
                prop_assert!(seen.insert(k), "key {} appears twice", k);
            }
        }
        prop_assert_eq!(seen.len(), t.len());
    }

    #[test]
    fn new_keys_land_at_the_front(keys in prop::collection::vec(any::<u64>(), 1..300), extra in any::<u64>()) {
        let mut t = ChainedTable::new(TableConfig::default());
        for &k in &keys {
            t.insert(k, 0);
        }
        if !t.contains(extra) {
            t.insert(extra, 1);
            prop_assert_eq!(t.fetch(extra).displacement, 1);
        }
    }

    #[test]
    fn overwrite_keeps_position(keys in prop::collection::hash_set(any::<u64>(), 1..300), pick in any::<prop::sample::Index>()) {
        let keys: Vec<u64> = keys.into_iter().collect();
        let mut t = ChainedTable::new(TableConfig::default());
        for &k in &keys {
            t.insert(k, 0);
        }
        let k = keys[pick.index(keys.len())];
        let before = t.chains();
        prop_assert!(!t.insert(k, 77));
        prop_assert_eq!(t.chains(), before);
        prop_assert_eq!(t.fetch(k).value, Some(77));
    }

    #[test]
    fn delete_keeps_survivor_order(keys in prop::collection::hash_set(0u64..10_000, 2..400), pick in any::<prop::sample::Index>()) {
        let keys: Vec<u64> = keys.into_iter().collect();
        let mut t = ChainedTable::new(TableConfig::with_bucket_count_log2(8));
        for &k in &keys {
            t.insert(k, 0);
        }
        let victim = keys[pick.index(keys.len())];
        let b = t.bucket_of(victim);
        let log2 = t.bucket_count_log2();
        let mut expected = t.chain_keys(b);
        expected.retain(|&k| k != victim);
        prop_assert!(t.delete(victim));
        if t.bucket_count_log2() == log2 {
            prop_assert_eq!(t.chain_keys(b), expected);
        }
    }

    /// Two keys that share a bucket before and after a rehash keep their
    /// relative order.
    #[test]
    fn rehash_is_stable(keys in prop::collection::hash_set(any::<u64>(), 10..600), grow in any::<bool>()) {
        let mut t = ChainedTable::new(TableConfig::with_bucket_count_log2(4));
        for &k in &keys {
            t.insert(k, k);
        }
        let position = |t: &ChainedTable| -> HashMap<u64, (usize, usize)> {
            t.chains()
                .iter()
                .enumerate()
                .flat_map(|(b, c)| c.iter().enumerate().map(move |(i, &k)| (k, (b, i))))
                .collect()
        };
        let before = position(&t);
        let old_log2 = t.bucket_count_log2();
        t.rehash(if grow || old_log2 == 1 { viphash::RehashDirection::Grow } else { viphash::RehashDirection::Shrink });
        let after = position(&t);
        for (&a, &(ba, ia)) in &before {
            for (&b, &(bb, ib)) in &before {
                if a < b && ba == bb && after[&a].0 == after[&b].0 {
                    prop_assert_eq!(ia < ib, after[&a].1 < after[&b].1);
                }
            }
        }
    }
}
