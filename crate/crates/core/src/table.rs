//! Chained hash table over 8-byte keys and values.
//!
//! Entries live in a slab (`Vec<Node>`) and are linked into per-bucket chains
//! by slot index. New keys go to the front of their chain. The bucket count
//! is a power of two and is doubled (halved) whenever the load factor leaves
//! `[load_factor_min, load_factor_max]`. Rehashing is stable: two entries
//! landing in the same new bucket keep their relative order.

use crate::hash::{bucket_index, hash};

pub(crate) const NIL: u32 = u32::MAX;

/// Smallest table: two buckets.
pub const MIN_BUCKET_COUNT_LOG2: u32 = 1;

#[derive(Clone, Copy, Debug)]
#[repr(C)]
pub(crate) struct Node {
    pub(crate) key: u64,
    pub(crate) value: u64,
    pub(crate) next: u32,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TableConfig {
    pub bucket_count_log2: u32,
    pub load_factor_min: f64,
    pub load_factor_max: f64,
    pub hash_seed: u64,
}

impl Default for TableConfig {
    fn default() -> Self {
        Self {
            bucket_count_log2: MIN_BUCKET_COUNT_LOG2,
            load_factor_min: 0.5,
            load_factor_max: 1.5,
            hash_seed: 0,
        }
    }
}

impl TableConfig {
    pub fn with_bucket_count_log2(bucket_count_log2: u32) -> Self {
        Self {
            bucket_count_log2: bucket_count_log2.max(MIN_BUCKET_COUNT_LOG2),
            ..Self::default()
        }
    }

    /// Picks the power-of-two bucket count closest to `keys / load_factor`,
    /// then nudges it so that `keys` entries sit inside the load-factor band.
    pub fn for_load_factor(keys: u64, load_factor: f64) -> Self {
        let base = Self::default();
        let target = (keys.max(1) as f64 / load_factor).max(2.0);
        let mut log2 = (target.log2().round() as u32).clamp(MIN_BUCKET_COUNT_LOG2, 40);
        while log2 > MIN_BUCKET_COUNT_LOG2 && (keys as f64) < base.load_factor_min * (1u64 << log2) as f64 {
            log2 -= 1;
        }
        while (keys as f64) > base.load_factor_max * (1u64 << log2) as f64 {
            log2 += 1;
        }
        Self::with_bucket_count_log2(log2)
    }

    pub fn bucket_count(&self) -> usize {
        1usize << self.bucket_count_log2
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FetchResult {
    pub found: bool,
    pub value: Option<u64>,
    /// Entries examined, the match included. A miss reports the chain length.
    pub displacement: u32,
}

impl FetchResult {
    #[inline]
    pub(crate) fn hit(value: u64, displacement: u32) -> Self {
        Self { found: true, value: Some(value), displacement }
    }

    #[inline]
    pub(crate) fn miss(displacement: u32) -> Self {
        Self { found: false, value: None, displacement }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RehashDirection {
    Grow,
    Shrink,
}

#[derive(Clone, Debug)]
pub struct ChainedTable {
    pub(crate) heads: Vec<u32>,
    pub(crate) nodes: Vec<Node>,
    free: Vec<u32>,
    len: usize,
    log2: u32,
    seed: u64,
    lf_min: f64,
    lf_max: f64,
    grow_above: usize,
    shrink_below: usize,
    rehashes: u64,
}

impl ChainedTable {
    pub fn new(config: TableConfig) -> Self {
        assert!(config.bucket_count_log2 >= MIN_BUCKET_COUNT_LOG2 && config.bucket_count_log2 < 32);
        assert!(config.load_factor_min < config.load_factor_max);
        let mut table = Self {
            heads: vec![NIL; 1 << config.bucket_count_log2],
            nodes: Vec::new(),
            free: Vec::new(),
            len: 0,
            log2: config.bucket_count_log2,
            seed: config.hash_seed,
            lf_min: config.load_factor_min,
            lf_max: config.load_factor_max,
            grow_above: 0,
            shrink_below: 0,
            rehashes: 0,
        };
        table.update_thresholds();
        table
    }

    pub fn with_capacity(config: TableConfig, entries: usize) -> Self {
        let mut table = Self::new(config);
        table.nodes.reserve(entries);
        table
    }

    fn update_thresholds(&mut self) {
        let buckets = self.bucket_count() as f64;
        self.grow_above = (self.lf_max * buckets).floor() as usize;
        self.shrink_below = (self.lf_min * buckets).ceil() as usize;
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn bucket_count(&self) -> usize {
        self.heads.len()
    }

    #[inline]
    pub fn bucket_count_log2(&self) -> u32 {
        self.log2
    }

    pub fn load_factor(&self) -> f64 {
        self.len as f64 / self.bucket_count() as f64
    }

    pub fn hash_seed(&self) -> u64 {
        self.seed
    }

    /// Number of rehashes performed since construction.
    pub fn rehash_count(&self) -> u64 {
        self.rehashes
    }

    /// Slab slots allocated, live or free. Parallel per-slot arrays use this as their length.
    pub(crate) fn slot_count(&self) -> usize {
        self.nodes.len()
    }

    /// Bytes held by bucket heads and entry slots.
    pub fn memory_bytes(&self) -> usize {
        self.heads.capacity() * std::mem::size_of::<u32>()
            + self.nodes.capacity() * std::mem::size_of::<Node>()
            + self.free.capacity() * std::mem::size_of::<u32>()
    }

    #[inline]
    pub fn bucket_of(&self, key: u64) -> usize {
        bucket_index(hash(key, self.seed), self.log2)
    }

    #[inline]
    pub fn fetch(&self, key: u64) -> FetchResult {
        let mut idx = self.heads[self.bucket_of(key)];
        let mut displacement = 0;
        while idx != NIL {
            displacement += 1;
            let node = &self.nodes[idx as usize];
            if node.key == key {
                return FetchResult::hit(node.value, displacement);
            }
            idx = node.next;
        }
        FetchResult::miss(displacement)
    }

    pub fn contains(&self, key: u64) -> bool {
        self.fetch(key).found
    }

    /// Inserts at the front of the chain. Returns `false` when the key was
    /// already present, in which case its value is overwritten in place.
    pub fn insert(&mut self, key: u64, value: u64) -> bool {
        self.insert_slot(key, value).0
    }

    /// Like [`insert`](Self::insert), also returning the slot holding the key.
    pub(crate) fn insert_slot(&mut self, key: u64, value: u64) -> (bool, u32) {
        let bucket = self.bucket_of(key);
        let mut idx = self.heads[bucket];
        while idx != NIL {
            let node = &mut self.nodes[idx as usize];
            if node.key == key {
                node.value = value;
                return (false, idx);
            }
            idx = node.next;
        }

        let node = Node { key, value, next: self.heads[bucket] };
        let slot = match self.free.pop() {
            Some(slot) => {
                self.nodes[slot as usize] = node;
                slot
            }
            None => {
                let slot = u32::try_from(self.nodes.len()).expect("slab exceeds u32 slots");
                assert!(slot != NIL, "slab exceeds u32 slots");
                self.nodes.push(node);
                slot
            }
        };
        self.heads[bucket] = slot;
        self.len += 1;

        if self.len > self.grow_above {
            self.rehash(RehashDirection::Grow);
        }
        (true, slot)
    }

    pub fn delete(&mut self, key: u64) -> bool {
        self.delete_slot(key).is_some()
    }

    /// Unlinks `key`, returning the slot it occupied.
    pub(crate) fn delete_slot(&mut self, key: u64) -> Option<u32> {
        let bucket = self.bucket_of(key);
        let mut prev = NIL;
        let mut idx = self.heads[bucket];
        while idx != NIL {
            let node = self.nodes[idx as usize];
            if node.key == key {
                if prev == NIL {
                    self.heads[bucket] = node.next;
                } else {
                    self.nodes[prev as usize].next = node.next;
                }
                self.free.push(idx);
                self.len -= 1;
                while self.len < self.shrink_below && self.log2 > MIN_BUCKET_COUNT_LOG2 {
                    self.rehash(RehashDirection::Shrink);
                }
                return Some(idx);
            }
            prev = idx;
            idx = node.next;
        }
        None
    }

    /// Doubles or halves the bucket count and relinks every entry.
    /// Buckets are visited in index order and entries appended at chain
    /// tails, so relative order within a new chain follows old traversal order.
    pub fn rehash(&mut self, direction: RehashDirection) {
        let new_log2 = match direction {
            RehashDirection::Grow => self.log2 + 1,
            RehashDirection::Shrink => {
                if self.log2 == MIN_BUCKET_COUNT_LOG2 {
                    return;
                }
                self.log2 - 1
            }
        };
        let new_count = 1usize << new_log2;
        let mut heads = vec![NIL; new_count];
        let mut tails = vec![NIL; new_count];

        for b in 0..self.heads.len() {
            let mut idx = self.heads[b];
            while idx != NIL {
                let node = self.nodes[idx as usize];
                let nb = bucket_index(hash(node.key, self.seed), new_log2);
                if tails[nb] == NIL {
                    heads[nb] = idx;
                } else {
                    self.nodes[tails[nb] as usize].next = idx;
                }
                tails[nb] = idx;
                idx = node.next;
            }
        }
        for &tail in &tails {
            if tail != NIL {
                self.nodes[tail as usize].next = NIL;
            }
        }

        self.heads = heads;
        self.log2 = new_log2;
        self.rehashes += 1;
        self.update_thresholds();
    }

    /// Keys of one chain, head first.
    pub fn chain_keys(&self, bucket: usize) -> Vec<u64> {
        self.chain_slots(bucket).map(|s| self.nodes[s as usize].key).collect()
    }

    /// Keys of every chain, indexed by bucket.
    pub fn chains(&self) -> Vec<Vec<u64>> {
        (0..self.bucket_count()).map(|b| self.chain_keys(b)).collect()
    }

    pub fn chain_len(&self, bucket: usize) -> usize {
        self.chain_slots(bucket).count()
    }

    pub(crate) fn chain_slots(&self, bucket: usize) -> impl Iterator<Item = u32> + '_ {
        let mut idx = self.heads[bucket];
        std::iter::from_fn(move || {
            if idx == NIL {
                return None;
            }
            let current = idx;
            idx = self.nodes[idx as usize].next;
            Some(current)
        })
    }

    /// All `(key, value)` pairs in bucket order.
    pub fn iter(&self) -> impl Iterator<Item = (u64, u64)> + '_ {
        (0..self.bucket_count()).flat_map(move |b| {
            self.chain_slots(b).map(move |s| {
                let n = &self.nodes[s as usize];
                (n.key, n.value)
            })
        })
    }

    #[inline]
    pub(crate) fn swap_payloads(&mut self, a: u32, b: u32) {
        let (a, b) = (a as usize, b as usize);
        let (ka, va) = (self.nodes[a].key, self.nodes[a].value);
        self.nodes[a].key = self.nodes[b].key;
        self.nodes[a].value = self.nodes[b].value;
        self.nodes[b].key = ka;
        self.nodes[b].value = va;
    }
}
