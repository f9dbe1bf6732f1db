//! Learn+adapt mode.
//!
//! Requests are counted in a [`RequestCounts`] structure that mirrors the
//! table slot for slot: the counter for the entry in slab slot `i` is
//! `counts[i]`, so walking a chain in the table walks the same positions in
//! the counter array. On every successful fetch the fetched entry's counter
//! is bumped and, if it now exceeds the smallest counter seen on the walk to
//! it, the two entries trade places. At most one swap happens per fetch.
//!
//! Swaps exchange payloads (key, value, counter), never links, so chain
//! shapes in both structures stay identical.

use crate::table::{ChainedTable, FetchResult, NIL};

/// Called once when a counter structure is released.
pub trait ReclaimHook {
    fn reclaim(&mut self, region: &[u64]);
}

/// Does nothing.
#[derive(Clone, Copy, Debug, Default)]
pub struct NoopReclaim;

impl ReclaimHook for NoopReclaim {
    fn reclaim(&mut self, _region: &[u64]) {}
}

/// Evicts the region from every cache level line by line.
#[cfg(target_arch = "x86_64")]
#[derive(Clone, Copy, Debug, Default)]
pub struct CacheFlushReclaim;

#[cfg(target_arch = "x86_64")]
impl ReclaimHook for CacheFlushReclaim {
    fn reclaim(&mut self, region: &[u64]) {
        use std::arch::x86_64::{_mm_clflush, _mm_mfence};
        const LINE: usize = 64;
        let start = region.as_ptr() as usize;
        let end = start + std::mem::size_of_val(region);
        let mut line = start & !(LINE - 1);
        while line < end {
            // SAFETY: every flushed line overlaps `region`, which is a live borrow.
            unsafe { _mm_clflush(line as *const u8) };
            line += LINE;
        }
        // SAFETY: `mfence` has no memory-safety preconditions.
        unsafe { _mm_mfence() };
    }
}

#[derive(Clone, Debug)]
pub struct RequestCounts {
    counts: Vec<u64>,
}

impl RequestCounts {
    /// Allocates zeroed counters for every slot of `table`.
    pub fn begin_learn(table: &ChainedTable) -> Self {
        Self { counts: vec![0; table.slot_count()] }
    }

    /// Counter values laid out like [`ChainedTable::chains`].
    pub fn chains(&self, table: &ChainedTable) -> Vec<Vec<u64>> {
        (0..table.bucket_count())
            .map(|b| table.chain_slots(b).map(|s| self.counts[s as usize]).collect())
            .collect()
    }

    pub fn count_of(&self, table: &ChainedTable, key: u64) -> Option<u64> {
        let b = table.bucket_of(key);
        table
            .chain_slots(b)
            .find(|&s| table.nodes[s as usize].key == key)
            .map(|s| self.counts[s as usize])
    }

    pub fn memory_bytes(&self) -> usize {
        self.counts.capacity() * std::mem::size_of::<u64>()
    }

    #[inline]
    pub fn fetch_adaptive(&mut self, table: &mut ChainedTable, key: u64) -> FetchResult {
        let bucket = table.bucket_of(key);
        let mut idx = table.heads[bucket];
        if idx == NIL {
            return FetchResult::miss(0);
        }
        let mut min_idx = idx;
        let mut min_count = self.counts[idx as usize];
        let mut displacement = 0;
        loop {
            displacement += 1;
            let node = table.nodes[idx as usize];
            if node.key == key {
                break;
            }
            let c = self.counts[idx as usize];
            if c < min_count {
                min_idx = idx;
                min_count = c;
            }
            idx = node.next;
            if idx == NIL {
                return FetchResult::miss(displacement);
            }
        }

        let value = table.nodes[idx as usize].value;
        let count = self.counts[idx as usize] + 1;
        self.counts[idx as usize] = count;
        if min_idx != idx && count > min_count {
            table.swap_payloads(idx, min_idx);
            self.counts.swap(idx as usize, min_idx as usize);
        }
        FetchResult::hit(value, displacement)
    }

    /// Inserts into the table. A new entry starts with a zero count; an
    /// overwritten entry keeps its count. Counts survive any rehash the
    /// insert triggers because they are indexed by slot, not position.
    pub fn insert(&mut self, table: &mut ChainedTable, key: u64, value: u64) -> bool {
        let (inserted, slot) = table.insert_slot(key, value);
        if inserted {
            let slot = slot as usize;
            if slot >= self.counts.len() {
                self.counts.resize(table.slot_count(), 0);
            }
            self.counts[slot] = 0;
        }
        inserted
    }

    pub fn delete(&mut self, table: &mut ChainedTable, key: u64) -> bool {
        match table.delete_slot(key) {
            Some(slot) => {
                self.counts[slot as usize] = 0;
                true
            }
            None => false,
        }
    }

    /// Releases the counters. The table keeps whatever order was learned.
    pub fn end_learn(self, hook: &mut dyn ReclaimHook) {
        hook.reclaim(&self.counts);
    }
}
