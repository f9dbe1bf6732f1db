//! Chained table whose entries carry a 1-byte request counter next to the
//! 16-byte key/value payload. Every successful fetch bumps the counter in
//! place. Only the counter-overhead experiment uses it.
//!
//! Layout and policy otherwise follow `viphash::table::ChainedTable`: slab
//! nodes, front insertion, power-of-two buckets, stable rehash at the same
//! load-factor bounds. The record `{key, value, count}` is its own aligned
//! type, 17 bytes padded to 24, followed by the chain link, so a node takes
//! 32 bytes against the plain table's 24.

use viphash::controller::OpResult;
use viphash::hash::{bucket_index, hash};
use viphash::table::{FetchResult, TableConfig};
use viphash::workload::Operation;

const NIL: u32 = u32::MAX;

#[derive(Clone, Copy, Debug)]
#[repr(C)]
struct Entry17 {
    key: u64,
    value: u64,
    count: u8,
}

#[derive(Clone, Copy, Debug)]
#[repr(C)]
struct Node17 {
    entry: Entry17,
    next: u32,
}

pub struct Counter17Table {
    heads: Vec<u32>,
    nodes: Vec<Node17>,
    free: Vec<u32>,
    len: usize,
    log2: u32,
    seed: u64,
    lf_min: f64,
    lf_max: f64,
}

impl Counter17Table {
    pub fn with_capacity(config: TableConfig, entries: usize) -> Self {
        Self {
            heads: vec![NIL; 1 << config.bucket_count_log2],
            nodes: Vec::with_capacity(entries),
            free: Vec::new(),
            len: 0,
            log2: config.bucket_count_log2,
            seed: config.hash_seed,
            lf_min: config.load_factor_min,
            lf_max: config.load_factor_max,
        }
    }

    pub const fn entry_bytes() -> usize {
        std::mem::size_of::<Node17>()
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn bucket_count(&self) -> usize {
        self.heads.len()
    }

    #[inline]
    fn bucket_of(&self, key: u64) -> usize {
        bucket_index(hash(key, self.seed), self.log2)
    }

    pub fn count_of(&self, key: u64) -> Option<u8> {
        let mut idx = self.heads[self.bucket_of(key)];
        while idx != NIL {
            let n = &self.nodes[idx as usize];
            if n.entry.key == key {
                return Some(n.entry.count);
            }
            idx = n.next;
        }
        None
    }

    #[inline]
    pub fn fetch(&mut self, key: u64) -> FetchResult {
        let mut idx = self.heads[self.bucket_of(key)];
        let mut displacement = 0;
        while idx != NIL {
            displacement += 1;
            let node = &mut self.nodes[idx as usize];
            if node.entry.key == key {
                node.entry.count = node.entry.count.wrapping_add(1);
                return FetchResult { found: true, value: Some(node.entry.value), displacement };
            }
            idx = node.next;
        }
        FetchResult { found: false, value: None, displacement }
    }

    pub fn insert(&mut self, key: u64, value: u64) -> bool {
        let b = self.bucket_of(key);
        let mut idx = self.heads[b];
        while idx != NIL {
            let node = &mut self.nodes[idx as usize];
            if node.entry.key == key {
                node.entry.value = value;
                return false;
            }
            idx = node.next;
        }
        let node = Node17 { entry: Entry17 { key, value, count: 0 }, next: self.heads[b] };
        let slot = match self.free.pop() {
            Some(s) => {
                self.nodes[s as usize] = node;
                s
            }
            None => {
                self.nodes.push(node);
                (self.nodes.len() - 1) as u32
            }
        };
        self.heads[b] = slot;
        self.len += 1;
        if self.len as f64 > self.lf_max * self.heads.len() as f64 {
            self.rehash(self.log2 + 1);
        }
        true
    }

    pub fn delete(&mut self, key: u64) -> bool {
        let b = self.bucket_of(key);
        let mut prev = NIL;
        let mut idx = self.heads[b];
        while idx != NIL {
            let node = self.nodes[idx as usize];
            if node.entry.key == key {
                if prev == NIL {
                    self.heads[b] = node.next;
                } else {
                    self.nodes[prev as usize].next = node.next;
                }
                self.free.push(idx);
                self.len -= 1;
                while self.log2 > 1 && (self.len as f64) < self.lf_min * self.heads.len() as f64 {
                    self.rehash(self.log2 - 1);
                }
                return true;
            }
            prev = idx;
            idx = node.next;
        }
        false
    }

    fn rehash(&mut self, new_log2: u32) {
        let n = 1usize << new_log2;
        let mut heads = vec![NIL; n];
        let mut tails = vec![NIL; n];
        for b in 0..self.heads.len() {
            let mut idx = self.heads[b];
            while idx != NIL {
                let node = self.nodes[idx as usize];
                let nb = bucket_index(hash(node.entry.key, self.seed), new_log2);
                if tails[nb] == NIL {
                    heads[nb] = idx;
                } else {
                    self.nodes[tails[nb] as usize].next = idx;
                }
                tails[nb] = idx;
                idx = node.next;
            }
        }
        for &t in &tails {
            if t != NIL {
                self.nodes[t as usize].next = NIL;
            }
        }
        self.heads = heads;
        self.log2 = new_log2;
    }

    #[inline]
    pub fn apply(&mut self, op: &Operation) -> OpResult {
        match *op {
            Operation::Fetch { key } => OpResult::Fetched(self.fetch(key)),
            Operation::Insert { key, value } => OpResult::Inserted(self.insert(key, value)),
            Operation::Delete { key } => OpResult::Deleted(self.delete(key)),
        }
    }
}
