//! Zipfian popularity over a mutable ranking of keys.
//!
//! Rank `i` (1-based) carries probability `i^-s / H` with
//! `H = sum_{j=1..N} j^-s`. Unnormalised prefix sums are kept in a growable
//! array, so adding a rank at the tail costs O(1) and sampling is a binary
//! search over the first `N` entries. While the population is the one the
//! model was built with, a guide table narrows that search to a short run of
//! the array first; the rank returned is the same either way. The
//! rank-to-key mapping lives in a [`RankOrder`], which supports positional
//! insert and remove.

use std::collections::HashSet;

use super::rng::WorkloadRng;

const CHUNK: usize = 1024;

/// A sequence of keys indexed by position, chunked so that inserting or
/// removing at an arbitrary position is cheap. A Fenwick tree over chunk
/// lengths maps positions to chunks once chunks stop being uniform.
#[derive(Clone, Debug)]
pub struct RankOrder {
    chunks: Vec<Vec<u64>>,
    tree: Vec<usize>,
    len: usize,
    // Every chunk but the last holds exactly CHUNK keys.
    uniform: bool,
}

impl RankOrder {
    pub fn from_vec(keys: Vec<u64>) -> Self {
        let len = keys.len();
        let chunks: Vec<Vec<u64>> = keys.chunks(CHUNK).map(<[u64]>::to_vec).collect();
        let mut order = Self { chunks, tree: Vec::new(), len, uniform: true };
        order.rebuild_tree();
        order
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    fn rebuild_tree(&mut self) {
        let n = self.chunks.len();
        self.tree = vec![0; n + 1];
        for (i, c) in self.chunks.iter().enumerate() {
            self.tree[i + 1] = c.len();
        }
        for i in 1..=n {
            let parent = i + (i & i.wrapping_neg());
            if parent <= n {
                self.tree[parent] += self.tree[i];
            }
        }
    }

    fn tree_add(&mut self, chunk: usize, delta: isize) {
        let mut i = chunk + 1;
        while i < self.tree.len() {
            self.tree[i] = self.tree[i].wrapping_add_signed(delta);
            i += i & i.wrapping_neg();
        }
    }

    #[inline]
    fn locate(&self, pos: usize) -> (usize, usize) {
        debug_assert!(pos < self.len);
        if self.uniform {
            return (pos / CHUNK, pos % CHUNK);
        }
        let n = self.chunks.len();
        let mut idx = 0;
        let mut rem = pos;
        let mut step = if n == 0 { 0 } else { 1usize << (usize::BITS - 1 - n.leading_zeros()) };
        while step > 0 {
            let next = idx + step;
            if next <= n && self.tree[next] <= rem {
                idx = next;
                rem -= self.tree[next];
            }
            step >>= 1;
        }
        (idx, rem)
    }

    #[inline]
    pub fn get(&self, pos: usize) -> u64 {
        let (c, o) = self.locate(pos);
        self.chunks[c][o]
    }

    pub fn set(&mut self, pos: usize, key: u64) {
        let (c, o) = self.locate(pos);
        self.chunks[c][o] = key;
    }

    pub fn swap(&mut self, a: usize, b: usize) {
        let (ka, kb) = (self.get(a), self.get(b));
        self.set(a, kb);
        self.set(b, ka);
    }

    pub fn insert(&mut self, pos: usize, key: u64) {
        assert!(pos <= self.len);
        self.uniform = false;
        if self.chunks.is_empty() {
            self.chunks.push(vec![key]);
            self.len = 1;
            self.rebuild_tree();
            return;
        }
        let (c, o) = if pos == self.len {
            let last = self.chunks.len() - 1;
            (last, self.chunks[last].len())
        } else {
            self.locate(pos)
        };
        self.chunks[c].insert(o, key);
        self.len += 1;
        if self.chunks[c].len() > 2 * CHUNK {
            let tail = self.chunks[c].split_off(CHUNK);
            self.chunks.insert(c + 1, tail);
            self.rebuild_tree();
        } else {
            self.tree_add(c, 1);
        }
    }

    pub fn remove(&mut self, pos: usize) -> u64 {
        assert!(pos < self.len);
        self.uniform = false;
        let (c, o) = self.locate(pos);
        let key = self.chunks[c].remove(o);
        self.len -= 1;
        if self.chunks[c].is_empty() {
            self.chunks.remove(c);
            self.rebuild_tree();
        } else {
            self.tree_add(c, -1);
        }
        key
    }

    pub fn to_vec(&self) -> Vec<u64> {
        self.chunks.iter().flatten().copied().collect()
    }
}

#[derive(Clone, Debug)]
pub struct PopularityModel {
    exponent: f64,
    // cumulative[i] = sum_{j=1..=i+1} j^-s, Neumaier-compensated.
    cumulative: Vec<f64>,
    sum: f64,
    compensation: f64,
    ranks: RankOrder,
    // guide[j] = #{i : cumulative[i] <= threshold(j)}, valid for guide_n ranks.
    guide: Vec<u32>,
    guide_n: usize,
}

impl PopularityModel {
    /// `keys_by_rank[0]` is the most popular key.
    pub fn new(exponent: f64, keys_by_rank: Vec<u64>) -> Self {
        assert!(exponent.is_finite() && exponent >= 0.0);
        let mut model = Self {
            exponent,
            cumulative: Vec::with_capacity(keys_by_rank.len()),
            sum: 0.0,
            compensation: 0.0,
            ranks: RankOrder::from_vec(keys_by_rank),
            guide: Vec::new(),
            guide_n: 0,
        };
        model.extend_weights(model.ranks.len());
        model.build_guide();
        model
    }

    fn guide_slots(n: usize) -> usize {
        (n.next_power_of_two() / 2).clamp(1, 1 << 22)
    }

    #[inline]
    fn guide_threshold(total: f64, slots: usize, j: usize) -> f64 {
        total * (j as f64 / slots as f64)
    }

    fn build_guide(&mut self) {
        let n = self.population();
        self.guide_n = n;
        self.guide.clear();
        if n == 0 || n > u32::MAX as usize {
            return;
        }
        let g = Self::guide_slots(n);
        let total = self.cumulative[n - 1];
        let mut i = 0;
        for j in 0..=g {
            let t = Self::guide_threshold(total, g, j);
            while i < n && self.cumulative[i] <= t {
                i += 1;
            }
            self.guide.push(i as u32);
        }
        self.guide.push(n as u32);
    }

    /// `#{i < n : cumulative[i] <= target}`.
    #[inline]
    fn count_at_or_below(&self, target: f64, u: f64) -> usize {
        let n = self.population();
        if self.guide_n != n || self.guide.is_empty() {
            return self.cumulative[..n].partition_point(|&c| c <= target);
        }
        let g = self.guide.len() - 2;
        let total = self.cumulative[n - 1];
        let mut j = ((u * g as f64) as usize).min(g);
        while j > 0 && Self::guide_threshold(total, g, j) > target {
            j -= 1;
        }
        while j < g && Self::guide_threshold(total, g, j + 1) <= target {
            j += 1;
        }
        let lo = self.guide[j] as usize;
        let hi = if j == g { n } else { self.guide[j + 1] as usize };
        lo + self.cumulative[lo..hi].partition_point(|&c| c <= target)
    }

    fn extend_weights(&mut self, upto: usize) {
        while self.cumulative.len() < upto {
            let rank = (self.cumulative.len() + 1) as f64;
            let w = rank.powf(-self.exponent);
            let t = self.sum + w;
            if self.sum.abs() >= w.abs() {
                self.compensation += (self.sum - t) + w;
            } else {
                self.compensation += (w - t) + self.sum;
            }
            self.sum = t;
            self.cumulative.push(self.sum + self.compensation);
        }
    }

    pub fn exponent(&self) -> f64 {
        self.exponent
    }

    pub fn population(&self) -> usize {
        self.ranks.len()
    }

    fn total_weight(&self) -> f64 {
        self.cumulative[self.population() - 1]
    }

    /// Probability of the 1-based `rank`.
    pub fn probability(&self, rank: usize) -> f64 {
        assert!(rank >= 1 && rank <= self.population());
        (rank as f64).powf(-self.exponent) / self.total_weight()
    }

    /// Probabilities of ranks `1..=N`.
    pub fn probabilities(&self) -> Vec<f64> {
        let total = self.total_weight();
        (1..=self.population()).map(|r| (r as f64).powf(-self.exponent) / total).collect()
    }

    pub fn key_at_rank(&self, rank: usize) -> u64 {
        self.ranks.get(rank - 1)
    }

    /// Keys ordered from most to least popular.
    pub fn keys_by_rank(&self) -> Vec<u64> {
        self.ranks.to_vec()
    }

    /// Draws a 1-based rank by inverse-CDF binary search.
    #[inline]
    pub fn sample_rank(&self, rng: &mut WorkloadRng) -> usize {
        let n = self.population();
        let u = rng.next_f64();
        let target = u * self.cumulative[n - 1];
        self.count_at_or_below(target, u).min(n - 1) + 1
    }

    #[inline]
    pub fn sample_key(&self, rng: &mut WorkloadRng) -> u64 {
        self.key_at_rank(self.sample_rank(rng))
    }

    /// Smallest `m` such that ranks `1..=m` carry at least `prct` percent of
    /// the request mass.
    pub fn churn_prefix(&self, prct: f64) -> usize {
        let n = self.population();
        let target = prct / 100.0 * self.total_weight();
        let m = self.cumulative[..n].partition_point(|&c| c < target) + 1;
        m.min(n)
    }

    /// Moves the hottest keys to random colder ranks. The keys holding ranks
    /// `1..=m` each trade rank with a distinct key drawn uniformly from
    /// ranks `m+1..=N`; when fewer than `m` colder ranks exist only that
    /// many of the top ranks are swapped. Returns `m`.
    pub fn apply_churn(&mut self, rng: &mut WorkloadRng, prct: f64) -> usize {
        assert!(prct > 0.0 && prct <= 100.0);
        let n = self.population();
        let m = self.churn_prefix(prct);
        let colder = (n - m) as u64;
        let swaps = m.min(n - m);
        if swaps == 0 {
            return m;
        }
        let targets: Vec<usize> = if 2 * swaps as u64 <= colder {
            let mut seen = HashSet::with_capacity(swaps);
            let mut out = Vec::with_capacity(swaps);
            while out.len() < swaps {
                let t = m + rng.below(colder) as usize;
                if seen.insert(t) {
                    out.push(t);
                }
            }
            out
        } else {
            let mut pool: Vec<usize> = (m..n).collect();
            for i in 0..swaps {
                let j = i + rng.below((pool.len() - i) as u64) as usize;
                pool.swap(i, j);
            }
            pool.truncate(swaps);
            pool
        };
        for (hot, cold) in targets.into_iter().enumerate() {
            self.ranks.swap(hot, cold);
        }
        m
    }

    /// Places `key` at the 1-based `rank`, shifting colder keys down one rank.
    pub fn insert_at_rank(&mut self, rank: usize, key: u64) {
        self.ranks.insert(rank - 1, key);
        self.extend_weights(self.ranks.len());
    }

    /// Removes the key at the 1-based `rank`; colder keys move up one rank.
    pub fn remove_at_rank(&mut self, rank: usize) -> u64 {
        self.ranks.remove(rank - 1)
    }
}
