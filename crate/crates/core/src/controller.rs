//! The VIP mode controller.
//!
//! An engine cycles through three modes:
//!
//! ```text
//! LearnAdapt --N_L--> Sense(baseline) --N_S--> Default --N_D--> Sense(compare)
//!     ^                                           ^                  |
//!     +------------------ changed ----------------+---- unchanged ---+
//! ```
//!
//! Every operation counts toward the current mode's budget. Only successful
//! fetches feed the sense statistics. A sense window that ends with fewer than
//! two samples is extended by another `N_S` operations, at most
//! [`ControllerParams::max_sense_extensions`] times, after which the engine
//! falls back to default mode without comparing.

use crate::adapt::{NoopReclaim, ReclaimHook, RequestCounts};
use crate::sense::{has_distribution_changed, SenseAccumulator, SenseStats, DEFAULT_CONFIDENCE};
use crate::table::{ChainedTable, FetchResult, TableConfig};
use crate::workload::Operation;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ControllerParams {
    /// `N_L = ceil(learn_per_bucket * bucket_count)`.
    pub learn_per_bucket: f64,
    /// `N_D = default_multiple * N_L`.
    pub default_multiple: u64,
    /// `N_S`, the sense window length.
    pub sense_span: u64,
    pub confidence: f64,
    /// Learn-mode slowdown `k`, used only by [`overhead_cap`](Self::overhead_cap).
    pub slowdown_factor: f64,
    pub max_sense_extensions: u32,
}

impl Default for ControllerParams {
    fn default() -> Self {
        Self {
            learn_per_bucket: 1.5,
            default_multiple: 60,
            sense_span: 1000,
            confidence: DEFAULT_CONFIDENCE,
            slowdown_factor: 4.0,
            max_sense_extensions: 10,
        }
    }
}

impl ControllerParams {
    pub fn learn_budget(&self, bucket_count: usize) -> u64 {
        (self.learn_per_bucket * bucket_count as f64).ceil() as u64
    }

    pub fn default_span(&self, bucket_count: usize) -> u64 {
        self.default_multiple * self.learn_budget(bucket_count)
    }

    /// Worst-case throughput loss from learning.
    pub fn overhead_cap(&self) -> f64 {
        overhead_cap(self.default_multiple as f64, 1.0, self.slowdown_factor)
    }
}

/// `1 - (N_D + N_L) / (N_D + k * N_L)`.
pub fn overhead_cap(default_span: f64, learn_budget: f64, k: f64) -> f64 {
    1.0 - (default_span + learn_budget) / (default_span + k * learn_budget)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Mode {
    LearnAdapt,
    Sense,
    Default,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::LearnAdapt, Mode::Sense, Mode::Default];

    pub fn index(self) -> usize {
        match self {
            Mode::LearnAdapt => 0,
            Mode::Sense => 1,
            Mode::Default => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Mode::LearnAdapt => "learn",
            Mode::Sense => "sense",
            Mode::Default => "default",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SenseRole {
    Baseline,
    Compare,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModeState {
    pub mode: Mode,
    pub remaining: u64,
    pub baseline: Option<SenseStats>,
    pub pending_sense_role: SenseRole,
}

/// One mode transition. `op_index` is the number of operations served
/// before the new mode took over.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TriggerEvent {
    pub op_index: u64,
    pub from: Option<Mode>,
    pub to: Mode,
    /// Role of the sense window being entered or left, if any.
    pub role: Option<SenseRole>,
    /// Set when leaving a compare window.
    pub baseline: Option<SenseStats>,
    /// Set when leaving a sense window that produced statistics.
    pub current: Option<SenseStats>,
}

impl TriggerEvent {
    /// Whether this event ended a compare window that saw a change.
    pub fn detected_change(&self) -> bool {
        match (self.baseline, self.current) {
            (Some(b), Some(c)) => has_distribution_changed(b, c),
            _ => false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OpResult {
    Fetched(FetchResult),
    Inserted(bool),
    Deleted(bool),
}

impl OpResult {
    pub fn displacement(&self) -> u32 {
        match self {
            OpResult::Fetched(f) => f.displacement,
            _ => 0,
        }
    }
}

/// Applies `op` to a plain table.
#[inline]
pub fn apply_default(table: &mut ChainedTable, op: &Operation) -> OpResult {
    match *op {
        Operation::Fetch { key } => OpResult::Fetched(table.fetch(key)),
        Operation::Insert { key, value } => OpResult::Inserted(table.insert(key, value)),
        Operation::Delete { key } => OpResult::Deleted(table.delete(key)),
    }
}

pub struct VipEngine {
    table: ChainedTable,
    counts: Option<RequestCounts>,
    params: ControllerParams,
    learn_budget: u64,
    default_span: u64,
    state: ModeState,
    acc: SenseAccumulator,
    extensions: u32,
    ops: u64,
    occupancy: [u64; 3],
    events: Vec<TriggerEvent>,
    reclaim: Box<dyn ReclaimHook + Send>,
}

impl std::fmt::Debug for VipEngine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("VipEngine")
            .field("state", &self.state)
            .field("learn_budget", &self.learn_budget)
            .field("default_span", &self.default_span)
            .field("ops", &self.ops)
            .finish_non_exhaustive()
    }
}

impl VipEngine {
    pub fn new(config: TableConfig, params: ControllerParams) -> Self {
        Self::from_table(ChainedTable::new(config), params)
    }

    /// Wraps an already populated table. Learning starts immediately.
    pub fn from_table(table: ChainedTable, params: ControllerParams) -> Self {
        assert!(params.sense_span > 0 && params.default_multiple > 0 && params.learn_per_bucket > 0.0);
        let b = table.bucket_count();
        let learn_budget = params.learn_budget(b);
        let counts = Some(RequestCounts::begin_learn(&table));
        let mut engine = Self {
            table,
            counts,
            params,
            learn_budget,
            default_span: params.default_span(b),
            state: ModeState {
                mode: Mode::LearnAdapt,
                remaining: learn_budget,
                baseline: None,
                pending_sense_role: SenseRole::Baseline,
            },
            acc: SenseAccumulator::new(params.confidence),
            extensions: 0,
            ops: 0,
            occupancy: [0; 3],
            events: Vec::new(),
            reclaim: Box::new(NoopReclaim),
        };
        engine.events.push(TriggerEvent { op_index: 0, from: None, to: Mode::LearnAdapt, role: None, baseline: None, current: None });
        engine
    }

    pub fn with_reclaim_hook(mut self, hook: Box<dyn ReclaimHook + Send>) -> Self {
        self.reclaim = hook;
        self
    }

    pub fn table(&self) -> &ChainedTable {
        &self.table
    }

    pub fn into_table(mut self) -> ChainedTable {
        if let Some(c) = self.counts.take() {
            c.end_learn(self.reclaim.as_mut());
        }
        self.table
    }

    pub fn params(&self) -> &ControllerParams {
        &self.params
    }

    pub fn learn_budget(&self) -> u64 {
        self.learn_budget
    }

    pub fn default_span(&self) -> u64 {
        self.default_span
    }

    pub fn state(&self) -> &ModeState {
        &self.state
    }

    pub fn mode(&self) -> Mode {
        self.state.mode
    }

    pub fn ops(&self) -> u64 {
        self.ops
    }

    /// Operations served in each mode, indexed by [`Mode::index`].
    pub fn occupancy(&self) -> [u64; 3] {
        self.occupancy
    }

    pub fn events(&self) -> &[TriggerEvent] {
        &self.events
    }

    pub fn memory_bytes(&self) -> usize {
        self.table.memory_bytes() + self.counts.as_ref().map_or(0, |c| c.memory_bytes())
    }

    #[inline]
    pub fn step(&mut self, op: &Operation) -> OpResult {
        let buckets = self.table.bucket_count();
        let result = match (self.state.mode, &mut self.counts) {
            (Mode::LearnAdapt, Some(counts)) => match *op {
                Operation::Fetch { key } => OpResult::Fetched(counts.fetch_adaptive(&mut self.table, key)),
                Operation::Insert { key, value } => OpResult::Inserted(counts.insert(&mut self.table, key, value)),
                Operation::Delete { key } => OpResult::Deleted(counts.delete(&mut self.table, key)),
            },
            _ => {
                let r = apply_default(&mut self.table, op);
                if self.state.mode == Mode::Sense {
                    if let OpResult::Fetched(f) = r {
                        if f.found {
                            self.acc.record(f.displacement);
                        }
                    }
                }
                r
            }
        };
        if self.table.bucket_count() != buckets {
            self.on_rehash();
        }
        self.ops += 1;
        self.occupancy[self.state.mode.index()] += 1;
        self.state.remaining -= 1;
        if self.state.remaining == 0 {
            self.advance();
        }
        result
    }

    /// Serves `ops` in order and hands each result to `sink`. The effect is
    /// that of calling [`step`](Self::step) on every op, but default-mode
    /// stretches run as a plain table loop with the accounting done once
    /// per stretch.
    pub fn run(&mut self, ops: &[Operation], mut sink: impl FnMut(&OpResult)) {
        let mut rest = ops;
        while let Some(first) = rest.first() {
            if self.state.mode != Mode::Default {
                sink(&self.step(first));
                rest = &rest[1..];
                continue;
            }
            let n = self.state.remaining.min(rest.len() as u64) as usize;
            let (chunk, tail) = rest.split_at(n);
            let mut buckets = self.table.bucket_count();
            for op in chunk {
                sink(&apply_default(&mut self.table, op));
                if !matches!(op, Operation::Fetch { .. }) && self.table.bucket_count() != buckets {
                    buckets = self.table.bucket_count();
                    self.on_rehash();
                }
            }
            self.ops += n as u64;
            self.occupancy[Mode::Default.index()] += n as u64;
            self.state.remaining -= n as u64;
            if self.state.remaining == 0 {
                self.advance();
            }
            rest = tail;
        }
    }

    /// Rescales the learn and default budgets to the current bucket count.
    /// The countdown of the mode in progress is left alone.
    pub fn on_rehash(&mut self) {
        let b = self.table.bucket_count();
        self.learn_budget = self.params.learn_budget(b);
        self.default_span = self.params.default_span(b);
    }

    fn push(&mut self, from: Mode, to: Mode, role: Option<SenseRole>, baseline: Option<SenseStats>, current: Option<SenseStats>) {
        self.events.push(TriggerEvent { op_index: self.ops, from: Some(from), to, role, baseline, current });
    }

    fn enter_learn(&mut self, from: Mode, baseline: Option<SenseStats>, current: Option<SenseStats>) {
        self.counts = Some(RequestCounts::begin_learn(&self.table));
        self.state.mode = Mode::LearnAdapt;
        self.state.remaining = self.learn_budget;
        self.state.pending_sense_role = SenseRole::Baseline;
        self.push(from, Mode::LearnAdapt, Some(SenseRole::Compare), baseline, current);
    }

    fn enter_sense(&mut self, from: Mode) {
        self.acc.reset();
        self.extensions = 0;
        self.state.mode = Mode::Sense;
        self.state.remaining = self.params.sense_span;
        let role = self.state.pending_sense_role;
        self.push(from, Mode::Sense, Some(role), None, None);
    }

    fn enter_default(&mut self, role: SenseRole, baseline: Option<SenseStats>, current: Option<SenseStats>) {
        self.state.mode = Mode::Default;
        self.state.remaining = self.default_span;
        self.push(Mode::Sense, Mode::Default, Some(role), baseline, current);
    }

    fn advance(&mut self) {
        match self.state.mode {
            Mode::LearnAdapt => {
                if let Some(c) = self.counts.take() {
                    c.end_learn(self.reclaim.as_mut());
                }
                self.state.pending_sense_role = SenseRole::Baseline;
                self.enter_sense(Mode::LearnAdapt);
            }
            Mode::Default => self.enter_sense(Mode::Default),
            Mode::Sense => {
                let role = self.state.pending_sense_role;
                match self.acc.finalize() {
                    Err(_) if self.extensions < self.params.max_sense_extensions => {
                        self.extensions += 1;
                        self.state.remaining = self.params.sense_span;
                    }
                    Err(_) => self.enter_default(role, self.state.baseline, None),
                    Ok(current) => self.conclude_sense(current),
                }
            }
        }
    }

    fn conclude_sense(&mut self, current: SenseStats) {
        let role = self.state.pending_sense_role;
        match role {
            SenseRole::Baseline => {
                self.state.baseline = Some(current);
                self.state.pending_sense_role = SenseRole::Compare;
                self.enter_default(role, None, Some(current));
            }
            SenseRole::Compare => {
                let baseline = self.state.baseline.expect("compare window without a baseline");
                if has_distribution_changed(baseline, current) {
                    self.enter_learn(Mode::Sense, Some(baseline), Some(current));
                } else {
                    self.enter_default(role, Some(baseline), Some(current));
                }
            }
        }
    }

    /// Test hook: ends the current sense window with `current` as its
    /// statistics, as if the window had just run out.
    #[doc(hidden)]
    pub fn finish_sense_with(&mut self, current: SenseStats) {
        assert_eq!(self.state.mode, Mode::Sense);
        self.conclude_sense(current);
    }
}
