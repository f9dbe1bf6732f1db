use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use viphash::controller::{apply_default, ControllerParams, Mode, OpResult, TriggerEvent, VipEngine};
use viphash::table::{ChainedTable, TableConfig};
use viphash::workload::{Operation, PopularityModel};

use crate::counter17::Counter17Table;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EngineKind {
    Default,
    Vip,
    VipPreconfigured,
    Counter17,
}

impl EngineKind {
    pub const ALL: [EngineKind; 4] = [EngineKind::Default, EngineKind::Vip, EngineKind::VipPreconfigured, EngineKind::Counter17];

    pub fn name(self) -> &'static str {
        match self {
            EngineKind::Default => "default",
            EngineKind::Vip => "vip",
            EngineKind::VipPreconfigured => "vip-preconfigured",
            EngineKind::Counter17 => "counter17",
        }
    }
}

impl fmt::Display for EngineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EngineKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        EngineKind::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| format!("unknown engine `{s}`"))
    }
}

/// Counters accumulated by one pass over a batch.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct BatchTally {
    pub fetches: u64,
    pub total_displacement: u64,
    pub misses: u64,
}

impl BatchTally {
    #[inline]
    fn record(&mut self, r: &OpResult) {
        if let OpResult::Fetched(f) = r {
            self.fetches += 1;
            self.total_displacement += f.displacement as u64;
            self.misses += !f.found as u64;
        }
    }
}

/// Something that serves operations.
pub trait Engine {
    fn step(&mut self, op: &Operation) -> OpResult;

    /// Operations served per mode, indexed by [`Mode::index`].
    fn occupancy(&self) -> [u64; 3];

    fn events(&self) -> &[TriggerEvent] {
        &[]
    }

    fn run(&mut self, ops: &[Operation]) -> BatchTally {
        let mut t = BatchTally::default();
        for op in ops {
            t.record(&self.step(op));
        }
        t
    }
}

/// A plain table. Everything it serves counts as default mode.
pub struct DefaultEngine {
    pub table: ChainedTable,
    ops: u64,
}

impl DefaultEngine {
    pub fn new(table: ChainedTable) -> Self {
        Self { table, ops: 0 }
    }
}

impl Engine for DefaultEngine {
    #[inline]
    fn step(&mut self, op: &Operation) -> OpResult {
        self.ops += 1;
        apply_default(&mut self.table, op)
    }

    fn occupancy(&self) -> [u64; 3] {
        [0, 0, self.ops]
    }

    fn run(&mut self, ops: &[Operation]) -> BatchTally {
        let mut t = BatchTally::default();
        for op in ops {
            t.record(&apply_default(&mut self.table, op));
        }
        self.ops += ops.len() as u64;
        t
    }
}

impl Engine for VipEngine {
    #[inline]
    fn step(&mut self, op: &Operation) -> OpResult {
        VipEngine::step(self, op)
    }

    fn occupancy(&self) -> [u64; 3] {
        VipEngine::occupancy(self)
    }

    fn events(&self) -> &[TriggerEvent] {
        VipEngine::events(self)
    }

    fn run(&mut self, ops: &[Operation]) -> BatchTally {
        let mut t = BatchTally::default();
        VipEngine::run(self, ops, |r| t.record(r));
        t
    }
}

pub struct Counter17Engine {
    pub table: Counter17Table,
    ops: u64,
}

impl Engine for Counter17Engine {
    #[inline]
    fn step(&mut self, op: &Operation) -> OpResult {
        self.ops += 1;
        self.table.apply(op)
    }

    fn occupancy(&self) -> [u64; 3] {
        [0, 0, self.ops]
    }

    fn run(&mut self, ops: &[Operation]) -> BatchTally {
        let mut t = BatchTally::default();
        for op in ops {
            t.record(&self.table.apply(op));
        }
        self.ops += ops.len() as u64;
        t
    }
}

/// One of the concrete engines, dispatched once per batch.
pub enum AnyEngine {
    Default(DefaultEngine),
    Vip(Box<VipEngine>),
    Counter17(Counter17Engine),
}

impl AnyEngine {
    pub fn run(&mut self, ops: &[Operation]) -> BatchTally {
        match self {
            AnyEngine::Default(e) => e.run(ops),
            AnyEngine::Vip(e) => Engine::run(e.as_mut(), ops),
            AnyEngine::Counter17(e) => e.run(ops),
        }
    }

    pub fn step(&mut self, op: &Operation) -> OpResult {
        match self {
            AnyEngine::Default(e) => e.step(op),
            AnyEngine::Vip(e) => VipEngine::step(e, op),
            AnyEngine::Counter17(e) => e.step(op),
        }
    }

    pub fn occupancy(&self) -> [u64; 3] {
        match self {
            AnyEngine::Default(e) => e.occupancy(),
            AnyEngine::Vip(e) => e.occupancy(),
            AnyEngine::Counter17(e) => e.occupancy(),
        }
    }

    pub fn events(&self) -> &[TriggerEvent] {
        match self {
            AnyEngine::Vip(e) => e.events(),
            _ => &[],
        }
    }

    pub fn table(&self) -> Option<&ChainedTable> {
        match self {
            AnyEngine::Default(e) => Some(&e.table),
            AnyEngine::Vip(e) => Some(e.table()),
            AnyEngine::Counter17(_) => None,
        }
    }

    pub fn mode(&self) -> Mode {
        match self {
            AnyEngine::Vip(e) => e.mode(),
            _ => Mode::Default,
        }
    }
}

/// Fills `table` from `preload` in order.
pub fn populate(table: &mut ChainedTable, preload: &[(u64, u64)]) {
    for &(k, v) in preload {
        table.insert(k, v);
    }
}

/// Inserts the model's keys from least to most popular, so front insertion
/// leaves every chain in descending popularity. Values come from `preload`.
pub fn build_vip_preconfigured(model: &PopularityModel, preload: &[(u64, u64)], table: &mut ChainedTable) {
    assert!(table.is_empty(), "the table must start empty");
    let values: HashMap<u64, u64> = preload.iter().copied().collect();
    for key in model.keys_by_rank().into_iter().rev() {
        let value = *values.get(&key).expect("ranked key missing from preload");
        table.insert(key, value);
    }
}

pub fn build_engine(
    kind: EngineKind,
    config: TableConfig,
    preload: &[(u64, u64)],
    model: &PopularityModel,
    params: ControllerParams,
) -> AnyEngine {
    match kind {
        EngineKind::Default => {
            let mut t = ChainedTable::with_capacity(config, preload.len());
            populate(&mut t, preload);
            AnyEngine::Default(DefaultEngine::new(t))
        }
        EngineKind::VipPreconfigured => {
            let mut t = ChainedTable::with_capacity(config, preload.len());
            build_vip_preconfigured(model, preload, &mut t);
            AnyEngine::Default(DefaultEngine::new(t))
        }
        EngineKind::Vip => {
            let mut t = ChainedTable::with_capacity(config, preload.len());
            populate(&mut t, preload);
            AnyEngine::Vip(Box::new(VipEngine::from_table(t, params)))
        }
        EngineKind::Counter17 => {
            let mut t = Counter17Table::with_capacity(config, preload.len());
            for &(k, v) in preload {
                t.insert(k, v);
            }
            AnyEngine::Counter17(Counter17Engine { table: t, ops: 0 })
        }
    }
}
