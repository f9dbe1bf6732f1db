//! Chained hash table that learns key popularity online and keeps its
//! bucket chains close to popularity order, with a seeded skewed-workload
//! generator and a PK-FK hash join built on top.

pub mod adapt;
pub mod controller;
pub mod hash;
pub mod join;
pub mod sense;
pub mod table;
pub mod workload;

pub use adapt::{NoopReclaim, ReclaimHook, RequestCounts};
pub use controller::{apply_default, overhead_cap, ControllerParams, Mode, ModeState, OpResult, SenseRole, TriggerEvent, VipEngine};
pub use sense::{has_distribution_changed, SenseAccumulator, SenseError, SenseStats};
pub use table::{ChainedTable, FetchResult, RehashDirection, TableConfig};
pub use workload::{Operation, Workload, WorkloadConfig, WorkloadError};
