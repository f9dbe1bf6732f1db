//! Experiment harness for the viphash table: engines, batch runner, named
//! experiments and report writers. The `vipbench` binary is a thin CLI over
//! this crate.

pub mod counter17;
pub mod engine;
pub mod experiment;
pub mod metrics;

pub use engine::{build_engine, build_vip_preconfigured, AnyEngine, Engine, EngineKind};
pub use experiment::{run_experiment, run_seed, ExperimentName, ExperimentReport, ExperimentSpec, Scale, TrialResult};
pub use metrics::{BatchMetrics, JsonReport, SummaryRow};
