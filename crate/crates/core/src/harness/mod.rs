//! Experiment harness: scenario presets, the run loop, metrics and output.

pub mod metrics;
pub mod output;
pub mod runner;
pub mod scenario;

pub use metrics::{convergence_series, HeatmapRecord, InferenceRecord, MetricsRecord};
pub use output::{emit_csv, replay, EmitOptions, Manifest};
pub use runner::{assign_roles, run_scenario, RunOutput, Simulation};
pub use scenario::{
    AttackKind, Budgets, InferenceTargets, ParamOverrides, Scale, ScenarioConfig, ScenarioOptions,
    Variant,
};
