//! Config-driven experiment orchestration and report emission.

pub mod config;
pub mod report;
pub mod runner;

pub use config::{
    DataConfig, ExperimentConfig, ObjectivePick, OutputConfig, RandomParams, SaParams,
    SplitConfig, StabilityConfig, StrategyConfig, WeighterConfig,
};
pub use report::emit_reports;
pub use runner::{
    run_experiment, run_selection, run_stability_stage, run_with_prices, CellResult,
    RankedPortfolio, RunArtifacts, SelectionStage, StabilityOutcome, StabilityStage,
    StrategySubsets,
};
