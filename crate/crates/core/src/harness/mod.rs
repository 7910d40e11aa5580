//! Scenario-driven experiments: configuration, execution, CSV output and
//! architecture comparison.

mod compare;
mod config;
mod run;

pub use compare::{
    compare_architectures, compare_estimates, OrderingReport, PointReport, RankEntry, Relation,
    RelationCheck, Status, SIGNIFICANCE,
};
pub use config::{
    override_key, Architecture, BeamChoice, BeamphaseBlock, BudgetBlock, FittingBlock, GeometryBlock,
    LearningBlock, McBlock, Placement, RandomPsBlock, Scenario, ScenarioConfig, SecrecyBlock,
    SnrReference,
};
pub use run::{
    evaluate, frozen_placement, realizations, run_scenario, simulate, sweep_csv, ArchitectureFit,
    GainSamples, SweepResult, SweepRow, CSV_HEADER,
};
