//! Scenario configs, the bundled scenarios, reports and convergence sweeps.

pub mod config;
pub mod report;
pub mod runner;
pub mod sweep;

pub use config::{
    DriverCheckConfig, DriverSpec, FieldPreset, ManifoldSpec, OutputFormat, OutputSpec,
    ScenarioConfig, ScenarioName, SweepParameter, SweepSpec,
};
pub use report::{write_outputs, Artifact, ArtifactData, Check, Relation, RunReport, Table};
pub use runner::{run_scenario, Outcome};
pub use sweep::{convergence_sweep, SweepReport, SweepRow};
