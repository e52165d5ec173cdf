//! Scenario configuration, inputs, the simulation loop and its artifacts.

pub mod artifacts;
pub mod config;
pub mod engine;
pub mod ingest;
pub mod population;

pub use artifacts::{detect_alternations, is_congested, Manifest, RunArtifacts, Summary};
pub use config::{load_config, ConfigError, ConfigIssue, ScenarioConfig};
pub use engine::{run, RunInputs, ScenarioError, Signal};
pub use ingest::{ingest_series, parse_series, IngestError};
