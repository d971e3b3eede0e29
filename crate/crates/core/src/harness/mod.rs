//! Experiment plumbing: configuration, file formats, metrics and runners.

pub mod config;
pub mod io;
pub mod metrics;
pub mod runner;

pub use config::{RunConfig, SamplerChoice};
pub use io::{read_scenario, read_track_set, write_scenario, write_track_set, ScenarioFile};
pub use metrics::{association_metrics, AssociationMetrics};
pub use runner::{smooth, sweep, Inference, SamplerKind, SmoothReport, SmoothSummary};
