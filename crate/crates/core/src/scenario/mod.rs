//! Scenario files, runs, metrics and reports.

pub mod config;
pub mod metrics;
pub mod run;

pub use config::{parse_scenario, parse_scenario_str, ConfigError, Mode, Profile, ScenarioConfig};
pub use metrics::{compute_metrics, final_taus, MetricsReport, SeriesRow};
pub use run::{
    emit_report, replay_log, run, series_csv, summary_csv, write_outputs, RunError, RunOutput,
};
