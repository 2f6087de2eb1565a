//! Seeded experiments, statistics and report emission.

pub mod config;
pub mod experiments;
pub mod reports;
pub mod stats;

pub use config::{
    read_sample_csv, write_sample_csv, AuditMode, ClassKind, ClassSpec, ExperimentConfig,
    ExperimentKind, MarginalSpec, ReportFormat,
};
pub use experiments::{
    g_params, run_dp_audit, run_draws_experiment, run_e2e_experiment, run_mistake_experiment,
    run_stability_experiment,
};
pub use reports::{emit_report, emit_report_named, read_report, Check, Report};
