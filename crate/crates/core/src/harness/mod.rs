//! Experiment runner: TOML configs, calibrated detection experiments on
//! seeded parallel streams, threshold sweeps and report files.
//!
//! Trial `i` of arm `a` uses seed `mix(master, stream_key(a, i))`, so the
//! report does not depend on the thread count.

mod config;
mod experiment;
mod report;
mod sweep;

pub use config::{
    Calibration, CutsSpec, DetectorSpec, DomainSpec, EngineChoice, ExperimentConfig, FlowChoice, OutputSpec, PathSpec,
    StopSpec, WalkChoice,
};
pub use experiment::{
    run_detection_experiment, trial_seed, ArmCounts, DetectionReport, CALIBRATION_ARM, NULL_ARM,
    PATH_CALIBRATION_ARM, PERTURBED_ARM,
};
pub use report::{emit_report, read_report_json, read_summary_csv, render_report, Report, ReportFormat, SummaryRow};
pub use sweep::{
    interpolate_nu, intersection_dimension_sweep, run_threshold_sweep, tree_branching, DimensionTail, SweepRow,
    SweepSpec, SweepTable,
};
