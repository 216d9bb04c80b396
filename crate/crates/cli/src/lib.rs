//! Config-driven experiment harness for structured matrix recovery: ground
//! truths, recovery sweeps, geometry reports, bound verification, and
//! constant calibration.

pub mod config;
pub mod io;
pub mod runner;

pub use config::{ExperimentConfig, LambdaRule, NormDescriptor, Shape, Spectrum, SpectrumScale};
pub use runner::{
    log_log_slope, make_ground_truth, median, read_records, read_reports, run_calibration,
    run_sweep, verify_bounds, write_sweep_output, BoundSummary, SweepOutput, TrialRecord,
};
