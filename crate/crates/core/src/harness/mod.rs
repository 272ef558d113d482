//! Experiment harness: capture simulation, frame detection, sweeps and
//! their CSV, report and plot outputs.

mod capture;
mod config;
mod detect;
mod pipeline;
mod plot;
mod sweep;

pub use capture::{read_capture, write_capture, CAPTURE_MAGIC, CAPTURE_VERSION};
pub use config::{ExperimentConfig, SweepAxis, SweepGrid, CONFIG_SCHEMA_VERSION};
pub use detect::{frame_detect, DETECTION_THRESHOLD};
pub use pipeline::{channel, propagate, receive, simulate_capture, transmitted_frame, TrialSetup};
pub use plot::{plot_ber, plot_csv, plot_sweep};
pub use sweep::{
    ber_trial, max_abs_error_by_point, read_ber_csv, read_report, read_sweep_csv, run_ber_sweep,
    run_estimation_sweep, run_trial, write_csv, write_report, BerRow, SweepRow,
};
