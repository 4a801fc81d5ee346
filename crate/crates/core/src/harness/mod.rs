//! Experiment orchestration: configuration, metrics, sweeps and reports.

pub mod config;
pub mod metrics;
pub mod report;
pub mod sweep;

pub use config::{MobilityParams, PowerModel, SimConfig};
pub use metrics::{ho_window_metrics, network_ee, HoWindow, UserHo, WindowSummary};
pub use report::{build_report, gain_pct, render_text, Report};
pub use sweep::{
    build_deployment, build_world, read_metrics, run_sweep, run_sweep_to, train_world, write_metrics, GridPoint,
    MetricsRow, ModelCache, SweepOutput, World,
};
