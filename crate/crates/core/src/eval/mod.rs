//! Displacement metrics, horizon reports, case plots and the τ sweep.

mod metrics;
mod plot;
mod report;
mod sweep;

pub use metrics::{ade_fde, ade_fde_over, displacement, rmse_at, trajectory_ade_fde, Aggregation};
pub use plot::{emit_case_plot, plot_data, render_svg, PlotData, PLOT_LANE_WIDTH};
pub use report::{
    horizon_report, report_from, run_predictions, HorizonReport, HorizonRow, ReportMetadata, ScoredSet, HORIZONS,
};
pub use sweep::{sweep_table, tau_sweep, SweepRow, DEFAULT_TAUS};
