//! Cohort aggregation, CSV/JSON export, and overlay rendering.

mod export;
mod overlay;
mod stats;

pub use export::{
    export_curve_csv, export_stats_csv, export_stats_json, export_traces_csv, format_sig6,
};
pub use overlay::{rank_alpha, render_overlay, ALPHA_FIRST, ALPHA_LAST, TINT};
pub use stats::{aggregate, CohortStats, CurvePoint, Summary, TraceRecord};
