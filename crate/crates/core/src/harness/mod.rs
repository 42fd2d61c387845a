//! Experiment driver behind the command-line tool.

pub mod config;
pub mod experiment;
pub mod plot;

pub use config::{OracleConfig, RunConfig};
pub use experiment::{
    read_summary, read_trace, run_experiment, run_single, summarize, trace_file_name, write_trace,
    AlgorithmSummary, ExperimentOptions, ExperimentReport, RunTrace, TraceRecord, TRACE_HEADER,
};
pub use plot::{band_curves, emit_plot, render_svg, BandCurve};
