// A small multi-seed experiment: trace CSVs, summary table and SVG plot.
//
// `cargo run --release --example experiment_report [output-dir]`

use std::path::PathBuf;

use mscbo::harness::{run_experiment, ExperimentOptions, ExperimentReport, RunConfig};

pub fn run_example_in(dir: PathBuf) -> mscbo::Result<ExperimentReport> {
    let config = RunConfig {
        benchmark: "crop".into(),
        seeds: vec![0, 1, 2],
        budget: 300.0,
        output_dir: dir,
        ..RunConfig::default()
    };
    let report = run_experiment(&config, &ExperimentOptions::default())?;
    println!(
        "oracle {:.4} at {:?}",
        report.oracle.value, report.oracle.assignment
    );
    for s in &report.summaries {
        println!(
            "{:<6} median {:?}  iqr {:?}  cost/intervention {:?}",
            s.algorithm.as_str(),
            s.median_final,
            s.iqr_final,
            s.cost_per_intervention
        );
    }
    println!(
        "wrote {} traces, {} and {}",
        report.trace_paths.len(),
        report.summary_path.display(),
        report.plot_path.display()
    );
    Ok(report)
}

#[allow(dead_code)]
fn main() -> mscbo::Result<()> {
    let dir = std::env::args()
        .nth(1)
        .map_or_else(|| std::env::temp_dir().join("mscbo_report"), PathBuf::from);
    run_example_in(dir).map(|_| ())
}
