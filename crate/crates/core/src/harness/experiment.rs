//! Multi-seed experiment runner: traces, summary table, plot.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::plot::emit_plot;
use crate::benchmarks::{
    ground_truth_oracle, load_benchmark, make_sources, BenchmarkSpec, OracleResult, OracleSettings,
};
use crate::error::{Error, Result};
use crate::optimizer::{run, Algorithm, BudgetLedger, Evaluator, LedgerRow, LoopConfig};
use crate::Objective;

pub const TRACE_HEADER: &str = "step,action,source,set,values,step_cost,total_cost,running_optimum";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const PLOT_FILE: &str = "optima_vs_cost.svg";
pub const ORACLE_FILE: &str = "oracle.json";

/// One CSV trace line. Multi-source rows join per-source fields with `;`,
/// and variables or values within one source with `|`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub step: usize,
    pub action: String,
    pub source: String,
    pub set: String,
    pub values: String,
    pub step_cost: f64,
    pub total_cost: f64,
    pub running_optimum: Option<f64>,
}

impl From<&LedgerRow> for TraceRecord {
    fn from(row: &LedgerRow) -> Self {
        let join = |f: &dyn Fn(&crate::optimizer::RowEntry) -> String| {
            row.entries.iter().map(f).collect::<Vec<_>>().join(";")
        };
        TraceRecord {
            step: row.step,
            action: row.action.to_string(),
            source: join(&|e| e.source.to_string()),
            set: join(&|e| e.variables.join("|")),
            values: join(&|e| {
                e.values
                    .iter()
                    .map(|v| v.to_string())
                    .collect::<Vec<_>>()
                    .join("|")
            }),
            step_cost: row.step_cost,
            total_cost: row.total_cost,
            running_optimum: row.running_optimum,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    pub algorithm: Algorithm,
    pub seed: u64,
    pub rows: Vec<TraceRecord>,
}

impl RunTrace {
    pub fn final_optimum(&self) -> Option<f64> {
        self.rows.last().and_then(|r| r.running_optimum)
    }

    pub fn total_cost(&self) -> f64 {
        self.rows.last().map_or(0.0, |r| r.total_cost)
    }

    pub fn intervention_costs(&self) -> impl Iterator<Item = f64> + '_ {
        self.rows
            .iter()
            .filter(|r| r.action == "intervene")
            .map(|r| r.step_cost)
    }

    /// Cost at the first row whose running optimum is within `tau` of
    /// `oracle` or better.
    pub fn cost_to_reach(&self, oracle: f64, tau: f64, objective: Objective) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| {
                r.running_optimum
                    .is_some_and(|v| objective.sign() * (v - oracle) >= -tau)
            })
            .map(|r| r.total_cost)
    }
}

pub fn trace_file_name(algorithm: Algorithm, seed: u64) -> String {
    format!("trace_{algorithm}_{seed}.csv")
}

/// Write via a temporary file and rename, so a trace file either exists
/// complete or not at all.
pub fn write_trace(path: &Path, rows: &[TraceRecord]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(Vec::new());
    w.write_record(TRACE_HEADER.split(','))?;
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::io(path, e.into_error()))?;
    atomic_write(path, &bytes)
}

pub fn read_trace(path: &Path) -> Result<Vec<TraceRecord>> {
    let text = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut r = csv::Reader::from_reader(text.as_slice());
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header.join(",") != TRACE_HEADER {
        return Err(Error::InvalidConfig(format!(
            "{} does not have the trace header",
            path.display()
        )));
    }
    Ok(r.deserialize()
        .collect::<std::result::Result<Vec<TraceRecord>, _>>()?)
}

pub(crate) fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("partial");
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmSummary {
    pub algorithm: Algorithm,
    pub runs: usize,
    pub median_final: Option<f64>,
    pub q1_final: Option<f64>,
    pub q3_final: Option<f64>,
    pub iqr_final: Option<f64>,
    pub oracle: f64,
    pub tau: f64,
    /// Runs whose running optimum came within `tau` of the oracle.
    pub reached: usize,
    pub median_cost_to_tau: Option<f64>,
    /// Mean cost of one intervene row.
    pub cost_per_intervention: Option<f64>,
    pub median_total_cost: f64,
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let h = (sorted.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let (lo, hi) = (h.floor() as usize, h.ceil() as usize);
    Some(sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo]))
}

fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v
}

pub fn summarize(
    traces: &[RunTrace],
    oracle: f64,
    tau: f64,
    objective: Objective,
) -> Vec<AlgorithmSummary> {
    let mut by_alg: BTreeMap<Algorithm, Vec<&RunTrace>> = BTreeMap::new();
    for t in traces {
        by_alg.entry(t.algorithm).or_default().push(t);
    }
    by_alg
        .into_iter()
        .map(|(algorithm, ts)| {
            let finals = sorted(ts.iter().filter_map(|t| t.final_optimum()).collect());
            let reach = sorted(
                ts.iter()
                    .filter_map(|t| t.cost_to_reach(oracle, tau, objective))
                    .collect(),
            );
            let icosts: Vec<f64> = ts.iter().flat_map(|t| t.intervention_costs()).collect();
            let (q1, q3) = (quantile(&finals, 0.25), quantile(&finals, 0.75));
            AlgorithmSummary {
                algorithm,
                runs: ts.len(),
                median_final: quantile(&finals, 0.5),
                q1_final: q1,
                q3_final: q3,
                iqr_final: q1.zip(q3).map(|(a, b)| b - a),
                oracle,
                tau,
                reached: reach.len(),
                median_cost_to_tau: quantile(&reach, 0.5),
                cost_per_intervention: (!icosts.is_empty())
                    .then(|| icosts.iter().sum::<f64>() / icosts.len() as f64),
                median_total_cost: quantile(
                    &sorted(ts.iter().map(|t| t.total_cost()).collect()),
                    0.5,
                )
                .unwrap_or(0.0),
            }
        })
        .collect()
}

pub fn write_summary(path: &Path, rows: &[AlgorithmSummary]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::io(path, e.into_error()))?;
    atomic_write(path, &bytes)
}

pub fn read_summary(path: &Path) -> Result<Vec<AlgorithmSummary>> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize()
        .collect::<std::result::Result<Vec<_>, _>>()?)
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ExperimentOptions {
    /// Concurrent (algorithm, seed) runs; `None` uses every CPU.
    pub jobs: Option<usize>,
    /// Reuse trace files already present in the output directory.
    pub resume: bool,
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub benchmark: String,
    pub objective: Objective,
    pub oracle: OracleResult,
    pub traces: Vec<RunTrace>,
    pub summaries: Vec<AlgorithmSummary>,
    pub trace_paths: Vec<PathBuf>,
    pub summary_path: PathBuf,
    pub plot_path: PathBuf,
    /// Runs loaded from existing trace files instead of executed.
    pub resumed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct OracleCache {
    benchmark: String,
    grid_density: usize,
    samples: usize,
    value: f64,
    assignment: BTreeMap<String, f64>,
}

/// Oracle for `spec` at the configured resolution, cached as JSON in `dir`.
pub fn cached_oracle(spec: &BenchmarkSpec, config: &RunConfig, dir: &Path) -> Result<OracleResult> {
    let density = config.oracle.density_for(spec.pomis()?.len());
    let path = dir.join(ORACLE_FILE);
    if let Ok(text) = fs::read_to_string(&path) {
        if let Ok(c) = serde_json::from_str::<OracleCache>(&text) {
            if c.benchmark == spec.name
                && c.grid_density == density
                && c.samples == config.oracle.samples
            {
                return Ok(OracleResult {
                    value: c.value,
                    assignment: c.assignment,
                });
            }
        }
    }
    let r = ground_truth_oracle(
        spec,
        &OracleSettings {
            grid_density: density,
            samples: config.oracle.samples,
            seed: 0,
        },
    )?;
    let cache = OracleCache {
        benchmark: spec.name.clone(),
        grid_density: density,
        samples: config.oracle.samples,
        value: r.value,
        assignment: r.assignment.clone(),
    };
    atomic_write(&path, serde_json::to_string_pretty(&cache)?.as_bytes())?;
    Ok(r)
}

/// Run one (algorithm, seed) pair and return its trace rows.
pub fn run_single(
    spec: &BenchmarkSpec,
    config: &RunConfig,
    algorithm: Algorithm,
    seed: u64,
) -> Result<Vec<TraceRecord>> {
    let base = spec.runnable_scm()?;
    let sources = make_sources(spec, config.sources, &config.scenario, seed)?;
    let ledger = BudgetLedger::new(
        config.intervention_cost,
        config.observation_cost,
        config.budget,
    )?;
    let loop_config = LoopConfig {
        ckg: config.ckg.clone(),
        evaluator: Some(Evaluator::new(base, config.eval_samples, 0)),
        eval_samples: config.eval_samples,
        ..LoopConfig::default()
    };
    let mut rows = Vec::new();
    run(
        algorithm,
        sources,
        spec.objective,
        ledger,
        config.policy(),
        seed,
        &loop_config,
        &mut |r| rows.push(TraceRecord::from(r)),
    )?;
    Ok(rows)
}

pub fn run_experiment(config: &RunConfig, options: &ExperimentOptions) -> Result<ExperimentReport> {
    config.validate()?;
    let spec = load_benchmark(&config.benchmark)?;
    spec.runnable_scm()?;
    let dir = &config.output_dir;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let oracle = cached_oracle(&spec, config, dir)?;

    let jobs: Vec<(Algorithm, u64)> = config
        .algorithms
        .iter()
        .flat_map(|&a| config.seeds.iter().map(move |&s| (a, s)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(options.jobs.unwrap_or(0))
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    let outcomes: Vec<(Algorithm, u64, PathBuf, Result<(Vec<TraceRecord>, bool)>)> =
        pool.install(|| {
            jobs.par_iter()
                .map(|&(alg, seed)| {
                    let path = dir.join(trace_file_name(alg, seed));
                    let out = if options.resume && path.exists() {
                        read_trace(&path).map(|rows| (rows, true))
                    } else {
                        run_single(&spec, config, alg, seed)
                            .and_then(|rows| write_trace(&path, &rows).map(|_| (rows, false)))
                    };
                    (alg, seed, path, out)
                })
                .collect()
        });

    let total = outcomes.len();
    let mut failures = Vec::new();
    let mut traces = Vec::new();
    let mut trace_paths = Vec::new();
    let mut resumed = 0;
    for (algorithm, seed, path, out) in outcomes {
        match out {
            Ok((rows, was_resumed)) => {
                resumed += usize::from(was_resumed);
                traces.push(RunTrace {
                    algorithm,
                    seed,
                    rows,
                });
                trace_paths.push(path);
            }
            Err(e) => failures.push(format!("{algorithm} seed {seed}: {e}")),
        }
    }
    if !failures.is_empty() {
        return Err(Error::RunsFailed {
            failed: failures.len(),
            total,
            details: failures.join("; "),
        });
    }

    let summaries = summarize(&traces, oracle.value, config.tau, spec.objective);
    let summary_path = dir.join(SUMMARY_FILE);
    write_summary(&summary_path, &summaries)?;
    let plot_path = dir.join(PLOT_FILE);
    emit_plot(&traces, oracle.value, &plot_path)?;
    Ok(ExperimentReport {
        benchmark: spec.name.clone(),
        objective: spec.objective,
        oracle,
        traces,
        summaries,
        trace_paths,
        summary_path,
        plot_path,
        resumed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(step: usize, action: &str, cost: f64, total: f64, v: Option<f64>) -> TraceRecord {
        TraceRecord {
            step,
            action: action.into(),
            source: "0".into(),
            set: "Z".into(),
            values: String::new(),
            step_cost: cost,
            total_cost: total,
            running_optimum: v,
        }
    }

    #[test]
    fn trace_csv_round_trips_with_stable_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let rows = vec![
            rec(0, "observe", 1.0, 1.0, None),
            TraceRecord {
                values: "-3.1999999999999997".into(),
                ..rec(1, "intervene", 20.0, 21.0, Some(-2.171_717_171_717_17))
            },
        ];
        write_trace(&path, &rows).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().next().unwrap(), TRACE_HEADER);
        assert_eq!(text.lines().nth(1).unwrap(), "0,observe,0,Z,,1.0,1.0,");
        assert_eq!(read_trace(&path).unwrap(), rows);
    }

    #[test]
    fn quantiles_interpolate() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile(&v, 0.5), Some(2.5));
        assert_eq!(quantile(&v, 0.25), Some(1.75));
        assert_eq!(quantile(&[7.0], 0.75), Some(7.0));
        assert_eq!(quantile(&[], 0.5), None);
    }

    #[test]
    fn summary_reads_traces() {
        let t = |seed, v: f64| RunTrace {
            algorithm: Algorithm::Mscbo,
            seed,
            rows: vec![
                rec(0, "observe", 1.0, 1.0, None),
                rec(1, "intervene", 20.0, 21.0, Some(v + 1.0)),
                rec(2, "intervene", 20.0, 41.0, Some(v)),
            ],
        };
        let s = summarize(
            &[t(0, -2.0), t(1, -2.1), t(2, -1.0)],
            -2.17,
            0.2,
            Objective::Min,
        );
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].median_final, Some(-2.0));
        assert_eq!(s[0].reached, 2);
        assert_eq!(s[0].median_cost_to_tau, Some(41.0));
        assert_eq!(s[0].cost_per_intervention, Some(20.0));
    }
}
