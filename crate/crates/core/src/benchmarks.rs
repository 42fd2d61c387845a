//! Bundled benchmark networks.
//!
//! | name          | output | objective | exploration          | runnable |
//! |---------------|--------|-----------|----------------------|----------|
//! | `psa`         | psa    | min       | aspirin, statin      | yes      |
//! | `crop`        | Y      | min       | X, Z                 | yes      |
//! | `mab`         | Y      | max       | S, W, T, Z, X        | yes      |
//! | `ecoli_graph` | b1583  | none      | nine ancestor genes  | no       |
//!
//! Interventional domains are defaults that contain the known optima; they
//! are stored in the files alongside the equations.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::{select_pomis, ExplorationSet, Pomis, SourceId};
use crate::optimizer::Source;
use crate::rng::{mix_seed, RngState};
use crate::scm::file::{KnownOptimum, ScmFile};
use crate::scm::scenario::{apply_scenario, ScenarioSpec};
use crate::scm::{Dag, Scm};
use crate::Objective;

const FILES: [(&str, &str); 4] = [
    ("psa", include_str!("../benchmarks/psa.json")),
    ("crop", include_str!("../benchmarks/crop.json")),
    ("mab", include_str!("../benchmarks/mab.json")),
    (
        "ecoli_graph",
        include_str!("../benchmarks/ecoli_graph.json"),
    ),
];

pub fn names() -> impl Iterator<Item = &'static str> {
    FILES.iter().map(|(n, _)| *n)
}

/// Raw JSON of a bundled benchmark.
pub fn source_text(name: &str) -> Result<&'static str> {
    FILES
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, t)| *t)
        .ok_or_else(|| Error::UnknownBenchmark(name.to_string()))
}

#[derive(Debug, Clone)]
pub struct BenchmarkSpec {
    pub name: String,
    pub dag: Dag,
    /// `None` for graph-only fixtures.
    pub scm: Option<Scm>,
    pub exploration: ExplorationSet,
    pub objective: Objective,
    pub known_optimum: Option<KnownOptimum>,
    pub default_domains: BTreeMap<String, (f64, f64)>,
    pub notes: Vec<String>,
}

impl BenchmarkSpec {
    pub fn from_file(name: &str, file: &ScmFile) -> Result<BenchmarkSpec> {
        let dag = file.dag()?;
        let scm = if file.is_runnable() {
            Some(file.scm()?)
        } else {
            None
        };
        let vars: Vec<String> = match &file.exploration {
            Some(v) => v.clone(),
            None => file.intervenable.iter().cloned().collect(),
        };
        let exploration = ExplorationSet::new(&dag, vars, SourceId(0))?;
        Ok(BenchmarkSpec {
            name: file.name.clone().unwrap_or_else(|| name.to_string()),
            dag,
            scm,
            exploration,
            objective: file.objective.unwrap_or(Objective::Max),
            known_optimum: file.known_optimum.clone(),
            default_domains: file.domains.clone(),
            notes: file.notes.clone(),
        })
    }

    pub fn is_runnable(&self) -> bool {
        self.scm.is_some()
    }

    pub fn runnable_scm(&self) -> Result<&Scm> {
        self.scm
            .as_ref()
            .ok_or_else(|| Error::NonRunnable(self.name.clone()))
    }

    pub fn pomis(&self) -> Result<Pomis> {
        select_pomis(&self.dag, &self.exploration)
    }
}

pub fn load_benchmark(name: &str) -> Result<BenchmarkSpec> {
    let file = ScmFile::from_json(source_text(name)?)?;
    BenchmarkSpec::from_file(name, &file)
}

/// `m` sources, each the benchmark SCM with the scenario applied under its
/// own mutation seed. Query costs are uniform (1).
///
/// Exploration sets shrink to whatever survives the mutation.
pub fn make_sources(
    spec: &BenchmarkSpec,
    m: usize,
    scenario: &ScenarioSpec,
    seed: u64,
) -> Result<Vec<Source>> {
    if m == 0 {
        return Err(Error::InvalidConfig(
            "at least one source is required".into(),
        ));
    }
    let base = spec.runnable_scm()?;
    (0..m)
        .map(|i| {
            let mutation = ScenarioSpec {
                mutation_seed: mix_seed(scenario.mutation_seed, &[i as u64]),
                ..scenario.clone()
            };
            let scm =
                apply_scenario(base, &mutation)?.with_seed(mix_seed(seed, &[0x5005, i as u64]));
            let vars: Vec<&str> = spec
                .exploration
                .variables()
                .iter()
                .map(String::as_str)
                .filter(|v| {
                    scm.dag()
                        .id(v)
                        .is_ok_and(|id| scm.dag().is_intervenable(id))
                })
                .collect();
            let mut source = Source::new(SourceId(i), scm, &vars)?;
            for (k, v) in &spec.default_domains {
                source.interventional_domain.entry(k.clone()).or_insert(*v);
            }
            Ok(source)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleSettings {
    /// Points per POMIS dimension.
    pub grid_density: usize,
    /// Monte-Carlo samples per grid point.
    pub samples: usize,
    pub seed: u64,
}

impl Default for OracleSettings {
    fn default() -> Self {
        OracleSettings {
            grid_density: 21,
            samples: 100_000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub value: f64,
    pub assignment: BTreeMap<String, f64>,
}

/// Brute-force grid search of the interventional mean over the POMIS domain,
/// output noise off, with one shared sample stream for every grid point.
pub fn ground_truth_oracle(
    spec: &BenchmarkSpec,
    settings: &OracleSettings,
) -> Result<OracleResult> {
    let scm = spec.runnable_scm()?.without_output_noise();
    let pomis = spec.pomis()?;
    let density = settings.grid_density.max(2);
    let mut axes = Vec::with_capacity(pomis.len());
    for v in &pomis.variables {
        let (lo, hi) = scm
            .dag()
            .id(v)
            .ok()
            .and_then(|id| scm.domain(id))
            .or_else(|| spec.default_domains.get(v).copied())
            .ok_or_else(|| Error::EmptyDomain(v.clone()))?;
        let ids = scm.dag().id(v)?;
        axes.push((
            ids,
            (0..density)
                .map(|i| lo + (hi - lo) * i as f64 / (density - 1) as f64)
                .collect::<Vec<_>>(),
        ));
    }
    let total = density.pow(axes.len() as u32);
    let points: Vec<Vec<(usize, f64)>> = (0..total)
        .map(|mut k| {
            axes.iter()
                .map(|(id, vals)| {
                    let x = vals[k % density];
                    k /= density;
                    (*id, x)
                })
                .collect()
        })
        .collect();
    let values = points
        .par_iter()
        .map(|a| {
            scm.interventional_mean(
                a,
                settings.samples.max(1),
                &mut RngState::new(settings.seed),
            )
        })
        .collect::<Result<Vec<f64>>>()?;
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if spec.objective.better(*v, values[best]) {
            best = i;
        }
    }
    Ok(OracleResult {
        value: values[best],
        assignment: points[best]
            .iter()
            .map(|(id, x)| (scm.dag().name(*id).to_string(), *x))
            .collect(),
    })
}
