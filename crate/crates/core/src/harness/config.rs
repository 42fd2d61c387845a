//! Experiment configuration.
//!
//! Read from a TOML file, then overridden field by field from the command
//! line; command-line values win.
//!
//! ```toml
//! benchmark = "crop"
//! algorithms = ["mscbo", "cbo", "msbo"]
//! seeds = [0, 1, 2]
//! budget = 500.0
//!
//! [scenario]
//! kind = "altered_sem"
//!
//! [ckg]
//! fantasies = 32
//! ```

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::acquisition::CkgSettings;
use crate::error::{Error, Result};
use crate::optimizer::{Algorithm, EpsilonPolicy, Evaluator};
use crate::scm::scenario::ScenarioSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub benchmark: String,
    pub algorithms: Vec<Algorithm>,
    pub scenario: ScenarioSpec,
    pub seeds: Vec<u64>,
    pub budget: f64,
    #[serde(alias = "ic")]
    pub intervention_cost: f64,
    #[serde(alias = "oc")]
    pub observation_cost: f64,
    pub sources: usize,
    pub k_obs: usize,
    pub n_max: usize,
    pub ckg: CkgSettings,
    /// Monte-Carlo samples used to score executed interventions.
    pub eval_samples: usize,
    pub oracle: OracleConfig,
    /// Tolerance for the cost-to-reach-oracle column of the summary.
    pub tau: f64,
    pub output_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleConfig {
    /// Points per dimension; chosen from the set size when absent.
    pub grid_density: Option<usize>,
    pub samples: usize,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            grid_density: None,
            samples: 100_000,
        }
    }
}

impl OracleConfig {
    pub fn density_for(&self, dim: usize) -> usize {
        self.grid_density.unwrap_or(match dim {
            0 | 1 => 201,
            2 => 21,
            3 => 9,
            _ => 5,
        })
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            benchmark: "crop".into(),
            algorithms: Algorithm::ALL.to_vec(),
            scenario: ScenarioSpec::default(),
            seeds: (0..10).collect(),
            budget: 1000.0,
            intervention_cost: 20.0,
            observation_cost: 1.0,
            sources: 2,
            k_obs: 20,
            n_max: 200,
            ckg: CkgSettings::default(),
            eval_samples: Evaluator::DEFAULT_SAMPLES,
            oracle: OracleConfig::default(),
            tau: 0.1,
            output_dir: PathBuf::from("results"),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<RunConfig> {
        Ok(toml::from_str(text)?)
    }

    pub fn read(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("RunConfig always serializes")
    }

    pub fn policy(&self) -> EpsilonPolicy {
        EpsilonPolicy {
            n_max: self.n_max,
            k_obs: self.k_obs,
        }
    }

    /// Shift every seed by `offset` (wrapping).
    pub fn offset_seeds(&mut self, offset: u64) {
        for s in &mut self.seeds {
            *s = s.wrapping_add(offset);
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.seeds.is_empty() {
            return bad("seeds must not be empty".into());
        }
        if self.seeds.iter().collect::<BTreeSet<_>>().len() != self.seeds.len() {
            return bad("seeds must be distinct".into());
        }
        if self.algorithms.is_empty() {
            return bad("at least one algorithm is required".into());
        }
        if self.algorithms.iter().collect::<BTreeSet<_>>().len() != self.algorithms.len() {
            return bad("algorithms must be distinct".into());
        }
        for (name, v) in [
            ("budget", self.budget),
            ("intervention_cost", self.intervention_cost),
            ("observation_cost", self.observation_cost),
            ("tau", self.tau),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        for (name, v) in [
            ("sources", self.sources),
            ("k_obs", self.k_obs),
            ("n_max", self.n_max),
            ("eval_samples", self.eval_samples),
            ("ckg.fantasies", self.ckg.fantasies),
            ("ckg.grid_points", self.ckg.grid_points),
            ("oracle.samples", self.oracle.samples),
        ] {
            if v == 0 {
                return bad(format!("{name} must be positive"));
            }
        }
        Ok(())
    }
}
