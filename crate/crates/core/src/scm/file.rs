//! JSON file format for structural causal models.
//!
//! ```json
//! {
//!   "nodes": ["X", "Z", "Y"],
//!   "edges": [["X", "Z"], ["Z", "Y"]],
//!   "output": "Y",
//!   "intervenable": ["X", "Z"],
//!   "equations": { "X": "N(0, 1)", "Z": "exp(-X) + N(0, 1)", "Y": "cos(Z) - exp(-Z / 20) + N(0, 1)" },
//!   "domains": { "X": [-5, 5], "Z": [-5, 5] }
//! }
//! ```
//!
//! `latent`, `non_manipulative` and the benchmark metadata keys are optional.
//! A file without `equations` describes a graph only.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::expr::parse_equation;
use super::{Dag, DagSpec, Scm};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Objective {
    Min,
    Max,
}

impl Objective {
    /// `+1` for maximisation, `-1` for minimisation.
    pub fn sign(self) -> f64 {
        match self {
            Objective::Max => 1.0,
            Objective::Min => -1.0,
        }
    }

    /// Whether `a` is strictly better than `b`.
    pub fn better(self, a: f64, b: f64) -> bool {
        match self {
            Objective::Max => a > b,
            Objective::Min => a < b,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Objective::Max => "max",
            Objective::Min => "min",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnownOptimum {
    pub value: f64,
    pub assignment: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScmFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
    pub nodes: Vec<String>,
    pub edges: Vec<(String, String)>,
    pub output: String,
    pub intervenable: BTreeSet<String>,
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    pub non_manipulative: BTreeSet<String>,
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    pub latent: BTreeSet<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub equations: Option<BTreeMap<String, String>>,
    #[serde(default)]
    pub domains: BTreeMap<String, (f64, f64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub objective: Option<Objective>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exploration: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub known_optimum: Option<KnownOptimum>,
}

impl ScmFile {
    pub fn from_json(text: &str) -> Result<ScmFile> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn read(path: &Path) -> Result<ScmFile> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("ScmFile always serializes")
    }

    pub fn dag_spec(&self) -> DagSpec {
        DagSpec {
            nodes: self.nodes.clone(),
            edges: self.edges.clone(),
            output: self.output.clone(),
            intervenable: self.intervenable.clone(),
            non_manipulative: self.non_manipulative.clone(),
            latent: self.latent.clone(),
        }
    }

    pub fn dag(&self) -> Result<Dag> {
        Dag::new(self.dag_spec())
    }

    pub fn is_runnable(&self) -> bool {
        self.equations.is_some()
    }

    pub fn scm(&self) -> Result<Scm> {
        let dag = self.dag()?;
        let Some(equations) = &self.equations else {
            return Err(Error::NonRunnable(
                self.name.clone().unwrap_or_else(|| "<unnamed>".into()),
            ));
        };
        let mut eqs = BTreeMap::new();
        for (node, src) in equations {
            let rhs = parse_equation(src).map_err(|e| Error::InvalidEquation {
                node: node.clone(),
                reason: e.to_string(),
            })?;
            eqs.insert(node.clone(), rhs);
        }
        Scm::new(dag, eqs, self.domains.clone())
    }

    /// Serialise an existing SCM (no benchmark metadata).
    pub fn from_scm(scm: &Scm) -> ScmFile {
        let spec = scm.dag().to_spec();
        ScmFile {
            name: None,
            notes: Vec::new(),
            nodes: spec.nodes,
            edges: spec.edges,
            output: spec.output,
            intervenable: spec.intervenable,
            non_manipulative: spec.non_manipulative,
            latent: spec.latent,
            equations: Some(
                scm.equation_map()
                    .into_iter()
                    .map(|(k, v)| (k, v.to_string()))
                    .collect(),
            ),
            domains: scm.domain_map(),
            objective: None,
            exploration: None,
            known_optimum: None,
        }
    }
}
