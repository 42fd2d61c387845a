//! Cost accounting and per-step trace rows.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::SourceId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Action {
    Observe,
    Intervene,
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(match self {
            Action::Observe => "observe",
            Action::Intervene => "intervene",
        })
    }
}

/// What one source did within a step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowEntry {
    pub source: SourceId,
    pub variables: Vec<String>,
    /// Assigned values; empty for observe steps.
    pub values: Vec<f64>,
    /// Noisy outcome of the intervention, if one was performed.
    pub outcome: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerRow {
    pub step: usize,
    pub action: Action,
    pub entries: Vec<RowEntry>,
    pub step_cost: f64,
    pub total_cost: f64,
    /// Best ground-truth value of any intervention so far; `None` until the
    /// first intervention.
    pub running_optimum: Option<f64>,
    /// Sources whose surrogate changed during this step.
    pub models_updated: Vec<SourceId>,
}

impl LedgerRow {
    pub fn set_size(&self) -> usize {
        self.entries.iter().map(|e| e.variables.len()).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetLedger {
    pub intervention_cost: f64,
    pub observation_cost: f64,
    pub budget: f64,
    pub total_cost: f64,
    pub rows: Vec<LedgerRow>,
}

impl BudgetLedger {
    pub fn new(intervention_cost: f64, observation_cost: f64, budget: f64) -> Result<BudgetLedger> {
        for (name, v) in [
            ("intervention cost", intervention_cost),
            ("observation cost", observation_cost),
            ("budget", budget),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidConfig(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        Ok(BudgetLedger {
            intervention_cost,
            observation_cost,
            budget,
            total_cost: 0.0,
            rows: Vec::new(),
        })
    }

    pub fn exhausted(&self) -> bool {
        self.total_cost >= self.budget
    }

    /// Unit cost times the number of variables touched.
    pub fn step_cost(&self, action: Action, set_size: usize) -> f64 {
        let unit = match action {
            Action::Observe => self.observation_cost,
            Action::Intervene => self.intervention_cost,
        };
        unit * set_size as f64
    }

    /// Append a row, filling in its cost fields.
    pub fn charge(&mut self, mut row: LedgerRow) -> &LedgerRow {
        row.step = self.rows.len();
        row.step_cost = self.step_cost(row.action, row.set_size());
        self.total_cost += row.step_cost;
        row.total_cost = self.total_cost;
        self.rows.push(row);
        self.rows.last().expect("just pushed")
    }

    pub fn interventions(&self) -> impl Iterator<Item = &LedgerRow> {
        self.rows.iter().filter(|r| r.action == Action::Intervene)
    }
}
