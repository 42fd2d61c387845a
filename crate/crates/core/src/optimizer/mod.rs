//! The multi-source optimisation loop and its two baselines.
//!
//! All three algorithms share one engine. Each source carries its own GP over
//! its intervention set; every step the per-source acquisitions are optimised
//! in parallel and a coordinator applies the single resulting update.
//!
//! * [`Algorithm::Mscbo`]: the best source by cost-weighted knowledge
//!   gradient acts on its top-ranked POMIS.
//! * [`Algorithm::Cbo`]: every source runs its own single-source step each
//!   round, and all of them pay.
//! * [`Algorithm::Msbo`]: like MSCBO, but on the full exploration set.

pub mod ledger;
pub mod policy;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use ledger::{Action, BudgetLedger, LedgerRow, RowEntry};
pub use policy::{decide_action, epsilon, EpsilonPolicy};

use crate::acquisition::{optimize_ckg, CkgEstimate, CkgSettings, DomainGrid, InterventionSet};
use crate::error::{Error, Result};
use crate::gp::{
    causal_prior_mean, fit_hyperparameters, GaussianProcess, HyperSearch, Kernel, PriorConfig,
    PriorMean,
};
use crate::graph::{enumerate_pomis, ExplorationSet, SourceId};
use crate::rng::{mix_seed, RngState};
use crate::scm::{Dag, Sample, Scm};
use crate::Objective;

const TAG_CKG: u64 = 0xC6;
const TAG_THETA: u64 = 0x7E;
const TAG_OBSERVE: u64 = 0x0B;
const TAG_INTERVENE: u64 = 0x1D;
const TAG_HYPER: u64 = 0x4B;
const TAG_PRIOR: u64 = 0x9A;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Mscbo,
    Cbo,
    Msbo,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [Algorithm::Mscbo, Algorithm::Cbo, Algorithm::Msbo];

    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::Mscbo => "mscbo",
            Algorithm::Cbo => "cbo",
            Algorithm::Msbo => "msbo",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.as_str())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Algorithm> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mscbo" => Ok(Algorithm::Mscbo),
            "cbo" | "cbo-naive" | "cbo_naive" => Ok(Algorithm::Cbo),
            "msbo" => Ok(Algorithm::Msbo),
            other => Err(Error::InvalidConfig(format!("unknown algorithm `{other}`"))),
        }
    }
}

/// One information source: a simulator the optimiser may query, plus what
/// the optimiser is allowed to know about it.
#[derive(Debug, Clone)]
pub struct Source {
    pub id: SourceId,
    /// Ground-truth simulator; only sampled, never inspected by the surrogate.
    pub scm: Scm,
    pub dag_belief: Dag,
    pub exploration: ExplorationSet,
    pub query_cost: f64,
    pub interventional_domain: BTreeMap<String, (f64, f64)>,
    pub obs_data: Vec<Sample>,
}

impl Source {
    /// Source with unit query cost and the SCM's own domains.
    pub fn new<S: AsRef<str>>(id: SourceId, scm: Scm, exploration: &[S]) -> Result<Source> {
        let dag_belief = scm.dag().clone();
        let exploration =
            ExplorationSet::new(&dag_belief, exploration.iter().map(|s| s.as_ref()), id)?;
        let interventional_domain = scm.domain_map();
        Ok(Source {
            id,
            scm,
            dag_belief,
            exploration,
            query_cost: 1.0,
            interventional_domain,
            obs_data: Vec::new(),
        })
    }

    pub fn with_cost(mut self, query_cost: f64) -> Result<Source> {
        if !(query_cost > 0.0 && query_cost.is_finite()) {
            return Err(Error::ZeroCost(query_cost));
        }
        self.query_cost = query_cost;
        Ok(self)
    }
}

/// Scores executed interventions by their true expected outcome.
///
/// Uses a fixed Monte-Carlo stream with the output's own noise switched off,
/// so identical assignments always score identically.
#[derive(Debug, Clone)]
pub struct Evaluator {
    scm: Scm,
    samples: usize,
    seed: u64,
}

impl Evaluator {
    pub const DEFAULT_SAMPLES: usize = 4000;

    pub fn new(reference: &Scm, samples: usize, seed: u64) -> Evaluator {
        Evaluator {
            scm: reference.without_output_noise(),
            samples: samples.max(1),
            seed,
        }
    }

    pub fn value(&self, assignment: &[(&str, f64)]) -> Result<f64> {
        let resolved = self.scm.resolve_do(assignment)?;
        self.scm
            .interventional_mean(&resolved, self.samples, &mut RngState::new(self.seed))
    }
}

#[derive(Debug, Clone)]
pub struct LoopConfig {
    pub ckg: CkgSettings,
    /// `n_min` and `mc_samples` for the causal prior; its seed is derived
    /// per source from the run seed.
    pub prior: PriorConfig,
    /// Scores interventions for the running optimum. `None` scores each
    /// source against its own simulator.
    pub evaluator: Option<Evaluator>,
    pub eval_samples: usize,
    /// Hard stop independent of the budget.
    pub max_steps: usize,
}

impl Default for LoopConfig {
    fn default() -> Self {
        LoopConfig {
            ckg: CkgSettings::default(),
            prior: PriorConfig::default(),
            evaluator: None,
            eval_samples: Evaluator::DEFAULT_SAMPLES,
            max_steps: 10_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunWarning {
    BudgetExhaustedBeforeFirstIntervention,
    StepLimitReached,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub algorithm: Algorithm,
    pub best_source: Option<SourceId>,
    pub total_cost: f64,
    pub best_intervention: Option<InterventionSet>,
    pub best_value: Option<f64>,
    pub trace: BudgetLedger,
    pub warnings: Vec<RunWarning>,
}

pub fn run_mscbo(
    sources: Vec<Source>,
    objective: Objective,
    ledger: BudgetLedger,
    policy: EpsilonPolicy,
    seed: u64,
) -> Result<RunResult> {
    run(
        Algorithm::Mscbo,
        sources,
        objective,
        ledger,
        policy,
        seed,
        &LoopConfig::default(),
        &mut |_| {},
    )
}

pub fn run_cbo_naive(
    sources: Vec<Source>,
    objective: Objective,
    ledger: BudgetLedger,
    policy: EpsilonPolicy,
    seed: u64,
) -> Result<RunResult> {
    run(
        Algorithm::Cbo,
        sources,
        objective,
        ledger,
        policy,
        seed,
        &LoopConfig::default(),
        &mut |_| {},
    )
}

pub fn run_msbo(
    sources: Vec<Source>,
    objective: Objective,
    ledger: BudgetLedger,
    policy: EpsilonPolicy,
    seed: u64,
) -> Result<RunResult> {
    run(
        Algorithm::Msbo,
        sources,
        objective,
        ledger,
        policy,
        seed,
        &LoopConfig::default(),
        &mut |_| {},
    )
}

/// Per-source surrogate state.
struct Arm {
    source: Source,
    variables: Vec<String>,
    var_ids: Vec<usize>,
    bounds: Vec<(f64, f64)>,
    diameter: f64,
    pomis_rank: Option<usize>,
    grid: DomainGrid,
    gp: GaussianProcess,
    causal: Option<PriorMean>,
    xs: Vec<Vec<f64>>,
    ys: Vec<f64>,
    evaluator: Evaluator,
}

impl Arm {
    fn new(source: Source, algorithm: Algorithm, config: &LoopConfig, seed: u64) -> Result<Arm> {
        let (variables, pomis_rank) = match algorithm {
            Algorithm::Msbo => (source.exploration.variables().to_vec(), None),
            Algorithm::Mscbo | Algorithm::Cbo => {
                let head = enumerate_pomis(&source.dag_belief, &source.exploration)?.remove(0);
                (head.variables, Some(0))
            }
        };
        let var_ids = variables
            .iter()
            .map(|v| source.dag_belief.id(v))
            .collect::<Result<Vec<_>>>()?;
        let bounds = variables
            .iter()
            .map(|v| {
                source
                    .interventional_domain
                    .get(v)
                    .copied()
                    .ok_or_else(|| Error::EmptyDomain(v.clone()))
            })
            .collect::<Result<Vec<_>>>()?;
        let grid = DomainGrid::new(&bounds, config.ckg.grid_points)?;
        let diameter = bounds
            .iter()
            .map(|(lo, hi)| (hi - lo).powi(2))
            .sum::<f64>()
            .sqrt();
        let evaluator = config.evaluator.clone().unwrap_or_else(|| {
            Evaluator::new(
                &source.scm,
                config.eval_samples,
                mix_seed(seed, &[source.id.0 as u64]),
            )
        });
        let mut arm = Arm {
            gp: GaussianProcess::new(variables.len(), Kernel::default(), PriorMean::zero()),
            source,
            variables,
            var_ids,
            bounds,
            diameter,
            pomis_rank,
            grid,
            causal: None,
            xs: Vec::new(),
            ys: Vec::new(),
            evaluator,
        };
        arm.gp = arm.gp.with_kernel(arm.default_kernel()?)?;
        Ok(arm)
    }

    fn id(&self) -> SourceId {
        self.source.id
    }

    fn observed_outputs(&self) -> impl Iterator<Item = f64> + '_ {
        let out = self.source.dag_belief.output();
        self.source
            .obs_data
            .iter()
            .filter_map(move |s| s.get(out))
            .chain(self.ys.iter().copied())
    }

    /// Kernel used until two interventions allow a likelihood fit.
    fn default_kernel(&self) -> Result<Kernel> {
        let ys: Vec<f64> = self.observed_outputs().filter(|y| y.is_finite()).collect();
        let var = if ys.len() >= 2 {
            let m = ys.iter().sum::<f64>() / ys.len() as f64;
            ys.iter().map(|y| (y - m).powi(2)).sum::<f64>() / (ys.len() - 1) as f64
        } else {
            1.0
        }
        .max(1e-6);
        Kernel::new(var, 0.25 * self.diameter, 0.05 * var)
    }

    fn projected_obs(&self) -> Vec<Vec<f64>> {
        self.source
            .obs_data
            .iter()
            .map(|s| {
                self.var_ids
                    .iter()
                    .map(|&v| s.get(v).unwrap_or(f64::NAN))
                    .collect()
            })
            .collect()
    }

    fn epsilon(&self, policy: &EpsilonPolicy) -> Result<f64> {
        epsilon(policy, &self.projected_obs(), &self.bounds)
    }

    fn acquire(
        &self,
        objective: Objective,
        cost: f64,
        settings: &CkgSettings,
        rng: &mut RngState,
    ) -> Result<CkgEstimate> {
        let opt = optimize_ckg(
            &self.gp,
            &self.grid,
            cost,
            settings.fantasies,
            settings.refine_steps,
            rng,
            objective,
        )?;
        Ok(CkgEstimate {
            source_id: self.id(),
            candidate: InterventionSet {
                variables: self.variables.clone(),
                values: opt.x,
                source_id: self.id(),
                pomis_rank: self.pomis_rank,
            },
            gradient_value: opt.value.gradient_value,
            fantasy_count: opt.value.fantasy_count,
            std_error: opt.value.std_error,
        })
    }

    /// Rebuild the GP from the current data, refitting the causal prior
    /// first when `refit_prior` is set.
    fn refresh(
        &mut self,
        refit_prior: bool,
        config: &LoopConfig,
        seed: u64,
        step: usize,
    ) -> Result<()> {
        let id = self.id().0 as u64;
        if refit_prior && self.source.obs_data.len() >= config.prior.n_min.max(1) {
            let prior_config = PriorConfig {
                seed: mix_seed(seed, &[TAG_PRIOR, id]),
                ..config.prior
            };
            self.causal = Some(causal_prior_mean(
                &self.source.scm,
                &self.source.obs_data,
                &self.variables,
                &prior_config,
            )?);
        }
        let base = match &self.causal {
            Some(p) => p.clone(),
            None => {
                let out = self.source.dag_belief.output();
                let ys: Vec<f64> = self
                    .source
                    .obs_data
                    .iter()
                    .filter_map(|s| s.get(out))
                    .collect();
                PriorMean::constant(if ys.is_empty() {
                    0.0
                } else {
                    ys.iter().sum::<f64>() / ys.len() as f64
                })
            }
        };
        let prior = base.recentered(&self.xs, &self.ys);
        let incoming = if self.xs.len() >= 2 {
            *self.gp.kernel()
        } else {
            self.default_kernel()?
        };
        let gp = GaussianProcess::new(self.variables.len(), incoming, prior)
            .with_data(self.xs.clone(), self.ys.clone())?;
        self.gp = if self.xs.len() >= 2 {
            let search = HyperSearch {
                seed: mix_seed(seed, &[TAG_HYPER, step as u64, id]),
                diameter: Some(self.diameter),
            };
            let kernel = fit_hyperparameters(&gp, &search)?;
            gp.with_kernel(kernel)?
        } else {
            gp
        };
        Ok(())
    }

    fn observe(
        &mut self,
        k: usize,
        config: &LoopConfig,
        seed: u64,
        step: usize,
    ) -> Result<RowEntry> {
        let mut rng = RngState::derive(seed, &[TAG_OBSERVE, step as u64, self.id().0 as u64]);
        let fresh = self.source.scm.sample_observational(k.max(1), &mut rng)?;
        self.source.obs_data.extend(fresh);
        self.refresh(true, config, seed, step)?;
        Ok(RowEntry {
            source: self.id(),
            variables: self.variables.clone(),
            values: Vec::new(),
            outcome: None,
        })
    }

    /// Execute the intervention, returning the row entry and its true value.
    fn intervene(
        &mut self,
        x: &[f64],
        config: &LoopConfig,
        seed: u64,
        step: usize,
    ) -> Result<(RowEntry, f64)> {
        let mut rng = RngState::derive(seed, &[TAG_INTERVENE, step as u64, self.id().0 as u64]);
        let assignment: Vec<(usize, f64)> = self
            .var_ids
            .iter()
            .copied()
            .zip(x.iter().copied())
            .collect();
        let sample = self
            .source
            .scm
            .sample_interventional(&assignment, 1, &mut rng)?;
        let out = self.source.dag_belief.output();
        let y = sample[0].get(out).ok_or_else(|| Error::Evaluation {
            node: self.source.dag_belief.output_name().to_string(),
            reason: "output not observed".into(),
        })?;
        let named: Vec<(&str, f64)> = self
            .variables
            .iter()
            .map(String::as_str)
            .zip(x.iter().copied())
            .collect();
        let value = self.evaluator.value(&named)?;
        self.xs.push(x.to_vec());
        self.ys.push(y);
        self.refresh(false, config, seed, step)?;
        Ok((
            RowEntry {
                source: self.id(),
                variables: self.variables.clone(),
                values: x.to_vec(),
                outcome: Some(y),
            },
            value,
        ))
    }
}

/// Running best over executed interventions.
struct Best {
    value: Option<f64>,
    intervention: Option<InterventionSet>,
}

impl Best {
    fn offer(&mut self, objective: Objective, value: f64, set: InterventionSet) {
        if self.value.is_none_or(|v| objective.better(value, v)) {
            self.value = Some(value);
            self.intervention = Some(set);
        }
    }
}

/// Run `algorithm` until the ledger's budget is spent, streaming each row
/// to `on_row`.
#[allow(clippy::too_many_arguments)]
pub fn run(
    algorithm: Algorithm,
    sources: Vec<Source>,
    objective: Objective,
    mut ledger: BudgetLedger,
    policy: EpsilonPolicy,
    seed: u64,
    config: &LoopConfig,
    on_row: &mut dyn FnMut(&LedgerRow),
) -> Result<RunResult> {
    if sources.is_empty() {
        return Err(Error::InvalidConfig(
            "at least one source is required".into(),
        ));
    }
    let mut ids: Vec<SourceId> = sources.iter().map(|s| s.id).collect();
    ids.sort();
    ids.dedup();
    if ids.len() != sources.len() {
        return Err(Error::InvalidConfig("source ids must be distinct".into()));
    }
    if policy.n_max == 0 || policy.k_obs == 0 {
        return Err(Error::InvalidConfig(
            "n_max and k_obs must be positive".into(),
        ));
    }
    let mut arms = sources
        .into_iter()
        .map(|s| Arm::new(s, algorithm, config, seed))
        .collect::<Result<Vec<_>>>()?;
    for arm in arms.iter_mut() {
        if !arm.source.obs_data.is_empty() {
            arm.refresh(true, config, seed, 0)?;
        }
    }

    let mut best = Best {
        value: None,
        intervention: None,
    };
    let mut warnings = Vec::new();
    let mut step = 0usize;
    while !ledger.exhausted() {
        if step >= config.max_steps {
            warnings.push(RunWarning::StepLimitReached);
            break;
        }
        let row = match algorithm {
            Algorithm::Mscbo | Algorithm::Msbo => {
                single_source_step(&mut arms, objective, &policy, seed, step, config, &mut best)?
            }
            Algorithm::Cbo => {
                all_sources_step(&mut arms, objective, &policy, seed, step, config, &mut best)?
            }
        };
        on_row(ledger.charge(row));
        step += 1;
    }
    if best.value.is_none() {
        warnings.push(RunWarning::BudgetExhaustedBeforeFirstIntervention);
    }
    Ok(RunResult {
        algorithm,
        best_source: best.intervention.as_ref().map(|i| i.source_id),
        total_cost: ledger.total_cost,
        best_intervention: best.intervention,
        best_value: best.value,
        trace: ledger,
        warnings,
    })
}

fn acquire_all(
    arms: &[Arm],
    objective: Objective,
    unit_cost: bool,
    seed: u64,
    step: usize,
    settings: &CkgSettings,
) -> Result<Vec<CkgEstimate>> {
    arms.par_iter()
        .map(|arm| {
            let mut rng = RngState::derive(
                seed,
                &[TAG_CKG, settings.seed, step as u64, arm.id().0 as u64],
            );
            let cost = if unit_cost {
                1.0
            } else {
                arm.source.query_cost
            };
            arm.acquire(objective, cost, settings, &mut rng)
        })
        .collect()
}

fn theta(seed: u64, step: usize) -> f64 {
    RngState::derive(seed, &[TAG_THETA, step as u64]).random::<f64>()
}

fn empty_row(action: Action, entries: Vec<RowEntry>, best: &Best) -> LedgerRow {
    let models_updated = entries.iter().map(|e| e.source).collect();
    LedgerRow {
        step: 0,
        action,
        entries,
        step_cost: 0.0,
        total_cost: 0.0,
        running_optimum: best.value,
        models_updated,
    }
}

fn single_source_step(
    arms: &mut [Arm],
    objective: Objective,
    policy: &EpsilonPolicy,
    seed: u64,
    step: usize,
    config: &LoopConfig,
    best: &mut Best,
) -> Result<LedgerRow> {
    let estimates = acquire_all(arms, objective, false, seed, step, &config.ckg)?;
    let chosen = (0..arms.len())
        .max_by(|&a, &b| {
            estimates[a]
                .gradient_value
                .total_cmp(&estimates[b].gradient_value)
                .then(
                    arms[b]
                        .source
                        .query_cost
                        .total_cmp(&arms[a].source.query_cost),
                )
                .then(arms[b].id().cmp(&arms[a].id()))
        })
        .expect("at least one source");
    let arm = &mut arms[chosen];
    let eps = arm.epsilon(policy)?;
    let action = decide_action(eps, theta(seed, step), arm.source.obs_data.len(), policy);
    let entry = match action {
        Action::Observe => arm.observe(policy.k_obs, config, seed, step)?,
        Action::Intervene => {
            let candidate = estimates[chosen].candidate.clone();
            let (entry, value) = arm.intervene(&candidate.values, config, seed, step)?;
            best.offer(objective, value, candidate);
            entry
        }
    };
    Ok(empty_row(action, vec![entry], best))
}

fn all_sources_step(
    arms: &mut [Arm],
    objective: Objective,
    policy: &EpsilonPolicy,
    seed: u64,
    step: usize,
    config: &LoopConfig,
    best: &mut Best,
) -> Result<LedgerRow> {
    let estimates = acquire_all(arms, objective, true, seed, step, &config.ckg)?;
    let mut eps = 0.0;
    for arm in arms.iter() {
        eps += arm.epsilon(policy)?;
    }
    eps /= arms.len() as f64;
    let n = arms
        .iter()
        .map(|a| a.source.obs_data.len())
        .min()
        .unwrap_or(0);
    let action = decide_action(eps, theta(seed, step), n, policy);
    let mut entries = Vec::with_capacity(arms.len());
    for (arm, est) in arms.iter_mut().zip(&estimates) {
        match action {
            Action::Observe => entries.push(arm.observe(policy.k_obs, config, seed, step)?),
            Action::Intervene => {
                let (entry, value) = arm.intervene(&est.candidate.values, config, seed, step)?;
                best.offer(objective, value, est.candidate.clone());
                entries.push(entry);
            }
        }
    }
    Ok(empty_row(action, entries, best))
}
