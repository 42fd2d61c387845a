//! Independent reference implementations shared by the test targets.
//!
//! Nothing here reuses the library's linear algebra or caches: each oracle
//! rebuilds the textbook formula from scratch.
#![allow(dead_code)]

use mscbo::gp::{GaussianProcess, Kernel, PriorMean};
use mscbo::{Objective, RngState};
use rand::Rng;

/// Squared-exponential kernel written out directly.
pub fn rbf(k: &Kernel, a: &[f64], b: &[f64]) -> f64 {
    let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
    k.signal_variance * (-0.5 * d2 / k.lengthscale.powi(2)).exp()
}

/// Inverse by Gauss-Jordan elimination with partial pivoting.
pub fn invert(mut a: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    let n = a.len();
    let mut inv: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| f64::from(u8::from(i == j))).collect())
        .collect();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, piv);
        inv.swap(col, piv);
        let p = a[col][col];
        for j in 0..n {
            a[col][j] /= p;
            inv[col][j] /= p;
        }
        for i in 0..n {
            if i != col {
                let f = a[i][col];
                if f != 0.0 {
                    for j in 0..n {
                        a[i][j] -= f * a[col][j];
                        inv[i][j] -= f * inv[col][j];
                    }
                }
            }
        }
    }
    inv
}

/// Posterior mean and variance from the closed form with an explicit inverse.
pub fn dense_posterior(
    k: &Kernel,
    prior: &dyn Fn(&[f64]) -> f64,
    xs: &[Vec<f64>],
    ys: &[f64],
    q: &[f64],
) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (prior(q), k.signal_variance);
    }
    let kmat: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| rbf(k, &xs[i], &xs[j]) + if i == j { k.noise_variance } else { 0.0 })
                .collect()
        })
        .collect();
    let inv = invert(kmat);
    let ks: Vec<f64> = xs.iter().map(|x| rbf(k, x, q)).collect();
    let resid: Vec<f64> = xs.iter().zip(ys).map(|(x, y)| y - prior(x)).collect();
    let mut mean = prior(q);
    let mut quad = 0.0;
    for i in 0..n {
        for j in 0..n {
            mean += ks[i] * inv[i][j] * resid[j];
            quad += ks[i] * inv[i][j] * ks[j];
        }
    }
    (mean, rbf(k, q, q) - quad)
}

pub fn smooth_prior(x: &[f64]) -> f64 {
    x.iter()
        .enumerate()
        .map(|(i, v)| (v + i as f64).sin())
        .sum::<f64>()
        * 0.5
}

/// A random GP instance: dimension, kernel, data and queries, in the unit box
/// scaled by 3.
pub struct GpInstance {
    pub kernel: Kernel,
    pub xs: Vec<Vec<f64>>,
    pub ys: Vec<f64>,
    pub queries: Vec<Vec<f64>>,
}

pub fn random_gp_instance(rng: &mut RngState, max_points: usize) -> GpInstance {
    let dim = rng.random_range(1..=5);
    let n = rng.random_range(0..=max_points);
    let sv = 10f64.powf(rng.random_range(-1.0..1.0));
    let kernel = Kernel::new(
        sv,
        10f64.powf(rng.random_range(-0.5..0.5)),
        sv * 10f64.powf(rng.random_range(-3.0..-0.5)),
    )
    .unwrap();
    let point =
        |rng: &mut RngState| -> Vec<f64> { (0..dim).map(|_| rng.random_range(0.0..3.0)).collect() };
    let xs: Vec<Vec<f64>> = (0..n).map(|_| point(rng)).collect();
    let ys = xs
        .iter()
        .map(|x| smooth_prior(x) + rng.random_range(-1.0..1.0))
        .collect();
    let queries = (0..5).map(|_| point(rng)).collect();
    GpInstance {
        kernel,
        xs,
        ys,
        queries,
    }
}

impl GpInstance {
    pub fn gp(&self) -> GaussianProcess {
        GaussianProcess::new(
            self.queries[0].len(),
            self.kernel,
            PriorMean::from_fn(smooth_prior),
        )
        .with_data(self.xs.clone(), self.ys.clone())
        .unwrap()
    }

    /// Largest mean and variance error against the dense oracle.
    pub fn max_error(&self) -> (f64, f64) {
        let gp = self.gp();
        let mut worst = (0.0f64, 0.0f64);
        for q in &self.queries {
            let (m, v) = gp.posterior(q).unwrap();
            let (om, ov) = dense_posterior(&self.kernel, &smooth_prior, &self.xs, &self.ys, q);
            worst.0 = worst.0.max((m - om).abs());
            worst.1 = worst.1.max((v - ov.max(0.0)).abs());
        }
        worst
    }
}

/// Knowledge gradient by refitting the GP on each fantasy outcome and
/// recomputing the best posterior mean over `grid` plus the candidate.
///
/// Returns `(mean gain, standard error)` before clamping and cost division.
pub fn brute_force_kg(
    gp: &GaussianProcess,
    grid: &[Vec<f64>],
    x: &[f64],
    z: &[f64],
    dir: Objective,
) -> (f64, f64) {
    let sign = dir.sign();
    let mut pts: Vec<Vec<f64>> = grid.to_vec();
    pts.push(x.to_vec());
    let best = |g: &GaussianProcess| {
        pts.iter()
            .map(|p| sign * g.posterior(p).unwrap().0)
            .fold(f64::NEG_INFINITY, f64::max)
    };
    let now = best(gp);
    let (mu, var) = gp.posterior(x).unwrap();
    let scale = (var + gp.kernel().noise_variance).sqrt();
    let gains: Vec<f64> = z
        .iter()
        .map(|zf| best(&gp.with_point(x.to_vec(), mu + sign * scale * zf).unwrap()) - now)
        .collect();
    let f = gains.len() as f64;
    let mean = gains.iter().sum::<f64>() / f;
    let var = gains.iter().map(|g| (g - mean).powi(2)).sum::<f64>() / (f - 1.0);
    (mean, (var / f).sqrt())
}

/// Median of a non-empty sample.
pub fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

/// One benchmark run with the same wiring as the harness, keeping the full
/// ledger rows.
pub fn run_benchmark(
    spec: &mscbo::benchmarks::BenchmarkSpec,
    config: &mscbo::harness::RunConfig,
    algorithm: mscbo::optimizer::Algorithm,
    seed: u64,
) -> mscbo::Result<mscbo::optimizer::RunResult> {
    use mscbo::optimizer::{run, BudgetLedger, Evaluator, LoopConfig};
    let sources = mscbo::benchmarks::make_sources(spec, config.sources, &config.scenario, seed)?;
    let ledger = BudgetLedger::new(
        config.intervention_cost,
        config.observation_cost,
        config.budget,
    )?;
    let loop_config = LoopConfig {
        ckg: config.ckg,
        evaluator: Some(Evaluator::new(spec.runnable_scm()?, config.eval_samples, 0)),
        eval_samples: config.eval_samples,
        ..LoopConfig::default()
    };
    run(
        algorithm,
        sources,
        spec.objective,
        ledger,
        config.policy(),
        seed,
        &loop_config,
        &mut |_| {},
    )
}

/// Ledger invariants every run must satisfy. `sources` is the number of
/// arms; CBO rows must touch all of them, the others exactly one.
pub fn check_ledger(
    r: &mscbo::optimizer::RunResult,
    objective: Objective,
    sources: usize,
) -> Result<(), String> {
    use mscbo::optimizer::{Action, Algorithm};
    let t = &r.trace;
    let mut sum = 0.0;
    let mut prev: Option<f64> = None;
    for (i, row) in t.rows.iter().enumerate() {
        sum += row.step_cost;
        if sum.to_bits() != row.total_cost.to_bits() {
            return Err(format!(
                "row {i}: cumulative cost {} != {}",
                row.total_cost, sum
            ));
        }
        let unit = match row.action {
            Action::Observe => t.observation_cost,
            Action::Intervene => t.intervention_cost,
        };
        if row.step_cost != unit * row.set_size() as f64 {
            return Err(format!(
                "row {i}: step cost {} for set size {}",
                row.step_cost,
                row.set_size()
            ));
        }
        if i + 1 < t.rows.len() && row.total_cost >= t.budget {
            return Err(format!("row {i}: loop continued past the budget"));
        }
        let writers = if r.algorithm == Algorithm::Cbo {
            sources
        } else {
            1
        };
        if row.models_updated.len() != writers {
            return Err(format!(
                "row {i}: {} models updated",
                row.models_updated.len()
            ));
        }
        match (prev, row.running_optimum) {
            (Some(_), None) => return Err(format!("row {i}: running optimum disappeared")),
            (Some(p), Some(v)) if objective.better(p, v) => {
                return Err(format!("row {i}: running optimum regressed"))
            }
            _ => {}
        }
        if row.action == Action::Observe && row.running_optimum != prev {
            return Err(format!("row {i}: observing changed the running optimum"));
        }
        prev = row.running_optimum;
    }
    if sum.to_bits() != t.total_cost.to_bits() || t.total_cost != r.total_cost {
        return Err(format!("ledger total {} != {}", t.total_cost, sum));
    }
    let max_step = t.rows.iter().map(|r| r.step_cost).fold(0.0, f64::max);
    if t.total_cost < t.budget && r.warnings.is_empty() {
        return Err("stopped before the budget".into());
    }
    if t.total_cost - t.budget > max_step {
        return Err(format!(
            "overshoot {} exceeds one step",
            t.total_cost - t.budget
        ));
    }
    if r.best_value != prev {
        return Err("best value differs from the final running optimum".into());
    }
    Ok(())
}
