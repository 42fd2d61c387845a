// MSCBO against the per-source CBO and non-causal MSBO baselines on the
// MAB network: same budget, different intervention costs.
//
// `cargo run --release --example compare_algorithms`

use mscbo::benchmarks::{load_benchmark, make_sources};
use mscbo::optimizer::{
    run, Action, Algorithm, BudgetLedger, EpsilonPolicy, Evaluator, LoopConfig,
};
use mscbo::scm::scenario::ScenarioSpec;

pub fn run_example() -> mscbo::Result<Vec<(Algorithm, f64, Option<f64>)>> {
    let spec = load_benchmark("mab")?;
    let config = LoopConfig {
        evaluator: Some(Evaluator::new(spec.runnable_scm()?, 2_000, 0)),
        ..LoopConfig::default()
    };
    let mut out = Vec::new();
    for alg in Algorithm::ALL {
        let sources = make_sources(&spec, 2, &ScenarioSpec::default(), 1)?;
        let ledger = BudgetLedger::new(20.0, 1.0, 600.0)?;
        let r = run(
            alg,
            sources,
            spec.objective,
            ledger,
            EpsilonPolicy::default(),
            1,
            &config,
            &mut |_| {},
        )?;
        let per = r
            .trace
            .rows
            .iter()
            .find(|row| row.action == Action::Intervene)
            .map_or(0.0, |row| row.step_cost);
        let set = r.best_intervention.as_ref().map(|i| i.variables.join(","));
        println!(
            "{alg:<6} cost/intervention {per:>5}  steps {:>3}  best {:?} on {{{}}}",
            r.trace.rows.len(),
            r.best_value,
            set.unwrap_or_default()
        );
        out.push((alg, per, r.best_value));
    }
    Ok(out)
}

#[allow(dead_code)]
fn main() -> mscbo::Result<()> {
    run_example().map(|_| ())
}
