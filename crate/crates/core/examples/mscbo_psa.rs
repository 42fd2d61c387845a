// One MSCBO run on two PSA sources, printing the ledger as it grows.
//
// `cargo run --release --example mscbo_psa`

use mscbo::benchmarks::{load_benchmark, make_sources};
use mscbo::optimizer::{
    run, Algorithm, BudgetLedger, EpsilonPolicy, Evaluator, LoopConfig, RunResult,
};
use mscbo::scm::scenario::ScenarioSpec;

pub fn run_example() -> mscbo::Result<RunResult> {
    let spec = load_benchmark("psa")?;
    let sources = make_sources(&spec, 2, &ScenarioSpec::default(), 0)?;
    let config = LoopConfig {
        evaluator: Some(Evaluator::new(spec.runnable_scm()?, 2_000, 0)),
        ..LoopConfig::default()
    };
    let ledger = BudgetLedger::new(20.0, 1.0, 400.0)?;
    let result = run(
        Algorithm::Mscbo,
        sources,
        spec.objective,
        ledger,
        EpsilonPolicy::default(),
        0,
        &config,
        &mut |row| {
            let e = &row.entries[0];
            println!(
                "{:>3} {:<9} source {} {:?} {:?} cost {:>5} total {:>6} v {:?}",
                row.step,
                row.action,
                e.source,
                e.variables,
                e.values,
                row.step_cost,
                row.total_cost,
                row.running_optimum
            );
        },
    )?;
    println!(
        "best {:?} from source {:?}: {:?}",
        result.best_value,
        result.best_source,
        result.best_intervention.as_ref().map(|i| &i.values)
    );
    Ok(result)
}

#[allow(dead_code)]
fn main() -> mscbo::Result<()> {
    run_example().map(|_| ())
}
