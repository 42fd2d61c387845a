// Causal prior mean: fit the PSA mechanisms from observational data and
// predict interventional means.
//
// `cargo run --example causal_prior`

use mscbo::benchmarks::load_benchmark;
use mscbo::gp::{causal_prior_mean, PriorConfig};
use mscbo::RngState;

pub fn run_example() -> mscbo::Result<Vec<(f64, f64)>> {
    let spec = load_benchmark("psa")?;
    let scm = spec.runnable_scm()?;
    let obs = scm.sample_observational(2_000, &mut RngState::new(11))?;
    let vars = vec!["aspirin".to_string(), "statin".to_string()];
    let prior = causal_prior_mean(scm, &obs, &vars, &PriorConfig::default())?;

    let mut pairs = Vec::new();
    for (a, s) in [(0.0, 1.0), (0.5, 0.5), (1.0, 0.0)] {
        let truth = scm.interventional_mean(
            &scm.resolve_do(&[("aspirin", a), ("statin", s)])?,
            20_000,
            &mut RngState::new(0),
        )?;
        let m = prior.eval(&[a, s]);
        println!("do(aspirin={a}, statin={s}): prior {m:.3}  simulator {truth:.3}");
        pairs.push((m, truth));
    }
    Ok(pairs)
}

#[allow(dead_code)]
fn main() -> mscbo::Result<()> {
    run_example().map(|_| ())
}
