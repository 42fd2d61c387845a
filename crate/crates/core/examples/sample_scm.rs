// Load the crop-yield network, sample it, and intervene on it.
//
// `cargo run --example sample_scm`

use mscbo::benchmarks::load_benchmark;
use mscbo::RngState;

pub fn run_example() -> mscbo::Result<Vec<f64>> {
    let spec = load_benchmark("crop")?;
    let scm = spec.runnable_scm()?;
    let dag = scm.dag();
    println!("topological order: {:?}", dag.topo_names());

    let mut rng = RngState::new(7);
    let obs = scm.sample_observational(5_000, &mut rng)?;
    let z = dag.id("Z")?;
    let y = dag.id("Y")?;
    let mean = |v: usize, s: &[mscbo::scm::Sample]| {
        s.iter().filter_map(|x| x.get(v)).sum::<f64>() / s.len() as f64
    };
    println!(
        "observational  E[Z] = {:.3}  E[Y] = {:.3}",
        mean(z, &obs),
        mean(y, &obs)
    );

    let mut means = Vec::new();
    for target in [-3.2, 0.0, 3.2] {
        let assignment = scm.resolve_do(&[("Z", target)])?;
        let m = scm.interventional_mean(&assignment, 20_000, &mut rng)?;
        let exact = target.cos() - (-target / 20.0).exp();
        println!("do(Z = {target:+.1})   E[Y] = {m:+.3}   (noise-free {exact:+.3})");
        means.push(m);
    }

    // Interventions outside the declared domain are rejected.
    let err = scm
        .resolve_do(&[("Z", 9.0)])
        .and_then(|a| scm.check_do(&a))
        .unwrap_err();
    println!("do(Z = 9): {err}");
    Ok(means)
}

#[allow(dead_code)]
fn main() -> mscbo::Result<()> {
    run_example().map(|_| ())
}
