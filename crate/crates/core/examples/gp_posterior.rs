// Gaussian-process regression with a fitted RBF kernel.
//
// `cargo run --example gp_posterior`

use mscbo::gp::{fit_hyperparameters, GaussianProcess, HyperSearch, Kernel, PriorMean};
use mscbo::RngState;
use rand_distr::{Distribution, Normal};

pub fn run_example() -> mscbo::Result<Kernel> {
    let mut rng = RngState::new(3);
    let noise = Normal::new(0.0, 0.1).expect("valid sd");
    let xs: Vec<Vec<f64>> = (0..25).map(|i| vec![i as f64 * 0.25]).collect();
    let ys: Vec<f64> = xs
        .iter()
        .map(|x| x[0].sin() + noise.sample(&mut rng))
        .collect();

    let gp = GaussianProcess::new(1, Kernel::default(), PriorMean::zero()).with_data(xs, ys)?;
    println!(
        "default kernel  {:?}  log ML {:.3}",
        gp.kernel(),
        gp.log_marginal_likelihood()
    );
    let kernel = fit_hyperparameters(&gp, &HyperSearch::default())?;
    let gp = gp.with_kernel(kernel)?;
    println!(
        "fitted kernel   {:?}  log ML {:.3}",
        gp.kernel(),
        gp.log_marginal_likelihood()
    );

    for x in [0.5, 2.0, 4.0, 9.0] {
        let (m, v) = gp.posterior(&[x])?;
        println!(
            "x = {x:>4}: mean {m:+.3} ± {:.3}   sin(x) = {:+.3}",
            v.sqrt(),
            x.sin()
        );
    }
    Ok(kernel)
}

#[allow(dead_code)]
fn main() -> mscbo::Result<()> {
    run_example().map(|_| ())
}
