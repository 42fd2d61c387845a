// Cost-weighted knowledge gradient over a one-dimensional domain.
//
// `cargo run --example ckg_acquisition`

use mscbo::acquisition::{ckg_at, optimize_ckg, DomainGrid};
use mscbo::gp::{GaussianProcess, Kernel, PriorMean};
use mscbo::{Objective, RngState};

pub fn run_example() -> mscbo::Result<Vec<f64>> {
    let gp = GaussianProcess::new(1, Kernel::new(1.0, 1.0, 0.05)?, PriorMean::zero()).with_data(
        vec![vec![-4.0], vec![-1.0], vec![2.5]],
        vec![0.3, -0.8, 0.1],
    )?;
    let grid = DomainGrid::new(&[(-5.0, 5.0)], 101)?;

    for x in [-4.0, -1.5, 0.5, 4.5] {
        let v = ckg_at(
            &gp,
            &[x],
            &grid,
            1.0,
            2000,
            &mut RngState::new(0),
            Objective::Min,
        )?;
        println!(
            "CKG({x:+.1}) = {:.4} ± {:.4}",
            v.gradient_value, v.std_error
        );
    }

    let mut best = Vec::new();
    for cost in [1.0, 2.0, 10.0] {
        let opt = optimize_ckg(
            &gp,
            &grid,
            cost,
            256,
            20,
            &mut RngState::new(0),
            Objective::Min,
        )?;
        println!(
            "cost {cost:>4}: argmax x = {:+.3}, value {:.4}",
            opt.x[0], opt.value.gradient_value
        );
        best.push(opt.x[0]);
    }
    Ok(best)
}

#[allow(dead_code)]
fn main() -> mscbo::Result<()> {
    run_example().map(|_| ())
}
