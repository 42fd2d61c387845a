// Minimal intervention sets and the summed-distance tiebreak.
//
// `cargo run --example pomis_tiebreak`

use mscbo::benchmarks::load_benchmark;
use mscbo::graph::{ancestors, enumerate_pomis, select_pomis, Pomis};

pub fn run_example() -> mscbo::Result<Vec<(String, Pomis)>> {
    let mut heads = Vec::new();
    for name in ["crop", "psa", "mab", "ecoli_graph"] {
        let spec = load_benchmark(name)?;
        let out = spec.dag.output_name();
        println!(
            "{name}: ancestors of {out} = {:?}",
            ancestors(&spec.dag, out)?
        );
        for (rank, p) in enumerate_pomis(&spec.dag, &spec.exploration)?
            .iter()
            .enumerate()
        {
            println!(
                "  #{rank} {p:<20} size {} distance {}",
                p.len(),
                p.tiebreak_distance
            );
        }
        let head = select_pomis(&spec.dag, &spec.exploration)?;
        println!("  selected {head}");
        heads.push((name.to_string(), head));
    }
    Ok(heads)
}

#[allow(dead_code)]
fn main() -> mscbo::Result<()> {
    run_example().map(|_| ())
}
