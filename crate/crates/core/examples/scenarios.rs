// The three source-mutation scenarios applied to the PSA network.
//
// `cargo run --example scenarios`

use mscbo::benchmarks::load_benchmark;
use mscbo::scm::scenario::{apply_scenario, ScenarioKind, ScenarioSpec};

pub fn run_example() -> mscbo::Result<Vec<(ScenarioKind, usize, usize)>> {
    let spec = load_benchmark("psa")?;
    let base = spec.runnable_scm()?;
    let mut shapes = Vec::new();
    for kind in [
        ScenarioKind::Base,
        ScenarioKind::AlteredSem,
        ScenarioKind::AlteredEdges,
        ScenarioKind::AlteredNodes,
    ] {
        let mutated = apply_scenario(base, &ScenarioSpec::new(kind, 4))?;
        let dag = mutated.dag();
        println!("{kind:?}: {} nodes, {} edges", dag.len(), dag.edge_count());
        for (node, eq) in mutated.equation_map() {
            if base
                .dag()
                .id(&node)
                .ok()
                .map(|v| base.equation(v).to_string())
                != Some(eq.to_string())
            {
                println!("    {node} = {eq}");
            }
        }
        shapes.push((kind, dag.len(), dag.edge_count()));
    }
    Ok(shapes)
}

#[allow(dead_code)]
fn main() -> mscbo::Result<()> {
    run_example().map(|_| ())
}
