use mscbo::benchmarks::{ground_truth_oracle, load_benchmark, make_sources, names, OracleSettings};
use mscbo::scm::{ScenarioKind, ScenarioSpec};
use mscbo::{Error, Objective, RngState};

#[test]
fn every_bundled_benchmark_loads() {
    let all: Vec<&str> = names().collect();
    assert_eq!(all, ["psa", "crop", "mab", "ecoli_graph"]);
    for name in all {
        let spec = load_benchmark(name).unwrap();
        assert_eq!(spec.name, name);
        assert_eq!(spec.is_runnable(), name != "ecoli_graph");
        assert!(!spec.exploration.is_empty());
    }
    assert!(load_benchmark("honey").is_err());
    assert!(load_benchmark("ecoli_graph")
        .unwrap()
        .runnable_scm()
        .is_err());
}

#[test]
fn objectives_and_reference_optima() {
    let psa = load_benchmark("psa").unwrap();
    assert_eq!(psa.objective, Objective::Min);
    assert_eq!(psa.known_optimum.as_ref().unwrap().value, 4.8);
    assert_eq!(load_benchmark("crop").unwrap().objective, Objective::Min);
    assert_eq!(load_benchmark("mab").unwrap().objective, Objective::Max);
    assert_eq!(load_benchmark("ecoli_graph").unwrap().exploration.len(), 9);
}

#[test]
fn base_sources_share_the_benchmark_equations() {
    let spec = load_benchmark("mab").unwrap();
    let sources = make_sources(&spec, 3, &ScenarioSpec::default(), 7).unwrap();
    assert_eq!(sources.len(), 3);
    let base = spec.scm.as_ref().unwrap();
    for (i, s) in sources.iter().enumerate() {
        assert_eq!(s.id.0, i);
        assert_eq!(s.scm.equations(), base.equations());
        assert_eq!(s.exploration.variables(), spec.exploration.variables());
        assert_eq!(s.query_cost, 1.0);
        for v in s.exploration.variables() {
            assert!(s.interventional_domain.contains_key(v));
        }
    }
    assert!(matches!(
        make_sources(&spec, 0, &ScenarioSpec::default(), 7),
        Err(Error::InvalidConfig(_))
    ));
}

#[test]
fn altered_sem_keeps_edges_but_moves_coefficients() {
    let spec = load_benchmark("psa").unwrap();
    let sources =
        make_sources(&spec, 2, &ScenarioSpec::new(ScenarioKind::AlteredSem, 3), 0).unwrap();
    let base = spec.scm.as_ref().unwrap();
    for s in &sources {
        assert_eq!(s.scm.dag().edges(), base.dag().edges());
        assert_ne!(s.scm.equations(), base.equations());
    }
    assert_ne!(sources[0].scm.equations(), sources[1].scm.equations());
    // Deterministic in the mutation seed.
    let again = make_sources(
        &spec,
        2,
        &ScenarioSpec::new(ScenarioKind::AlteredSem, 3),
        99,
    )
    .unwrap();
    assert_eq!(again[1].scm.equations(), sources[1].scm.equations());
}

#[test]
fn altered_nodes_never_removes_protected_psa_nodes() {
    let spec = load_benchmark("psa").unwrap();
    for seed in 0..100 {
        let sources = make_sources(
            &spec,
            1,
            &ScenarioSpec::new(ScenarioKind::AlteredNodes, seed),
            0,
        )
        .unwrap();
        let dag = sources[0].scm.dag();
        for v in ["psa", "aspirin", "statin"] {
            assert!(dag.contains(v), "seed {seed} lost {v}");
        }
        assert_eq!(dag.len(), spec.dag.len() - 1);
        assert_eq!(sources[0].exploration.variables(), ["aspirin", "statin"]);
    }
}

#[test]
fn altered_edges_stay_acyclic_and_runnable() {
    let spec = load_benchmark("psa").unwrap();
    for seed in 0..20 {
        let sources = make_sources(
            &spec,
            1,
            &ScenarioSpec::new(ScenarioKind::AlteredEdges, seed),
            0,
        )
        .unwrap();
        let scm = &sources[0].scm;
        assert_ne!(scm.dag().edges(), spec.dag.edges(), "seed {seed}");
        scm.sample_observational(10, &mut RngState::new(seed))
            .unwrap();
    }
}

#[test]
fn crop_oracle_matches_the_closed_form() {
    let spec = load_benchmark("crop").unwrap();
    let r = ground_truth_oracle(
        &spec,
        &OracleSettings {
            grid_density: 201,
            samples: 10,
            seed: 0,
        },
    )
    .unwrap();
    // Output noise is off and Z is clamped, so the grid minimum is exact.
    let z = r.assignment["Z"];
    assert!((r.value - (z.cos() - (-z / 20.0).exp())).abs() < 1e-12);
    assert!((r.value + 2.17).abs() < 0.01, "{}", r.value);
    assert!((z + 3.2).abs() < 0.1);
}

#[test]
fn psa_oracle_is_near_the_reference() {
    let spec = load_benchmark("psa").unwrap();
    let r = ground_truth_oracle(
        &spec,
        &OracleSettings {
            grid_density: 11,
            samples: 20_000,
            seed: 0,
        },
    )
    .unwrap();
    assert!((r.value - 4.8).abs() < 0.5, "{}", r.value);
    assert_eq!(r.assignment["aspirin"], 0.0);
    assert_eq!(r.assignment["statin"], 1.0);
}

#[test]
fn mab_oracle_approaches_the_sigmoid_cap() {
    let spec = load_benchmark("mab").unwrap();
    let r = ground_truth_oracle(
        &spec,
        &OracleSettings {
            grid_density: 6,
            samples: 2000,
            seed: 0,
        },
    )
    .unwrap();
    assert!(r.value > 0.999 && r.value < 1.0, "{}", r.value);
    assert_eq!(r.assignment["T"], 30.0);
    assert_eq!(r.assignment["W"], 5.0);
}
