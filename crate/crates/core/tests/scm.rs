use std::collections::BTreeSet;

use mscbo::benchmarks::load_benchmark;
use mscbo::scm::file::ScmFile;
use mscbo::scm::{topo_order, Dag, DagSpec, Sample, Scm};
use mscbo::{Error, RngState};
use proptest::prelude::*;

fn crop() -> Scm {
    load_benchmark("crop").unwrap().scm.unwrap()
}

fn mean_of(samples: &[Sample], v: usize) -> f64 {
    samples.iter().map(|s| s.get(v).unwrap()).sum::<f64>() / samples.len() as f64
}

fn sd_of(samples: &[Sample], v: usize) -> f64 {
    let m = mean_of(samples, v);
    (samples
        .iter()
        .map(|s| (s.get(v).unwrap() - m).powi(2))
        .sum::<f64>()
        / (samples.len() - 1) as f64)
        .sqrt()
}

fn dag(nodes: &[&str], edges: &[(&str, &str)], output: &str) -> mscbo::Result<Dag> {
    Dag::new(DagSpec {
        nodes: nodes.iter().map(|s| s.to_string()).collect(),
        edges: edges
            .iter()
            .map(|(a, b)| (a.to_string(), b.to_string()))
            .collect(),
        output: output.into(),
        intervenable: BTreeSet::new(),
        non_manipulative: BTreeSet::new(),
        latent: BTreeSet::new(),
    })
}

#[test]
fn topo_order_examples() {
    assert_eq!(topo_order(crop().dag()), vec!["X", "Z", "Y"]);
    assert_eq!(topo_order(&dag(&["A"], &[], "A").unwrap()), vec!["A"]);
    assert!(matches!(
        dag(&["A", "B"], &[("A", "B"), ("B", "A")], "B"),
        Err(Error::CycleDetected(_))
    ));
    // Ties break lexicographically.
    assert_eq!(
        topo_order(
            &dag(
                &["c", "b", "a", "y"],
                &[("c", "y"), ("b", "y"), ("a", "y")],
                "y"
            )
            .unwrap()
        ),
        vec!["a", "b", "c", "y"]
    );
}

#[test]
fn psa_age_mean_matches_the_uniform_mean() {
    let scm = load_benchmark("psa").unwrap().scm.unwrap();
    let age = scm.dag().id("age").unwrap();
    let s = scm
        .sample_observational(100_000, &mut RngState::new(1))
        .unwrap();
    // U(55, 75): mean 65, sd 20/sqrt(12).
    let m = mean_of(&s, age);
    assert!((m - 65.0).abs() < 0.1, "{m}");
    assert!((sd_of(&s, age) - 20.0 / 12f64.sqrt()).abs() < 0.05);
}

#[test]
fn noiseless_crop_with_x_fixed_evaluates_by_hand() {
    let scm = crop().without_gaussian_noise();
    let a = scm.resolve_do(&[("X", 0.0)]).unwrap();
    let s = scm
        .sample_interventional(&a, 50, &mut RngState::new(2))
        .unwrap();
    let (z, y) = (scm.dag().id("Z").unwrap(), scm.dag().id("Y").unwrap());
    let expected = 1f64.cos() - (-1.0f64 / 20.0).exp();
    for sample in &s {
        assert_eq!(sample.get(z), Some(1.0));
        assert!((sample.get(y).unwrap() - expected).abs() < 1e-15);
    }
    // With all noise disabled the sample mean equals a single evaluation.
    let m = scm
        .interventional_mean(&a, 1000, &mut RngState::new(3))
        .unwrap();
    assert!((m - expected).abs() < 1e-12);
}

#[test]
fn sampling_is_deterministic() {
    let scm = crop();
    let a = scm.sample_observational(1, &mut RngState::new(9)).unwrap();
    let b = scm.sample_observational(1, &mut RngState::new(9)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn crop_intervention_converges_to_the_closed_form() {
    let scm = crop();
    let a = scm.resolve_do(&[("Z", -3.2)]).unwrap();
    let exact = (-3.2f64).cos() - (3.2f64 / 20.0).exp();
    let noiseless = scm
        .without_output_noise()
        .interventional_mean(&a, 1000, &mut RngState::new(0))
        .unwrap();
    assert!((noiseless + 2.17).abs() < 0.01, "{noiseless}");
    assert!((noiseless - exact).abs() < 1e-12);

    // With unit output noise the estimate stays within 3 sigma / sqrt(n).
    let n = 200_000;
    let noisy = scm
        .interventional_mean(&a, n, &mut RngState::new(4))
        .unwrap();
    assert!(
        (noisy - exact).abs() < 3.0 / (n as f64).sqrt(),
        "{noisy} vs {exact}"
    );
}

#[test]
fn mab_optimum_approaches_one_from_below() {
    let scm = load_benchmark("mab")
        .unwrap()
        .scm
        .unwrap()
        .without_output_noise();
    let a = scm.resolve_do(&[("T", 30.0), ("W", 5.0)]).unwrap();
    let m = scm
        .interventional_mean(&a, 20_000, &mut RngState::new(5))
        .unwrap();
    assert!(m < 1.0 && m > 0.99, "{m}");
}

#[test]
fn intervening_on_a_sink_leaves_other_marginals_unchanged() {
    // W is a sink, so do(W) must not move A or Y.
    let text = r#"{
        "nodes": ["A", "W", "Y"],
        "edges": [["A", "W"], ["A", "Y"]],
        "output": "Y",
        "intervenable": ["W"],
        "equations": {"A": "N(1, 1)", "W": "2 * A + N(0, 1)", "Y": "A + N(0, 0.5)"},
        "domains": {"W": [-10, 10]}
    }"#;
    let scm = ScmFile::from_json(text).unwrap().scm().unwrap();
    let n = 40_000;
    let obs = scm.sample_observational(n, &mut RngState::new(6)).unwrap();
    let a = scm.resolve_do(&[("W", 7.0)]).unwrap();
    let int = scm
        .sample_interventional(&a, n, &mut RngState::new(7))
        .unwrap();
    for name in ["A", "Y"] {
        let v = scm.dag().id(name).unwrap();
        let se = (sd_of(&obs, v).powi(2) / n as f64 + sd_of(&int, v).powi(2) / n as f64).sqrt();
        assert!(
            (mean_of(&obs, v) - mean_of(&int, v)).abs() < 3.0 * se,
            "{name}"
        );
    }
    let w = scm.dag().id("W").unwrap();
    assert!(int.iter().all(|s| s.get(w) == Some(7.0)));
}

#[test]
fn latent_nodes_are_hidden_in_samples() {
    let scm = load_benchmark("mab").unwrap().scm.unwrap();
    let s = scm.sample_observational(10, &mut RngState::new(0)).unwrap();
    for name in ["B", "Q"] {
        let v = scm.dag().id(name).unwrap();
        assert!(s.iter().all(|x| x.get(v).is_none()));
        assert!(!s[0].to_map(scm.dag()).contains_key(name));
    }
}

#[test]
fn do_errors() {
    let scm = crop();
    assert!(matches!(
        scm.resolve_do(&[("Y", 0.0)]).and_then(|a| scm.check_do(&a)),
        Err(Error::NotIntervenable(_))
    ));
    assert!(matches!(
        scm.resolve_do(&[("X", 6.0)]).and_then(|a| scm.check_do(&a)),
        Err(Error::DomainViolation { .. })
    ));
    assert!(matches!(
        scm.resolve_do(&[("nope", 0.0)]),
        Err(Error::UnknownNode(_))
    ));
}

#[test]
fn division_by_zero_is_an_evaluation_error() {
    let text = r#"{
        "nodes": ["X", "Y"],
        "edges": [["X", "Y"]],
        "output": "Y",
        "intervenable": ["X"],
        "equations": {"X": "N(0, 1)", "Y": "1 / X"},
        "domains": {"X": [-1, 1]}
    }"#;
    let scm = ScmFile::from_json(text).unwrap().scm().unwrap();
    let a = scm.resolve_do(&[("X", 0.0)]).unwrap();
    assert!(matches!(
        scm.sample_interventional(&a, 1, &mut RngState::new(0)),
        Err(Error::Evaluation { .. })
    ));
}

#[test]
fn bundled_files_round_trip() {
    for name in mscbo::benchmarks::names() {
        let file = ScmFile::from_json(mscbo::benchmarks::source_text(name).unwrap()).unwrap();
        if let Ok(scm) = file.scm() {
            let again = ScmFile::from_json(&ScmFile::from_scm(&scm).to_json())
                .unwrap()
                .scm()
                .unwrap();
            assert_eq!(again, scm, "{name}");
        } else {
            assert!(!file.is_runnable());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn sampling_is_a_pure_function_of_the_seed(seed in any::<u64>(), n in 1usize..20) {
        let scm = crop();
        let a = scm.sample_observational(n, &mut RngState::new(seed)).unwrap();
        let b = scm.sample_observational(n, &mut RngState::new(seed)).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn interventions_clamp_exactly(z in -5.0f64..5.0, x in -5.0f64..5.0, seed in any::<u64>()) {
        let scm = crop();
        let a = scm.resolve_do(&[("Z", z), ("X", x)]).unwrap();
        for s in scm.sample_interventional(&a, 5, &mut RngState::new(seed)).unwrap() {
            prop_assert_eq!(s.get(scm.dag().id("Z").unwrap()), Some(z));
            prop_assert_eq!(s.get(scm.dag().id("X").unwrap()), Some(x));
        }
    }
}
