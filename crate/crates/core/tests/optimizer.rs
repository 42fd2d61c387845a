mod common;

use common::{check_ledger, run_benchmark};
use mscbo::acquisition::CkgSettings;
use mscbo::benchmarks::load_benchmark;
use mscbo::harness::RunConfig;
use mscbo::optimizer::{
    decide_action, epsilon, Action, Algorithm, BudgetLedger, EpsilonPolicy, RunResult,
};
use mscbo::Error;
use proptest::prelude::*;

fn quick(benchmark: &str, budget: f64) -> RunConfig {
    RunConfig {
        benchmark: benchmark.into(),
        budget,
        ckg: CkgSettings {
            fantasies: 16,
            grid_points: 16,
            refine_steps: 3,
            seed: 0,
        },
        eval_samples: 400,
        ..RunConfig::default()
    }
}

fn go(benchmark: &str, alg: Algorithm, budget: f64, seed: u64) -> RunResult {
    let config = quick(benchmark, budget);
    let spec = load_benchmark(benchmark).unwrap();
    let r = run_benchmark(&spec, &config, alg, seed).unwrap();
    check_ledger(&r, spec.objective, config.sources).unwrap();
    r
}

fn intervention_costs(r: &RunResult) -> Vec<f64> {
    r.trace.interventions().map(|row| row.step_cost).collect()
}

#[test]
fn epsilon_examples() {
    let p = EpsilonPolicy {
        n_max: 100,
        k_obs: 20,
    };
    assert_eq!(epsilon(&p, &[], &[(0.0, 10.0)]).unwrap(), 1.0);
    let e = epsilon(&p, &[vec![2.0], vec![7.0]], &[(0.0, 10.0)]).unwrap();
    assert!((e - 0.5 * 0.02).abs() < 1e-15);
    let full: Vec<Vec<f64>> = (0..100).map(|i| vec![10.0 * i as f64 / 99.0]).collect();
    assert_eq!(epsilon(&p, &full, &[(0.0, 10.0)]).unwrap(), 1.0);
    assert!(matches!(
        epsilon(&p, &[], &[(1.0, 1.0)]),
        Err(Error::DegenerateDomain(0))
    ));
}

#[test]
fn action_examples() {
    let p = EpsilonPolicy::default();
    assert_eq!(decide_action(1.0, 0.999, 0, &p), Action::Observe);
    for theta in [0.0, 0.3, 0.99] {
        assert_eq!(decide_action(0.0, theta, 0, &p), Action::Intervene);
    }
    assert_eq!(decide_action(0.5, 0.7, 10, &p), Action::Intervene);
    assert_eq!(decide_action(1.0, 0.0, p.n_max, &p), Action::Intervene);
}

#[test]
fn psa_costs_and_sets() {
    let m = go("psa", Algorithm::Mscbo, 250.0, 0);
    let c = go("psa", Algorithm::Cbo, 250.0, 0);
    let b = go("psa", Algorithm::Msbo, 250.0, 0);
    for r in [&m, &c, &b] {
        assert_eq!(r.trace.rows[0].action, Action::Observe);
        assert!(!intervention_costs(r).is_empty());
    }
    assert!(intervention_costs(&m).iter().all(|&x| x == 40.0));
    assert!(intervention_costs(&c).iter().all(|&x| x == 80.0));
    assert!(intervention_costs(&b).iter().all(|&x| x == 40.0));
    for r in [&m, &b] {
        for row in r.trace.interventions() {
            assert_eq!(row.entries[0].variables, ["aspirin", "statin"]);
        }
    }
}

#[test]
fn mab_costs_are_two_four_five() {
    for (alg, cost) in [
        (Algorithm::Mscbo, 40.0),
        (Algorithm::Cbo, 80.0),
        (Algorithm::Msbo, 100.0),
    ] {
        let r = go("mab", alg, 300.0, 1);
        let costs = intervention_costs(&r);
        assert!(!costs.is_empty(), "{alg}");
        assert!(costs.iter().all(|&x| x == cost), "{alg}: {costs:?}");
    }
}

#[test]
fn crop_costs_are_twenty_and_forty() {
    assert!(intervention_costs(&go("crop", Algorithm::Mscbo, 200.0, 2))
        .iter()
        .all(|&x| x == 20.0));
    assert!(intervention_costs(&go("crop", Algorithm::Msbo, 200.0, 2))
        .iter()
        .all(|&x| x == 40.0));
}

#[test]
fn cbo_interventions_write_every_source() {
    let r = go("crop", Algorithm::Cbo, 200.0, 4);
    for row in r.trace.interventions() {
        assert_eq!(row.entries.len(), 2);
        assert_eq!(row.models_updated.len(), 2);
    }
}

#[test]
fn best_intervention_matches_the_best_value() {
    let r = go("crop", Algorithm::Mscbo, 200.0, 3);
    let best = r.best_intervention.as_ref().unwrap();
    assert_eq!(best.variables, ["Z"]);
    let hit = r
        .trace
        .interventions()
        .flat_map(|row| &row.entries)
        .any(|e| e.values == best.values && e.source == best.source_id);
    assert!(hit);
    assert_eq!(r.best_source, Some(best.source_id));
}

#[test]
fn zero_budget_is_rejected() {
    assert!(BudgetLedger::new(20.0, 1.0, 0.0).is_err());
    assert!(BudgetLedger::new(0.0, 1.0, 10.0).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn epsilon_stays_in_the_unit_interval(
        pts in prop::collection::vec(prop::collection::vec(-2.0f64..12.0, 2), 0..60),
        n_max in 1usize..100,
    ) {
        let p = EpsilonPolicy { n_max, k_obs: 5 };
        let e = epsilon(&p, &pts, &[(0.0, 10.0), (0.0, 10.0)]).unwrap();
        prop_assert!((0.0..=1.0).contains(&e));
        prop_assert_eq!(e == 1.0 && pts.is_empty(), pts.is_empty());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn ledger_invariants_hold_for_any_seed(seed in any::<u64>(), alg in 0usize..3, budget in 30.0f64..160.0) {
        go("crop", Algorithm::ALL[alg], budget, seed);
    }
}
