//! Source mutations: perturbed mechanisms, rewired edges and removed nodes.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Dag, EquationRhs, Expr, Scm};
use crate::error::{Error, Result};
use crate::graph::{enumerate_pomis, ExplorationSet, SourceId};
use crate::rng::RngState;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    #[default]
    Base,
    AlteredSem,
    AlteredEdges,
    AlteredNodes,
}

impl ScenarioKind {
    pub fn parse(s: &str) -> Option<ScenarioKind> {
        match s {
            "base" | "0" => Some(ScenarioKind::Base),
            "altered_sem" | "1" => Some(ScenarioKind::AlteredSem),
            "altered_edges" | "2" => Some(ScenarioKind::AlteredEdges),
            "altered_nodes" | "3" => Some(ScenarioKind::AlteredNodes),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioSpec {
    pub kind: ScenarioKind,
    pub mutation_seed: u64,
    pub coefficient_jitter: f64,
    pub edge_flip_count: usize,
    pub node_removal_count: usize,
}

impl Default for ScenarioSpec {
    fn default() -> Self {
        ScenarioSpec {
            kind: ScenarioKind::Base,
            mutation_seed: 0,
            coefficient_jitter: 0.2,
            edge_flip_count: 1,
            node_removal_count: 1,
        }
    }
}

impl ScenarioSpec {
    pub fn new(kind: ScenarioKind, mutation_seed: u64) -> Self {
        ScenarioSpec {
            kind,
            mutation_seed,
            ..ScenarioSpec::default()
        }
    }
}

/// Output node plus every member of every POMIS over the intervenable set.
pub fn protected_nodes(dag: &Dag) -> BTreeSet<usize> {
    let mut out = BTreeSet::from([dag.output()]);
    let names: Vec<String> = dag
        .intervenable()
        .iter()
        .map(|&v| dag.name(v).to_string())
        .collect();
    if let Ok(ex) = ExplorationSet::new(dag, names, SourceId(0)) {
        if let Ok(sets) = enumerate_pomis(dag, &ex) {
            for p in sets {
                for v in &p.variables {
                    out.insert(dag.id(v).expect("POMIS member is a node"));
                }
            }
        }
    }
    out
}

pub fn apply_scenario(scm: &Scm, spec: &ScenarioSpec) -> Result<Scm> {
    let mut rng = RngState::derive(spec.mutation_seed, &[0x5CE4, spec.kind as u64]);
    match spec.kind {
        ScenarioKind::Base => Ok(scm.clone()),
        ScenarioKind::AlteredSem => {
            let j = spec.coefficient_jitter;
            if !(0.0..1.0).contains(&j) {
                return Err(Error::MutationInfeasible(format!(
                    "coefficient jitter must lie in [0, 1), got {j}"
                )));
            }
            scm.map_equations(|_, eq| EquationRhs {
                expr: eq
                    .expr
                    .map_constants(&mut |c| c * (1.0 + rng.random_range(-j..=j))),
                noise: eq.noise,
            })
        }
        ScenarioKind::AlteredEdges => alter_edges(scm, spec.edge_flip_count, &mut rng),
        ScenarioKind::AlteredNodes => remove_nodes(scm, spec.node_removal_count, &mut rng),
    }
}

/// Add `coef * parent` to an equation, inside a top-level link function.
fn add_term(expr: &Expr, parent: &str, coef: f64) -> Expr {
    let term = Expr::Mul(Box::new(Expr::Const(coef)), Box::new(Expr::var(parent)));
    match expr {
        Expr::Call(f, arg) => Expr::Call(*f, Box::new(Expr::Add(arg.clone(), Box::new(term)))),
        e if e.is_zero() => term,
        e => Expr::Add(Box::new(e.clone()), Box::new(term)),
    }
}

fn output_reachable(dag: &Dag) -> bool {
    dag.intervenable()
        .iter()
        .any(|&v| dag.reaches(v, dag.output()))
}

fn alter_edges(scm: &Scm, flips: usize, rng: &mut RngState) -> Result<Scm> {
    let mut current = scm.clone();
    for _ in 0..flips {
        let dag = current.dag();
        let observed: Vec<usize> = (0..dag.len()).filter(|v| !dag.is_latent(*v)).collect();
        let mut additions = Vec::new();
        for &a in &observed {
            for &b in &observed {
                if a != b && !dag.has_edge(a, b) && !dag.reaches(b, a) {
                    additions.push((a, b));
                }
            }
        }
        let mut removals: Vec<(usize, usize)> = Vec::new();
        for &b in &observed {
            for &a in dag.parents(b) {
                if !dag.is_latent(a) {
                    removals.push((a, b));
                }
            }
        }
        removals.shuffle(rng);
        let try_add = rng.random_bool(0.5);
        let mut next = None;
        let attempts: [bool; 2] = if try_add {
            [true, false]
        } else {
            [false, true]
        };
        for add in attempts {
            if add {
                if let Some(&(a, b)) = additions.choose(rng) {
                    let coef =
                        rng.random_range(0.05..0.2) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                    next = Some(rewire(&current, (a, b), true, coef)?);
                    break;
                }
            } else {
                for &(a, b) in &removals {
                    let cand = rewire(&current, (a, b), false, 0.0)?;
                    if output_reachable(cand.dag()) {
                        next = Some(cand);
                        break;
                    }
                }
                if next.is_some() {
                    break;
                }
            }
        }
        current = next.ok_or_else(|| {
            Error::MutationInfeasible(
                "no edge can be added or removed without breaking constraints".into(),
            )
        })?;
    }
    Ok(current)
}

fn rewire(scm: &Scm, (a, b): (usize, usize), add: bool, coef: f64) -> Result<Scm> {
    let dag = scm.dag();
    let (pa, ch) = (dag.name(a).to_string(), dag.name(b).to_string());
    let mut spec = dag.to_spec();
    let mut eqs = scm.equation_map();
    let eq = eqs.get_mut(&ch).expect("every node has an equation");
    if add {
        spec.edges.push((pa.clone(), ch.clone()));
        eq.expr = add_term(&eq.expr, &pa, coef);
    } else {
        spec.edges.retain(|e| *e != (pa.clone(), ch.clone()));
        eq.expr = eq.expr.drop_variable(&pa);
    }
    Scm::new(Dag::new(spec)?, eqs, scm.domain_map()).map(|s| s.with_seed(scm.rng_seed))
}

fn remove_nodes(scm: &Scm, count: usize, rng: &mut RngState) -> Result<Scm> {
    let dag = scm.dag();
    let protected = protected_nodes(dag);
    let candidates: Vec<usize> = (0..dag.len())
        .filter(|v| !protected.contains(v) && !dag.is_latent(*v))
        .collect();
    if candidates.len() < count {
        return Err(Error::MutationInfeasible(format!(
            "{count} node removals requested but only {} nodes are removable",
            candidates.len()
        )));
    }
    let removed: BTreeSet<String> = candidates
        .choose_multiple(rng, count)
        .map(|&v| dag.name(v).to_string())
        .collect();
    let mut spec = dag.to_spec();
    spec.nodes.retain(|n| !removed.contains(n));
    spec.edges
        .retain(|(p, c)| !removed.contains(p) && !removed.contains(c));
    for set in [
        &mut spec.intervenable,
        &mut spec.non_manipulative,
        &mut spec.latent,
    ] {
        set.retain(|n| !removed.contains(n));
    }
    let mut eqs: BTreeMap<String, EquationRhs> = scm.equation_map();
    eqs.retain(|n, _| !removed.contains(n));
    for eq in eqs.values_mut() {
        for r in &removed {
            if eq.expr.references(r) {
                eq.expr = eq.expr.drop_variable(r);
            }
        }
    }
    let mut domains = scm.domain_map();
    domains.retain(|n, _| !removed.contains(n));
    Scm::new(Dag::new(spec)?, eqs, domains).map(|s| s.with_seed(scm.rng_seed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scm::file::ScmFile;

    fn psa() -> Scm {
        ScmFile::from_json(include_str!("../../benchmarks/psa.json"))
            .unwrap()
            .scm()
            .unwrap()
    }

    #[test]
    fn base_is_identity() {
        let scm = psa();
        assert_eq!(apply_scenario(&scm, &ScenarioSpec::default()).unwrap(), scm);
    }

    #[test]
    fn altered_sem_keeps_edges_and_is_deterministic() {
        let scm = psa();
        let spec = ScenarioSpec::new(ScenarioKind::AlteredSem, 3);
        let a = apply_scenario(&scm, &spec).unwrap();
        let b = apply_scenario(&scm, &spec).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.dag(), scm.dag());
        assert_ne!(a.equations(), scm.equations());
        for (x, y) in a.equations().iter().zip(scm.equations()) {
            for (cx, cy) in x.expr.constants().iter().zip(y.expr.constants()) {
                assert!((cx - cy).abs() <= 0.2 * cy.abs() + 1e-12);
            }
        }
    }

    #[test]
    fn node_removal_spares_output_and_pomis() {
        let scm = psa();
        for seed in 0..20 {
            let m =
                apply_scenario(&scm, &ScenarioSpec::new(ScenarioKind::AlteredNodes, seed)).unwrap();
            assert_eq!(m.dag().len(), 5);
            for keep in ["psa", "aspirin", "statin"] {
                assert!(m.dag().contains(keep));
            }
        }
        let spec = ScenarioSpec {
            node_removal_count: 4,
            ..ScenarioSpec::new(ScenarioKind::AlteredNodes, 0)
        };
        assert!(matches!(
            apply_scenario(&scm, &spec),
            Err(Error::MutationInfeasible(_))
        ));
    }

    #[test]
    fn edge_flips_keep_the_graph_acyclic_and_consistent() {
        let scm = psa();
        for seed in 0..20 {
            let spec = ScenarioSpec {
                edge_flip_count: 2,
                ..ScenarioSpec::new(ScenarioKind::AlteredEdges, seed)
            };
            let m = apply_scenario(&scm, &spec).unwrap();
            let diff = m.dag().edge_count() as i64 - scm.dag().edge_count() as i64;
            assert!(diff.abs() <= 2);
            let one =
                apply_scenario(&scm, &ScenarioSpec::new(ScenarioKind::AlteredEdges, seed)).unwrap();
            assert_eq!(
                (one.dag().edge_count() as i64 - scm.dag().edge_count() as i64).abs(),
                1
            );
            let mut rng = RngState::new(seed);
            m.sample_observational(5, &mut rng).unwrap();
        }
    }
}
