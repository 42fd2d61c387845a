//! Structural causal models: DAGs, equations, sampling and do-interventions.

pub mod expr;
pub mod file;
pub mod scenario;

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap, HashMap};

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::rng::RngState;

pub use expr::{EquationRhs, Expr, Func, NoiseSpec, Program};
pub use scenario::{apply_scenario, ScenarioKind, ScenarioSpec};

/// Directed acyclic graph over named nodes.
///
/// Nodes are addressed by dense indices in declaration order; names are kept
/// for display and file I/O. Latent nodes are simulated but never reported.
#[derive(Debug, Clone, PartialEq)]
pub struct Dag {
    names: Vec<String>,
    index: HashMap<String, usize>,
    parents: Vec<Vec<usize>>,
    children: Vec<Vec<usize>>,
    output: usize,
    intervenable: BTreeSet<usize>,
    non_manipulative: BTreeSet<usize>,
    latent: BTreeSet<usize>,
    order: Vec<usize>,
}

/// Plain description of a DAG, used to build or rebuild one.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DagSpec {
    pub nodes: Vec<String>,
    pub edges: Vec<(String, String)>,
    pub output: String,
    pub intervenable: BTreeSet<String>,
    pub non_manipulative: BTreeSet<String>,
    pub latent: BTreeSet<String>,
}

impl Dag {
    pub fn new(spec: DagSpec) -> Result<Dag> {
        let mut index = HashMap::new();
        for (i, n) in spec.nodes.iter().enumerate() {
            if n.is_empty() {
                return Err(Error::InvalidGraph("empty node name".into()));
            }
            if index.insert(n.clone(), i).is_some() {
                return Err(Error::InvalidGraph(format!("duplicate node `{n}`")));
            }
        }
        let lookup = |n: &str| {
            index
                .get(n)
                .copied()
                .ok_or_else(|| Error::UnknownNode(n.to_string()))
        };
        let len = spec.nodes.len();
        let mut parents = vec![Vec::new(); len];
        let mut children = vec![Vec::new(); len];
        for (p, c) in &spec.edges {
            let (p, c) = (lookup(p)?, lookup(c)?);
            if p == c {
                return Err(Error::CycleDetected(spec.nodes[p].clone()));
            }
            if !parents[c].contains(&p) {
                parents[c].push(p);
                children[p].push(c);
            }
        }
        let set = |names: &BTreeSet<String>| -> Result<BTreeSet<usize>> {
            names.iter().map(|n| lookup(n)).collect()
        };
        let output = lookup(&spec.output)?;
        let intervenable = set(&spec.intervenable)?;
        let non_manipulative = set(&spec.non_manipulative)?;
        let latent = set(&spec.latent)?;
        if intervenable.contains(&output) {
            return Err(Error::InvalidGraph(format!(
                "output `{}` cannot be intervenable",
                spec.output
            )));
        }
        if let Some(&v) = intervenable.intersection(&non_manipulative).next() {
            return Err(Error::InvalidGraph(format!(
                "`{}` is both intervenable and non-manipulative",
                spec.nodes[v]
            )));
        }
        if let Some(&v) = latent
            .iter()
            .find(|v| intervenable.contains(v) || **v == output)
        {
            return Err(Error::InvalidGraph(format!(
                "latent node `{}` cannot be the output or intervenable",
                spec.nodes[v]
            )));
        }
        for ps in parents.iter_mut() {
            ps.sort_unstable();
        }
        for cs in children.iter_mut() {
            cs.sort_unstable();
        }
        let mut dag = Dag {
            names: spec.nodes,
            index,
            parents,
            children,
            output,
            intervenable,
            non_manipulative,
            latent,
            order: Vec::new(),
        };
        dag.order = dag.compute_topo_order()?;
        Ok(dag)
    }

    /// Kahn's algorithm with a min-heap on names for deterministic ties.
    fn compute_topo_order(&self) -> Result<Vec<usize>> {
        let mut indegree: Vec<usize> = self.parents.iter().map(Vec::len).collect();
        let mut ready: BinaryHeap<Reverse<(&str, usize)>> = indegree
            .iter()
            .enumerate()
            .filter(|(_, d)| **d == 0)
            .map(|(i, _)| Reverse((self.names[i].as_str(), i)))
            .collect();
        let mut order = Vec::with_capacity(self.len());
        while let Some(Reverse((_, v))) = ready.pop() {
            order.push(v);
            for &c in &self.children[v] {
                indegree[c] -= 1;
                if indegree[c] == 0 {
                    ready.push(Reverse((self.names[c].as_str(), c)));
                }
            }
        }
        if order.len() < self.len() {
            let stuck = (0..self.len())
                .filter(|v| indegree[*v] > 0)
                .min_by(|a, b| self.names[*a].cmp(&self.names[*b]))
                .expect("some node is on a cycle");
            return Err(Error::CycleDetected(self.names[stuck].clone()));
        }
        Ok(order)
    }

    pub fn to_spec(&self) -> DagSpec {
        let names = |s: &BTreeSet<usize>| s.iter().map(|&i| self.names[i].clone()).collect();
        DagSpec {
            nodes: self.names.clone(),
            edges: self.edges(),
            output: self.names[self.output].clone(),
            intervenable: names(&self.intervenable),
            non_manipulative: names(&self.non_manipulative),
            latent: names(&self.latent),
        }
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, v: usize) -> &str {
        &self.names[v]
    }

    pub fn id(&self, name: &str) -> Result<usize> {
        self.index
            .get(name)
            .copied()
            .ok_or_else(|| Error::UnknownNode(name.to_string()))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.index.contains_key(name)
    }

    pub fn parents(&self, v: usize) -> &[usize] {
        &self.parents[v]
    }

    pub fn children(&self, v: usize) -> &[usize] {
        &self.children[v]
    }

    /// Edges as `(parent, child)` name pairs, ordered by child then parent index.
    pub fn edges(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        for c in 0..self.len() {
            for &p in &self.parents[c] {
                out.push((self.names[p].clone(), self.names[c].clone()));
            }
        }
        out
    }

    pub fn edge_count(&self) -> usize {
        self.parents.iter().map(Vec::len).sum()
    }

    pub fn has_edge(&self, parent: usize, child: usize) -> bool {
        self.parents[child].contains(&parent)
    }

    pub fn output(&self) -> usize {
        self.output
    }

    pub fn output_name(&self) -> &str {
        &self.names[self.output]
    }

    pub fn intervenable(&self) -> &BTreeSet<usize> {
        &self.intervenable
    }

    pub fn non_manipulative(&self) -> &BTreeSet<usize> {
        &self.non_manipulative
    }

    pub fn latent(&self) -> &BTreeSet<usize> {
        &self.latent
    }

    pub fn is_intervenable(&self, v: usize) -> bool {
        self.intervenable.contains(&v)
    }

    pub fn is_latent(&self, v: usize) -> bool {
        self.latent.contains(&v)
    }

    /// Parent-first order; ties broken lexicographically by name.
    pub fn topo_order(&self) -> &[usize] {
        &self.order
    }

    pub fn topo_names(&self) -> Vec<&str> {
        self.order.iter().map(|&v| self.names[v].as_str()).collect()
    }

    /// Whether there is a directed path `from -> ... -> to` (length ≥ 1).
    pub fn reaches(&self, from: usize, to: usize) -> bool {
        let mut seen = vec![false; self.len()];
        let mut stack = self.children[from].clone();
        while let Some(v) = stack.pop() {
            if v == to {
                return true;
            }
            if !std::mem::replace(&mut seen[v], true) {
                stack.extend_from_slice(&self.children[v]);
            }
        }
        false
    }

    /// Shortest directed path length (edge count) from `from` to `to`.
    pub fn distance(&self, from: usize, to: usize) -> Option<usize> {
        if from == to {
            return Some(0);
        }
        let mut dist = vec![usize::MAX; self.len()];
        dist[from] = 0;
        let mut queue = std::collections::VecDeque::from([from]);
        while let Some(v) = queue.pop_front() {
            for &c in &self.children[v] {
                if dist[c] == usize::MAX {
                    dist[c] = dist[v] + 1;
                    if c == to {
                        return Some(dist[c]);
                    }
                    queue.push_back(c);
                }
            }
        }
        None
    }
}

/// Convenience: topological order of a DAG as names.
pub fn topo_order(dag: &Dag) -> Vec<String> {
    dag.topo_names().into_iter().map(String::from).collect()
}

/// One draw of every node. Latent nodes hold `NaN` and are reported as absent.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub values: Vec<f64>,
}

impl Sample {
    pub fn get(&self, v: usize) -> Option<f64> {
        self.values.get(v).copied().filter(|x| !x.is_nan())
    }

    /// Values keyed by name, latent nodes omitted.
    pub fn to_map(&self, dag: &Dag) -> BTreeMap<String, f64> {
        self.values
            .iter()
            .enumerate()
            .filter(|(_, x)| !x.is_nan())
            .map(|(i, x)| (dag.name(i).to_string(), *x))
            .collect()
    }
}

/// A DAG with one structural equation per node.
#[derive(Debug, Clone, PartialEq)]
pub struct Scm {
    dag: Dag,
    equations: Vec<EquationRhs>,
    programs: Vec<Program>,
    domains: BTreeMap<usize, (f64, f64)>,
    pub rng_seed: u64,
}

impl Scm {
    /// Build from a DAG, equations keyed by node name, and optional
    /// interventional domains.
    pub fn new(
        dag: Dag,
        equations: BTreeMap<String, EquationRhs>,
        domains: BTreeMap<String, (f64, f64)>,
    ) -> Result<Scm> {
        let mut eqs: Vec<Option<EquationRhs>> = vec![None; dag.len()];
        for (name, rhs) in equations {
            let v = dag.id(&name)?;
            eqs[v] = Some(rhs);
        }
        let mut equations = Vec::with_capacity(dag.len());
        let mut programs = Vec::with_capacity(dag.len());
        for (v, eq) in eqs.into_iter().enumerate() {
            let node = dag.name(v).to_string();
            let rhs = eq.ok_or_else(|| Error::InvalidEquation {
                node: node.clone(),
                reason: "missing equation".into(),
            })?;
            let index: HashMap<String, usize> = dag
                .parents(v)
                .iter()
                .map(|&p| (dag.name(p).to_string(), p))
                .collect();
            let program = rhs
                .expr
                .compile(&index)
                .map_err(|reason| Error::InvalidEquation {
                    node: node.clone(),
                    reason: format!("{reason} (only parents may appear)"),
                })?;
            equations.push(rhs);
            programs.push(program);
        }
        let mut doms = BTreeMap::new();
        for (name, (lo, hi)) in domains {
            let v = dag.id(&name)?;
            if !dag.is_intervenable(v) {
                return Err(Error::NotIntervenable(name));
            }
            if !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
                return Err(Error::InvalidConfig(format!(
                    "domain of `{name}` must satisfy lo <= hi, got [{lo}, {hi}]"
                )));
            }
            doms.insert(v, (lo, hi));
        }
        Ok(Scm {
            dag,
            equations,
            programs,
            domains: doms,
            rng_seed: 0,
        })
    }

    pub fn with_seed(mut self, seed: u64) -> Scm {
        self.rng_seed = seed;
        self
    }

    pub fn dag(&self) -> &Dag {
        &self.dag
    }

    pub fn equation(&self, v: usize) -> &EquationRhs {
        &self.equations[v]
    }

    pub fn equations(&self) -> &[EquationRhs] {
        &self.equations
    }

    /// Equations keyed by node name.
    pub fn equation_map(&self) -> BTreeMap<String, EquationRhs> {
        self.equations
            .iter()
            .enumerate()
            .map(|(v, e)| (self.dag.name(v).to_string(), e.clone()))
            .collect()
    }

    pub fn domain(&self, v: usize) -> Option<(f64, f64)> {
        self.domains.get(&v).copied()
    }

    pub fn domains(&self) -> &BTreeMap<usize, (f64, f64)> {
        &self.domains
    }

    pub fn domain_map(&self) -> BTreeMap<String, (f64, f64)> {
        self.domains
            .iter()
            .map(|(&v, &d)| (self.dag.name(v).to_string(), d))
            .collect()
    }

    /// Rebuild with a transformed set of equations (same DAG and domains).
    pub fn map_equations(
        &self,
        mut f: impl FnMut(usize, &EquationRhs) -> EquationRhs,
    ) -> Result<Scm> {
        let eqs = self
            .equations
            .iter()
            .enumerate()
            .map(|(v, e)| (self.dag.name(v).to_string(), f(v, e)))
            .collect();
        Ok(Scm::new(self.dag.clone(), eqs, self.domain_map())?.with_seed(self.rng_seed))
    }

    /// Copy with every Gaussian noise term switched off.
    pub fn without_gaussian_noise(&self) -> Scm {
        self.map_equations(|_, e| EquationRhs {
            expr: e.expr.clone(),
            noise: match e.noise {
                NoiseSpec::Gaussian { .. } => NoiseSpec::Gaussian { sd: 0.0 },
                NoiseSpec::AdditiveGaussian { .. } => NoiseSpec::AdditiveGaussian { sd: 0.0 },
                other => other,
            },
        })
        .expect("noise change keeps the model valid")
    }

    /// Copy whose output equation is replaced by its conditional mean.
    ///
    /// Zero-mean noise on the output does not move interventional means, so
    /// ground-truth estimates use this to cut Monte-Carlo variance.
    pub fn without_output_noise(&self) -> Scm {
        let out = self.dag.output();
        self.map_equations(|v, e| {
            if v != out {
                return e.clone();
            }
            match e.noise {
                NoiseSpec::Uniform { lo, hi } => EquationRhs {
                    expr: Expr::Add(
                        Box::new(e.expr.clone()),
                        Box::new(Expr::Const(0.5 * (lo + hi))),
                    ),
                    noise: NoiseSpec::None,
                },
                _ => EquationRhs {
                    expr: e.expr.clone(),
                    noise: NoiseSpec::None,
                },
            }
        })
        .expect("noise change keeps the model valid")
    }

    /// Resolve a named assignment, checking intervenability and domains.
    pub fn resolve_do(&self, assignment: &[(&str, f64)]) -> Result<Vec<(usize, f64)>> {
        let pairs: Vec<(usize, f64)> = assignment
            .iter()
            .map(|(n, x)| Ok((self.dag.id(n)?, *x)))
            .collect::<Result<_>>()?;
        self.check_do(&pairs)?;
        Ok(pairs)
    }

    pub fn check_do(&self, assignment: &[(usize, f64)]) -> Result<()> {
        for &(v, x) in assignment {
            if !self.dag.is_intervenable(v) {
                return Err(Error::NotIntervenable(self.dag.name(v).to_string()));
            }
            if let Some((lo, hi)) = self.domain(v) {
                if !(x >= lo && x <= hi) {
                    return Err(Error::DomainViolation {
                        node: self.dag.name(v).to_string(),
                        value: x,
                        lo,
                        hi,
                    });
                }
            }
        }
        Ok(())
    }

    /// Evaluate all nodes once into `buf`; clamped nodes skip their equation.
    ///
    /// `clamp[v]` is `Some(x)` for intervened nodes. Latent nodes are
    /// evaluated (their values feed children) and masked by the caller.
    pub fn simulate_into(
        &self,
        clamp: &[Option<f64>],
        rng: &mut RngState,
        buf: &mut [f64],
        stack: &mut Vec<f64>,
    ) -> Result<()> {
        for &v in self.dag.topo_order() {
            if let Some(x) = clamp[v] {
                buf[v] = x;
                continue;
            }
            let base = self.programs[v]
                .eval(buf, &[], stack)
                .map_err(|r| Error::Evaluation {
                    node: self.dag.name(v).to_string(),
                    reason: r.to_string(),
                })?;
            let value = match self.equations[v].noise {
                NoiseSpec::None => base,
                NoiseSpec::Gaussian { sd } | NoiseSpec::AdditiveGaussian { sd } => {
                    let z: f64 = rng.sample(StandardNormal);
                    base + sd * z
                }
                NoiseSpec::Uniform { lo, hi } => base + lo + (hi - lo) * rng.random::<f64>(),
            };
            if !value.is_finite() {
                return Err(Error::Evaluation {
                    node: self.dag.name(v).to_string(),
                    reason: "non-finite value".into(),
                });
            }
            buf[v] = value;
        }
        Ok(())
    }

    fn clamp_vector(&self, assignment: &[(usize, f64)]) -> Vec<Option<f64>> {
        let mut clamp = vec![None; self.dag.len()];
        for &(v, x) in assignment {
            clamp[v] = Some(x);
        }
        clamp
    }

    fn draw(&self, clamp: &[Option<f64>], n: usize, rng: &mut RngState) -> Result<Vec<Sample>> {
        let mut out = Vec::with_capacity(n);
        let mut stack = Vec::new();
        for _ in 0..n {
            let mut values = vec![0.0; self.dag.len()];
            self.simulate_into(clamp, rng, &mut values, &mut stack)?;
            for &l in self.dag.latent() {
                values[l] = f64::NAN;
            }
            out.push(Sample { values });
        }
        Ok(out)
    }

    pub fn sample_observational(&self, n: usize, rng: &mut RngState) -> Result<Vec<Sample>> {
        self.draw(&vec![None; self.dag.len()], n, rng)
    }

    pub fn sample_interventional(
        &self,
        assignment: &[(usize, f64)],
        n: usize,
        rng: &mut RngState,
    ) -> Result<Vec<Sample>> {
        self.check_do(assignment)?;
        self.draw(&self.clamp_vector(assignment), n, rng)
    }

    /// Monte-Carlo mean of the output under `do(assignment)`, without
    /// materialising samples.
    pub fn interventional_mean(
        &self,
        assignment: &[(usize, f64)],
        n: usize,
        rng: &mut RngState,
    ) -> Result<f64> {
        self.check_do(assignment)?;
        let clamp = self.clamp_vector(assignment);
        let mut buf = vec![0.0; self.dag.len()];
        let mut stack = Vec::new();
        let out = self.dag.output();
        let mut sum = 0.0;
        for _ in 0..n {
            self.simulate_into(&clamp, rng, &mut buf, &mut stack)?;
            sum += buf[out];
        }
        Ok(sum / n as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn chain_dag(edges: &[(&str, &str)], nodes: &[&str], output: &str) -> Result<Dag> {
        Dag::new(DagSpec {
            nodes: nodes.iter().map(|s| s.to_string()).collect(),
            edges: edges
                .iter()
                .map(|(a, b)| (a.to_string(), b.to_string()))
                .collect(),
            output: output.to_string(),
            ..DagSpec::default()
        })
    }

    #[test]
    fn topo_order_breaks_ties_by_name() {
        let dag = chain_dag(
            &[("b", "y"), ("a", "y"), ("c", "b")],
            &["y", "c", "b", "a"],
            "y",
        )
        .unwrap();
        assert_eq!(dag.topo_names(), vec!["a", "c", "b", "y"]);
    }

    #[test]
    fn cycles_are_rejected() {
        let err = chain_dag(&[("A", "B"), ("B", "A")], &["A", "B"], "B").unwrap_err();
        assert!(matches!(err, Error::CycleDetected(_)));
        let err = chain_dag(&[("A", "A")], &["A"], "A").unwrap_err();
        assert!(matches!(err, Error::CycleDetected(_)));
    }

    #[test]
    fn structural_invariants_are_checked() {
        let base = DagSpec {
            nodes: vec!["x".into(), "y".into()],
            edges: vec![("x".into(), "y".into())],
            output: "y".into(),
            ..DagSpec::default()
        };
        let mut s = base.clone();
        s.intervenable.insert("y".into());
        assert!(Dag::new(s).is_err());
        let mut s = base.clone();
        s.intervenable.insert("x".into());
        s.non_manipulative.insert("x".into());
        assert!(Dag::new(s).is_err());
        let mut s = base;
        s.edges.push(("x".into(), "q".into()));
        assert!(matches!(Dag::new(s), Err(Error::UnknownNode(_))));
    }

    #[test]
    fn distances_follow_shortest_directed_paths() {
        let dag = chain_dag(&[("a", "b"), ("b", "c"), ("a", "c")], &["a", "b", "c"], "c").unwrap();
        assert_eq!(dag.distance(0, 2), Some(1));
        assert_eq!(dag.distance(1, 2), Some(1));
        assert_eq!(dag.distance(2, 0), None);
        assert!(dag.reaches(0, 2));
        assert!(!dag.reaches(2, 0));
    }

    #[test]
    fn equations_may_only_use_parents() {
        let mut spec = DagSpec {
            nodes: vec!["x".into(), "y".into(), "z".into()],
            edges: vec![("x".into(), "y".into())],
            output: "y".into(),
            ..DagSpec::default()
        };
        spec.intervenable.insert("x".into());
        let dag = Dag::new(spec).unwrap();
        let eqs: BTreeMap<String, EquationRhs> =
            [("x", "N(0, 1)"), ("y", "2 * z + N(0, 1)"), ("z", "N(0, 1)")]
                .iter()
                .map(|(k, v)| (k.to_string(), expr::parse_equation(v).unwrap()))
                .collect();
        let err = Scm::new(dag, eqs, BTreeMap::new()).unwrap_err();
        assert!(matches!(err, Error::InvalidEquation { .. }));
    }
}
