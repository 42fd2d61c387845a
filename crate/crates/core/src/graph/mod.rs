//! Ancestral sets and POMIS enumeration.
//!
//! POMIS candidates come from the MUCT / interventional-border recursion of
//! Lee & Bareinboim, run on the latent projection of the DAG (hidden nodes
//! become bidirected edges between the observed nodes they confound). The
//! candidates are then intersected with the caller's exploration set and
//! ordered by size, summed distance to the output, and name.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scm::Dag;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SourceId(pub usize);

impl fmt::Display for SourceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Variables an algorithm may intervene on in one source.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExplorationSet {
    variables: Vec<String>,
    pub source_id: SourceId,
}

impl ExplorationSet {
    pub fn new<S: Into<String>>(
        dag: &Dag,
        variables: impl IntoIterator<Item = S>,
        source_id: SourceId,
    ) -> Result<ExplorationSet> {
        let set: BTreeSet<String> = variables.into_iter().map(Into::into).collect();
        if set.is_empty() {
            return Err(Error::NoValidSet("exploration set is empty".into()));
        }
        for v in &set {
            let id = dag.id(v)?;
            if !dag.is_intervenable(id) {
                return Err(Error::NotIntervenable(v.clone()));
            }
        }
        Ok(ExplorationSet {
            variables: set.into_iter().collect(),
            source_id,
        })
    }

    /// Sorted variable names.
    pub fn variables(&self) -> &[String] {
        &self.variables
    }

    pub fn len(&self) -> usize {
        self.variables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.variables.is_empty()
    }

    pub fn contains(&self, v: &str) -> bool {
        self.variables
            .binary_search_by(|x| x.as_str().cmp(v))
            .is_ok()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pomis {
    /// Sorted variable names.
    pub variables: Vec<String>,
    /// Sum over members of the shortest directed path length to the output.
    pub tiebreak_distance: usize,
}

impl Pomis {
    pub fn len(&self) -> usize {
        self.variables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.variables.is_empty()
    }
}

impl fmt::Display for Pomis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{}}}", self.variables.join(", "))
    }
}

/// All nodes with a directed path to `node`, excluding `node` itself.
pub fn ancestors(dag: &Dag, node: &str) -> Result<BTreeSet<String>> {
    let v = dag.id(node)?;
    Ok(ancestor_ids(dag, v)
        .into_iter()
        .map(|a| dag.name(a).to_string())
        .collect())
}

pub(crate) fn ancestor_ids(dag: &Dag, v: usize) -> BTreeSet<usize> {
    let mut seen = BTreeSet::new();
    let mut stack: Vec<usize> = dag.parents(v).to_vec();
    while let Some(p) = stack.pop() {
        if seen.insert(p) {
            stack.extend_from_slice(dag.parents(p));
        }
    }
    seen
}

type Mask = u128;

fn bit(i: usize) -> Mask {
    1u128 << i
}

fn members(mut m: Mask) -> impl Iterator<Item = usize> {
    std::iter::from_fn(move || {
        if m == 0 {
            return None;
        }
        let i = m.trailing_zeros() as usize;
        m &= m - 1;
        Some(i)
    })
}

/// Semi-Markovian graph over observed nodes, as bitmasks.
#[derive(Debug, Clone, PartialEq, Eq)]
struct Projected {
    /// Local index -> DAG index.
    nodes: Vec<usize>,
    pa: Vec<Mask>,
    bi: Vec<Mask>,
    /// Local indices in DAG topological order.
    order: Vec<usize>,
}

impl Projected {
    fn from_dag(dag: &Dag) -> Result<Projected> {
        let nodes: Vec<usize> = (0..dag.len()).filter(|v| !dag.is_latent(*v)).collect();
        if nodes.len() > Mask::BITS as usize {
            return Err(Error::InvalidGraph(format!(
                "POMIS enumeration supports at most {} observed nodes, got {}",
                Mask::BITS,
                nodes.len()
            )));
        }
        let mut local = vec![usize::MAX; dag.len()];
        for (i, &v) in nodes.iter().enumerate() {
            local[v] = i;
        }
        // Observed nodes reachable from `start` through hidden nodes only.
        let reach = |start: &[usize]| -> Mask {
            let mut m = 0;
            let mut seen = vec![false; dag.len()];
            let mut stack = start.to_vec();
            while let Some(c) = stack.pop() {
                if std::mem::replace(&mut seen[c], true) {
                    continue;
                }
                if dag.is_latent(c) {
                    stack.extend_from_slice(dag.children(c));
                } else {
                    m |= bit(local[c]);
                }
            }
            m
        };
        let n = nodes.len();
        let mut pa = vec![0; n];
        let mut bi = vec![0; n];
        for (i, &v) in nodes.iter().enumerate() {
            for c in members(reach(dag.children(v))) {
                pa[c] |= bit(i);
            }
        }
        for &l in dag.latent() {
            let m = reach(dag.children(l));
            for a in members(m) {
                bi[a] |= m & !bit(a);
            }
        }
        let order = dag
            .topo_order()
            .iter()
            .filter(|v| !dag.is_latent(**v))
            .map(|&v| local[v])
            .collect();
        Ok(Projected {
            nodes,
            pa,
            bi,
            order,
        })
    }

    fn ancestors_incl(&self, y: usize) -> Mask {
        let mut m = bit(y);
        let mut frontier = self.pa[y];
        while frontier & !m != 0 {
            let new = frontier & !m;
            m |= new;
            frontier = members(new).fold(0, |acc, v| acc | self.pa[v]);
        }
        m
    }

    /// Remove edges into `x` (directed and bidirected).
    fn cut(&self, x: Mask) -> Projected {
        let mut g = self.clone();
        for v in 0..g.pa.len() {
            if x & bit(v) != 0 {
                g.pa[v] = 0;
                g.bi[v] = 0;
            } else {
                g.bi[v] &= !x;
            }
        }
        g
    }

    fn induced(&self, keep: Mask) -> Projected {
        let mut g = self.clone();
        for v in 0..g.pa.len() {
            if keep & bit(v) == 0 {
                g.pa[v] = 0;
                g.bi[v] = 0;
            } else {
                g.pa[v] &= keep;
                g.bi[v] &= keep;
            }
        }
        g
    }

    /// Minimal unobserved-confounders' territory of `y`.
    fn muct(&self, y: usize) -> Mask {
        let an = self.ancestors_incl(y);
        let mut t = bit(y);
        loop {
            let mut next = t;
            for v in members(t) {
                next |= self.bi[v] & an;
            }
            for v in members(an & !next) {
                if self.pa[v] & next != 0 {
                    next |= bit(v);
                }
            }
            // Descendant closure is transitive; repeat until stable.
            if next == t {
                return t;
            }
            t = next;
        }
    }

    fn interventional_border(&self, t: Mask) -> Mask {
        members(t).fold(0, |acc, v| acc | self.pa[v]) & !t
    }

    fn muct_ib(&self, y: usize) -> (Mask, Mask) {
        let t = self.muct(y);
        (t, self.interventional_border(t))
    }
}

fn sub_pomis(g: &Projected, y: usize, pi: &[usize], observed: Mask, out: &mut BTreeSet<Mask>) {
    for (i, &p) in pi.iter().enumerate() {
        let gi = g.cut(bit(p));
        let (t, x) = gi.muct_ib(y);
        let o = observed | pi[..i].iter().fold(0, |acc, &v| acc | bit(v));
        if x & o != 0 {
            continue;
        }
        out.insert(x);
        let rest: Vec<usize> = pi[i + 1..]
            .iter()
            .copied()
            .filter(|&v| t & bit(v) != 0)
            .collect();
        if !rest.is_empty() {
            let h = gi.cut(x).induced(t | x);
            sub_pomis(&h, y, &rest, o, out);
        }
    }
}

fn pomis_masks(g: &Projected, y: usize) -> BTreeSet<Mask> {
    let (t, x) = g.muct_ib(y);
    let h = g.cut(x).induced(t | x);
    let pi: Vec<usize> = g
        .order
        .iter()
        .rev()
        .copied()
        .filter(|&v| v != y && t & bit(v) != 0)
        .collect();
    let mut out = BTreeSet::from([x]);
    sub_pomis(&h, y, &pi, 0, &mut out);
    out
}

fn to_names(dag: &Dag, g: &Projected, m: Mask) -> BTreeSet<String> {
    members(m)
        .map(|i| dag.name(g.nodes[i]).to_string())
        .collect()
}

/// Unfiltered POMIS candidates over all observed nodes.
pub fn pomis_candidates(dag: &Dag) -> Result<Vec<BTreeSet<String>>> {
    let g = Projected::from_dag(dag)?;
    let y = g
        .nodes
        .iter()
        .position(|&v| v == dag.output())
        .expect("output is observed");
    Ok(pomis_masks(&g, y)
        .into_iter()
        .map(|m| to_names(dag, &g, m))
        .collect())
}

/// Reference enumeration: interventional borders of every mutilated graph.
///
/// Exponential in the number of observed nodes; meant for validation on
/// small graphs.
pub fn pomis_by_exhaustion(dag: &Dag) -> Result<Vec<BTreeSet<String>>> {
    let g = Projected::from_dag(dag)?;
    let y = g
        .nodes
        .iter()
        .position(|&v| v == dag.output())
        .expect("output is observed");
    let n = g.nodes.len();
    if n > 20 {
        return Err(Error::InvalidGraph(format!(
            "exhaustive enumeration over {n} nodes is too large"
        )));
    }
    let others: Vec<usize> = (0..n).filter(|&v| v != y).collect();
    let mut out = BTreeSet::new();
    for sel in 0u64..(1u64 << others.len()) {
        let w = members(sel as Mask).fold(0, |acc, i| acc | bit(others[i]));
        out.insert(g.cut(w).muct_ib(y).1);
    }
    Ok(out.into_iter().map(|m| to_names(dag, &g, m)).collect())
}

/// POMIS candidates restricted to `exploration`, sorted by
/// (size, summed distance to output, names).
pub fn enumerate_pomis(dag: &Dag, exploration: &ExplorationSet) -> Result<Vec<Pomis>> {
    let output = dag.output();
    let anc = ancestor_ids(dag, output);
    if !exploration
        .variables()
        .iter()
        .any(|v| dag.id(v).map(|id| anc.contains(&id)).unwrap_or(false))
    {
        return Err(Error::NoValidSet(format!(
            "no member of {{{}}} is an ancestor of `{}`",
            exploration.variables().join(", "),
            dag.output_name()
        )));
    }
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for cand in pomis_candidates(dag)? {
        let vars: Vec<String> = cand
            .into_iter()
            .filter(|v| exploration.contains(v))
            .collect();
        if vars.is_empty() || !seen.insert(vars.clone()) {
            continue;
        }
        let mut total = 0;
        let mut reachable = true;
        for v in &vars {
            match dag.distance(dag.id(v)?, output) {
                Some(d) => total += d,
                None => reachable = false,
            }
        }
        if reachable {
            out.push(Pomis {
                variables: vars,
                tiebreak_distance: total,
            });
        }
    }
    if out.is_empty() {
        return Err(Error::NoValidSet(format!(
            "no POMIS candidate intersects {{{}}}",
            exploration.variables().join(", ")
        )));
    }
    out.sort_by(|a, b| {
        (a.len(), a.tiebreak_distance, &a.variables).cmp(&(
            b.len(),
            b.tiebreak_distance,
            &b.variables,
        ))
    });
    Ok(out)
}

/// Head of [`enumerate_pomis`].
pub fn select_pomis(dag: &Dag, exploration: &ExplorationSet) -> Result<Pomis> {
    Ok(enumerate_pomis(dag, exploration)?.remove(0))
}

/// Breadth-first distances to `target` along reversed edges.
pub fn distances_to(dag: &Dag, target: usize) -> Vec<Option<usize>> {
    let mut dist = vec![None; dag.len()];
    dist[target] = Some(0);
    let mut queue = VecDeque::from([target]);
    while let Some(v) = queue.pop_front() {
        let d = dist[v].expect("queued nodes have a distance");
        for &p in dag.parents(v) {
            if dist[p].is_none() {
                dist[p] = Some(d + 1);
                queue.push_back(p);
            }
        }
    }
    dist
}
