//! Structural causal models over finite discrete variables.
//!
//! Every node `X_i` is computed by a deterministic mechanism
//! `X_i = f_i(parents_i, U_i)` from its parents and one private, independent
//! noise variable `U_i` with finite support. The joint distribution over
//! nodes is the push-forward of the product noise distribution, so every
//! query in this module is answered exactly by enumerating noise
//! assignments (up to a configurable cap).
//!
//! Identifiers are normalised on construction: nodes and noise variables are
//! stored sorted by id, and every enumeration walks them in that order.

pub mod checks;
mod inference;
pub mod random;
pub mod text;
mod uniformize;

pub use inference::ScenarioPosterior;
pub(crate) use uniformize::merge_breakpoints;
pub use uniformize::{uniformize, uniformize_with_breakpoints, ConditionalTable, Uniformized};

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap, HashMap};

use rand::Rng;

use crate::error::{Error, Result};

/// Default cap on the number of joint noise assignments enumerated by exact queries.
pub const DEFAULT_ENUMERATION_CAP: u128 = 10_000_000;

const PROB_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSpec {
    pub id: String,
    pub support: Vec<String>,
    pub probs: Vec<f64>,
}

impl NoiseSpec {
    pub fn new(id: impl Into<String>, support: Vec<String>, probs: Vec<f64>) -> Result<Self> {
        let id = id.into();
        let bad = |reason: String| Error::InvalidNoise { id: id.clone(), reason };
        if support.is_empty() {
            return Err(bad("empty support".into()));
        }
        if support.len() != probs.len() {
            return Err(bad(format!("{} values but {} probabilities", support.len(), probs.len())));
        }
        let distinct: BTreeSet<&String> = support.iter().collect();
        if distinct.len() != support.len() {
            return Err(bad("support values are not distinct".into()));
        }
        if let Some(p) = probs.iter().find(|p| !(p.is_finite() && **p >= 0.0)) {
            return Err(bad(format!("negative or non-finite probability {p}")));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > PROB_TOL {
            return Err(bad(format!("probabilities sum to {sum}")));
        }
        Ok(Self { id, support, probs })
    }

    /// Single-valued noise, used by deterministic nodes.
    pub fn point(id: impl Into<String>) -> Self {
        Self { id: id.into(), support: vec!["0".into()], probs: vec![1.0] }
    }

    pub fn uniform(id: impl Into<String>, support: Vec<String>) -> Result<Self> {
        let n = support.len().max(1) as f64;
        let probs = vec![1.0 / n; support.len()];
        Self::new(id, support, probs)
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    pub fn index_of(&self, value: &str) -> Option<usize> {
        self.support.iter().position(|v| v == value)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        sample_index(&self.probs, rng)
    }
}

/// Inverse-CDF draw from a probability vector.
pub(crate) fn sample_index<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, p) in probs.iter().enumerate() {
        if *p > 0.0 {
            last_positive = i;
            acc += p;
            if u < acc {
                return i;
            }
        }
    }
    last_positive
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub id: String,
    pub domain: Vec<String>,
}

impl Node {
    pub fn new(id: impl Into<String>, domain: Vec<String>) -> Self {
        Self { id: id.into(), domain }
    }
}

/// A total table from (parent values, noise value) to the node's value.
///
/// Entries are value indices into the node's domain, laid out row-major with
/// parents in declared order followed by the noise value.
#[derive(Debug, Clone, PartialEq)]
pub struct Mechanism {
    pub node: String,
    pub parents: Vec<String>,
    pub noise: String,
    pub table: Vec<usize>,
}

impl Mechanism {
    pub fn new(node: impl Into<String>, parents: Vec<String>, noise: impl Into<String>, table: Vec<usize>) -> Self {
        Self { node: node.into(), parents, noise: noise.into(), table }
    }

    /// Builds the table by calling `f(parent_values, noise_value)` for every combination.
    pub fn tabulate(
        node: impl Into<String>,
        parents: Vec<String>,
        noise: impl Into<String>,
        parent_sizes: &[usize],
        noise_size: usize,
        mut f: impl FnMut(&[usize], usize) -> usize,
    ) -> Self {
        let rows: usize = parent_sizes.iter().product();
        let mut table = Vec::with_capacity(rows * noise_size);
        let mut pa = vec![0usize; parent_sizes.len()];
        for _ in 0..rows {
            for u in 0..noise_size {
                table.push(f(&pa, u));
            }
            increment(&mut pa, parent_sizes);
        }
        Self { node: node.into(), parents, noise: noise.into(), table }
    }

    /// Ignores its noise and always outputs `value`.
    pub fn constant(node: impl Into<String>, noise: impl Into<String>, noise_size: usize, value: usize) -> Self {
        Self { node: node.into(), parents: vec![], noise: noise.into(), table: vec![value; noise_size] }
    }
}

/// Mixed-radix increment; returns false after wrapping around.
pub(crate) fn increment(digits: &mut [usize], radix: &[usize]) -> bool {
    for i in (0..digits.len()).rev() {
        digits[i] += 1;
        if digits[i] < radix[i] {
            return true;
        }
        digits[i] = 0;
    }
    false
}

/// A full noise assignment, one support index per noise variable (sorted by id).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NoiseAssignment(pub Vec<usize>);

/// A full node assignment, one domain index per node (sorted by id).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Assignment(pub Vec<usize>);

/// Partial evidence: node id -> value label.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Observation {
    pub assignments: BTreeMap<String, String>,
}

impl Observation {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, node: impl Into<String>, value: impl Into<String>) -> Self {
        self.assignments.insert(node.into(), value.into());
        self
    }

    pub fn is_empty(&self) -> bool {
        self.assignments.is_empty()
    }
}

/// Mechanism replacements, keyed by node id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Intervention {
    pub replacements: BTreeMap<String, Mechanism>,
}

impl Intervention {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn replace(mut self, mechanism: Mechanism) -> Self {
        self.replacements.insert(mechanism.node.clone(), mechanism);
        self
    }

    pub fn is_empty(&self) -> bool {
        self.replacements.is_empty()
    }

    /// `do(node := value)`: a parentless constant mechanism on the node's own noise.
    pub fn atomic(scm: &Scm, node: &str, value: &str) -> Result<Self> {
        let i = scm.node_index(node)?;
        let v = scm.value_index(i, value)?;
        let noise = &scm.noises[scm.noise_of[i]];
        Ok(Self::new().replace(Mechanism::constant(node, noise.id.clone(), noise.len(), v)))
    }
}

/// Exact distribution over tuples of values of `vars`.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution {
    pub vars: Vec<String>,
    pub labels: Vec<Vec<String>>,
    pub probs: BTreeMap<Vec<usize>, f64>,
}

impl Distribution {
    pub(crate) fn empty(vars: Vec<String>, labels: Vec<Vec<String>>) -> Self {
        Self { vars, labels, probs: BTreeMap::new() }
    }

    pub(crate) fn add(&mut self, key: Vec<usize>, p: f64) {
        *self.probs.entry(key).or_insert(0.0) += p;
    }

    pub(crate) fn normalize(&mut self) {
        let total = self.total();
        if total > 0.0 {
            for p in self.probs.values_mut() {
                *p /= total;
            }
        }
    }

    pub fn total(&self) -> f64 {
        self.probs.values().sum()
    }

    /// Probability of a tuple given by value labels; zero if never produced.
    pub fn prob(&self, values: &[&str]) -> f64 {
        let key: Option<Vec<usize>> = values.iter().zip(&self.labels).map(|(v, dom)| dom.iter().position(|d| d == v)).collect();
        match key {
            Some(k) if k.len() == self.vars.len() => self.probs.get(&k).copied().unwrap_or(0.0),
            _ => 0.0,
        }
    }

    /// Largest absolute pointwise difference; both must range over the same variables.
    pub fn max_abs_diff(&self, other: &Distribution) -> f64 {
        let keys: BTreeSet<&Vec<usize>> = self.probs.keys().chain(other.probs.keys()).collect();
        keys.into_iter()
            .map(|k| {
                let a = self.probs.get(k).copied().unwrap_or(0.0);
                let b = other.probs.get(k).copied().unwrap_or(0.0);
                (a - b).abs()
            })
            .fold(0.0, f64::max)
    }

    /// Expectation of a numeric single-variable distribution (labels parsed as f64).
    pub fn mean(&self) -> Option<f64> {
        if self.vars.len() != 1 {
            return None;
        }
        let mut m = 0.0;
        for (k, p) in &self.probs {
            let x: f64 = self.labels[0][k[0]].parse().ok()?;
            m += p * x;
        }
        Some(m)
    }

    pub fn iter_labeled(&self) -> impl Iterator<Item = (Vec<&str>, f64)> + '_ {
        self.probs.iter().map(move |(k, p)| {
            let labels = k.iter().zip(&self.labels).map(|(i, d)| d[*i].as_str()).collect();
            (labels, *p)
        })
    }
}

#[derive(Debug, Clone)]
pub struct Scm {
    nodes: Vec<Node>,
    noises: Vec<NoiseSpec>,
    mechanisms: Vec<Mechanism>,
    node_lookup: HashMap<String, usize>,
    noise_lookup: HashMap<String, usize>,
    parent_idx: Vec<Vec<usize>>,
    strides: Vec<Vec<usize>>,
    noise_of: Vec<usize>,
    order: Vec<usize>,
    cap: u128,
}

impl PartialEq for Scm {
    fn eq(&self, other: &Self) -> bool {
        self.nodes == other.nodes && self.noises == other.noises && self.mechanisms == other.mechanisms
    }
}

impl Scm {
    pub fn new(mut nodes: Vec<Node>, mut noises: Vec<NoiseSpec>, mechanisms: Vec<Mechanism>) -> Result<Self> {
        nodes.sort_by(|a, b| a.id.cmp(&b.id));
        noises.sort_by(|a, b| a.id.cmp(&b.id));

        let mut node_lookup = HashMap::new();
        for (i, n) in nodes.iter().enumerate() {
            if n.domain.is_empty() {
                return Err(Error::InvalidMechanism { node: n.id.clone(), reason: "empty domain".into() });
            }
            if node_lookup.insert(n.id.clone(), i).is_some() {
                return Err(Error::DuplicateId(n.id.clone()));
            }
        }
        let mut noise_lookup = HashMap::new();
        for (i, u) in noises.iter().enumerate() {
            if node_lookup.contains_key(&u.id) || noise_lookup.insert(u.id.clone(), i).is_some() {
                return Err(Error::DuplicateId(u.id.clone()));
            }
            // re-validate, fields are public
            NoiseSpec::new(u.id.clone(), u.support.clone(), u.probs.clone())?;
        }

        let mut slots: Vec<Option<Mechanism>> = vec![None; nodes.len()];
        for m in mechanisms {
            let i = *node_lookup.get(&m.node).ok_or_else(|| Error::UnknownNode(m.node.clone()))?;
            if slots[i].is_some() {
                return Err(Error::InvalidMechanism { node: m.node.clone(), reason: "more than one mechanism".into() });
            }
            slots[i] = Some(m);
        }
        let mut mechs = Vec::with_capacity(nodes.len());
        for (i, s) in slots.into_iter().enumerate() {
            mechs.push(s.ok_or_else(|| Error::InvalidMechanism { node: nodes[i].id.clone(), reason: "no mechanism".into() })?);
        }

        let mut noise_of = Vec::with_capacity(nodes.len());
        let mut noise_used = vec![false; noises.len()];
        let mut parent_idx = Vec::with_capacity(nodes.len());
        let mut strides = Vec::with_capacity(nodes.len());
        for (i, m) in mechs.iter().enumerate() {
            let ui = *noise_lookup.get(&m.noise).ok_or_else(|| Error::UnknownNoise(m.noise.clone()))?;
            if noise_used[ui] {
                return Err(Error::InvalidMechanism {
                    node: m.node.clone(),
                    reason: format!("noise `{}` is already used by another node", m.noise),
                });
            }
            noise_used[ui] = true;
            noise_of.push(ui);
            let mut pidx = Vec::with_capacity(m.parents.len());
            for p in &m.parents {
                let j = *node_lookup.get(p).ok_or_else(|| Error::UnknownNode(p.clone()))?;
                pidx.push(j);
            }
            let noise_size = noises[ui].len();
            let mut st = vec![0usize; pidx.len()];
            let mut acc = noise_size;
            for k in (0..pidx.len()).rev() {
                st[k] = acc;
                acc *= nodes[pidx[k]].domain.len();
            }
            if m.table.len() != acc {
                return Err(Error::InvalidMechanism {
                    node: m.node.clone(),
                    reason: format!("table has {} entries, expected {acc}", m.table.len()),
                });
            }
            if let Some(v) = m.table.iter().find(|v| **v >= nodes[i].domain.len()) {
                return Err(Error::InvalidMechanism {
                    node: m.node.clone(),
                    reason: format!("output index {v} outside a domain of size {}", nodes[i].domain.len()),
                });
            }
            parent_idx.push(pidx);
            strides.push(st);
        }
        if let Some(ui) = noise_used.iter().position(|u| !u) {
            return Err(Error::InvalidNoise { id: noises[ui].id.clone(), reason: "not attached to any node".into() });
        }

        let order = topo_sort(&nodes, &parent_idx)?;
        Ok(Self {
            nodes,
            noises,
            mechanisms: mechs,
            node_lookup,
            noise_lookup,
            parent_idx,
            strides,
            noise_of,
            order,
            cap: DEFAULT_ENUMERATION_CAP,
        })
    }

    pub fn with_enumeration_cap(mut self, cap: u128) -> Self {
        self.cap = cap;
        self
    }

    pub fn enumeration_cap(&self) -> u128 {
        self.cap
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn noises(&self) -> &[NoiseSpec] {
        &self.noises
    }

    pub fn mechanisms(&self) -> &[Mechanism] {
        &self.mechanisms
    }

    pub fn mechanism(&self, node: &str) -> Result<&Mechanism> {
        Ok(&self.mechanisms[self.node_index(node)?])
    }

    pub fn node_index(&self, id: &str) -> Result<usize> {
        self.node_lookup.get(id).copied().ok_or_else(|| Error::UnknownNode(id.to_string()))
    }

    pub fn noise_index(&self, id: &str) -> Result<usize> {
        self.noise_lookup.get(id).copied().ok_or_else(|| Error::UnknownNoise(id.to_string()))
    }

    pub fn noise_spec(&self, id: &str) -> Result<&NoiseSpec> {
        Ok(&self.noises[self.noise_index(id)?])
    }

    /// Noise variable attached to a node.
    pub fn noise_of(&self, node: &str) -> Result<&NoiseSpec> {
        Ok(&self.noises[self.noise_of[self.node_index(node)?]])
    }

    pub fn value_index(&self, node: usize, value: &str) -> Result<usize> {
        self.nodes[node]
            .domain
            .iter()
            .position(|v| v == value)
            .ok_or_else(|| Error::ValueOutOfDomain { var: self.nodes[node].id.clone(), value: value.to_string() })
    }

    /// Nodes in topological order, ties broken by id.
    pub fn topo_order(&self) -> Vec<&str> {
        self.order.iter().map(|i| self.nodes[*i].id.as_str()).collect()
    }

    /// Number of joint noise assignments.
    pub fn noise_space_size(&self) -> u128 {
        self.noises.iter().map(|u| u.len() as u128).product()
    }

    pub(crate) fn check_cap(&self, size: u128) -> Result<()> {
        if size > self.cap {
            Err(Error::Capacity { size, cap: self.cap })
        } else {
            Ok(())
        }
    }

    pub fn noise_assignment(&self, values: &[(&str, &str)]) -> Result<NoiseAssignment> {
        let mut out = vec![usize::MAX; self.noises.len()];
        for (id, v) in values {
            let i = self.noise_index(id)?;
            out[i] = self.noises[i]
                .index_of(v)
                .ok_or_else(|| Error::ValueOutOfDomain { var: id.to_string(), value: v.to_string() })?;
        }
        if let Some(i) = out.iter().position(|v| *v == usize::MAX) {
            return Err(Error::Input(format!("noise `{}` is not assigned", self.noises[i].id)));
        }
        Ok(NoiseAssignment(out))
    }

    /// Computes every node from a full noise assignment. Pure.
    pub fn evaluate(&self, u: &NoiseAssignment) -> Result<Assignment> {
        if u.0.len() != self.noises.len() {
            return Err(Error::Input(format!(
                "noise assignment has {} values, the model has {} noise variables",
                u.0.len(),
                self.noises.len()
            )));
        }
        for (i, v) in u.0.iter().enumerate() {
            if *v >= self.noises[i].len() {
                return Err(Error::Input(format!("noise `{}` value index {v} is out of support", self.noises[i].id)));
            }
        }
        let mut x = vec![0usize; self.nodes.len()];
        self.eval_into(&u.0, &mut x);
        Ok(Assignment(x))
    }

    pub(crate) fn eval_into(&self, u: &[usize], x: &mut [usize]) {
        for &i in &self.order {
            let mut idx = u[self.noise_of[i]];
            for (k, &p) in self.parent_idx[i].iter().enumerate() {
                idx += x[p] * self.strides[i][k];
            }
            x[i] = self.mechanisms[i].table[idx];
        }
    }

    pub fn sample_noise<R: Rng + ?Sized>(&self, rng: &mut R) -> NoiseAssignment {
        NoiseAssignment(self.noises.iter().map(|u| u.sample(rng)).collect())
    }

    /// Independent noise draws from the prior, then evaluation.
    pub fn sample_prior<R: Rng + ?Sized>(&self, rng: &mut R) -> (NoiseAssignment, Assignment) {
        let u = self.sample_noise(rng);
        let mut x = vec![0usize; self.nodes.len()];
        self.eval_into(&u.0, &mut x);
        (u, Assignment(x))
    }

    pub fn prior_prob(&self, u: &NoiseAssignment) -> f64 {
        u.0.iter().enumerate().map(|(i, v)| self.noises[i].probs[*v]).product()
    }

    /// Returns the intervened model; `self` is left untouched and noise specs are copied unchanged.
    pub fn apply_intervention(&self, intervention: &Intervention) -> Result<Scm> {
        if intervention.is_empty() {
            return Ok(self.clone());
        }
        let mut mechs = self.mechanisms.clone();
        for (node, m) in &intervention.replacements {
            let i = self.node_index(node)?;
            if m.node != *node {
                return Err(Error::InvalidMechanism {
                    node: node.clone(),
                    reason: format!("replacement is declared for `{}`", m.node),
                });
            }
            if m.noise != self.mechanisms[i].noise {
                return Err(Error::InvalidMechanism {
                    node: node.clone(),
                    reason: format!("replacement must keep the node's noise `{}`", self.mechanisms[i].noise),
                });
            }
            mechs[i] = m.clone();
        }
        Ok(Scm::new(self.nodes.clone(), self.noises.clone(), mechs)?.with_enumeration_cap(self.cap))
    }

    pub fn assignment_labels(&self, x: &Assignment) -> BTreeMap<String, String> {
        self.nodes.iter().zip(&x.0).map(|(n, v)| (n.id.clone(), n.domain[*v].clone())).collect()
    }

    pub fn value_label(&self, node: &str, x: &Assignment) -> Result<&str> {
        let i = self.node_index(node)?;
        Ok(&self.nodes[i].domain[x.0[i]])
    }

    pub(crate) fn resolve_observation(&self, obs: &Observation) -> Result<Vec<(usize, usize)>> {
        obs.assignments
            .iter()
            .map(|(n, v)| {
                let i = self.node_index(n)?;
                Ok((i, self.value_index(i, v)?))
            })
            .collect()
    }

    pub(crate) fn resolve_nodes(&self, query: &[&str]) -> Result<Vec<usize>> {
        query.iter().map(|q| self.node_index(q)).collect()
    }

    pub(crate) fn query_distribution(&self, idx: &[usize]) -> Distribution {
        Distribution::empty(
            idx.iter().map(|i| self.nodes[*i].id.clone()).collect(),
            idx.iter().map(|i| self.nodes[*i].domain.clone()).collect(),
        )
    }

    /// Calls `f(u, p(u))` for every joint noise assignment with positive prior mass.
    pub(crate) fn for_each_noise(&self, mut f: impl FnMut(&[usize], f64)) -> Result<()> {
        self.check_cap(self.noise_space_size())?;
        let radix: Vec<usize> = self.noises.iter().map(|u| u.len()).collect();
        let mut u = vec![0usize; radix.len()];
        loop {
            let p: f64 = u.iter().enumerate().map(|(i, v)| self.noises[i].probs[*v]).product();
            if p > 0.0 {
                f(&u, p);
            }
            if !increment(&mut u, &radix) {
                break;
            }
        }
        Ok(())
    }
}

fn topo_sort(nodes: &[Node], parents: &[Vec<usize>]) -> Result<Vec<usize>> {
    let n = nodes.len();
    let mut indegree: Vec<usize> = parents.iter().map(|p| p.len()).collect();
    let mut children: Vec<Vec<usize>> = vec![vec![]; n];
    for (i, ps) in parents.iter().enumerate() {
        for &p in ps {
            children[p].push(i);
        }
    }
    // nodes are sorted by id, so the smallest index is the lexicographically smallest id
    let mut ready: BinaryHeap<Reverse<usize>> = (0..n).filter(|i| indegree[*i] == 0).map(Reverse).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(Reverse(i)) = ready.pop() {
        order.push(i);
        for &c in &children[i] {
            indegree[c] -= 1;
            if indegree[c] == 0 {
                ready.push(Reverse(c));
            }
        }
    }
    if order.len() == n {
        return Ok(order);
    }
    // Every unplaced node has an unplaced parent; walking parents must revisit a node.
    let placed: BTreeSet<usize> = order.iter().copied().collect();
    let start = (0..n).find(|i| !placed.contains(i)).expect("some node is unplaced");
    let mut seen = vec![usize::MAX; n];
    let mut cur = start;
    let mut step = 0;
    loop {
        if seen[cur] != usize::MAX {
            break;
        }
        seen[cur] = step;
        step += 1;
        cur = *parents[cur].iter().find(|p| !placed.contains(p)).expect("unplaced parent");
    }
    // `cur` lies on a cycle; report the edge into it from its unplaced parent on the cycle
    let parent = *parents[cur].iter().find(|p| !placed.contains(p)).expect("unplaced parent");
    Err(Error::Cycle { from: nodes[parent].id.clone(), to: nodes[cur].id.clone() })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    pub(crate) fn chain(edges: &[(&str, &str)], ids: &[&str]) -> Result<Scm> {
        let nodes: Vec<Node> = ids.iter().map(|i| Node::new(*i, labels(&["0", "1"]))).collect();
        let noises: Vec<NoiseSpec> = ids.iter().map(|i| NoiseSpec::point(format!("U_{i}"))).collect();
        let mechs = ids
            .iter()
            .map(|i| {
                let parents: Vec<String> = edges.iter().filter(|(_, c)| c == i).map(|(p, _)| p.to_string()).collect();
                let sizes = vec![2; parents.len()];
                Mechanism::tabulate(*i, parents, format!("U_{i}"), &sizes, 1, |pa, _| pa.iter().sum::<usize>() % 2)
            })
            .collect();
        Scm::new(nodes, noises, mechs)
    }

    #[test]
    fn topo_chain_and_fork() {
        let c = chain(&[("A", "B"), ("B", "C")], &["C", "B", "A"]).unwrap();
        assert_eq!(c.topo_order(), vec!["A", "B", "C"]);
        let f = chain(&[("A", "C"), ("A", "B")], &["A", "B", "C"]).unwrap();
        assert_eq!(f.topo_order(), vec!["A", "B", "C"]);
    }

    #[test]
    fn self_loop_is_a_cycle() {
        let err = chain(&[("A", "A")], &["A"]).unwrap_err();
        assert_eq!(err, Error::Cycle { from: "A".into(), to: "A".into() });
    }

    #[test]
    fn cycle_error_names_an_edge_on_the_cycle() {
        // D hangs off the cycle B -> C -> B
        let err = chain(&[("A", "B"), ("C", "B"), ("B", "C"), ("C", "D")], &["A", "B", "C", "D"]).unwrap_err();
        match err {
            Error::Cycle { from, to } => {
                let e = (from.as_str(), to.as_str());
                assert!(e == ("B", "C") || e == ("C", "B"), "{e:?}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn noise_spec_validation() {
        assert!(NoiseSpec::new("u", labels(&["a"]), vec![1.0]).is_ok());
        assert!(NoiseSpec::new("u", vec![], vec![]).is_err());
        assert!(NoiseSpec::new("u", labels(&["a", "a"]), vec![0.5, 0.5]).is_err());
        assert!(NoiseSpec::new("u", labels(&["a", "b"]), vec![0.5, 0.6]).is_err());
        assert!(NoiseSpec::new("u", labels(&["a", "b"]), vec![-0.1, 1.1]).is_err());
    }

    #[test]
    fn noise_ids_must_not_collide_with_nodes() {
        let nodes = vec![Node::new("A", labels(&["0"]))];
        let noises = vec![NoiseSpec::point("A")];
        let mechs = vec![Mechanism::constant("A", "A", 1, 0)];
        assert_eq!(Scm::new(nodes, noises, mechs).unwrap_err(), Error::DuplicateId("A".into()));
    }

    #[test]
    fn table_must_be_total() {
        let nodes = vec![Node::new("A", labels(&["0", "1"]))];
        let noises = vec![NoiseSpec::uniform("U", labels(&["0", "1"])).unwrap()];
        let mechs = vec![Mechanism::new("A", vec![], "U", vec![0])];
        assert!(matches!(Scm::new(nodes, noises, mechs), Err(Error::InvalidMechanism { .. })));
    }
}
