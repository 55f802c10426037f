//! Random small SCMs, interventions and evidence sets for property checks.

use rand::seq::SliceRandom;
use rand::Rng;

use super::{ConditionalTable, Intervention, Mechanism, Node, NoiseSpec, Scm};

#[derive(Debug, Clone, Copy)]
pub struct RandomScmOptions {
    pub max_nodes: usize,
    pub max_support: usize,
    pub max_parents: usize,
}

impl Default for RandomScmOptions {
    fn default() -> Self {
        Self { max_nodes: 6, max_support: 4, max_parents: 2 }
    }
}

#[derive(Debug, Clone)]
pub struct RandomCase {
    pub scm: Scm,
    pub intervention: Intervention,
    pub observed: Vec<String>,
    pub query: Vec<String>,
}

fn random_probs<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    let mut w: Vec<f64> = (0..n).map(|_| if rng.gen_bool(0.15) { 0.0 } else { rng.gen_range(0.05..1.0) }).collect();
    if w.iter().all(|x| *x == 0.0) {
        w[0] = 1.0;
    }
    let s: f64 = w.iter().sum();
    let mut p: Vec<f64> = w.iter().map(|x| x / s).collect();
    // absorb rounding into the largest entry so the sum is 1 to within an ulp or two
    let err = 1.0 - p.iter().sum::<f64>();
    let imax = (0..n).max_by(|a, b| p[*a].partial_cmp(&p[*b]).unwrap()).unwrap();
    p[imax] += err;
    p
}

fn random_mechanism<R: Rng + ?Sized>(
    node: &str,
    noise: &NoiseSpec,
    candidates: &[(String, usize)],
    domain: usize,
    max_parents: usize,
    rng: &mut R,
) -> Mechanism {
    let k = rng.gen_range(0..=max_parents.min(candidates.len()));
    let mut chosen: Vec<&(String, usize)> = candidates.choose_multiple(rng, k).collect();
    chosen.sort();
    let parents: Vec<String> = chosen.iter().map(|(id, _)| id.clone()).collect();
    let sizes: Vec<usize> = chosen.iter().map(|(_, d)| *d).collect();
    Mechanism::tabulate(node, parents, noise.id.clone(), &sizes, noise.len(), |_, _| rng.gen_range(0..domain))
}

/// A random DAG over `X0..Xn` (edges only from lower to higher index), random
/// tables and noise, a random one- or two-node intervention that keeps the
/// graph acyclic, a random non-empty evidence set and a random query.
pub fn random_case<R: Rng + ?Sized>(opts: RandomScmOptions, rng: &mut R) -> RandomCase {
    let n = rng.gen_range(2..=opts.max_nodes.max(2));
    let ids: Vec<String> = (0..n).map(|i| format!("X{i}")).collect();
    let domains: Vec<usize> = (0..n).map(|_| rng.gen_range(2..=opts.max_support.max(2))).collect();
    let nodes: Vec<Node> =
        ids.iter().zip(&domains).map(|(id, d)| Node::new(id.clone(), (0..*d).map(|v| v.to_string()).collect())).collect();
    let noises: Vec<NoiseSpec> = ids
        .iter()
        .map(|id| {
            let m = rng.gen_range(1..=opts.max_support.max(1));
            NoiseSpec {
                id: format!("U{}", &id[1..]),
                support: (0..m).map(|v| v.to_string()).collect(),
                probs: random_probs(m, rng),
            }
        })
        .collect();
    let mut mechs = Vec::with_capacity(n);
    for i in 0..n {
        let cands: Vec<(String, usize)> = (0..i).map(|j| (ids[j].clone(), domains[j])).collect();
        mechs.push(random_mechanism(&ids[i], &noises[i], &cands, domains[i], opts.max_parents, rng));
    }
    let scm = Scm::new(nodes, noises.clone(), mechs).expect("random SCM is well-formed");

    let mut intervention = Intervention::new();
    let n_int = rng.gen_range(1..=2.min(n));
    let mut targets: Vec<usize> = (0..n).collect();
    targets.shuffle(rng);
    for &i in targets.iter().take(n_int) {
        let m = if rng.gen_bool(0.4) {
            Mechanism::constant(ids[i].clone(), noises[i].id.clone(), noises[i].len(), rng.gen_range(0..domains[i]))
        } else {
            let cands: Vec<(String, usize)> = (0..i).map(|j| (ids[j].clone(), domains[j])).collect();
            random_mechanism(&ids[i], &noises[i], &cands, domains[i], opts.max_parents, rng)
        };
        intervention = intervention.replace(m);
    }

    let mut observed: Vec<String> = ids.iter().filter(|_| rng.gen_bool(0.5)).cloned().collect();
    if observed.is_empty() {
        observed.push(ids.choose(rng).unwrap().clone());
    }
    let mut query: Vec<String> = ids.iter().filter(|_| rng.gen_bool(0.6)).cloned().collect();
    if query.is_empty() {
        query.push(ids[n - 1].clone());
    }
    RandomCase { scm, intervention, observed, query }
}

/// A conditional table with `rows` parent rows over `values` outcomes; some
/// entries are exactly zero.
pub fn random_table<R: Rng + ?Sized>(rows: usize, values: usize, rng: &mut R) -> ConditionalTable {
    ConditionalTable {
        support: (0..values).map(|v| v.to_string()).collect(),
        rows: (0..rows).map(|_| random_probs(values, rng)).collect(),
    }
}
