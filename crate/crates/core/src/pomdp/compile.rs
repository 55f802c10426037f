//! Unrolling a tabular POMDP and policy into an SCM.
//!
//! Nodes, for `t = 1..T`:
//!
//! - `S_t`: `S_1 = U_s1`, `S_{t+1} = f_s(S_t, A_t, U_s{t+1})`
//! - `O_t = f_o(S_t, U_o{t})`
//! - `H_t`: `H_1 = O_1`, `H_t = (H_{t-1}, A_{t-1}, O_t)`
//! - `A_t = f_π(H_t, U_a{t})` for `t < T`, the inverse CDF of the policy
//! - `R_t = r(S_t, A_t)` for `t < T`
//! - `G = Σ R_t`
//!
//! With `T = 1` there are no actions and only `S_1, O_1` remain.
//!
//! Action noise is quantised on an [`ActionGrid`]. Two policies compiled or
//! swapped on the same grid share the same `U_a` noise variables, which is what
//! makes a policy swap an intervention.

use super::{History, TabularPolicy, TabularPomdp};
use crate::error::{Error, Result};
use crate::scm::{uniformize_with_breakpoints, ConditionalTable, Intervention, Mechanism, Node, NoiseSpec, Scm};

/// Breakpoints of the quantised action noise, one list per action node.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionGrid(pub Vec<Vec<f64>>);

/// `2` for `T = 1`, otherwise `5T − 1`.
pub fn node_count(horizon: usize) -> usize {
    if horizon == 1 {
        2
    } else {
        5 * horizon - 1
    }
}

fn s(t: usize) -> String {
    format!("S_{t}")
}
fn o(t: usize) -> String {
    format!("O_{t}")
}
fn h(t: usize) -> String {
    format!("H_{t}")
}
fn a(t: usize) -> String {
    format!("A_{t}")
}
fn r(t: usize) -> String {
    format!("R_{t}")
}

/// Every observation-action prefix `(o_1, a_1, ..., o_t)` in mixed-radix order,
/// which is the order of the `H_t` domain.
fn histories(p: &TabularPomdp, t: usize) -> Vec<History<usize>> {
    let mut out = vec![History { obs: vec![], actions: vec![], rewards: vec![] }];
    for k in 1..=t {
        let mut next = Vec::new();
        for prev in &out {
            let acts: Vec<Option<usize>> = if k == 1 { vec![None] } else { (0..p.actions.len()).map(Some).collect() };
            for act in acts {
                for ob in 0..p.observations.len() {
                    let mut hh = prev.clone();
                    if let Some(x) = act {
                        hh.actions.push(x);
                    }
                    hh.obs.push(ob);
                    next.push(hh);
                }
            }
        }
        out = next;
    }
    out
}

fn history_label(p: &TabularPomdp, hh: &History<usize>) -> String {
    let mut parts = Vec::new();
    for (i, ob) in hh.obs.iter().enumerate() {
        if i > 0 {
            parts.push(p.actions[hh.actions[i - 1]].clone());
        }
        parts.push(p.observations[*ob].clone());
    }
    parts.join("/")
}

fn check_policy(p: &TabularPomdp, policy: &TabularPolicy<usize>) -> Result<()> {
    if policy.actions() != p.actions.as_slice() {
        return Err(Error::DomainMismatch(format!(
            "policy actions {:?} differ from the POMDP's {:?}",
            policy.actions(),
            p.actions
        )));
    }
    if policy.featurizer().uses_rewards() {
        return Err(Error::DomainMismatch("compiled histories carry no rewards; use a reward-free featurizer".into()));
    }
    Ok(())
}

fn policy_table(p: &TabularPomdp, policy: &TabularPolicy<usize>, t: usize) -> ConditionalTable {
    ConditionalTable { support: p.actions.clone(), rows: histories(p, t).iter().map(|hh| policy.probs(hh)).collect() }
}

fn grid_points(p: &TabularPomdp, policy: &TabularPolicy<usize>, t: usize) -> Result<Vec<f64>> {
    Ok(uniformize_with_breakpoints(a(t), &policy_table(p, policy, t), &[])?.breakpoints)
}

/// The coarsest grid on which every given policy is exactly representable.
pub fn action_grid(pomdp: &TabularPomdp, policies: &[&TabularPolicy<usize>]) -> Result<ActionGrid> {
    let mut grid = Vec::new();
    for t in 1..pomdp.horizon {
        let mut pts = Vec::new();
        for policy in policies {
            check_policy(pomdp, policy)?;
            pts.extend(grid_points(pomdp, policy, t)?);
        }
        grid.push(crate::scm::merge_breakpoints(pts));
    }
    Ok(ActionGrid(grid))
}

fn action_mechanism(
    pomdp: &TabularPomdp,
    policy: &TabularPolicy<usize>,
    grid: &ActionGrid,
    t: usize,
) -> Result<(Mechanism, NoiseSpec)> {
    let u = uniformize_with_breakpoints(format!("U_a{t}"), &policy_table(pomdp, policy, t), &grid.0[t - 1])?;
    if u.breakpoints.len() != grid.0[t - 1].len() {
        return Err(Error::DomainMismatch(format!("policy is not representable on the action grid at step {t}")));
    }
    Ok((u.mechanism(a(t), vec![h(t)]), u.noise))
}

pub fn compile(pomdp: &TabularPomdp, policy: &TabularPolicy<usize>) -> Result<Scm> {
    let grid = action_grid(pomdp, &[policy])?;
    compile_with_grid(pomdp, policy, &grid)
}

/// Compiles `old` on a grid shared with `new`, so that
/// [`policy_intervention`]`(old, new)` applies to the result.
pub fn compile_for_swap(pomdp: &TabularPomdp, old: &TabularPolicy<usize>, new: &TabularPolicy<usize>) -> Result<Scm> {
    let grid = action_grid(pomdp, &[old, new])?;
    compile_with_grid(pomdp, old, &grid)
}

/// `I(old → new)`: replaces every `A_t` mechanism by the inverse CDF of `new`
/// on the grid shared by both policies.
pub fn policy_intervention(pomdp: &TabularPomdp, old: &TabularPolicy<usize>, new: &TabularPolicy<usize>) -> Result<Intervention> {
    let grid = action_grid(pomdp, &[old, new])?;
    let mut i = Intervention::new();
    for t in 1..pomdp.horizon {
        i = i.replace(action_mechanism(pomdp, new, &grid, t)?.0);
    }
    Ok(i)
}

fn reward_values(pomdp: &TabularPomdp) -> Vec<f64> {
    let mut v = pomdp.reward.clone();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

fn nearest(values: &[f64], x: f64) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if (v - x).abs() < (values[best] - x).abs() {
            best = i;
        }
    }
    best
}

pub fn compile_with_grid(pomdp: &TabularPomdp, policy: &TabularPolicy<usize>, grid: &ActionGrid) -> Result<Scm> {
    pomdp.validate()?;
    check_policy(pomdp, policy)?;
    let horizon = pomdp.horizon;
    let (ns, na, no) = (pomdp.states.len(), pomdp.actions.len(), pomdp.observations.len());
    let point = |id: String| NoiseSpec::point(id);
    let mut nodes = Vec::new();
    let mut noises = Vec::new();
    let mut mechs = Vec::new();

    for t in 1..=horizon {
        nodes.push(Node::new(s(t), pomdp.states.clone()));
        if t == 1 {
            noises.push(NoiseSpec::new("U_s1", pomdp.states.clone(), pomdp.initial.clone())?);
            mechs.push(Mechanism::tabulate(s(1), vec![], "U_s1", &[], ns, |_, u| u));
        } else {
            let mut spec = pomdp.transition_noise.clone();
            spec.id = format!("U_s{t}");
            let nu = spec.len();
            noises.push(spec);
            mechs.push(Mechanism::tabulate(s(t), vec![s(t - 1), a(t - 1)], format!("U_s{t}"), &[ns, na], nu, |pa, u| {
                pomdp.next_state(pa[0], pa[1], u)
            }));
        }

        nodes.push(Node::new(o(t), pomdp.observations.clone()));
        let mut spec = pomdp.obs_noise.clone();
        spec.id = format!("U_o{t}");
        let nu = spec.len();
        noises.push(spec);
        mechs.push(Mechanism::tabulate(o(t), vec![s(t)], format!("U_o{t}"), &[ns], nu, |pa, u| pomdp.obs_of(pa[0], u)));

        if horizon == 1 {
            break;
        }

        let hs = histories(pomdp, t);
        nodes.push(Node::new(h(t), hs.iter().map(|hh| history_label(pomdp, hh)).collect()));
        noises.push(point(format!("U_h{t}")));
        if t == 1 {
            mechs.push(Mechanism::tabulate(h(1), vec![o(1)], "U_h1", &[no], 1, |pa, _| pa[0]));
        } else {
            let prev = histories(pomdp, t - 1).len();
            mechs.push(Mechanism::tabulate(
                h(t),
                vec![h(t - 1), a(t - 1), o(t)],
                format!("U_h{t}"),
                &[prev, na, no],
                1,
                |pa, _| (pa[0] * na + pa[1]) * no + pa[2],
            ));
        }

        if t < horizon {
            nodes.push(Node::new(a(t), pomdp.actions.clone()));
            let (m, spec) = action_mechanism(pomdp, policy, grid, t)?;
            noises.push(spec);
            mechs.push(m);
        }
    }

    if horizon > 1 {
        let rv = reward_values(pomdp);
        let labels: Vec<String> = rv.iter().map(|x| format!("{x}")).collect();
        for t in 1..horizon {
            nodes.push(Node::new(r(t), labels.clone()));
            noises.push(point(format!("U_r{t}")));
            mechs.push(Mechanism::tabulate(r(t), vec![s(t), a(t)], format!("U_r{t}"), &[ns, na], 1, |pa, _| {
                nearest(&rv, pomdp.reward[pa[0] * na + pa[1]])
            }));
        }
        let mut sums = vec![0.0];
        for _ in 1..horizon {
            let mut next: Vec<f64> = sums.iter().flat_map(|x| rv.iter().map(move |v| x + v)).collect();
            next.sort_by(f64::total_cmp);
            next.dedup_by(|x, y| (*x - *y).abs() < 1e-9);
            sums = next;
        }
        nodes.push(Node::new("G", sums.iter().map(|x| format!("{x}")).collect()));
        noises.push(point("U_g".into()));
        let parents: Vec<String> = (1..horizon).map(r).collect();
        mechs.push(Mechanism::tabulate("G", parents, "U_g", &vec![rv.len(); horizon - 1], 1, |pa, _| {
            nearest(&sums, pa.iter().map(|i| rv[*i]).sum())
        }));
    }
    Scm::new(nodes, noises, mechs)
}
