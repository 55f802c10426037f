//! POMDPs given by explicit tables.
//!
//! File format (same line syntax as SCM files):
//!
//! ```text
//! [pomdp]
//! states = L, R
//! actions = openL, openR
//! observations = L, R
//! horizon = 2
//! initial = 0.5, 0.5
//!
//! [transition]
//! support = 0
//! probs = 1
//! state=L action=openL noise=0 -> L
//! ...
//!
//! [observation]
//! support = ok, flip
//! probs = 0.8, 0.2
//! state=L noise=ok -> L
//! ...
//!
//! [reward]
//! state=L action=openL -> 1
//! ...
//! ```
//!
//! Reward rows that are omitted default to 0.

use std::collections::BTreeMap;

use rand::RngCore;

use super::{ActionModel, History, Pomdp};
use crate::error::{Error, Result};
use crate::kv;
use crate::scm::{sample_index, NoiseSpec};

#[derive(Debug, Clone, PartialEq)]
pub struct TabularPomdp {
    pub states: Vec<String>,
    pub actions: Vec<String>,
    pub observations: Vec<String>,
    pub horizon: usize,
    pub initial: Vec<f64>,
    pub transition_noise: NoiseSpec,
    /// `[s][a][u] -> s'`, row-major.
    pub transition: Vec<usize>,
    pub obs_noise: NoiseSpec,
    /// `[s][u] -> o`, row-major.
    pub observation: Vec<usize>,
    /// `[s][a]`, row-major.
    pub reward: Vec<f64>,
}

impl TabularPomdp {
    pub fn validate(&self) -> Result<()> {
        let (ns, na, no) = (self.states.len(), self.actions.len(), self.observations.len());
        let bad = |m: String| Err(Error::Input(m));
        if self.horizon == 0 {
            return bad("horizon must be at least 1".into());
        }
        if ns == 0 || na == 0 || no == 0 {
            return bad("state, action and observation sets must be non-empty".into());
        }
        NoiseSpec::new("U_s1", self.states.clone(), self.initial.clone())?;
        if self.transition.len() != ns * na * self.transition_noise.len() || self.transition.iter().any(|s| *s >= ns) {
            return bad("transition table is not total over states × actions × noise".into());
        }
        if self.observation.len() != ns * self.obs_noise.len() || self.observation.iter().any(|o| *o >= no) {
            return bad("observation table is not total over states × noise".into());
        }
        if self.reward.len() != ns * na || self.reward.iter().any(|r| !r.is_finite()) {
            return bad("reward table must be finite over states × actions".into());
        }
        Ok(())
    }

    pub fn state_index(&self, label: &str) -> Option<usize> {
        self.states.iter().position(|s| s == label)
    }

    pub fn obs_index(&self, label: &str) -> Option<usize> {
        self.observations.iter().position(|s| s == label)
    }

    pub fn obs_of(&self, s: usize, u: usize) -> usize {
        self.observation[s * self.obs_noise.len() + u]
    }

    pub fn next_state(&self, s: usize, a: usize, u: usize) -> usize {
        self.transition[(s * self.actions.len() + a) * self.transition_noise.len() + u]
    }

    pub fn to_text(&self) -> String {
        let fmt_probs = |p: &[f64]| p.iter().map(|x| format!("{x}")).collect::<Vec<_>>().join(", ");
        let mut out = format!(
            "[pomdp]\nstates = {}\nactions = {}\nobservations = {}\nhorizon = {}\ninitial = {}\n\n",
            self.states.join(", "),
            self.actions.join(", "),
            self.observations.join(", "),
            self.horizon,
            fmt_probs(&self.initial)
        );
        out.push_str(&format!(
            "[transition]\nsupport = {}\nprobs = {}\n",
            self.transition_noise.support.join(", "),
            fmt_probs(&self.transition_noise.probs)
        ));
        for (s, sl) in self.states.iter().enumerate() {
            for (a, al) in self.actions.iter().enumerate() {
                for (u, ul) in self.transition_noise.support.iter().enumerate() {
                    out.push_str(&format!("state={sl} action={al} noise={ul} -> {}\n", self.states[self.next_state(s, a, u)]));
                }
            }
        }
        out.push_str(&format!(
            "\n[observation]\nsupport = {}\nprobs = {}\n",
            self.obs_noise.support.join(", "),
            fmt_probs(&self.obs_noise.probs)
        ));
        for (s, sl) in self.states.iter().enumerate() {
            for (u, ul) in self.obs_noise.support.iter().enumerate() {
                out.push_str(&format!("state={sl} noise={ul} -> {}\n", self.observations[self.obs_of(s, u)]));
            }
        }
        out.push_str("\n[reward]\n");
        for (s, sl) in self.states.iter().enumerate() {
            for (a, al) in self.actions.iter().enumerate() {
                out.push_str(&format!("state={sl} action={al} -> {}\n", self.reward[s * self.actions.len() + a]));
            }
        }
        out
    }
}

pub fn parse_pomdp(text: &str) -> Result<TabularPomdp> {
    let perr = |line: usize, msg: String| Error::Parse { line, msg };
    let sections = kv::parse(text)?;
    let find = |name: &str| {
        let mut it = sections.iter().filter(|s| s.name == name);
        let first = it.next();
        match (first, it.next()) {
            (Some(s), None) => Ok(s),
            (None, _) => Err(perr(0, format!("missing section [{name}]"))),
            (Some(_), Some(dup)) => Err(perr(dup.line, format!("duplicate section [{name}]"))),
        }
    };
    for s in &sections {
        if !["pomdp", "transition", "observation", "reward"].contains(&s.name.as_str()) {
            return Err(perr(s.line, format!("unknown section [{}]", s.name)));
        }
    }
    let head = find("pomdp")?;
    head.check_keys(&["states", "actions", "observations", "horizon", "initial"])?;
    let states = kv::list(&head.require("states")?.value);
    let actions = kv::list(&head.require("actions")?.value);
    let observations = kv::list(&head.require("observations")?.value);
    let h = head.require("horizon")?;
    let horizon: usize = h.value.parse().map_err(|_| perr(h.line, format!("`{}` is not a horizon", h.value)))?;
    let init = head.require("initial")?;
    let initial = kv::parse_f64_list(&init.value, init.line)?;

    let noise_of = |s: &kv::Section, id: &str| -> Result<NoiseSpec> {
        s.check_keys(&["support", "probs"])?;
        let p = s.require("probs")?;
        NoiseSpec::new(id, kv::list(&s.require("support")?.value), kv::parse_f64_list(&p.value, p.line)?)
            .map_err(|e| perr(s.line, e.to_string()))
    };
    let pos = |dom: &[String], v: &str, line: usize, what: &str| {
        dom.iter().position(|d| d == v).ok_or_else(|| perr(line, format!("`{v}` is not a known {what}")))
    };

    let tsec = find("transition")?;
    let transition_noise = noise_of(tsec, "U_s")?;
    let (ns, na, nu) = (states.len(), actions.len(), transition_noise.len());
    let mut transition = vec![None; ns * na * nu];
    for r in &tsec.rows {
        let f: BTreeMap<String, String> = kv::row_fields(&r.lhs, r.line)?.into_iter().collect();
        let get = |k: &str| f.get(k).ok_or_else(|| perr(r.line, format!("row is missing `{k}=`")));
        let s = pos(&states, get("state")?, r.line, "state")?;
        let a = pos(&actions, get("action")?, r.line, "action")?;
        let u = pos(&transition_noise.support, get("noise")?, r.line, "noise value")?;
        let next = pos(&states, &r.rhs, r.line, "state")?;
        if transition[(s * na + a) * nu + u].replace(next).is_some() {
            return Err(perr(r.line, "duplicate transition row".into()));
        }
    }
    let transition: Vec<usize> =
        transition.into_iter().collect::<Option<_>>().ok_or_else(|| perr(tsec.line, "transition table is not total".into()))?;

    let osec = find("observation")?;
    let obs_noise = noise_of(osec, "U_o")?;
    let mut observation = vec![None; ns * obs_noise.len()];
    for r in &osec.rows {
        let f: BTreeMap<String, String> = kv::row_fields(&r.lhs, r.line)?.into_iter().collect();
        let get = |k: &str| f.get(k).ok_or_else(|| perr(r.line, format!("row is missing `{k}=`")));
        let s = pos(&states, get("state")?, r.line, "state")?;
        let u = pos(&obs_noise.support, get("noise")?, r.line, "noise value")?;
        let o = pos(&observations, &r.rhs, r.line, "observation")?;
        if observation[s * obs_noise.len() + u].replace(o).is_some() {
            return Err(perr(r.line, "duplicate observation row".into()));
        }
    }
    let observation: Vec<usize> =
        observation.into_iter().collect::<Option<_>>().ok_or_else(|| perr(osec.line, "observation table is not total".into()))?;

    let rsec = find("reward")?;
    rsec.check_keys(&[])?;
    let mut reward = vec![0.0; ns * na];
    for r in &rsec.rows {
        let f: BTreeMap<String, String> = kv::row_fields(&r.lhs, r.line)?.into_iter().collect();
        let get = |k: &str| f.get(k).ok_or_else(|| perr(r.line, format!("row is missing `{k}=`")));
        let s = pos(&states, get("state")?, r.line, "state")?;
        let a = pos(&actions, get("action")?, r.line, "action")?;
        reward[s * na + a] = r.rhs.parse().map_err(|_| perr(r.line, format!("`{}` is not a number", r.rhs)))?;
    }

    let p = TabularPomdp {
        states,
        actions,
        observations,
        horizon,
        initial,
        transition_noise,
        transition,
        obs_noise,
        observation,
        reward,
    };
    p.validate()?;
    Ok(p)
}

impl Pomdp for TabularPomdp {
    type State = usize;
    type Obs = usize;
    type ObsNoise = usize;

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn n_actions(&self) -> usize {
        self.actions.len()
    }

    fn action_names(&self) -> Vec<String> {
        self.actions.clone()
    }

    fn scenario_prior(&self) -> Result<Vec<(usize, f64)>> {
        Ok(self.initial.iter().copied().enumerate().filter(|(_, p)| *p > 0.0).collect())
    }

    fn sample_scenario(&self, rng: &mut dyn RngCore) -> usize {
        sample_index(&self.initial, rng)
    }

    fn transition_noise(&self) -> &[f64] {
        &self.transition_noise.probs
    }

    fn transition(&self, s: &usize, a: usize, u: usize) -> usize {
        self.next_state(*s, a, u)
    }

    fn reward(&self, s: &usize, a: usize) -> f64 {
        self.reward[s * self.actions.len() + a]
    }

    fn reward_bounds(&self) -> (f64, f64) {
        let lo = self.reward.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = self.reward.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    }

    fn sample_obs_noise(&self, rng: &mut dyn RngCore) -> usize {
        self.obs_noise.sample(rng)
    }

    fn observe(&self, s: &usize, noise: &usize) -> usize {
        self.obs_of(*s, *noise)
    }

    fn obs_likelihood(&self, s: &usize, o: &usize) -> f64 {
        (0..self.obs_noise.len()).filter(|u| self.obs_of(*s, *u) == *o).map(|u| self.obs_noise.probs[u]).sum()
    }

    fn sample_obs_noise_given(&self, s: &usize, o: &usize, rng: &mut dyn RngCore) -> Option<usize> {
        let w: Vec<f64> =
            (0..self.obs_noise.len()).map(|u| if self.obs_of(*s, u) == *o { self.obs_noise.probs[u] } else { 0.0 }).collect();
        if w.iter().sum::<f64>() <= 0.0 {
            return None;
        }
        let z: f64 = w.iter().sum();
        let w: Vec<f64> = w.into_iter().map(|x| x / z).collect();
        Some(sample_index(&w, rng))
    }
}

/// Observations, actions and return label of an episode.
pub type TrajectoryKey = (Vec<usize>, Vec<usize>, String);

/// Exact distribution of `(o_1..o_T, a_1..a_{T-1}, G)` from the simulator, by
/// enumerating the initial state, every noise value and every action.
pub fn exact_trajectory_distribution<M: ActionModel<usize, usize> + ?Sized>(
    pomdp: &TabularPomdp,
    policy: &M,
) -> BTreeMap<TrajectoryKey, f64> {
    fn go<M: ActionModel<usize, usize> + ?Sized>(
        p: &TabularPomdp,
        policy: &M,
        s: usize,
        h: &mut History<usize>,
        prob: f64,
        out: &mut BTreeMap<TrajectoryKey, f64>,
    ) {
        for (u, pu) in p.obs_noise.probs.iter().enumerate() {
            if *pu <= 0.0 {
                continue;
            }
            h.obs.push(p.obs_of(s, u));
            if h.obs.len() == p.horizon {
                let g: f64 = h.rewards.iter().sum();
                *out.entry((h.obs.clone(), h.actions.clone(), format!("{g}"))).or_insert(0.0) += prob * pu;
            } else {
                let probs = policy.action_probs(h, &s);
                for (a, pa) in probs.iter().enumerate() {
                    if *pa <= 0.0 {
                        continue;
                    }
                    h.actions.push(a);
                    h.rewards.push(p.reward[s * p.actions.len() + a]);
                    for (v, pv) in p.transition_noise.probs.iter().enumerate() {
                        if *pv > 0.0 {
                            go(p, policy, p.next_state(s, a, v), h, prob * pu * pa * pv, out);
                        }
                    }
                    h.actions.pop();
                    h.rewards.pop();
                }
            }
            h.obs.pop();
        }
    }
    let mut out = BTreeMap::new();
    for (s, ps) in pomdp.initial.iter().enumerate() {
        if *ps > 0.0 {
            go(pomdp, policy, s, &mut History::default(), *ps, &mut out);
        }
    }
    out
}
