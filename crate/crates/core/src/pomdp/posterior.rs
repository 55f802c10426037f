//! Exact scenario posterior given an episode prefix.
//!
//! Conditioning on `ĥ_t = (o_1, a_1, r_1, ..., o_t)` constrains the initial
//! state, the first `t − 1` transition noise values and the first `t`
//! observation noise values. Their joint posterior is computed by forward
//! filtering over states and sampled backwards; observation noise is then drawn
//! from `p(u_o | s, o)`. Every later noise value and all action noise keep their
//! prior, so a draw is a mixed counterfactual/prior scenario.

use std::collections::BTreeMap;

use rand::Rng;

use super::{run_episode, sample_noise_from, ActionModel, Pomdp, ScenarioNoise, Trajectory};
use crate::error::{Error, Result};
use crate::scm::sample_index;

const REWARD_TOL: f64 = 1e-9;

pub struct EpisodePosterior<'a, P: Pomdp + ?Sized> {
    pomdp: &'a P,
    t: usize,
    obs: Vec<P::Obs>,
    actions: Vec<usize>,
    rewards: Vec<f64>,
    /// Normalised filtering distributions `p(s_k | ĥ_k)` for `k = 1..t`.
    filter: Vec<Vec<(P::State, f64)>>,
    evidence: f64,
}

impl<'a, P: Pomdp + ?Sized> EpisodePosterior<'a, P> {
    /// Posterior given the first `t` observations of `traj` (and the actions and
    /// rewards between them). `t = 0` is the prior.
    pub fn new(pomdp: &'a P, traj: &Trajectory<P::State, P::Obs>, t: usize) -> Result<Self> {
        let t = t.min(traj.obs.len());
        let k = t.saturating_sub(1);
        let mut post = Self {
            pomdp,
            t,
            obs: traj.obs[..t].to_vec(),
            actions: traj.actions[..k].to_vec(),
            rewards: traj.rewards[..k].to_vec(),
            filter: Vec::with_capacity(t),
            evidence: 1.0,
        };
        if t == 0 {
            return Ok(post);
        }
        let mut alpha: BTreeMap<P::State, f64> = BTreeMap::new();
        for (s, p) in pomdp.scenario_prior()? {
            let w = p * pomdp.obs_likelihood(&s, &post.obs[0]);
            if w > 0.0 {
                *alpha.entry(s).or_insert(0.0) += w;
            }
        }
        post.push(alpha)?;
        let noise = pomdp.transition_noise();
        for step in 1..t {
            let (a, r, o) = (post.actions[step - 1], post.rewards[step - 1], &post.obs[step]);
            let mut next: BTreeMap<P::State, f64> = BTreeMap::new();
            for (s, w) in &post.filter[step - 1] {
                if (pomdp.reward(s, a) - r).abs() > REWARD_TOL {
                    continue;
                }
                for (u, pu) in noise.iter().enumerate() {
                    if *pu <= 0.0 {
                        continue;
                    }
                    let s2 = pomdp.transition(s, a, u);
                    let l = pomdp.obs_likelihood(&s2, o);
                    if l > 0.0 {
                        *next.entry(s2).or_insert(0.0) += w * pu * l;
                    }
                }
            }
            post.push(next)?;
        }
        Ok(post)
    }

    fn push(&mut self, alpha: BTreeMap<P::State, f64>) -> Result<()> {
        let z: f64 = alpha.values().sum();
        if alpha.is_empty() || z <= 0.0 {
            return Err(Error::Contradiction);
        }
        self.evidence *= z;
        self.filter.push(alpha.into_iter().map(|(s, w)| (s, w / z)).collect());
        Ok(())
    }

    pub fn conditioning_steps(&self) -> usize {
        self.t
    }

    /// `p(ĥ_t)` up to the action probabilities, which do not depend on the scenario.
    pub fn evidence(&self) -> f64 {
        self.evidence
    }

    /// `p(s_k | ĥ_k)` for `k = 1..=t` (1-based).
    pub fn filtered(&self, k: usize) -> &[(P::State, f64)] {
        &self.filter[k - 1]
    }

    /// Exact smoothed posterior of the initial state `p(s_1 | ĥ_t)`.
    pub fn initial_state(&self) -> Result<Vec<(P::State, f64)>> {
        if self.t == 0 {
            return self.pomdp.scenario_prior();
        }
        // backward pass over the deterministic-given-noise transitions
        let mut beta: BTreeMap<P::State, f64> = self.filter[self.t - 1].iter().map(|(s, _)| (s.clone(), 1.0)).collect();
        let noise = self.pomdp.transition_noise();
        for step in (1..self.t).rev() {
            let (a, r, o) = (self.actions[step - 1], self.rewards[step - 1], &self.obs[step]);
            let mut prev = BTreeMap::new();
            for (s, _) in &self.filter[step - 1] {
                let mut b = 0.0;
                if (self.pomdp.reward(s, a) - r).abs() <= REWARD_TOL {
                    for (u, pu) in noise.iter().enumerate() {
                        if *pu > 0.0 {
                            let s2 = self.pomdp.transition(s, a, u);
                            if let Some(bb) = beta.get(&s2) {
                                b += pu * self.pomdp.obs_likelihood(&s2, o) * bb;
                            }
                        }
                    }
                }
                prev.insert(s.clone(), b);
            }
            beta = prev;
        }
        let mut out: Vec<(P::State, f64)> =
            self.filter[0].iter().map(|(s, w)| (s.clone(), w * beta.get(s).copied().unwrap_or(0.0))).collect();
        let z: f64 = out.iter().map(|(_, w)| w).sum();
        for (_, w) in &mut out {
            *w /= z;
        }
        Ok(out)
    }

    /// One scenario: conditioned noise from the posterior, the rest from the prior.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> ScenarioNoise<P::State, P::ObsNoise> {
        if self.t == 0 {
            let s1 = self.pomdp.sample_scenario(rng);
            return sample_noise_from(self.pomdp, s1, rng);
        }
        let mut states = vec![None; self.t];
        let mut trans = vec![0usize; self.t - 1];
        let last = &self.filter[self.t - 1];
        let w: Vec<f64> = last.iter().map(|(_, w)| *w).collect();
        states[self.t - 1] = Some(last[sample_index(&w, rng)].0.clone());
        let noise = self.pomdp.transition_noise();
        for step in (0..self.t - 1).rev() {
            let target = states[step + 1].clone().expect("filled");
            let (a, r) = (self.actions[step], self.rewards[step]);
            let mut cands = Vec::new();
            let mut weights = Vec::new();
            for (s, ws) in &self.filter[step] {
                if (self.pomdp.reward(s, a) - r).abs() > REWARD_TOL {
                    continue;
                }
                for (u, pu) in noise.iter().enumerate() {
                    if *pu > 0.0 && self.pomdp.transition(s, a, u) == target {
                        cands.push((s, u));
                        weights.push(ws * pu);
                    }
                }
            }
            let (s, u) = cands[sample_index(&weights, rng)];
            states[step] = Some(s.clone());
            trans[step] = u;
        }
        let states: Vec<P::State> = states.into_iter().map(|s| s.expect("filled")).collect();
        let mut out = sample_noise_from(self.pomdp, states[0].clone(), rng);
        out.transition[..self.t - 1].copy_from_slice(&trans);
        for (k, (s, o)) in states.iter().zip(&self.obs).enumerate() {
            out.obs[k] = self.pomdp.sample_obs_noise_given(s, o, rng).expect("filtered states explain their observations");
        }
        out
    }

    /// A counterfactual episode under `policy` with fresh action noise.
    pub fn rollout<M, R>(&self, policy: &M, rng: &mut R) -> Trajectory<P::State, P::Obs>
    where
        M: ActionModel<P::Obs, P::State> + ?Sized,
        R: Rng,
    {
        let noise = self.sample(rng);
        run_episode(self.pomdp, policy, &noise, rng)
    }
}
