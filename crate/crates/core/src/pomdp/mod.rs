//! POMDPs as unrolled structural causal models.
//!
//! An episode of horizon `T` has states `s_1..s_T`, observations `o_1..o_T`,
//! actions `a_1..a_{T-1}` and rewards `r_t = r(s_t, a_t)`. All randomness is
//! exogenous: the initial state, one transition noise value per step, one
//! observation noise value per step and one action noise value per step.
//! [`ScenarioNoise`] holds the environment part of it, so a rollout is a
//! deterministic function of a scenario and the action draws.

mod compile;
mod policy;
mod posterior;
mod tabular;

pub use compile::{action_grid, compile, compile_for_swap, compile_with_grid, node_count, policy_intervention, ActionGrid};
pub use policy::{ActionModel, Featurizer, FullHistory, LastObservations, PlannerMixture, TabularPolicy, Token, UniformPolicy};
pub use posterior::EpisodePosterior;
pub use tabular::{exact_trajectory_distribution, parse_pomdp, TabularPomdp, TrajectoryKey};

use std::fmt::Debug;
use std::hash::Hash;

use rand::Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::scm::sample_index;

pub trait Pomdp: Send + Sync {
    type State: Clone + Eq + Ord + Hash + Debug + Send + Sync + Serialize + DeserializeOwned;
    type Obs: Token + Clone + Eq + Hash + Debug + Send + Sync + Serialize + DeserializeOwned;
    type ObsNoise: Clone + Debug + Send + Sync;

    fn horizon(&self) -> usize;
    fn n_actions(&self) -> usize;
    fn action_names(&self) -> Vec<String>;

    /// The initial-state distribution as an explicit list. Sampler-only
    /// environments return a capacity error.
    fn scenario_prior(&self) -> Result<Vec<(Self::State, f64)>>;
    fn sample_scenario(&self, rng: &mut dyn rand::RngCore) -> Self::State;

    /// Probabilities of the per-step transition noise values.
    fn transition_noise(&self) -> &[f64];
    fn transition(&self, s: &Self::State, a: usize, u: usize) -> Self::State;
    fn reward(&self, s: &Self::State, a: usize) -> f64;
    /// Bounds on a single step's reward.
    fn reward_bounds(&self) -> (f64, f64);

    fn sample_obs_noise(&self, rng: &mut dyn rand::RngCore) -> Self::ObsNoise;
    fn observe(&self, s: &Self::State, noise: &Self::ObsNoise) -> Self::Obs;
    /// `P(o | s)`, marginalising the observation noise.
    fn obs_likelihood(&self, s: &Self::State, o: &Self::Obs) -> f64;
    /// Draw from `p(noise | s, o)`; `None` if `o` is impossible in `s`.
    fn sample_obs_noise_given(&self, s: &Self::State, o: &Self::Obs, rng: &mut dyn rand::RngCore) -> Option<Self::ObsNoise>;
}

/// The agent's view of an episode prefix: `o_1, a_1, r_1, ..., o_t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct History<O> {
    pub obs: Vec<O>,
    pub actions: Vec<usize>,
    pub rewards: Vec<f64>,
}

impl<O> Default for History<O> {
    fn default() -> Self {
        Self { obs: vec![], actions: vec![], rewards: vec![] }
    }
}

impl<O: Clone> History<O> {
    /// 1-based index of the current step.
    pub fn step(&self) -> usize {
        self.obs.len()
    }

    pub fn last_obs(&self) -> Option<&O> {
        self.obs.last()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "S: Serialize, O: Serialize", deserialize = "S: DeserializeOwned, O: DeserializeOwned"))]
pub struct Trajectory<S, O> {
    pub states: Vec<S>,
    pub obs: Vec<O>,
    pub actions: Vec<usize>,
    pub rewards: Vec<f64>,
    /// Log-probability of each action under the policy that generated it.
    pub logp: Vec<f64>,
}

impl<S: Clone, O: Clone> Trajectory<S, O> {
    pub fn len(&self) -> usize {
        self.obs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.obs.is_empty()
    }

    /// The prefix up to and including observation `t` (1-based); `t = 0` is empty.
    pub fn history(&self, t: usize) -> History<O> {
        let t = t.min(self.obs.len());
        let k = t.saturating_sub(1);
        History { obs: self.obs[..t].to_vec(), actions: self.actions[..k].to_vec(), rewards: self.rewards[..k].to_vec() }
    }

    pub fn behaviour_loglik(&self) -> f64 {
        self.logp.iter().sum()
    }
}

/// Environment noise for one episode.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioNoise<S, N> {
    pub s1: S,
    /// `transition[t]` drives `s_{t+1} -> s_{t+2}` (0-based), length `T - 1`.
    pub transition: Vec<usize>,
    /// One value per observation, length `T`.
    pub obs: Vec<N>,
}

/// Prior draw of every environment noise variable.
pub fn sample_scenario_noise<P: Pomdp + ?Sized, R: Rng>(pomdp: &P, rng: &mut R) -> ScenarioNoise<P::State, P::ObsNoise> {
    let s1 = pomdp.sample_scenario(rng);
    sample_noise_from(pomdp, s1, rng)
}

pub(crate) fn sample_noise_from<P: Pomdp + ?Sized, R: Rng>(
    pomdp: &P,
    s1: P::State,
    rng: &mut R,
) -> ScenarioNoise<P::State, P::ObsNoise> {
    let t = pomdp.horizon();
    let transition = (0..t.saturating_sub(1)).map(|_| sample_index(pomdp.transition_noise(), rng)).collect();
    let obs = (0..t).map(|_| pomdp.sample_obs_noise(rng)).collect();
    ScenarioNoise { s1, transition, obs }
}

/// Runs `policy` against fixed environment noise; actions are drawn from `rng`.
pub fn run_episode<P, M, R>(
    pomdp: &P,
    policy: &M,
    noise: &ScenarioNoise<P::State, P::ObsNoise>,
    rng: &mut R,
) -> Trajectory<P::State, P::Obs>
where
    P: Pomdp + ?Sized,
    M: ActionModel<P::Obs, P::State> + ?Sized,
    R: Rng,
{
    let horizon = pomdp.horizon();
    let mut s = noise.s1.clone();
    let mut h = History { obs: Vec::with_capacity(horizon), actions: vec![], rewards: vec![] };
    let mut states = Vec::with_capacity(horizon);
    let mut logp = Vec::with_capacity(horizon);
    h.obs.push(pomdp.observe(&s, &noise.obs[0]));
    states.push(s.clone());
    for t in 0..horizon.saturating_sub(1) {
        let probs = policy.action_probs(&h, &s);
        let a = sample_index(&probs, rng);
        logp.push(probs[a].ln());
        let r = pomdp.reward(&s, a);
        s = pomdp.transition(&s, a, noise.transition[t]);
        h.actions.push(a);
        h.rewards.push(r);
        h.obs.push(pomdp.observe(&s, &noise.obs[t + 1]));
        states.push(s.clone());
    }
    Trajectory { states, obs: h.obs, actions: h.actions, rewards: h.rewards, logp }
}

/// One episode in the environment with everything drawn from the prior.
pub fn env_rollout<P, M, R>(pomdp: &P, policy: &M, rng: &mut R) -> Trajectory<P::State, P::Obs>
where
    P: Pomdp + ?Sized,
    M: ActionModel<P::Obs, P::State> + ?Sized,
    R: Rng,
{
    let noise = sample_scenario_noise(pomdp, rng);
    run_episode(pomdp, policy, &noise, rng)
}

/// Undiscounted return.
pub fn trajectory_return<S, O>(t: &Trajectory<S, O>) -> f64 {
    t.rewards.iter().sum()
}

/// `Σ_t log π(a_t | h_t)`; `-inf` if some logged action has probability zero.
pub fn action_loglik<S: Clone, O: Clone, M: ActionModel<O, S> + ?Sized>(policy: &M, t: &Trajectory<S, O>) -> f64 {
    let mut total = 0.0;
    for k in 0..t.actions.len() {
        let h = t.history(k + 1);
        let p = policy.action_probs(&h, &t.states[k])[t.actions[k]];
        if p <= 0.0 {
            return f64::NEG_INFINITY;
        }
        total += p.ln();
    }
    total
}
