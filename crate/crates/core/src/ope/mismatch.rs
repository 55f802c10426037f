//! Controlled model mismatch: a model whose scenario prior is partly wrong
//! while its dynamics, observations and rewards are exact.

use std::collections::BTreeMap;

use rand::{Rng, RngCore};

use crate::envs::gridpush::{GridPushPomdp, Level};
use crate::error::{Error, Result};
use crate::pomdp::Pomdp;
use crate::scm::sample_index;

/// Environments that can name a distribution of broken initial states.
pub trait Corruptible: Pomdp {
    fn degenerate_prior(&self) -> Result<Vec<(Self::State, f64)>>;
}

impl Corruptible for GridPushPomdp {
    fn degenerate_prior(&self) -> Result<Vec<(Level, f64)>> {
        GridPushPomdp::degenerate_prior(self)
    }
}

/// Scenario prior `(1 − ε)·base + ε·degenerate`.
#[derive(Debug, Clone)]
pub struct MismatchedModel<P: Pomdp> {
    base: P,
    epsilon: f64,
    degenerate: Vec<(P::State, f64)>,
    degenerate_weights: Vec<f64>,
    merged: Option<Vec<(P::State, f64)>>,
}

pub fn corrupt_prior<P: Corruptible + Clone>(model: &P, epsilon: f64) -> Result<MismatchedModel<P>> {
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(Error::Input(format!("corruption {epsilon} is not in [0, 1]")));
    }
    let degenerate = model.degenerate_prior()?;
    let degenerate_weights = degenerate.iter().map(|(_, w)| *w).collect();
    let merged = model.scenario_prior().ok().map(|base| {
        let mut m: BTreeMap<P::State, f64> = BTreeMap::new();
        for (s, w) in base {
            *m.entry(s).or_insert(0.0) += (1.0 - epsilon) * w;
        }
        for (s, w) in &degenerate {
            *m.entry(s.clone()).or_insert(0.0) += epsilon * w;
        }
        m.into_iter().filter(|(_, w)| *w > 0.0).collect()
    });
    Ok(MismatchedModel { base: model.clone(), epsilon, degenerate, degenerate_weights, merged })
}

impl<P: Pomdp> MismatchedModel<P> {
    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn base(&self) -> &P {
        &self.base
    }

    pub fn degenerate(&self) -> &[(P::State, f64)] {
        &self.degenerate
    }
}

impl<P: Pomdp> Pomdp for MismatchedModel<P> {
    type State = P::State;
    type Obs = P::Obs;
    type ObsNoise = P::ObsNoise;

    fn horizon(&self) -> usize {
        self.base.horizon()
    }

    fn n_actions(&self) -> usize {
        self.base.n_actions()
    }

    fn action_names(&self) -> Vec<String> {
        self.base.action_names()
    }

    fn scenario_prior(&self) -> Result<Vec<(P::State, f64)>> {
        match &self.merged {
            Some(m) => Ok(m.clone()),
            None => self.base.scenario_prior(),
        }
    }

    fn sample_scenario(&self, rng: &mut dyn RngCore) -> P::State {
        if self.epsilon == 0.0 {
            return self.base.sample_scenario(rng);
        }
        if rng.gen::<f64>() < self.epsilon {
            self.degenerate[sample_index(&self.degenerate_weights, rng)].0.clone()
        } else {
            self.base.sample_scenario(rng)
        }
    }

    fn transition_noise(&self) -> &[f64] {
        self.base.transition_noise()
    }

    fn transition(&self, s: &P::State, a: usize, u: usize) -> P::State {
        self.base.transition(s, a, u)
    }

    fn reward(&self, s: &P::State, a: usize) -> f64 {
        self.base.reward(s, a)
    }

    fn reward_bounds(&self) -> (f64, f64) {
        self.base.reward_bounds()
    }

    fn sample_obs_noise(&self, rng: &mut dyn RngCore) -> P::ObsNoise {
        self.base.sample_obs_noise(rng)
    }

    fn observe(&self, s: &P::State, noise: &P::ObsNoise) -> P::Obs {
        self.base.observe(s, noise)
    }

    fn obs_likelihood(&self, s: &P::State, o: &P::Obs) -> f64 {
        self.base.obs_likelihood(s, o)
    }

    fn sample_obs_noise_given(&self, s: &P::State, o: &P::Obs, rng: &mut dyn RngCore) -> Option<P::ObsNoise> {
        self.base.sample_obs_noise_given(s, o, rng)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::gridpush::{solvable_check, GridPushConfig, DEFAULT_SOLVER_CAP};
    use crate::pomdp::{env_rollout, UniformPolicy};
    use rand::SeedableRng;

    fn env() -> GridPushPomdp {
        GridPushPomdp::with_catalogue_draws(GridPushConfig::desk(), 11, 300).unwrap()
    }

    #[test]
    fn zero_corruption_is_the_base_model() {
        let e = env();
        let m = corrupt_prior(&e, 0.0).unwrap();
        let mut r1 = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let mut r2 = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        for _ in 0..50 {
            assert_eq!(env_rollout(&e, &UniformPolicy(5), &mut r1), env_rollout(&m, &UniformPolicy(5), &mut r2));
        }
        assert_eq!(m.scenario_prior().unwrap(), e.scenario_prior().unwrap());
    }

    #[test]
    fn full_corruption_starts_degenerate() {
        let e = env();
        let m = corrupt_prior(&e, 1.0).unwrap();
        let total: f64 = m.scenario_prior().unwrap().iter().map(|(_, w)| w).sum();
        assert!((total - 1.0).abs() < 1e-12);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        for _ in 0..50 {
            let s = m.sample_scenario(&mut rng);
            assert!(!solvable_check(&s, DEFAULT_SOLVER_CAP).unwrap());
        }
        assert!(corrupt_prior(&e, 1.5).is_err());
    }
}
