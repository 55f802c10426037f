//! The grid as a [`Pomdp`].
//!
//! The initial-state distribution is a fixed catalogue: [`CATALOGUE_DRAWS`]
//! generator draws from a seeded stream, deduplicated and weighted by how often
//! each level came up. Both the true environment and the exact model use it,
//! which makes the prior enumerable. Without a catalogue the environment samples
//! the generator directly and exact inference is unavailable.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::Arc;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use super::{cell_char, generate_level, is_box, is_target, sample_mask, DpExpert, GridPushConfig, Level, ACTIONS, BOX, EMPTY};
use crate::error::{Error, Result};
use crate::pomdp::{Featurizer, History, Pomdp, Token};
use crate::rng::{tag, SeedStream};
use crate::scm::sample_index;

pub const CATALOGUE_DRAWS: usize = 4096;

/// An observed grid: masked cells read as empty.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GridObs(pub Vec<u8>);

impl Token for GridObs {
    fn token(&self) -> String {
        self.0.iter().map(|c| cell_char(*c)).collect()
    }
}

impl GridObs {
    pub fn agent(&self) -> Option<usize> {
        self.0.iter().position(|c| super::is_agent(*c))
    }
}

#[derive(Debug)]
struct Catalogue {
    levels: Vec<(Level, f64)>,
    weights: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct GridPushPomdp {
    cfg: GridPushConfig,
    catalogue: Option<Arc<Catalogue>>,
}

const NO_TRANSITION_NOISE: [f64; 1] = [1.0];

impl GridPushPomdp {
    /// Sampler-only environment over fresh generator draws.
    pub fn new(cfg: GridPushConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self { cfg, catalogue: None })
    }

    pub fn with_catalogue(cfg: GridPushConfig, seed: u64) -> Result<Self> {
        Self::with_catalogue_draws(cfg, seed, CATALOGUE_DRAWS)
    }

    pub fn with_catalogue_draws(cfg: GridPushConfig, seed: u64, draws: usize) -> Result<Self> {
        cfg.validate()?;
        if draws == 0 {
            return Err(Error::Input("catalogue needs at least one draw".into()));
        }
        let mut rng = SeedStream::new(seed).rng(tag::CATALOGUE, 0);
        let mut counts: BTreeMap<Level, usize> = BTreeMap::new();
        for _ in 0..draws {
            *counts.entry(generate_level(&cfg, &mut rng)?).or_insert(0) += 1;
        }
        let levels: Vec<(Level, f64)> = counts.into_iter().map(|(l, c)| (l, c as f64 / draws as f64)).collect();
        let weights = levels.iter().map(|(_, w)| *w).collect();
        Ok(Self { cfg, catalogue: Some(Arc::new(Catalogue { levels, weights })) })
    }

    pub fn config(&self) -> &GridPushConfig {
        &self.cfg
    }

    /// Catalogue levels with their probabilities, indexed by level id.
    pub fn catalogue(&self) -> Option<&[(Level, f64)]> {
        self.catalogue.as_ref().map(|c| c.levels.as_slice())
    }

    fn require_catalogue(&self) -> Result<&Catalogue> {
        // the generator's support is far too large to enumerate without one
        self.catalogue.as_deref().ok_or(Error::Capacity { size: u128::MAX, cap: crate::scm::DEFAULT_ENUMERATION_CAP })
    }

    /// Every catalogue level with its box moved into a dead corner, weighted like its source.
    pub fn degenerate_prior(&self) -> Result<Vec<(Level, f64)>> {
        let cat = self.require_catalogue()?;
        let mut out: BTreeMap<Level, f64> = BTreeMap::new();
        for (l, w) in &cat.levels {
            if let Some(d) = degenerate_variant(l) {
                *out.entry(d).or_insert(0.0) += w;
            }
        }
        let z: f64 = out.values().sum();
        if z <= 0.0 {
            return Err(Error::Input("no catalogue level has a free corner".into()));
        }
        Ok(out.into_iter().map(|(l, w)| (l, w / z)).collect())
    }

    /// The dynamic-programming planner over catalogue and degenerate levels.
    pub fn expert(&self) -> Result<DpExpert> {
        let mut starts: Vec<Level> = self.require_catalogue()?.levels.iter().map(|(l, _)| l.clone()).collect();
        starts.extend(self.degenerate_prior()?.into_iter().map(|(l, _)| l));
        Ok(DpExpert::new(&self.cfg, starts.iter()))
    }

    /// Exact expected return of the expert under the catalogue prior.
    pub fn expert_value(&self, expert: &DpExpert) -> Result<f64> {
        let mut v = 0.0;
        for (l, w) in &self.require_catalogue()?.levels {
            v += w * expert.value(l).ok_or_else(|| Error::Input("expert does not cover the catalogue".into()))?;
        }
        Ok(v)
    }
}

/// `level` with its first box off target moved to the first free interior
/// corner, where it can never be pushed again. `None` without such a box or corner.
pub fn degenerate_variant(level: &Level) -> Option<Level> {
    let (w, h) = (level.width as usize, level.height as usize);
    let from = level.cells.iter().position(|c| *c == BOX)?;
    let corners = [w + 1, 2 * w - 2, (h - 2) * w + 1, (h - 1) * w - 2];
    let to = corners.into_iter().find(|c| level.cells[*c] == EMPTY)?;
    let mut cells = level.cells.clone();
    cells[from] = EMPTY;
    cells[to] = BOX;
    Some(Level { cells, ..level.clone() })
}

impl Pomdp for GridPushPomdp {
    type State = Level;
    type Obs = GridObs;
    type ObsNoise = u128;

    fn horizon(&self) -> usize {
        self.cfg.horizon
    }

    fn n_actions(&self) -> usize {
        ACTIONS.len()
    }

    fn action_names(&self) -> Vec<String> {
        ACTIONS.iter().map(|s| s.to_string()).collect()
    }

    fn scenario_prior(&self) -> Result<Vec<(Level, f64)>> {
        Ok(self.require_catalogue()?.levels.clone())
    }

    fn sample_scenario(&self, rng: &mut dyn RngCore) -> Level {
        match &self.catalogue {
            Some(c) => c.levels[sample_index(&c.weights, rng)].0.clone(),
            None => generate_level(&self.cfg, rng).expect("validated config generates levels"),
        }
    }

    fn transition_noise(&self) -> &[f64] {
        &NO_TRANSITION_NOISE
    }

    fn transition(&self, s: &Level, a: usize, _: usize) -> Level {
        s.step(a, &self.cfg).0
    }

    fn reward(&self, s: &Level, a: usize) -> f64 {
        s.step(a, &self.cfg).1
    }

    fn reward_bounds(&self) -> (f64, f64) {
        (self.cfg.reward_off.min(0.0), self.cfg.reward_on + self.cfg.reward_solve)
    }

    fn sample_obs_noise(&self, rng: &mut dyn RngCore) -> u128 {
        sample_mask(self.cfg.width * self.cfg.height, self.cfg.p_mask, rng)
    }

    fn observe(&self, s: &Level, noise: &u128) -> GridObs {
        s.observe(*noise, &self.cfg)
    }

    fn obs_likelihood(&self, s: &Level, o: &GridObs) -> f64 {
        let agent = s.agent();
        let p = self.cfg.p_mask;
        let mut l = 1.0;
        for (i, (sc, oc)) in s.cells.iter().zip(&o.0).enumerate() {
            if *sc == *oc && (*sc == EMPTY || s.in_window(agent, i, self.cfg.window_radius)) {
                continue;
            }
            if s.in_window(agent, i, self.cfg.window_radius) {
                return 0.0;
            }
            if *oc == EMPTY {
                l *= p;
            } else if *oc == *sc {
                l *= 1.0 - p;
            } else {
                return 0.0;
            }
            if l == 0.0 {
                return 0.0;
            }
        }
        l
    }

    fn sample_obs_noise_given(&self, s: &Level, o: &GridObs, rng: &mut dyn RngCore) -> Option<u128> {
        let agent = s.agent();
        let mut mask = 0u128;
        for (i, (sc, oc)) in s.cells.iter().zip(&o.0).enumerate() {
            let bit = if s.in_window(agent, i, self.cfg.window_radius) {
                if sc != oc {
                    return None;
                }
                rng.gen::<f64>() < self.cfg.p_mask
            } else if *sc == EMPTY {
                if *oc != EMPTY {
                    return None;
                }
                rng.gen::<f64>() < self.cfg.p_mask
            } else if *oc == EMPTY {
                true
            } else if oc == sc {
                false
            } else {
                return None;
            };
            if bit {
                mask |= 1 << i;
            }
        }
        Some(mask)
    }
}

/// Grid features remembered over the episode: the agent's position, where
/// each box was last seen, and every target seen so far. Optionally the step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ObjectMemory {
    pub width: usize,
    pub window_radius: usize,
    pub with_step: bool,
}

impl ObjectMemory {
    /// With the step index: without it, identical memories at different times
    /// share a key and a deterministic policy can loop until the horizon.
    pub fn new(cfg: &GridPushConfig) -> Self {
        Self { width: cfg.width, window_radius: cfg.window_radius, with_step: true }
    }
}

impl Featurizer<GridObs> for ObjectMemory {
    fn name(&self) -> String {
        format!("objects width={} window={} step={}", self.width, self.window_radius, self.with_step)
    }

    fn key(&self, h: &History<GridObs>) -> String {
        let Some(last) = h.obs.last() else { return String::new() };
        let n = last.0.len();
        let mut boxes = vec![false; n];
        let mut targets = vec![false; n];
        let w = self.width;
        let r = self.window_radius;
        for o in &h.obs {
            let agent = o.agent().unwrap_or(0);
            let (ax, ay) = (agent % w, agent / w);
            for (i, c) in o.0.iter().enumerate() {
                if is_box(*c) {
                    boxes[i] = true;
                } else if ax.abs_diff(i % w) <= r && ay.abs_diff(i / w) <= r {
                    boxes[i] = false;
                }
                if is_target(*c) {
                    targets[i] = true;
                }
            }
        }
        let mut key = format!("a{}|b", last.agent().unwrap_or(0));
        let list = |key: &mut String, v: &[bool]| {
            let mut first = true;
            for (i, x) in v.iter().enumerate() {
                if *x {
                    if !first {
                        key.push(',');
                    }
                    let _ = write!(key, "{i}");
                    first = false;
                }
            }
        };
        list(&mut key, &boxes);
        key.push_str("|g");
        list(&mut key, &targets);
        if self.with_step {
            let _ = write!(key, "|t{}", h.obs.len());
        }
        key
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pomdp::{env_rollout, UniformPolicy};
    use rand::SeedableRng;

    #[test]
    fn catalogue_is_deterministic_and_normalised() {
        let a = GridPushPomdp::with_catalogue_draws(GridPushConfig::desk(), 5, 500).unwrap();
        let b = GridPushPomdp::with_catalogue_draws(GridPushConfig::desk(), 5, 500).unwrap();
        assert_eq!(a.catalogue().unwrap(), b.catalogue().unwrap());
        let total: f64 = a.catalogue().unwrap().iter().map(|(_, w)| w).sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert!(GridPushPomdp::new(GridPushConfig::full()).unwrap().scenario_prior().is_err());
    }

    #[test]
    fn degenerate_levels_are_unsolvable() {
        let env = GridPushPomdp::with_catalogue_draws(GridPushConfig::desk(), 5, 500).unwrap();
        for (l, _) in env.degenerate_prior().unwrap() {
            l.validate().unwrap();
            assert!(!super::super::solvable_check(&l, super::super::DEFAULT_SOLVER_CAP).unwrap());
        }
    }

    #[test]
    fn likelihood_matches_noise_sampling() {
        let env = GridPushPomdp::with_catalogue_draws(GridPushConfig::desk(), 5, 200).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        for _ in 0..200 {
            let s = env.sample_scenario(&mut rng);
            let m = env.sample_obs_noise(&mut rng);
            let o = env.observe(&s, &m);
            assert!(env.obs_likelihood(&s, &o) > 0.0);
            let m2 = env.sample_obs_noise_given(&s, &o, &mut rng).unwrap();
            assert_eq!(env.observe(&s, &m2), o);
        }
    }

    #[test]
    fn object_memory_remembers_boxes_and_targets() {
        let env = GridPushPomdp::with_catalogue_draws(GridPushConfig::desk(), 5, 200).unwrap();
        let f = ObjectMemory::new(env.config());
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let t = env_rollout(&env, &UniformPolicy(5), &mut rng);
        let h = t.history(t.len());
        assert_eq!(f.key(&h), f.key(&h.clone()));
        assert!(f.key(&h).starts_with(&format!("a{}|", t.states.last().unwrap().agent())));
    }
}
