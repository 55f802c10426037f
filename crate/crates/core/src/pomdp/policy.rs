//! Tabular softmax policies over featurised histories.
//!
//! Text format, one entry per line after a header naming the featurizer:
//!
//! ```text
//! # featurizer: last k=1 step=true rewards=false
//! # actions: openL openR
//! t=1|o=0 openL 1.386294
//! t=1|o=0 openR -0.693147
//! ```
//!
//! Feature keys never contain whitespace.

use std::collections::BTreeMap;
use std::fmt::{Debug, Write as _};
use std::sync::Arc;

use rand::Rng;

use super::History;
use crate::error::{Error, Result};
use crate::scm::sample_index;

/// A compact, whitespace-free rendering of an observation used in feature keys.
pub trait Token {
    fn token(&self) -> String;
}

impl Token for usize {
    fn token(&self) -> String {
        self.to_string()
    }
}

pub trait Featurizer<O>: Send + Sync + Debug {
    /// Stable description written to policy files.
    fn name(&self) -> String;
    fn key(&self, h: &History<O>) -> String;
    fn uses_rewards(&self) -> bool {
        false
    }
}

/// Most recent `k` observations, optionally with the step index and the last reward.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LastObservations {
    pub k: usize,
    pub with_step: bool,
    pub with_rewards: bool,
}

impl Default for LastObservations {
    fn default() -> Self {
        Self { k: 1, with_step: true, with_rewards: false }
    }
}

impl<O: Token> Featurizer<O> for LastObservations {
    fn name(&self) -> String {
        format!("last k={} step={} rewards={}", self.k, self.with_step, self.with_rewards)
    }

    fn key(&self, h: &History<O>) -> String {
        let mut key = String::new();
        if self.with_step {
            let _ = write!(key, "t={}|", h.obs.len());
        }
        let from = h.obs.len().saturating_sub(self.k);
        key.push_str("o=");
        for (i, o) in h.obs[from..].iter().enumerate() {
            if i > 0 {
                key.push(',');
            }
            key.push_str(&o.token());
        }
        if self.with_rewards {
            match h.rewards.last() {
                Some(r) => {
                    let _ = write!(key, "|r={r}");
                }
                None => key.push_str("|r=-"),
            }
        }
        key
    }

    fn uses_rewards(&self) -> bool {
        self.with_rewards
    }
}

/// The whole observation-action sequence.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FullHistory;

impl<O: Token> Featurizer<O> for FullHistory {
    fn name(&self) -> String {
        "full".into()
    }

    fn key(&self, h: &History<O>) -> String {
        let mut key = String::new();
        for (i, o) in h.obs.iter().enumerate() {
            if i > 0 {
                let _ = write!(key, "/a{}/", h.actions[i - 1]);
            }
            key.push_str(&o.token());
        }
        key
    }
}

/// Anything that assigns action probabilities at a history. The true state is
/// passed for privileged planners; agent policies ignore it.
pub trait ActionModel<O, S>: Send + Sync {
    fn action_probs(&self, h: &History<O>, s: &S) -> Vec<f64>;
}

impl<O, S, M: ActionModel<O, S> + ?Sized> ActionModel<O, S> for Arc<M> {
    fn action_probs(&self, h: &History<O>, s: &S) -> Vec<f64> {
        (**self).action_probs(h, s)
    }
}

impl<O, S, M: ActionModel<O, S> + ?Sized> ActionModel<O, S> for &M {
    fn action_probs(&self, h: &History<O>, s: &S) -> Vec<f64> {
        (**self).action_probs(h, s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UniformPolicy(pub usize);

impl<O, S> ActionModel<O, S> for UniformPolicy {
    fn action_probs(&self, _: &History<O>, _: &S) -> Vec<f64> {
        vec![1.0 / self.0 as f64; self.0]
    }
}

pub struct TabularPolicy<O> {
    featurizer: Arc<dyn Featurizer<O>>,
    actions: Vec<String>,
    logits: BTreeMap<String, Vec<f64>>,
}

impl<O> Clone for TabularPolicy<O> {
    fn clone(&self) -> Self {
        Self { featurizer: self.featurizer.clone(), actions: self.actions.clone(), logits: self.logits.clone() }
    }
}

impl<O> Debug for TabularPolicy<O> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TabularPolicy")
            .field("featurizer", &self.featurizer.name())
            .field("actions", &self.actions)
            .field("keys", &self.logits.len())
            .finish()
    }
}

impl<O> PartialEq for TabularPolicy<O> {
    fn eq(&self, other: &Self) -> bool {
        self.featurizer.name() == other.featurizer.name() && self.actions == other.actions && self.logits == other.logits
    }
}

pub(crate) fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY || m.is_nan() {
        return vec![1.0 / logits.len() as f64; logits.len()];
    }
    let e: Vec<f64> = logits.iter().map(|l| (l - m).exp()).collect();
    let z: f64 = e.iter().sum();
    e.into_iter().map(|x| x / z).collect()
}

impl<O> TabularPolicy<O> {
    /// The uniform policy: no keys, every lookup falls back to uniform.
    pub fn uniform(featurizer: Arc<dyn Featurizer<O>>, actions: Vec<String>) -> Self {
        Self { featurizer, actions, logits: BTreeMap::new() }
    }

    pub fn featurizer(&self) -> &Arc<dyn Featurizer<O>> {
        &self.featurizer
    }

    pub fn actions(&self) -> &[String] {
        &self.actions
    }

    pub fn n_actions(&self) -> usize {
        self.actions.len()
    }

    pub fn logits(&self) -> &BTreeMap<String, Vec<f64>> {
        &self.logits
    }

    pub fn set_logits(&mut self, key: impl Into<String>, logits: Vec<f64>) {
        assert_eq!(logits.len(), self.actions.len(), "one logit per action");
        self.logits.insert(key.into(), logits);
    }

    pub fn with_logits(mut self, logits: BTreeMap<String, Vec<f64>>) -> Self {
        self.logits = logits;
        self
    }

    pub fn key(&self, h: &History<O>) -> String {
        self.featurizer.key(h)
    }

    pub fn probs_for_key(&self, key: &str) -> Vec<f64> {
        match self.logits.get(key) {
            Some(l) => softmax(l),
            None => vec![1.0 / self.actions.len() as f64; self.actions.len()],
        }
    }

    pub fn probs(&self, h: &History<O>) -> Vec<f64> {
        self.probs_for_key(&self.featurizer.key(h))
    }

    /// Multiplies every logit by `factor`, i.e. lowers the temperature.
    pub fn sharpen(&self, factor: f64) -> Self {
        let mut out = self.clone();
        for l in out.logits.values_mut() {
            for x in l.iter_mut() {
                *x *= factor;
            }
        }
        out
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("# featurizer: {}\n# actions: {}\n", self.featurizer.name(), self.actions.join(" "));
        for (key, logits) in &self.logits {
            for (a, l) in self.actions.iter().zip(logits) {
                let _ = writeln!(out, "{key} {a} {l:?}");
            }
        }
        out
    }

    /// Parses [`TabularPolicy::to_text`] output; the header must name `featurizer`.
    pub fn from_text(text: &str, featurizer: Arc<dyn Featurizer<O>>) -> Result<Self> {
        let perr = |line: usize, msg: String| Error::Parse { line, msg };
        let mut lines = text.lines().enumerate();
        let (_, head) = lines.next().ok_or_else(|| perr(1, "empty policy file".into()))?;
        let name =
            head.strip_prefix("# featurizer:").map(str::trim).ok_or_else(|| perr(1, "missing featurizer header".into()))?;
        if name != featurizer.name() {
            return Err(perr(1, format!("policy was written for featurizer `{name}`, expected `{}`", featurizer.name())));
        }
        let (_, acts) = lines.next().ok_or_else(|| perr(2, "missing actions header".into()))?;
        let actions: Vec<String> = acts
            .strip_prefix("# actions:")
            .ok_or_else(|| perr(2, "missing actions header".into()))?
            .split_whitespace()
            .map(String::from)
            .collect();
        let mut policy = Self::uniform(featurizer, actions);
        for (i, line) in lines {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let [key, action, logit] = fields[..] else {
                return Err(perr(i + 1, "expected `key action logit`".into()));
            };
            let a = policy
                .actions
                .iter()
                .position(|x| x == action)
                .ok_or_else(|| perr(i + 1, format!("unknown action `{action}`")))?;
            let l: f64 = match logit {
                "-inf" => f64::NEG_INFINITY,
                s => s.parse().map_err(|_| perr(i + 1, format!("`{s}` is not a number")))?,
            };
            let n = policy.actions.len();
            policy.logits.entry(key.to_string()).or_insert_with(|| vec![0.0; n])[a] = l;
        }
        Ok(policy)
    }
}

impl<O, S> ActionModel<O, S> for TabularPolicy<O>
where
    O: Send + Sync,
{
    fn action_probs(&self, h: &History<O>, _: &S) -> Vec<f64> {
        self.probs(h)
    }
}

/// `λ = β·expert + (1 − β)·π`.
pub struct PlannerMixture<O, S> {
    pub expert: Arc<dyn ActionModel<O, S>>,
    pub policy: Arc<TabularPolicy<O>>,
    pub beta: f64,
}

impl<O, S> Clone for PlannerMixture<O, S> {
    fn clone(&self) -> Self {
        Self { expert: self.expert.clone(), policy: self.policy.clone(), beta: self.beta }
    }
}

impl<O: Send + Sync, S> PlannerMixture<O, S> {
    /// Chooses a component first, then an action from it. Returns the action and
    /// whether the expert was used.
    pub fn sample_with_component<R: Rng + ?Sized>(&self, h: &History<O>, s: &S, rng: &mut R) -> (usize, bool) {
        if rng.gen::<f64>() < self.beta {
            (sample_index(&self.expert.action_probs(h, s), rng), true)
        } else {
            (sample_index(&self.policy.probs(h), rng), false)
        }
    }
}

impl<O: Send + Sync, S> ActionModel<O, S> for PlannerMixture<O, S> {
    fn action_probs(&self, h: &History<O>, s: &S) -> Vec<f64> {
        let p = self.policy.probs(h);
        if self.beta <= 0.0 {
            return p;
        }
        let e = self.expert.action_probs(h, s);
        e.iter().zip(&p).map(|(x, y)| self.beta * x + (1.0 - self.beta) * y).collect()
    }
}
