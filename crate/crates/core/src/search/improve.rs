use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::pomdp::{action_loglik, trajectory_return, TabularPolicy, Trajectory};

pub const DEFAULT_SMOOTHING: f64 = 0.1;

/// Rollouts with their return-weighted importance log-weights
/// `G/η + log π_k(τ) − log λ(τ)`, where `λ` is the recorded sampling policy.
#[derive(Debug, Clone)]
pub struct ImprovementBatch<S, O> {
    pub trajectories: Vec<Trajectory<S, O>>,
    pub returns: Vec<f64>,
    pub log_weights: Vec<f64>,
    pub temperature: f64,
}

impl<S, O> ImprovementBatch<S, O>
where
    S: Clone + Send + Sync,
    O: Clone + Send + Sync,
{
    pub fn new(trajectories: Vec<Trajectory<S, O>>, current: &TabularPolicy<O>, temperature: f64) -> Result<Self> {
        if trajectories.is_empty() {
            return Err(Error::Improvement("empty batch".into()));
        }
        if !(temperature > 0.0 && temperature.is_finite()) {
            return Err(Error::Improvement(format!("temperature {temperature} must be positive")));
        }
        let returns: Vec<f64> = trajectories.iter().map(trajectory_return).collect();
        let top = returns.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        // returns are shifted by their maximum first, so a common offset cancels exactly
        // whenever the subtraction itself is exact
        let log_weights = trajectories
            .par_iter()
            .zip(&returns)
            .map(|(t, g)| (g - top) / temperature + action_loglik(current, t) - t.behaviour_loglik())
            .collect();
        Ok(Self { trajectories, returns, log_weights, temperature })
    }

    /// Every rollout weighted equally, e.g. for cloning a demonstrator.
    pub fn uniform(trajectories: Vec<Trajectory<S, O>>) -> Result<Self> {
        if trajectories.is_empty() {
            return Err(Error::Improvement("empty batch".into()));
        }
        let returns = trajectories.iter().map(trajectory_return).collect();
        let log_weights = vec![0.0; trajectories.len()];
        Ok(Self { trajectories, returns, log_weights, temperature: 1.0 })
    }

    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }

    pub fn mean_return(&self) -> f64 {
        self.returns.iter().sum::<f64>() / self.returns.len() as f64
    }

    /// Weights scaled so the largest is one.
    pub fn weights(&self) -> Result<Vec<f64>> {
        let max = self.log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if max == f64::NEG_INFINITY || max.is_nan() {
            return Err(Error::Improvement("every rollout has zero weight".into()));
        }
        Ok(self.log_weights.iter().map(|l| (l - max).exp()).collect())
    }
}

/// Weighted maximum likelihood for the tabular softmax: each visited key gets
/// logits `ln(Σ w·1[a] + κ)`; keys the batch never visits keep their logits.
pub fn improve<S, O>(batch: &ImprovementBatch<S, O>, current: &TabularPolicy<O>, smoothing: f64) -> Result<TabularPolicy<O>>
where
    S: Clone + Send + Sync,
    O: Clone + Send + Sync,
{
    if batch.is_empty() {
        return Err(Error::Improvement("empty batch".into()));
    }
    if smoothing.is_nan() || smoothing <= 0.0 {
        return Err(Error::Improvement(format!("smoothing {smoothing} must be positive")));
    }
    let w = batch.weights()?;
    let keys: Vec<Vec<String>> =
        batch.trajectories.par_iter().map(|t| (0..t.actions.len()).map(|k| current.key(&t.history(k + 1))).collect()).collect();
    let n = current.n_actions();
    let mut counts: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for ((t, ks), wi) in batch.trajectories.iter().zip(keys).zip(&w) {
        for (key, a) in ks.into_iter().zip(&t.actions) {
            counts.entry(key).or_insert_with(|| vec![0.0; n])[*a] += wi;
        }
    }
    let mut logits = current.logits().clone();
    for (key, c) in counts {
        logits.insert(key, c.into_iter().map(|x| (x + smoothing).ln()).collect());
    }
    Ok(current.clone().with_logits(logits))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pomdp::LastObservations;
    use std::sync::Arc;

    fn policy() -> TabularPolicy<usize> {
        TabularPolicy::uniform(
            Arc::new(LastObservations { k: 1, with_step: false, with_rewards: false }),
            vec!["a1".into(), "a2".into()],
        )
    }

    fn ep(a: usize, g: f64) -> Trajectory<usize, usize> {
        Trajectory { states: vec![0, 0], obs: vec![0, 0], actions: vec![a], rewards: vec![g], logp: vec![0.5f64.ln()] }
    }

    #[test]
    fn weighted_counts() {
        let mut b = ImprovementBatch::uniform(vec![ep(0, 0.0), ep(1, 0.0)]).unwrap();
        b.log_weights = vec![2f64.ln(), 0.0];
        let p = improve(&b, &policy(), 1e-12).unwrap();
        let probs = p.probs_for_key("o=0");
        assert!((probs[0] - 2.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn even_split_is_uniform_and_unvisited_keys_survive() {
        let mut start = policy();
        start.set_logits("o=7", vec![3.0, 0.0]);
        let b = ImprovementBatch::new(vec![ep(0, 1.0), ep(1, 1.0)], &start, 1.0).unwrap();
        let p = improve(&b, &start, DEFAULT_SMOOTHING).unwrap();
        assert_eq!(p.probs_for_key("o=0"), vec![0.5, 0.5]);
        assert_eq!(p.logits()["o=7"], vec![3.0, 0.0]);
    }

    #[test]
    fn return_offset_cancels_exactly() {
        let start = policy();
        let a = ImprovementBatch::new(vec![ep(0, 1.5), ep(1, 0.25), ep(0, -2.0)], &start, 0.5).unwrap();
        let b = ImprovementBatch::new(vec![ep(0, 9.5), ep(1, 8.25), ep(0, 6.0)], &start, 0.5).unwrap();
        assert_eq!(improve(&a, &start, 0.1).unwrap(), improve(&b, &start, 0.1).unwrap());
    }

    #[test]
    fn zero_weight_batches_fail() {
        let mut start = policy();
        start.set_logits("o=0", vec![f64::NEG_INFINITY, 0.0]);
        let b = ImprovementBatch::new(vec![ep(0, 1.0)], &start, 1.0).unwrap();
        assert!(matches!(improve(&b, &start, 0.1), Err(Error::Improvement(_))));
        assert!(ImprovementBatch::<usize, usize>::uniform(vec![]).is_err());
    }
}
