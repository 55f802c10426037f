//! Exact posterior, interventional and counterfactual queries by enumeration.

use std::collections::BTreeSet;

use rand::Rng;

use super::{increment, sample_index, Assignment, Distribution, Intervention, NoiseAssignment, Observation, Scm};
use crate::error::{Error, Result};

/// Normalised weighted set of full noise assignments given evidence.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioPosterior {
    pub noise_ids: Vec<String>,
    pub particles: Vec<(NoiseAssignment, f64)>,
}

impl ScenarioPosterior {
    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> &NoiseAssignment {
        let w: Vec<f64> = self.particles.iter().map(|(_, w)| *w).collect();
        &self.particles[sample_index(&w, rng)].0
    }

    /// Exact marginal over a subset of noise variables, labelled by `scm`'s supports.
    pub fn marginal(&self, scm: &Scm, noise: &[&str]) -> Result<Distribution> {
        let idx: Vec<usize> = noise.iter().map(|n| scm.noise_index(n)).collect::<Result<_>>()?;
        let mut d = Distribution::empty(
            idx.iter().map(|i| scm.noises[*i].id.clone()).collect(),
            idx.iter().map(|i| scm.noises[*i].support.clone()).collect(),
        );
        for (u, w) in &self.particles {
            d.add(idx.iter().map(|i| u.0[*i]).collect(), *w);
        }
        Ok(d)
    }
}

impl Scm {
    /// `p(u | obs) ∝ p(u) · 1[evaluate(u) agrees with obs]`, by full enumeration.
    pub fn infer_noise_posterior(&self, obs: &Observation) -> Result<ScenarioPosterior> {
        let evidence = self.resolve_observation(obs)?;
        let mut particles = Vec::new();
        let mut x = vec![0usize; self.nodes.len()];
        let mut total = 0.0;
        self.for_each_noise(|u, p| {
            self.eval_into(u, &mut x);
            if evidence.iter().all(|(i, v)| x[*i] == *v) {
                particles.push((NoiseAssignment(u.to_vec()), p));
                total += p;
            }
        })?;
        if particles.is_empty() || total <= 0.0 {
            return Err(Error::Contradiction);
        }
        for (_, w) in &mut particles {
            *w /= total;
        }
        Ok(ScenarioPosterior { noise_ids: self.noises.iter().map(|u| u.id.clone()).collect(), particles })
    }

    /// Exact distribution of `query` under `do(intervention)` with noise from the prior.
    pub fn interventional_marginal(&self, intervention: &Intervention, query: &[&str]) -> Result<Distribution> {
        let model = self.apply_intervention(intervention)?;
        let q = model.resolve_nodes(query)?;
        let mut d = model.query_distribution(&q);
        let mut x = vec![0usize; model.nodes.len()];
        model.for_each_noise(|u, p| {
            model.eval_into(u, &mut x);
            d.add(q.iter().map(|i| x[*i]).collect(), p);
        })?;
        Ok(d)
    }

    /// Exact counterfactual distribution: abduct the noise posterior from `obs`,
    /// apply the intervention, and push the posterior through the new model.
    pub fn counterfactual_query(&self, obs: &Observation, intervention: &Intervention, query: &[&str]) -> Result<Distribution> {
        let posterior = self.infer_noise_posterior(obs)?;
        self.counterfactual_query_from(&posterior, intervention, query)
    }

    pub fn counterfactual_query_from(
        &self,
        posterior: &ScenarioPosterior,
        intervention: &Intervention,
        query: &[&str],
    ) -> Result<Distribution> {
        let model = self.apply_intervention(intervention)?;
        let q = model.resolve_nodes(query)?;
        let mut d = model.query_distribution(&q);
        let mut x = vec![0usize; model.nodes.len()];
        for (u, w) in &posterior.particles {
            model.eval_into(&u.0, &mut x);
            d.add(q.iter().map(|i| x[*i]).collect(), *w);
        }
        d.normalize();
        Ok(d)
    }

    /// One draw: a posterior particle, evaluated under the intervention, projected to `query`.
    pub fn counterfactual_sample<R: Rng + ?Sized>(
        &self,
        obs: &Observation,
        intervention: &Intervention,
        query: &[&str],
        rng: &mut R,
    ) -> Result<Vec<String>> {
        let posterior = self.infer_noise_posterior(obs)?;
        let model = self.apply_intervention(intervention)?;
        let q = model.resolve_nodes(query)?;
        let x = model.evaluate(posterior.sample(rng))?;
        Ok(q.iter().map(|i| model.nodes[*i].domain[x.0[*i]].clone()).collect())
    }

    /// Noise in `cf_subset` comes jointly from one posterior particle; the rest is
    /// redrawn from the prior. The result is evaluated under the intervention.
    pub fn mixed_sample<R: Rng + ?Sized>(
        &self,
        obs: &Observation,
        cf_subset: &[&str],
        intervention: &Intervention,
        rng: &mut R,
    ) -> Result<Assignment> {
        let posterior = self.infer_noise_posterior(obs)?;
        self.mixed_sample_from(&posterior, cf_subset, intervention, rng)
    }

    pub fn mixed_sample_from<R: Rng + ?Sized>(
        &self,
        posterior: &ScenarioPosterior,
        cf_subset: &[&str],
        intervention: &Intervention,
        rng: &mut R,
    ) -> Result<Assignment> {
        let keep = self.noise_mask(cf_subset)?;
        let model = self.apply_intervention(intervention)?;
        let particle = posterior.sample(rng).clone();
        let mut u = particle.0;
        for (i, k) in keep.iter().enumerate() {
            if !k {
                u[i] = self.noises[i].sample(rng);
            }
        }
        model.evaluate(&NoiseAssignment(u))
    }

    /// Exact distribution of [`Scm::mixed_sample`] projected to `query`.
    pub fn mixed_query(
        &self,
        obs: &Observation,
        cf_subset: &[&str],
        intervention: &Intervention,
        query: &[&str],
    ) -> Result<Distribution> {
        let posterior = self.infer_noise_posterior(obs)?;
        let keep = self.noise_mask(cf_subset)?;
        let model = self.apply_intervention(intervention)?;
        let q = model.resolve_nodes(query)?;

        // marginal of the posterior on the kept coordinates
        let mut cf_marginal: std::collections::BTreeMap<Vec<usize>, f64> = Default::default();
        for (u, w) in &posterior.particles {
            let key: Vec<usize> = u.0.iter().zip(&keep).filter(|(_, k)| **k).map(|(v, _)| *v).collect();
            *cf_marginal.entry(key).or_insert(0.0) += w;
        }
        let free: Vec<usize> = (0..self.noises.len()).filter(|i| !keep[*i]).collect();
        let radix: Vec<usize> = free.iter().map(|i| self.noises[*i].len()).collect();
        let free_size: u128 = radix.iter().map(|r| *r as u128).product();
        self.check_cap(free_size.saturating_mul(cf_marginal.len() as u128))?;

        let kept: Vec<usize> = (0..self.noises.len()).filter(|i| keep[*i]).collect();
        let mut d = model.query_distribution(&q);
        let mut u = vec![0usize; self.noises.len()];
        let mut x = vec![0usize; model.nodes.len()];
        for (cf_vals, w) in &cf_marginal {
            for (slot, v) in kept.iter().zip(cf_vals) {
                u[*slot] = *v;
            }
            let mut digits = vec![0usize; free.len()];
            loop {
                let mut p = *w;
                for (slot, v) in free.iter().zip(&digits) {
                    u[*slot] = *v;
                    p *= self.noises[*slot].probs[*v];
                }
                if p > 0.0 {
                    model.eval_into(&u, &mut x);
                    d.add(q.iter().map(|i| x[*i]).collect(), p);
                }
                if !increment(&mut digits, &radix) {
                    break;
                }
            }
        }
        Ok(d)
    }

    fn noise_mask(&self, subset: &[&str]) -> Result<Vec<bool>> {
        let set: BTreeSet<usize> = subset.iter().map(|s| self.noise_index(s)).collect::<Result<_>>()?;
        Ok((0..self.noises.len()).map(|i| set.contains(&i)).collect())
    }
}
