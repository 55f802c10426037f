//! Exact checks of the counterfactual identities, used by `cfrl verify` and the tests.
//!
//! Averaging counterfactuals over the observational distribution of the
//! evidence must give back the interventional distribution, and so must any
//! mixture that takes some noise variables from the posterior and the rest
//! from the prior.

use super::{ConditionalTable, Distribution, Intervention, Observation, Scm, Uniformized};
use crate::error::Result;

fn observations(scm: &Scm, observed: &[&str]) -> Result<Vec<(Observation, f64)>> {
    let p = scm.interventional_marginal(&Intervention::new(), observed)?;
    Ok(p.iter_labeled()
        .filter(|(_, w)| *w > 0.0)
        .map(|(values, w)| {
            let obs = observed.iter().zip(values).fold(Observation::new(), |o, (n, v)| o.with(*n, v));
            (obs, w)
        })
        .collect())
}

fn averaged<F>(scm: &Scm, intervention: &Intervention, observed: &[&str], query: &[&str], mut per_obs: F) -> Result<f64>
where
    F: FnMut(&Observation) -> Result<Distribution>,
{
    let target = scm.interventional_marginal(intervention, query)?;
    let mut mix = Distribution::empty(target.vars.clone(), target.labels.clone());
    for (obs, w) in observations(scm, observed)? {
        for (k, p) in per_obs(&obs)?.probs {
            mix.add(k, w * p);
        }
    }
    Ok(mix.max_abs_diff(&target))
}

/// `max |Σ_x p(x)·p(query | do(I), x) − p(query | do(I))|` over query values,
/// with the sum over every value `x` of the observed nodes.
pub fn counterfactual_average_deviation(
    scm: &Scm,
    intervention: &Intervention,
    observed: &[&str],
    query: &[&str],
) -> Result<f64> {
    averaged(scm, intervention, observed, query, |obs| scm.counterfactual_query(obs, intervention, query))
}

/// Like [`counterfactual_average_deviation`] for the mixture that keeps only
/// `cf_subset` from the posterior.
pub fn mixed_average_deviation(
    scm: &Scm,
    intervention: &Intervention,
    observed: &[&str],
    cf_subset: &[&str],
    query: &[&str],
) -> Result<f64> {
    averaged(scm, intervention, observed, query, |obs| scm.mixed_query(obs, cf_subset, intervention, query))
}

/// Every subset of the noise variables, smallest first.
pub fn noise_subsets(scm: &Scm) -> Vec<Vec<String>> {
    let ids: Vec<&String> = scm.noises().iter().map(|u| &u.id).collect();
    let mut out: Vec<Vec<String>> = (0u64..1 << ids.len())
        .map(|m| ids.iter().enumerate().filter(|(i, _)| m >> i & 1 == 1).map(|(_, s)| (*s).clone()).collect())
        .collect();
    out.sort_by_key(|s| s.len());
    out
}

/// Largest entry-wise gap between a table and the conditional its
/// uniformisation induces.
pub fn reconstruction_error(table: &ConditionalTable, u: &Uniformized) -> f64 {
    let back = u.reconstruct(table.support.len());
    table.rows.iter().zip(&back).flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs())).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scm::random::{random_case, random_table, RandomScmOptions};
    use crate::scm::text::parse_scm;
    use crate::scm::uniformize;
    use rand::SeedableRng;

    #[test]
    fn identities_hold_on_random_models() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(21);
        for _ in 0..10 {
            let c = random_case(RandomScmOptions::default(), &mut rng);
            let obs: Vec<&str> = c.observed.iter().map(String::as_str).collect();
            let q: Vec<&str> = c.query.iter().map(String::as_str).collect();
            assert!(counterfactual_average_deviation(&c.scm, &c.intervention, &obs, &q).unwrap() <= 1e-10);
            for subset in noise_subsets(&c.scm).iter().take(8) {
                let s: Vec<&str> = subset.iter().map(String::as_str).collect();
                assert!(mixed_average_deviation(&c.scm, &c.intervention, &obs, &s, &q).unwrap() <= 1e-10);
            }
        }
    }

    #[test]
    fn subsets_cover_the_power_set() {
        let f = parse_scm(crate::scm::text::tests::TWO_COIN).unwrap();
        let s = noise_subsets(&f.scm);
        assert_eq!(s.len(), 4);
        assert!(s[0].is_empty());
        assert_eq!(s[3].len(), 2);
    }

    #[test]
    fn uniformisation_reconstructs() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let t = random_table(3, 4, &mut rng);
        let u = uniformize("U", &t).unwrap();
        assert!(reconstruction_error(&t, &u) <= 1e-12);
    }
}
