//! Two doors, one prize. The prize is behind `L` or `R` with equal probability;
//! the agent sees a hint that is right with probability `accuracy`, then opens
//! one door. Following the hint is worth `accuracy`, ignoring it is worth 0.5.

use std::sync::Arc;

use crate::pomdp::{LastObservations, TabularPolicy, TabularPomdp};
use crate::scm::NoiseSpec;

pub const TWO_DOOR_ACCURACY: f64 = 0.8;

pub fn two_door(accuracy: f64) -> TabularPomdp {
    let labels = |xs: &[&str]| xs.iter().map(|s| s.to_string()).collect::<Vec<_>>();
    TabularPomdp {
        states: labels(&["L", "R"]),
        actions: labels(&["openL", "openR"]),
        observations: labels(&["L", "R"]),
        horizon: 2,
        initial: vec![0.5, 0.5],
        transition_noise: NoiseSpec::point("U_s"),
        // the prize does not move
        transition: vec![0, 0, 1, 1],
        obs_noise: NoiseSpec::new("U_o", labels(&["ok", "flip"]), vec![accuracy, 1.0 - accuracy]).expect("accuracy in [0, 1]"),
        observation: vec![0, 1, 1, 0],
        reward: vec![1.0, 0.0, 0.0, 1.0],
    }
}

/// Opens the door the hint points at.
pub fn follow_observation_policy() -> TabularPolicy<usize> {
    let mut p = TabularPolicy::uniform(Arc::new(LastObservations::default()), vec!["openL".into(), "openR".into()]);
    p.set_logits("t=1|o=0", vec![0.0, f64::NEG_INFINITY]);
    p.set_logits("t=1|o=1", vec![f64::NEG_INFINITY, 0.0]);
    p
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pomdp::{compile, compile_for_swap, exact_trajectory_distribution, node_count, policy_intervention};
    use crate::scm::Intervention;

    #[test]
    fn compiled_values() {
        let env = two_door(TWO_DOOR_ACCURACY);
        let uniform = TabularPolicy::uniform(Arc::new(LastObservations::default()), env.actions.clone());
        let follow = follow_observation_policy();
        let scm = compile_for_swap(&env, &uniform, &follow).unwrap();
        assert_eq!(scm.nodes().len(), 9);
        assert_eq!(node_count(2), 9);
        let g0 = scm.interventional_marginal(&Intervention::new(), &["G"]).unwrap().mean().unwrap();
        assert!((g0 - 0.5).abs() < 1e-12);
        let swap = policy_intervention(&env, &uniform, &follow).unwrap();
        let g1 = scm.interventional_marginal(&swap, &["G"]).unwrap().mean().unwrap();
        assert!((g1 - 0.8).abs() < 1e-12);

        let mut one_step = env.clone();
        one_step.horizon = 1;
        let tiny = compile(&one_step, &uniform).unwrap();
        let ids: Vec<&str> = tiny.nodes().iter().map(|n| n.id.as_str()).collect();
        assert_eq!(ids, vec!["O_1", "S_1"]);

        let exact = exact_trajectory_distribution(&env, &follow);
        let v: f64 = exact.iter().map(|((_, _, g), p)| g.parse::<f64>().unwrap() * p).sum();
        assert!((v - 0.8).abs() < 1e-12);
    }
}
