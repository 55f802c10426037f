use std::sync::Arc;

use proptest::prelude::*;

use cfrl::envs::gridpush::{GridPushConfig, GridPushPomdp};
use cfrl::envs::{follow_observation_policy, two_door, TWO_DOOR_ACCURACY};
use cfrl::pomdp::{
    compile, compile_for_swap, env_rollout, exact_trajectory_distribution, policy_intervention, trajectory_return,
    EpisodePosterior, LastObservations, Pomdp, TabularPolicy, UniformPolicy,
};
use cfrl::rng::{tag, SeedStream};
use cfrl::scm::{Intervention, Observation};

fn two_door_policy(logits: [f64; 4]) -> TabularPolicy<usize> {
    let mut p = TabularPolicy::uniform(Arc::new(LastObservations::default()), vec!["openL".into(), "openR".into()]);
    p.set_logits("t=1|o=0", vec![logits[0], logits[1]]);
    p.set_logits("t=1|o=1", vec![logits[2], logits[3]]);
    p
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn compiled_model_matches_the_simulator(logits in prop::array::uniform4(-3.0f64..3.0), accuracy in 0.0f64..=1.0) {
        let env = two_door(accuracy);
        let policy = two_door_policy(logits);
        let scm = compile(&env, &policy).unwrap();
        let d = scm.interventional_marginal(&Intervention::new(), &["O_1", "O_2", "A_1", "G"]).unwrap();
        for ((obs, actions, g), p) in exact_trajectory_distribution(&env, &policy) {
            let o: Vec<&str> = obs.iter().map(|o| env.observations[*o].as_str()).collect();
            let a = env.actions[actions[0]].as_str();
            prop_assert!((d.prob(&[o[0], o[1], a, g.as_str()]) - p).abs() < 1e-12);
        }
    }
}

/// The sampled posterior replay agrees with the exact counterfactual of the
/// compiled model for every logged two-door episode.
#[test]
fn replay_matches_exact_counterfactual() {
    let env = two_door(TWO_DOOR_ACCURACY);
    let uniform = two_door_policy([0.0; 4]);
    let follow = follow_observation_policy();
    let scm = compile_for_swap(&env, &uniform, &follow).unwrap();
    let swap = policy_intervention(&env, &uniform, &follow).unwrap();
    let seeds = SeedStream::new(9);
    for i in 0..8 {
        let traj = env_rollout(&env, &UniformPolicy(2), &mut seeds.rng(tag::DATA, i));
        let obs = Observation::new()
            .with("O_1", env.observations[traj.obs[0]].clone())
            .with("A_1", env.actions[traj.actions[0]].clone())
            .with("R_1", format!("{}", traj.rewards[0]))
            .with("O_2", env.observations[traj.obs[1]].clone());
        let exact = scm.counterfactual_query(&obs, &swap, &["G"]).unwrap().mean().unwrap();
        let post = EpisodePosterior::new(&env, &traj, env.horizon()).unwrap();
        let mut rng = seeds.rng(tag::COUNTERFACTUAL, i);
        let n = 20_000;
        let mean = (0..n).map(|_| trajectory_return(&post.rollout(&follow, &mut rng))).sum::<f64>() / n as f64;
        let se = (exact * (1.0 - exact) / n as f64).sqrt().max(1e-3);
        assert!((mean - exact).abs() <= 4.0 * se, "episode {i}: replay {mean} vs exact {exact}");
    }
}

#[test]
fn grid_posterior_scenarios_explain_the_episode() {
    let cfg = GridPushConfig::desk();
    let env = GridPushPomdp::with_catalogue(cfg, 0).unwrap();
    let seeds = SeedStream::new(4);
    for i in 0..20 {
        let traj = env_rollout(&env, &UniformPolicy(5), &mut seeds.rng(tag::DATA, i));
        let post = EpisodePosterior::new(&env, &traj, traj.len()).unwrap();
        let mut rng = seeds.rng(tag::COUNTERFACTUAL, i);
        for _ in 0..5 {
            let noise = post.sample(&mut rng);
            let mut s = noise.s1.clone();
            for (k, o) in traj.obs.iter().enumerate() {
                assert_eq!(&env.observe(&s, &noise.obs[k]), o, "episode {i} step {k}");
                if let Some(a) = traj.actions.get(k) {
                    assert_eq!(env.reward(&s, *a), traj.rewards[k]);
                    s = env.transition(&s, *a, noise.transition[k]);
                }
            }
        }
    }
}

#[test]
fn empty_prefix_is_the_prior() {
    let env = two_door(TWO_DOOR_ACCURACY);
    let traj = env_rollout(&env, &UniformPolicy(2), &mut SeedStream::new(0).rng(tag::DATA, 0));
    let post = EpisodePosterior::new(&env, &traj, 0).unwrap();
    assert_eq!(post.conditioning_steps(), 0);
    let mut rng = SeedStream::new(0).rng(tag::COUNTERFACTUAL, 0);
    let n = 20_000;
    let left = (0..n).filter(|_| post.sample(&mut rng).s1 == 0).count() as f64 / n as f64;
    assert!((left - 0.5).abs() < 4.0 * (0.25 / n as f64).sqrt());
}
