use cfrl::envs::gridpush::{GridPushConfig, GridPushPomdp};
use cfrl::envs::{follow_observation_policy, two_door, TWO_DOOR_ACCURACY};
use cfrl::ope::{cf_evaluate, collect_episodes, corrupt_prior, is_evaluate, mb_evaluate, IsMode, ReplayBuffer};
use cfrl::pomdp::{trajectory_return, UniformPolicy};
use cfrl::rng::{tag, SeedStream};

#[test]
fn on_policy_importance_sampling_is_the_sample_mean() {
    let env = two_door(TWO_DOOR_ACCURACY);
    let eps = collect_episodes(&env, &UniformPolicy(2), 500, SeedStream::new(1), tag::DATA);
    let mean = eps.iter().map(trajectory_return).sum::<f64>() / eps.len() as f64;
    for mode in [IsMode::Ordinary, IsMode::SelfNormalized] {
        let r = is_evaluate(&eps, &UniformPolicy(2), mode).unwrap();
        assert!((r.estimate - mean).abs() < 1e-12);
        assert!((r.n_effective.unwrap() - 500.0).abs() < 1e-9);
    }
}

#[test]
fn importance_sampling_recovers_the_two_door_value() {
    let env = two_door(TWO_DOOR_ACCURACY);
    let eps = collect_episodes(&env, &UniformPolicy(2), 50_000, SeedStream::new(2), tag::DATA);
    let r = is_evaluate(&eps, &follow_observation_policy(), IsMode::Ordinary).unwrap();
    assert!((r.estimate - 0.8).abs() <= 4.0 * r.stderr.unwrap(), "{r:?}");
}

#[test]
fn unconditioned_replay_agrees_with_model_rollouts() {
    let env = GridPushPomdp::with_catalogue(GridPushConfig::desk(), 0).unwrap();
    let model = corrupt_prior(&env, 0.5).unwrap();
    let expert = env.expert().unwrap();
    let eps = collect_episodes(&env, &UniformPolicy(5), 4000, SeedStream::new(3), tag::DATA);
    let cf = cf_evaluate(&model, &expert, &eps, 0, 1, SeedStream::new(4)).unwrap();
    let mb = mb_evaluate(&model, &expert, 4000, SeedStream::new(5)).unwrap();
    let se = (cf.stderr.unwrap().powi(2) + mb.stderr.unwrap().powi(2)).sqrt();
    assert!((cf.estimate - mb.estimate).abs() <= 4.0 * se, "{cf:?} {mb:?}");
    // fully conditioned replay ignores the corrupted prior
    let full = cf_evaluate(&model, &expert, &eps, 12, 1, SeedStream::new(4)).unwrap();
    assert!(full.estimate > mb.estimate + 3.0);
}

#[test]
fn stored_buffer_gives_identical_estimates() {
    let env = two_door(TWO_DOOR_ACCURACY);
    let eps = collect_episodes(&env, &UniformPolicy(2), 300, SeedStream::new(6), tag::DATA);
    let mut buf = ReplayBuffer::new("two-door", 6);
    for t in eps.clone() {
        buf.push("uniform", t).unwrap();
    }
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("buffer.jsonl");
    buf.write_to(std::fs::File::create(&path).unwrap()).unwrap();
    let back: ReplayBuffer<usize, usize> =
        ReplayBuffer::read_from(std::io::BufReader::new(std::fs::File::open(&path).unwrap())).unwrap();
    assert_eq!(back.trajectories(), eps);
    let a = cf_evaluate(&env, &follow_observation_policy(), &eps, 2, 3, SeedStream::new(7)).unwrap();
    let b = cf_evaluate(&env, &follow_observation_policy(), &back.trajectories(), 2, 3, SeedStream::new(7)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn truncated_buffer_is_rejected() {
    let env = two_door(TWO_DOOR_ACCURACY);
    let mut buf = ReplayBuffer::new("two-door", 0);
    for t in collect_episodes(&env, &UniformPolicy(2), 3, SeedStream::new(0), tag::DATA) {
        buf.push("uniform", t).unwrap();
    }
    let mut bytes = vec![];
    buf.write_to(&mut bytes).unwrap();
    let text = String::from_utf8(bytes).unwrap();
    let cut: String = text.lines().take(3).map(|l| format!("{l}\n")).collect();
    assert!(ReplayBuffer::<usize, usize>::read_from(cut.as_bytes()).is_err());
}
