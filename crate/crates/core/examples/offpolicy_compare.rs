//! Evaluates a near-deterministic grid policy from uniformly random episodes
//! with importance sampling, model rollouts and counterfactual replay, against
//! a model whose level prior is half wrong.

use std::sync::Arc;

use cfrl::envs::gridpush::{GridPushConfig, GridPushPomdp, ObjectMemory};
use cfrl::ope::{collect_episodes, corrupt_prior, is_evaluate, mb_evaluate, reports_csv, sweep_conditioning, IsMode};
use cfrl::pomdp::{TabularPolicy, UniformPolicy};
use cfrl::rng::{tag, SeedStream};
use cfrl::search::{behaviour_clone, true_return};

fn main() -> cfrl::Result<()> {
    let cfg = GridPushConfig::desk();
    let env = GridPushPomdp::with_catalogue(cfg, 0)?;
    let expert = env.expert()?;

    // a tabular imitation of the planner, sharpened towards determinism
    let initial = TabularPolicy::uniform(Arc::new(ObjectMemory::new(&cfg)), cfrl::pomdp::Pomdp::action_names(&env));
    let demos = collect_episodes(&env, &expert, 5000, SeedStream::new(1), tag::DATA);
    let target = behaviour_clone(demos, &initial, 0.1, 3.0)?;

    let (truth, se) = true_return(&env, &target, 20_000, SeedStream::new(2));
    println!("true value {truth:.3} ± {:.3}", se.unwrap());

    let logged = collect_episodes(&env, &UniformPolicy(5), 2000, SeedStream::new(3), tag::DATA);
    let model = corrupt_prior(&env, 0.5)?;
    let mut reports = vec![
        is_evaluate(&logged, &target, IsMode::Ordinary)?,
        is_evaluate(&logged, &target, IsMode::SelfNormalized)?,
        mb_evaluate(&model, &target, 2000, SeedStream::new(4))?,
    ];
    reports.extend(sweep_conditioning(&model, &target, &logged, &[0, 2, 4, 8, 12], 1, SeedStream::new(4))?);
    print!("{}", reports_csv(&reports));
    Ok(())
}
