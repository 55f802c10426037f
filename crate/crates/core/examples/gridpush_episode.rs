//! The desk-sized box-pushing grid: catalogue, planner value, and one
//! partially observed episode of the planner.

use cfrl::envs::gridpush::{cell_char, GridObs, GridPushConfig, GridPushPomdp};
use cfrl::pomdp::{env_rollout, trajectory_return, Pomdp};
use cfrl::rng::{tag, SeedStream};

fn render(obs: &GridObs, width: usize) -> String {
    obs.0.chunks(width).map(|row| row.iter().map(|c| cell_char(*c)).collect::<String>()).collect::<Vec<_>>().join("\n")
}

fn main() -> cfrl::Result<()> {
    let cfg = GridPushConfig::desk();
    let env = GridPushPomdp::with_catalogue(cfg, 0)?;
    let levels = env.scenario_prior()?;
    println!("{} distinct start levels, horizon {}", levels.len(), env.horizon());

    let expert = env.expert()?;
    println!("planner value over the catalogue: {:.3}", env.expert_value(&expert)?);

    let mut rng = SeedStream::new(3).rng(tag::REAL_EPISODE, 0);
    let episode = env_rollout(&env, &expert, &mut rng);
    println!("\nstart level:\n{}", episode.states[0]);
    for (t, o) in episode.obs.iter().enumerate().take(3) {
        let action = episode.actions.get(t).map_or("-".to_string(), |a| env.action_names()[*a].clone());
        println!("\nobservation {} (then {action}):\n{}", t + 1, render(o, cfg.width));
    }
    println!("\nreturn {}", trajectory_return(&episode));
    Ok(())
}
