//! Compiles the two-door problem into an SCM and evaluates a policy swap both
//! interventionally and counterfactually for one logged episode.

use std::sync::Arc;

use cfrl::envs::{follow_observation_policy, two_door, TWO_DOOR_ACCURACY};
use cfrl::pomdp::{compile_for_swap, policy_intervention, LastObservations, TabularPolicy};
use cfrl::scm::{Intervention, Observation};

fn main() -> cfrl::Result<()> {
    let env = two_door(TWO_DOOR_ACCURACY);
    let uniform = TabularPolicy::uniform(Arc::new(LastObservations::default()), env.actions.clone());
    let follow = follow_observation_policy();
    let scm = compile_for_swap(&env, &uniform, &follow)?;
    let swap = policy_intervention(&env, &uniform, &follow)?;

    let ids: Vec<&str> = scm.nodes().iter().map(|n| n.id.as_str()).collect();
    println!("nodes: {}", ids.join(" "));
    println!("E[G] under the logging policy: {:.3}", scm.interventional_marginal(&Intervention::new(), &["G"])?.mean().unwrap());
    println!("E[G] after the swap:           {:.3}", scm.interventional_marginal(&swap, &["G"])?.mean().unwrap());

    // the hint said L, the agent opened R and found nothing
    let episode = Observation::new().with("O_1", "L").with("A_1", "openR").with("R_1", "0").with("O_2", "L");
    let cf = scm.counterfactual_query(&episode, &swap, &["G"])?;
    println!("had it followed the hint:      {:.3}", cf.mean().unwrap());
    Ok(())
}
