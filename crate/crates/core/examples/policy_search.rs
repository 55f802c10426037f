//! Model-based search, counterfactually-guided search and its one-step
//! variant on the two-door problem. Pass `desk` to run the grid with a
//! corrupted model instead (a few minutes).

use std::sync::Arc;

use cfrl::envs::gridpush::{GridPushConfig, GridPushPomdp, ObjectMemory};
use cfrl::envs::{two_door, TWO_DOOR_ACCURACY};
use cfrl::ope::corrupt_prior;
use cfrl::pomdp::{LastObservations, Pomdp, TabularPolicy, UniformPolicy};
use cfrl::rng::SeedStream;
use cfrl::search::{Algorithm, BetaSchedule, Search, SearchConfig};

fn main() -> cfrl::Result<()> {
    if std::env::args().nth(1).as_deref() == Some("desk") {
        let cfg = GridPushConfig::desk();
        let env = GridPushPomdp::with_catalogue(cfg, 0)?;
        let model = corrupt_prior(&env, 0.5)?;
        let search = Search { model: &model, env: &env, expert: Arc::new(env.expert()?), config: SearchConfig::desk() };
        let initial = TabularPolicy::uniform(Arc::new(ObjectMemory::new(&cfg)), env.action_names());
        for algo in Algorithm::ALL {
            let out = search.run(algo, initial.clone())?;
            let (v, _) = cfrl::search::true_return(&env, &out.policy, 4000, SeedStream::new(1000));
            println!("{:>8}: {v:.3}", algo.to_string());
        }
        return Ok(());
    }

    let env = two_door(TWO_DOOR_ACCURACY);
    let config = SearchConfig {
        iterations: 30,
        scenarios: 20,
        cf_rollouts: 5,
        beta: BetaSchedule { time_constant: 0.0 },
        eval_episodes: 2000,
        checkpoint_period: 10,
        ..SearchConfig::default()
    };
    let search = Search { model: &env, env: &env, expert: Arc::new(UniformPolicy(2)), config };
    let initial = TabularPolicy::uniform(Arc::new(LastObservations::default()), env.action_names());
    for algo in Algorithm::ALL {
        let out = search.run(algo, initial.clone())?;
        let curve: Vec<String> =
            out.metrics.iter().step_by(5).map(|m| format!("{:.2}", m.true_eval_return.unwrap_or(f64::NAN))).collect();
        println!("{:>8}: {}", algo.to_string(), curve.join(" "));
    }
    Ok(())
}
