//! Policy search by return-weighted regression on model rollouts.
//!
//! All three algorithms share one loop. Each iteration draws `N` scenarios,
//! simulates `cf_rollouts` episodes per scenario in the model under the planner
//! mixture `λ = β·expert + (1 − β)·π_k` with fresh action noise, and refits the
//! policy with [`improve`]. They differ only in where scenarios come from:
//!
//! | algorithm | scenario source |
//! |-----------|-----------------|
//! | MB-PS     | the model prior |
//! | CF-GPS    | the model posterior given a whole real episode of `μ` |
//! | GPS-like  | the model posterior given the first real observation only |

mod improve;

pub use improve::{improve, ImprovementBatch, DEFAULT_SMOOTHING};

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::ope::mean_stderr;
use crate::pomdp::{
    env_rollout, run_episode, sample_scenario_noise, trajectory_return, ActionModel, EpisodePosterior, PlannerMixture, Pomdp,
    TabularPolicy, Token, Trajectory,
};
use crate::rng::{tag, SeedStream};

type Episodes<P> = Vec<Trajectory<<P as Pomdp>::State, <P as Pomdp>::Obs>>;

pub const METRICS_CSV_HEADER: &str = "iter,algo,beta,mean_train_return,true_eval_return,stderr,skipped";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Algorithm {
    MbPs,
    CfGps,
    GpsLike,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [Algorithm::MbPs, Algorithm::CfGps, Algorithm::GpsLike];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::MbPs => "mbps",
            Algorithm::CfGps => "cfgps",
            Algorithm::GpsLike => "gpslike",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mbps" | "mb-ps" => Ok(Algorithm::MbPs),
            "cfgps" | "cf-gps" => Ok(Algorithm::CfGps),
            "gpslike" | "gps-like" => Ok(Algorithm::GpsLike),
            _ => Err(Error::Input(format!("unknown algorithm `{s}` (expected mbps, cfgps or gpslike)"))),
        }
    }
}

/// `β = exp(−episodes / time_constant)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaSchedule {
    pub time_constant: f64,
}

impl BetaSchedule {
    pub fn desk() -> Self {
        Self { time_constant: 50.0 }
    }

    /// Never decays.
    pub fn constant_expert() -> Self {
        Self { time_constant: f64::INFINITY }
    }

    pub fn beta(&self, episodes: usize) -> f64 {
        if self.time_constant == f64::INFINITY {
            return 1.0;
        }
        if self.time_constant <= 0.0 {
            return 0.0;
        }
        (-(episodes as f64) / self.time_constant).exp()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchConfig {
    pub iterations: usize,
    /// Scenarios per iteration (real episodes for the counterfactual variants).
    pub scenarios: usize,
    /// Simulated episodes per scenario.
    pub cf_rollouts: usize,
    /// The behaviour policy becomes the current policy every this many iterations.
    pub refresh_period: usize,
    pub temperature: f64,
    pub smoothing: f64,
    pub beta: BetaSchedule,
    /// True-environment episodes for the per-iteration metric; 0 skips it.
    pub eval_episodes: usize,
    /// Keep a copy of the policy every this many iterations; 0 keeps none.
    pub checkpoint_period: usize,
    pub seed: u64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            iterations: 200,
            scenarios: 10,
            cf_rollouts: 10,
            refresh_period: 5,
            temperature: 1.0,
            smoothing: DEFAULT_SMOOTHING,
            beta: BetaSchedule { time_constant: 500.0 },
            eval_episodes: 200,
            checkpoint_period: 50,
            seed: 0,
        }
    }
}

impl SearchConfig {
    /// Tuned for the desk grid: few real episodes, many simulated ones each, and
    /// sharp return weights.
    pub fn desk() -> Self {
        Self { scenarios: 2, cf_rollouts: 200, temperature: 0.25, beta: BetaSchedule::desk(), ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: usize| {
            if v == 0 {
                Err(Error::Input(format!("{name} must be positive")))
            } else {
                Ok(())
            }
        };
        positive("scenarios", self.scenarios)?;
        positive("cf_rollouts", self.cf_rollouts)?;
        positive("refresh_period", self.refresh_period)?;
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(Error::Input(format!("temperature {} must be positive", self.temperature)));
        }
        if !(self.smoothing > 0.0 && self.smoothing.is_finite()) {
            return Err(Error::Input(format!("smoothing {} must be positive", self.smoothing)));
        }
        if self.beta.time_constant.is_nan() || self.beta.time_constant < 0.0 {
            return Err(Error::Input("beta time constant must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterMetrics {
    pub iter: usize,
    pub algo: Algorithm,
    pub beta: f64,
    pub mean_train_return: f64,
    pub true_eval_return: Option<f64>,
    pub stderr: Option<f64>,
    /// Real episodes the model could not explain.
    pub skipped: usize,
}

impl IterMetrics {
    pub fn csv_row(&self) -> String {
        let na = |x: Option<f64>| x.map_or("NA".to_string(), |v| format!("{v}"));
        format!(
            "{},{},{},{},{},{},{}",
            self.iter,
            self.algo,
            self.beta,
            self.mean_train_return,
            na(self.true_eval_return),
            na(self.stderr),
            self.skipped
        )
    }
}

pub fn metrics_csv(rows: &[IterMetrics]) -> String {
    let mut out = String::from(METRICS_CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&r.csv_row());
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone)]
pub struct SearchOutcome<O> {
    pub policy: TabularPolicy<O>,
    pub metrics: Vec<IterMetrics>,
    /// `(iteration, policy)`, starting with the initial policy at iteration 0.
    pub checkpoints: Vec<(usize, TabularPolicy<O>)>,
}

/// Mean return of `policy` over `n` true-environment episodes. Episode `i`
/// always uses the same stream, so calls with different policies share noise.
pub fn true_return<P, M>(env: &P, policy: &M, n: usize, seeds: SeedStream) -> (f64, Option<f64>)
where
    P: Pomdp + ?Sized,
    M: ActionModel<P::Obs, P::State> + ?Sized,
{
    let g: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = seeds.rng(tag::TRUE_EVAL, i as u64);
            trajectory_return(&env_rollout(env, policy, &mut rng))
        })
        .collect();
    mean_stderr(&g)
}

/// The three algorithms share everything but the scenario source, so they take
/// the same arguments: the (possibly wrong) `model` used for simulation, the
/// true `env` that supplies real episodes and the evaluation metric, the
/// planner's `expert` and the starting policy.
pub struct Search<'a, P: Pomdp, E: Pomdp<State = P::State, Obs = P::Obs>> {
    pub model: &'a P,
    pub env: &'a E,
    pub expert: Arc<dyn ActionModel<P::Obs, P::State>>,
    pub config: SearchConfig,
}

impl<'a, P, E> Search<'a, P, E>
where
    P: Pomdp,
    E: Pomdp<State = P::State, Obs = P::Obs>,
    P::Obs: Token + Clone + Send + Sync,
{
    pub fn run(&self, algo: Algorithm, initial: TabularPolicy<P::Obs>) -> Result<SearchOutcome<P::Obs>> {
        let cfg = &self.config;
        cfg.validate()?;
        let seeds = SeedStream::new(cfg.seed);
        let mut policy = initial;
        let mut behaviour = Arc::new(policy.clone());
        let mut metrics = Vec::with_capacity(cfg.iterations);
        let mut checkpoints = vec![(0, policy.clone())];
        for k in 0..cfg.iterations {
            let beta = cfg.beta.beta(k * cfg.scenarios);
            let current = Arc::new(policy.clone());
            let planner = PlannerMixture { expert: self.expert.clone(), policy: current.clone(), beta };
            let iter_seeds = seeds.child(tag::IMPROVE, k as u64);
            let (rollouts, skipped) = self.rollouts(algo, &planner, &behaviour, iter_seeds)?;
            if rollouts.is_empty() {
                return Err(Error::Contradiction);
            }
            let batch = ImprovementBatch::new(rollouts, &policy, cfg.temperature)?;
            policy = improve(&batch, &policy, cfg.smoothing)?;
            if (k + 1) % cfg.refresh_period == 0 {
                behaviour = Arc::new(policy.clone());
            }
            let (true_eval_return, stderr) = if cfg.eval_episodes > 0 {
                let (m, se) = true_return(self.env, &policy, cfg.eval_episodes, seeds);
                (Some(m), se)
            } else {
                (None, None)
            };
            metrics.push(IterMetrics {
                iter: k + 1,
                algo,
                beta,
                mean_train_return: batch.mean_return(),
                true_eval_return,
                stderr,
                skipped,
            });
            if cfg.checkpoint_period > 0 && (k + 1) % cfg.checkpoint_period == 0 {
                checkpoints.push((k + 1, policy.clone()));
            }
        }
        Ok(SearchOutcome { policy, metrics, checkpoints })
    }

    fn rollouts(
        &self,
        algo: Algorithm,
        planner: &PlannerMixture<P::Obs, P::State>,
        behaviour: &Arc<TabularPolicy<P::Obs>>,
        seeds: SeedStream,
    ) -> Result<(Episodes<P>, usize)> {
        let cfg = &self.config;
        let per_scenario: Vec<Result<Option<Episodes<P>>>> = (0..cfg.scenarios)
            .into_par_iter()
            .map(|i| {
                let noise = match algo {
                    Algorithm::MbPs => {
                        let mut rng = seeds.rng(tag::MODEL_ROLLOUT, i as u64);
                        sample_scenario_noise(self.model, &mut rng)
                    }
                    Algorithm::CfGps | Algorithm::GpsLike => {
                        let mut rng = seeds.rng(tag::REAL_EPISODE, i as u64);
                        let real = env_rollout(self.env, behaviour, &mut rng);
                        let t = if algo == Algorithm::CfGps { real.obs.len() } else { 1 };
                        let post = match EpisodePosterior::new(self.model, &real, t) {
                            Ok(p) => p,
                            Err(Error::Contradiction) => return Ok(None),
                            Err(e) => return Err(e),
                        };
                        post.sample(&mut seeds.rng(tag::COUNTERFACTUAL, i as u64))
                    }
                };
                let mut rng = seeds.rng(tag::IMPROVE, i as u64);
                Ok(Some((0..cfg.cf_rollouts).map(|_| run_episode(self.model, planner, &noise, &mut rng)).collect()))
            })
            .collect();
        let mut out = Vec::with_capacity(cfg.scenarios * cfg.cf_rollouts);
        let mut skipped = 0;
        for r in per_scenario {
            match r? {
                Some(ts) => out.extend(ts),
                None => skipped += 1,
            }
        }
        Ok((out, skipped))
    }
}

/// Fits a tabular policy to demonstrations, one unit of weight per step, then
/// multiplies the logits by `sharpen`.
pub fn mb_ps<P, E>(search: &Search<'_, P, E>, initial: TabularPolicy<P::Obs>) -> Result<SearchOutcome<P::Obs>>
where
    P: Pomdp,
    E: Pomdp<State = P::State, Obs = P::Obs>,
    P::Obs: Token + Clone + Send + Sync,
{
    search.run(Algorithm::MbPs, initial)
}

pub fn cf_gps<P, E>(search: &Search<'_, P, E>, initial: TabularPolicy<P::Obs>) -> Result<SearchOutcome<P::Obs>>
where
    P: Pomdp,
    E: Pomdp<State = P::State, Obs = P::Obs>,
    P::Obs: Token + Clone + Send + Sync,
{
    search.run(Algorithm::CfGps, initial)
}

pub fn gps_like<P, E>(search: &Search<'_, P, E>, initial: TabularPolicy<P::Obs>) -> Result<SearchOutcome<P::Obs>>
where
    P: Pomdp,
    E: Pomdp<State = P::State, Obs = P::Obs>,
    P::Obs: Token + Clone + Send + Sync,
{
    search.run(Algorithm::GpsLike, initial)
}

pub fn behaviour_clone<S, O>(
    demonstrations: Vec<Trajectory<S, O>>,
    initial: &TabularPolicy<O>,
    smoothing: f64,
    sharpen: f64,
) -> Result<TabularPolicy<O>>
where
    S: Clone + Send + Sync,
    O: Clone + Send + Sync,
{
    let batch = ImprovementBatch::uniform(demonstrations)?;
    Ok(improve(&batch, initial, smoothing)?.sharpen(sharpen))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::two_door;
    use crate::pomdp::{LastObservations, UniformPolicy};
    use rand::SeedableRng;

    fn start() -> TabularPolicy<usize> {
        TabularPolicy::uniform(Arc::new(LastObservations::default()), vec!["a1".into(), "a2".into()])
    }

    #[test]
    fn schedule_is_monotone() {
        let s = BetaSchedule { time_constant: 50.0 };
        assert_eq!(s.beta(0), 1.0);
        for k in 0..500 {
            assert!(s.beta(k + 1) <= s.beta(k));
        }
        assert_eq!(BetaSchedule::constant_expert().beta(1_000_000), 1.0);
    }

    #[test]
    fn algorithm_names_round_trip() {
        for a in Algorithm::ALL {
            assert_eq!(a.name().parse::<Algorithm>().unwrap(), a);
        }
        assert!("ppo".parse::<Algorithm>().is_err());
    }

    #[test]
    fn mixture_expert_rate() {
        let planner = PlannerMixture::<usize, usize> { expert: Arc::new(UniformPolicy(2)), policy: Arc::new(start()), beta: 0.3 };
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let h = crate::pomdp::History { obs: vec![0], actions: vec![], rewards: vec![] };
        let n = 100_000;
        let hits = (0..n).filter(|_| planner.sample_with_component(&h, &0, &mut rng).1).count() as f64;
        let sd = (0.3f64 * 0.7 / n as f64).sqrt();
        assert!((hits / n as f64 - 0.3).abs() <= 3.0 * sd);
    }

    fn two_door_search(iterations: usize) -> Search<'static, crate::pomdp::TabularPomdp, crate::pomdp::TabularPomdp> {
        let env: &'static _ = Box::leak(Box::new(two_door(0.8)));
        Search {
            model: env,
            env,
            expert: Arc::new(UniformPolicy(2)),
            config: SearchConfig {
                iterations,
                scenarios: 20,
                cf_rollouts: 5,
                beta: BetaSchedule { time_constant: 0.0 },
                eval_episodes: 2000,
                ..SearchConfig::default()
            },
        }
    }

    #[test]
    fn zero_iterations_keep_the_initial_policy() {
        let out = two_door_search(0).run(Algorithm::MbPs, start()).unwrap();
        assert_eq!(out.policy, start());
        assert!(out.metrics.is_empty());
        assert_eq!(metrics_csv(&out.metrics), format!("{METRICS_CSV_HEADER}\n"));
    }

    #[test]
    fn learns_two_door() {
        for algo in Algorithm::ALL {
            let out = two_door_search(50).run(algo, start()).unwrap();
            let last = out.metrics.last().unwrap();
            assert!(last.true_eval_return.unwrap() >= 0.75, "{algo}: {last:?}");
            assert_eq!(out.metrics.iter().map(|m| m.iter).collect::<Vec<_>>(), (1..=50).collect::<Vec<_>>());
        }
    }

    #[test]
    fn reproducible() {
        let a = two_door_search(5).run(Algorithm::CfGps, start()).unwrap();
        let b = two_door_search(5).run(Algorithm::CfGps, start()).unwrap();
        assert_eq!(metrics_csv(&a.metrics), metrics_csv(&b.metrics));
        assert_eq!(a.policy, b.policy);
    }
}
