//! Off-policy evaluation: importance sampling, model rollouts, and
//! counterfactual replay of logged episodes.

mod buffer;
mod mismatch;

pub use buffer::{BufferEpisode, BufferHeader, ReplayBuffer, BUFFER_FORMAT, BUFFER_VERSION};
pub use mismatch::{corrupt_prior, Corruptible, MismatchedModel};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::pomdp::{action_loglik, env_rollout, trajectory_return, ActionModel, EpisodePosterior, Pomdp, Trajectory};
use crate::rng::{tag, SeedStream};

pub const REPORT_CSV_HEADER: &str = "estimator,t,estimate,stderr,n_effective,n_used,skipped";

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub estimator: String,
    /// Conditioning steps, for counterfactual estimates.
    pub t: Option<usize>,
    pub estimate: f64,
    /// `None` when fewer than two samples make the variance undefined.
    pub stderr: Option<f64>,
    /// Importance sampling only.
    pub n_effective: Option<f64>,
    pub n_used: usize,
    pub skipped: usize,
}

fn opt(x: Option<f64>) -> String {
    x.map_or("NA".into(), |v| format!("{v}"))
}

impl EvalReport {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.estimator,
            self.t.map_or("NA".into(), |t| t.to_string()),
            self.estimate,
            opt(self.stderr),
            opt(self.n_effective),
            self.n_used,
            self.skipped
        )
    }

    /// `stderr`, or infinity when undefined.
    pub fn stderr_or_inf(&self) -> f64 {
        self.stderr.unwrap_or(f64::INFINITY)
    }
}

pub fn reports_csv(reports: &[EvalReport]) -> String {
    let mut out = String::from(REPORT_CSV_HEADER);
    out.push('\n');
    for r in reports {
        out.push_str(&r.csv_row());
        out.push('\n');
    }
    out
}

/// Sample mean and standard error of the mean.
pub fn mean_stderr(xs: &[f64]) -> (f64, Option<f64>) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, None);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, Some((var / n).sqrt()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum IsMode {
    Ordinary,
    #[default]
    SelfNormalized,
}

/// Importance sampling with per-episode weights
/// `w = π(a_1..)/μ(a_1..)`, where `μ`'s log-probabilities are the ones recorded
/// in the buffer.
pub fn is_evaluate<S, O, M>(episodes: &[Trajectory<S, O>], target: &M, mode: IsMode) -> Result<EvalReport>
where
    S: Clone + Send + Sync,
    O: Clone + Send + Sync,
    M: ActionModel<O, S> + ?Sized,
{
    if episodes.is_empty() {
        return Err(Error::Input("importance sampling needs at least one episode".into()));
    }
    let logw: Vec<f64> = episodes.par_iter().map(|t| action_loglik(target, t) - t.behaviour_loglik()).collect();
    let g: Vec<f64> = episodes.iter().map(trajectory_return).collect();
    let max = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(Error::SupportCollapse);
    }
    let n = episodes.len();
    // weights relative to the largest; the scale cancels everywhere except the ordinary estimate
    let rel: Vec<f64> = logw.iter().map(|l| (l - max).exp()).collect();
    let s1: f64 = rel.iter().sum();
    let s2: f64 = rel.iter().map(|w| w * w).sum();
    let n_eff = s1 * s1 / s2;
    let (estimate, stderr, name) = match mode {
        IsMode::Ordinary => {
            let scale = max.exp();
            let wg: Vec<f64> = rel.iter().zip(&g).map(|(w, g)| w * scale * g).collect();
            let (m, se) = mean_stderr(&wg);
            (m, se, "is")
        }
        IsMode::SelfNormalized => {
            let est: f64 = rel.iter().zip(&g).map(|(w, g)| w * g).sum::<f64>() / s1;
            let se = (n > 1).then(|| (rel.iter().zip(&g).map(|(w, g)| w * w * (g - est) * (g - est)).sum::<f64>()).sqrt() / s1);
            (est, se, "snis")
        }
    };
    Ok(EvalReport { estimator: name.into(), t: None, estimate, stderr, n_effective: Some(n_eff), n_used: n, skipped: 0 })
}

/// Mean return of `n_rollouts` episodes sampled from the model.
pub fn mb_evaluate<P, M>(model: &P, policy: &M, n_rollouts: usize, seeds: SeedStream) -> Result<EvalReport>
where
    P: Pomdp + ?Sized,
    M: ActionModel<P::Obs, P::State> + ?Sized,
{
    if n_rollouts == 0 {
        return Err(Error::Input("model-based evaluation needs at least one rollout".into()));
    }
    let g: Vec<f64> = (0..n_rollouts)
        .into_par_iter()
        .map(|i| {
            let mut rng = seeds.rng(tag::MODEL_ROLLOUT, i as u64);
            trajectory_return(&env_rollout(model, policy, &mut rng))
        })
        .collect();
    let (estimate, stderr) = mean_stderr(&g);
    Ok(EvalReport { estimator: "mb".into(), t: None, estimate, stderr, n_effective: None, n_used: n_rollouts, skipped: 0 })
}

/// Counterfactual evaluation: per logged episode, infer the scenario from the
/// first `t` observations, then replay it under `policy` `n_cf` times with
/// fresh action noise. Episodes the model cannot explain are skipped and counted.
pub fn cf_evaluate<P, M>(
    model: &P,
    policy: &M,
    episodes: &[Trajectory<P::State, P::Obs>],
    t: usize,
    n_cf: usize,
    seeds: SeedStream,
) -> Result<EvalReport>
where
    P: Pomdp + ?Sized,
    M: ActionModel<P::Obs, P::State> + ?Sized,
{
    if n_cf == 0 {
        return Err(Error::Input("need at least one counterfactual rollout per episode".into()));
    }
    let per_episode: Vec<Result<Option<f64>>> = episodes
        .par_iter()
        .enumerate()
        .map(|(i, traj)| {
            let post = match EpisodePosterior::new(model, traj, t) {
                Ok(p) => p,
                Err(Error::Contradiction) => return Ok(None),
                Err(e) => return Err(e),
            };
            let mut rng = seeds.rng(tag::COUNTERFACTUAL, i as u64);
            let total: f64 = (0..n_cf).map(|_| trajectory_return(&post.rollout(policy, &mut rng))).sum();
            Ok(Some(total / n_cf as f64))
        })
        .collect();
    let mut g = Vec::with_capacity(episodes.len());
    let mut skipped = 0;
    for r in per_episode {
        match r? {
            Some(x) => g.push(x),
            None => skipped += 1,
        }
    }
    if g.is_empty() {
        return Err(Error::Contradiction);
    }
    let (estimate, stderr) = mean_stderr(&g);
    Ok(EvalReport { estimator: "cf".into(), t: Some(t), estimate, stderr, n_effective: None, n_used: g.len(), skipped })
}

/// [`cf_evaluate`] at each conditioning horizon, in the given order.
pub fn sweep_conditioning<P, M>(
    model: &P,
    policy: &M,
    episodes: &[Trajectory<P::State, P::Obs>],
    t_list: &[usize],
    n_cf: usize,
    seeds: SeedStream,
) -> Result<Vec<EvalReport>>
where
    P: Pomdp + ?Sized,
    M: ActionModel<P::Obs, P::State> + ?Sized,
{
    t_list.iter().map(|t| cf_evaluate(model, policy, episodes, *t, n_cf, seeds)).collect()
}

/// Episodes of `policy` in `env`, one seeded stream per episode.
pub fn collect_episodes<P, M>(env: &P, policy: &M, n: usize, seeds: SeedStream, stream: u64) -> Vec<Trajectory<P::State, P::Obs>>
where
    P: Pomdp + ?Sized,
    M: ActionModel<P::Obs, P::State> + ?Sized,
{
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = seeds.rng(stream, i as u64);
            env_rollout(env, policy, &mut rng)
        })
        .collect()
}
