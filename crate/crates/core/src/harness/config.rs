//! Experiment configuration files.
//!
//! ```text
//! [run]
//! seed = 7
//! workers = 4
//! out = runs/desk
//!
//! [env]
//! kind = gridpush          # gridpush | two-door | tabular
//! preset = desk
//!
//! [search]
//! algo = cfgps
//! iterations = 200
//! ```
//!
//! Unknown sections and keys are errors that name the offending line. Paths
//! are relative to the directory holding the config file.

use std::path::{Path, PathBuf};

use crate::envs::gridpush::{GridPushConfig, CATALOGUE_DRAWS};
use crate::envs::TWO_DOOR_ACCURACY;
use crate::error::{Error, Result};
use crate::kv::{self, Entry, Section};
use crate::search::{Algorithm, BetaSchedule, SearchConfig};

#[derive(Debug, Clone, PartialEq)]
pub enum EnvConfig {
    GridPush { config: GridPushConfig, catalogue_seed: u64, catalogue_draws: usize },
    TwoDoor { accuracy: f64 },
    Tabular { file: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Estimator {
    Is,
    Snis,
    Mb,
    Cf,
    /// Monte Carlo in the true environment.
    Env,
}

impl Estimator {
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "is" => Estimator::Is,
            "snis" => Estimator::Snis,
            "mb" => Estimator::Mb,
            "cf" => Estimator::Cf,
            "env" => Estimator::Env,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DataConfig {
    pub episodes: usize,
    /// `uniform`, `expert`, `noisy-expert`, `follow-observation` or a policy file.
    pub behaviour: String,
    /// File name of the buffer inside the output directory.
    pub buffer: String,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self { episodes: 1000, behaviour: "uniform".into(), buffer: "buffer.jsonl".into() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    pub estimators: Vec<Estimator>,
    pub policy: String,
    /// Conditioning steps for `cf`; empty means the full episode.
    pub t_list: Vec<usize>,
    pub cf_rollouts: usize,
    pub mb_rollouts: usize,
    /// Repetitions, each with its own buffer and streams.
    pub seeds: usize,
    /// Existing buffer to evaluate on; otherwise one is collected per seed per `[data]`.
    pub buffer: Option<PathBuf>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            estimators: vec![Estimator::Snis, Estimator::Mb, Estimator::Cf],
            policy: "uniform".into(),
            t_list: vec![],
            cf_rollouts: 1,
            mb_rollouts: 10_000,
            seeds: 1,
            buffer: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchSection {
    pub algo: Algorithm,
    pub config: SearchConfig,
    /// `dp` or `uniform`.
    pub expert: String,
    pub initial: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyConfig {
    pub random_scms: usize,
    pub max_nodes: usize,
    pub max_support: usize,
    pub random_tables: usize,
    pub builtin_fixtures: bool,
    pub fixtures: Vec<PathBuf>,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self { random_scms: 20, max_nodes: 6, max_support: 4, random_tables: 100, builtin_fixtures: true, fixtures: vec![] }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub seed: Option<u64>,
    pub workers: usize,
    pub out: PathBuf,
    pub env: EnvConfig,
    pub corruption: f64,
    pub data: DataConfig,
    pub eval: EvalConfig,
    pub search: SearchSection,
    pub verify: VerifyConfig,
}

fn cerr(line: usize, msg: impl Into<String>) -> Error {
    Error::Config { line, msg: msg.into() }
}

fn num<T: std::str::FromStr>(e: &Entry) -> Result<T> {
    e.value.parse().map_err(|_| cerr(e.line, format!("`{}` is not a valid value for `{}`", e.value, e.key)))
}

fn prob(e: &Entry) -> Result<f64> {
    let p: f64 = num(e)?;
    if !(0.0..=1.0).contains(&p) {
        return Err(cerr(e.line, format!("`{}` must be in [0, 1]", e.key)));
    }
    Ok(p)
}

fn positive(e: &Entry) -> Result<usize> {
    let v: usize = num(e)?;
    if v == 0 {
        return Err(cerr(e.line, format!("`{}` must be positive", e.key)));
    }
    Ok(v)
}

fn check_keys(s: &Section, allowed: &[&str]) -> Result<()> {
    s.check_keys(allowed).map_err(|e| match e {
        Error::Parse { line, msg } => cerr(line, msg),
        other => other,
    })
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<(Self, String)> {
        let text = std::fs::read_to_string(path).map_err(|e| cerr(0, format!("cannot read {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Ok((Self::parse(&text, base)?, text))
    }

    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let sections = kv::parse(text).map_err(|e| match e {
            Error::Parse { line, msg } => cerr(line, msg),
            other => other,
        })?;
        let mut seen: Vec<&str> = vec![];
        for s in &sections {
            if seen.contains(&s.name.as_str()) {
                return Err(cerr(s.line, format!("section [{}] appears twice", s.name)));
            }
            seen.push(&s.name);
            if !s.rows.is_empty() {
                return Err(cerr(s.rows[0].line, "table rows are not allowed in experiment configs"));
            }
        }
        let find = |name: &str| sections.iter().find(|s| s.name == name);
        for s in &sections {
            if !["run", "env", "model", "data", "eval", "search", "verify"].contains(&s.name.as_str()) {
                return Err(cerr(s.line, format!("unknown section [{}]", s.name)));
            }
        }
        let path = |v: &str| base.join(v);

        let mut cfg = ExperimentConfig {
            seed: None,
            workers: 1,
            out: base.join("out"),
            env: EnvConfig::GridPush { config: GridPushConfig::desk(), catalogue_seed: 0, catalogue_draws: CATALOGUE_DRAWS },
            corruption: 0.0,
            data: DataConfig::default(),
            eval: EvalConfig::default(),
            search: SearchSection { algo: Algorithm::CfGps, config: SearchConfig::desk(), expert: "dp".into(), initial: None },
            verify: VerifyConfig::default(),
        };

        if let Some(s) = find("run") {
            check_keys(s, &["seed", "workers", "out"])?;
            for e in &s.entries {
                match e.key.as_str() {
                    "seed" => cfg.seed = Some(num(e)?),
                    "workers" => cfg.workers = positive(e)?,
                    "out" => cfg.out = path(&e.value),
                    _ => unreachable!(),
                }
            }
        }

        if let Some(s) = find("env") {
            let kind = s.get("kind").map(|e| e.value.as_str()).unwrap_or("gridpush");
            match kind {
                "gridpush" => {
                    check_keys(
                        s,
                        &[
                            "kind",
                            "preset",
                            "catalogue_seed",
                            "catalogue_draws",
                            "width",
                            "height",
                            "boxes",
                            "horizon",
                            "p_mask",
                            "window",
                        ],
                    )?;
                    let mut g = match s.get("preset").map(|e| (e.value.as_str(), e.line)) {
                        None | Some(("desk", _)) => GridPushConfig::desk(),
                        Some(("full", _)) => GridPushConfig::full(),
                        Some((other, line)) => return Err(cerr(line, format!("unknown preset `{other}`"))),
                    };
                    let (mut cs, mut cd) = (0, CATALOGUE_DRAWS);
                    for e in &s.entries {
                        match e.key.as_str() {
                            "catalogue_seed" => cs = num(e)?,
                            "catalogue_draws" => cd = positive(e)?,
                            "width" => g.width = num(e)?,
                            "height" => g.height = num(e)?,
                            "boxes" => g.n_boxes = num(e)?,
                            "horizon" => g.horizon = positive(e)?,
                            "p_mask" => g.p_mask = prob(e)?,
                            "window" => g.window_radius = num(e)?,
                            _ => {}
                        }
                    }
                    g.validate().map_err(|e| cerr(s.line, e.to_string()))?;
                    cfg.env = EnvConfig::GridPush { config: g, catalogue_seed: cs, catalogue_draws: cd };
                }
                "two-door" => {
                    check_keys(s, &["kind", "accuracy"])?;
                    let accuracy = s.get("accuracy").map(prob).transpose()?.unwrap_or(TWO_DOOR_ACCURACY);
                    cfg.env = EnvConfig::TwoDoor { accuracy };
                }
                "tabular" => {
                    check_keys(s, &["kind", "file"])?;
                    let f = s.get("file").ok_or_else(|| cerr(s.line, "tabular environments need `file`"))?;
                    let file = path(&f.value);
                    if !file.exists() {
                        return Err(cerr(f.line, format!("{} does not exist", file.display())));
                    }
                    cfg.env = EnvConfig::Tabular { file };
                }
                other => {
                    let line = s.get("kind").map_or(s.line, |e| e.line);
                    return Err(cerr(line, format!("unknown environment kind `{other}`")));
                }
            }
        }

        if let Some(s) = find("model") {
            check_keys(s, &["corruption"])?;
            if let Some(e) = s.get("corruption") {
                cfg.corruption = prob(e)?;
            }
        }

        if let Some(s) = find("data") {
            check_keys(s, &["episodes", "behaviour", "buffer"])?;
            for e in &s.entries {
                match e.key.as_str() {
                    "episodes" => cfg.data.episodes = num(e)?,
                    "behaviour" => cfg.data.behaviour = policy_ref(&e.value, base),
                    "buffer" => cfg.data.buffer = e.value.clone(),
                    _ => unreachable!(),
                }
            }
        }

        if let Some(s) = find("eval") {
            check_keys(s, &["estimators", "policy", "t_list", "cf_rollouts", "mb_rollouts", "seeds", "buffer"])?;
            for e in &s.entries {
                match e.key.as_str() {
                    "estimators" => {
                        cfg.eval.estimators = kv::list(&e.value)
                            .iter()
                            .map(|x| Estimator::parse(x).ok_or_else(|| cerr(e.line, format!("unknown estimator `{x}`"))))
                            .collect::<Result<_>>()?;
                        if cfg.eval.estimators.is_empty() {
                            return Err(cerr(e.line, "no estimators"));
                        }
                    }
                    "policy" => cfg.eval.policy = policy_ref(&e.value, base),
                    "t_list" => {
                        cfg.eval.t_list = kv::list(&e.value)
                            .iter()
                            .map(|x| x.parse().map_err(|_| cerr(e.line, format!("`{x}` is not a step count"))))
                            .collect::<Result<_>>()?
                    }
                    "cf_rollouts" => cfg.eval.cf_rollouts = positive(e)?,
                    "mb_rollouts" => cfg.eval.mb_rollouts = positive(e)?,
                    "seeds" => cfg.eval.seeds = positive(e)?,
                    "buffer" => {
                        let p = path(&e.value);
                        if !p.exists() {
                            return Err(cerr(e.line, format!("{} does not exist", p.display())));
                        }
                        cfg.eval.buffer = Some(p);
                    }
                    _ => unreachable!(),
                }
            }
        }

        if let Some(s) = find("search") {
            check_keys(
                s,
                &[
                    "algo",
                    "preset",
                    "iterations",
                    "scenarios",
                    "cf_rollouts",
                    "refresh_period",
                    "temperature",
                    "smoothing",
                    "beta_time_constant",
                    "eval_episodes",
                    "checkpoint_period",
                    "expert",
                    "initial",
                ],
            )?;
            let sc = &mut cfg.search;
            if let Some(e) = s.get("preset") {
                sc.config = match e.value.as_str() {
                    "desk" => SearchConfig::desk(),
                    "default" => SearchConfig::default(),
                    other => return Err(cerr(e.line, format!("unknown search preset `{other}`"))),
                };
            }
            for e in &s.entries {
                let c = &mut sc.config;
                match e.key.as_str() {
                    "algo" => sc.algo = e.value.parse().map_err(|err: Error| cerr(e.line, err.to_string()))?,
                    "preset" => {}
                    "iterations" => c.iterations = num(e)?,
                    "scenarios" => c.scenarios = positive(e)?,
                    "cf_rollouts" => c.cf_rollouts = positive(e)?,
                    "refresh_period" => c.refresh_period = positive(e)?,
                    "temperature" => c.temperature = num(e)?,
                    "smoothing" => c.smoothing = num(e)?,
                    "beta_time_constant" => {
                        c.beta = BetaSchedule { time_constant: if e.value == "inf" { f64::INFINITY } else { num(e)? } }
                    }
                    "eval_episodes" => c.eval_episodes = num(e)?,
                    "checkpoint_period" => c.checkpoint_period = num(e)?,
                    "expert" => {
                        if !["dp", "uniform"].contains(&e.value.as_str()) {
                            return Err(cerr(e.line, format!("unknown expert `{}` (expected dp or uniform)", e.value)));
                        }
                        sc.expert = e.value.clone();
                    }
                    "initial" => sc.initial = Some(path(&e.value)),
                    _ => unreachable!(),
                }
            }
            sc.config.validate().map_err(|e| cerr(s.line, e.to_string()))?;
        }

        if let Some(s) = find("verify") {
            check_keys(s, &["random_scms", "max_nodes", "max_support", "random_tables", "builtin_fixtures", "fixtures"])?;
            let v = &mut cfg.verify;
            for e in &s.entries {
                match e.key.as_str() {
                    "random_scms" => v.random_scms = num(e)?,
                    "max_nodes" => v.max_nodes = positive(e)?,
                    "max_support" => v.max_support = positive(e)?,
                    "random_tables" => v.random_tables = num(e)?,
                    "builtin_fixtures" => v.builtin_fixtures = num(e)?,
                    "fixtures" => {
                        v.fixtures = kv::list(&e.value).iter().map(|f| path(f)).collect();
                        if let Some(missing) = v.fixtures.iter().find(|f| !f.exists()) {
                            return Err(cerr(e.line, format!("{} does not exist", missing.display())));
                        }
                    }
                    _ => unreachable!(),
                }
            }
        }
        Ok(cfg)
    }
}

/// Built-in policy names pass through; anything else is a file relative to `base`.
fn policy_ref(value: &str, base: &Path) -> String {
    match value {
        "uniform" | "expert" | "noisy-expert" | "follow-observation" => value.to_string(),
        file => base.join(file).to_string_lossy().into_owned(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_overrides() {
        let c = ExperimentConfig::parse("[run]\nseed = 3\n\n[search]\nalgo = mbps\niterations = 0\n", Path::new("/tmp")).unwrap();
        assert_eq!(c.seed, Some(3));
        assert_eq!(c.search.algo, Algorithm::MbPs);
        assert_eq!(c.search.config.iterations, 0);
        assert_eq!(c.out, Path::new("/tmp/out"));
    }

    #[test]
    fn unknown_keys_report_their_line() {
        let e = ExperimentConfig::parse("[run]\nseed = 1\n[search]\nalgo = ppo\n", Path::new(".")).unwrap_err();
        assert!(matches!(e, Error::Config { line: 4, .. }), "{e:?}");
        let e = ExperimentConfig::parse("[run]\nseed = 1\ncolour = red\n", Path::new(".")).unwrap_err();
        assert!(matches!(e, Error::Config { line: 3, .. }));
        let e = ExperimentConfig::parse("[runs]\nseed = 1\n", Path::new(".")).unwrap_err();
        assert!(matches!(e, Error::Config { line: 1, .. }));
    }

    #[test]
    fn environment_kinds() {
        let c = ExperimentConfig::parse("[env]\nkind = two-door\naccuracy = 0.9\n", Path::new(".")).unwrap();
        assert_eq!(c.env, EnvConfig::TwoDoor { accuracy: 0.9 });
        let e = ExperimentConfig::parse("[env]\nkind = gridpush\np_mask = 2\n", Path::new(".")).unwrap_err();
        assert!(matches!(e, Error::Config { line: 3, .. }));
        let e = ExperimentConfig::parse("[env]\nkind = tabular\nfile = /nonexistent.pomdp\n", Path::new(".")).unwrap_err();
        assert!(matches!(e, Error::Config { line: 3, .. }));
    }
}
