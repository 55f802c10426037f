//! Config-driven experiment runner behind the `cfrl` binary.
//!
//! Every command writes its outputs plus a `manifest.json` into the output
//! directory. The manifest is written when the run starts and rewritten with
//! the end time and the list of outputs when it finishes.

pub mod config;
mod verify;

pub use config::{DataConfig, EnvConfig, Estimator, EvalConfig, ExperimentConfig, SearchSection, VerifyConfig};
pub use verify::{run_verify, Check, VerifyReport, BUILTIN_FIXTURES, FIXTURE_TOL, IDENTITY_TOL, UNIFORMIZE_TOL};

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::envs::gridpush::{GridPushPomdp, ObjectMemory};
use crate::envs::{follow_observation_policy, two_door};
use crate::error::{Error, Result};
use crate::ope::{
    cf_evaluate, collect_episodes, corrupt_prior, is_evaluate, mb_evaluate, EvalReport, IsMode, MismatchedModel, ReplayBuffer,
    REPORT_CSV_HEADER,
};
use crate::pomdp::{
    parse_pomdp, ActionModel, Featurizer, LastObservations, PlannerMixture, Pomdp, TabularPolicy, TabularPomdp, UniformPolicy,
};
use crate::rng::{tag, SeedStream};
use crate::search::{metrics_csv, true_return, Search};

/// Process exit codes of the `cfrl` binary.
pub mod exit {
    pub const OK: i32 = 0;
    pub const CONFIG: i32 = 2;
    pub const RUNTIME: i32 = 3;
    pub const VERIFY_FAILED: i32 = 4;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    GenData,
    Eval,
    Search,
    Verify,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::GenData => "gen-data",
            Command::Eval => "eval",
            Command::Search => "search",
            Command::Verify => "verify",
        }
    }
}

/// Command-line values that take precedence over the config file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub out: Option<PathBuf>,
}

#[derive(Debug)]
pub enum Failure {
    Config(Error),
    Runtime(Error),
    Verify(VerifyReport),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Config(_) => exit::CONFIG,
            Failure::Runtime(_) => exit::RUNTIME,
            Failure::Verify(_) => exit::VERIFY_FAILED,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Config(e) => write!(f, "config error: {e}"),
            Failure::Runtime(e) => write!(f, "error: {e}"),
            Failure::Verify(r) => {
                write!(f, "verification failed:")?;
                for c in r.failures() {
                    write!(f, "\n  {} [{}]: deviation {:e} > {:e}", c.invariant, c.case, c.deviation, c.tolerance)?;
                }
                Ok(())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    /// SHA-256 of the config file bytes.
    pub config_hash: String,
    pub code_version: String,
    pub seed: u64,
    pub workers: usize,
    pub started: String,
    pub finished: Option<String>,
    /// Paths relative to the output directory.
    pub outputs: Vec<String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339()
}

struct Run {
    dir: PathBuf,
    manifest: RunManifest,
}

impl Run {
    fn start(command: Command, dir: &Path, config_text: &str, seed: u64, workers: usize) -> Result<Self> {
        fs::create_dir_all(dir)?;
        let manifest = RunManifest {
            command: command.name().into(),
            config_hash: sha256_hex(config_text.as_bytes()),
            code_version: env!("CARGO_PKG_VERSION").into(),
            seed,
            workers,
            started: now(),
            finished: None,
            outputs: vec![],
        };
        let run = Self { dir: dir.to_path_buf(), manifest };
        run.write_manifest()?;
        Ok(run)
    }

    fn write_manifest(&self) -> Result<()> {
        let json = serde_json::to_string_pretty(&self.manifest)?;
        fs::write(self.dir.join("manifest.json"), json + "\n")?;
        Ok(())
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<PathBuf> {
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&path, contents)?;
        self.manifest.outputs.push(name.into());
        Ok(path)
    }

    fn finish(mut self) -> Result<RunManifest> {
        self.manifest.finished = Some(now());
        self.write_manifest()?;
        Ok(self.manifest)
    }
}

/// A policy shared between the harness and the search.
pub type SharedPolicy<O, S> = Arc<dyn ActionModel<O, S>>;

/// Probability that `noisy-expert` follows the planner rather than acting uniformly.
pub const NOISY_EXPERT_BETA: f64 = 0.9;

/// What the harness needs from an environment beyond [`Pomdp`].
pub trait Workbench: Pomdp + Clone + 'static {
    type Model: Pomdp<State = Self::State, Obs = Self::Obs, ObsNoise = Self::ObsNoise> + 'static;

    fn featurizer(&self) -> Arc<dyn Featurizer<Self::Obs>>;

    /// A built-in policy by name, `None` for names the environment does not know.
    fn named_policy(&self, name: &str) -> Result<Option<SharedPolicy<Self::Obs, Self::State>>>;

    /// The model used for simulation, with the scenario prior corrupted by `epsilon`.
    fn model(&self, epsilon: f64) -> Result<Self::Model>;

    fn expert(&self) -> Result<SharedPolicy<Self::Obs, Self::State>> {
        self.named_policy("expert")?.ok_or_else(|| Error::Input("this environment has no expert planner".into()))
    }
}

impl Workbench for TabularPomdp {
    type Model = TabularPomdp;

    fn featurizer(&self) -> Arc<dyn Featurizer<usize>> {
        Arc::new(LastObservations::default())
    }

    fn named_policy(&self, name: &str) -> Result<Option<Arc<dyn ActionModel<usize, usize>>>> {
        Ok(match name {
            "uniform" => Some(Arc::new(UniformPolicy(self.n_actions()))),
            "follow-observation" if self.states.len() == 2 && self.actions.len() == 2 && self.horizon == 2 => {
                Some(Arc::new(follow_observation_policy()))
            }
            _ => None,
        })
    }

    fn model(&self, epsilon: f64) -> Result<TabularPomdp> {
        if epsilon != 0.0 {
            return Err(Error::Input("tabular environments have no corrupted prior".into()));
        }
        Ok(self.clone())
    }
}

impl Workbench for GridPushPomdp {
    type Model = MismatchedModel<GridPushPomdp>;

    fn featurizer(&self) -> Arc<dyn Featurizer<crate::envs::gridpush::GridObs>> {
        Arc::new(ObjectMemory::new(self.config()))
    }

    fn named_policy(
        &self,
        name: &str,
    ) -> Result<Option<Arc<dyn ActionModel<crate::envs::gridpush::GridObs, crate::envs::gridpush::Level>>>> {
        Ok(match name {
            "uniform" => Some(Arc::new(UniformPolicy(self.n_actions()))),
            "expert" => Some(Arc::new(GridPushPomdp::expert(self)?)),
            "noisy-expert" => Some(Arc::new(PlannerMixture {
                expert: Arc::new(GridPushPomdp::expert(self)?),
                policy: Arc::new(TabularPolicy::uniform(self.featurizer(), self.action_names())),
                beta: NOISY_EXPERT_BETA,
            })),
            _ => None,
        })
    }

    fn model(&self, epsilon: f64) -> Result<Self::Model> {
        corrupt_prior(self, epsilon)
    }
}

fn load_tabular_policy<W: Workbench>(env: &W, path: &Path) -> Result<TabularPolicy<W::Obs>> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let p = TabularPolicy::from_text(&text, env.featurizer())?;
    if p.n_actions() != env.n_actions() {
        return Err(Error::DomainMismatch(format!(
            "{} has {} actions, the environment {}",
            path.display(),
            p.n_actions(),
            env.n_actions()
        )));
    }
    Ok(p)
}

fn resolve_policy<W: Workbench>(env: &W, name: &str) -> Result<Arc<dyn ActionModel<W::Obs, W::State>>> {
    if let Some(p) = env.named_policy(name)? {
        return Ok(p);
    }
    let path = Path::new(name);
    if !path.exists() {
        return Err(Error::Input(format!("`{name}` is neither a built-in policy for this environment nor a file")));
    }
    Ok(Arc::new(load_tabular_policy(env, path)?))
}

fn env_hash(cfg: &EnvConfig) -> String {
    sha256_hex(format!("{cfg:?}").as_bytes())
}

/// Runs `command` with the config at `config_path`. Returns the finished manifest.
pub fn run(command: Command, config_path: &Path, overrides: &Overrides) -> std::result::Result<RunManifest, Failure> {
    let (mut cfg, text) = ExperimentConfig::from_file(config_path).map_err(Failure::Config)?;
    if let Some(s) = overrides.seed {
        cfg.seed = Some(s);
    }
    if let Some(w) = overrides.workers {
        if w == 0 {
            return Err(Failure::Config(Error::Config { line: 0, msg: "--workers must be positive".into() }));
        }
        cfg.workers = w;
    }
    if let Some(o) = &overrides.out {
        cfg.out = o.clone();
    }
    run_config(command, &cfg, &text)
}

/// Like [`run`] for an already parsed config; `config_text` is only hashed.
pub fn run_config(command: Command, cfg: &ExperimentConfig, config_text: &str) -> std::result::Result<RunManifest, Failure> {
    let seed = cfg
        .seed
        .ok_or_else(|| Failure::Config(Error::Config { line: 0, msg: "no seed: set `seed` in [run] or pass --seed".into() }))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Failure::Runtime(Error::Input(e.to_string())))?;
    let run = Run::start(command, &cfg.out, config_text, seed, cfg.workers).map_err(Failure::Runtime)?;
    pool.install(|| {
        if command == Command::Verify {
            let report = run_verify(&cfg.verify, seed).map_err(Failure::Runtime)?;
            let mut run = run;
            run.write("verify.csv", &report.csv()).map_err(Failure::Runtime)?;
            let manifest = run.finish().map_err(Failure::Runtime)?;
            return if report.passed() { Ok(manifest) } else { Err(Failure::Verify(report)) };
        }
        let out = (|| match &cfg.env {
            EnvConfig::GridPush { config, catalogue_seed, catalogue_draws } => {
                let env = GridPushPomdp::with_catalogue_draws(*config, *catalogue_seed, *catalogue_draws)?;
                dispatch(command, &env, cfg, seed, run)
            }
            EnvConfig::TwoDoor { accuracy } => dispatch(command, &two_door(*accuracy), cfg, seed, run),
            EnvConfig::Tabular { file } => {
                let text = fs::read_to_string(file).map_err(|e| Error::Io(format!("{}: {e}", file.display())))?;
                dispatch(command, &parse_pomdp(&text)?, cfg, seed, run)
            }
        })();
        out.map_err(|e| match e {
            Error::Config { .. } => Failure::Config(e),
            e => Failure::Runtime(e),
        })
    })
}

fn dispatch<W: Workbench>(command: Command, env: &W, cfg: &ExperimentConfig, seed: u64, run: Run) -> Result<RunManifest> {
    match command {
        Command::GenData => cmd_gen_data(env, cfg, seed, run),
        Command::Eval => cmd_eval(env, cfg, seed, run),
        Command::Search => cmd_search(env, cfg, seed, run),
        Command::Verify => unreachable!("handled before the environment is built"),
    }
}

fn collect_buffer<W: Workbench>(env: &W, cfg: &ExperimentConfig, seeds: SeedStream) -> Result<ReplayBuffer<W::State, W::Obs>> {
    let behaviour = resolve_policy(env, &cfg.data.behaviour)?;
    let mut buf = ReplayBuffer::new(env_hash(&cfg.env), seeds.master());
    let name =
        Path::new(&cfg.data.behaviour).file_name().map_or(cfg.data.behaviour.clone(), |n| n.to_string_lossy().into_owned());
    for t in collect_episodes(env, &behaviour, cfg.data.episodes, seeds, tag::DATA) {
        buf.push(name.clone(), t)?;
    }
    Ok(buf)
}

fn cmd_gen_data<W: Workbench>(env: &W, cfg: &ExperimentConfig, seed: u64, mut run: Run) -> Result<RunManifest> {
    let buf = collect_buffer(env, cfg, SeedStream::new(seed))?;
    let mut bytes = Vec::new();
    buf.write_to(&mut bytes)?;
    run.write(&cfg.data.buffer, std::str::from_utf8(&bytes).expect("json is utf-8"))?;
    run.finish()
}

fn read_buffer<W: Workbench>(path: &Path, expected_env: &str) -> Result<ReplayBuffer<W::State, W::Obs>> {
    let f = File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let buf = ReplayBuffer::read_from(BufReader::new(f))?;
    if buf.env_hash != expected_env {
        return Err(Error::DomainMismatch(format!("{} was collected in a different environment", path.display())));
    }
    Ok(buf)
}

fn cmd_eval<W: Workbench>(env: &W, cfg: &ExperimentConfig, seed: u64, mut run: Run) -> Result<RunManifest> {
    let e = &cfg.eval;
    let target = resolve_policy(env, &e.policy)?;
    let model = env.model(cfg.corruption)?;
    let stored = e.buffer.as_deref().map(|p| read_buffer::<W>(p, &env_hash(&cfg.env))).transpose()?;
    let t_list = if e.t_list.is_empty() { vec![env.horizon()] } else { e.t_list.clone() };
    let mut csv = format!("seed,{REPORT_CSV_HEADER}\n");
    for k in 0..e.seeds {
        let seeds = SeedStream::new(seed).child(tag::DATA, k as u64);
        let episodes = match &stored {
            Some(b) => b.trajectories(),
            None => collect_buffer(env, cfg, seeds)?.trajectories(),
        };
        let mut rows: Vec<EvalReport> = vec![];
        for est in &e.estimators {
            match est {
                Estimator::Is => rows.push(is_evaluate(&episodes, &target, IsMode::Ordinary)?),
                Estimator::Snis => rows.push(is_evaluate(&episodes, &target, IsMode::SelfNormalized)?),
                Estimator::Mb => rows.push(mb_evaluate(&model, &target, e.mb_rollouts, seeds)?),
                Estimator::Cf => {
                    for t in &t_list {
                        rows.push(cf_evaluate(&model, &target, &episodes, *t, e.cf_rollouts, seeds)?);
                    }
                }
                Estimator::Env => {
                    let (estimate, stderr) = true_return(env, &target, e.mb_rollouts, seeds);
                    rows.push(EvalReport {
                        estimator: "env".into(),
                        t: None,
                        estimate,
                        stderr,
                        n_effective: None,
                        n_used: e.mb_rollouts,
                        skipped: 0,
                    });
                }
            }
        }
        for r in rows {
            csv.push_str(&format!("{k},{}\n", r.csv_row()));
        }
    }
    run.write("eval.csv", &csv)?;
    run.finish()
}

fn cmd_search<W: Workbench>(env: &W, cfg: &ExperimentConfig, seed: u64, mut run: Run) -> Result<RunManifest> {
    let s = &cfg.search;
    let model = env.model(cfg.corruption)?;
    let expert: Arc<dyn ActionModel<W::Obs, W::State>> = match s.expert.as_str() {
        "uniform" => Arc::new(UniformPolicy(env.n_actions())),
        _ => env.expert()?,
    };
    let initial = match &s.initial {
        Some(p) => load_tabular_policy(env, p)?,
        None => TabularPolicy::uniform(env.featurizer(), env.action_names()),
    };
    let search = Search { model: &model, env, expert, config: crate::search::SearchConfig { seed, ..s.config.clone() } };
    let out = search.run(s.algo, initial)?;
    run.write("metrics.csv", &metrics_csv(&out.metrics))?;
    for (k, p) in &out.checkpoints {
        run.write(&format!("checkpoints/policy_{k:05}.txt"), &p.to_text())?;
    }
    run.write("policy.txt", &out.policy.to_text())?;
    run.finish()
}

/// Reads back a manifest and checks that its config hash matches `config_text`
/// and that every listed output exists.
pub fn check_manifest(dir: &Path, config_text: &str) -> Result<RunManifest> {
    let m: RunManifest = serde_json::from_reader(BufReader::new(File::open(dir.join("manifest.json"))?))?;
    if m.config_hash != sha256_hex(config_text.as_bytes()) {
        return Err(Error::Input("manifest config hash does not match the config".into()));
    }
    if m.finished.is_none() {
        return Err(Error::Input("run did not finish".into()));
    }
    if let Some(missing) = m.outputs.iter().find(|o| !dir.join(o).exists()) {
        return Err(Error::Input(format!("listed output {missing} is missing")));
    }
    Ok(m)
}

/// Writes `text` to `path` through a buffered writer, creating parent directories.
pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(text.as_bytes())?;
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(dir: &Path, body: &str) -> PathBuf {
        let p = dir.join("run.cfg");
        fs::write(&p, body).unwrap();
        p
    }

    #[test]
    fn missing_seed_is_a_config_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = config(dir.path(), "[env]\nkind = two-door\n");
        let e = run(Command::GenData, &p, &Overrides::default()).unwrap_err();
        assert_eq!(e.exit_code(), exit::CONFIG);
        let ok = run(Command::GenData, &p, &Overrides { seed: Some(1), ..Default::default() }).unwrap();
        assert_eq!(ok.outputs, vec!["buffer.jsonl".to_string()]);
    }

    #[test]
    fn empty_buffer_and_repeatable_files() {
        let dir = tempfile::tempdir().unwrap();
        let p = config(dir.path(), "[run]\nseed = 4\n[env]\nkind = two-door\n[data]\nepisodes = 0\n");
        run(Command::GenData, &p, &Overrides::default()).unwrap();
        let text = fs::read_to_string(dir.path().join("out/buffer.jsonl")).unwrap();
        assert_eq!(text.lines().count(), 1);
        let b: ReplayBuffer<usize, usize> = ReplayBuffer::read_from(text.as_bytes()).unwrap();
        assert!(b.is_empty());

        let p = config(dir.path(), "[run]\nseed = 4\n[env]\nkind = two-door\n[data]\nepisodes = 50\n");
        run(Command::GenData, &p, &Overrides { out: Some(dir.path().join("a")), ..Default::default() }).unwrap();
        run(Command::GenData, &p, &Overrides { out: Some(dir.path().join("b")), ..Default::default() }).unwrap();
        assert_eq!(fs::read(dir.path().join("a/buffer.jsonl")).unwrap(), fs::read(dir.path().join("b/buffer.jsonl")).unwrap());
        check_manifest(&dir.path().join("a"), &fs::read_to_string(&p).unwrap()).unwrap();
    }

    #[test]
    fn eval_rows_per_estimator_and_step() {
        let dir = tempfile::tempdir().unwrap();
        let p = config(
            dir.path(),
            "[run]\nseed = 2\n[env]\nkind = two-door\n[data]\nepisodes = 200\n\
             [eval]\npolicy = uniform\nestimators = is, cf\nt_list = 0, 1, 2, 2, 1, 0, 2\nmb_rollouts = 100\n",
        );
        run(Command::Eval, &p, &Overrides::default()).unwrap();
        let csv = fs::read_to_string(dir.path().join("out/eval.csv")).unwrap();
        let rows: Vec<&str> = csv.lines().skip(1).collect();
        assert_eq!(rows.len(), 1 + 7);
        // on-policy importance sampling is the buffer mean
        let buf: Vec<f64> = rows.iter().map(|r| r.split(',').nth(3).unwrap().parse().unwrap()).collect();
        assert!(buf.iter().all(|x| x.is_finite()));
    }

    #[test]
    fn search_with_no_iterations() {
        let dir = tempfile::tempdir().unwrap();
        let p = config(
            dir.path(),
            "[run]\nseed = 2\n[env]\nkind = two-door\n[search]\nalgo = mbps\niterations = 0\nexpert = uniform\n",
        );
        let m = run(Command::Search, &p, &Overrides::default()).unwrap();
        let csv = fs::read_to_string(dir.path().join("out/metrics.csv")).unwrap();
        assert_eq!(csv.lines().count(), 1);
        assert!(m.outputs.contains(&"checkpoints/policy_00000.txt".to_string()));
    }

    #[test]
    fn unknown_algorithm_is_a_config_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = config(dir.path(), "[run]\nseed = 2\n\n[search]\nalgo = ppo\n");
        let e = run(Command::Search, &p, &Overrides::default()).unwrap_err();
        assert!(matches!(e, Failure::Config(Error::Config { line: 5, .. })), "{e:?}");
    }
}
