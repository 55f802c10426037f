use std::fmt::Write as _;
use std::path::Path;

use crate::envs::{follow_observation_policy, two_door};
use crate::error::{Error, Result};
use crate::pomdp::{compile, compile_for_swap, exact_trajectory_distribution, policy_intervention, TabularPolicy};
use crate::rng::{tag, SeedStream};
use crate::scm::checks::{counterfactual_average_deviation, mixed_average_deviation, noise_subsets, reconstruction_error};
use crate::scm::random::{random_case, random_table, RandomScmOptions};
use crate::scm::text::{parse_scm, ScmFile};
use crate::scm::{uniformize, Intervention, Scm};

use super::config::VerifyConfig;

pub const IDENTITY_TOL: f64 = 1e-10;
pub const UNIFORMIZE_TOL: f64 = 1e-12;
pub const FIXTURE_TOL: f64 = 1e-9;

pub const BUILTIN_FIXTURES: [(&str, &str); 2] =
    [("two_coin", include_str!("../../fixtures/two_coin.scm")), ("confounded", include_str!("../../fixtures/confounded.scm"))];

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub invariant: &'static str,
    pub case: String,
    pub deviation: f64,
    pub tolerance: f64,
}

impl Check {
    pub fn passed(&self) -> bool {
        self.deviation <= self.tolerance
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(Check::passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed())
    }

    pub fn max_deviation(&self, invariant: &str) -> Option<f64> {
        self.checks.iter().filter(|c| c.invariant == invariant).map(|c| c.deviation).reduce(f64::max)
    }

    pub fn csv(&self) -> String {
        let mut out = String::from("invariant,case,deviation,tolerance,status\n");
        for c in &self.checks {
            let _ = writeln!(
                out,
                "{},{},{:e},{:e},{}",
                c.invariant,
                c.case,
                c.deviation,
                c.tolerance,
                if c.passed() { "pass" } else { "FAIL" }
            );
        }
        out
    }

    fn push(&mut self, invariant: &'static str, case: impl Into<String>, deviation: Result<f64>, tolerance: f64) {
        // an engine error counts as an infinitely large deviation
        let deviation = deviation.map_or(f64::INFINITY, |d| if d.is_nan() { f64::INFINITY } else { d });
        self.checks.push(Check { invariant, case: case.into(), deviation, tolerance });
    }
}

fn strs(v: &[String]) -> Vec<&str> {
    v.iter().map(String::as_str).collect()
}

fn nonempty_subsets(ids: &[String]) -> Vec<Vec<String>> {
    (1u64..1 << ids.len())
        .map(|m| ids.iter().enumerate().filter(|(i, _)| m >> i & 1 == 1).map(|(_, s)| s.clone()).collect())
        .collect()
}

/// Every atomic intervention plus the ones named by the file's expectations.
fn fixture_interventions(file: &ScmFile) -> Result<Vec<(String, Intervention)>> {
    let mut out = vec![];
    for e in &file.expectations {
        let name = e.intervention.iter().map(|(n, v)| format!("{n}={v}")).collect::<Vec<_>>().join("&");
        out.push((if name.is_empty() { "none".into() } else { name }, e.intervention(&file.scm)?));
    }
    for n in file.scm.nodes() {
        for v in &n.domain {
            out.push((format!("{}={v}", n.id), Intervention::atomic(&file.scm, &n.id, v)?));
        }
    }
    Ok(out)
}

fn check_fixture(report: &mut VerifyReport, name: &str, file: &ScmFile) {
    let scm = &file.scm;
    for e in &file.expectations {
        let q = e.query.clone();
        let dev = e.intervention(scm).and_then(|i| {
            let d = scm.interventional_marginal(&i, &strs(&q))?;
            Ok(e.probs.iter().map(|(vals, p)| (d.prob(&strs(vals)) - p).abs()).fold(0.0, f64::max))
        });
        report.push("fixture-marginal", format!("{name} line {}", e.line), dev, FIXTURE_TOL);
    }
    let interventions = match fixture_interventions(file) {
        Ok(i) => i,
        Err(e) => {
            report.push("counterfactual-average", format!("{name} interventions"), Err(e), IDENTITY_TOL);
            return;
        }
    };
    let ids: Vec<String> = scm.nodes().iter().map(|n| n.id.clone()).collect();
    let all = strs(&ids);
    let evidence = nonempty_subsets(&ids);
    for (iname, i) in &interventions {
        let dev = evidence
            .iter()
            .map(|obs| counterfactual_average_deviation(scm, i, &strs(obs), &all))
            .try_fold(0.0, |m, d| d.map(|d| f64::max(m, d)));
        report.push("counterfactual-average", format!("{name} do({iname})"), dev, IDENTITY_TOL);
        let dev = noise_subsets(scm)
            .iter()
            .flat_map(|s| evidence.iter().map(move |obs| (s, obs)))
            .map(|(s, obs)| mixed_average_deviation(scm, i, &strs(obs), &strs(s), &all))
            .try_fold(0.0, |m, d| d.map(|d| f64::max(m, d)));
        report.push("mixed-average", format!("{name} do({iname})"), dev, IDENTITY_TOL);
    }
}

/// The two-door problem compiled for a swap from the uniform policy to the
/// observation-following one.
fn check_compiled_two_door(report: &mut VerifyReport) {
    let env = two_door(0.8);
    let follow = follow_observation_policy();
    let uniform = TabularPolicy::uniform(follow.featurizer().clone(), follow.actions().to_vec());
    let built = (|| -> Result<(Scm, Scm, Intervention)> {
        Ok((compile(&env, &uniform)?, compile_for_swap(&env, &uniform, &follow)?, policy_intervention(&env, &uniform, &follow)?))
    })();
    let (plain, scm, swap) = match built {
        Ok(x) => x,
        Err(e) => {
            report.push("compiled-equivalence", "two_door", Err(e), IDENTITY_TOL);
            return;
        }
    };
    for (case, model, i, policy) in [("uniform", &plain, Intervention::new(), &uniform), ("swap", &scm, swap.clone(), &follow)] {
        let dev = (|| -> Result<f64> {
            let d = model.interventional_marginal(&i, &["G"])?;
            let exact = exact_trajectory_distribution(&env, policy);
            let mut by_g = std::collections::BTreeMap::<String, f64>::new();
            for ((_, _, g), p) in exact {
                *by_g.entry(g).or_insert(0.0) += p;
            }
            let mut worst: f64 = 0.0;
            for (g, p) in &by_g {
                worst = worst.max((d.prob(&[g.as_str()]) - p).abs());
            }
            Ok(worst.max((d.total() - 1.0).abs()))
        })();
        report.push("compiled-equivalence", format!("two_door {case}"), dev, IDENTITY_TOL);
    }
    let history: Vec<String> = scm
        .nodes()
        .iter()
        .map(|n| n.id.clone())
        .filter(|id| id.starts_with("O_") || id.starts_with("A_") || id.starts_with("R_"))
        .collect();
    let dev = counterfactual_average_deviation(&scm, &swap, &strs(&history), &["G"]);
    report.push("counterfactual-average", "two_door policy swap", dev, IDENTITY_TOL);
    let dev = noise_subsets(&scm)
        .iter()
        .map(|s| mixed_average_deviation(&scm, &swap, &strs(&history), &strs(s), &["G"]))
        .try_fold(0.0, |m, d| d.map(|d| f64::max(m, d)));
    report.push("mixed-average", "two_door policy swap", dev, IDENTITY_TOL);
}

/// Runs the invariant suite. Fixture files that fail to parse are errors, not failures.
pub fn run_verify(cfg: &VerifyConfig, seed: u64) -> Result<VerifyReport> {
    let mut report = VerifyReport::default();
    let seeds = SeedStream::new(seed);
    let mut fixtures: Vec<(String, ScmFile)> = vec![];
    if cfg.builtin_fixtures {
        for (name, text) in BUILTIN_FIXTURES {
            fixtures.push((name.to_string(), parse_scm(text)?));
        }
    }
    for path in &cfg.fixtures {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        let file = parse_scm(&text).map_err(|e| Error::Input(format!("{}: {e}", path.display())))?;
        fixtures.push((fixture_name(path), file));
    }
    for (name, file) in &fixtures {
        check_fixture(&mut report, name, file);
    }
    if cfg.builtin_fixtures {
        check_compiled_two_door(&mut report);
    }
    let opts = RandomScmOptions { max_nodes: cfg.max_nodes, max_support: cfg.max_support, ..Default::default() };
    for i in 0..cfg.random_scms {
        let c = random_case(opts, &mut seeds.rng(tag::VERIFY, i as u64));
        let dev = counterfactual_average_deviation(&c.scm, &c.intervention, &strs(&c.observed), &strs(&c.query));
        report.push("counterfactual-average", format!("random {i} seed {seed}"), dev, IDENTITY_TOL);
    }
    for i in 0..cfg.random_tables {
        let mut rng = seeds.child(tag::VERIFY, 1).rng(tag::VERIFY, i as u64);
        let rows = 1 + (i % 4);
        let values = 2 + (i % 3);
        let t = random_table(rows, values, &mut rng);
        let dev = uniformize("U", &t).map(|u| reconstruction_error(&t, &u));
        report.push("uniformization", format!("table {i} seed {seed}"), dev, UNIFORMIZE_TOL);
    }
    Ok(report)
}

fn fixture_name(path: &Path) -> String {
    path.file_stem().map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pristine_suite_passes() {
        let r = run_verify(&VerifyConfig { random_scms: 3, random_tables: 5, ..Default::default() }, 0).unwrap();
        assert!(r.passed(), "{}", r.csv());
        for inv in ["fixture-marginal", "counterfactual-average", "mixed-average", "compiled-equivalence", "uniformization"] {
            assert!(r.max_deviation(inv).is_some(), "{inv} never ran");
        }
    }

    #[test]
    fn corrupted_table_fails_by_name() {
        let text = BUILTIN_FIXTURES[1].1.replace("parents=(1, 1) noise=0 -> 1", "parents=(1, 1) noise=0 -> 0");
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("broken.scm");
        std::fs::write(&path, text).unwrap();
        let cfg = VerifyConfig {
            random_scms: 0,
            random_tables: 0,
            builtin_fixtures: false,
            fixtures: vec![path],
            ..Default::default()
        };
        let r = run_verify(&cfg, 0).unwrap();
        assert!(!r.passed());
        assert!(r.failures().all(|c| c.invariant == "fixture-marginal"));
        assert!(r.failures().next().unwrap().case.starts_with("broken"));
    }
}
