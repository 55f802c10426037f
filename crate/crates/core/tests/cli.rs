use std::path::Path;
use std::process::{Command, Output};

use cfrl::harness::RunManifest;
use cfrl::pomdp::{LastObservations, TabularPolicy};
use std::sync::Arc;

fn cfrl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cfrl")).args(args).output().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

const SEARCH: &str = "[run]\nseed = 8\n\n[env]\nkind = two-door\n\n[search]\nalgo = mbps\npreset = default\n\
iterations = 10\nscenarios = 10\ncf_rollouts = 3\nbeta_time_constant = 20\nexpert = uniform\neval_episodes = 300\ncheckpoint_period = 5\n";

#[test]
fn search_writes_metrics_checkpoints_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "s.cfg", SEARCH);
    let out = dir.path().join("run");
    let o = cfrl(&["search", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let metrics = std::fs::read_to_string(out.join("metrics.csv")).unwrap();
    let rows: Vec<&str> = metrics.lines().collect();
    assert_eq!(rows[0], cfrl::search::METRICS_CSV_HEADER);
    assert_eq!(rows.len(), 11);
    let betas: Vec<f64> = rows[1..].iter().map(|r| r.split(',').nth(2).unwrap().parse().unwrap()).collect();
    assert!(betas.windows(2).all(|w| w[1] < w[0]));

    let m: RunManifest = serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m.command, "search");
    assert_eq!(m.seed, 8);
    assert_eq!(m.config_hash, cfrl::harness::sha256_hex(SEARCH.as_bytes()));
    assert!(m.finished.is_some());
    for f in ["checkpoints/policy_00000.txt", "checkpoints/policy_00005.txt", "checkpoints/policy_00010.txt", "policy.txt"] {
        assert!(m.outputs.iter().any(|o| o == f), "{f} missing from {:?}", m.outputs);
        let text = std::fs::read_to_string(out.join(f)).unwrap();
        TabularPolicy::<usize>::from_text(&text, Arc::new(LastObservations::default())).unwrap();
    }
}

#[test]
fn seed_flag_changes_results_and_repeats_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "s.cfg", SEARCH);
    let run = |seed: &str, name: &str| {
        let out = dir.path().join(name);
        assert!(cfrl(&["search", "--config", &cfg, "--seed", seed, "--out", out.to_str().unwrap()]).status.success());
        std::fs::read(out.join("metrics.csv")).unwrap()
    };
    assert_eq!(run("1", "a"), run("1", "b"));
    assert_ne!(run("1", "c"), run("2", "d"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let out = out.to_str().unwrap();

    // missing file, unknown key, missing seed, bad flag
    assert_eq!(cfrl(&["eval", "--config", "/nonexistent.cfg"]).status.code(), Some(2));
    let bad = write(dir.path(), "bad.cfg", "[run]\nseed = 1\nsede = 2\n");
    let o = cfrl(&["eval", "--config", &bad, "--out", out]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"));
    let unseeded = write(dir.path(), "u.cfg", "[env]\nkind = two-door\n");
    assert_eq!(cfrl(&["gen-data", "--config", &unseeded, "--out", out]).status.code(), Some(2));
    assert_eq!(cfrl(&["gen-data", "--config", &unseeded, "--workers", "many"]).status.code(), Some(2));
    assert_eq!(cfrl(&["gen-data", "--config", &unseeded, "--seed", "1", "--out", out]).status.code(), Some(0));

    // a deterministic target never matches uniformly random episodes
    let collapse = write(
        dir.path(),
        "c.cfg",
        "[run]\nseed = 1\n[env]\nkind = gridpush\n[data]\nepisodes = 20\n[eval]\npolicy = expert\nestimators = snis\n",
    );
    assert_eq!(cfrl(&["eval", "--config", &collapse, "--out", out]).status.code(), Some(3));

    let fixture =
        include_str!("../fixtures/confounded.scm").replace("parents=(1, 1) noise=0 -> 1", "parents=(1, 1) noise=0 -> 0");
    write(dir.path(), "broken.scm", &fixture);
    let verify = write(
        dir.path(),
        "v.cfg",
        "[run]\nseed = 1\n[verify]\nrandom_scms = 2\nrandom_tables = 2\nbuiltin_fixtures = false\nfixtures = broken.scm\n",
    );
    let o = cfrl(&["verify", "--config", &verify, "--out", out]);
    assert_eq!(o.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&o.stderr).contains("fixture-marginal"));
    let report = std::fs::read_to_string(dir.path().join("o/verify.csv")).unwrap();
    assert!(report.lines().any(|l| l.starts_with("fixture-marginal,broken") && l.ends_with("FAIL")));

    let good = write(dir.path(), "g.cfg", "[run]\nseed = 1\n[verify]\nrandom_scms = 2\nrandom_tables = 5\n");
    assert_eq!(cfrl(&["verify", "--config", &good, "--out", out]).status.code(), Some(0));
}

#[test]
fn eval_reads_a_generated_buffer() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let gen = write(dir.path(), "gen.cfg", "[run]\nseed = 3\n[env]\nkind = two-door\n[data]\nepisodes = 400\n");
    assert!(cfrl(&["gen-data", "--config", &gen, "--out", data.to_str().unwrap()]).status.success());
    let eval = write(
        dir.path(),
        "eval.cfg",
        "[run]\nseed = 3\n[env]\nkind = two-door\n[eval]\nbuffer = data/buffer.jsonl\npolicy = follow-observation\n\
         estimators = is, snis, cf, env\nt_list = 2\nmb_rollouts = 500\nseeds = 2\n",
    );
    let out = dir.path().join("eval");
    let o = cfrl(&["eval", "--config", &eval, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(out.join("eval.csv")).unwrap();
    let rows: Vec<Vec<&str>> = csv.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 8);
    // the stored buffer is shared by both seeds, so importance sampling repeats exactly
    assert_eq!(rows[0][3], rows[4][3]);
    for r in &rows {
        let v: f64 = r[3].parse().unwrap();
        assert!((v - 0.8).abs() < 0.15, "{r:?}");
    }

    let other = write(
        dir.path(),
        "other.cfg",
        &std::fs::read_to_string(&eval).unwrap().replace("kind = two-door", "kind = two-door\naccuracy = 0.9"),
    );
    assert_eq!(cfrl(&["eval", "--config", &other, "--out", out.to_str().unwrap()]).status.code(), Some(3));
}
