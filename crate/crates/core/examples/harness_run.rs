//! Drives the experiment harness from code: verify the inference invariants,
//! then run a short search, both from config text.

use cfrl::harness::{run_config, Command, ExperimentConfig};

fn main() {
    let out = std::env::temp_dir().join("cfrl-harness-example");
    let text = format!(
        "[run]\nseed = 5\nworkers = 2\nout = {}\n\n[env]\nkind = two-door\n\n\
         [search]\nalgo = cfgps\npreset = default\niterations = 20\nscenarios = 20\ncf_rollouts = 5\n\
         beta_time_constant = 0\nexpert = uniform\neval_episodes = 1000\n\n[verify]\nrandom_scms = 5\nrandom_tables = 20\n",
        out.display()
    );
    let cfg = ExperimentConfig::parse(&text, std::path::Path::new(".")).expect("config parses");
    for command in [Command::Verify, Command::Search] {
        match run_config(command, &cfg, &text) {
            Ok(m) => println!("{}: wrote {} into {}", command.name(), m.outputs.join(", "), out.display()),
            Err(f) => {
                eprintln!("{f}");
                std::process::exit(f.exit_code());
            }
        }
    }
    let metrics = std::fs::read_to_string(out.join("metrics.csv")).expect("metrics written");
    print!("{}", metrics.lines().last().unwrap_or_default());
    println!();
}
