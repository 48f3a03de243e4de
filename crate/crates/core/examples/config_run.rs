//! Runs an experiment from TOML text and writes the result directory, as
//! `tdgame run --config <file> --out <dir>` would.
//!
//! `cargo run --release --example config_run`

use transrobust::io::{parse_config, run_experiment};

const CONFIG: &str = r#"
kind = "attack-bench"
trials = 3

[seeds]
data = 0
attacker = 1
defender = 2

[attack_bench]
attackers = [
  { kind = "transfer" },
  { kind = "fpa", iterations = 3 },
  { kind = "gmsa", iterations = 3, mode = "avg" },
]

[attack_bench.game]
n_train = 120
n_test = 30
budget = { epsilon = 0.1, step_size = 0.02, steps = 10, clip_unit_box = true }
trainer = { hidden = [16], train = { epochs = 30, batch_size = 16, learning_rate = 0.3 } }
adaptor = { kind = "retrain-matching", alpha_max = 1.0, train = { epochs = 30, batch_size = 16, learning_rate = 0.3 } }
data = { kind = "synthetic", spec = { kind = "blobs2d", centers = [[0.35, 0.5], [0.65, 0.5]], sigma = 0.08 } }
"#;

fn main() -> transrobust::Result<()> {
    let cfg = parse_config(CONFIG, "inline")?;
    let out = run_experiment(&cfg)?;
    for line in &out.lines {
        println!("{line}");
    }
    let dir = std::env::temp_dir().join("transrobust-config-run");
    out.write(&dir, &cfg)?;
    println!("wrote {}", dir.display());
    Ok(())
}
