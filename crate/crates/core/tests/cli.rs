//! End-to-end behavior of the `tdgame` binary: exit codes, output files, replay.

use std::path::Path;
use std::process::{Command, Output};

const GAME: &str = r#"kind = "game"
trials = 2
[seeds]
data = 0
attacker = 1
defender = 2
[game]
n_train = 60
n_test = 12
budget = { epsilon = 0.05 }
adaptor = { kind = "identity" }
attacker = { kind = "gmsa", iterations = 2, mode = "min" }
data = { kind = "synthetic", spec = { kind = "blobs2d" } }
"#;

fn tdgame(args: &[&str], config: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_tdgame"));
    cmd.args(args);
    if let Some(c) = config {
        cmd.arg("--config").arg(c);
    }
    cmd.output().expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn run_writes_results_and_transcripts_replay() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "game.toml", GAME);
    let out = dir.path().join("out");
    let o = tdgame(&["run", "--quiet", "--out", out.to_str().unwrap()], Some(&cfg));
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(o.stdout.is_empty());
    let csv = std::fs::read_to_string(out.join("results.csv")).unwrap();
    assert!(csv.starts_with("dataset,trainer,adaptor,attacker,epsilon,seed,clean_acc,robust_acc\n"));
    assert_eq!(csv.lines().count(), 3);

    let transcript = out.join("transcripts/trial-1.json");
    let o = tdgame(&["replay", transcript.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stdout).contains("replay ok"));

    // A tampered transcript must not replay.
    let text = std::fs::read_to_string(&transcript).unwrap();
    let mut value: serde_json::Value = serde_json::from_str(&text).unwrap();
    value["referee_valuation"] = serde_json::json!(0.123);
    let tampered = write(dir.path(), "tampered.json", &value.to_string());
    let o = tdgame(&["replay", tampered.to_str().unwrap()], None);
    assert_ne!(o.status.code(), Some(0));
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "game.toml", GAME);
    for name in ["a", "b"] {
        let out = dir.path().join(name);
        let o = tdgame(&["run", "--quiet", "--out", out.to_str().unwrap()], Some(&cfg));
        assert_eq!(o.status.code(), Some(0));
    }
    for f in ["results.csv", "summary.json", "config.toml", "transcripts/trial-0.json"] {
        assert_eq!(
            std::fs::read(dir.path().join("a").join(f)).unwrap(),
            std::fs::read(dir.path().join("b").join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn seed_flags_override_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "game.toml", GAME);
    let out = dir.path().join("o");
    let o = tdgame(
        &["run", "--quiet", "--trials", "1", "--seed-data", "9", "--out", out.to_str().unwrap()],
        Some(&cfg),
    );
    assert_eq!(o.status.code(), Some(0));
    let echoed = std::fs::read_to_string(out.join("config.toml")).unwrap();
    assert!(echoed.contains("data = 9"), "{echoed}");
    assert!(echoed.contains("trials = 1"), "{echoed}");
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let unknown = write(dir.path(), "unknown.toml", &GAME.replace("n_test = 12", "n_test = 12\nwat = 1"));
    let o = tdgame(&["run"], Some(&unknown));
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("wat"));

    let broken = write(dir.path(), "broken.toml", "kind = \n");
    assert_eq!(tdgame(&["run"], Some(&broken)).status.code(), Some(2));

    let missing = dir.path().join("nope.toml");
    assert_eq!(tdgame(&["run"], Some(&missing)).status.code(), Some(2));

    assert_eq!(tdgame(&["run"], None).status.code(), Some(2));

    let cfg = write(dir.path(), "game.toml", GAME);
    assert_eq!(tdgame(&["separation"], Some(&cfg)).status.code(), Some(2), "kind mismatch");
    assert_eq!(tdgame(&["run", "--trials", "0"], Some(&cfg)).status.code(), Some(2));
}

#[test]
fn cheating_adaptor_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let text = GAME.replace(
        "adaptor = { kind = \"identity\" }",
        "adaptor = { kind = \"test-label-finetune\", train = { epochs = 1, batch_size = 4, learning_rate = 0.1 } }",
    );
    let cfg = write(dir.path(), "cheat.toml", &text);
    let o = tdgame(&["run"], Some(&cfg));
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("protocol violation"));
}

#[test]
fn separation_subcommand_runs_with_builtin_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sep");
    let o = tdgame(&["separation", "--trials", "20", "--out", out.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(0));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("transductive error="), "{stdout}");
    let csv = std::fs::read_to_string(out.join("results.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("trial,arm,error"));
    assert_eq!(csv.lines().count(), 1 + 2 * 20);
}
