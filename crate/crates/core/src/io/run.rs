//! Running a parsed [`ExperimentConfig`] end to end.

use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::Result;
use crate::game::{play, AttackerSpec, GameKind, GameSpec, GameTranscript, Seeds};
use crate::gaussian_sep::{run_separation, GaussianInstance, SeparationReport};
use crate::rejectron::{admits, curve_csv, Case, RejectronReport};

use super::config::{trial_seeds, ExperimentConfig, ExperimentKind};
use super::results::{emit_results, results_csv, summarize, Artifact, ResultRow};

/// Everything a run produces, ready to be written with [`RunOutput::write`].
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub csv: String,
    pub summary: Value,
    pub artifacts: Vec<Artifact>,
    /// Human-readable one-line digest per group / arm / case.
    pub lines: Vec<String>,
}

impl RunOutput {
    /// Write into `dir`. The echoed config omits `output_dir`, so runs that
    /// differ only in where they were written produce identical files.
    pub fn write(&self, dir: &Path, cfg: &ExperimentConfig) -> Result<()> {
        let echo = ExperimentConfig {
            output_dir: None,
            ..cfg.clone()
        };
        emit_results(dir, &echo.to_toml()?, &self.csv, &self.summary, &self.artifacts)
    }
}

/// Play `trials` games with shifted seeds, in parallel, ordered by trial.
pub fn play_trials(kind: GameKind, spec: &GameSpec, seeds: Seeds, trials: usize) -> Result<Vec<GameTranscript>> {
    (0..trials)
        .into_par_iter()
        .map(|t| play(kind, &spec.with_seeds(trial_seeds(seeds, t))))
        .collect()
}

fn game_output(transcripts: &[(String, GameTranscript)]) -> Result<RunOutput> {
    let rows: Vec<ResultRow> = transcripts.iter().map(|(_, t)| ResultRow::from_transcript(t)).collect();
    let groups = summarize(&rows);
    let lines = groups
        .iter()
        .map(|g| {
            format!(
                "adaptor={} attacker={} trials={} clean_acc={:.4} robust_acc={:.4}",
                g.adaptor, g.attacker, g.trials, g.mean_clean_acc, g.robust_acc
            )
        })
        .collect();
    let mut artifacts = Vec::with_capacity(transcripts.len());
    for (name, t) in transcripts {
        artifacts.push((format!("transcripts/{name}.json"), t.to_json()?));
    }
    Ok(RunOutput {
        csv: results_csv(&rows),
        summary: serde_json::to_value(&groups)?,
        artifacts,
        lines,
    })
}

fn run_game(cfg: &ExperimentConfig, spec: &GameSpec) -> Result<RunOutput> {
    let transcripts = play_trials(cfg.setting, spec, cfg.seeds, cfg.trials)?;
    let named: Vec<_> = transcripts
        .into_iter()
        .enumerate()
        .map(|(t, tr)| (format!("trial-{t}"), tr))
        .collect();
    game_output(&named)
}

fn run_bench(cfg: &ExperimentConfig, spec: &GameSpec, attackers: &[AttackerSpec]) -> Result<RunOutput> {
    let mut named = Vec::new();
    for (a, attacker) in attackers.iter().enumerate() {
        let mut s = spec.clone();
        s.attacker = attacker.clone();
        for (t, tr) in play_trials(cfg.setting, &s, cfg.seeds, cfg.trials)?.into_iter().enumerate() {
            named.push((format!("{a}-{}-trial-{t}", attacker.name()), tr));
        }
    }
    game_output(&named)
}

fn separation_output(report: &SeparationReport) -> Result<RunOutput> {
    let mut csv = String::from("trial,arm,error\n");
    for (trial, arm, err) in report.csv_rows() {
        csv.push_str(&format!("{trial},{arm},{err}\n"));
    }
    let mut summary = serde_json::to_value(report)?;
    if let Value::Object(map) = &mut summary {
        map.remove("records");
    }
    let lines = vec![
        format!(
            "d={} m={} m'={} trials={}",
            report.d, report.m, report.m_prime, report.trials
        ),
        format!(
            "inductive error={:.4} [{:.4}, {:.4}] analytic={:.4}",
            report.inductive_error,
            report.inductive_interval.low,
            report.inductive_interval.high,
            report.inductive_error_analytic
        ),
        format!(
            "transductive error={:.4} [{:.4}, {:.4}]",
            report.transductive_error, report.transductive_interval.low, report.transductive_interval.high
        ),
    ];
    Ok(RunOutput {
        csv,
        summary,
        artifacts: vec![("records.json".into(), serde_json::to_string_pretty(&report.records)? + "\n")],
        lines,
    })
}

/// Thresholds `(max_rej, max_err)` reported for every rejection case.
pub const ADMISSION_TARGETS: [(f64, f64); 2] = [(0.1, 0.1), (0.2, 0.4)];

#[derive(Serialize)]
struct CaseSummary<'a> {
    case: &'a str,
    admits: Vec<Value>,
    min_err_at_rej_0_2: Option<f64>,
}

fn min_err_within(case: &Case, max_rej: f64) -> Option<f64> {
    case.exhaustive
        .iter()
        .filter(|p| p.valuation.rej <= max_rej)
        .filter_map(|p| p.valuation.err)
        .min_by(f64::total_cmp)
}

fn rejectron_output(report: &RejectronReport) -> Result<RunOutput> {
    let cases = [&report.adversarial, &report.benign, &report.mimic];
    let mut csv = String::from("case,threshold,rej,err,err_defined\n");
    let mut artifacts = Vec::new();
    let mut summaries = Vec::new();
    let mut lines = Vec::new();
    for case in cases {
        for line in curve_csv(&case.curve).lines().skip(1) {
            csv.push_str(&format!("{},{line}\n", case.name));
        }
        artifacts.push((format!("curves/{}-exhaustive.csv", case.name), curve_csv(&case.exhaustive)));
        let adm: Vec<Value> = ADMISSION_TARGETS
            .iter()
            .map(|&(r, e)| json!({"max_rej": r, "max_err": e, "admits": admits(&case.exhaustive, r, e)}))
            .collect();
        let min_err = min_err_within(case, 0.2);
        lines.push(format!(
            "case={} admits(0.1,0.1)={} admits(0.2,0.4)={} min_err_at_rej<=0.2={}",
            case.name,
            admits(&case.exhaustive, 0.1, 0.1),
            admits(&case.exhaustive, 0.2, 0.4),
            min_err.map_or("undefined".into(), |e| format!("{e:.4}"))
        ));
        summaries.push(CaseSummary {
            case: &case.name,
            admits: adm,
            min_err_at_rej_0_2: min_err,
        });
    }
    Ok(RunOutput {
        csv,
        summary: serde_json::to_value(&summaries)?,
        artifacts,
        lines,
    })
}

/// Execute `cfg`; nothing is written to disk.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunOutput> {
    cfg.validate()?;
    match cfg.kind {
        ExperimentKind::Game => run_game(cfg, cfg.game.as_ref().expect("validated")),
        ExperimentKind::AttackBench => {
            let bench = cfg.attack_bench.as_ref().expect("validated");
            run_bench(cfg, &bench.game, &bench.attackers)
        }
        ExperimentKind::Separation => {
            let inst = GaussianInstance::theorem_regime(cfg.separation.as_ref().expect("validated"))?;
            separation_output(&run_separation(&inst, cfg.trials, cfg.seeds.data)?)
        }
        ExperimentKind::Rejectron => {
            let scenario = cfg.rejectron.as_ref().expect("validated");
            rejectron_output(&scenario.run(cfg.seeds)?)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::config::parse_config;

    const GAME: &str = r#"
kind = "game"
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
attacker = { kind = "fpa", iterations = 2 }
data = { kind = "synthetic", spec = { kind = "blobs2d" } }
"#;

    #[test]
    fn game_run_is_reproducible_on_disk() {
        let cfg = parse_config(GAME, "t").unwrap();
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        run_experiment(&cfg).unwrap().write(a.path(), &cfg).unwrap();
        run_experiment(&cfg).unwrap().write(b.path(), &cfg).unwrap();
        for f in ["results.csv", "summary.json", "config.toml", "transcripts/trial-0.json", "transcripts/trial-1.json"] {
            assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap(), "{f}");
        }
        let csv = std::fs::read_to_string(a.path().join("results.csv")).unwrap();
        assert_eq!(csv.lines().count(), 3);
        let echoed = std::fs::read_to_string(a.path().join("config.toml")).unwrap();
        assert_eq!(parse_config(&echoed, "echo").unwrap(), cfg);
    }

    #[test]
    fn transcripts_replay() {
        let cfg = parse_config(GAME, "t").unwrap();
        let out = run_experiment(&cfg).unwrap();
        let (_, json) = &out.artifacts[0];
        let t = GameTranscript::from_json(json).unwrap();
        crate::game::replay(&t).unwrap();
    }
}
