//! Result files: the canonical CSV, JSON summaries, transcripts and the
//! resolved configuration, all written into one run directory.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::game::GameTranscript;

pub const RESULTS_HEADER: &str = "dataset,trainer,adaptor,attacker,epsilon,seed,clean_acc,robust_acc";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub dataset: String,
    pub trainer: String,
    pub adaptor: String,
    pub attacker: String,
    pub epsilon: f64,
    pub seed: u64,
    pub clean_acc: f64,
    pub robust_acc: f64,
}

impl ResultRow {
    pub fn from_transcript(t: &GameTranscript) -> Self {
        let spec = &t.config.spec;
        Self {
            dataset: spec.data.name(),
            trainer: spec.trainer.name().into(),
            adaptor: match t.kind {
                crate::game::GameKind::Transductive => spec.adaptor.name().into(),
                crate::game::GameKind::Inductive => "none".into(),
            },
            attacker: spec.attacker.name().into(),
            epsilon: spec.budget.epsilon,
            seed: t.config.seeds.data,
            clean_acc: t.clean_accuracy,
            robust_acc: t.robust_accuracy(),
        }
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Header plus one LF-terminated line per row. Floats use Rust's shortest
/// round-trip formatting, so the text is a pure function of the values.
pub fn results_csv(rows: &[ResultRow]) -> String {
    let mut out = String::from(RESULTS_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            csv_field(&r.dataset),
            csv_field(&r.trainer),
            csv_field(&r.adaptor),
            csv_field(&r.attacker),
            r.epsilon,
            r.seed,
            r.clean_acc,
            r.robust_acc
        );
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub adaptor: String,
    pub attacker: String,
    pub trials: usize,
    pub mean_clean_acc: f64,
    /// Mean referee valuation (zero-one loss on the attacked batch).
    pub mean_valuation: f64,
    /// `1 − mean_valuation`.
    pub robust_acc: f64,
}

/// Per `(adaptor, attacker)` means, in order of first appearance.
pub fn summarize(rows: &[ResultRow]) -> Vec<GroupSummary> {
    let mut order: Vec<(String, String)> = Vec::new();
    let mut groups: BTreeMap<(String, String), Vec<&ResultRow>> = BTreeMap::new();
    for r in rows {
        let key = (r.adaptor.clone(), r.attacker.clone());
        if !groups.contains_key(&key) {
            order.push(key.clone());
        }
        groups.entry(key).or_default().push(r);
    }
    order
        .into_iter()
        .map(|key| {
            let members = &groups[&key];
            let n = members.len() as f64;
            let mean_valuation = members.iter().map(|r| 1.0 - r.robust_acc).sum::<f64>() / n;
            GroupSummary {
                adaptor: key.0,
                attacker: key.1,
                trials: members.len(),
                mean_clean_acc: members.iter().map(|r| r.clean_acc).sum::<f64>() / n,
                mean_valuation,
                robust_acc: 1.0 - mean_valuation,
            }
        })
        .collect()
}

/// A file to place in the run directory, relative path and contents.
pub type Artifact = (String, String);

/// Write `results.csv`, `summary.json`, the resolved `config.toml` and any
/// extra artifacts into `dir`.
pub fn emit_results(
    dir: &Path,
    resolved_config: &str,
    csv: &str,
    summary: &impl Serialize,
    artifacts: &[Artifact],
) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("config.toml"), resolved_config)?;
    std::fs::write(dir.join("results.csv"), csv)?;
    let mut json = serde_json::to_string_pretty(summary)?;
    json.push('\n');
    std::fs::write(dir.join("summary.json"), json)?;
    for (name, contents) in artifacts {
        let path = dir.join(name);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(path, contents)?;
    }
    Ok(())
}
