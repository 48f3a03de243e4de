//! Experiment configuration files (TOML).
//!
//! ```toml
//! kind = "game"            # game | separation | rejectron | attack-bench
//! trials = 5
//!
//! [seeds]
//! data = 0
//! attacker = 1
//! defender = 2
//!
//! [game]
//! n_train = 200
//! n_test = 50
//! budget = { epsilon = 0.1 }
//! adaptor = { kind = "identity" }
//! data = { kind = "synthetic", spec = { kind = "blobs2d" } }
//! ```
//!
//! Unknown keys are rejected; everything left out takes its documented
//! default, and the fully resolved file is echoed into each run directory.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::attacks::{GmsaMode, DEFAULT_ITERATIONS};
use crate::budget::PerturbationBudget;
use crate::game::{AdaptorSpec, AttackerSpec, DataSource, GameKind, GameMode, GameSpec, Seeds, TrainerSpec};
use crate::io::synth::{BlobParams, SyntheticSpec};
use crate::learners::{AlphaSchedule, Matcher, TrainConfig};
use crate::gaussian_sep::RegimeParams;
use crate::rejectron::RejectronScenario;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Game,
    Separation,
    Rejectron,
    AttackBench,
}

impl ExperimentKind {
    pub fn section(self) -> &'static str {
        match self {
            ExperimentKind::Game => "game",
            ExperimentKind::Separation => "separation",
            ExperimentKind::Rejectron => "rejectron",
            ExperimentKind::AttackBench => "attack_bench",
        }
    }
}

/// Several attackers against one game, each over the same trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackBenchSpec {
    pub game: GameSpec,
    pub attackers: Vec<AttackerSpec>,
}

impl AttackBenchSpec {
    /// Overlapping 2-D blobs, an MLP, the retrain-with-matching defense and
    /// the transfer, FPA, GMSA-AVG and GMSA-MIN attackers.
    pub fn desk() -> Self {
        let train = TrainConfig {
            epochs: 30,
            batch_size: 16,
            learning_rate: 0.3,
            ..TrainConfig::default()
        };
        let budget = PerturbationBudget::new(0.1, 0.02, 10)
            .expect("valid budget")
            .with_unit_box(true);
        Self {
            game: GameSpec {
                data: DataSource::Synthetic {
                    spec: SyntheticSpec::Blobs2d(BlobParams::overlapping(0)),
                },
                n_train: 200,
                n_test: 50,
                budget,
                trainer: TrainerSpec {
                    hidden: vec![16],
                    train: train.clone(),
                    adversarial: None,
                },
                adaptor: AdaptorSpec::RetrainMatching {
                    train,
                    matcher: Matcher::MeanFeature,
                    alpha_max: 1.0,
                    schedule: AlphaSchedule::Progressive,
                },
                attacker: AttackerSpec::default(),
                mode: GameMode::Batch,
            },
            attackers: vec![
                AttackerSpec::Pgd { restarts: 1 },
                AttackerSpec::Fpa {
                    iterations: DEFAULT_ITERATIONS,
                },
                AttackerSpec::Gmsa {
                    iterations: DEFAULT_ITERATIONS,
                    mode: GmsaMode::Avg,
                },
                AttackerSpec::Gmsa {
                    iterations: DEFAULT_ITERATIONS,
                    mode: GmsaMode::Min,
                },
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    pub seeds: Seeds,
    #[serde(default = "one")]
    pub trials: usize,
    /// Which game `game` and `attack-bench` experiments play.
    #[serde(default = "transductive")]
    pub setting: GameKind,
    #[serde(default)]
    pub game: Option<GameSpec>,
    #[serde(default)]
    pub separation: Option<RegimeParams>,
    #[serde(default)]
    pub rejectron: Option<RejectronScenario>,
    #[serde(default)]
    pub attack_bench: Option<AttackBenchSpec>,
}

fn one() -> usize {
    1
}

fn transductive() -> GameKind {
    GameKind::Transductive
}

fn invalid(field: &str, message: impl Into<String>) -> Error {
    Error::Validation {
        field: field.into(),
        message: message.into(),
    }
}

/// Trial `t` shifts every seed by `t`.
pub fn trial_seeds(seeds: Seeds, trial: usize) -> Seeds {
    let t = trial as u64;
    Seeds {
        data: seeds.data.wrapping_add(t),
        attacker: seeds.attacker.wrapping_add(t),
        defender: seeds.defender.wrapping_add(t),
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(invalid("trials", "must be >= 1"));
        }
        let present = [
            (ExperimentKind::Game, self.game.is_some()),
            (ExperimentKind::Separation, self.separation.is_some()),
            (ExperimentKind::Rejectron, self.rejectron.is_some()),
            (ExperimentKind::AttackBench, self.attack_bench.is_some()),
        ];
        for (kind, is_present) in present {
            if kind == self.kind && !is_present {
                return Err(invalid(kind.section(), format!("required for kind = {:?}", kind)));
            }
            if kind != self.kind && is_present {
                return Err(invalid(kind.section(), "section does not match the experiment kind"));
            }
        }
        match self.kind {
            ExperimentKind::Game => self.game.as_ref().expect("checked").validate(),
            ExperimentKind::AttackBench => {
                let bench = self.attack_bench.as_ref().expect("checked");
                if bench.attackers.is_empty() {
                    return Err(invalid("attack_bench.attackers", "list at least one attacker"));
                }
                bench.game.validate()
            }
            ExperimentKind::Separation => {
                let r = self.separation.as_ref().expect("checked");
                crate::gaussian_sep::GaussianInstance::theorem_regime(r)
                    .map(|_| ())
                    .map_err(|e| invalid("separation", e.to_string()))
            }
            ExperimentKind::Rejectron => {
                let r = self.rejectron.as_ref().expect("checked");
                r.budget.validate().map_err(|e| invalid("rejectron.budget", e.to_string()))
            }
        }
    }

    /// Serialize to TOML; [`parse_config`] of the result gives `self` back.
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse {
            path: "<memory>".into(),
            message: e.to_string(),
        })
    }
}

/// Field named in serde's "unknown field `x`" message.
fn unknown_field(message: &str) -> Option<String> {
    let rest = &message[message.find("unknown field `")? + "unknown field `".len()..];
    Some(rest[..rest.find('`')?].to_string())
}

/// Parse and validate configuration text; `origin` names it in errors.
pub fn parse_config(text: &str, origin: &str) -> Result<ExperimentConfig> {
    let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| {
        let message = e.to_string();
        match unknown_field(&message) {
            Some(field) => Error::Validation {
                field,
                message: format!("unknown key in {origin}: {}", message.trim()),
            },
            None => Error::Parse {
                path: origin.into(),
                message: message.trim().to_string(),
            },
        }
    })?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: impl AsRef<Path>) -> Result<ExperimentConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    parse_config(&text, &path.display().to_string())
}
