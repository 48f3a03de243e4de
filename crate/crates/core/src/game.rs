//! The referee: transductive and inductive games with separated randomness.
//!
//! Seed roles:
//! - `data` draws `D` and `V` and trains the deployed model `F`. `F` is public
//!   (the attacker is white-box), so it must not depend on the defender's
//!   private seed.
//! - `attacker` drives PGD and the attacker's own simulation of the adaptor.
//! - `defender` is the adaptor's private randomness, used only by the referee's
//!   call `F* = Γ(F, D, U')`.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::attacks::{fpa, gmsa, pgd_maximize_restarts, AttackHistory, CompositeLoss, GmsaMode, DEFAULT_ITERATIONS};
use crate::budget::PerturbationBudget;
use crate::error::{Error, Result};
use crate::io::rng::derive_seed;
use crate::io::synth::{generate_synthetic, SyntheticSpec};
use crate::learners::{
    train_adversarial, train_standard, Adaptor, AlphaSchedule, Atrm, AtrmConfig, Identity, Matcher, RetrainMatching,
    Rmc, RmcConfig, TrainConfig,
};
use crate::loss::{accuracy, empirical_loss, LossKind};
use crate::models::{Model, ModelSpec};
use crate::sets::{project_features, LabeledSet, UnlabeledSet};

/// Longest test sequence accepted in sequence mode.
pub const MAX_SEQUENCE: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DataSource {
    Synthetic { spec: SyntheticSpec },
    /// IDX image/label pair; the first `n_train` rows train, the next `n_test` test.
    Idx { images: PathBuf, labels: PathBuf },
}

impl DataSource {
    pub fn name(&self) -> String {
        match self {
            DataSource::Synthetic { spec } => match spec {
                SyntheticSpec::TwoGaussians { .. } => "two-gaussians".into(),
                SyntheticSpec::Blobs2d(_) => "blobs-2d".into(),
                SyntheticSpec::Rings(_) => "rings".into(),
            },
            DataSource::Idx { images, .. } => images
                .file_stem()
                .map_or_else(|| "idx".into(), |s| s.to_string_lossy().into_owned()),
        }
    }

    /// `(D, V)` drawn from the data seed.
    pub fn sample(&self, n_train: usize, n_test: usize, seed: u64) -> Result<(LabeledSet, LabeledSet)> {
        match self {
            DataSource::Synthetic { spec } => Ok((
                generate_synthetic(&spec.with_n(n_train), derive_seed(seed, "train-data", 0))?,
                generate_synthetic(&spec.with_n(n_test), derive_seed(seed, "test-data", 0))?,
            )),
            DataSource::Idx { images, labels } => {
                let all = crate::io::idx::load_mnist_idx(images, labels)?;
                if all.len() < n_train + n_test {
                    return Err(Error::Validation {
                        field: "n_train + n_test".into(),
                        message: format!("dataset has only {} rows", all.len()),
                    });
                }
                let train: Vec<usize> = (0..n_train).collect();
                let test: Vec<usize> = (n_train..n_train + n_test).collect();
                Ok((all.select(&train), all.select(&test)))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainerSpec {
    /// Hidden layer widths; empty means a linear model.
    #[serde(default)]
    pub hidden: Vec<usize>,
    #[serde(default)]
    pub train: TrainConfig,
    /// Adversarial training budget; `None` trains on clean data only.
    #[serde(default)]
    pub adversarial: Option<PerturbationBudget>,
}

impl TrainerSpec {
    pub fn name(&self) -> &'static str {
        if self.adversarial.is_some() {
            "adversarial"
        } else {
            "standard"
        }
    }

    pub fn arch(&self, input: usize, classes: usize) -> ModelSpec {
        if self.hidden.is_empty() {
            ModelSpec::linear(input, classes)
        } else {
            ModelSpec::mlp(input, &self.hidden, classes)
        }
    }

    pub fn train(&self, d: &LabeledSet, seed: u64) -> Result<Model> {
        let arch = self.arch(d.dim(), d.num_classes().max(2));
        let cfg = self.train.with_seed(seed);
        match &self.adversarial {
            None => train_standard(d, &cfg, &arch),
            Some(b) => train_adversarial(d, &cfg, b, &arch),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum AdaptorSpec {
    Identity,
    RetrainMatching {
        train: TrainConfig,
        #[serde(default)]
        matcher: Matcher,
        alpha_max: f64,
        #[serde(default = "progressive")]
        schedule: AlphaSchedule,
    },
    Atrm {
        train: TrainConfig,
        atrm: AtrmConfig,
    },
    /// RMC with the pool `D ∪ PGD(F, D)`; the pool attack uses the seed the
    /// adaptor is built with.
    Rmc {
        k_neighbors: usize,
        adapt: TrainConfig,
        pool_budget: PerturbationBudget,
    },
    /// Fine-tunes on the labeled test batch. Never legal: exists so that the
    /// referee's protocol check can be exercised.
    TestLabelFinetune { train: TrainConfig },
}

fn progressive() -> AlphaSchedule {
    AlphaSchedule::Progressive
}

/// The cheating adaptor behind [`AdaptorSpec::TestLabelFinetune`].
#[derive(Debug, Clone)]
pub struct TestLabelFinetune;

impl Adaptor for TestLabelFinetune {
    fn name(&self) -> &str {
        "test-label-finetune"
    }

    fn adapt(&self, _model: &Model, _train: &LabeledSet, _batch: &UnlabeledSet, _seed: u64) -> Result<Model> {
        Err(Error::ProtocolViolation("test-label-finetune needs the labels of U'".into()))
    }

    fn requires_test_labels(&self) -> bool {
        true
    }
}

impl AdaptorSpec {
    pub fn name(&self) -> &'static str {
        match self {
            AdaptorSpec::Identity => "identity",
            AdaptorSpec::RetrainMatching { .. } => "retrain-matching",
            AdaptorSpec::Atrm { .. } => "atrm",
            AdaptorSpec::Rmc { .. } => "rmc",
            AdaptorSpec::TestLabelFinetune { .. } => "test-label-finetune",
        }
    }

    /// Instantiate the adaptor for deployed model `f` trained on `d`.
    pub fn build(&self, f: &Model, d: &LabeledSet, seed: u64) -> Result<Box<dyn Adaptor>> {
        Ok(match self {
            AdaptorSpec::Identity => Box::new(Identity),
            AdaptorSpec::RetrainMatching {
                train,
                matcher,
                alpha_max,
                schedule,
            } => Box::new(RetrainMatching {
                train: train.clone(),
                matcher: *matcher,
                alpha_max: *alpha_max,
                schedule: *schedule,
            }),
            AdaptorSpec::Atrm { train, atrm } => Box::new(Atrm {
                train: train.clone(),
                atrm: atrm.clone(),
            }),
            AdaptorSpec::Rmc {
                k_neighbors,
                adapt,
                pool_budget,
            } => {
                let adversarial = pgd_maximize_restarts(
                    std::slice::from_ref(f),
                    CompositeLoss::Single,
                    d,
                    pool_budget,
                    derive_seed(seed, "rmc-pool", 0),
                    1,
                )?;
                let config = RmcConfig {
                    k_neighbors: *k_neighbors,
                    augmented_pool: d.concat(&adversarial)?,
                    adapt_config: adapt.clone(),
                };
                config.validate()?;
                Box::new(Rmc { config })
            }
            AdaptorSpec::TestLabelFinetune { .. } => Box::new(TestLabelFinetune),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum AttackerSpec {
    /// PGD against the deployed model; in the transductive game this is the
    /// transfer attack.
    #[serde(alias = "transfer")]
    Pgd {
        #[serde(default = "one")]
        restarts: usize,
    },
    Fpa {
        #[serde(default = "default_iterations")]
        iterations: usize,
    },
    Gmsa {
        #[serde(default = "default_iterations")]
        iterations: usize,
        mode: GmsaMode,
    },
}

impl Default for AttackerSpec {
    fn default() -> Self {
        AttackerSpec::Gmsa {
            iterations: DEFAULT_ITERATIONS,
            mode: GmsaMode::Avg,
        }
    }
}

fn one() -> usize {
    1
}

fn default_iterations() -> usize {
    DEFAULT_ITERATIONS
}

impl AttackerSpec {
    pub fn name(&self) -> &'static str {
        match self {
            AttackerSpec::Pgd { .. } => "pgd",
            AttackerSpec::Fpa { .. } => "fpa",
            AttackerSpec::Gmsa { mode: GmsaMode::Avg, .. } => "gmsa-avg",
            AttackerSpec::Gmsa { mode: GmsaMode::Min, .. } => "gmsa-min",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Seeds {
    pub data: u64,
    pub attacker: u64,
    pub defender: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GameMode {
    /// One batch `U'` of size `n_test`.
    #[default]
    Batch,
    /// Test points arrive one at a time; point `p + 1` is attacked against the
    /// attacker's simulation of the model adapted to points `1..=p`, and the
    /// defender carries its adapted model forward.
    Sequence,
}

/// Everything about a game except its seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameSpec {
    pub data: DataSource,
    pub n_train: usize,
    pub n_test: usize,
    pub budget: PerturbationBudget,
    #[serde(default)]
    pub trainer: TrainerSpec,
    pub adaptor: AdaptorSpec,
    #[serde(default)]
    pub attacker: AttackerSpec,
    #[serde(default)]
    pub mode: GameMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameConfig {
    pub spec: GameSpec,
    pub seeds: Seeds,
}

fn invalid(field: &str, message: impl Into<String>) -> Error {
    Error::Validation {
        field: field.into(),
        message: message.into(),
    }
}

impl GameSpec {
    pub fn with_seeds(&self, seeds: Seeds) -> GameConfig {
        GameConfig {
            spec: self.clone(),
            seeds,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_train == 0 {
            return Err(invalid("n_train", "must be >= 1"));
        }
        if self.n_test == 0 {
            return Err(invalid("n_test", "must be >= 1"));
        }
        self.budget.validate().map_err(|e| invalid("budget", e.to_string()))?;
        self.trainer.train.validate().map_err(|e| invalid("trainer.train", e.to_string()))?;
        if let AttackerSpec::Pgd { restarts: 0 } = self.attacker {
            return Err(invalid("attacker.restarts", "must be >= 1"));
        }
        if self.mode == GameMode::Sequence {
            if self.n_test > MAX_SEQUENCE {
                return Err(invalid("n_test", format!("sequence mode allows at most {MAX_SEQUENCE} points")));
            }
            if !matches!(self.attacker, AttackerSpec::Pgd { .. }) {
                return Err(invalid("attacker", "sequence mode supports the pgd attacker only"));
            }
        }
        if let DataSource::Idx { images, labels } = &self.data {
            for (field, path) in [("data.images", images), ("data.labels", labels)] {
                if !path.exists() {
                    return Err(invalid(field, format!("{} does not exist", path.display())));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GameKind {
    Transductive,
    Inductive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameTranscript {
    pub kind: GameKind,
    pub config: GameConfig,
    pub d: LabeledSet,
    pub v: LabeledSet,
    pub v_prime: LabeledSet,
    pub f: Model,
    pub f_star: Model,
    pub history: Option<AttackHistory>,
    /// What the attacker measured against its own simulation of the adaptor.
    pub attacker_valuation: f64,
    /// Zero-one loss of `F*` on `V'`.
    pub referee_valuation: f64,
    /// Accuracy of the defense on the clean batch `V`.
    pub clean_accuracy: f64,
}

impl GameTranscript {
    pub fn robust_accuracy(&self) -> f64 {
        1.0 - self.referee_valuation
    }
}

/// Zero-one loss of `f_star` on `v_prime`.
pub fn referee_valuation(f_star: &Model, v_prime: &LabeledSet) -> Result<f64> {
    empirical_loss(f_star, v_prime, LossKind::ZeroOne)
}

fn ensure_blind(gamma: &dyn Adaptor) -> Result<()> {
    if gamma.requires_test_labels() {
        return Err(Error::ProtocolViolation(format!(
            "adaptor '{}' requires the labels of the test batch",
            gamma.name()
        )));
    }
    Ok(())
}

struct Setup {
    d: LabeledSet,
    v: LabeledSet,
    f: Model,
}

fn setup(cfg: &GameConfig) -> Result<Setup> {
    cfg.spec.validate()?;
    let (d, v) = cfg.spec.data.sample(cfg.spec.n_train, cfg.spec.n_test, cfg.seeds.data)?;
    let f = cfg.spec.trainer.train(&d, derive_seed(cfg.seeds.data, "trainer", 0))?;
    Ok(Setup { d, v, f })
}

struct Attack {
    v_prime: LabeledSet,
    history: Option<AttackHistory>,
    valuation: f64,
}

fn attack(cfg: &GameConfig, gamma: &dyn Adaptor, s: &Setup) -> Result<Attack> {
    let seed = cfg.seeds.attacker;
    match &cfg.spec.attacker {
        AttackerSpec::Pgd { restarts } => {
            let v_prime = pgd_maximize_restarts(
                std::slice::from_ref(&s.f),
                CompositeLoss::Single,
                &s.v,
                &cfg.spec.budget,
                derive_seed(seed, "pgd", 0),
                *restarts,
            )?;
            let simulated = gamma.adapt(&s.f, &s.d, &project_features(&v_prime), derive_seed(seed, "gamma", 0))?;
            let valuation = referee_valuation(&simulated, &v_prime)?;
            Ok(Attack {
                v_prime,
                history: None,
                valuation,
            })
        }
        AttackerSpec::Fpa { iterations } => {
            let h = fpa(gamma, &s.d, &s.v, &s.f, *iterations, &cfg.spec.budget, derive_seed(seed, "attack", 0))?;
            Ok(Attack {
                v_prime: h.selected_set().clone(),
                valuation: h.selected_valuation(),
                history: Some(h),
            })
        }
        AttackerSpec::Gmsa { iterations, mode } => {
            let h = gmsa(gamma, &s.d, &s.v, &s.f, *iterations, *mode, &cfg.spec.budget, derive_seed(seed, "attack", 0))?;
            Ok(Attack {
                v_prime: h.selected_set().clone(),
                valuation: h.selected_valuation(),
                history: Some(h),
            })
        }
    }
}

/// The transductive game: `F* = Γ(F, D, U')` with the defender's seed, where
/// `U'` is the attacked batch stripped of its labels.
pub fn play_transductive_game(cfg: &GameConfig) -> Result<GameTranscript> {
    cfg.spec.validate()?;
    // Refuse label-hungry adaptors before any work is done.
    if matches!(cfg.spec.adaptor, AdaptorSpec::TestLabelFinetune { .. }) {
        ensure_blind(&TestLabelFinetune)?;
    }
    let s = setup(cfg)?;
    if cfg.spec.mode == GameMode::Sequence {
        return play_sequence(cfg, s);
    }
    let simulated = cfg.spec.adaptor.build(&s.f, &s.d, derive_seed(cfg.seeds.attacker, "adaptor-setup", 0))?;
    ensure_blind(simulated.as_ref())?;
    let a = attack(cfg, simulated.as_ref(), &s)?;

    let defense = cfg.spec.adaptor.build(&s.f, &s.d, derive_seed(cfg.seeds.defender, "adaptor-setup", 0))?;
    ensure_blind(defense.as_ref())?;
    let adapt_seed = derive_seed(cfg.seeds.defender, "adapt", 0);
    let f_star = defense.adapt(&s.f, &s.d, &project_features(&a.v_prime), adapt_seed)?;
    let referee = referee_valuation(&f_star, &a.v_prime)?;
    let clean_model = defense.adapt(&s.f, &s.d, &project_features(&s.v), adapt_seed)?;
    let clean_accuracy = accuracy(&clean_model, &s.v)?;
    Ok(GameTranscript {
        kind: GameKind::Transductive,
        config: cfg.clone(),
        d: s.d,
        v: s.v,
        v_prime: a.v_prime,
        f: s.f,
        f_star,
        history: a.history,
        attacker_valuation: a.valuation,
        referee_valuation: referee,
        clean_accuracy,
    })
}

fn play_sequence(cfg: &GameConfig, s: Setup) -> Result<GameTranscript> {
    let AttackerSpec::Pgd { restarts } = cfg.spec.attacker else {
        unreachable!("validated");
    };
    let simulated = cfg.spec.adaptor.build(&s.f, &s.d, derive_seed(cfg.seeds.attacker, "adaptor-setup", 0))?;
    let defense = cfg.spec.adaptor.build(&s.f, &s.d, derive_seed(cfg.seeds.defender, "adaptor-setup", 0))?;
    ensure_blind(simulated.as_ref())?;
    ensure_blind(defense.as_ref())?;

    let mut attacker_model = s.f.clone();
    let mut defender_model = s.f.clone();
    let mut clean_model = s.f.clone();
    let mut features = s.v.features().clone();
    let (mut sim_wrong, mut wrong, mut clean_right) = (0usize, 0usize, 0usize);
    for i in 0..s.v.len() {
        let point = s.v.select(&[i]);
        let attacked = pgd_maximize_restarts(
            std::slice::from_ref(&attacker_model),
            CompositeLoss::Single,
            &point,
            &cfg.spec.budget,
            derive_seed(cfg.seeds.attacker, "pgd", i as u64),
            restarts,
        )?;
        let u = project_features(&attacked);
        let y = point.labels()[0];
        attacker_model = simulated.adapt(&attacker_model, &s.d, &u, derive_seed(cfg.seeds.attacker, "gamma", i as u64))?;
        sim_wrong += usize::from(attacker_model.predict(attacked.row(0))? != y);

        let seed = derive_seed(cfg.seeds.defender, "adapt", i as u64);
        defender_model = defense.adapt(&defender_model, &s.d, &u, seed)?;
        wrong += usize::from(defender_model.predict(attacked.row(0))? != y);
        clean_model = defense.adapt(&clean_model, &s.d, &project_features(&point), seed)?;
        clean_right += usize::from(clean_model.predict(point.row(0))? == y);
        features.row_mut(i).assign(&attacked.row(0));
    }
    let n = s.v.len() as f64;
    let v_prime = s.v.with_features(features)?;
    Ok(GameTranscript {
        kind: GameKind::Transductive,
        config: cfg.clone(),
        d: s.d,
        v: s.v,
        v_prime,
        f: s.f,
        f_star: defender_model,
        history: None,
        attacker_valuation: sim_wrong as f64 / n,
        referee_valuation: wrong as f64 / n,
        clean_accuracy: clean_right as f64 / n,
    })
}

/// The inductive game: no adaptation (`F* = F`); the attacker targets `F`.
pub fn play_inductive_game(cfg: &GameConfig) -> Result<GameTranscript> {
    let s = setup(cfg)?;
    if cfg.spec.mode == GameMode::Sequence {
        return Err(invalid("mode", "the inductive game has no sequence mode"));
    }
    let a = attack(cfg, &Identity, &s)?;
    let referee = referee_valuation(&s.f, &a.v_prime)?;
    let clean_accuracy = accuracy(&s.f, &s.v)?;
    Ok(GameTranscript {
        kind: GameKind::Inductive,
        config: cfg.clone(),
        d: s.d,
        v: s.v,
        v_prime: a.v_prime,
        f_star: s.f.clone(),
        f: s.f,
        history: a.history,
        attacker_valuation: a.valuation,
        referee_valuation: referee,
        clean_accuracy,
    })
}

pub fn play(kind: GameKind, cfg: &GameConfig) -> Result<GameTranscript> {
    match kind {
        GameKind::Transductive => play_transductive_game(cfg),
        GameKind::Inductive => play_inductive_game(cfg),
    }
}

/// Re-run the game recorded in `transcript` and check every field matches bit for bit.
pub fn replay(transcript: &GameTranscript) -> Result<GameTranscript> {
    let again = play(transcript.kind, &transcript.config)?;
    let checks: [(&str, bool); 8] = [
        ("D", again.d == transcript.d),
        ("V", again.v == transcript.v),
        ("V'", again.v_prime == transcript.v_prime),
        ("F", again.f == transcript.f),
        ("F*", again.f_star == transcript.f_star),
        ("history", again.history == transcript.history),
        (
            "attacker_valuation",
            again.attacker_valuation.to_bits() == transcript.attacker_valuation.to_bits(),
        ),
        (
            "referee_valuation",
            again.referee_valuation.to_bits() == transcript.referee_valuation.to_bits()
                && again.clean_accuracy.to_bits() == transcript.clean_accuracy.to_bits(),
        ),
    ];
    if let Some((what, _)) = checks.iter().find(|(_, ok)| !ok) {
        return Err(Error::ReplayMismatch(format!("{what} differs on replay")));
    }
    Ok(again)
}

impl GameTranscript {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::synth::BlobParams;

    fn base(adaptor: AdaptorSpec, attacker: AttackerSpec, eps: f64) -> GameConfig {
        GameSpec {
            data: DataSource::Synthetic {
                spec: SyntheticSpec::Blobs2d(BlobParams::separable(0)),
            },
            n_train: 40,
            n_test: 12,
            budget: PerturbationBudget::new(eps, eps / 4.0 + 1e-3, 10).unwrap().with_unit_box(true),
            trainer: TrainerSpec {
                hidden: vec![],
                train: TrainConfig {
                    epochs: 30,
                    batch_size: 8,
                    learning_rate: 0.5,
                    ..TrainConfig::default()
                },
                adversarial: None,
            },
            adaptor,
            attacker,
            mode: GameMode::Batch,
        }
        .with_seeds(Seeds {
            data: 1,
            attacker: 2,
            defender: 3,
        })
    }

    fn retrain() -> AdaptorSpec {
        AdaptorSpec::RetrainMatching {
            train: TrainConfig {
                epochs: 5,
                batch_size: 8,
                learning_rate: 0.5,
                ..TrainConfig::default()
            },
            matcher: Matcher::MeanFeature,
            alpha_max: 0.5,
            schedule: AlphaSchedule::Progressive,
        }
    }

    #[test]
    fn referee_examples() {
        let v = LabeledSet::from_rows(&[vec![-1.0], vec![1.0]], vec![0, 1]).unwrap();
        let perfect = Model::binary_linear(&[1.0], 0.0).unwrap();
        assert_eq!(referee_valuation(&perfect, &v).unwrap(), 0.0);
        let constant = Model::binary_linear(&[0.0], 1.0).unwrap();
        assert_eq!(referee_valuation(&constant, &v).unwrap(), 0.5);
        assert!(referee_valuation(&perfect, &LabeledSet::empty(1)).is_err());
    }

    #[test]
    fn identity_transductive_equals_inductive() {
        let cfg = base(AdaptorSpec::Identity, AttackerSpec::Pgd { restarts: 1 }, 0.2);
        let t = play_transductive_game(&cfg).unwrap();
        let i = play_inductive_game(&cfg).unwrap();
        assert_eq!(t.v_prime, i.v_prime);
        assert_eq!(t.f_star, i.f_star);
        assert_eq!(t.referee_valuation.to_bits(), i.referee_valuation.to_bits());
        assert_eq!(t.clean_accuracy, i.clean_accuracy);
    }

    #[test]
    fn zero_budget_values_clean_error() {
        let cfg = base(retrain(), AttackerSpec::Fpa { iterations: 1 }, 0.0);
        let t = play_transductive_game(&cfg).unwrap();
        assert_eq!(t.v_prime, t.v);
        assert_eq!(t.referee_valuation, empirical_loss(&t.f_star, &t.v, LossKind::ZeroOne).unwrap());
    }

    #[test]
    fn seeds_are_separated() {
        let cfg = base(retrain(), AttackerSpec::Gmsa { iterations: 1, mode: GmsaMode::Avg }, 0.2);
        let a = play_transductive_game(&cfg).unwrap();
        let mut other_defender = cfg.clone();
        other_defender.seeds.defender = 99;
        let b = play_transductive_game(&other_defender).unwrap();
        assert_eq!(a.v_prime, b.v_prime);
        assert_ne!(a.f_star, b.f_star);
        let mut other_attacker = cfg.clone();
        other_attacker.seeds.attacker = 99;
        assert_eq!(play_transductive_game(&other_attacker).unwrap().f, a.f);
    }

    #[test]
    fn cheating_adaptor_is_a_protocol_violation() {
        let cfg = base(
            AdaptorSpec::TestLabelFinetune {
                train: TrainConfig::default(),
            },
            AttackerSpec::Pgd { restarts: 1 },
            0.1,
        );
        let err = play_transductive_game(&cfg).unwrap_err();
        assert!(matches!(err, Error::ProtocolViolation(_)));
        assert_eq!(err.exit_code(), 3);
    }

    #[test]
    fn transcript_replays() {
        let cfg = base(retrain(), AttackerSpec::Fpa { iterations: 1 }, 0.15);
        let t = play_transductive_game(&cfg).unwrap();
        let back = GameTranscript::from_json(&t.to_json().unwrap()).unwrap();
        assert_eq!(back, t);
        replay(&back).unwrap();
        let mut tampered = back;
        tampered.referee_valuation += 1e-12;
        assert!(matches!(replay(&tampered), Err(Error::ReplayMismatch(_))));
    }

    #[test]
    fn sequence_mode_runs_rmc() {
        let mut cfg = base(
            AdaptorSpec::Rmc {
                k_neighbors: 8,
                adapt: TrainConfig {
                    epochs: 2,
                    batch_size: 4,
                    learning_rate: 0.1,
                    ..TrainConfig::default()
                },
                pool_budget: PerturbationBudget::new(0.1, 0.05, 4).unwrap().with_unit_box(true),
            },
            AttackerSpec::Pgd { restarts: 1 },
            0.1,
        );
        cfg.spec.mode = GameMode::Sequence;
        let t = play_transductive_game(&cfg).unwrap();
        assert_eq!(t.v_prime.len(), cfg.spec.n_test);
        assert!((0.0..=1.0).contains(&t.referee_valuation));
        cfg.spec.n_test = MAX_SEQUENCE + 1;
        assert!(matches!(play_transductive_game(&cfg), Err(Error::Validation { .. })));
    }

    #[test]
    fn validation_names_fields() {
        let mut cfg = base(AdaptorSpec::Identity, AttackerSpec::Pgd { restarts: 1 }, 0.1);
        cfg.spec.n_test = 0;
        match play_inductive_game(&cfg) {
            Err(Error::Validation { field, .. }) => assert_eq!(field, "n_test"),
            other => panic!("{other:?}"),
        }
    }
}
