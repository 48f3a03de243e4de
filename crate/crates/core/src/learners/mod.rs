//! The defender: supervised trainers and transductive adaptors.
//!
//! Trainers map a labeled set to a model. Adaptors implement [`Adaptor`]:
//! given the deployed model, the training data and an *unlabeled* test batch
//! they return the model used on that batch. Every routine is a pure
//! function of its inputs and seed.

mod adapt;
mod matching;
mod train;

use serde::{Deserialize, Serialize};

use crate::budget::PerturbationBudget;
use crate::error::{Error, Result};
use crate::models::Model;
use crate::sets::{LabeledSet, UnlabeledSet};

pub use adapt::{
    adapt_atrm, adapt_identity, adapt_retrain_matching, adapt_rmc, nearest_neighbors, Atrm, Identity,
    RetrainMatching, Rmc,
};
pub use matching::{alpha_at, feature_distance, representations, Matcher};
pub use train::{train_adversarial, train_standard};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Optimizer {
    Sgd,
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl Optimizer {
    pub fn adam() -> Self {
        Optimizer::Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    #[serde(default = "default_optimizer")]
    pub optimizer: Optimizer,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub early_stop_patience: Option<usize>,
    #[serde(default)]
    pub weight_decay: f64,
}

fn default_optimizer() -> Optimizer {
    Optimizer::Sgd
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 40,
            batch_size: 32,
            learning_rate: 0.1,
            optimizer: Optimizer::Sgd,
            seed: 0,
            early_stop_patience: None,
            weight_decay: 0.0,
        }
    }
}

impl TrainConfig {
    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::BadParams("batch_size must be positive".into()));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::BadParams("learning_rate must be finite and positive".into()));
        }
        if !(self.weight_decay.is_finite() && self.weight_decay >= 0.0) {
            return Err(Error::BadParams("weight_decay must be finite and >= 0".into()));
        }
        if let Optimizer::Adam { beta1, beta2, eps } = self.optimizer {
            if !(0.0..1.0).contains(&beta1) || !(0.0..1.0).contains(&beta2) || eps <= 0.0 {
                return Err(Error::BadParams("invalid Adam hyper-parameters".into()));
            }
        }
        Ok(())
    }
}

/// How the matching weight evolves over training progress `p ∈ [0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AlphaSchedule {
    Constant,
    /// `alpha_max · (2 / (1 + exp(-10 p)) - 1)`.
    Progressive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtrmConfig {
    pub alpha_max: f64,
    #[serde(default = "default_schedule")]
    pub schedule: AlphaSchedule,
    pub inner_budget: PerturbationBudget,
    #[serde(default)]
    pub matcher: Matcher,
}

fn default_schedule() -> AlphaSchedule {
    AlphaSchedule::Progressive
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RmcConfig {
    pub k_neighbors: usize,
    /// Clean and adversarial training points searched for neighbors.
    pub augmented_pool: LabeledSet,
    pub adapt_config: TrainConfig,
}

impl RmcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.augmented_pool.is_empty() {
            return Err(Error::EmptySet("RMC pool is empty"));
        }
        if self.k_neighbors == 0 || self.k_neighbors > self.augmented_pool.len() {
            return Err(Error::BadParams(format!(
                "k_neighbors = {} must be in 1..={}",
                self.k_neighbors,
                self.augmented_pool.len()
            )));
        }
        Ok(())
    }
}

/// A transductive learning algorithm `Γ(F, D, U)`.
///
/// `seed` carries the adaptor's private randomness. Implementations only ever
/// see the unlabeled test batch.
pub trait Adaptor: Send + Sync {
    fn name(&self) -> &str;

    fn adapt(&self, model: &Model, train: &LabeledSet, batch: &UnlabeledSet, seed: u64) -> Result<Model>;

    /// Adaptors that would need the labels of the test batch declare it here;
    /// the referee refuses to run them.
    fn requires_test_labels(&self) -> bool {
        false
    }
}
