//! Transductive adaptors `Γ(F, D, U')`.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::matching::{representations, Matcher, MatchingTerm};
use super::train::{fit, init_seed, split_holdout, Adversary, FitOptions, Matching};
use super::{Adaptor, AlphaSchedule, AtrmConfig, RmcConfig, TrainConfig};
use crate::error::{check_dim, Error, Result};
use crate::models::Model;
use crate::sets::{LabeledSet, UnlabeledSet};

/// `Γ(F, D, U') = F`.
pub fn adapt_identity(model: &Model, _train: &LabeledSet, _batch: &UnlabeledSet) -> Model {
    model.clone()
}

fn require_nonempty(train: &LabeledSet, batch: &UnlabeledSet) -> Result<()> {
    if train.is_empty() {
        return Err(Error::EmptySet("adaptor training set is empty"));
    }
    if batch.is_empty() {
        return Err(Error::EmptySet("adaptor test batch is empty"));
    }
    check_dim(train.dim(), batch.dim())
}

/// DANN-style retraining: a fresh model (architecture of `model`) trained on
/// `train` with the penalty `α(p) · distance(φ(D), φ(U'))`.
///
/// Starts from a fresh initialisation; `model` only supplies the architecture.
pub fn adapt_retrain_matching(
    model: &Model,
    train: &LabeledSet,
    batch: &UnlabeledSet,
    cfg: &TrainConfig,
    matcher: Matcher,
    alpha_max: f64,
    schedule: AlphaSchedule,
) -> Result<Model> {
    require_nonempty(train, batch)?;
    let fresh = model.spec().init(init_seed(cfg.seed))?;
    let term = MatchingTerm::new(batch, matcher, &fresh)?;
    let opts = FitOptions {
        matching: Some(Matching {
            term,
            alpha_max,
            schedule,
        }),
        ..FitOptions::default()
    };
    fit(fresh, train, cfg, opts)
}

/// Adversarial training with representation matching, warm-started from
/// `model`. Each epoch re-attacks the training set against the current model
/// with `inner_budget`, then takes one pass over the attacked copy with the
/// matching penalty towards `batch`.
pub fn adapt_atrm(
    model: &Model,
    train: &LabeledSet,
    batch: &UnlabeledSet,
    cfg: &TrainConfig,
    acfg: &AtrmConfig,
) -> Result<Model> {
    require_nonempty(train, batch)?;
    acfg.inner_budget.validate()?;
    let term = MatchingTerm::new(batch, acfg.matcher, model)?;
    let opts = FitOptions {
        adversary: Adversary::PerEpoch(acfg.inner_budget),
        matching: Some(Matching {
            term,
            alpha_max: acfg.alpha_max,
            schedule: acfg.schedule,
        }),
        validation: None,
    };
    fit(model.clone(), train, cfg, opts)
}

/// Indices of the `k` pool rows closest to `x_hat` in the representation
/// space of `model` (Euclidean; ties broken by pool index).
pub fn nearest_neighbors(model: &Model, pool: &LabeledSet, x_hat: ndarray::ArrayView1<'_, f64>, k: usize) -> Result<Vec<usize>> {
    check_dim(model.input_dim(), x_hat.len())?;
    let target = model.representation(x_hat)?;
    let reps = representations(model, &crate::sets::project_features(pool))?;
    let mut scored: Vec<(f64, usize)> = reps
        .outer_iter()
        .enumerate()
        .map(|(i, r)| {
            let diff = &r - &target;
            (diff.dot(&diff), i)
        })
        .collect();
    scored.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(Ordering::Equal).then(a.1.cmp(&b.1)));
    Ok(scored.into_iter().take(k).map(|(_, i)| i).collect())
}

/// Fine-tune `model` on the `k` nearest pool points to `x_hat`.
///
/// With `early_stop_patience` set, every tenth neighbor (by rank) is held out
/// as validation data.
pub fn adapt_rmc(model: &Model, rcfg: &RmcConfig, x_hat: ndarray::ArrayView1<'_, f64>) -> Result<Model> {
    rcfg.validate()?;
    if rcfg.adapt_config.epochs == 0 {
        return Ok(model.clone());
    }
    let idx = nearest_neighbors(model, &rcfg.augmented_pool, x_hat, rcfg.k_neighbors)?;
    let neighbors = rcfg.augmented_pool.select(&idx);
    let (train, validation) = if rcfg.adapt_config.early_stop_patience.is_some() {
        split_holdout(&neighbors)
    } else {
        (neighbors, None)
    };
    let opts = FitOptions {
        validation,
        ..FitOptions::default()
    };
    fit(model.clone(), &train, &rcfg.adapt_config, opts)
}

/// Identity adaptor: the inductive baseline.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct Identity;

impl Adaptor for Identity {
    fn name(&self) -> &str {
        "identity"
    }

    fn adapt(&self, model: &Model, train: &LabeledSet, batch: &UnlabeledSet, _seed: u64) -> Result<Model> {
        Ok(adapt_identity(model, train, batch))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RetrainMatching {
    pub train: TrainConfig,
    #[serde(default)]
    pub matcher: Matcher,
    pub alpha_max: f64,
    #[serde(default = "progressive")]
    pub schedule: AlphaSchedule,
}

fn progressive() -> AlphaSchedule {
    AlphaSchedule::Progressive
}

impl Adaptor for RetrainMatching {
    fn name(&self) -> &str {
        "retrain-matching"
    }

    fn adapt(&self, model: &Model, train: &LabeledSet, batch: &UnlabeledSet, seed: u64) -> Result<Model> {
        adapt_retrain_matching(
            model,
            train,
            batch,
            &self.train.with_seed(seed),
            self.matcher,
            self.alpha_max,
            self.schedule,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Atrm {
    pub train: TrainConfig,
    pub atrm: AtrmConfig,
}

impl Adaptor for Atrm {
    fn name(&self) -> &str {
        "atrm"
    }

    fn adapt(&self, model: &Model, train: &LabeledSet, batch: &UnlabeledSet, seed: u64) -> Result<Model> {
        adapt_atrm(model, train, batch, &self.train.with_seed(seed), &self.atrm)
    }
}

/// RMC over a batch: points are processed in order, each adaptation starting
/// from the model adapted to the previous point.
#[derive(Debug, Clone, PartialEq)]
pub struct Rmc {
    pub config: RmcConfig,
}

impl Adaptor for Rmc {
    fn name(&self) -> &str {
        "rmc"
    }

    fn adapt(&self, model: &Model, _train: &LabeledSet, batch: &UnlabeledSet, seed: u64) -> Result<Model> {
        let mut current = model.clone();
        for (i, x) in batch.features().outer_iter().enumerate() {
            let mut cfg = self.config.clone();
            cfg.adapt_config.seed = crate::io::rng::derive_seed(seed, "rmc-point", i as u64);
            current = adapt_rmc(&current, &cfg, x)?;
        }
        Ok(current)
    }
}
