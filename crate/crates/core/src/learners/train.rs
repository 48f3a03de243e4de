//! Mini-batch training loop shared by every trainer and adaptor.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::matching::{alpha_at, MatchingTerm};
use super::{AlphaSchedule, Optimizer, TrainConfig};
use crate::attacks::{pgd_maximize, CompositeLoss};
use crate::budget::PerturbationBudget;
use crate::error::{check_dim, Error, Result};
use crate::io::rng::derive_seed;
use crate::loss::{empirical_loss, LossKind};
use crate::models::{Model, ModelSpec, ParamGrads};
use crate::sets::LabeledSet;

/// Where adversarial examples come from during training.
#[derive(Debug, Clone, Copy)]
pub(crate) enum Adversary {
    None,
    /// Every mini-batch is replaced by its PGD-perturbed copy.
    PerBatch(PerturbationBudget),
    /// The whole training set is re-attacked at the start of each epoch.
    PerEpoch(PerturbationBudget),
}

pub(crate) struct Matching<'a> {
    pub term: MatchingTerm<'a>,
    pub alpha_max: f64,
    pub schedule: AlphaSchedule,
}

pub(crate) struct FitOptions<'a> {
    pub adversary: Adversary,
    pub matching: Option<Matching<'a>>,
    pub validation: Option<LabeledSet>,
}

impl Default for FitOptions<'_> {
    fn default() -> Self {
        Self {
            adversary: Adversary::None,
            matching: None,
            validation: None,
        }
    }
}

pub(crate) fn init_seed(seed: u64) -> u64 {
    derive_seed(seed, "init", 0)
}

struct OptimizerState {
    kind: Optimizer,
    first: Option<ParamGrads>,
    second: Option<ParamGrads>,
    t: i32,
}

impl OptimizerState {
    fn new(kind: Optimizer, model: &Model) -> Self {
        let adam = matches!(kind, Optimizer::Adam { .. });
        Self {
            kind,
            first: adam.then(|| ParamGrads::zeros_like(model)),
            second: adam.then(|| ParamGrads::zeros_like(model)),
            t: 0,
        }
    }

    fn step(&mut self, model: &mut Model, grads: &ParamGrads, lr: f64) {
        match self.kind {
            Optimizer::Sgd => model.apply_update(grads, -lr),
            Optimizer::Adam { beta1, beta2, eps } => {
                self.t += 1;
                let m = self.first.as_mut().unwrap();
                let v = self.second.as_mut().unwrap();
                let c1 = 1.0 - beta1.powi(self.t);
                let c2 = 1.0 - beta2.powi(self.t);
                let params = model.params_iter_mut();
                for (((mi, vi), &g), p) in m.iter_mut().zip(v.iter_mut()).zip(grads.iter()).zip(params) {
                    *mi = beta1 * *mi + (1.0 - beta1) * g;
                    *vi = beta2 * *vi + (1.0 - beta2) * g * g;
                    *p -= lr * (*mi / c1) / ((*vi / c2).sqrt() + eps);
                }
            }
        }
    }
}

/// Every tenth row (positions 9, 19, ...) becomes validation data.
pub(crate) fn split_holdout(set: &LabeledSet) -> (LabeledSet, Option<LabeledSet>) {
    let (val, train): (Vec<usize>, Vec<usize>) = (0..set.len()).partition(|i| i % 10 == 9);
    if val.is_empty() {
        (set.clone(), None)
    } else {
        (set.select(&train), Some(set.select(&val)))
    }
}

fn batch_gradient(model: &Model, batch: &LabeledSet) -> Result<(f64, ParamGrads)> {
    let mut grads = ParamGrads::zeros_like(model);
    let mut loss = 0.0;
    let w = 1.0 / batch.len() as f64;
    for (x, y) in batch.iter() {
        let g = model.loss_gradients(x, y, LossKind::CrossEntropy, false, true)?;
        loss += w * g.loss;
        grads.add_scaled(g.param_grads.as_ref().expect("param grads requested"), w);
    }
    Ok((loss, grads))
}

/// Train `model` in place on `data`. Returns the final (or best-validation) model.
pub(crate) fn fit(mut model: Model, data: &LabeledSet, cfg: &TrainConfig, mut opts: FitOptions<'_>) -> Result<Model> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::EmptySet("training set is empty"));
    }
    check_dim(model.input_dim(), data.dim())?;
    if cfg.epochs == 0 {
        return Ok(model);
    }
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, "shuffle", 0));
    let batches_per_epoch = data.len().div_ceil(cfg.batch_size);
    let total_steps = (cfg.epochs * batches_per_epoch) as f64;
    let mut optimizer = OptimizerState::new(cfg.optimizer, &model);
    let mut best: Option<(f64, Model)> = None;
    let mut since_best = 0usize;
    let mut step = 0usize;

    for epoch in 0..cfg.epochs {
        let epoch_seed = derive_seed(cfg.seed, "adversary-epoch", epoch as u64);
        let epoch_data = match opts.adversary {
            Adversary::PerEpoch(budget) => pgd_maximize(
                std::slice::from_ref(&model),
                CompositeLoss::Single,
                data,
                &budget,
                epoch_seed,
            )?,
            _ => data.clone(),
        };
        order.shuffle(&mut shuffle_rng);
        for (b, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let mut batch = epoch_data.select(chunk);
            if let Adversary::PerBatch(budget) = opts.adversary {
                let seed = derive_seed(epoch_seed, "batch", b as u64);
                batch = pgd_maximize(std::slice::from_ref(&model), CompositeLoss::Single, &batch, &budget, seed)?;
            }
            let (loss, mut grads) = batch_gradient(&model, &batch)?;
            if !loss.is_finite() {
                return Err(Error::NonFinite(format!("training loss at epoch {epoch}")));
            }
            if let Some(m) = opts.matching.as_mut() {
                let alpha = alpha_at(m.schedule, m.alpha_max, step as f64 / total_steps);
                if alpha != 0.0 {
                    let rows: Vec<_> = batch.features().outer_iter().collect();
                    m.term.accumulate(&model, &rows, alpha, &mut grads)?;
                }
            }
            if cfg.weight_decay > 0.0 {
                for (g, layer) in grads.layers.iter_mut().zip(model.layers()) {
                    g.weights.scaled_add(cfg.weight_decay, &layer.weights);
                }
            }
            if !grads.is_finite() {
                return Err(Error::NonFinite(format!("gradient at epoch {epoch}")));
            }
            optimizer.step(&mut model, &grads, cfg.learning_rate);
            if !model.params_finite() {
                return Err(Error::NonFinite(format!("parameters at epoch {epoch}")));
            }
            step += 1;
        }

        if let (Some(val), Some(patience)) = (opts.validation.as_ref(), cfg.early_stop_patience) {
            let val_loss = empirical_loss(&model, val, LossKind::CrossEntropy)?;
            match &best {
                Some((b, _)) if val_loss >= *b => {
                    since_best += 1;
                    if since_best >= patience {
                        break;
                    }
                }
                _ => {
                    best = Some((val_loss, model.clone()));
                    since_best = 0;
                }
            }
        }
    }
    Ok(match best {
        Some((_, m)) => m,
        None => model,
    })
}

fn standard_options(data: &LabeledSet, cfg: &TrainConfig) -> (LabeledSet, FitOptions<'static>) {
    if cfg.early_stop_patience.is_some() {
        let (train, validation) = split_holdout(data);
        (
            train,
            FitOptions {
                validation,
                ..FitOptions::default()
            },
        )
    } else {
        (data.clone(), FitOptions::default())
    }
}

/// `T(D)`: minimise mean cross-entropy from a fresh seeded initialisation.
///
/// With `early_stop_patience` set, every tenth example is held out for
/// validation.
pub fn train_standard(data: &LabeledSet, cfg: &TrainConfig, arch: &ModelSpec) -> Result<Model> {
    let model = arch.init(init_seed(cfg.seed))?;
    let (train, opts) = standard_options(data, cfg);
    fit(model, &train, cfg, opts)
}

/// Adversarial training: each mini-batch is replaced by PGD examples against
/// the current model before the gradient step.
pub fn train_adversarial(data: &LabeledSet, cfg: &TrainConfig, budget: &PerturbationBudget, arch: &ModelSpec) -> Result<Model> {
    budget.validate()?;
    let model = arch.init(init_seed(cfg.seed))?;
    let (train, mut opts) = standard_options(data, cfg);
    opts.adversary = Adversary::PerBatch(*budget);
    fit(model, &train, cfg, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::synth::{blobs_2d, BlobParams};
    use crate::loss::accuracy;

    fn cfg(seed: u64) -> TrainConfig {
        TrainConfig {
            epochs: 60,
            batch_size: 8,
            learning_rate: 0.5,
            seed,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn single_example_is_memorised() {
        let d = LabeledSet::from_rows(&[vec![0.3, -0.4]], vec![1]).unwrap();
        let m = train_standard(&d, &cfg(1), &ModelSpec::linear(2, 2)).unwrap();
        assert_eq!(m.predict(d.row(0)).unwrap(), 1);
    }

    #[test]
    fn deterministic_under_seed() {
        let d = blobs_2d(&BlobParams::separable(40), 5).unwrap();
        let arch = ModelSpec::mlp(2, &[8], 2);
        let a = train_standard(&d, &cfg(3), &arch).unwrap();
        let b = train_standard(&d, &cfg(3), &arch).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, train_standard(&d, &cfg(4), &arch).unwrap());
    }

    #[test]
    fn zero_budget_adversarial_training_is_standard_training() {
        let d = blobs_2d(&BlobParams::separable(40), 6).unwrap();
        let arch = ModelSpec::mlp(2, &[8], 2);
        let budget = PerturbationBudget::new(0.0, 0.01, 5).unwrap().with_random_init(true);
        assert_eq!(
            train_adversarial(&d, &cfg(2), &budget, &arch).unwrap(),
            train_standard(&d, &cfg(2), &arch).unwrap()
        );
    }

    #[test]
    fn empty_data_is_rejected() {
        assert!(matches!(
            train_standard(&LabeledSet::empty(2), &cfg(0), &ModelSpec::linear(2, 2)),
            Err(Error::EmptySet(_))
        ));
    }

    #[test]
    fn divergent_learning_rate_is_reported() {
        let d = LabeledSet::from_rows(&[vec![1e150, -1e150], vec![-1e150, 1e150]], vec![0, 1]).unwrap();
        let c = TrainConfig {
            learning_rate: 1e200,
            ..cfg(0)
        };
        assert!(matches!(
            train_standard(&d, &c, &ModelSpec::linear(2, 2)),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn adam_trains_too() {
        let d = blobs_2d(&BlobParams::separable(40), 8).unwrap();
        let c = TrainConfig {
            optimizer: Optimizer::adam(),
            learning_rate: 0.05,
            ..cfg(1)
        };
        let m = train_standard(&d, &c, &ModelSpec::linear(2, 2)).unwrap();
        assert_eq!(accuracy(&m, &d).unwrap(), 1.0);
    }

    #[test]
    fn early_stopping_holds_out_every_tenth_row() {
        let d = blobs_2d(&BlobParams::separable(40), 9).unwrap();
        let (train, val) = split_holdout(&d);
        assert_eq!(train.len(), 36);
        assert_eq!(val.unwrap().len(), 4);
        let c = TrainConfig {
            early_stop_patience: Some(3),
            ..cfg(1)
        };
        let m = train_standard(&d, &c, &ModelSpec::linear(2, 2)).unwrap();
        assert!(accuracy(&m, &d).unwrap() > 0.9);
    }
}
