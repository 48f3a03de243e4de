//! Signed-gradient PGD against one model or a history of models.

use ndarray::{Array1, Array2, ArrayView1};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::budget::{project_in_place, PerturbationBudget};
use crate::error::{check_dim, Error, Result};
use crate::io::rng::derive_seed;
use crate::loss::LossKind;
use crate::models::Model;
use crate::sets::LabeledSet;

/// How the losses of several models are combined into the PGD objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CompositeLoss {
    /// Cross-entropy of a single model.
    Single,
    /// Mean cross-entropy over the models.
    Avg,
    /// Cross-entropy of the model with the smallest loss at the current point.
    Min,
}

/// `sign` with `sign(0) = 0`.
pub fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn check_models(models: &[Model], objective: CompositeLoss, dim: usize) -> Result<()> {
    if models.is_empty() {
        return Err(Error::EmptyModelList);
    }
    if objective == CompositeLoss::Single && models.len() != 1 {
        return Err(Error::BadParams(format!(
            "single-model objective given {} models",
            models.len()
        )));
    }
    for m in models {
        check_dim(m.input_dim(), dim)?;
    }
    Ok(())
}

fn argmin_loss(models: &[Model], x: ArrayView1<'_, f64>, y: usize) -> Result<(usize, f64)> {
    let mut best = (0, f64::INFINITY);
    for (j, m) in models.iter().enumerate() {
        let l = m.example_loss(x, y, LossKind::CrossEntropy)?;
        if l < best.1 {
            best = (j, l);
        }
    }
    Ok(best)
}

/// Value of the composite cross-entropy at one example.
pub fn composite_loss(models: &[Model], objective: CompositeLoss, x: ArrayView1<'_, f64>, y: usize) -> Result<f64> {
    check_models(models, objective, x.len())?;
    match objective {
        CompositeLoss::Single => models[0].example_loss(x, y, LossKind::CrossEntropy),
        CompositeLoss::Avg => {
            let mut total = 0.0;
            for m in models {
                total += m.example_loss(x, y, LossKind::CrossEntropy)?;
            }
            Ok(total / models.len() as f64)
        }
        CompositeLoss::Min => argmin_loss(models, x, y).map(|(_, l)| l),
    }
}

/// Mean composite loss over a labeled set.
pub fn composite_set_loss(models: &[Model], objective: CompositeLoss, set: &LabeledSet) -> Result<f64> {
    if set.is_empty() {
        return Err(Error::EmptySet("composite loss needs at least one example"));
    }
    let mut total = 0.0;
    for (x, y) in set.iter() {
        total += composite_loss(models, objective, x, y)?;
    }
    Ok(total / set.len() as f64)
}

/// Gradient of the composite loss w.r.t. the input.
pub fn composite_input_grad(
    models: &[Model],
    objective: CompositeLoss,
    x: ArrayView1<'_, f64>,
    y: usize,
) -> Result<Array1<f64>> {
    let grad_of = |m: &Model| -> Result<Array1<f64>> {
        let g = m.loss_gradients(x, y, LossKind::CrossEntropy, true, false)?;
        Ok(g.input_grad.expect("input gradient requested"))
    };
    match objective {
        CompositeLoss::Single => grad_of(&models[0]),
        CompositeLoss::Avg => {
            // Per-model gradients accumulated one model at a time.
            let mut acc = Array1::zeros(x.len());
            for m in models {
                acc += &grad_of(m)?;
            }
            Ok(acc / models.len() as f64)
        }
        CompositeLoss::Min => {
            let (j, _) = argmin_loss(models, x, y)?;
            grad_of(&models[j])
        }
    }
}

/// Gradient-ascent routine for one example: random start (optional), then
/// `steps` signed steps each followed by projection onto the neighborhood of
/// `x0`. `grad` returns the ascent direction at the current point.
pub fn pgd_single<G>(x0: ArrayView1<'_, f64>, budget: &PerturbationBudget, seed: u64, mut grad: G) -> Result<Array1<f64>>
where
    G: FnMut(ArrayView1<'_, f64>) -> Result<Array1<f64>>,
{
    let mut x = x0.to_owned();
    if budget.epsilon == 0.0 {
        return Ok(x);
    }
    if budget.random_init {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let eps = budget.epsilon;
        x.mapv_inplace(|v| v + rng.random_range(-eps..=eps));
        project_in_place(x0, &mut x, budget);
    }
    for _ in 0..budget.steps {
        let g = grad(x.view())?;
        x.zip_mut_with(&g, |xi, &gi| *xi += budget.step_size * sign(gi));
        project_in_place(x0, &mut x, budget);
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("PGD iterate".into()));
    }
    Ok(x)
}

/// Maximize the composite loss over the neighborhood of every row of `v`
/// independently. Labels are copied unchanged.
///
/// Row `i` draws its random start from a substream of `(seed, i)`, so the
/// result does not depend on how rows are scheduled across threads.
pub fn pgd_maximize(
    models: &[Model],
    objective: CompositeLoss,
    v: &LabeledSet,
    budget: &PerturbationBudget,
    seed: u64,
) -> Result<LabeledSet> {
    budget.validate()?;
    check_models(models, objective, v.dim())?;
    let rows: Vec<Array1<f64>> = (0..v.len())
        .into_par_iter()
        .map(|i| {
            let y = v.labels()[i];
            let row_seed = derive_seed(seed, "pgd-row", i as u64);
            pgd_single(v.row(i), budget, row_seed, |x| composite_input_grad(models, objective, x, y))
        })
        .collect::<Result<_>>()?;
    let mut features = Array2::zeros((v.len(), v.dim()));
    for (mut dst, src) in features.outer_iter_mut().zip(&rows) {
        dst.assign(src);
    }
    v.with_features(features)
}

/// PGD against a single source model; its output is meant to be evaluated
/// on a different (adapted) model.
pub fn transfer_attack(source: &Model, v: &LabeledSet, budget: &PerturbationBudget, seed: u64) -> Result<LabeledSet> {
    pgd_maximize(std::slice::from_ref(source), CompositeLoss::Single, v, budget, seed)
}

/// [`pgd_maximize`] with `restarts` independent starts per row; each row keeps
/// the start with the largest composite loss (earliest start on ties). The
/// first start uses `seed` itself, so one restart is plain [`pgd_maximize`].
pub fn pgd_maximize_restarts(
    models: &[Model],
    objective: CompositeLoss,
    v: &LabeledSet,
    budget: &PerturbationBudget,
    seed: u64,
    restarts: usize,
) -> Result<LabeledSet> {
    if restarts == 0 {
        return Err(Error::BadParams("restarts must be >= 1".into()));
    }
    let mut best = pgd_maximize(models, objective, v, budget, seed)?;
    if restarts == 1 {
        return Ok(best);
    }
    let mut best_loss: Vec<f64> = best
        .iter()
        .map(|(x, y)| composite_loss(models, objective, x, y))
        .collect::<Result<_>>()?;
    let mut features = best.features().clone();
    for r in 1..restarts {
        let candidate = pgd_maximize(models, objective, v, budget, derive_seed(seed, "restart", r as u64))?;
        for (i, (x, y)) in candidate.iter().enumerate() {
            let l = composite_loss(models, objective, x, y)?;
            if l > best_loss[i] {
                best_loss[i] = l;
                features.row_mut(i).assign(&x);
            }
        }
    }
    best = v.with_features(features)?;
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::budget::in_neighborhood;

    fn blobs() -> LabeledSet {
        LabeledSet::from_rows(
            &[vec![0.2, 0.3], vec![0.8, 0.7], vec![0.4, 0.1], vec![0.6, 0.9]],
            vec![0, 1, 0, 1],
        )
        .unwrap()
    }

    #[test]
    fn zero_budget_is_identity() {
        let m = Model::binary_linear(&[1.0, 1.0], -1.0).unwrap();
        let b = PerturbationBudget::new(0.0, 0.1, 5).unwrap().with_random_init(true);
        let out = pgd_maximize(&[m], CompositeLoss::Single, &blobs(), &b, 3).unwrap();
        assert_eq!(out, blobs());
    }

    #[test]
    fn linear_closed_form() {
        let theta = [0.7, -1.3];
        let m = Model::binary_linear(&theta, 0.1).unwrap();
        let b = PerturbationBudget::new(0.05, 0.02, 10).unwrap();
        let v = blobs();
        let out = pgd_maximize(&[m], CompositeLoss::Single, &v, &b, 0).unwrap();
        for ((x, y), (xa, _)) in v.iter().zip(out.iter()) {
            let ys = if y == 1 { 1.0 } else { -1.0 };
            for j in 0..2 {
                let expected = x[j] - 0.05 * ys * sign(theta[j]);
                assert!((xa[j] - expected).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn duplicated_model_avg_matches_single() {
        let m = crate::models::ModelSpec::mlp(2, &[6], 2).init(5).unwrap();
        let b = PerturbationBudget::new(0.1, 0.02, 8).unwrap().with_random_init(true);
        let single = pgd_maximize(std::slice::from_ref(&m), CompositeLoss::Single, &blobs(), &b, 9).unwrap();
        let avg = pgd_maximize(&[m.clone(), m], CompositeLoss::Avg, &blobs(), &b, 9).unwrap();
        assert_eq!(single, avg);
    }

    #[test]
    fn output_stays_in_neighborhood_and_keeps_labels() {
        let models: Vec<Model> = (0..3)
            .map(|s| crate::models::ModelSpec::mlp(2, &[4], 2).init(s).unwrap())
            .collect();
        let b = PerturbationBudget::new(0.15, 0.05, 7).unwrap().with_random_init(true).with_unit_box(true);
        for obj in [CompositeLoss::Avg, CompositeLoss::Min] {
            let out = pgd_maximize(&models, obj, &blobs(), &b, 1).unwrap();
            assert_eq!(out.labels(), blobs().labels());
            for i in 0..out.len() {
                assert!(in_neighborhood(blobs().row(i), out.row(i), &b).unwrap());
            }
        }
    }

    #[test]
    fn error_paths() {
        let b = PerturbationBudget::new(0.1, 0.1, 1).unwrap();
        assert!(matches!(
            pgd_maximize(&[], CompositeLoss::Avg, &blobs(), &b, 0),
            Err(Error::EmptyModelList)
        ));
        let wrong = Model::binary_linear(&[1.0, 1.0, 1.0], 0.0).unwrap();
        assert!(matches!(
            pgd_maximize(&[wrong], CompositeLoss::Single, &blobs(), &b, 0),
            Err(Error::DimMismatch { .. })
        ));
    }

    #[test]
    fn sign_of_zero() {
        assert_eq!(sign(0.0), 0.0);
        assert_eq!(sign(-0.0), 0.0);
        assert_eq!(sign(-2.0), -1.0);
    }
}
