//! Loss kinds and the empirical loss `L(F, V)`.

use ndarray::{Array1, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::models::Model;
use crate::sets::LabeledSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossKind {
    ZeroOne,
    CrossEntropy,
}

/// Softmax cross-entropy and its gradient w.r.t. the logits, computed with
/// max subtraction.
pub fn cross_entropy_from_logits(logits: ArrayView1<'_, f64>, y: usize) -> (f64, Array1<f64>) {
    let max = logits.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    let exps = logits.mapv(|z| (z - max).exp());
    let sum: f64 = exps.sum();
    let loss = max + sum.ln() - logits[y];
    let mut grad = exps / sum;
    grad[y] -= 1.0;
    (loss, grad)
}

/// Mean per-example loss of `model` on `set`. For [`LossKind::ZeroOne`]
/// this is exactly `misclassified / |set|`.
pub fn empirical_loss(model: &Model, set: &LabeledSet, kind: LossKind) -> Result<f64> {
    if set.is_empty() {
        return Err(Error::EmptySet("empirical loss needs at least one example"));
    }
    check_dim(model.input_dim(), set.dim())?;
    match kind {
        LossKind::ZeroOne => Ok(misclassified(model, set)? as f64 / set.len() as f64),
        LossKind::CrossEntropy => {
            let mut total = 0.0;
            for (x, y) in set.iter() {
                total += model.example_loss(x, y, kind)?;
            }
            Ok(total / set.len() as f64)
        }
    }
}

/// Number of rows whose argmax prediction differs from the label.
pub fn misclassified(model: &Model, set: &LabeledSet) -> Result<usize> {
    let mut wrong = 0;
    for (x, y) in set.iter() {
        if model.predict(x)? != y {
            wrong += 1;
        }
    }
    Ok(wrong)
}

pub fn accuracy(model: &Model, set: &LabeledSet) -> Result<f64> {
    empirical_loss(model, set, LossKind::ZeroOne).map(|l| 1.0 - l)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use ndarray::array;

    fn sign_model() -> Model {
        Model::binary_linear(&[1.0], 0.0).unwrap()
    }

    #[test]
    fn perfect_model_has_zero_loss() {
        let v = LabeledSet::from_rows(&[vec![-1.0], vec![2.0], vec![0.5]], vec![0, 1, 1]).unwrap();
        assert_eq!(empirical_loss(&sign_model(), &v, LossKind::ZeroOne).unwrap(), 0.0);
    }

    #[test]
    fn half_of_ten_wrong() {
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![if i % 2 == 0 { 1.0 } else { -1.0 }]).collect();
        let v = LabeledSet::new(
            ndarray::Array2::from_shape_vec((10, 1), rows.concat()).unwrap(),
            vec![1; 10],
        )
        .unwrap();
        assert_eq!(empirical_loss(&sign_model(), &v, LossKind::ZeroOne).unwrap(), 0.5);
    }

    #[test]
    fn cross_entropy_at_zero_logit_is_ln2() {
        let m = Model::binary_linear(&[1.0, 0.0], 0.0).unwrap();
        for y in [0, 1] {
            let v = LabeledSet::from_rows(&[vec![0.0, 0.0]], vec![y]).unwrap();
            assert_relative_eq!(
                empirical_loss(&m, &v, LossKind::CrossEntropy).unwrap(),
                std::f64::consts::LN_2,
                epsilon = 1e-15
            );
        }
    }

    #[test]
    fn empty_set_is_an_error() {
        assert!(matches!(
            empirical_loss(&sign_model(), &LabeledSet::empty(1), LossKind::ZeroOne),
            Err(Error::EmptySet(_))
        ));
    }

    #[test]
    fn stable_for_huge_logits() {
        let (loss, grad) = cross_entropy_from_logits(array![1000.0, -1000.0].view(), 1);
        assert_relative_eq!(loss, 2000.0);
        assert!(grad.iter().all(|g| g.is_finite()));
    }
}
