//! L∞ perturbation neighborhoods.
//!
//! The neighborhood of `x_ref` is the closed box `[x_ref - ε, x_ref + ε]`,
//! optionally intersected with the unit box `[0, 1]^d`.

use ndarray::{Array1, ArrayView1, Zip};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

/// Absolute slack used by membership tests to absorb round-off.
pub const NEIGHBORHOOD_SLACK: f64 = 1e-9;

/// Default PGD step count when a configuration leaves it out.
pub const DEFAULT_STEPS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawBudget")]
pub struct PerturbationBudget {
    pub epsilon: f64,
    pub step_size: f64,
    pub steps: usize,
    pub random_init: bool,
    pub clip_unit_box: bool,
}

impl PerturbationBudget {
    pub fn new(epsilon: f64, step_size: f64, steps: usize) -> Result<Self> {
        let budget = Self {
            epsilon,
            step_size,
            steps,
            random_init: false,
            clip_unit_box: false,
        };
        budget.validate()?;
        Ok(budget)
    }

    /// The empty budget: the neighborhood is the point itself.
    pub fn none() -> Self {
        Self {
            epsilon: 0.0,
            step_size: 1.0,
            steps: 1,
            random_init: false,
            clip_unit_box: false,
        }
    }

    pub fn with_random_init(mut self, on: bool) -> Self {
        self.random_init = on;
        self
    }

    pub fn with_unit_box(mut self, on: bool) -> Self {
        self.clip_unit_box = on;
        self
    }

    pub fn with_steps(mut self, steps: usize) -> Self {
        self.steps = steps;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !self.epsilon.is_finite() || self.epsilon < 0.0 {
            return Err(Error::BadParams(format!("epsilon must be finite and >= 0, got {}", self.epsilon)));
        }
        if !self.step_size.is_finite() || self.step_size <= 0.0 {
            return Err(Error::BadParams(format!("step_size must be finite and > 0, got {}", self.step_size)));
        }
        if self.steps == 0 {
            return Err(Error::BadParams("steps must be >= 1".into()));
        }
        Ok(())
    }
}

/// On-disk form: `steps` defaults to [`DEFAULT_STEPS`] and `step_size` to
/// `2.5 ε / steps`.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBudget {
    epsilon: f64,
    step_size: Option<f64>,
    steps: Option<usize>,
    #[serde(default)]
    random_init: bool,
    #[serde(default)]
    clip_unit_box: bool,
}

impl TryFrom<RawBudget> for PerturbationBudget {
    type Error = Error;

    fn try_from(raw: RawBudget) -> Result<Self> {
        let steps = raw.steps.unwrap_or(DEFAULT_STEPS);
        let default_step = if raw.epsilon > 0.0 && steps > 0 {
            2.5 * raw.epsilon / steps as f64
        } else {
            1.0
        };
        let budget = Self {
            epsilon: raw.epsilon,
            step_size: raw.step_size.unwrap_or(default_step),
            steps,
            random_init: raw.random_init,
            clip_unit_box: raw.clip_unit_box,
        };
        budget.validate()?;
        Ok(budget)
    }
}

/// Clamp `x` into the neighborhood of `x_ref`: first the ε-box, then the unit
/// box when the budget asks for it.
pub fn project_to_ball(x_ref: ArrayView1<'_, f64>, x: ArrayView1<'_, f64>, budget: &PerturbationBudget) -> Result<Array1<f64>> {
    check_dim(x_ref.len(), x.len())?;
    let mut out = x.to_owned();
    project_in_place(x_ref, &mut out, budget);
    Ok(out)
}

pub(crate) fn project_in_place(x_ref: ArrayView1<'_, f64>, x: &mut Array1<f64>, budget: &PerturbationBudget) {
    let eps = budget.epsilon;
    Zip::from(x).and(&x_ref).for_each(|xi, &ri| {
        let mut v = xi.clamp(ri - eps, ri + eps);
        if budget.clip_unit_box {
            v = v.clamp(0.0, 1.0);
        }
        *xi = v;
    });
}

/// Closed-ball membership with [`NEIGHBORHOOD_SLACK`].
pub fn in_neighborhood(x_ref: ArrayView1<'_, f64>, x: ArrayView1<'_, f64>, budget: &PerturbationBudget) -> Result<bool> {
    check_dim(x_ref.len(), x.len())?;
    let eps = budget.epsilon + NEIGHBORHOOD_SLACK;
    let inside = x.iter().zip(x_ref.iter()).all(|(&xi, &ri)| {
        let in_ball = (xi - ri).abs() <= eps;
        let in_box = !budget.clip_unit_box || (-NEIGHBORHOOD_SLACK..=1.0 + NEIGHBORHOOD_SLACK).contains(&xi);
        in_ball && in_box
    });
    Ok(inside)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    fn budget(eps: f64) -> PerturbationBudget {
        PerturbationBudget::new(eps, 0.01, 10).unwrap()
    }

    #[test]
    fn fixed_point() {
        let x = array![0.3, -1.0, 2.5];
        assert_eq!(project_to_ball(x.view(), x.view(), &budget(0.7)).unwrap(), x);
    }

    #[test]
    fn single_coordinate_clamp() {
        let out = project_to_ball(array![0.5].view(), array![0.9].view(), &budget(0.1)).unwrap();
        assert_eq!(out, array![0.6]);
    }

    #[test]
    fn ball_then_unit_box() {
        let b = budget(0.1).with_unit_box(true);
        let out = project_to_ball(array![0.05].view(), array![-0.2].view(), &b).unwrap();
        assert_eq!(out, array![0.0]);
        // The two interval projections commute here: [0,1] first then the ball.
        let boxed: f64 = (-0.2f64).clamp(0.0, 1.0);
        assert_eq!(boxed.clamp(0.05 - 0.1, 0.05 + 0.1), 0.0);
    }

    #[test]
    fn dim_mismatch() {
        assert!(matches!(
            project_to_ball(array![0.0].view(), array![0.0, 1.0].view(), &budget(0.1)),
            Err(Error::DimMismatch { .. })
        ));
        assert!(in_neighborhood(array![0.0].view(), array![0.0, 1.0].view(), &budget(0.1)).is_err());
    }

    #[test]
    fn membership_edge_cases() {
        let r = array![0.2, 0.4];
        assert!(in_neighborhood(r.view(), r.view(), &budget(0.0)).unwrap());
        assert!(in_neighborhood(r.view(), array![0.3, 0.4].view(), &budget(0.1)).unwrap());
        assert!(!in_neighborhood(r.view(), array![0.2 + 0.101, 0.4].view(), &budget(0.1)).unwrap());
    }

    #[test]
    fn invalid_budget() {
        assert!(PerturbationBudget::new(-0.1, 0.1, 1).is_err());
        assert!(PerturbationBudget::new(0.1, 0.0, 1).is_err());
        assert!(PerturbationBudget::new(0.1, 0.1, 0).is_err());
        assert!(PerturbationBudget::new(f64::NAN, 0.1, 1).is_err());
    }

    proptest! {
        #[test]
        fn projection_lands_inside_and_is_idempotent(
            pts in proptest::collection::vec((-2.0f64..2.0, -3.0f64..3.0), 1..8),
            eps in 0.0f64..1.5,
            clip in any::<bool>(),
        ) {
            let x_ref: Array1<f64> = pts.iter().map(|p| if clip { p.0.clamp(0.0, 1.0) } else { p.0 }).collect();
            let x: Array1<f64> = pts.iter().map(|p| p.1).collect();
            let b = budget(eps).with_unit_box(clip);
            let once = project_to_ball(x_ref.view(), x.view(), &b).unwrap();
            prop_assert!(in_neighborhood(x_ref.view(), once.view(), &b).unwrap());
            let twice = project_to_ball(x_ref.view(), once.view(), &b).unwrap();
            prop_assert_eq!(once, twice);
        }
    }
}
