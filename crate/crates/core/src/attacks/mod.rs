//! The attacker: PGD and the transductive attacks FPA and GMSA.
//!
//! Both transductive attacks simulate the defender's adaptor with the
//! attacker's own seed: the attacker knows the adaptor but not the
//! defender's private randomness. Every iteration runs PGD with the same
//! seed, so a longer run reproduces a shorter one as its prefix.

mod pgd;

use serde::{Deserialize, Serialize};

use crate::budget::PerturbationBudget;
use crate::error::{Error, Result};
use crate::io::rng::derive_seed;
use crate::learners::Adaptor;
use crate::loss::{empirical_loss, LossKind};
use crate::models::Model;
use crate::sets::{project_features, LabeledSet};

pub use pgd::{
    composite_input_grad, composite_loss, composite_set_loss, pgd_maximize, pgd_maximize_restarts, pgd_single, sign,
    transfer_attack, CompositeLoss,
};

/// Default number of FPA/GMSA iterations after the first (`T`).
pub const DEFAULT_ITERATIONS: usize = 9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GmsaMode {
    Avg,
    Min,
}

impl From<GmsaMode> for CompositeLoss {
    fn from(m: GmsaMode) -> Self {
        match m {
            GmsaMode::Avg => CompositeLoss::Avg,
            GmsaMode::Min => CompositeLoss::Min,
        }
    }
}

/// State of an FPA/GMSA run: `models[0]` is `F0`, `models[i + 1]` the
/// adaptor's answer to `attack_sets[i]`, and `valuations[i]` the zero-one
/// loss of `models[i + 1]` on `attack_sets[i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackHistory {
    pub models: Vec<Model>,
    pub attack_sets: Vec<LabeledSet>,
    pub valuations: Vec<f64>,
    pub selected: usize,
}

impl AttackHistory {
    pub fn selected_set(&self) -> &LabeledSet {
        &self.attack_sets[self.selected]
    }

    pub fn selected_valuation(&self) -> f64 {
        self.valuations[self.selected]
    }
}

/// Smallest index attaining the maximum valuation.
pub fn select_best(valuations: &[f64]) -> Result<usize> {
    if valuations.is_empty() {
        return Err(Error::EmptyHistory);
    }
    let mut best = 0;
    for (i, &v) in valuations.iter().enumerate() {
        if v > valuations[best] {
            best = i;
        }
    }
    Ok(best)
}

/// Seed used for the attacker's simulation of the adaptor at iteration `i`.
pub fn simulation_seed(seed: u64, i: usize) -> u64 {
    derive_seed(seed, "gamma", i as u64)
}

struct Run<'a> {
    gamma: &'a dyn Adaptor,
    d: &'a LabeledSet,
    seed: u64,
    history: AttackHistory,
}

impl<'a> Run<'a> {
    fn new(gamma: &'a dyn Adaptor, d: &'a LabeledSet, f0: &Model, seed: u64) -> Self {
        Self {
            gamma,
            d,
            seed,
            history: AttackHistory {
                models: vec![f0.clone()],
                attack_sets: Vec::new(),
                valuations: Vec::new(),
                selected: 0,
            },
        }
    }

    fn record(&mut self, attack: LabeledSet) -> Result<()> {
        let i = self.history.attack_sets.len();
        let f0 = &self.history.models[0];
        let adapted = self
            .gamma
            .adapt(f0, self.d, &project_features(&attack), simulation_seed(self.seed, i))?;
        self.history.valuations.push(empirical_loss(&adapted, &attack, LossKind::ZeroOne)?);
        self.history.models.push(adapted);
        self.history.attack_sets.push(attack);
        Ok(())
    }

    fn finish(mut self) -> Result<AttackHistory> {
        self.history.selected = select_best(&self.history.valuations)?;
        Ok(self.history)
    }
}

fn check_adaptor(gamma: &dyn Adaptor) -> Result<()> {
    if gamma.requires_test_labels() {
        return Err(Error::ProtocolViolation(format!(
            "adaptor '{}' asks for test labels",
            gamma.name()
        )));
    }
    Ok(())
}

/// Fixed point attack: iteration `i` attacks the model adapted at `i − 1`.
pub fn fpa(
    gamma: &dyn Adaptor,
    d: &LabeledSet,
    v: &LabeledSet,
    f0: &Model,
    iterations: usize,
    budget: &PerturbationBudget,
    seed: u64,
) -> Result<AttackHistory> {
    check_adaptor(gamma)?;
    let mut run = Run::new(gamma, d, f0, seed);
    for i in 0..=iterations {
        let target = std::slice::from_ref(&run.history.models[i]);
        let attack = pgd_maximize(target, CompositeLoss::Single, v, budget, seed)?;
        run.record(attack)?;
    }
    run.finish()
}

/// Greedy model space attack: iteration `i` attacks all of `F0 … F(i)`
/// through the mode's composite loss. In `Min` mode the PGD step count at
/// iteration `i` is multiplied by `i + 1`.
#[allow(clippy::too_many_arguments)]
pub fn gmsa(
    gamma: &dyn Adaptor,
    d: &LabeledSet,
    v: &LabeledSet,
    f0: &Model,
    iterations: usize,
    mode: GmsaMode,
    budget: &PerturbationBudget,
    seed: u64,
) -> Result<AttackHistory> {
    check_adaptor(gamma)?;
    let mut run = Run::new(gamma, d, f0, seed);
    for i in 0..=iterations {
        let step_budget = match mode {
            GmsaMode::Avg => *budget,
            GmsaMode::Min => budget.with_steps(budget.steps * (i + 1)),
        };
        let attack = pgd_maximize(&run.history.models[..=i], mode.into(), v, &step_budget, seed)?;
        run.record(attack)?;
    }
    run.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::budget::in_neighborhood;
    use crate::learners::Identity;

    fn instance() -> (LabeledSet, LabeledSet, Model, PerturbationBudget) {
        let d = LabeledSet::from_rows(&[vec![-1.0, 0.2], vec![1.0, -0.1]], vec![0, 1]).unwrap();
        let v = LabeledSet::from_rows(&[vec![0.3, 0.1], vec![-0.2, 0.4], vec![0.05, -0.3]], vec![1, 0, 1]).unwrap();
        let f0 = Model::binary_linear(&[1.0, 0.5], 0.0).unwrap();
        let b = PerturbationBudget::new(0.25, 0.05, 10).unwrap().with_random_init(true);
        (d, v, f0, b)
    }

    #[test]
    fn select_best_examples() {
        assert_eq!(select_best(&[0.2, 0.9, 0.9]).unwrap(), 1);
        assert_eq!(select_best(&[0.4]).unwrap(), 0);
        assert_eq!(select_best(&[0.3, 0.3, 0.3]).unwrap(), 0);
        assert!(matches!(select_best(&[]), Err(Error::EmptyHistory)));
    }

    #[test]
    fn fpa_zero_iterations_is_one_pgd() {
        let (d, v, f0, b) = instance();
        let h = fpa(&Identity, &d, &v, &f0, 0, &b, 11).unwrap();
        assert_eq!(h.valuations.len(), 1);
        assert_eq!(h.models.len(), 2);
        assert_eq!(h.attack_sets[0], transfer_attack(&f0, &v, &b, 11).unwrap());
    }

    #[test]
    fn first_iterations_coincide() {
        let (d, v, f0, b) = instance();
        let f = fpa(&Identity, &d, &v, &f0, 2, &b, 5).unwrap();
        for mode in [GmsaMode::Avg, GmsaMode::Min] {
            let g = gmsa(&Identity, &d, &v, &f0, 2, mode, &b, 5).unwrap();
            assert_eq!(g.attack_sets[0], f.attack_sets[0]);
            assert_eq!(g.valuations[0], f.valuations[0]);
        }
    }

    #[test]
    fn history_shape_and_feasibility() {
        let (d, v, f0, b) = instance();
        let h = gmsa(&Identity, &d, &v, &f0, 3, GmsaMode::Min, &b, 2).unwrap();
        assert_eq!(h.models.len(), h.attack_sets.len() + 1);
        assert_eq!(h.valuations.len(), 4);
        for set in &h.attack_sets {
            assert_eq!(set.labels(), v.labels());
            for i in 0..v.len() {
                assert!(in_neighborhood(v.row(i), set.row(i), &b).unwrap());
            }
        }
    }

    #[test]
    fn longer_runs_extend_shorter_ones() {
        let (d, v, f0, b) = instance();
        let short = gmsa(&Identity, &d, &v, &f0, 1, GmsaMode::Avg, &b, 3).unwrap();
        let long = gmsa(&Identity, &d, &v, &f0, 2, GmsaMode::Avg, &b, 3).unwrap();
        assert_eq!(&long.attack_sets[..2], &short.attack_sets[..]);
        assert!(long.selected_valuation() >= short.selected_valuation());
    }

    #[test]
    fn history_serializes() {
        let (d, v, f0, b) = instance();
        let h = fpa(&Identity, &d, &v, &f0, 1, &b, 1).unwrap();
        let text = serde_json::to_string(&h).unwrap();
        assert_eq!(serde_json::from_str::<AttackHistory>(&text).unwrap(), h);
    }
}
