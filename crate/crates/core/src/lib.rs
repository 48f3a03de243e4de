//! Adversarial robustness in the transductive setting.
//!
//! A defender may adapt its model to the unlabeled test batch it is asked to
//! classify; an attacker who knows the adaptation procedure can attack the
//! whole space of models it could produce. This crate provides the pieces to
//! play that game end to end:
//!
//! - [`models`]: small linear/MLP classifiers with analytic gradients;
//! - [`learners`]: standard and adversarial training, and the adaptors
//!   (feature-matching retraining, ATRM, RMC);
//! - [`attacks`]: L∞ PGD and the transductive attacks FPA and GMSA;
//! - [`game`]: the referee running transductive and inductive games;
//! - [`gaussian_sep`]: the two-Gaussian transductive/inductive separation;
//! - [`rejectron`]: discriminator-based rejection and its error/rejection pair;
//! - [`io`]: RNG streams, datasets, configuration and result files.

pub mod attacks;
pub mod budget;
pub mod error;
pub mod game;
pub mod gaussian_sep;
pub mod io;
pub mod learners;
pub mod loss;
pub mod models;
pub mod rejectron;
pub mod sets;

pub use budget::{in_neighborhood, project_to_ball, PerturbationBudget};
pub use error::{Error, Result};
pub use loss::{accuracy, empirical_loss, LossKind};
pub use models::{Model, ModelKind, ModelSpec};
pub use sets::{project_features, LabeledSet, UnlabeledSet};
