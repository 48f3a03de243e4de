//! Selective classification with a learned rejector.
//!
//! A discriminator `h` is trained to tell training inputs (label 0) from the
//! test batch `x̃` (label 1); a point is accepted when `h`'s class-1
//! probability is at most a threshold. The defense is scored by the pair
//! `(err, rej)`: the error of `F` on the accepted adversarial points and the
//! fraction of clean test points rejected.

use ndarray::{Array1, ArrayView1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attacks::{pgd_maximize, pgd_single, CompositeLoss};
use crate::budget::PerturbationBudget;
use crate::error::{Error, Result};
use crate::game::{Seeds, TrainerSpec};
use crate::io::rng::derive_seed;
use crate::io::synth::{blobs_2d, BlobParams};
use crate::learners::{train_standard, TrainConfig};
use crate::loss::LossKind;
use crate::models::{Model, ModelSpec};
use crate::sets::{LabeledSet, UnlabeledSet};

/// `P(class 1 | x)` under the discriminator.
pub fn score(h: &Model, x: ArrayView1<'_, f64>) -> Result<f64> {
    Ok((-h.example_loss(x, 1, LossKind::CrossEntropy)?).exp())
}

pub fn scores(h: &Model, set: &UnlabeledSet) -> Result<Vec<f64>> {
    (0..set.len()).into_par_iter().map(|i| score(h, set.row(i))).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcceptanceSet {
    pub scores: Vec<f64>,
    pub threshold: f64,
    /// `true` where `score ≤ threshold`.
    pub mask: Vec<bool>,
}

impl AcceptanceSet {
    pub fn new(scores: Vec<f64>, threshold: f64) -> Self {
        let mask = scores.iter().map(|&s| s <= threshold).collect();
        Self { scores, threshold, mask }
    }

    pub fn accepted(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    pub fn rejected(&self) -> usize {
        self.mask.len() - self.accepted()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairValuation {
    /// Misclassified fraction of the accepted adversarial points; `None` when
    /// nothing was accepted.
    pub err: Option<f64>,
    /// Rejected fraction of the clean points.
    pub rej: f64,
    /// Accepted-and-misclassified adversarial points over all adversarial points.
    pub err_over_all: f64,
    pub accepted_errors: usize,
    pub accepted: usize,
    pub n_prime: usize,
    pub rejected_clean: usize,
    pub n_clean: usize,
}

/// Train `h` to separate `d_train` (label 0) from `x_tilde` (label 1).
pub fn train_discriminator(d_train: &UnlabeledSet, x_tilde: &UnlabeledSet, cfg: &TrainConfig, arch: &ModelSpec) -> Result<Model> {
    if d_train.is_empty() || x_tilde.is_empty() {
        return Err(Error::EmptySet("discriminator needs both samples"));
    }
    let zeros = d_train.with_labels(vec![0; d_train.len()])?;
    let ones = x_tilde.with_labels(vec![1; x_tilde.len()])?;
    train_standard(&zeros.concat(&ones)?, cfg, arch)
}

fn valuation_from_scores(
    clean_scores: &[f64],
    prime_scores: &[f64],
    prime_wrong: &[bool],
    threshold: f64,
) -> PairValuation {
    let clean = AcceptanceSet::new(clean_scores.to_vec(), threshold);
    let prime = AcceptanceSet::new(prime_scores.to_vec(), threshold);
    let accepted = prime.accepted();
    let accepted_errors = prime.mask.iter().zip(prime_wrong).filter(|(&a, &w)| a && w).count();
    let n_prime = prime_scores.len();
    PairValuation {
        err: (accepted > 0).then(|| accepted_errors as f64 / accepted as f64),
        rej: clean.rejected() as f64 / clean_scores.len() as f64,
        err_over_all: accepted_errors as f64 / n_prime as f64,
        accepted_errors,
        accepted,
        n_prime,
        rejected_clean: clean.rejected(),
        n_clean: clean_scores.len(),
    }
}

struct Scored {
    clean: Vec<f64>,
    prime: Vec<f64>,
    wrong: Vec<bool>,
}

fn score_all(f: &Model, h: &Model, u_clean: &LabeledSet, u_prime: &LabeledSet) -> Result<Scored> {
    if u_clean.is_empty() {
        return Err(Error::EmptySet("clean set U"));
    }
    if u_prime.is_empty() {
        return Err(Error::EmptySet("adversarial set U'"));
    }
    let clean = scores(h, &crate::sets::project_features(u_clean))?;
    let prime = scores(h, &crate::sets::project_features(u_prime))?;
    let wrong = u_prime
        .iter()
        .map(|(x, y)| Ok(f.predict(x)? != y))
        .collect::<Result<_>>()?;
    Ok(Scored { clean, prime, wrong })
}

/// `(err, rej)` of `F` restricted to `{x : score_h(x) ≤ threshold}`.
pub fn pair_valuation(f: &Model, h: &Model, threshold: f64, u_clean: &LabeledSet, u_prime: &LabeledSet) -> Result<PairValuation> {
    let s = score_all(f, h, u_clean, u_prime)?;
    Ok(valuation_from_scores(&s.clean, &s.prime, &s.wrong, threshold))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub threshold: f64,
    pub valuation: PairValuation,
}

/// [`pair_valuation`] at each of the ascending `thresholds`.
pub fn sweep_thresholds(
    f: &Model,
    h: &Model,
    u_clean: &LabeledSet,
    u_prime: &LabeledSet,
    thresholds: &[f64],
) -> Result<Vec<CurvePoint>> {
    if thresholds.is_empty() {
        return Err(Error::BadParams("no thresholds to sweep".into()));
    }
    if thresholds.windows(2).any(|w| !(w[0] <= w[1])) {
        return Err(Error::BadParams("thresholds must be sorted ascending".into()));
    }
    let s = score_all(f, h, u_clean, u_prime)?;
    Ok(thresholds
        .iter()
        .map(|&threshold| CurvePoint {
            threshold,
            valuation: valuation_from_scores(&s.clean, &s.prime, &s.wrong, threshold),
        })
        .collect())
}

/// `n` evenly spaced thresholds on `[0, 1]`.
pub fn linear_thresholds(n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..n).map(|i| i as f64 / (n - 1) as f64).collect(),
    }
}

/// Every distinct acceptance set: `−∞` plus each observed score. Scanning
/// these thresholds is exhaustive.
pub fn exhaustive_thresholds(h: &Model, u_clean: &LabeledSet, u_prime: &LabeledSet) -> Result<Vec<f64>> {
    let mut t = scores(h, &crate::sets::project_features(u_clean))?;
    t.extend(scores(h, &crate::sets::project_features(u_prime))?);
    t.push(f64::NEG_INFINITY);
    t.sort_by(f64::total_cmp);
    t.dedup();
    Ok(t)
}

/// CSV with columns `threshold,rej,err,err_defined`; undefined `err` is written as empty.
pub fn curve_csv(points: &[CurvePoint]) -> String {
    let mut out = String::from("threshold,rej,err,err_defined\n");
    for p in points {
        let err = p.valuation.err.map_or_else(String::new, |e| e.to_string());
        out.push_str(&format!(
            "{},{},{},{}\n",
            p.threshold,
            p.valuation.rej,
            err,
            u8::from(p.valuation.err.is_some())
        ));
    }
    out
}

/// Whether some point on the curve has `rej ≤ max_rej` and a defined `err ≤ max_err`.
pub fn admits(points: &[CurvePoint], max_rej: f64, max_err: f64) -> bool {
    points
        .iter()
        .any(|p| p.valuation.rej <= max_rej && p.valuation.err.is_some_and(|e| e <= max_err))
}

/// Constant shift of every feature (a stand-in for a brightness corruption),
/// clamped to `[0, 1]` for unit-box data.
pub fn brightness_shift(set: &LabeledSet, delta: f64) -> Result<LabeledSet> {
    let mut features = set.features() + delta;
    if set.is_unit_box() {
        features.mapv_inplace(|v| v.clamp(0.0, 1.0));
    }
    set.with_features(features)
}

/// PGD on `CE(F, x, y) − λ·mean_j score_{h_j}(x)`: misclassified by `F` while
/// looking clean to every discriminator in `hs`.
pub fn mimic_attack(f: &Model, hs: &[Model], v: &LabeledSet, budget: &PerturbationBudget, lambda: f64, seed: u64) -> Result<LabeledSet> {
    budget.validate()?;
    if hs.is_empty() {
        return Err(Error::EmptyModelList);
    }
    let weight = lambda / hs.len() as f64;
    let rows: Vec<Array1<f64>> = (0..v.len())
        .into_par_iter()
        .map(|i| {
            let y = v.labels()[i];
            pgd_single(v.row(i), budget, derive_seed(seed, "pgd-row", i as u64), |x| {
                let gf = f.loss_gradients(x, y, LossKind::CrossEntropy, true, false)?;
                let mut g = gf.input_grad.expect("input gradient requested");
                for h in hs {
                    // ∇ score = −score · ∇ CE(h, x, 1)
                    let gh = h.loss_gradients(x, 1, LossKind::CrossEntropy, true, false)?;
                    let s = (-gh.loss).exp();
                    g.scaled_add(weight * s, &gh.input_grad.expect("input gradient requested"));
                }
                Ok(g)
            })
        })
        .collect::<Result<_>>()?;
    let mut features = v.features().clone();
    for (mut dst, src) in features.outer_iter_mut().zip(&rows) {
        dst.assign(src);
    }
    v.with_features(features)
}

/// A desk-scale reproduction of the rejection failure modes: two class
/// clouds, a plain PGD attack, a benign shift and a mimic attack.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RejectronScenario {
    pub blobs: BlobParams,
    pub n_train: usize,
    /// Size of each half of `x̃`: the clean part `z` and the shifted or
    /// attacked part. Errors are counted over all of `x̃`, rejections over `z`.
    pub n_test: usize,
    pub classifier: TrainerSpec,
    pub discriminator: TrainerSpec,
    pub budget: PerturbationBudget,
    #[serde(default = "default_lambda")]
    pub mimic_lambda: f64,
    /// Rounds in which the mimic attacker retrains its own copy of the
    /// rejector on its latest points and attacks all copies so far.
    #[serde(default = "default_mimic_rounds")]
    pub mimic_rounds: usize,
    #[serde(default = "default_shift")]
    pub shift: f64,
    #[serde(default = "default_curve_points")]
    pub curve_points: usize,
}

fn default_lambda() -> f64 {
    1.0
}

fn default_mimic_rounds() -> usize {
    4
}

fn default_shift() -> f64 {
    0.1
}

fn default_curve_points() -> usize {
    101
}

impl RejectronScenario {
    pub fn desk() -> Self {
        Self {
            blobs: BlobParams {
                n: 0,
                centers: vec![vec![0.3, 0.5], vec![0.7, 0.5]],
                sigma: 0.04,
                clip_unit_box: true,
            },
            n_train: 400,
            n_test: 200,
            classifier: TrainerSpec {
                hidden: vec![],
                train: TrainConfig {
                    epochs: 30,
                    batch_size: 32,
                    learning_rate: 0.5,
                    ..TrainConfig::default()
                },
                adversarial: None,
            },
            discriminator: TrainerSpec {
                hidden: vec![32, 32],
                train: TrainConfig {
                    epochs: 150,
                    batch_size: 32,
                    learning_rate: 0.01,
                    optimizer: crate::learners::Optimizer::adam(),
                    ..TrainConfig::default()
                },
                adversarial: None,
            },
            budget: PerturbationBudget::new(0.4, 0.05, 20).expect("valid").with_random_init(true).with_unit_box(true),
            mimic_lambda: 1.0,
            mimic_rounds: 4,
            shift: 0.1,
            curve_points: 101,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Case {
    pub name: String,
    pub u_clean: LabeledSet,
    pub u_prime: LabeledSet,
    pub discriminator: Model,
    /// Sweep over evenly spaced thresholds (for plotting).
    pub curve: Vec<CurvePoint>,
    /// Sweep over every distinct acceptance set.
    pub exhaustive: Vec<CurvePoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RejectronReport {
    pub classifier: Model,
    pub adversarial: Case,
    pub benign: Case,
    pub mimic: Case,
}

impl RejectronScenario {
    fn case(&self, name: &str, f: &Model, d: &LabeledSet, z: &LabeledSet, other: LabeledSet, seed: u64) -> Result<Case> {
        let mixed = z.concat(&other)?;
        let x_tilde = crate::sets::project_features(&mixed);
        let arch = self.discriminator.arch(d.dim(), 2);
        let h = train_discriminator(
            &crate::sets::project_features(d),
            &x_tilde,
            &self.discriminator.train.with_seed(seed),
            &arch,
        )?;
        let curve = sweep_thresholds(f, &h, z, &mixed, &linear_thresholds(self.curve_points))?;
        let exhaustive = sweep_thresholds(f, &h, z, &mixed, &exhaustive_thresholds(&h, z, &mixed)?)?;
        Ok(Case {
            name: name.into(),
            u_clean: z.clone(),
            u_prime: mixed,
            discriminator: h,
            curve,
            exhaustive,
        })
    }

    pub fn run(&self, seeds: Seeds) -> Result<RejectronReport> {
        let sample = |n: usize, tag: &str| {
            let mut p = self.blobs.clone();
            p.n = n;
            blobs_2d(&p, derive_seed(seeds.data, tag, 0))
        };
        let d = sample(self.n_train, "train")?;
        let z = sample(self.n_test, "clean-test")?;
        let v = sample(self.n_test, "attack-test")?;
        let f = self.classifier.train(&d, derive_seed(seeds.data, "classifier", 0))?;
        let disc_seed = |i| derive_seed(seeds.defender, "discriminator", i);

        let attacked = pgd_maximize(
            std::slice::from_ref(&f),
            CompositeLoss::Single,
            &v,
            &self.budget,
            derive_seed(seeds.attacker, "pgd", 0),
        )?;
        let adversarial = self.case("adversarial", &f, &d, &z, attacked, disc_seed(0))?;

        let benign = self.case("benign", &f, &d, &z, brightness_shift(&v, self.shift)?, disc_seed(1))?;

        // The mimic attacker simulates the rejector with its own seed: it
        // starts from the rejector trained against plain PGD, then repeatedly
        // retrains a rejector on its current points and attacks every
        // rejector seen so far.
        let mimic_budget = self.budget.with_random_init(false);
        let mut rejectors = vec![adversarial.discriminator.clone()];
        let mut mimic_points = v.clone();
        for round in 0..=self.mimic_rounds {
            mimic_points = mimic_attack(
                &f,
                &rejectors,
                &v,
                &mimic_budget,
                self.mimic_lambda,
                derive_seed(seeds.attacker, "mimic", round as u64),
            )?;
            if round < self.mimic_rounds {
                let x_tilde = crate::sets::project_features(&z.concat(&mimic_points)?);
                rejectors.push(train_discriminator(
                    &crate::sets::project_features(&d),
                    &x_tilde,
                    &self.discriminator.train.with_seed(derive_seed(seeds.attacker, "rejector", round as u64)),
                    &self.discriminator.arch(d.dim(), 2),
                )?);
            }
        }
        let mimic = self.case("mimic", &f, &d, &z, mimic_points, disc_seed(2))?;
        Ok(RejectronReport {
            classifier: f,
            adversarial,
            benign,
            mimic,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stump() -> Model {
        // Class 1 iff x > 0.
        Model::binary_linear(&[1.0], 0.0).unwrap()
    }

    fn points(xs: &[f64], labels: Vec<usize>) -> LabeledSet {
        LabeledSet::from_rows(&xs.iter().map(|&x| vec![x]).collect::<Vec<_>>(), labels).unwrap()
    }

    #[test]
    fn hand_enumerated_counts() {
        // h scores rise with x; accepting score ≤ 0.5 keeps x ≤ 0.
        let h = stump();
        let f = Model::binary_linear(&[1.0], -0.5).unwrap(); // class 1 iff x > 0.5
        let u_clean = points(&[-1.0, -0.5, 0.5, 1.0, 2.0], vec![0; 5]);
        let u_prime = points(&[-2.0, -1.0, 1.0, 3.0], vec![1, 0, 1, 1]);
        let p = pair_valuation(&f, &h, 0.5, &u_clean, &u_prime).unwrap();
        assert_eq!((p.rejected_clean, p.n_clean), (3, 5));
        assert_eq!(p.rej, 3.0 / 5.0);
        assert_eq!((p.accepted_errors, p.accepted), (1, 2));
        assert_eq!(p.err, Some(0.5));
        assert_eq!(p.err_over_all, 0.25);
    }

    #[test]
    fn infinite_thresholds() {
        let (f, h) = (stump(), stump());
        let u_clean = points(&[-1.0, 1.0], vec![0, 1]);
        let u_prime = points(&[-1.0, 1.0, 0.5], vec![1, 1, 1]);
        let all = pair_valuation(&f, &h, f64::INFINITY, &u_clean, &u_prime).unwrap();
        assert_eq!(all.rej, 0.0);
        assert_eq!(
            all.err.unwrap(),
            crate::loss::empirical_loss(&f, &u_prime, LossKind::ZeroOne).unwrap()
        );
        let none = pair_valuation(&f, &h, f64::NEG_INFINITY, &u_clean, &u_prime).unwrap();
        assert_eq!(none.rej, 1.0);
        assert_eq!(none.err, None);
    }

    #[test]
    fn sweep_is_monotone() {
        let (f, h) = (stump(), stump());
        let u_clean = points(&[-1.0, -0.2, 0.0, 0.3, 1.0, 4.0], vec![0, 0, 1, 1, 1, 1]);
        let u_prime = points(&[-0.5, 0.5], vec![0, 0]);
        let curve = sweep_thresholds(&f, &h, &u_clean, &u_prime, &linear_thresholds(101)).unwrap();
        assert!(curve.windows(2).all(|w| w[0].valuation.rej >= w[1].valuation.rej));
        let ends = sweep_thresholds(&f, &h, &u_clean, &u_prime, &[f64::NEG_INFINITY, f64::INFINITY]).unwrap();
        assert_eq!((ends[0].valuation.rej, ends[0].valuation.err), (1.0, None));
        assert_eq!((ends[1].valuation.rej, ends[1].valuation.err), (0.0, Some(0.5)));
        assert!(sweep_thresholds(&f, &h, &u_clean, &u_prime, &[]).is_err());
        assert!(sweep_thresholds(&f, &h, &u_clean, &u_prime, &[0.5, 0.1]).is_err());
    }

    #[test]
    fn acceptance_sets_nest() {
        let s = vec![0.3, 0.1, 0.9, 0.5];
        let a = AcceptanceSet::new(s.clone(), 0.3);
        let b = AcceptanceSet::new(s, 0.6);
        assert!(a.mask.iter().zip(&b.mask).all(|(&x, &y)| !x || y));
        assert_eq!(a.accepted(), 2);
    }

    #[test]
    fn csv_marks_undefined_error() {
        let (f, h) = (stump(), stump());
        let u = points(&[1.0], vec![1]);
        let curve = sweep_thresholds(&f, &h, &u, &u, &[f64::NEG_INFINITY, 1.0]).unwrap();
        assert_eq!(curve_csv(&curve), "threshold,rej,err,err_defined\n-inf,1,,0\n1,0,0,1\n");
    }

    fn disc_cfg() -> (TrainConfig, ModelSpec) {
        (
            TrainConfig {
                epochs: 40,
                batch_size: 32,
                learning_rate: 0.5,
                ..TrainConfig::default()
            },
            ModelSpec::linear(1, 2),
        )
    }

    fn held_out_accuracy(h: &Model, zeros: &UnlabeledSet, ones: &UnlabeledSet) -> f64 {
        let a = zeros.with_labels(vec![0; zeros.len()]).unwrap();
        let b = ones.with_labels(vec![1; ones.len()]).unwrap();
        crate::loss::accuracy(h, &a.concat(&b).unwrap()).unwrap()
    }

    #[test]
    fn separable_discriminator() {
        let zeros = UnlabeledSet::from_rows(&vec![vec![0.0]; 50]).unwrap();
        let ones = UnlabeledSet::from_rows(&vec![vec![1.0]; 50]).unwrap();
        let (cfg, arch) = disc_cfg();
        let h = train_discriminator(&zeros, &ones, &cfg, &arch).unwrap();
        assert!(held_out_accuracy(&h, &zeros, &ones) >= 0.99);
        assert_eq!(h, train_discriminator(&zeros, &ones, &cfg, &arch).unwrap());
    }

    #[test]
    fn indistinguishable_discriminator() {
        let draw = |seed| {
            let p = BlobParams {
                n: 500,
                centers: vec![vec![0.5], vec![0.5]],
                sigma: 0.1,
                clip_unit_box: false,
            };
            crate::sets::project_features(&blobs_2d(&p, seed).unwrap())
        };
        let same = draw(1);
        let (cfg, arch) = disc_cfg();
        let h = train_discriminator(&same, &same, &cfg, &arch).unwrap();
        let acc = held_out_accuracy(&h, &draw(2), &draw(3));
        assert!((acc - 0.5).abs() <= 0.05, "{acc}");
    }

    #[test]
    fn empty_inputs_are_rejected() {
        let (cfg, arch) = disc_cfg();
        let empty = UnlabeledSet::new(ndarray::Array2::zeros((0, 1))).unwrap();
        assert!(train_discriminator(&empty, &empty, &cfg, &arch).is_err());
        let u = points(&[1.0], vec![1]);
        assert!(pair_valuation(&stump(), &stump(), 0.5, &LabeledSet::empty(1), &u).is_err());
    }
}
