//! Transductive vs. inductive separation on a two-Gaussian mixture.
//!
//! Data: `y` uniform on `{-1, +1}`, `x | y ~ N(yμ, σ²I)` with `‖μ‖² = d`.
//! The inductive learner estimates the mean direction `θ̄` from one split of
//! the training data. The transductive learner additionally sees the attacked
//! test point `x'`, builds two large-margin classifiers in the span of `θ̄`
//! and `x'` (one per label) and keeps the one with the smaller margin error
//! on a held-out split.
//!
//! Labels are stored as class indices `{0, 1}` and converted with
//! `y = 2·label − 1` at this module's boundary.

mod special;

use ndarray::{Array1, ArrayView1};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attacks::sign;
use crate::error::{check_dim, Error, Result};
use crate::io::rng::derive_seed;
use crate::sets::LabeledSet;

pub use special::{erfc, q_function};

/// Two-sided 95% normal quantile.
const Z95: f64 = 1.959_963_984_540_054;

/// Class index to `±1`.
pub fn signed_label(label: usize) -> f64 {
    if label == 1 {
        1.0
    } else {
        -1.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianInstance {
    pub d: usize,
    pub mu: Vec<f64>,
    pub sigma: f64,
    /// L∞ attack radius.
    pub epsilon: f64,
    /// Target error level of the theorem.
    pub accuracy_nu: f64,
    /// `σ⁴ / d`.
    pub n0: f64,
    pub k: f64,
    /// Size of the split used for the mean estimate (`10·n0`, rounded).
    pub m: usize,
    /// Size of the split used for the margin check (`K·n0`, rounded).
    pub m_prime: usize,
}

/// Knobs of the theorem regime: `σ² = C₁ √(d ln(1/ν))` and `K = k_factor`
/// (or `n0` when `k_factor` is `None`).
/// Omitted fields default to [`RegimeParams::desk`] at `d = 4096`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegimeParams {
    pub d: usize,
    pub accuracy_nu: f64,
    pub c1: f64,
    pub epsilon: f64,
    pub k: Option<f64>,
    pub mu_seed: u64,
}

impl Default for RegimeParams {
    fn default() -> Self {
        Self::desk(4096)
    }
}

/// Default `K`. With `K = n0` the margin-check split has only `n0²` points
/// (5 at `d = 4096`), far too few for the check to be reliable at desk scale.
pub const DEFAULT_K: f64 = 10.0;

impl RegimeParams {
    pub fn desk(d: usize) -> Self {
        Self {
            d,
            accuracy_nu: 0.1,
            c1: 1.0,
            epsilon: 0.5,
            k: Some(DEFAULT_K),
            mu_seed: 0,
        }
    }
}

/// `√d · e₁` mapped by the Householder reflection that sends `e₁` to a seeded
/// uniformly random unit vector `u`, i.e. `√d · u`: `‖μ‖² = d` while μ is
/// dense rather than axis-aligned.
pub fn rotated_mean(d: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
    let norm = u.iter().map(|x| x * x).sum::<f64>().sqrt();
    let scale = (d as f64).sqrt() / norm;
    u.iter().map(|x| x * scale).collect()
}

impl GaussianInstance {
    pub fn new(mu: Vec<f64>, sigma: f64, epsilon: f64, accuracy_nu: f64, k: Option<f64>) -> Result<Self> {
        let d = mu.len();
        if d == 0 {
            return Err(Error::BadParams("dimension must be positive".into()));
        }
        let norm2: f64 = mu.iter().map(|x| x * x).sum();
        if ((norm2 - d as f64) / d as f64).abs() > 1e-6 {
            return Err(Error::BadParams(format!("‖μ‖² = {norm2}, expected {d}")));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::BadParams("sigma must be positive".into()));
        }
        if !(epsilon >= 0.0 && epsilon.is_finite()) {
            return Err(Error::BadParams("epsilon must be >= 0".into()));
        }
        if !(accuracy_nu > 0.0 && accuracy_nu < 1.0) {
            return Err(Error::BadParams("accuracy_nu must lie in (0, 1)".into()));
        }
        let n0 = sigma.powi(4) / d as f64;
        let k = k.unwrap_or(n0);
        let m = ((10.0 * n0).round() as usize).max(1);
        let m_prime = ((k * n0).round() as usize).max(1);
        Ok(Self {
            d,
            mu,
            sigma,
            epsilon,
            accuracy_nu,
            n0,
            k,
            m,
            m_prime,
        })
    }

    pub fn theorem_regime(p: &RegimeParams) -> Result<Self> {
        let sigma2 = p.c1 * (p.d as f64 * (1.0 / p.accuracy_nu).ln()).sqrt();
        Self::new(rotated_mean(p.d, p.mu_seed), sigma2.sqrt(), p.epsilon, p.accuracy_nu, p.k)
    }

    pub fn mu(&self) -> ArrayView1<'_, f64> {
        ArrayView1::from(&self.mu[..])
    }

    /// Margin threshold `t = σ (√(n0/d) + n0/m)^{-1/2}`.
    pub fn threshold(&self) -> f64 {
        self.sigma * ((self.n0 / self.d as f64).sqrt() + self.n0 / self.m as f64).powf(-0.5)
    }
}

/// `n` i.i.d. draws; each row draws its label then `d` standard normals.
pub fn sample_data(inst: &GaussianInstance, n: usize, seed: u64) -> Result<LabeledSet> {
    if n == 0 {
        return Err(Error::BadParams("sample size must be >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = Vec::with_capacity(n * inst.d);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let label = usize::from(rng.random_bool(0.5));
        let y = signed_label(label);
        for &mu_j in &inst.mu {
            let z: f64 = StandardNormal.sample(&mut rng);
            data.push(y * mu_j + inst.sigma * z);
        }
        labels.push(label);
    }
    let features = ndarray::Array2::from_shape_vec((n, inst.d), data).expect("shape");
    LabeledSet::new(features, labels)
}

/// `θ̄ = θ̂ / ‖θ̂‖` with `θ̂ = mean(y·x)`.
pub fn fit_mean_direction(d2: &LabeledSet) -> Result<Array1<f64>> {
    if d2.is_empty() {
        return Err(Error::EmptySet("mean direction needs data"));
    }
    let mut theta = Array1::zeros(d2.dim());
    for (x, label) in d2.iter() {
        theta.scaled_add(signed_label(label), &x);
    }
    theta /= d2.len() as f64;
    let norm = theta.dot(&theta).sqrt();
    if norm < 1e-12 {
        return Err(Error::DegenerateEstimate(norm));
    }
    Ok(theta / norm)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginPair {
    pub theta_bar: Vec<f64>,
    pub theta_plus: Vec<f64>,
    pub theta_minus: Vec<f64>,
    pub theta_bar_plus: Vec<f64>,
    pub theta_bar_minus: Vec<f64>,
    pub eta_plus: f64,
    pub eta_minus: f64,
    pub gamma: f64,
    pub t: f64,
}

fn dot(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    a.dot(&b)
}

/// The two large-margin candidates: `θ± = θ̄ + η± x̄'` with
/// `θ₊ᵀx'/‖x'‖ = 1/2` and `θ₋ᵀx'/‖x'‖ = −1/2`.
pub fn build_margin_pair(theta_bar: ArrayView1<'_, f64>, x_prime: ArrayView1<'_, f64>, inst: &GaussianInstance) -> Result<MarginPair> {
    check_dim(theta_bar.len(), x_prime.len())?;
    let x_norm = dot(x_prime, x_prime).sqrt();
    if x_norm == 0.0 {
        return Err(Error::ZeroInput);
    }
    let x_unit = x_prime.mapv(|v| v / x_norm);
    let gamma = x_norm / 2.0;
    let proj = dot(theta_bar, x_prime);
    let eta_plus = (gamma - proj) / x_norm;
    let eta_minus = (-gamma - proj) / x_norm;
    let theta_plus = &theta_bar + &(&x_unit * eta_plus);
    let theta_minus = &theta_bar + &(&x_unit * eta_minus);
    let unit = |v: &Array1<f64>| v / v.dot(v).sqrt();
    Ok(MarginPair {
        theta_bar: theta_bar.to_vec(),
        theta_bar_plus: unit(&theta_plus).to_vec(),
        theta_bar_minus: unit(&theta_minus).to_vec(),
        theta_plus: theta_plus.to_vec(),
        theta_minus: theta_minus.to_vec(),
        eta_plus,
        eta_minus,
        gamma,
        t: inst.threshold(),
    })
}

/// Fraction of `d1` with margin `y·θᵀx ≤ t`.
pub fn margin_error_empirical(theta: ArrayView1<'_, f64>, d1: &LabeledSet, t: f64) -> Result<f64> {
    if d1.is_empty() {
        return Err(Error::EmptySet("margin error needs data"));
    }
    check_dim(theta.len(), d1.dim())?;
    let failures = d1
        .iter()
        .filter(|(x, label)| signed_label(*label) * dot(theta, *x) <= t)
        .count();
    Ok(failures as f64 / d1.len() as f64)
}

/// Population margin error `Q((μᵀθ − t) / (σ‖θ‖))`.
pub fn margin_error_analytic(theta: ArrayView1<'_, f64>, inst: &GaussianInstance, t: f64) -> Result<f64> {
    check_dim(inst.d, theta.len())?;
    let norm = dot(theta, theta).sqrt();
    if norm == 0.0 {
        return Err(Error::ZeroVector);
    }
    Ok(q_function((dot(inst.mu(), theta) - t) / (inst.sigma * norm)))
}

/// `+1` when `θ̄₊` has margin error no larger than `θ̄₋` on `d1`, else `−1`.
pub fn transductive_classify(pair: &MarginPair, d1: &LabeledSet) -> Result<f64> {
    let plus = margin_error_empirical(ArrayView1::from(&pair.theta_bar_plus[..]), d1, pair.t)?;
    let minus = margin_error_empirical(ArrayView1::from(&pair.theta_bar_minus[..]), d1, pair.t)?;
    Ok(if plus <= minus { 1.0 } else { -1.0 })
}

/// Worst-case L∞ perturbation against a linear classifier:
/// `x − ε·y·sign(θ)` with `sign(0) = 0`.
pub fn optimal_linear_attack(x: ArrayView1<'_, f64>, y: f64, theta: ArrayView1<'_, f64>, epsilon: f64) -> Result<Array1<f64>> {
    check_dim(x.len(), theta.len())?;
    Ok(ndarray::Zip::from(&x)
        .and(&theta)
        .map_collect(|&xi, &ti| xi - epsilon * y * sign(ti)))
}

/// Sign prediction of a linear classifier, `+1` on ties.
pub fn linear_predict(theta: ArrayView1<'_, f64>, x: ArrayView1<'_, f64>) -> f64 {
    if dot(theta, x) >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub low: f64,
    pub high: f64,
}

impl Interval {
    pub fn disjoint(&self, other: &Interval) -> bool {
        self.high < other.low || other.high < self.low
    }
}

/// Wilson score interval at 95% for `successes / n`.
pub fn wilson_interval(successes: usize, n: usize) -> Interval {
    if n == 0 {
        return Interval { low: 0.0, high: 1.0 };
    }
    let n_f = n as f64;
    let p = successes as f64 / n_f;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / n_f;
    let center = (p + z2 / (2.0 * n_f)) / denom;
    let half = Z95 * (p * (1.0 - p) / n_f + z2 / (4.0 * n_f * n_f)).sqrt() / denom;
    Interval {
        low: (center - half).max(0.0),
        high: (center + half).min(1.0),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub label: f64,
    pub inductive_error: bool,
    pub transductive_error: bool,
    /// `θ̄ᵀμ`.
    pub theta_mu: f64,
    /// `‖x'‖₂`.
    pub x_prime_norm: f64,
    /// Error of `sign(θ̄ᵀ·)` on a fresh attacked point, given `θ̄`.
    pub inductive_error_analytic: f64,
    pub margin_error_plus: f64,
    pub margin_error_minus: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparationReport {
    pub d: usize,
    pub sigma: f64,
    pub epsilon: f64,
    pub accuracy_nu: f64,
    pub n0: f64,
    pub k: f64,
    pub m: usize,
    pub m_prime: usize,
    pub t: f64,
    pub seed: u64,
    pub trials: usize,
    pub inductive_error: f64,
    pub transductive_error: f64,
    pub inductive_interval: Interval,
    pub transductive_interval: Interval,
    pub inductive_error_analytic: f64,
    pub records: Vec<TrialRecord>,
}

fn run_trial(inst: &GaussianInstance, trial: usize, seed: u64) -> Result<TrialRecord> {
    let trial_seed = derive_seed(seed, "separation-trial", trial as u64);
    let train = sample_data(inst, inst.m_prime + inst.m, derive_seed(trial_seed, "train", 0))?;
    let d1_idx: Vec<usize> = (0..inst.m_prime).collect();
    let d2_idx: Vec<usize> = (inst.m_prime..inst.m_prime + inst.m).collect();
    let d1 = train.select(&d1_idx);
    let d2 = train.select(&d2_idx);
    let theta_bar = fit_mean_direction(&d2)?;

    let test = sample_data(inst, 1, derive_seed(trial_seed, "test", 0))?;
    let y = signed_label(test.labels()[0]);
    let x_prime = optimal_linear_attack(test.row(0), y, theta_bar.view(), inst.epsilon)?;

    let inductive_pred = linear_predict(theta_bar.view(), x_prime.view());
    let pair = build_margin_pair(theta_bar.view(), x_prime.view(), inst)?;
    let transductive_pred = transductive_classify(&pair, &d1)?;

    let theta_mu = dot(theta_bar.view(), inst.mu());
    let l1: f64 = theta_bar.iter().map(|v| v.abs()).sum();
    Ok(TrialRecord {
        trial,
        label: y,
        inductive_error: inductive_pred != y,
        transductive_error: transductive_pred != y,
        theta_mu,
        x_prime_norm: dot(x_prime.view(), x_prime.view()).sqrt(),
        inductive_error_analytic: q_function((theta_mu - inst.epsilon * l1) / inst.sigma),
        margin_error_plus: margin_error_empirical(ArrayView1::from(&pair.theta_bar_plus[..]), &d1, pair.t)?,
        margin_error_minus: margin_error_empirical(ArrayView1::from(&pair.theta_bar_minus[..]), &d1, pair.t)?,
    })
}

/// Monte Carlo comparison of the inductive (mean-estimator) and transductive
/// arms on `trials` independent games with one test point each.
pub fn run_separation(inst: &GaussianInstance, trials: usize, seed: u64) -> Result<SeparationReport> {
    if trials == 0 {
        return Err(Error::BadParams("trials must be >= 1".into()));
    }
    let records: Vec<TrialRecord> = (0..trials)
        .into_par_iter()
        .map(|t| run_trial(inst, t, seed))
        .collect::<Result<_>>()?;
    let ind = records.iter().filter(|r| r.inductive_error).count();
    let tra = records.iter().filter(|r| r.transductive_error).count();
    let analytic = records.iter().map(|r| r.inductive_error_analytic).sum::<f64>() / trials as f64;
    Ok(SeparationReport {
        d: inst.d,
        sigma: inst.sigma,
        epsilon: inst.epsilon,
        accuracy_nu: inst.accuracy_nu,
        n0: inst.n0,
        k: inst.k,
        m: inst.m,
        m_prime: inst.m_prime,
        t: inst.threshold(),
        seed,
        trials,
        inductive_error: ind as f64 / trials as f64,
        transductive_error: tra as f64 / trials as f64,
        inductive_interval: wilson_interval(ind, trials),
        transductive_interval: wilson_interval(tra, trials),
        inductive_error_analytic: analytic,
        records,
    })
}

impl SeparationReport {
    /// Rows `(trial, arm, error)` for the results CSV.
    pub fn csv_rows(&self) -> Vec<(usize, &'static str, u8)> {
        self.records
            .iter()
            .flat_map(|r| {
                [
                    (r.trial, "inductive", u8::from(r.inductive_error)),
                    (r.trial, "transductive", u8::from(r.transductive_error)),
                ]
            })
            .collect()
    }
}
