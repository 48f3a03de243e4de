//! Deterministic synthetic datasets.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian_sep::{sample_data, GaussianInstance, RegimeParams};
use crate::sets::LabeledSet;

/// Isotropic Gaussian clouds, one per class. Row `i` belongs to class
/// `i mod centers.len()`, so classes are balanced by construction.
///
/// Fields left out of a configuration take the values of [`BlobParams::separable`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BlobParams {
    pub n: usize,
    pub centers: Vec<Vec<f64>>,
    pub sigma: f64,
    /// Clamp every coordinate into `[0, 1]` and mark the set as unit-box data.
    pub clip_unit_box: bool,
}

impl Default for BlobParams {
    fn default() -> Self {
        Self::separable(0)
    }
}

impl BlobParams {
    /// Two well separated clouds at `(0.25, 0.5)` and `(0.75, 0.5)`.
    pub fn separable(n: usize) -> Self {
        Self {
            n,
            centers: vec![vec![0.25, 0.5], vec![0.75, 0.5]],
            sigma: 0.05,
            clip_unit_box: true,
        }
    }

    /// Two clouds close enough that a small L∞ budget moves points across the gap.
    pub fn overlapping(n: usize) -> Self {
        Self {
            n,
            centers: vec![vec![0.35, 0.5], vec![0.65, 0.5]],
            sigma: 0.08,
            clip_unit_box: true,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::BadParams("n must be >= 1".into()));
        }
        if self.centers.len() < 2 {
            return Err(Error::BadParams("need at least two centers".into()));
        }
        let dim = self.centers[0].len();
        if dim == 0 || self.centers.iter().any(|c| c.len() != dim) {
            return Err(Error::BadParams("centers must share a positive dimension".into()));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::BadParams("sigma must be finite and >= 0".into()));
        }
        Ok(())
    }
}

pub fn blobs_2d(p: &BlobParams, seed: u64) -> Result<LabeledSet> {
    p.validate()?;
    let dim = p.centers[0].len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut features = Array2::zeros((p.n, dim));
    let mut labels = Vec::with_capacity(p.n);
    for (i, mut row) in features.outer_iter_mut().enumerate() {
        let class = i % p.centers.len();
        for (v, c) in row.iter_mut().zip(&p.centers[class]) {
            let z: f64 = StandardNormal.sample(&mut rng);
            *v = c + p.sigma * z;
            if p.clip_unit_box {
                *v = v.clamp(0.0, 1.0);
            }
        }
        labels.push(class);
    }
    if p.clip_unit_box {
        LabeledSet::new_unit_box(features, labels)
    } else {
        LabeledSet::new(features, labels)
    }
}

/// Concentric rings in 2-D: class `c` lies at radius `radii[c]` around the origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RingParams {
    #[serde(default)]
    pub n: usize,
    pub radii: Vec<f64>,
    pub noise: f64,
}

pub fn rings(p: &RingParams, seed: u64) -> Result<LabeledSet> {
    if p.n == 0 || p.radii.len() < 2 {
        return Err(Error::BadParams("rings need n >= 1 and at least two radii".into()));
    }
    if !(p.noise >= 0.0 && p.noise.is_finite()) || p.radii.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
        return Err(Error::BadParams("ring radii and noise must be finite and >= 0".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut features = Array2::zeros((p.n, 2));
    let mut labels = Vec::with_capacity(p.n);
    for (i, mut row) in features.outer_iter_mut().enumerate() {
        let class = i % p.radii.len();
        let angle = rng.random_range(0.0..std::f64::consts::TAU);
        let z: f64 = StandardNormal.sample(&mut rng);
        let r = p.radii[class] + p.noise * z;
        row[0] = r * angle.cos();
        row[1] = r * angle.sin();
        labels.push(class);
    }
    LabeledSet::new(features, labels)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SyntheticSpec {
    TwoGaussians {
        #[serde(default)]
        n: usize,
        #[serde(default)]
        regime: RegimeParams,
    },
    Blobs2d(BlobParams),
    Rings(RingParams),
}

pub fn generate_synthetic(spec: &SyntheticSpec, seed: u64) -> Result<LabeledSet> {
    match spec {
        SyntheticSpec::TwoGaussians { n, regime } => {
            let inst = GaussianInstance::theorem_regime(regime)?;
            sample_data(&inst, *n, seed)
        }
        SyntheticSpec::Blobs2d(p) => blobs_2d(p, seed),
        SyntheticSpec::Rings(p) => rings(p, seed),
    }
}

impl SyntheticSpec {
    /// Same generator with a different sample size.
    pub fn with_n(&self, n: usize) -> Self {
        let mut out = self.clone();
        match &mut out {
            SyntheticSpec::TwoGaussians { n: m, .. } => *m = n,
            SyntheticSpec::Blobs2d(p) => p.n = n,
            SyntheticSpec::Rings(p) => p.n = n,
        }
        out
    }
}
