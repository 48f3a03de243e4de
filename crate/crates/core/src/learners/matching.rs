//! Distances between representation distributions and the matching penalty
//! used by the retrain-matching and ATRM adaptors.

use ndarray::{Array1, Array2, ArrayView1, Axis};
use serde::{Deserialize, Serialize};

use super::AlphaSchedule;
use crate::error::{check_dim, Error, Result};
use crate::models::{Model, ParamGrads, Trace};
use crate::sets::UnlabeledSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Matcher {
    /// Squared L2 distance between mean representations.
    #[default]
    MeanFeature,
    /// `ln 2` minus the loss of a logistic discriminator on the representations.
    Discriminator,
}

const DISC_ITERS: usize = 500;
const DISC_LR: f64 = 0.5;
/// Step size of the discriminator that runs alongside training.
const ONLINE_DISC_LR: f64 = 0.5;

/// Matching weight at training progress `p`.
pub fn alpha_at(schedule: AlphaSchedule, alpha_max: f64, p: f64) -> f64 {
    match schedule {
        AlphaSchedule::Constant => alpha_max,
        AlphaSchedule::Progressive => alpha_max * (2.0 / (1.0 + (-10.0 * p.clamp(0.0, 1.0)).exp()) - 1.0),
    }
}

/// `φ(x)` for every row.
pub fn representations(model: &Model, set: &UnlabeledSet) -> Result<Array2<f64>> {
    check_dim(model.input_dim(), set.dim())?;
    let k = model.representation_dim();
    let mut out = Array2::zeros((set.len(), k));
    for (i, x) in set.features().outer_iter().enumerate() {
        out.row_mut(i).assign(&model.representation(x)?);
    }
    Ok(out)
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `-ln σ(z)` without overflow.
fn softplus_neg(z: f64) -> f64 {
    if z > 0.0 {
        (-z).exp().ln_1p()
    } else {
        -z + z.exp().ln_1p()
    }
}

/// Logistic discriminator `σ(wᵀr + b)`: label 0 for the source side, 1 for
/// the target side, each side weighted one half.
#[derive(Debug, Clone)]
struct LogisticDisc {
    w: Array1<f64>,
    b: f64,
}

struct DiscStep {
    loss: f64,
    grad_w: Array1<f64>,
    grad_b: f64,
    /// d loss / d r for every source and target row.
    grad_src: Vec<Array1<f64>>,
    grad_tgt: Vec<Array1<f64>>,
}

impl LogisticDisc {
    fn new(dim: usize) -> Self {
        Self { w: Array1::zeros(dim), b: 0.0 }
    }

    fn step(&self, src: &[ArrayView1<'_, f64>], tgt: &[ArrayView1<'_, f64>]) -> DiscStep {
        let mut loss = 0.0;
        let mut grad_w = Array1::zeros(self.w.len());
        let mut grad_b = 0.0;
        let mut grad_src = Vec::with_capacity(src.len());
        let mut grad_tgt = Vec::with_capacity(tgt.len());
        for (rows, label, grads) in [(src, 0.0, &mut grad_src), (tgt, 1.0, &mut grad_tgt)] {
            let weight = 0.5 / rows.len() as f64;
            for r in rows {
                let z = self.w.dot(r) + self.b;
                let p = sigmoid(z);
                loss += weight * if label == 1.0 { softplus_neg(z) } else { softplus_neg(-z) };
                let dz = weight * (p - label);
                grad_w.scaled_add(dz, r);
                grad_b += dz;
                grads.push(&self.w * dz);
            }
        }
        DiscStep {
            loss,
            grad_w,
            grad_b,
            grad_src,
            grad_tgt,
        }
    }

    fn update(&mut self, step: &DiscStep, lr: f64) {
        self.w.scaled_add(-lr, &step.grad_w);
        self.b -= lr * step.grad_b;
    }
}

fn standardize(a: &Array2<f64>, b: &Array2<f64>) -> (Array2<f64>, Array2<f64>) {
    let pooled = ndarray::concatenate(Axis(0), &[a.view(), b.view()]).expect("same width");
    let mean = pooled.mean_axis(Axis(0)).expect("nonempty");
    let std = pooled.std_axis(Axis(0), 0.0).mapv(|s| if s > 1e-12 { s } else { 1.0 });
    ((a - &mean) / &std, (b - &mean) / &std)
}

/// Distance between the representation distributions of `a` and `b` under `model`.
pub fn feature_distance(model: &Model, a: &UnlabeledSet, b: &UnlabeledSet, matcher: Matcher) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySet("feature distance needs two nonempty sets"));
    }
    let ra = representations(model, a)?;
    let rb = representations(model, b)?;
    match matcher {
        Matcher::MeanFeature => {
            let diff = ra.mean_axis(Axis(0)).unwrap() - rb.mean_axis(Axis(0)).unwrap();
            Ok(diff.dot(&diff))
        }
        Matcher::Discriminator => {
            let (sa, sb) = standardize(&ra, &rb);
            let src: Vec<_> = sa.outer_iter().collect();
            let tgt: Vec<_> = sb.outer_iter().collect();
            let mut disc = LogisticDisc::new(sa.ncols());
            for _ in 0..DISC_ITERS {
                let step = disc.step(&src, &tgt);
                disc.update(&step, DISC_LR);
            }
            let loss = disc.step(&src, &tgt).loss;
            Ok((std::f64::consts::LN_2 - loss).max(0.0))
        }
    }
}


/// Matching penalty evaluated inside a training step.
pub(crate) struct MatchingTerm<'a> {
    target: &'a UnlabeledSet,
    matcher: Matcher,
    disc: Option<LogisticDisc>,
}

impl<'a> MatchingTerm<'a> {
    pub(crate) fn new(target: &'a UnlabeledSet, matcher: Matcher, model: &Model) -> Result<Self> {
        if target.is_empty() {
            return Err(Error::EmptySet("matching target batch is empty"));
        }
        check_dim(model.input_dim(), target.dim())?;
        let disc = (matcher == Matcher::Discriminator).then(|| LogisticDisc::new(model.representation_dim()));
        Ok(Self { target, matcher, disc })
    }

    /// Add `alpha · ∇ distance(source, target)` to `grads`; returns the distance.
    pub(crate) fn accumulate(
        &mut self,
        model: &Model,
        source: &[ArrayView1<'_, f64>],
        alpha: f64,
        grads: &mut ParamGrads,
    ) -> Result<f64> {
        let cut = model.representation_cut();
        let src_traces: Vec<Trace> = source.iter().map(|x| model.trace(*x)).collect::<Result<_>>()?;
        let tgt_traces: Vec<Trace> = self
            .target
            .features()
            .outer_iter()
            .map(|x| model.trace(x))
            .collect::<Result<_>>()?;
        fn rep_at(t: &Trace, cut: usize) -> ArrayView1<'_, f64> {
            t.activations[cut].view()
        }
        let rep = |t| rep_at(t, cut);
        let add = |grads: &mut ParamGrads, trace: &Trace, upstream: Array1<f64>| {
            if cut > 0 {
                let (_, g) = model.backward(trace, cut, upstream, false, true);
                grads.add_scaled(&g.expect("param grads requested"), 1.0);
            }
        };
        match self.matcher {
            Matcher::MeanFeature => {
                let k = model.representation_dim();
                let mut mean_s = Array1::zeros(k);
                for t in &src_traces {
                    mean_s += &rep(t);
                }
                mean_s /= src_traces.len() as f64;
                let mut mean_t = Array1::zeros(k);
                for t in &tgt_traces {
                    mean_t += &rep(t);
                }
                mean_t /= tgt_traces.len() as f64;
                let diff = mean_s - mean_t;
                let distance = diff.dot(&diff);
                if alpha != 0.0 {
                    let up_s = &diff * (2.0 * alpha / src_traces.len() as f64);
                    let up_t = &diff * (-2.0 * alpha / tgt_traces.len() as f64);
                    for t in &src_traces {
                        add(grads, t, up_s.clone());
                    }
                    for t in &tgt_traces {
                        add(grads, t, up_t.clone());
                    }
                }
                Ok(distance)
            }
            Matcher::Discriminator => {
                let disc = self.disc.as_mut().expect("discriminator state");
                let src: Vec<_> = src_traces.iter().map(rep).collect();
                let tgt: Vec<_> = tgt_traces.iter().map(rep).collect();
                let step = disc.step(&src, &tgt);
                if alpha != 0.0 {
                    // The model minimises ln 2 - L_disc, i.e. it ascends the
                    // discriminator loss (gradient reversal).
                    for (t, g) in src_traces.iter().zip(&step.grad_src) {
                        add(grads, t, g * -alpha);
                    }
                    for (t, g) in tgt_traces.iter().zip(&step.grad_tgt) {
                        add(grads, t, g * -alpha);
                    }
                }
                disc.update(&step, ONLINE_DISC_LR);
                Ok((std::f64::consts::LN_2 - step.loss).max(0.0))
            }
        }
    }
}
