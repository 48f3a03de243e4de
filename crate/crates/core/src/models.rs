//! Small differentiable classifiers `F = c ∘ φ`.
//!
//! A [`Model`] is a stack of affine layers with ReLU between them (no
//! activation on the output layer). The representation `φ` is the activation
//! after layer `representation_cut`; cut 0 is the raw input. Gradients are
//! computed by hand-written reverse mode.

use ndarray::{Array1, Array2, ArrayView1, Zip};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::loss::{cross_entropy_from_logits, LossKind};

pub const MAX_DEPTH: usize = 4;
pub const MAX_WIDTH: usize = 1024;
const FORMAT_TAG: &str = "transrobust-model";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Linear,
    Mlp,
}

/// Architecture description used by trainers to build a fresh model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub kind: ModelKind,
    /// Layer widths from input to output, e.g. `[2, 16, 2]`.
    pub dims: Vec<usize>,
    pub representation_cut: usize,
}

impl ModelSpec {
    pub fn linear(input: usize, classes: usize) -> Self {
        Self {
            kind: ModelKind::Linear,
            dims: vec![input, classes],
            representation_cut: 0,
        }
    }

    /// MLP with the representation taken after the last hidden layer.
    pub fn mlp(input: usize, hidden: &[usize], classes: usize) -> Self {
        let mut dims = vec![input];
        dims.extend_from_slice(hidden);
        dims.push(classes);
        Self {
            kind: ModelKind::Mlp,
            representation_cut: hidden.len(),
            dims,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let depth = self.dims.len().saturating_sub(1);
        if depth == 0 {
            return Err(Error::BadParams("a model needs at least one layer".into()));
        }
        if depth > MAX_DEPTH {
            return Err(Error::BadParams(format!("depth {depth} exceeds {MAX_DEPTH}")));
        }
        if self.dims.iter().any(|&d| d == 0) {
            return Err(Error::BadParams("layer widths must be positive".into()));
        }
        if self.dims[1..].iter().any(|&d| d > MAX_WIDTH) {
            return Err(Error::BadParams(format!("layer width exceeds {MAX_WIDTH}")));
        }
        if self.representation_cut > depth {
            return Err(Error::BadParams(format!(
                "representation cut {} outside 0..={depth}",
                self.representation_cut
            )));
        }
        match self.kind {
            ModelKind::Linear if depth != 1 => Err(Error::BadParams("linear model must have exactly one layer".into())),
            _ => Ok(()),
        }
    }

    /// Glorot-uniform weights, zero biases, seeded.
    pub fn init(&self, seed: u64) -> Result<Model> {
        self.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = self
            .dims
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
                let weights = Array2::from_shape_fn((fan_out, fan_in), |_| rng.random_range(-a..=a));
                Layer {
                    weights,
                    bias: Array1::zeros(fan_out),
                }
            })
            .collect();
        Ok(Model {
            kind: self.kind,
            layers,
            representation_cut: self.representation_cut,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    /// `out × in`.
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawModel", into = "RawModel")]
pub struct Model {
    kind: ModelKind,
    layers: Vec<Layer>,
    representation_cut: usize,
}

/// Parameter-shaped gradient (or update) container.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGrads {
    pub layers: Vec<Layer>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradientBundle {
    pub loss: f64,
    pub input_grad: Option<Array1<f64>>,
    pub param_grads: Option<ParamGrads>,
}

/// Activations recorded by a forward pass; `activations[0]` is the input and
/// `activations[l]` the output of layer `l`.
#[derive(Debug, Clone)]
pub struct Trace {
    pub activations: Vec<Array1<f64>>,
}

fn relu_in_place(v: &mut Array1<f64>) {
    v.mapv_inplace(|z| if z > 0.0 { z } else { 0.0 });
}

/// Index of the largest entry, smallest index on ties.
pub fn argmax(v: ArrayView1<'_, f64>) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

impl Model {
    pub fn from_layers(kind: ModelKind, layers: Vec<Layer>, representation_cut: usize) -> Result<Self> {
        let mut dims = Vec::with_capacity(layers.len() + 1);
        if let Some(first) = layers.first() {
            dims.push(first.weights.ncols());
        }
        for layer in &layers {
            check_dim(*dims.last().unwrap(), layer.weights.ncols())?;
            check_dim(layer.weights.nrows(), layer.bias.len())?;
            dims.push(layer.weights.nrows());
        }
        ModelSpec { kind, dims, representation_cut }.validate()?;
        let model = Self { kind, layers, representation_cut };
        if !model.params_finite() {
            return Err(Error::NonFinite("model parameters".into()));
        }
        Ok(model)
    }

    /// Two-class linear model with logits `(-(θᵀx + b), θᵀx + b)`.
    pub fn binary_linear(theta: &[f64], bias: f64) -> Result<Self> {
        let d = theta.len();
        let mut weights = Array2::zeros((2, d));
        for (j, &t) in theta.iter().enumerate() {
            weights[[0, j]] = -t;
            weights[[1, j]] = t;
        }
        let layer = Layer {
            weights,
            bias: ndarray::array![-bias, bias],
        };
        Self::from_layers(ModelKind::Linear, vec![layer], 0)
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn representation_cut(&self) -> usize {
        self.representation_cut
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].weights.ncols()
    }

    pub fn num_classes(&self) -> usize {
        self.layers.last().map_or(0, |l| l.weights.nrows())
    }

    pub fn dims(&self) -> Vec<usize> {
        std::iter::once(self.input_dim())
            .chain(self.layers.iter().map(|l| l.weights.nrows()))
            .collect()
    }

    pub fn spec(&self) -> ModelSpec {
        ModelSpec {
            kind: self.kind,
            dims: self.dims(),
            representation_cut: self.representation_cut,
        }
    }

    /// Width of `φ(x)`.
    pub fn representation_dim(&self) -> usize {
        self.dims()[self.representation_cut]
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    pub fn params_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(l.bias.iter()).all(|v| v.is_finite()))
    }

    fn apply_layer(&self, index: usize, input: ArrayView1<'_, f64>) -> Array1<f64> {
        let layer = &self.layers[index];
        let mut out = layer.weights.dot(&input) + &layer.bias;
        if index + 1 < self.layers.len() {
            relu_in_place(&mut out);
        }
        out
    }

    /// Full forward pass keeping every activation.
    pub fn trace(&self, x: ArrayView1<'_, f64>) -> Result<Trace> {
        check_dim(self.input_dim(), x.len())?;
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(x.to_owned());
        for l in 0..self.layers.len() {
            let next = self.apply_layer(l, activations[l].view());
            activations.push(next);
        }
        if activations.last().unwrap().iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("logits".into()));
        }
        Ok(Trace { activations })
    }

    /// Logits and the argmax prediction (smallest index on ties).
    pub fn forward(&self, x: ArrayView1<'_, f64>) -> Result<(Array1<f64>, usize)> {
        let logits = self.logits_from(0, x)?;
        let label = argmax(logits.view());
        Ok((logits, label))
    }

    pub fn predict(&self, x: ArrayView1<'_, f64>) -> Result<usize> {
        self.forward(x).map(|(_, y)| y)
    }

    /// Activations at the representation cut.
    pub fn representation(&self, x: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
        check_dim(self.input_dim(), x.len())?;
        let mut a = x.to_owned();
        for l in 0..self.representation_cut {
            a = self.apply_layer(l, a.view());
        }
        Ok(a)
    }

    /// Run the layers after the cut on a representation vector.
    pub fn head(&self, rep: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
        self.logits_from(self.representation_cut, rep)
    }

    fn logits_from(&self, start: usize, a: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
        let expected = self.dims()[start];
        check_dim(expected, a.len())?;
        let mut a = a.to_owned();
        for l in start..self.layers.len() {
            a = self.apply_layer(l, a.view());
        }
        if a.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("logits".into()));
        }
        Ok(a)
    }

    /// Cross-entropy (or 0-1) loss of one example.
    pub fn example_loss(&self, x: ArrayView1<'_, f64>, y: usize, kind: LossKind) -> Result<f64> {
        let (logits, pred) = self.forward(x)?;
        Ok(match kind {
            LossKind::ZeroOne => f64::from(u8::from(pred != y)),
            LossKind::CrossEntropy => cross_entropy_from_logits(logits.view(), y).0,
        })
    }

    /// Exact reverse-mode gradients of the cross-entropy at `(x, y)`.
    pub fn loss_gradients(
        &self,
        x: ArrayView1<'_, f64>,
        y: usize,
        kind: LossKind,
        want_input: bool,
        want_params: bool,
    ) -> Result<GradientBundle> {
        if kind == LossKind::ZeroOne {
            return Err(Error::NonDifferentiableLoss);
        }
        if y >= self.num_classes() {
            return Err(Error::BadParams(format!("label {y} out of range for {} classes", self.num_classes())));
        }
        let trace = self.trace(x)?;
        let logits = trace.activations.last().unwrap();
        let (loss, dlogits) = cross_entropy_from_logits(logits.view(), y);
        let (input_grad, param_grads) = self.backward(&trace, self.layers.len(), dlogits, want_input, want_params);
        Ok(GradientBundle {
            loss,
            input_grad,
            param_grads,
        })
    }

    /// Back-propagate `upstream`, the gradient w.r.t. `activations[from]`,
    /// down to the parameters and/or the input.
    pub fn backward(
        &self,
        trace: &Trace,
        from: usize,
        upstream: Array1<f64>,
        want_input: bool,
        want_params: bool,
    ) -> (Option<Array1<f64>>, Option<ParamGrads>) {
        let mut grads = want_params.then(|| ParamGrads::zeros_like(self));
        let mut delta = upstream;
        for l in (0..from).rev() {
            // ReLU mask on hidden outputs; the output layer is affine.
            if l + 1 < self.layers.len() {
                Zip::from(&mut delta)
                    .and(&trace.activations[l + 1])
                    .for_each(|d, &a| {
                        if a <= 0.0 {
                            *d = 0.0;
                        }
                    });
            }
            if let Some(g) = grads.as_mut() {
                let input = &trace.activations[l];
                let gl = &mut g.layers[l];
                for (i, &di) in delta.iter().enumerate() {
                    if di != 0.0 {
                        gl.weights.row_mut(i).scaled_add(di, input);
                    }
                }
                gl.bias += &delta;
            }
            if l == 0 && !want_input {
                break;
            }
            delta = self.layers[l].weights.t().dot(&delta);
        }
        (want_input.then_some(delta), grads)
    }

    /// `self + scale * delta`, parameter-wise.
    pub fn apply_update(&mut self, delta: &ParamGrads, scale: f64) {
        for (layer, d) in self.layers.iter_mut().zip(&delta.layers) {
            layer.weights.scaled_add(scale, &d.weights);
            layer.bias.scaled_add(scale, &d.bias);
        }
    }

    pub fn save_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn load_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

impl ParamGrads {
    pub fn zeros_like(model: &Model) -> Self {
        Self {
            layers: model
                .layers
                .iter()
                .map(|l| Layer {
                    weights: Array2::zeros(l.weights.raw_dim()),
                    bias: Array1::zeros(l.bias.len()),
                })
                .collect(),
        }
    }

    pub fn add_scaled(&mut self, other: &ParamGrads, scale: f64) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.weights.scaled_add(scale, &b.weights);
            a.bias.scaled_add(scale, &b.bias);
        }
    }

    pub fn scale(&mut self, s: f64) {
        for l in &mut self.layers {
            l.weights *= s;
            l.bias *= s;
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &f64> {
        self.layers.iter().flat_map(|l| l.weights.iter().chain(l.bias.iter()))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.weights.iter_mut().chain(l.bias.iter_mut()))
    }

    pub fn is_finite(&self) -> bool {
        self.iter().all(|v| v.is_finite())
    }
}

impl Model {
    pub fn params_iter(&self) -> impl Iterator<Item = &f64> {
        self.layers.iter().flat_map(|l| l.weights.iter().chain(l.bias.iter()))
    }

    pub fn params_iter_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.weights.iter_mut().chain(l.bias.iter_mut()))
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLayer {
    rows: usize,
    cols: usize,
    /// Row-major `rows × cols`.
    weights: Vec<f64>,
    bias: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    format: String,
    version: u32,
    kind: ModelKind,
    dims: Vec<usize>,
    representation_cut: usize,
    layers: Vec<RawLayer>,
}

impl From<Model> for RawModel {
    fn from(m: Model) -> Self {
        let dims = m.dims();
        RawModel {
            format: FORMAT_TAG.into(),
            version: FORMAT_VERSION,
            kind: m.kind,
            dims,
            representation_cut: m.representation_cut,
            layers: m
                .layers
                .into_iter()
                .map(|l| RawLayer {
                    rows: l.weights.nrows(),
                    cols: l.weights.ncols(),
                    weights: l.weights.iter().copied().collect(),
                    bias: l.bias.to_vec(),
                })
                .collect(),
        }
    }
}

impl TryFrom<RawModel> for Model {
    type Error = Error;

    fn try_from(raw: RawModel) -> Result<Self> {
        if raw.format != FORMAT_TAG || raw.version != FORMAT_VERSION {
            return Err(Error::BadParams(format!(
                "unsupported model format {} v{}",
                raw.format, raw.version
            )));
        }
        let layers = raw
            .layers
            .into_iter()
            .map(|l| {
                let weights = Array2::from_shape_vec((l.rows, l.cols), l.weights)
                    .map_err(|e| Error::BadParams(e.to_string()))?;
                Ok(Layer {
                    weights,
                    bias: Array1::from(l.bias),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let model = Model::from_layers(raw.kind, layers, raw.representation_cut)?;
        if model.dims() != raw.dims {
            return Err(Error::BadParams("declared dims disagree with layer shapes".into()));
        }
        Ok(model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use ndarray::array;

    fn one_hidden(w1: f64, w2: f64) -> Model {
        let l1 = Layer {
            weights: array![[w1]],
            bias: array![0.0],
        };
        let l2 = Layer {
            weights: array![[w2], [-w2]],
            bias: array![0.0, 0.0],
        };
        Model::from_layers(ModelKind::Mlp, vec![l1, l2], 1).unwrap()
    }

    #[test]
    fn zero_linear_model_ties_to_class_zero() {
        let m = Model::from_layers(
            ModelKind::Linear,
            vec![Layer {
                weights: Array2::zeros((3, 2)),
                bias: Array1::zeros(3),
            }],
            0,
        )
        .unwrap();
        let (logits, label) = m.forward(array![0.4, -2.0].view()).unwrap();
        assert_eq!(logits, array![0.0, 0.0, 0.0]);
        assert_eq!(label, 0);
    }

    #[test]
    fn binary_linear_prediction() {
        let m = Model::binary_linear(&[2.0, -1.0], 0.0).unwrap();
        let (logits, label) = m.forward(array![1.0, 1.0].view()).unwrap();
        assert_eq!(logits, array![-1.0, 1.0]);
        assert_eq!(label, 1);
    }

    #[test]
    fn relu_kills_negative_input() {
        let m = one_hidden(1.0, 1.0);
        let trace = m.trace(array![-1.0].view()).unwrap();
        assert_eq!(trace.activations[1], array![0.0]);
        assert_eq!(m.representation(array![-1.0].view()).unwrap(), array![0.0]);
    }

    #[test]
    fn representation_cuts() {
        let lin = Model::binary_linear(&[1.0, 2.0], 0.5).unwrap();
        let x = array![0.3, -0.7];
        assert_eq!(lin.representation(x.view()).unwrap(), x);
        let lin_after = Model::from_layers(ModelKind::Linear, lin.layers().to_vec(), 1).unwrap();
        assert_eq!(lin_after.representation(x.view()).unwrap(), lin.forward(x.view()).unwrap().0);
    }

    #[test]
    fn head_after_representation_reproduces_logits() {
        let m = ModelSpec::mlp(3, &[5, 4], 3).init(7).unwrap();
        let x = array![0.1, -0.4, 0.9];
        let rep = m.representation(x.view()).unwrap();
        assert_eq!(m.head(rep.view()).unwrap(), m.forward(x.view()).unwrap().0);
    }

    #[test]
    fn zero_one_has_no_gradient() {
        let m = Model::binary_linear(&[1.0], 0.0).unwrap();
        assert!(matches!(
            m.loss_gradients(array![0.0].view(), 0, LossKind::ZeroOne, true, true),
            Err(Error::NonDifferentiableLoss)
        ));
    }

    #[test]
    fn zero_weights_give_zero_input_gradient() {
        let m = Model::binary_linear(&[0.0, 0.0], 0.0).unwrap();
        let g = m.loss_gradients(array![0.3, 0.2].view(), 1, LossKind::CrossEntropy, true, false).unwrap();
        assert_eq!(g.input_grad.unwrap(), array![0.0, 0.0]);
    }

    #[test]
    fn logistic_gradients_at_zero_logit() {
        let m = Model::binary_linear(&[1.0, 0.0], 0.0).unwrap();
        let g = m
            .loss_gradients(array![0.0, 0.0].view(), 1, LossKind::CrossEntropy, true, true)
            .unwrap();
        assert_relative_eq!(g.loss, std::f64::consts::LN_2, epsilon = 1e-15);
        let p = g.param_grads.unwrap();
        assert_eq!(p.layers[0].weights, Array2::<f64>::zeros((2, 2)));
        assert_eq!(p.layers[0].bias, array![0.5, -0.5]);
    }

    #[test]
    fn dim_checks() {
        let m = Model::binary_linear(&[1.0, 0.0], 0.0).unwrap();
        assert!(m.forward(array![1.0].view()).is_err());
        assert!(m.representation(array![1.0, 2.0, 3.0].view()).is_err());
    }

    #[test]
    fn spec_limits() {
        assert!(ModelSpec::mlp(2, &[8, 8, 8, 8], 2).validate().is_err());
        assert!(ModelSpec::mlp(2, &[2048], 2).validate().is_err());
        let mut s = ModelSpec::mlp(2, &[4], 2);
        s.representation_cut = 3;
        assert!(s.validate().is_err());
    }

    #[test]
    fn init_is_deterministic_and_bounded() {
        let spec = ModelSpec::mlp(4, &[6], 3);
        let a = spec.init(11).unwrap();
        assert_eq!(a, spec.init(11).unwrap());
        assert_ne!(a, spec.init(12).unwrap());
        let bound = (6.0f64 / 10.0).sqrt();
        assert!(a.layers()[0].weights.iter().all(|w| w.abs() <= bound));
    }

    #[test]
    fn json_round_trip_is_exact() {
        let m = ModelSpec::mlp(3, &[4], 2).init(3).unwrap();
        let back = Model::load_json(&m.save_json().unwrap()).unwrap();
        assert_eq!(m, back);
    }

    #[test]
    fn json_rejects_wrong_version() {
        let m = Model::binary_linear(&[1.0], 0.0).unwrap();
        let text = m.save_json().unwrap().replace("\"version\":1", "\"version\":9");
        assert!(Model::load_json(&text).is_err());
    }
}
