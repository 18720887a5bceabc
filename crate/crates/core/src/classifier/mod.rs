//! Differentiable classifiers: the interface the crafting loop needs, and two
//! built-in models trained with weighted cross-entropy.

mod train;

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::image::Image;
use crate::scalar::Real;

pub use train::{accuracy, class_weights_median_frequency, train, ClassWeighting, TrainConfig, TrainedModel};

/// A classifier exposing pre-softmax scores and their input gradients.
///
/// `f = score_l − score_k` is the decision function for the pair `(l, k)`.
pub trait Classifier<T: Real>: Send + Sync {
    fn n_classes(&self) -> usize;

    /// Number of input values (`H·W·C`).
    fn input_len(&self) -> usize;

    /// Pre-softmax scores of a flattened image.
    fn logits(&self, x: &[T]) -> Vec<T>;

    /// `∂(score_l − score_k)/∂x` for a flattened image; arguments already validated.
    fn margin_gradient(&self, x: &[T], l: usize, k: usize) -> Vec<T>;

    fn scores(&self, img: &Image<T>) -> Vec<T> {
        self.logits(img.data())
    }

    /// Class with the highest score; ties resolve to the lowest index.
    fn predict(&self, img: &Image<T>) -> usize {
        argmax(&self.scores(img))
    }

    /// `score_l − score_k`.
    fn margin(&self, img: &Image<T>, l: usize, k: usize) -> T {
        let s = self.scores(img);
        s[l] - s[k]
    }

    /// Gradient of `score_l − score_k` with respect to every pixel.
    fn input_gradient(&self, img: &Image<T>, l: usize, k: usize) -> Result<Vec<T>> {
        let n = self.n_classes();
        if l >= n || k >= n {
            return Err(Error::Precondition(format!("class pair ({l}, {k}) out of range for {n} classes")));
        }
        if l == k {
            return Err(Error::Precondition(format!("input gradient needs two distinct classes, got ({l}, {l})")));
        }
        if img.len() != self.input_len() {
            return Err(Error::DimensionMismatch { expected: self.input_len(), got: img.len() });
        }
        Ok(self.margin_gradient(img.data(), l, k))
    }
}

pub fn argmax<T: Real>(values: &[T]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Built-in architectures.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Architecture {
    /// Multinomial logistic regression.
    Linear,
    /// One tanh hidden layer.
    Mlp { hidden: usize },
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Architecture::Linear => f.write_str("linear"),
            Architecture::Mlp { hidden } => write!(f, "mlp:{hidden}"),
        }
    }
}

impl FromStr for Architecture {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.split_once(':') {
            None if s == "linear" => Ok(Architecture::Linear),
            Some(("mlp", h)) => match h.parse::<usize>() {
                Ok(hidden) if hidden > 0 => Ok(Architecture::Mlp { hidden }),
                _ => Err(Error::Config(format!("bad hidden width in `{s}`"))),
            },
            _ => Err(Error::Config(format!("unknown architecture `{s}` (expected `linear` or `mlp:<hidden>`)"))),
        }
    }
}

/// A built-in model with all parameters in one flat buffer.
///
/// Layout: `[W1 (H×P) | b1 (H) | W2 (K×H) | b2 (K)]` for the MLP and
/// `[W (K×P) | b (K)]` for the linear model.
#[derive(Clone, Debug, PartialEq)]
pub struct Model<T> {
    arch: Architecture,
    inputs: usize,
    classes: usize,
    params: Vec<T>,
}

/// Offsets of the parameter blocks.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Layout {
    pub w1: usize,
    pub b1: usize,
    pub w2: usize,
    pub b2: usize,
    pub len: usize,
    pub hidden: usize,
}

impl<T: Real> Model<T> {
    pub fn zeros(arch: Architecture, inputs: usize, classes: usize) -> Self {
        let mut m = Model { arch, inputs, classes, params: Vec::new() };
        m.params = vec![T::zero(); m.layout().len];
        m
    }

    /// Model from named tensors as produced by [`Model::tensors`].
    pub fn from_tensors(arch: Architecture, inputs: usize, classes: usize, tensors: &[(String, Vec<usize>, Vec<T>)]) -> Result<Self> {
        let mut model = Self::zeros(arch, inputs, classes);
        let expected = model.tensor_shapes();
        if tensors.len() != expected.len() {
            return Err(Error::DimensionMismatch { expected: expected.len(), got: tensors.len() });
        }
        let mut params = Vec::with_capacity(model.params.len());
        for ((name, dims, data), (want_name, want_dims)) in tensors.iter().zip(&expected) {
            if name != want_name || dims != want_dims || data.len() != dims.iter().product::<usize>() {
                return Err(Error::Precondition(format!("tensor `{name}` {dims:?} does not match `{want_name}` {want_dims:?}")));
            }
            params.extend_from_slice(data);
        }
        if params.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("model parameters"));
        }
        model.params = params;
        Ok(model)
    }

    pub fn arch(&self) -> Architecture {
        self.arch
    }

    pub fn inputs(&self) -> usize {
        self.inputs
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn params(&self) -> &[T] {
        &self.params
    }

    pub(crate) fn params_mut(&mut self) -> &mut [T] {
        &mut self.params
    }

    pub(crate) fn layout(&self) -> Layout {
        let (p, k) = (self.inputs, self.classes);
        match self.arch {
            Architecture::Linear => Layout { w1: 0, b1: k * p, w2: 0, b2: 0, len: k * p + k, hidden: 0 },
            Architecture::Mlp { hidden: h } => {
                let b1 = h * p;
                let w2 = b1 + h;
                let b2 = w2 + k * h;
                Layout { w1: 0, b1, w2, b2, len: b2 + k, hidden: h }
            }
        }
    }

    /// Names and shapes of the parameter tensors, in buffer order.
    pub fn tensor_shapes(&self) -> Vec<(String, Vec<usize>)> {
        let (p, k) = (self.inputs, self.classes);
        match self.arch {
            Architecture::Linear => vec![("weight".into(), vec![k, p]), ("bias".into(), vec![k])],
            Architecture::Mlp { hidden: h } => vec![
                ("hidden.weight".into(), vec![h, p]),
                ("hidden.bias".into(), vec![h]),
                ("output.weight".into(), vec![k, h]),
                ("output.bias".into(), vec![k]),
            ],
        }
    }

    /// Parameters split into named tensors.
    pub fn tensors(&self) -> Vec<(String, Vec<usize>, Vec<T>)> {
        let mut offset = 0;
        self.tensor_shapes()
            .into_iter()
            .map(|(name, dims)| {
                let n: usize = dims.iter().product();
                let data = self.params[offset..offset + n].to_vec();
                offset += n;
                (name, dims, data)
            })
            .collect()
    }

    /// Hidden activations `tanh(W1 x + b1)`; empty for the linear model.
    pub(crate) fn hidden(&self, x: &[T], lay: &Layout) -> Vec<T> {
        let p = self.inputs;
        (0..lay.hidden)
            .map(|j| {
                let row = &self.params[lay.w1 + j * p..lay.w1 + (j + 1) * p];
                let z = row.iter().zip(x).map(|(&w, &v)| w * v).sum::<T>() + self.params[lay.b1 + j];
                z.tanh()
            })
            .collect()
    }

    /// Output scores from the last layer's input (`x` for linear, hidden units for MLP).
    pub(crate) fn output(&self, features: &[T], lay: &Layout) -> Vec<T> {
        let (w, b, n) = match self.arch {
            Architecture::Linear => (lay.w1, lay.b1, self.inputs),
            Architecture::Mlp { hidden } => (lay.w2, lay.b2, hidden),
        };
        (0..self.classes)
            .map(|c| {
                let row = &self.params[w + c * n..w + (c + 1) * n];
                row.iter().zip(features).map(|(&a, &v)| a * v).sum::<T>() + self.params[b + c]
            })
            .collect()
    }
}

impl<T: Real> Classifier<T> for Model<T> {
    fn n_classes(&self) -> usize {
        self.classes
    }

    fn input_len(&self) -> usize {
        self.inputs
    }

    fn logits(&self, x: &[T]) -> Vec<T> {
        let lay = self.layout();
        match self.arch {
            Architecture::Linear => self.output(x, &lay),
            Architecture::Mlp { .. } => self.output(&self.hidden(x, &lay), &lay),
        }
    }

    fn margin_gradient(&self, x: &[T], l: usize, k: usize) -> Vec<T> {
        let lay = self.layout();
        let p = self.inputs;
        match self.arch {
            Architecture::Linear => {
                let (wl, wk) = (&self.params[l * p..(l + 1) * p], &self.params[k * p..(k + 1) * p]);
                wl.iter().zip(wk).map(|(&a, &b)| a - b).collect()
            }
            Architecture::Mlp { hidden: h } => {
                let act = self.hidden(x, &lay);
                let mut grad = vec![T::zero(); p];
                for j in 0..h {
                    let dh = self.params[lay.w2 + l * h + j] - self.params[lay.w2 + k * h + j];
                    let dz = dh * (T::one() - act[j] * act[j]);
                    if dz == T::zero() {
                        continue;
                    }
                    let row = &self.params[lay.w1 + j * p..lay.w1 + (j + 1) * p];
                    for (g, &w) in grad.iter_mut().zip(row) {
                        *g += dz * w;
                    }
                }
                grad
            }
        }
    }
}

/// Images with class labels.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledDataset<T> {
    pub images: Vec<Image<T>>,
    pub labels: Vec<usize>,
    pub class_names: Vec<String>,
}

impl<T: Real> LabeledDataset<T> {
    pub fn new(images: Vec<Image<T>>, labels: Vec<usize>, class_names: Vec<String>) -> Result<Self> {
        if images.len() != labels.len() {
            return Err(Error::DimensionMismatch { expected: images.len(), got: labels.len() });
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= class_names.len()) {
            return Err(Error::Precondition(format!("label {bad} out of range for {} classes", class_names.len())));
        }
        Ok(LabeledDataset { images, labels, class_names })
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes()];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// Shape shared by every image, or an error if they differ.
    pub fn image_shape(&self) -> Result<(usize, usize, usize)> {
        let first = self.images.first().ok_or_else(|| Error::Precondition("empty dataset".into()))?;
        let shape = first.shape();
        if let Some(other) = self.images.iter().find(|im| im.shape() != shape) {
            return Err(Error::Precondition(format!("mixed image shapes {shape:?} and {:?}", other.shape())));
        }
        Ok(shape)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_model(arch: Architecture, inputs: usize, classes: usize, seed: u64) -> Model<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m = Model::zeros(arch, inputs, classes);
        for v in m.params_mut() {
            *v = rng.random_range(-0.5..0.5);
        }
        m
    }

    #[test]
    fn architecture_parses() {
        assert_eq!("linear".parse::<Architecture>().unwrap(), Architecture::Linear);
        assert_eq!("mlp:16".parse::<Architecture>().unwrap(), Architecture::Mlp { hidden: 16 });
        assert!("mlp:0".parse::<Architecture>().is_err());
        assert!("cnn".parse::<Architecture>().is_err());
        assert_eq!(Architecture::Mlp { hidden: 7 }.to_string(), "mlp:7");
    }

    #[test]
    fn linear_gradient_is_weight_difference() {
        let m = random_model(Architecture::Linear, 16, 3, 1);
        let img = Image::from_fn(4, 4, |r, c| (r * 4 + c) as f64 / 16.0);
        let g = m.input_gradient(&img, 2, 0).unwrap();
        for i in 0..16 {
            assert_eq!(g[i], m.params()[2 * 16 + i] - m.params()[i]);
        }
        let other = Image::constant(4, 4, 1, 0.9);
        assert_eq!(m.input_gradient(&other, 2, 0).unwrap(), g);
    }

    #[test]
    fn mlp_gradient_matches_finite_differences() {
        let m = random_model(Architecture::Mlp { hidden: 8 }, 36, 3, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let img = Image::from_fn(6, 6, |_, _| rng.random::<f64>());
        let g = m.input_gradient(&img, 1, 2).unwrap();
        let h = 1e-4;
        for i in 0..36 {
            let mut plus = img.clone();
            plus.data_mut()[i] += h;
            let mut minus = img.clone();
            minus.data_mut()[i] -= h;
            let fd = (m.margin(&plus, 1, 2) - m.margin(&minus, 1, 2)) / (2.0 * h);
            assert!((g[i] - fd).abs() <= 1e-4 * fd.abs().max(1e-3), "pixel {i}: {} vs {fd}", g[i]);
        }
    }

    #[test]
    fn gradient_preconditions() {
        let m = random_model(Architecture::Linear, 4, 3, 4);
        let img = Image::constant(2, 2, 1, 0.1);
        assert!(matches!(m.input_gradient(&img, 1, 1), Err(Error::Precondition(_))));
        assert!(matches!(m.input_gradient(&img, 3, 1), Err(Error::Precondition(_))));
        let wrong = Image::constant(3, 3, 1, 0.1);
        assert!(matches!(m.input_gradient(&wrong, 0, 1), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn tensors_round_trip() {
        let m = random_model(Architecture::Mlp { hidden: 5 }, 9, 2, 5);
        let back = Model::from_tensors(m.arch(), 9, 2, &m.tensors()).unwrap();
        assert_eq!(back, m);
        let mut broken = m.tensors();
        broken[0].1 = vec![9, 5];
        assert!(Model::<f64>::from_tensors(m.arch(), 9, 2, &broken).is_err());
    }

    #[test]
    fn dataset_validation() {
        let img = Image::<f64>::zeros(2, 2, 1);
        assert!(LabeledDataset::new(vec![img.clone()], vec![2], vec!["a".into(), "b".into()]).is_err());
        assert!(LabeledDataset::new(vec![img.clone()], vec![], vec!["a".into()]).is_err());
        let ds = LabeledDataset::new(vec![img.clone(), Image::zeros(3, 2, 1)], vec![0, 1], vec!["a".into(), "b".into()]).unwrap();
        assert!(ds.image_shape().is_err());
    }
}
