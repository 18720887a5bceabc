use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{Architecture, Classifier, LabeledDataset, Model};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Per-class loss weighting.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ClassWeighting {
    Uniform,
    MedianFrequency,
}

impl fmt::Display for ClassWeighting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ClassWeighting::Uniform => "uniform",
            ClassWeighting::MedianFrequency => "median-frequency",
        })
    }
}

impl FromStr for ClassWeighting {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(ClassWeighting::Uniform),
            "median-frequency" => Ok(ClassWeighting::MedianFrequency),
            _ => Err(Error::Config(format!("unknown class weighting `{s}`"))),
        }
    }
}

/// Mini-batch SGD hyperparameters.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub seed: u64,
    pub weighting: ClassWeighting,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 60,
            batch_size: 32,
            learning_rate: 0.05,
            momentum: 0.9,
            weight_decay: 1e-4,
            seed: 0,
            weighting: ClassWeighting::MedianFrequency,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be positive".into()));
        }
        if !(self.learning_rate > 0.0) || !(self.weight_decay > 0.0) {
            return Err(Error::Config("learning rate and weight decay must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Config("momentum must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

/// Result of [`train`].
#[derive(Clone, Debug)]
pub struct TrainedModel<T> {
    pub model: Model<T>,
    pub train_accuracy: f64,
    /// Weighted mean cross-entropy of each epoch.
    pub epoch_losses: Vec<f64>,
}

/// `median(count) / count_c` for every class, which equals `median(freq) / freq_c`.
pub fn class_weights_median_frequency<T: Real>(labels: &[usize], n_classes: usize) -> Result<Vec<T>> {
    let mut counts = vec![0usize; n_classes];
    for &l in labels {
        if l >= n_classes {
            return Err(Error::Precondition(format!("label {l} out of range for {n_classes} classes")));
        }
        counts[l] += 1;
    }
    if let Some(empty) = counts.iter().position(|&c| c == 0) {
        return Err(Error::EmptyClass(empty));
    }
    let mut sorted: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
    sorted.sort_by(f64::total_cmp);
    let mid = sorted.len() / 2;
    let median = if sorted.len() % 2 == 1 { sorted[mid] } else { 0.5 * (sorted[mid - 1] + sorted[mid]) };
    Ok(counts.iter().map(|&c| T::lit(median / c as f64)).collect())
}

/// Fraction of `dataset` classified correctly.
pub fn accuracy<T: Real, C: Classifier<T> + ?Sized>(clf: &C, dataset: &LabeledDataset<T>) -> f64 {
    if dataset.is_empty() {
        return 0.0;
    }
    let correct = dataset.images.iter().zip(&dataset.labels).filter(|(im, &l)| clf.predict(im) == l).count();
    correct as f64 / dataset.len() as f64
}

fn init_model<T: Real>(arch: Architecture, inputs: usize, classes: usize, rng: &mut ChaCha8Rng) -> Model<T> {
    let mut model = Model::zeros(arch, inputs, classes);
    let lay = model.layout();
    let mut fill = |params: &mut [T], std: f64| {
        for v in params {
            let z: f64 = StandardNormal.sample(rng);
            *v = T::lit(z * std);
        }
    };
    let params = model.params_mut();
    match arch {
        Architecture::Linear => fill(&mut params[..lay.b1], 0.01),
        Architecture::Mlp { hidden } => {
            fill(&mut params[lay.w1..lay.b1], (1.0 / inputs as f64).sqrt());
            fill(&mut params[lay.w2..lay.b2], (1.0 / hidden as f64).sqrt());
        }
    }
    model
}

/// Accumulate the weighted cross-entropy gradient of one sample; returns its loss.
fn accumulate<T: Real>(model: &Model<T>, x: &[T], label: usize, weight: T, grad: &mut [T]) -> T {
    let lay = model.layout();
    let p = model.inputs;
    let hidden = match model.arch {
        Architecture::Linear => Vec::new(),
        Architecture::Mlp { .. } => model.hidden(x, &lay),
    };
    let features: &[T] = if hidden.is_empty() { x } else { &hidden };
    let logits = model.output(features, &lay);
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let exps: Vec<T> = logits.iter().map(|&s| (s - max).exp()).collect();
    let total: T = exps.iter().copied().sum();
    let loss = weight * (total.ln() + max - logits[label]);
    let dlogits: Vec<T> = exps
        .iter()
        .enumerate()
        .map(|(c, &e)| weight * (e / total - if c == label { T::one() } else { T::zero() }))
        .collect();
    let (w_out, b_out, n) = match model.arch {
        Architecture::Linear => (lay.w1, lay.b1, p),
        Architecture::Mlp { hidden } => (lay.w2, lay.b2, hidden),
    };
    for (c, &d) in dlogits.iter().enumerate() {
        grad[b_out + c] += d;
        for (g, &f) in grad[w_out + c * n..w_out + (c + 1) * n].iter_mut().zip(features) {
            *g += d * f;
        }
    }
    if let Architecture::Mlp { hidden: h } = model.arch {
        for j in 0..h {
            let back: T = dlogits.iter().enumerate().map(|(c, &d)| d * model.params[lay.w2 + c * h + j]).sum();
            let dz = back * (T::one() - hidden[j] * hidden[j]);
            grad[lay.b1 + j] += dz;
            for (g, &v) in grad[lay.w1 + j * p..lay.w1 + (j + 1) * p].iter_mut().zip(x) {
                *g += dz * v;
            }
        }
    }
    loss
}

/// Minimize weighted cross-entropy by mini-batch SGD with momentum.
///
/// Deterministic for a given `cfg.seed`: initialization and shuffling draw from one
/// ChaCha8 stream and samples are processed in a fixed order.
pub fn train<T: Real>(dataset: &LabeledDataset<T>, arch: Architecture, cfg: &TrainConfig) -> Result<TrainedModel<T>> {
    cfg.validate()?;
    let (h, w, c) = dataset.image_shape()?;
    let inputs = h * w * c;
    let classes = dataset.n_classes();
    let class_weights: Vec<T> = match cfg.weighting {
        ClassWeighting::Uniform => vec![T::one(); classes],
        ClassWeighting::MedianFrequency => class_weights_median_frequency(&dataset.labels, classes)?,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut model: Model<T> = init_model(arch, inputs, classes, &mut rng);
    let lay = model.layout();
    let decayed: Vec<bool> = (0..lay.len)
        .map(|i| match arch {
            Architecture::Linear => i < lay.b1,
            Architecture::Mlp { .. } => i < lay.b1 || (lay.w2..lay.b2).contains(&i),
        })
        .collect();
    let lr = T::lit(cfg.learning_rate);
    let mu = T::lit(cfg.momentum);
    let wd = T::lit(cfg.weight_decay);
    let mut velocity = vec![T::zero(); lay.len];
    let mut grad = vec![T::zero(); lay.len];
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    // Past this the next update overflows; treat it as non-finite already.
    let explode = T::max_value().sqrt();
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = T::zero();
        let mut epoch_weight = T::zero();
        for batch in order.chunks(cfg.batch_size) {
            grad.iter_mut().for_each(|g| *g = T::zero());
            let mut batch_loss = T::zero();
            let mut batch_weight = T::zero();
            for &i in batch {
                let label = dataset.labels[i];
                let weight = class_weights[label];
                batch_loss += accumulate(&model, dataset.images[i].data(), label, weight, &mut grad);
                batch_weight += weight;
            }
            if !batch_loss.is_finite() || batch_loss > explode {
                return Err(Error::Diverged { epoch, loss: batch_loss.to_f64_lossy() });
            }
            epoch_loss += batch_loss;
            epoch_weight += batch_weight;
            let inv = batch_weight.recip();
            for (i, param) in model.params_mut().iter_mut().enumerate() {
                let mut g = grad[i] * inv;
                if decayed[i] {
                    g += wd * *param;
                }
                velocity[i] = mu * velocity[i] + g;
                *param -= lr * velocity[i];
            }
        }
        let mean = (epoch_loss / epoch_weight).to_f64_lossy();
        if !mean.is_finite() || model.params().iter().any(|v| !v.is_finite()) {
            return Err(Error::Diverged { epoch, loss: mean });
        }
        epoch_losses.push(mean);
    }
    let train_accuracy = accuracy(&model, dataset);
    Ok(TrainedModel { model, train_accuracy, epoch_losses })
}
