use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::layers::{Layer, Mode};
use super::optim::{adam_update, bce_loss, AdamSlot};
use super::{ModelSpec, NeuralError, Tensor, TrainConfig};
use crate::dataset::{DataSplit, FeatureMatrix, FeatureScaler};
use crate::pca::{self, PCAModel};

/// Rows per eval-mode forward pass.
const EVAL_CHUNK: usize = 512;

/// An initialized layer stack.
#[derive(Debug, Clone)]
pub struct Network {
    pub spec: ModelSpec,
    pub layers: Vec<Layer>,
}

impl Network {
    /// Weights are drawn from a ChaCha8 stream seeded with `seed`.
    pub fn init(spec: &ModelSpec, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = spec.layers.iter().map(|l| Layer::init(l, &mut rng)).collect();
        Self { spec: spec.clone(), layers }
    }

    pub fn forward(&mut self, x: Tensor, mode: Mode, rng: &mut ChaCha8Rng) -> Result<Tensor, NeuralError> {
        if x.shape.len() != 2 || x.shape[1] != self.spec.input_width {
            return Err(NeuralError::Shape {
                layer: "input".into(),
                message: format!("expected [batch, {}], got {:?}", self.spec.input_width, x.shape),
            });
        }
        let mut h = x;
        for (layer, spec) in self.layers.iter_mut().zip(&self.spec.layers) {
            h = layer.forward(spec, h, mode, rng)?;
        }
        Ok(h)
    }

    pub fn backward(&mut self, grad: Tensor) {
        let mut g = grad;
        for layer in self.layers.iter_mut().rev() {
            g = layer.backward(g);
        }
    }

    /// Train-mode forward, BCE loss and backward; gradients are left in the layers.
    pub fn loss_and_gradients(&mut self, x: Tensor, y: &[f64], rng: &mut ChaCha8Rng) -> Result<f64, NeuralError> {
        let out = self.forward(x, Mode::Train, rng)?;
        let (loss, grad) = bce_loss(&out.data, y);
        self.backward(Tensor::new(out.shape, grad));
        Ok(loss)
    }

    /// Eval-mode probabilities. No randomness is consumed.
    pub fn probabilities(&self, x: &FeatureMatrix) -> Result<Vec<f64>, NeuralError> {
        let mut net = self.clone();
        let mut unused = ChaCha8Rng::seed_from_u64(0);
        let mut probs = Vec::with_capacity(x.rows);
        let rows: Vec<usize> = (0..x.rows).collect();
        for chunk in rows.chunks(EVAL_CHUNK) {
            probs.extend(net.forward(Tensor::from_rows(x, chunk), Mode::Eval, &mut unused)?.data);
        }
        Ok(probs)
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().flat_map(|l| l.params()).map(Vec::len).sum()
    }
}

/// Scaler and PCA fitted on the training rows the model was trained on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Preprocess {
    pub scaler: FeatureScaler,
    pub pca: PCAModel,
    pub k: usize,
}

impl Preprocess {
    pub fn apply(&self, raw: &FeatureMatrix) -> Result<FeatureMatrix, NeuralError> {
        let scaled = self.scaler.apply(raw).map_err(|e| NeuralError::Shape { layer: "scaler".into(), message: e.to_string() })?;
        pca::transform(&self.pca, &scaled, self.k).map_err(|e| NeuralError::Shape { layer: "pca".into(), message: e.to_string() })
    }
}

#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub network: Network,
    pub preprocess: Option<Preprocess>,
}

impl TrainedModel {
    pub fn spec(&self) -> &ModelSpec {
        &self.network.spec
    }

    /// Applies the stored preprocessing (if any), then [`predict`].
    pub fn predict_raw(&self, raw: &FeatureMatrix, threshold: f64) -> Result<(Vec<f64>, Vec<u8>), NeuralError> {
        match &self.preprocess {
            Some(p) => predict(self, &p.apply(raw)?, threshold),
            None => predict(self, raw, threshold),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub val_loss: f64,
    pub val_acc: f64,
}

pub const HISTORY_HEADER: &str = "epoch,train_loss,train_acc,val_loss,val_acc";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingHistory {
    pub epochs: Vec<EpochMetrics>,
}

impl TrainingHistory {
    pub fn len(&self) -> usize {
        self.epochs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.epochs.is_empty()
    }

    pub fn last(&self) -> Option<&EpochMetrics> {
        self.epochs.last()
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("{HISTORY_HEADER}\n");
        for e in &self.epochs {
            let _ = writeln!(out, "{},{},{},{},{}", e.epoch, e.train_loss, e.train_acc, e.val_loss, e.val_acc);
        }
        out
    }
}

/// Eval-mode `(probabilities, labels)`; a probability equal to the
/// threshold is class 1.
pub fn predict(model: &TrainedModel, x: &FeatureMatrix, threshold: f64) -> Result<(Vec<f64>, Vec<u8>), NeuralError> {
    let probs = model.network.probabilities(x)?;
    let labels = probs.iter().map(|&p| u8::from(p >= threshold)).collect();
    Ok((probs, labels))
}

/// Mean BCE and accuracy (correct / total) in eval mode.
pub fn evaluate(model: &TrainedModel, x: &FeatureMatrix, y: &[u8]) -> Result<(f64, f64), NeuralError> {
    if y.is_empty() {
        return Ok((0.0, 0.0));
    }
    let (probs, labels) = predict(model, x, 0.5)?;
    let targets: Vec<f64> = y.iter().map(|&l| f64::from(l)).collect();
    let (loss, _) = bce_loss(&probs, &targets);
    let correct = labels.iter().zip(y).filter(|(a, b)| a == b).count();
    Ok((loss, correct as f64 / y.len() as f64))
}

/// Trains on `split.train`, measuring `split.val` after every epoch. The
/// split's feature matrices must already have the model's input width.
pub fn train_model(spec: &ModelSpec, split: &DataSplit, cfg: &TrainConfig) -> Result<(TrainedModel, TrainingHistory), NeuralError> {
    cfg.validate()?;
    let train = &split.train;
    if train.is_empty() {
        return Err(NeuralError::Config("empty training set".into()));
    }
    let mut model = TrainedModel { network: Network::init(spec, cfg.seed), preprocess: None };
    // shuffling and dropout draw from a second stream of the same seed
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);

    let mut slots: Vec<AdamSlot> =
        model.network.layers.iter().flat_map(|l| l.params()).map(|p| AdamSlot::new(p.len())).collect();
    let targets: Vec<f64> = train.y.iter().map(|&l| f64::from(l)).collect();
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut step = 0u64;
    let mut history = TrainingHistory::default();

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size) {
            let x = Tensor::from_rows(&train.x, batch);
            let y: Vec<f64> = batch.iter().map(|&i| targets[i]).collect();
            let loss = model.network.loss_and_gradients(x, &y, &mut rng)?;
            if !loss.is_finite() {
                return Err(NeuralError::Divergence(epoch));
            }
            step += 1;
            let mut slot = slots.iter_mut();
            for layer in &mut model.network.layers {
                for (p, g) in layer.params_and_grads() {
                    adam_update(p, g, slot.next().expect("one slot per tensor"), step, cfg.learning_rate, &cfg.adam);
                }
            }
        }
        let (train_loss, train_acc) = evaluate(&model, &train.x, &train.y)?;
        let (val_loss, val_acc) = evaluate(&model, &split.val.x, &split.val.y)?;
        if !(train_loss.is_finite() && val_loss.is_finite()) {
            return Err(NeuralError::Divergence(epoch));
        }
        history.epochs.push(EpochMetrics { epoch, train_loss, train_acc, val_loss, val_acc });
    }
    Ok((model, history))
}

/// Largest relative error between backprop gradients and central finite
/// differences over every parameter, with dropout removed and BatchNorm in
/// train mode on the given batch. Relative error is
/// `|a - n| / max(|a|, |n|, 1e-6)`.
pub fn gradient_check(spec: &ModelSpec, x: &FeatureMatrix, y: &[u8], eps: f64, seed: u64) -> Result<f64, NeuralError> {
    let spec = spec.without_dropout();
    let mut net = Network::init(&spec, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let targets: Vec<f64> = y.iter().map(|&l| f64::from(l)).collect();
    let input = Tensor::from_matrix(x);
    net.loss_and_gradients(input.clone(), &targets, &mut rng)?;
    let analytic: Vec<Vec<Vec<f64>>> = net.layers.iter().map(|l| l.grads().into_iter().cloned().collect()).collect();

    let mut worst: f64 = 0.0;
    for li in 0..net.layers.len() {
        for (pi, grads) in analytic[li].iter().enumerate() {
            for (k, &a) in grads.iter().enumerate() {
                let original = net.layers[li].params()[pi][k];
                let mut loss_at = |v: f64, net: &mut Network| -> Result<f64, NeuralError> {
                    net.layers[li].params_mut()[pi][k] = v;
                    let out = net.forward(input.clone(), Mode::Train, &mut rng)?;
                    Ok(bce_loss(&out.data, &targets).0)
                };
                let plus = loss_at(original + eps, &mut net)?;
                let minus = loss_at(original - eps, &mut net)?;
                net.layers[li].params_mut()[pi][k] = original;
                let numeric = (plus - minus) / (2.0 * eps);
                let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
                worst = worst.max(rel);
            }
        }
    }
    Ok(worst)
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    spec: ModelSpec,
    /// Per layer: parameters, then running statistics, in declaration order.
    arrays: Vec<Vec<f64>>,
    preprocess: Option<Preprocess>,
}

pub fn model_to_json(model: &TrainedModel) -> String {
    let arrays = model
        .network
        .layers
        .iter()
        .flat_map(|l| l.params().into_iter().chain(l.buffers()).cloned())
        .collect();
    let file = ModelFile { spec: model.network.spec.clone(), arrays, preprocess: model.preprocess.clone() };
    serde_json::to_string(&file).expect("model serializes") + "\n"
}

pub fn model_from_json(text: &str) -> Result<TrainedModel, NeuralError> {
    let file: ModelFile = serde_json::from_str(text).map_err(|e| NeuralError::Format(e.to_string()))?;
    let mut network = Network::init(&file.spec, 0);
    let mut arrays = file.arrays.into_iter();
    let mut fill = |slot: &mut Vec<f64>| -> Result<(), NeuralError> {
        let a = arrays.next().ok_or_else(|| NeuralError::Format("too few parameter arrays".into()))?;
        if a.len() != slot.len() {
            return Err(NeuralError::Format(format!("parameter array of length {} where {} expected", a.len(), slot.len())));
        }
        *slot = a;
        Ok(())
    };
    for layer in &mut network.layers {
        for p in layer.params_mut() {
            fill(p)?;
        }
        for b in layer.buffers_mut() {
            fill(b)?;
        }
    }
    if arrays.next().is_some() {
        return Err(NeuralError::Format("too many parameter arrays".into()));
    }
    Ok(TrainedModel { network, preprocess: file.preprocess })
}

pub fn save_model(model: &TrainedModel, path: &Path) -> Result<(), NeuralError> {
    std::fs::write(path, model_to_json(model))
        .map_err(|e| NeuralError::Io { path: path.display().to_string(), message: e.to_string() })
}

pub fn load_model(path: &Path) -> Result<TrainedModel, NeuralError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| NeuralError::Io { path: path.display().to_string(), message: e.to_string() })?;
    model_from_json(&text)
}
