//! From-scratch layers, the dense and convolutional classifiers, training and
//! prediction. Everything runs in `f64`.

mod layers;
mod model;
mod optim;
mod tensor;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use layers::{Layer, Mode, BN_EPSILON, BN_MOMENTUM};
pub use model::{
    evaluate, gradient_check, load_model, model_from_json, model_to_json, predict, save_model, train_model, EpochMetrics, Network, Preprocess,
    TrainedModel, TrainingHistory, HISTORY_HEADER,
};
pub use optim::{adam_update, bce_loss, AdamConfig, AdamSlot, PROB_CLAMP};
pub use tensor::Tensor;

#[derive(Debug, thiserror::Error)]
pub enum NeuralError {
    #[error("shape mismatch in {layer}: {message}")]
    Shape { layer: String, message: String },
    #[error("divergence at epoch {0}")]
    Divergence(usize),
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("cannot access {path}: {message}")]
    Io { path: String, message: String },
    #[error("malformed model file: {0}")]
    Format(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Dnn,
    Cnn,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Dnn => "dnn",
            ModelKind::Cnn => "cnn",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "dnn" => Ok(ModelKind::Dnn),
            "cnn" => Ok(ModelKind::Cnn),
            other => Err(format!("unknown model {other:?} (expected dnn or cnn)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum LayerSpec {
    Dense { input: usize, output: usize },
    BatchNorm { features: usize },
    Relu,
    Dropout { p: f64 },
    Conv1d { in_channels: usize, out_channels: usize, kernel: usize, padding: usize },
    Flatten,
    Sigmoid,
}

impl LayerSpec {
    pub fn name(&self) -> String {
        match self {
            LayerSpec::Dense { input, output } => format!("Dense({input}->{output})"),
            LayerSpec::BatchNorm { features } => format!("BatchNorm({features})"),
            LayerSpec::Relu => "ReLU".into(),
            LayerSpec::Dropout { p } => format!("Dropout({p})"),
            LayerSpec::Conv1d { in_channels, out_channels, kernel, .. } => {
                format!("Conv1D({in_channels}->{out_channels}, k={kernel})")
            }
            LayerSpec::Flatten => "Flatten".into(),
            LayerSpec::Sigmoid => "Sigmoid".into(),
        }
    }
}

/// Declarative layer stack. Inputs are `[batch, input_width]`; a network
/// whose first layer is a convolution sees each sample as one channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub input_width: usize,
    pub layers: Vec<LayerSpec>,
}

impl ModelSpec {
    pub fn new(kind: ModelKind, input_width: usize) -> Self {
        match kind {
            ModelKind::Dnn => Self::dnn(input_width),
            ModelKind::Cnn => Self::cnn(input_width),
        }
    }

    /// 128 → 64 → 32 hidden units, each followed by BatchNorm, ReLU and
    /// Dropout(0.5), then a single sigmoid output.
    pub fn dnn(d: usize) -> Self {
        use LayerSpec::*;
        let mut layers = Vec::new();
        let mut input = d;
        for output in [128, 64, 32] {
            layers.extend([Dense { input, output }, BatchNorm { features: output }, Relu, Dropout { p: 0.5 }]);
            input = output;
        }
        layers.extend([Dense { input, output: 1 }, Sigmoid]);
        Self { kind: ModelKind::Dnn, input_width: d, layers }
    }

    /// Two same-padded convolutions (2 then 4 filters, kernel 3) with
    /// BatchNorm, ReLU and Dropout(0.6), then Dense(4d → 4) → ReLU → Dense(4 → 1).
    pub fn cnn(d: usize) -> Self {
        use LayerSpec::*;
        let conv = |i, o| Conv1d { in_channels: i, out_channels: o, kernel: 3, padding: 1 };
        let layers = vec![
            conv(1, 2),
            BatchNorm { features: 2 },
            Relu,
            Dropout { p: 0.6 },
            conv(2, 4),
            BatchNorm { features: 4 },
            Relu,
            Dropout { p: 0.6 },
            Flatten,
            Dense { input: 4 * d, output: 4 },
            Relu,
            Dense { input: 4, output: 1 },
            Sigmoid,
        ];
        Self { kind: ModelKind::Cnn, input_width: d, layers }
    }

    /// Same stack with every dropout probability set to zero.
    pub fn without_dropout(&self) -> Self {
        let mut s = self.clone();
        for l in &mut s.layers {
            if let LayerSpec::Dropout { p } = l {
                *p = 0.0;
            }
        }
        s
    }

    pub fn is_convolutional(&self) -> bool {
        matches!(self.layers.first(), Some(LayerSpec::Conv1d { .. }))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub adam: AdamConfig,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { epochs: 1000, batch_size: 4, learning_rate: 0.001, adam: AdamConfig::default(), seed: 0 }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), NeuralError> {
        if self.epochs == 0 {
            return Err(NeuralError::Config("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(NeuralError::Config("batch_size must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(NeuralError::Config(format!("learning_rate must be positive, got {}", self.learning_rate)));
        }
        Ok(())
    }
}
