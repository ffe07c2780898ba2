use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{LayerSpec, NeuralError, Tensor};

pub const BN_EPSILON: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// A layer with its parameters, gradients and the cache of its last
/// forward pass.
#[derive(Debug, Clone)]
pub enum Layer {
    Dense { input: usize, output: usize, w: Vec<f64>, b: Vec<f64>, dw: Vec<f64>, db: Vec<f64>, x: Option<Tensor> },
    BatchNorm(BatchNorm),
    Relu { x: Option<Tensor> },
    Dropout { p: f64, mask: Option<Vec<f64>> },
    Conv1d(Conv1d),
    Flatten { shape: Vec<usize> },
    Sigmoid { y: Option<Tensor> },
}

#[derive(Debug, Clone)]
pub struct BatchNorm {
    pub features: usize,
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
    dgamma: Vec<f64>,
    dbeta: Vec<f64>,
    cache: Option<BnCache>,
}

#[derive(Debug, Clone)]
struct BnCache {
    shape: Vec<usize>,
    x_hat: Vec<f64>,
    inv_std: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Conv1d {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub padding: usize,
    /// `[out, in, kernel]`
    pub w: Vec<f64>,
    pub b: Vec<f64>,
    dw: Vec<f64>,
    db: Vec<f64>,
    x: Option<Tensor>,
}

fn shape_err(spec: &LayerSpec, message: String) -> NeuralError {
    NeuralError::Shape { layer: spec.name(), message }
}

fn uniform_fan_in(n: usize, fan_in: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let bound = 1.0 / (fan_in as f64).sqrt();
    (0..n).map(|_| rng.gen_range(-bound..=bound)).collect()
}

/// `(outer, channels, inner)` view: `[B, F]` is `(B, F, 1)`, `[B, C, L]` is itself.
fn channel_view(shape: &[usize]) -> (usize, usize, usize) {
    match shape {
        [b, f] => (*b, *f, 1),
        [b, c, l] => (*b, *c, *l),
        _ => (0, 0, 0),
    }
}

impl Layer {
    pub fn init(spec: &LayerSpec, rng: &mut ChaCha8Rng) -> Self {
        match *spec {
            LayerSpec::Dense { input, output } => Layer::Dense {
                input,
                output,
                w: uniform_fan_in(input * output, input, rng),
                b: vec![0.0; output],
                dw: vec![0.0; input * output],
                db: vec![0.0; output],
                x: None,
            },
            LayerSpec::BatchNorm { features } => Layer::BatchNorm(BatchNorm {
                features,
                gamma: vec![1.0; features],
                beta: vec![0.0; features],
                running_mean: vec![0.0; features],
                running_var: vec![1.0; features],
                dgamma: vec![0.0; features],
                dbeta: vec![0.0; features],
                cache: None,
            }),
            LayerSpec::Relu => Layer::Relu { x: None },
            LayerSpec::Dropout { p } => Layer::Dropout { p, mask: None },
            LayerSpec::Conv1d { in_channels, out_channels, kernel, padding } => {
                let n = out_channels * in_channels * kernel;
                Layer::Conv1d(Conv1d {
                    in_channels,
                    out_channels,
                    kernel,
                    padding,
                    w: uniform_fan_in(n, in_channels * kernel, rng),
                    b: vec![0.0; out_channels],
                    dw: vec![0.0; n],
                    db: vec![0.0; out_channels],
                    x: None,
                })
            }
            LayerSpec::Flatten => Layer::Flatten { shape: Vec::new() },
            LayerSpec::Sigmoid => Layer::Sigmoid { y: None },
        }
    }

    /// Parameter tensors in declaration order. BatchNorm running statistics
    /// are state, not parameters, and are listed by [`Layer::buffers`].
    pub fn params(&self) -> Vec<&Vec<f64>> {
        match self {
            Layer::Dense { w, b, .. } => vec![w, b],
            Layer::BatchNorm(bn) => vec![&bn.gamma, &bn.beta],
            Layer::Conv1d(c) => vec![&c.w, &c.b],
            _ => Vec::new(),
        }
    }

    pub fn params_mut(&mut self) -> Vec<&mut Vec<f64>> {
        match self {
            Layer::Dense { w, b, .. } => vec![w, b],
            Layer::BatchNorm(bn) => vec![&mut bn.gamma, &mut bn.beta],
            Layer::Conv1d(c) => vec![&mut c.w, &mut c.b],
            _ => Vec::new(),
        }
    }

    /// Parameters paired with the gradients of the last backward pass.
    pub fn params_and_grads(&mut self) -> Vec<(&mut Vec<f64>, &Vec<f64>)> {
        match self {
            Layer::Dense { w, b, dw, db, .. } => vec![(w, &*dw), (b, &*db)],
            Layer::BatchNorm(bn) => vec![(&mut bn.gamma, &bn.dgamma), (&mut bn.beta, &bn.dbeta)],
            Layer::Conv1d(c) => vec![(&mut c.w, &c.dw), (&mut c.b, &c.db)],
            _ => Vec::new(),
        }
    }

    pub fn grads(&self) -> Vec<&Vec<f64>> {
        match self {
            Layer::Dense { dw, db, .. } => vec![dw, db],
            Layer::BatchNorm(bn) => vec![&bn.dgamma, &bn.dbeta],
            Layer::Conv1d(c) => vec![&c.dw, &c.db],
            _ => Vec::new(),
        }
    }

    pub fn buffers(&self) -> Vec<&Vec<f64>> {
        match self {
            Layer::BatchNorm(bn) => vec![&bn.running_mean, &bn.running_var],
            _ => Vec::new(),
        }
    }

    pub fn buffers_mut(&mut self) -> Vec<&mut Vec<f64>> {
        match self {
            Layer::BatchNorm(bn) => vec![&mut bn.running_mean, &mut bn.running_var],
            _ => Vec::new(),
        }
    }

    pub fn forward(&mut self, spec: &LayerSpec, x: Tensor, mode: Mode, rng: &mut ChaCha8Rng) -> Result<Tensor, NeuralError> {
        let train = mode == Mode::Train;
        match self {
            Layer::Dense { input, output, w, b, x: cache, .. } => {
                if x.shape.len() != 2 || x.shape[1] != *input {
                    return Err(shape_err(spec, format!("expected [batch, {input}], got {:?}", x.shape)));
                }
                let (n, i_dim, o_dim) = (x.batch(), *input, *output);
                let mut y = vec![0.0; n * o_dim];
                for s in 0..n {
                    let xs = &x.data[s * i_dim..(s + 1) * i_dim];
                    for o in 0..o_dim {
                        let wo = &w[o * i_dim..(o + 1) * i_dim];
                        y[s * o_dim + o] = b[o] + wo.iter().zip(xs).map(|(a, c)| a * c).sum::<f64>();
                    }
                }
                *cache = train.then_some(x);
                Ok(Tensor::new(vec![n, o_dim], y))
            }
            Layer::BatchNorm(bn) => bn.forward(spec, x, train),
            Layer::Relu { x: cache } => {
                let y = Tensor::new(x.shape.clone(), x.data.iter().map(|v| v.max(0.0)).collect());
                *cache = train.then_some(x);
                Ok(y)
            }
            Layer::Dropout { p, mask } => {
                if !train || *p == 0.0 {
                    *mask = None;
                    return Ok(x);
                }
                let keep = 1.0 - *p;
                let m: Vec<f64> =
                    (0..x.data.len()).map(|_| if rng.gen::<f64>() < *p { 0.0 } else { 1.0 / keep }).collect();
                let data = x.data.iter().zip(&m).map(|(a, k)| a * k).collect();
                *mask = Some(m);
                Ok(Tensor::new(x.shape, data))
            }
            Layer::Conv1d(c) => c.forward(spec, x, train),
            Layer::Flatten { shape } => {
                if x.shape.len() < 2 {
                    return Err(shape_err(spec, format!("expected a batched tensor, got {:?}", x.shape)));
                }
                *shape = x.shape.clone();
                let (n, len) = (x.batch(), x.sample_len());
                Ok(x.reshaped(vec![n, len]))
            }
            Layer::Sigmoid { y: cache } => {
                let y = Tensor::new(x.shape.clone(), x.data.iter().map(|&v| sigmoid(v)).collect());
                *cache = train.then(|| y.clone());
                Ok(y)
            }
        }
    }

    /// Stores parameter gradients and returns the gradient for the input.
    pub fn backward(&mut self, dy: Tensor) -> Tensor {
        match self {
            Layer::Dense { input, output, w, dw, db, x, .. } => {
                let x = x.as_ref().expect("backward needs a train-mode forward");
                let (n, i_dim, o_dim) = (x.batch(), *input, *output);
                dw.iter_mut().for_each(|v| *v = 0.0);
                db.iter_mut().for_each(|v| *v = 0.0);
                let mut dx = vec![0.0; n * i_dim];
                for s in 0..n {
                    let xs = &x.data[s * i_dim..(s + 1) * i_dim];
                    let dxs = &mut dx[s * i_dim..(s + 1) * i_dim];
                    for o in 0..o_dim {
                        let g = dy.data[s * o_dim + o];
                        if g == 0.0 {
                            continue;
                        }
                        db[o] += g;
                        let row = o * i_dim..(o + 1) * i_dim;
                        for ((dwv, wv), (xv, dxv)) in dw[row.clone()].iter_mut().zip(&w[row]).zip(xs.iter().zip(dxs.iter_mut())) {
                            *dwv += g * xv;
                            *dxv += g * wv;
                        }
                    }
                }
                Tensor::new(vec![n, i_dim], dx)
            }
            Layer::BatchNorm(bn) => bn.backward(dy),
            Layer::Relu { x } => {
                let x = x.as_ref().expect("backward needs a train-mode forward");
                let data = dy.data.iter().zip(&x.data).map(|(g, v)| if *v > 0.0 { *g } else { 0.0 }).collect();
                Tensor::new(dy.shape, data)
            }
            Layer::Dropout { mask, .. } => match mask {
                Some(m) => {
                    let data = dy.data.iter().zip(m.iter()).map(|(g, k)| g * k).collect();
                    Tensor::new(dy.shape, data)
                }
                None => dy,
            },
            Layer::Conv1d(c) => c.backward(dy),
            Layer::Flatten { shape } => dy.reshaped(shape.clone()),
            Layer::Sigmoid { y } => {
                let y = y.as_ref().expect("backward needs a train-mode forward");
                let data = dy.data.iter().zip(&y.data).map(|(g, p)| g * p * (1.0 - p)).collect();
                Tensor::new(dy.shape, data)
            }
        }
    }
}

pub(crate) fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

impl BatchNorm {
    fn forward(&mut self, spec: &LayerSpec, x: Tensor, train: bool) -> Result<Tensor, NeuralError> {
        let (outer, ch, inner) = channel_view(&x.shape);
        if ch != self.features || outer == 0 {
            return Err(shape_err(spec, format!("expected {} features/channels, got shape {:?}", self.features, x.shape)));
        }
        let idx = |o: usize, c: usize, i: usize| (o * ch + c) * inner + i;
        let count = (outer * inner) as f64;
        let mut y = vec![0.0; x.data.len()];
        if !train {
            for c in 0..ch {
                let inv = 1.0 / (self.running_var[c] + BN_EPSILON).sqrt();
                for o in 0..outer {
                    for i in 0..inner {
                        let k = idx(o, c, i);
                        y[k] = self.gamma[c] * (x.data[k] - self.running_mean[c]) * inv + self.beta[c];
                    }
                }
            }
            self.cache = None;
            return Ok(Tensor::new(x.shape, y));
        }
        let mut x_hat = vec![0.0; x.data.len()];
        let mut inv_std = vec![0.0; ch];
        for c in 0..ch {
            let mut mean = 0.0;
            for o in 0..outer {
                for i in 0..inner {
                    mean += x.data[idx(o, c, i)];
                }
            }
            mean /= count;
            let mut var = 0.0;
            for o in 0..outer {
                for i in 0..inner {
                    let d = x.data[idx(o, c, i)] - mean;
                    var += d * d;
                }
            }
            var /= count;
            let inv = 1.0 / (var + BN_EPSILON).sqrt();
            inv_std[c] = inv;
            for o in 0..outer {
                for i in 0..inner {
                    let k = idx(o, c, i);
                    x_hat[k] = (x.data[k] - mean) * inv;
                    y[k] = self.gamma[c] * x_hat[k] + self.beta[c];
                }
            }
            // running variance tracks the unbiased estimate
            let unbiased = if count > 1.0 { var * count / (count - 1.0) } else { var };
            self.running_mean[c] = (1.0 - BN_MOMENTUM) * self.running_mean[c] + BN_MOMENTUM * mean;
            self.running_var[c] = (1.0 - BN_MOMENTUM) * self.running_var[c] + BN_MOMENTUM * unbiased;
        }
        self.cache = Some(BnCache { shape: x.shape.clone(), x_hat, inv_std });
        Ok(Tensor::new(x.shape, y))
    }

    fn backward(&mut self, dy: Tensor) -> Tensor {
        let cache = self.cache.as_ref().expect("backward needs a train-mode forward");
        let (outer, ch, inner) = channel_view(&cache.shape);
        let idx = |o: usize, c: usize, i: usize| (o * ch + c) * inner + i;
        let count = (outer * inner) as f64;
        let mut dx = vec![0.0; dy.data.len()];
        for c in 0..ch {
            let (mut sum_g, mut sum_gx) = (0.0, 0.0);
            for o in 0..outer {
                for i in 0..inner {
                    let k = idx(o, c, i);
                    sum_g += dy.data[k];
                    sum_gx += dy.data[k] * cache.x_hat[k];
                }
            }
            self.dbeta[c] = sum_g;
            self.dgamma[c] = sum_gx;
            let scale = self.gamma[c] * cache.inv_std[c] / count;
            for o in 0..outer {
                for i in 0..inner {
                    let k = idx(o, c, i);
                    dx[k] = scale * (count * dy.data[k] - sum_g - cache.x_hat[k] * sum_gx);
                }
            }
        }
        Tensor::new(dy.shape, dx)
    }
}

impl Conv1d {
    fn out_len(&self, len: usize) -> usize {
        (len + 2 * self.padding + 1).saturating_sub(self.kernel)
    }

    fn forward(&mut self, spec: &LayerSpec, x: Tensor, train: bool) -> Result<Tensor, NeuralError> {
        // a plain [batch, width] input is one channel
        let x = if x.shape.len() == 2 && self.in_channels == 1 {
            let (n, l) = (x.shape[0], x.shape[1]);
            x.reshaped(vec![n, 1, l])
        } else {
            x
        };
        if x.shape.len() != 3 || x.shape[1] != self.in_channels {
            return Err(shape_err(spec, format!("expected [batch, {}, width], got {:?}", self.in_channels, x.shape)));
        }
        let (n, cin, len) = (x.shape[0], self.in_channels, x.shape[2]);
        let (cout, k, pad) = (self.out_channels, self.kernel, self.padding as isize);
        let olen = self.out_len(len);
        let mut y = vec![0.0; n * cout * olen];
        for s in 0..n {
            for o in 0..cout {
                let out = &mut y[(s * cout + o) * olen..(s * cout + o + 1) * olen];
                out.iter_mut().for_each(|v| *v = self.b[o]);
                for c in 0..cin {
                    let xs = &x.data[(s * cin + c) * len..(s * cin + c + 1) * len];
                    for j in 0..k {
                        let wv = self.w[(o * cin + c) * k + j];
                        let shift = j as isize - pad;
                        for (t, v) in out.iter_mut().enumerate() {
                            let src = t as isize + shift;
                            if src >= 0 && (src as usize) < len {
                                *v += wv * xs[src as usize];
                            }
                        }
                    }
                }
            }
        }
        let shape = vec![n, cout, olen];
        self.x = train.then_some(x);
        Ok(Tensor::new(shape, y))
    }

    fn backward(&mut self, dy: Tensor) -> Tensor {
        let x = self.x.as_ref().expect("backward needs a train-mode forward");
        let (n, cin, len) = (x.shape[0], self.in_channels, x.shape[2]);
        let (cout, k, pad) = (self.out_channels, self.kernel, self.padding as isize);
        let olen = dy.shape[2];
        self.dw.iter_mut().for_each(|v| *v = 0.0);
        self.db.iter_mut().for_each(|v| *v = 0.0);
        let mut dx = vec![0.0; n * cin * len];
        for s in 0..n {
            for o in 0..cout {
                let g = &dy.data[(s * cout + o) * olen..(s * cout + o + 1) * olen];
                self.db[o] += g.iter().sum::<f64>();
                for c in 0..cin {
                    let base = (s * cin + c) * len;
                    for j in 0..k {
                        let wi = (o * cin + c) * k + j;
                        let shift = j as isize - pad;
                        let mut acc = 0.0;
                        for (t, gv) in g.iter().enumerate() {
                            let src = t as isize + shift;
                            if src >= 0 && (src as usize) < len {
                                acc += gv * x.data[base + src as usize];
                                dx[base + src as usize] += gv * self.w[wi];
                            }
                        }
                        self.dw[wi] += acc;
                    }
                }
            }
        }
        Tensor::new(x.shape.clone(), dx)
    }
}
