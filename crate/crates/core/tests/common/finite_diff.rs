//! Finite-difference gradient oracle built only on the public forward pass.

use loopsight::dataset::FeatureMatrix;
use loopsight::neural::{Mode, ModelSpec, Network, Tensor};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Clamped binary cross-entropy written out independently of the library.
pub fn reference_bce(pred: &[f64], target: &[f64]) -> f64 {
    let n = pred.len() as f64;
    pred.iter()
        .zip(target)
        .map(|(&p, &t)| {
            let p = p.clamp(1e-7, 1.0 - 1e-7);
            -(t * p.ln() + (1.0 - t) * (1.0 - p).ln())
        })
        .sum::<f64>()
        / n
}

/// Max relative error of backprop against central differences of the
/// reference loss, perturbing every parameter through the public API.
pub fn finite_difference_error(spec: &ModelSpec, x: &FeatureMatrix, y: &[u8]) -> f64 {
    let spec = spec.without_dropout();
    let mut net = Network::init(&spec, 17);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let t: Vec<f64> = y.iter().map(|&v| f64::from(v)).collect();
    let input = Tensor::from_matrix(x);
    net.loss_and_gradients(input.clone(), &t, &mut rng).unwrap();
    let grads: Vec<Vec<Vec<f64>>> = net.layers.iter().map(|l| l.grads().into_iter().cloned().collect()).collect();
    let eps = 1e-5;
    let mut worst: f64 = 0.0;
    for (li, layer_grads) in grads.iter().enumerate() {
        for (pi, g) in layer_grads.iter().enumerate() {
            for (k, &analytic) in g.iter().enumerate() {
                let original = net.layers[li].params()[pi][k];
                let mut at = |v: f64| {
                    net.layers[li].params_mut()[pi][k] = v;
                    let out = net.forward(input.clone(), Mode::Train, &mut rng).unwrap();
                    reference_bce(&out.data, &t)
                };
                let numeric = (at(original + eps) - at(original - eps)) / (2.0 * eps);
                net.layers[li].params_mut()[pi][k] = original;
                let scale = analytic.abs().max(numeric.abs());
                // parameters whose true gradient vanishes (biases ahead of BatchNorm) compare absolutely
                let err = if scale < 1e-6 { (analytic - numeric).abs() } else { (analytic - numeric).abs() / scale };
                worst = worst.max(err);
            }
        }
    }
    worst
}
