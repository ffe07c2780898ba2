use serde::{Deserialize, Serialize};

/// Probabilities are clamped into `[PROB_CLAMP, 1 - PROB_CLAMP]` before the log.
pub const PROB_CLAMP: f64 = 1e-7;

/// Mean binary cross-entropy and its gradient with respect to each
/// probability. Clamped entries get a zero gradient.
pub fn bce_loss(pred: &[f64], target: &[f64]) -> (f64, Vec<f64>) {
    assert_eq!(pred.len(), target.len(), "prediction and target lengths differ");
    let n = pred.len() as f64;
    let mut loss = 0.0;
    let grad = pred
        .iter()
        .zip(target)
        .map(|(&p, &t)| {
            let pc = p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
            loss -= t * pc.ln() + (1.0 - t) * (1.0 - pc).ln();
            if pc != p {
                0.0
            } else {
                (pc - t) / (pc * (1.0 - pc)) / n
            }
        })
        .collect();
    (loss / n, grad)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

/// First and second moment estimates for one parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamSlot {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl AdamSlot {
    pub fn new(len: usize) -> Self {
        Self { m: vec![0.0; len], v: vec![0.0; len] }
    }
}

/// One bias-corrected Adam step at time `t ≥ 1`.
pub fn adam_update(params: &mut [f64], grads: &[f64], slot: &mut AdamSlot, t: u64, lr: f64, cfg: &AdamConfig) {
    assert!(t >= 1, "Adam steps are numbered from 1");
    assert_eq!(params.len(), grads.len());
    let c1 = 1.0 - cfg.beta1.powf(t as f64);
    let c2 = 1.0 - cfg.beta2.powf(t as f64);
    for (((p, &g), m), v) in params.iter_mut().zip(grads).zip(&mut slot.m).zip(&mut slot.v) {
        *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
        *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *p -= lr * m_hat / (v_hat.sqrt() + cfg.epsilon);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coin_flip_loss_is_ln2() {
        let (l, g) = bce_loss(&[0.5], &[1.0]);
        assert!((l - std::f64::consts::LN_2).abs() < 1e-15);
        assert!((g[0] + 2.0).abs() < 1e-12);
    }

    #[test]
    fn clamp_bounds() {
        let (perfect, _) = bce_loss(&[1.0, 0.0], &[1.0, 0.0]);
        assert!(perfect <= 1.2e-7);
        let (inverted, _) = bce_loss(&[0.0, 1.0], &[1.0, 0.0]);
        assert!(inverted >= 16.0);
    }

    #[test]
    fn first_step_moves_by_lr() {
        let mut p = [1.0, -2.0];
        let mut s = AdamSlot::new(2);
        adam_update(&mut p, &[3.0, -0.5], &mut s, 1, 0.01, &AdamConfig::default());
        assert!((p[0] - 0.99).abs() < 1e-9);
        assert!((p[1] + 1.99).abs() < 1e-9);
        let before = p;
        adam_update(&mut p, &[0.0, 0.0], &mut AdamSlot::new(2), 1, 0.01, &AdamConfig::default());
        assert_eq!(p, before);
    }

    #[test]
    fn descends_a_parabola() {
        let mut theta = [1.0];
        let mut s = AdamSlot::new(1);
        for t in 1..=100 {
            let g = [2.0 * theta[0]];
            adam_update(&mut theta, &g, &mut s, t, 0.1, &AdamConfig::default());
        }
        assert!(theta[0].abs() < 0.05, "{}", theta[0]);
    }
}
