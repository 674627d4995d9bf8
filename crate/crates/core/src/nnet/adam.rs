use serde::{Deserialize, Serialize};

use super::mlp::{MlpParams, ParamGrads};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// L2 penalty added to the gradient before the moment updates.
    pub weight_decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8, weight_decay: 1e-4 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub config: AdamConfig,
    pub step: u64,
    pub first: ParamGrads,
    pub second: ParamGrads,
}

impl AdamState {
    pub fn new(params: &MlpParams, config: AdamConfig) -> Self {
        Self { config, step: 0, first: ParamGrads::zeros_like(params), second: ParamGrads::zeros_like(params) }
    }
}

/// One Adam update. `trainable[l]` freezes layer `l` when false; an empty
/// mask trains everything. Non-finite gradients abort before any change.
pub fn adam_step(params: &mut MlpParams, grads: &ParamGrads, state: &mut AdamState, trainable: &[bool]) -> Result<()> {
    if grads.weights.len() != params.weights.len() || state.first.weights.len() != params.weights.len() {
        return Err(Error::shape(params.weights.len(), grads.weights.len()));
    }
    for (l, (g, w)) in grads.weights.iter().zip(&params.weights).enumerate() {
        if g.dim() != w.dim() || grads.biases[l].len() != params.biases[l].len() {
            return Err(Error::shape(w.len(), g.len()));
        }
    }
    if let Some(bad) = grads.iter().find(|g| !g.is_finite()) {
        return Err(Error::NonFiniteGradient(format!(" ({bad}) at optimizer step {}", state.step + 1)));
    }

    state.step += 1;
    let AdamConfig { lr, beta1, beta2, eps, weight_decay } = state.config;
    let t = state.step as i32;
    let bc1 = 1.0 - beta1.powi(t);
    let bc2 = 1.0 - beta2.powi(t);
    let update = |p: &mut f64, g: f64, m: &mut f64, v: &mut f64| {
        let g = g + weight_decay * *p;
        *m = beta1 * *m + (1.0 - beta1) * g;
        *v = beta2 * *v + (1.0 - beta2) * g * g;
        *p -= lr * (*m / bc1) / ((*v / bc2).sqrt() + eps);
    };
    for l in 0..params.weights.len() {
        if !trainable.get(l).copied().unwrap_or(true) {
            continue;
        }
        ndarray::Zip::from(&mut params.weights[l])
            .and(&grads.weights[l])
            .and(&mut state.first.weights[l])
            .and(&mut state.second.weights[l])
            .for_each(|p, &g, m, v| update(p, g, m, v));
        ndarray::Zip::from(&mut params.biases[l])
            .and(&grads.biases[l])
            .and(&mut state.first.biases[l])
            .and(&mut state.second.biases[l])
            .for_each(|p, &g, m, v| update(p, g, m, v));
    }
    params.version += 1;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nnet::mlp::Activation;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn net() -> MlpParams {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        MlpParams::init(&[2, 3, 1], Activation::Relu, &mut rng).unwrap()
    }

    #[test]
    fn zero_gradient_no_decay_is_noop() {
        let mut p = net();
        let before = p.clone();
        let cfg = AdamConfig { weight_decay: 0.0, ..Default::default() };
        let mut s = AdamState::new(&p, cfg);
        adam_step(&mut p, &ParamGrads::zeros_like(&before), &mut s, &[]).unwrap();
        assert_eq!(p.weights, before.weights);
        assert_eq!(p.biases, before.biases);
    }

    #[test]
    fn first_step_moves_by_lr() {
        // t = 1: m_hat = g, v_hat = g^2, so the step is lr * g / (|g| + eps).
        let mut p = net();
        let before = p.clone();
        let cfg = AdamConfig { lr: 0.01, weight_decay: 0.0, ..Default::default() };
        let mut s = AdamState::new(&p, cfg);
        let mut g = ParamGrads::zeros_like(&p);
        g.weights[0][[0, 0]] = 0.5;
        g.biases[1][0] = -2.0;
        adam_step(&mut p, &g, &mut s, &[]).unwrap();
        let dw = p.weights[0][[0, 0]] - before.weights[0][[0, 0]];
        let db = p.biases[1][0] - before.biases[1][0];
        assert!((dw + 0.01 * 0.5 / (0.5 + 1e-8)).abs() < 1e-15);
        assert!((db - 0.01 * 2.0 / (2.0 + 1e-8)).abs() < 1e-15);
        assert_eq!(p.weights[0][[1, 1]], before.weights[0][[1, 1]]);
        assert_eq!(s.step, 1);
    }

    #[test]
    fn frozen_layers_untouched() {
        let mut p = net();
        let before = p.clone();
        let mut s = AdamState::new(&p, AdamConfig::default());
        let mut g = ParamGrads::zeros_like(&p);
        g.weights.iter_mut().for_each(|w| w.fill(1.0));
        adam_step(&mut p, &g, &mut s, &[false, true]).unwrap();
        assert_eq!(p.weights[0], before.weights[0]);
        assert_ne!(p.weights[1], before.weights[1]);
    }

    #[test]
    fn nan_gradient_aborts() {
        let mut p = net();
        let before = p.clone();
        let mut s = AdamState::new(&p, AdamConfig::default());
        let mut g = ParamGrads::zeros_like(&p);
        g.biases[0][1] = f64::NAN;
        assert!(matches!(adam_step(&mut p, &g, &mut s, &[]), Err(Error::NonFiniteGradient(_))));
        assert_eq!(p, before);
        assert_eq!(s.step, 0);
    }

    #[test]
    fn identical_runs_identical_trajectories() {
        let run = || {
            let mut p = net();
            let mut s = AdamState::new(&p, AdamConfig::default());
            let mut g = ParamGrads::zeros_like(&p);
            for k in 0..5 {
                g.weights.iter_mut().for_each(|w| w.mapv_inplace(|v| v + 0.1 * k as f64));
                adam_step(&mut p, &g, &mut s, &[]).unwrap();
            }
            p
        };
        assert_eq!(run(), run());
    }
}
