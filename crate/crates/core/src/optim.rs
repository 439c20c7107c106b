//! Adam optimizer with decoupled weight decay and the stepped learning-rate
//! schedule: decay by 0.1 every 5 epochs from an initial 1e-4.

use crate::params::ParamSet;
use crate::tensor::TensorError;

#[derive(Debug, Clone)]
pub struct AdamConfig {
    pub lr: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Multiplicative decay applied to the learning rate every `decay_every` epochs.
    pub lr_decay: f64,
    pub decay_every: usize,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-4,
            weight_decay: 5e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            lr_decay: 0.1,
            decay_every: 5,
        }
    }
}

impl AdamConfig {
    /// Effective learning rate at a given (0-based) epoch.
    pub fn lr_at_epoch(&self, epoch: usize) -> f64 {
        self.lr * self.lr_decay.powi((epoch / self.decay_every) as i32)
    }
}

/// Per-parameter moment estimates plus the shared step counter.
pub struct AdamState {
    pub config: AdamConfig,
    step: u64,
    first_moment: Vec<Vec<f64>>,
    second_moment: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(params: &ParamSet, config: AdamConfig) -> Self {
        let first: Vec<Vec<f64>> = params.trainable().map(|e| vec![0.0; e.tensor.numel()]).collect();
        let second = first.clone();
        AdamState { config, step: 0, first_moment: first, second_moment: second }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One Adam update over all trainable parameters. Weight decay is
    /// decoupled: applied directly to the weights, scaled by the current
    /// learning rate, independent of the moment estimates.
    pub fn step(&mut self, params: &ParamSet, lr: f64) -> Result<(), TensorError> {
        self.step += 1;
        let t = self.step as i32;
        let c = &self.config;
        let bias1 = 1.0 - c.beta1.powi(t);
        let bias2 = 1.0 - c.beta2.powi(t);
        for (idx, entry) in params.trainable().enumerate() {
            let grad = entry
                .tensor
                .grad()
                .ok_or_else(|| TensorError::MissingGrad(entry.name.clone()))?;
            let m = &mut self.first_moment[idx];
            let v = &mut self.second_moment[idx];
            let mut data = entry.tensor.data();
            for i in 0..data.len() {
                m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * grad[i];
                v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * grad[i] * grad[i];
                let m_hat = m[i] / bias1;
                let v_hat = v[i] / bias2;
                data[i] -= lr * (m_hat / (v_hat.sqrt() + c.eps) + c.weight_decay * data[i]);
            }
            entry.tensor.set_data(&data);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor;

    #[test]
    fn zero_grad_zero_decay_is_a_noop_on_params() {
        let mut set = ParamSet::new();
        let t = Tensor::param([1, 1, 1, 3], vec![1.0, -2.0, 3.0]).unwrap();
        set.push("w", t.clone());
        t.accumulate_grad(&[0.0, 0.0, 0.0]);
        let mut state = AdamState::new(&set, AdamConfig { weight_decay: 0.0, ..Default::default() });
        state.step(&set, 1e-4).unwrap();
        assert_eq!(t.data(), vec![1.0, -2.0, 3.0]);
        assert_eq!(state.step_count(), 1);
    }

    #[test]
    fn missing_grad_is_an_error() {
        let mut set = ParamSet::new();
        set.push("w", Tensor::param([1, 1, 1, 1], vec![1.0]).unwrap());
        let mut state = AdamState::new(&set, AdamConfig::default());
        assert!(matches!(state.step(&set, 1e-4), Err(TensorError::MissingGrad(_))));
    }

    #[test]
    fn two_steps_match_hand_evaluated_recurrence() {
        // Single scalar parameter w0 = 1, grads g1 = 0.5, g2 = -0.25,
        // lr = 0.1, no weight decay. Evaluate the Adam recurrence by hand.
        let (b1, b2, eps, lr) = (0.9, 0.999, 1e-8, 0.1);
        let grads = [0.5, -0.25];
        let mut w = 1.0;
        let (mut m, mut v) = (0.0, 0.0);
        for (t, g) in grads.iter().enumerate() {
            let t = (t + 1) as i32;
            m = b1 * m + (1.0 - b1) * g;
            v = b2 * v + (1.0 - b2) * g * g;
            w -= lr * (m / (1.0 - f64::powi(b1, t))) / ((v / (1.0 - f64::powi(b2, t))).sqrt() + eps);
        }

        let mut set = ParamSet::new();
        let t = Tensor::param([1, 1, 1, 1], vec![1.0]).unwrap();
        set.push("w", t.clone());
        let mut state = AdamState::new(
            &set,
            AdamConfig { lr, weight_decay: 0.0, beta1: b1, beta2: b2, eps, ..Default::default() },
        );
        for g in grads {
            t.zero_grad();
            t.accumulate_grad(&[g]);
            state.step(&set, lr).unwrap();
        }
        assert!((t.data()[0] - w).abs() < 1e-12, "{} vs {}", t.data()[0], w);
    }

    #[test]
    fn lr_schedule_decays_every_five_epochs() {
        let cfg = AdamConfig::default();
        assert!((cfg.lr_at_epoch(0) - 1e-4).abs() < 1e-18);
        assert!((cfg.lr_at_epoch(4) - 1e-4).abs() < 1e-18);
        assert!((cfg.lr_at_epoch(5) - 1e-5).abs() < 1e-18);
        assert!((cfg.lr_at_epoch(10) - 1e-6).abs() < 1e-19);
    }
}
