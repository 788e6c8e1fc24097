use serde::{Deserialize, Serialize};

use super::{NnError, Tensor};

/// Adam hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Moment estimates and step count for a list of parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub step: u64,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(config: AdamConfig, params: &[Tensor]) -> AdamState {
        AdamState {
            config,
            step: 0,
            first: params.iter().map(|p| vec![0.0; p.len()]).collect(),
            second: params.iter().map(|p| vec![0.0; p.len()]).collect(),
        }
    }

    /// One bias-corrected Adam update of `params` in place.
    pub fn step(&mut self, params: &mut [Tensor], grads: &[Tensor]) -> Result<(), NnError> {
        if params.len() != self.first.len() || grads.len() != params.len() {
            return Err(NnError::ShapeMismatch(format!(
                "adam over {} params with {} grads and {} moments",
                params.len(),
                grads.len(),
                self.first.len()
            )));
        }
        for ((p, g), m) in params.iter().zip(grads).zip(&self.first) {
            if p.shape() != g.shape() || p.len() != m.len() {
                return Err(NnError::ShapeMismatch(format!(
                    "param {:?} vs grad {:?}",
                    p.shape(),
                    g.shape()
                )));
            }
        }
        self.step += 1;
        let AdamConfig {
            lr,
            beta1,
            beta2,
            eps,
        } = self.config;
        let t = self.step as i32;
        let c1 = 1.0 - beta1.powi(t);
        let c2 = 1.0 - beta2.powi(t);
        for (i, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            let (m, v) = (&mut self.first[i], &mut self.second[i]);
            for (((w, &gi), mi), vi) in p
                .data_mut()
                .iter_mut()
                .zip(g.data())
                .zip(m.iter_mut())
                .zip(v.iter_mut())
            {
                *mi = beta1 * *mi + (1.0 - beta1) * gi;
                *vi = beta2 * *vi + (1.0 - beta2) * gi * gi;
                let m_hat = *mi / c1;
                let v_hat = *vi / c2;
                *w -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(v: f64) -> Tensor {
        Tensor::scalar(v)
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut params = vec![Tensor::new(&[2], vec![1.0, -2.0]).unwrap()];
        let mut state = AdamState::new(AdamConfig::default(), &params);
        state.step(&mut params, &[Tensor::zeros(&[2])]).unwrap();
        assert_eq!(params[0].data(), &[1.0, -2.0]);
        assert_eq!(state.step, 1);
    }

    #[test]
    fn first_step_moves_by_lr_against_sign() {
        for g in [0.3, -7.0] {
            let mut params = vec![scalar(1.0)];
            let mut state = AdamState::new(AdamConfig::default(), &params);
            state.step(&mut params, &[scalar(g)]).unwrap();
            let delta = params[0].data()[0] - 1.0;
            // |g| / (|g| + eps) is 1 to within 1e-7 relative.
            assert!((delta + 0.001 * g.signum()).abs() < 1e-9, "delta {delta}");
        }
    }

    #[test]
    fn minimizes_shifted_quadratic() {
        let config = AdamConfig {
            lr: 0.1,
            ..AdamConfig::default()
        };
        let mut params = vec![scalar(0.0)];
        let mut state = AdamState::new(config, &params);
        for _ in 0..100 {
            let w = params[0].data()[0];
            state.step(&mut params, &[scalar(2.0 * (w - 3.0))]).unwrap();
        }
        let w = params[0].data()[0];
        assert!((w - 3.0).abs() < 0.5, "w = {w}");
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let mut params = vec![scalar(0.0)];
        let mut state = AdamState::new(AdamConfig::default(), &params);
        assert!(state.step(&mut params, &[Tensor::zeros(&[2])]).is_err());
    }
}
