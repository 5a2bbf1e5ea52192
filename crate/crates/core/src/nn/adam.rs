use serde::{Deserialize, Serialize};

use super::matrix::DenseMatrix;
use super::real::Real;
use super::tape::Parameter;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam moments for an ordered list of parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState<T> {
    pub config: AdamConfig,
    pub step: u64,
    pub first: Vec<DenseMatrix<T>>,
    pub second: Vec<DenseMatrix<T>>,
}

impl<T: Real> AdamState<T> {
    pub fn new(config: AdamConfig, params: &[&Parameter<T>]) -> Self {
        let zeros = |p: &&Parameter<T>| DenseMatrix::zeros(p.value.rows(), p.value.cols());
        Self {
            config,
            step: 0,
            first: params.iter().map(zeros).collect(),
            second: params.iter().map(zeros).collect(),
        }
    }

    /// One bias-corrected Adam update of `params` (same order as at
    /// construction), then zeroes their gradients.
    pub fn step(&mut self, params: &mut [&mut Parameter<T>]) -> Result<()> {
        if params.len() != self.first.len() {
            return Err(Error::dim(
                "adam_step",
                format!("{} parameters for {} moment slots", params.len(), self.first.len()),
            ));
        }
        self.step += 1;
        let c = self.config;
        let t = self.step as i32;
        let bias1 = 1.0 - c.beta1.powi(t);
        let bias2 = 1.0 - c.beta2.powi(t);
        let (b1, b2) = (T::from_f64_lossy(c.beta1), T::from_f64_lossy(c.beta2));
        let (one_b1, one_b2) = (T::from_f64_lossy(1.0 - c.beta1), T::from_f64_lossy(1.0 - c.beta2));
        let step_size = T::from_f64_lossy(c.lr / bias1);
        let inv_sqrt_bias2 = T::from_f64_lossy(1.0 / bias2.sqrt());
        let eps = T::from_f64_lossy(c.eps);

        for ((p, m), v) in params.iter_mut().zip(&mut self.first).zip(&mut self.second) {
            if p.value.shape() != m.shape() {
                return Err(Error::dim(
                    "adam_step",
                    format!("parameter {} is {:?}, moments {:?}", p.name, p.value.shape(), m.shape()),
                ));
            }
            let values = p.value.as_mut_slice();
            let grads = p.grad.as_slice();
            for (((x, &g), mi), vi) in values.iter_mut().zip(grads).zip(m.as_mut_slice()).zip(v.as_mut_slice()) {
                *mi = b1 * *mi + one_b1 * g;
                *vi = b2 * *vi + one_b2 * g * g;
                *x -= step_size * *mi / ((*vi).sqrt() * inv_sqrt_bias2 + eps);
            }
            p.zero_grad();
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_param(v: f64) -> Parameter<f64> {
        Parameter::new("w", DenseMatrix::scalar(v))
    }

    #[test]
    fn zero_learning_rate_leaves_parameters_unchanged() {
        let mut p = scalar_param(1.5);
        let config = AdamConfig {
            lr: 0.0,
            ..Default::default()
        };
        let mut state = AdamState::new(config, &[&p]);
        p.grad = DenseMatrix::scalar(3.0);
        state.step(&mut [&mut p]).unwrap();
        assert_eq!(p.value.item(), 1.5);
        assert_eq!(p.grad.item(), 0.0);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        // m1 = 0.1, v1 = 0.001; m_hat = 1, v_hat = 1; update = lr / (1 + eps).
        let mut p = scalar_param(0.0);
        let mut state = AdamState::new(AdamConfig::default(), &[&p]);
        p.grad = DenseMatrix::scalar(1.0);
        state.step(&mut [&mut p]).unwrap();
        let expected = -0.01 / (1.0 + 1e-8);
        assert!((p.value.item() - expected).abs() < 1e-15);
    }

    #[test]
    fn opposite_gradients_pull_back_toward_start() {
        // Step 1: m = 0.1, v = 0.001, x = -0.01/(1+eps).
        // Step 2 (g=-1): m = 0.09 - 0.1 = -0.01, v = 0.000999 + 0.001 = 0.001999,
        //   m_hat = -0.01/0.19, v_hat = 0.001999/0.001999 = 1 → x += 0.01 * (0.01/0.19).
        let mut p = scalar_param(0.0);
        let mut state = AdamState::new(AdamConfig::default(), &[&p]);
        p.grad = DenseMatrix::scalar(1.0);
        state.step(&mut [&mut p]).unwrap();
        p.grad = DenseMatrix::scalar(-1.0);
        state.step(&mut [&mut p]).unwrap();

        let m2: f64 = 0.9 * 0.1 - 0.1;
        let v2: f64 = 0.999 * 0.001 + 0.001;
        let m_hat = m2 / (1.0 - 0.81);
        let v_hat = v2 / (1.0 - 0.999f64.powi(2));
        let x1 = -0.01 / (1.0 + 1e-8);
        let x2 = x1 - 0.01 * m_hat / (v_hat.sqrt() + 1e-8);
        assert!((p.value.item() - x2).abs() < 1e-15);
        assert!(p.value.item() > x1 && p.value.item() < 0.0);
        assert!((state.first[0].item() - m2).abs() < 1e-15);
        assert_eq!(state.step, 2);
    }
}
