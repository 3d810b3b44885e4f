use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Params, Scalar};

/// Adam hyperparameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamConfig {
    pub fn with_learning_rate(learning_rate: f64) -> Self {
        Self {
            learning_rate,
            ..Self::default()
        }
    }
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Adam with bias correction. Moment buffers are created lazily on the
/// first step and follow the model's parameter visitation order.
#[derive(Clone, Debug)]
pub struct Adam<T> {
    pub config: AdamConfig,
    step: u64,
    first: Vec<Vec<T>>,
    second: Vec<Vec<T>>,
}

impl<T: Scalar> Adam<T> {
    pub fn new(config: AdamConfig) -> Self {
        Self {
            config,
            step: 0,
            first: Vec::new(),
            second: Vec::new(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// First and second moment buffers of parameter `index`.
    pub fn moments(&self, index: usize) -> Option<(&[T], &[T])> {
        Some((self.first.get(index)?, self.second.get(index)?))
    }

    /// Applies one update from the accumulated gradients, then zeroes them.
    ///
    /// Nothing is modified if any gradient is non-finite.
    pub fn step<M: Params<T> + ?Sized>(&mut self, model: &mut M) -> Result<()> {
        let mut bad = None;
        model.visit_params(&mut |name, p| {
            if bad.is_none() && !p.grad.is_finite() {
                bad = Some(name.to_string());
            }
        });
        if let Some(name) = bad {
            return Err(Error::Numeric(format!("non-finite gradient in `{name}`")));
        }

        if self.first.is_empty() {
            model.visit_params(&mut |_, p| {
                self.first.push(vec![T::zero(); p.len()]);
                self.second.push(vec![T::zero(); p.len()]);
            });
        }
        self.step += 1;
        let c = self.config;
        let t = self.step as i32;
        let b1 = T::from_f64_lossy(c.beta1);
        let b2 = T::from_f64_lossy(c.beta2);
        let one = T::one();
        let correct1 = T::from_f64_lossy(1.0 - c.beta1.powi(t));
        let correct2 = T::from_f64_lossy(1.0 - c.beta2.powi(t));
        let lr = T::from_f64_lossy(c.learning_rate);
        let eps = T::from_f64_lossy(c.epsilon);
        let mut index = 0;
        let (first, second) = (&mut self.first, &mut self.second);
        model.visit_params_mut(&mut |_, p| {
            let m = &mut first[index];
            let v = &mut second[index];
            let grad = p.grad.data();
            for (k, w) in p.value.data_mut().iter_mut().enumerate() {
                let g = grad[k];
                m[k] = b1 * m[k] + (one - b1) * g;
                v[k] = b2 * v[k] + (one - b2) * g * g;
                let m_hat = m[k] / correct1;
                let v_hat = v[k] / correct2;
                *w = *w - lr * m_hat / (v_hat.sqrt() + eps);
            }
            p.zero_grad();
            index += 1;
        });
        Ok(())
    }
}
