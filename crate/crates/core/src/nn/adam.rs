use serde::{Deserialize, Serialize};

use super::NnError;
use crate::autodiff::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamConfig {
    pub fn new(lr: f64, beta1: f64) -> Self {
        Self {
            lr,
            beta1,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Bias-corrected Adam moments for one ordered list of parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub step: u64,
    pub m: Vec<Tensor>,
    pub v: Vec<Tensor>,
}

impl AdamState {
    pub fn new<'a>(config: AdamConfig, params: impl IntoIterator<Item = &'a Tensor>) -> Self {
        let (m, v) = params
            .into_iter()
            .map(|p| (Tensor::zeros(p.shape()), Tensor::zeros(p.shape())))
            .unzip();
        Self {
            config,
            step: 0,
            m,
            v,
        }
    }

    /// `θ ← θ − α·m̂ / (√v̂ + ε)`.
    ///
    /// Everything is validated before any parameter is touched, so a rejected
    /// step leaves both parameters and moments unchanged.
    pub fn update(&mut self, params: &mut [&mut Tensor], grads: &[&Tensor]) -> Result<(), NnError> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(NnError::ParamCount {
                expected: self.m.len(),
                found: params.len().min(grads.len()),
            });
        }
        for (index, (p, g)) in params.iter().zip(grads).enumerate() {
            if p.shape() != g.shape() || p.shape() != self.m[index].shape() {
                return Err(NnError::GradShape {
                    index,
                    param: p.shape().to_vec(),
                    grad: g.shape().to_vec(),
                });
            }
            if g.data().iter().any(|v| !v.is_finite()) {
                return Err(NnError::NonFiniteGrad { index });
            }
        }

        let AdamConfig {
            lr,
            beta1,
            beta2,
            eps,
        } = self.config;
        let t = self.step + 1;
        let c1 = 1.0 - beta1.powi(t as i32);
        let c2 = 1.0 - beta2.powi(t as i32);

        let mut updated = Vec::with_capacity(params.len());
        for (index, (p, g)) in params.iter().zip(grads).enumerate() {
            let mut m = self.m[index].data().to_vec();
            let mut v = self.v[index].data().to_vec();
            let mut next = p.data().to_vec();
            for (((theta, &gi), mi), vi) in next.iter_mut().zip(g.data()).zip(m.iter_mut()).zip(v.iter_mut()) {
                *mi = beta1 * *mi + (1.0 - beta1) * gi;
                *vi = beta2 * *vi + (1.0 - beta2) * gi * gi;
                let m_hat = *mi / c1;
                let v_hat = *vi / c2;
                *theta -= lr * m_hat / (v_hat.sqrt() + eps);
            }
            if next.iter().any(|v| !v.is_finite()) {
                return Err(NnError::NonFiniteParam { index });
            }
            updated.push((next, m, v));
        }
        for (index, (p, (next, m, v))) in params.iter_mut().zip(updated).enumerate() {
            p.data_mut().copy_from_slice(&next);
            self.m[index].data_mut().copy_from_slice(&m);
            self.v[index].data_mut().copy_from_slice(&v);
        }
        self.step = t;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_step(g: f64, lr: f64) -> f64 {
        let mut theta = Tensor::scalar(0.0).unwrap();
        let grad = Tensor::scalar(g).unwrap();
        let mut state = AdamState::new(AdamConfig::new(lr, 0.7), [&theta]);
        state.update(&mut [&mut theta], &[&grad]).unwrap();
        assert_eq!(state.step, 1);
        theta.data()[0]
    }

    #[test]
    fn zero_gradient_keeps_parameters() {
        let mut theta = Tensor::vector(vec![0.3, -0.7]).unwrap();
        let before = theta.clone();
        let mut state = AdamState::new(AdamConfig::new(2e-4, 0.7), [&theta]);
        state.update(&mut [&mut theta], &[&Tensor::zeros(&[2])]).unwrap();
        assert_eq!(theta, before);
        assert_eq!(state.step, 1);
    }

    #[test]
    fn first_step_closed_form() {
        // m̂₁ = g and v̂₁ = g², so θ₁ = −α·g / (|g| + ε).
        for g in [0.1f64, 1.0, 10.0] {
            let alpha = 2e-4;
            let expected = -alpha * g / (g.abs() + 1e-8);
            let got = one_step(g, alpha);
            assert!((got - expected).abs() < 1e-12, "g={g}: {got} vs {expected}");
            assert!(got.abs() <= alpha && got.abs() >= alpha * (1.0 - 1e-6));
        }
    }

    #[test]
    fn rejects_bad_gradients_without_mutation() {
        let mut theta = Tensor::vector(vec![1.0, 2.0]).unwrap();
        let mut state = AdamState::new(AdamConfig::new(1e-3, 0.9), [&theta]);
        let wrong = Tensor::zeros(&[3]);
        assert!(matches!(
            state.update(&mut [&mut theta], &[&wrong]),
            Err(NnError::GradShape { .. })
        ));
        assert_eq!(state.step, 0);
        assert_eq!(theta.data(), &[1.0, 2.0]);
    }
}
