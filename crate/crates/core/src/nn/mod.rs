//! Dense networks, their initializers, and the Adam optimizer.

mod adam;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::{AutodiffError, Gradients, NodeId, Tape, Tensor};

pub use adam::{AdamConfig, AdamState};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NnError {
    #[error("layer {index}: dimensions must be positive")]
    ZeroDim { index: usize },
    #[error("layer {index} expects {expected} inputs but the previous layer has {found} outputs")]
    Chain {
        index: usize,
        expected: usize,
        found: usize,
    },
    #[error("network needs at least one layer")]
    NoLayers,
    #[error("parameter {index}: gradient shape {grad:?} does not match parameter shape {param:?}")]
    GradShape {
        index: usize,
        param: Vec<usize>,
        grad: Vec<usize>,
    },
    #[error("parameter {index}: non-finite gradient")]
    NonFiniteGrad { index: usize },
    #[error("parameter {index}: update produced a non-finite value")]
    NonFiniteParam { index: usize },
    #[error("expected {expected} parameter tensors, got {found}")]
    ParamCount { expected: usize, found: usize },
    #[error("missing gradient for parameter {0}")]
    MissingGrad(usize),
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Activation {
    Tanh,
    Lrelu { slope: f64 },
    Sigmoid,
    Linear,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub in_dim: usize,
    pub out_dim: usize,
    pub activation: Activation,
}

impl LayerSpec {
    pub fn new(in_dim: usize, out_dim: usize, activation: Activation) -> Self {
        Self {
            in_dim,
            out_dim,
            activation,
        }
    }
}

/// Checks that every layer is non-degenerate and that adjacent layers chain.
pub fn validate_specs(specs: &[LayerSpec]) -> Result<(), NnError> {
    if specs.is_empty() {
        return Err(NnError::NoLayers);
    }
    for (index, s) in specs.iter().enumerate() {
        if s.in_dim == 0 || s.out_dim == 0 {
            return Err(NnError::ZeroDim { index });
        }
        if let Activation::Lrelu { slope } = s.activation {
            if !(slope > 0.0 && slope < 1.0) {
                return Err(AutodiffError::Slope(slope).into());
            }
        }
        if index > 0 && specs[index - 1].out_dim != s.in_dim {
            return Err(NnError::Chain {
                index,
                expected: s.in_dim,
                found: specs[index - 1].out_dim,
            });
        }
    }
    Ok(())
}

/// One dense layer. The weight is stored as `[in_dim × out_dim]` so the
/// forward pass is a plain `x · W`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    pub weight: Tensor,
    pub bias: Tensor,
    pub activation: Activation,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Network {
    layers: Vec<Dense>,
}

/// A network's parameters registered on a particular tape.
#[derive(Clone, Debug)]
pub struct BoundNetwork {
    params: Vec<NodeId>,
    activations: Vec<Activation>,
}

impl Network {
    /// He-normal weights for leaky-ReLU layers, Xavier-uniform otherwise,
    /// zero biases.
    pub fn init<R: Rng + ?Sized>(specs: &[LayerSpec], rng: &mut R) -> Result<Self, NnError> {
        validate_specs(specs)?;
        let layers = specs
            .iter()
            .map(|s| {
                let n = s.in_dim * s.out_dim;
                let data: Vec<f64> = match s.activation {
                    Activation::Lrelu { .. } => {
                        let std = (2.0 / s.in_dim as f64).sqrt();
                        (0..n)
                            .map(|_| {
                                let u: f64 = StandardNormal.sample(rng);
                                std * u
                            })
                            .collect()
                    }
                    _ => {
                        let limit = (6.0 / (s.in_dim + s.out_dim) as f64).sqrt();
                        (0..n).map(|_| rng.random_range(-limit..limit)).collect()
                    }
                };
                Dense {
                    weight: Tensor::from_parts(vec![s.in_dim, s.out_dim], data),
                    bias: Tensor::zeros(&[s.out_dim]),
                    activation: s.activation,
                }
            })
            .collect();
        Ok(Self { layers })
    }

    /// Assembles a network from explicit layers, validating shapes.
    pub fn from_layers(layers: Vec<Dense>) -> Result<Self, NnError> {
        let specs: Vec<LayerSpec> = layers
            .iter()
            .map(|l| LayerSpec::new(l.weight.rows(), l.weight.cols(), l.activation))
            .collect();
        validate_specs(&specs)?;
        for (index, l) in layers.iter().enumerate() {
            if l.weight.shape().len() != 2 || l.bias.shape() != [l.weight.cols()] {
                return Err(NnError::GradShape {
                    index,
                    param: l.weight.shape().to_vec(),
                    grad: l.bias.shape().to_vec(),
                });
            }
        }
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn specs(&self) -> Vec<LayerSpec> {
        self.layers
            .iter()
            .map(|l| LayerSpec::new(l.weight.rows(), l.weight.cols(), l.activation))
            .collect()
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].weight.rows()
    }

    pub fn out_dim(&self) -> usize {
        self.layers.last().expect("non-empty").weight.cols()
    }

    /// Parameters in a fixed order: `w0, b0, w1, b1, ...`.
    pub fn params(&self) -> Vec<&Tensor> {
        self.layers.iter().flat_map(|l| [&l.weight, &l.bias]).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        self.layers
            .iter_mut()
            .flat_map(|l| [&mut l.weight, &mut l.bias])
            .collect()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weight.len() + l.bias.len()).sum()
    }

    /// Records the parameters on `tape`, as trainable leaves or as constants.
    pub fn bind(&self, tape: &mut Tape, trainable: bool) -> BoundNetwork {
        let params = self
            .params()
            .into_iter()
            .map(|p| {
                if trainable {
                    tape.param(p.clone())
                } else {
                    tape.constant(p.clone())
                }
            })
            .collect();
        BoundNetwork {
            params,
            activations: self.layers.iter().map(|l| l.activation).collect(),
        }
    }

    /// Convenience forward pass on a throwaway tape.
    pub fn predict(&self, input: &Tensor) -> Result<Tensor, NnError> {
        let mut tape = Tape::new();
        let bound = self.bind(&mut tape, false);
        let x = tape.constant(input.clone());
        let y = bound.forward(&mut tape, x)?;
        Ok(tape.value(y).clone())
    }
}

impl BoundNetwork {
    pub fn param_ids(&self) -> &[NodeId] {
        &self.params
    }

    pub fn forward(&self, tape: &mut Tape, input: NodeId) -> Result<NodeId, NnError> {
        let mut h = input;
        for (i, act) in self.activations.iter().enumerate() {
            let w = self.params[2 * i];
            let b = self.params[2 * i + 1];
            let z = tape.matmul(h, w)?;
            let z = tape.add_bias(z, b)?;
            h = match *act {
                Activation::Tanh => tape.tanh(z)?,
                Activation::Lrelu { slope } => tape.lrelu(z, slope)?,
                Activation::Sigmoid => tape.sigmoid(z)?,
                Activation::Linear => z,
            };
        }
        Ok(h)
    }

    /// Gradients for this network's parameters in `params()` order.
    pub fn collect_grads<'g>(&self, grads: &'g Gradients) -> Result<Vec<&'g Tensor>, NnError> {
        self.params
            .iter()
            .enumerate()
            .map(|(i, id)| grads.get(*id).ok_or(NnError::MissingGrad(i)))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn specs_128(act: Activation) -> Vec<LayerSpec> {
        vec![LayerSpec::new(128, 128, act)]
    }

    #[test]
    fn fresh_biases_are_zero_and_seed_determines_weights() {
        let specs = vec![
            LayerSpec::new(2, 128, Activation::Tanh),
            LayerSpec::new(128, 2, Activation::Tanh),
        ];
        let a = Network::init(&specs, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let b = Network::init(&specs, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let c = Network::init(&specs, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        for l in a.layers() {
            assert!(l.bias.data().iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn initializer_statistics_match_targets() {
        for seed in 0..10 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let he = Network::init(&specs_128(Activation::Lrelu { slope: 0.2 }), &mut rng).unwrap();
            let xav = Network::init(&specs_128(Activation::Tanh), &mut rng).unwrap();
            for (net, target_var) in [(he, 2.0 / 128.0), (xav, 6.0 / 256.0 / 3.0)] {
                let w = net.layers()[0].weight.data();
                let mean = w.iter().sum::<f64>() / w.len() as f64;
                let var = w.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / w.len() as f64;
                assert!((var / target_var - 1.0).abs() < 0.10, "seed {seed}: var {var} vs {target_var}");
                assert!((var.sqrt() / target_var.sqrt() - 1.0).abs() < 0.10);
            }
        }
    }

    #[test]
    fn non_chaining_specs_are_rejected() {
        let specs = vec![
            LayerSpec::new(2, 8, Activation::Tanh),
            LayerSpec::new(7, 1, Activation::Linear),
        ];
        let err = Network::init(&specs, &mut ChaCha8Rng::seed_from_u64(0)).unwrap_err();
        assert_eq!(
            err,
            NnError::Chain {
                index: 1,
                expected: 7,
                found: 8
            }
        );
        assert!(matches!(
            validate_specs(&[LayerSpec::new(0, 1, Activation::Linear)]),
            Err(NnError::ZeroDim { index: 0 })
        ));
        assert_eq!(validate_specs(&[]), Err(NnError::NoLayers));
    }

    #[test]
    fn zero_network_outputs_zero() {
        let layers = vec![
            Dense {
                weight: Tensor::zeros(&[3, 4]),
                bias: Tensor::zeros(&[4]),
                activation: Activation::Tanh,
            },
            Dense {
                weight: Tensor::zeros(&[4, 2]),
                bias: Tensor::zeros(&[2]),
                activation: Activation::Tanh,
            },
        ];
        let net = Network::from_layers(layers).unwrap();
        let x = Tensor::matrix(2, 3, vec![1.0, -2.0, 3.0, 0.5, 0.1, 9.0]).unwrap();
        let y = net.predict(&x).unwrap();
        assert_eq!(y.shape(), &[2, 2]);
        assert!(y.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn linear_layer_is_matmul_plus_bias() {
        let net = Network::from_layers(vec![Dense {
            weight: Tensor::matrix(2, 1, vec![2.0, -1.0]).unwrap(),
            bias: Tensor::vector(vec![0.5]).unwrap(),
            activation: Activation::Linear,
        }])
        .unwrap();
        let x = Tensor::matrix(2, 2, vec![1.0, 1.0, 3.0, 4.0]).unwrap();
        assert_eq!(net.predict(&x).unwrap().data(), &[1.5, 2.5]);
    }

    #[test]
    fn forward_rejects_wrong_width() {
        let net = Network::init(
            &[LayerSpec::new(3, 2, Activation::Tanh)],
            &mut ChaCha8Rng::seed_from_u64(1),
        )
        .unwrap();
        assert!(net.predict(&Tensor::zeros(&[4, 2])).is_err());
    }
}
