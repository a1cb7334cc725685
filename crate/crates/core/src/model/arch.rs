use serde::{Deserialize, Serialize};

use super::ModelError;
use crate::nn::{Activation, LayerSpec};

pub const LRELU_SLOPE: f64 = 0.2;

/// Layer stacks of the four networks plus the latent sizes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Architecture {
    pub data_dim: usize,
    pub z_dim: usize,
    pub zprime_dim: usize,
    pub encoder: Vec<LayerSpec>,
    pub generator: Vec<LayerSpec>,
    pub disc: Vec<LayerSpec>,
    pub disc_prime: Vec<LayerSpec>,
}

fn mlp(dims: &[usize], hidden: Activation, out: Activation) -> Vec<LayerSpec> {
    dims.windows(2)
        .enumerate()
        .map(|(i, w)| {
            let act = if i + 2 == dims.len() { out } else { hidden };
            LayerSpec::new(w[0], w[1], act)
        })
        .collect()
}

impl Architecture {
    /// Point-data networks: one hidden layer of 128 tanh units each. The
    /// encoder and generator end in tanh, the discriminators in a linear logit.
    pub fn ring(z_dim: usize, zprime_dim: usize) -> Self {
        Self::ring_with_hidden(z_dim, zprime_dim, 128)
    }

    pub fn ring_with_hidden(z_dim: usize, zprime_dim: usize, h: usize) -> Self {
        let d = 2;
        Self {
            data_dim: d,
            z_dim,
            zprime_dim,
            encoder: mlp(&[d, h, z_dim], Activation::Tanh, Activation::Tanh),
            generator: mlp(&[zprime_dim + z_dim, h, d], Activation::Tanh, Activation::Tanh),
            disc: mlp(&[2 * d, h, 1], Activation::Tanh, Activation::Linear),
            disc_prime: mlp(&[d, h, 1], Activation::Tanh, Activation::Linear),
        }
    }

    /// Dense networks for flattened `side × side` images: leaky-ReLU hidden
    /// layers, a tanh latent, and a sigmoid image output.
    pub fn mnist_lite(pixels: usize, z_dim: usize, zprime_dim: usize, hidden: usize, disc_hidden: usize) -> Self {
        let lrelu = Activation::Lrelu { slope: LRELU_SLOPE };
        Self {
            data_dim: pixels,
            z_dim,
            zprime_dim,
            encoder: mlp(&[pixels, hidden, hidden, z_dim], lrelu, Activation::Tanh),
            generator: mlp(&[zprime_dim + z_dim, hidden, hidden, pixels], lrelu, Activation::Sigmoid),
            disc: mlp(&[2 * pixels, disc_hidden, disc_hidden, 1], lrelu, Activation::Linear),
            disc_prime: mlp(&[pixels, disc_hidden, disc_hidden, 1], lrelu, Activation::Linear),
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let first_in = |s: &[LayerSpec]| s.first().map_or(0, |l| l.in_dim);
        let last_out = |s: &[LayerSpec]| s.last().map_or(0, |l| l.out_dim);
        let check = |ok: bool, what: &str| if ok { Ok(()) } else { Err(ModelError::Architecture(what.to_string())) };
        check(self.z_dim >= 1 && self.data_dim >= 1, "dimensions must be positive")?;
        check(first_in(&self.encoder) == self.data_dim, "encoder input must equal the data dimension")?;
        check(last_out(&self.encoder) == self.z_dim, "encoder output must equal z_dim")?;
        check(
            self.encoder.last().map(|l| l.activation) == Some(Activation::Tanh),
            "encoder must end in tanh",
        )?;
        check(
            first_in(&self.generator) == self.z_dim + self.zprime_dim,
            "generator input must equal z_dim + zprime_dim",
        )?;
        check(last_out(&self.generator) == self.data_dim, "generator output must equal the data dimension")?;
        check(first_in(&self.disc) == 2 * self.data_dim, "pair discriminator input must be twice the data dimension")?;
        check(first_in(&self.disc_prime) == self.data_dim, "single discriminator input must equal the data dimension")?;
        check(
            last_out(&self.disc) == 1 && last_out(&self.disc_prime) == 1,
            "discriminators must output one logit",
        )?;
        for s in [&self.encoder, &self.generator, &self.disc, &self.disc_prime] {
            crate::nn::validate_specs(s)?;
        }
        Ok(())
    }
}
