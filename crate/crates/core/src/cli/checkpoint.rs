use std::path::Path;

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{Experiment, ModelKind};
use super::{AnyModel, CliError};
use crate::autodiff::Tensor;
use crate::model::{Architecture, IveGanModel, VanillaGan};
use crate::nn::{Activation, AdamConfig, AdamState, Dense, LayerSpec, Network};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerBlob {
    pub in_dim: usize,
    pub out_dim: usize,
    pub activation: Activation,
    /// `in_dim × out_dim` little-endian doubles, row-major, base64.
    pub weight: String,
    pub bias: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkBlob {
    pub name: String,
    pub layers: Vec<LayerBlob>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerBlob {
    pub name: String,
    pub config: AdamConfig,
    pub step: u64,
    /// First and second moments in parameter order, same encoding as weights.
    pub m: Vec<String>,
    pub v: Vec<String>,
}

/// Model, optimizer and generator state after `iteration` steps.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format_version: u32,
    pub experiment: Experiment,
    pub model: ModelKind,
    pub arch: Architecture,
    pub iteration: u64,
    pub config_hash: String,
    pub rng: ChaCha8Rng,
    pub networks: Vec<NetworkBlob>,
    pub optimizers: Vec<OptimizerBlob>,
}

fn encode_f64s(xs: &[f64]) -> String {
    let bytes: Vec<u8> = xs.iter().flat_map(|x| x.to_le_bytes()).collect();
    B64.encode(bytes)
}

fn decode_f64s(s: &str, expected: usize, what: &str) -> Result<Vec<f64>, CliError> {
    let bytes = B64
        .decode(s)
        .map_err(|e| CliError::Config(format!("checkpoint {what}: {e}")))?;
    if bytes.len() != expected * 8 {
        return Err(CliError::Config(format!(
            "checkpoint {what}: expected {expected} values, found {} bytes",
            bytes.len()
        )));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect())
}

fn decode_tensor(s: &str, shape: &[usize], what: &str) -> Result<Tensor, CliError> {
    let data = decode_f64s(s, shape.iter().product(), what)?;
    Tensor::new(shape.to_vec(), data).map_err(|e| CliError::Config(format!("checkpoint {what}: {e}")))
}

fn network_blob(name: &str, net: &Network) -> NetworkBlob {
    NetworkBlob {
        name: name.to_string(),
        layers: net
            .layers()
            .iter()
            .map(|l| LayerBlob {
                in_dim: l.weight.rows(),
                out_dim: l.weight.cols(),
                activation: l.activation,
                weight: encode_f64s(l.weight.data()),
                bias: encode_f64s(l.bias.data()),
            })
            .collect(),
    }
}

fn optimizer_blob(name: &str, st: &AdamState) -> OptimizerBlob {
    OptimizerBlob {
        name: name.to_string(),
        config: st.config,
        step: st.step,
        m: st.m.iter().map(|t| encode_f64s(t.data())).collect(),
        v: st.v.iter().map(|t| encode_f64s(t.data())).collect(),
    }
}

fn find<'a, T>(items: &'a [T], name: &str, get: impl Fn(&T) -> &str) -> Result<&'a T, CliError> {
    items
        .iter()
        .find(|b| get(b) == name)
        .ok_or_else(|| CliError::Config(format!("checkpoint lacks `{name}`")))
}

fn restore_network(blobs: &[NetworkBlob], name: &str, specs: &[LayerSpec]) -> Result<Network, CliError> {
    let blob = find(blobs, name, |b| &b.name)?;
    let found: Vec<LayerSpec> = blob
        .layers
        .iter()
        .map(|l| LayerSpec::new(l.in_dim, l.out_dim, l.activation))
        .collect();
    if found != specs {
        return Err(CliError::Config(format!("checkpoint network `{name}` does not match the architecture")));
    }
    let layers = blob
        .layers
        .iter()
        .enumerate()
        .map(|(i, l)| {
            Ok(Dense {
                weight: decode_tensor(&l.weight, &[l.in_dim, l.out_dim], &format!("{name}.w{i}"))?,
                bias: decode_tensor(&l.bias, &[l.out_dim], &format!("{name}.b{i}"))?,
                activation: l.activation,
            })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    Network::from_layers(layers).map_err(|e| CliError::Config(format!("checkpoint network `{name}`: {e}")))
}

fn restore_optimizer<'a>(blobs: &[OptimizerBlob], name: &str, params: impl IntoIterator<Item = &'a Tensor>) -> Result<AdamState, CliError> {
    let blob = find(blobs, name, |b| &b.name)?;
    let shapes: Vec<Vec<usize>> = params.into_iter().map(|p| p.shape().to_vec()).collect();
    if blob.m.len() != shapes.len() || blob.v.len() != shapes.len() {
        return Err(CliError::Config(format!("checkpoint optimizer `{name}` has the wrong number of moments")));
    }
    let decode = |xs: &[String], which: &str| -> Result<Vec<Tensor>, CliError> {
        xs.iter()
            .zip(&shapes)
            .enumerate()
            .map(|(i, (s, shape))| decode_tensor(s, shape, &format!("{name}.{which}{i}")))
            .collect()
    };
    Ok(AdamState {
        config: blob.config,
        step: blob.step,
        m: decode(&blob.m, "m")?,
        v: decode(&blob.v, "v")?,
    })
}

impl Checkpoint {
    pub fn capture(model: &AnyModel, experiment: Experiment, iteration: u64, config_hash: String, rng: &ChaCha8Rng) -> Self {
        let (kind, arch, networks, optimizers) = match model {
            AnyModel::Ive(m) => (
                ModelKind::IveGan,
                m.arch.clone(),
                vec![
                    network_blob("encoder", &m.encoder),
                    network_blob("generator", &m.generator),
                    network_blob("disc", &m.disc),
                    network_blob("disc_prime", &m.disc_prime),
                ],
                vec![
                    optimizer_blob("encoder_generator", &m.adam_ge),
                    optimizer_blob("disc", &m.adam_d),
                    optimizer_blob("disc_prime", &m.adam_dprime),
                ],
            ),
            AnyModel::Vanilla(m) => (
                ModelKind::Vanilla,
                m.arch.clone(),
                vec![network_blob("generator", &m.generator), network_blob("disc", &m.disc)],
                vec![optimizer_blob("generator", &m.adam_g), optimizer_blob("disc", &m.adam_d)],
            ),
        };
        Self {
            format_version: FORMAT_VERSION,
            experiment,
            model: kind,
            arch,
            iteration,
            config_hash,
            rng: rng.clone(),
            networks,
            optimizers,
        }
    }

    pub fn restore(&self) -> Result<AnyModel, CliError> {
        self.arch
            .validate()
            .map_err(|e| CliError::Config(format!("checkpoint architecture: {e}")))?;
        let a = &self.arch;
        let nets = &self.networks;
        let opts = &self.optimizers;
        Ok(match self.model {
            ModelKind::IveGan => {
                let encoder = restore_network(nets, "encoder", &a.encoder)?;
                let generator = restore_network(nets, "generator", &a.generator)?;
                let disc = restore_network(nets, "disc", &a.disc)?;
                let disc_prime = restore_network(nets, "disc_prime", &a.disc_prime)?;
                let adam_ge = restore_optimizer(opts, "encoder_generator", encoder.params().into_iter().chain(generator.params()))?;
                let adam_d = restore_optimizer(opts, "disc", disc.params())?;
                let adam_dprime = restore_optimizer(opts, "disc_prime", disc_prime.params())?;
                AnyModel::Ive(IveGanModel {
                    arch: a.clone(),
                    encoder,
                    generator,
                    disc,
                    disc_prime,
                    adam_ge,
                    adam_d,
                    adam_dprime,
                })
            }
            ModelKind::Vanilla => {
                let generator = restore_network(nets, "generator", &a.generator)?;
                let disc = restore_network(nets, "disc", &a.disc_prime)?;
                let adam_g = restore_optimizer(opts, "generator", generator.params())?;
                let adam_d = restore_optimizer(opts, "disc", disc.params())?;
                AnyModel::Vanilla(VanillaGan {
                    arch: a.clone(),
                    generator,
                    disc,
                    adam_g,
                    adam_d,
                })
            }
        })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = serde_json::to_vec_pretty(self).expect("checkpoint serializes");
        out.push(b'\n');
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CliError> {
        #[derive(Deserialize)]
        struct Version {
            format_version: u32,
        }
        let v: Version = serde_json::from_slice(bytes).map_err(|e| CliError::Config(format!("checkpoint: {e}")))?;
        if v.format_version != FORMAT_VERSION {
            return Err(CliError::Config(format!(
                "checkpoint format version {} is not supported (expected {FORMAT_VERSION})",
                v.format_version
            )));
        }
        serde_json::from_slice(bytes).map_err(|e| CliError::Config(format!("checkpoint: {e}")))
    }

    pub fn save(&self, path: &Path) -> Result<(), CliError> {
        super::write_file(path, &self.to_bytes())
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let bytes = std::fs::read(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_bytes(&bytes).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{init_rng, train_rng, OptimConfig};

    fn sample_ckpt() -> Checkpoint {
        let model = IveGanModel::new(Architecture::ring(2, 4), &OptimConfig::default(), &mut init_rng(1)).unwrap();
        Checkpoint::capture(&AnyModel::Ive(model), Experiment::Ring, 0, "h".into(), &train_rng(1))
    }

    #[test]
    fn save_load_save_is_byte_identical() {
        let ck = sample_ckpt();
        let bytes = ck.to_bytes();
        let back = Checkpoint::from_bytes(&bytes).unwrap();
        assert_eq!(back.to_bytes(), bytes);
        let model = back.restore().unwrap();
        let again = Checkpoint::capture(&model, Experiment::Ring, 0, "h".into(), &back.rng);
        assert_eq!(again.to_bytes(), bytes);
    }

    #[test]
    fn doubles_survive_exactly() {
        let xs = [0.1, -0.0, f64::MIN_POSITIVE, 1.0 / 3.0, 1e300];
        let back = decode_f64s(&encode_f64s(&xs), xs.len(), "x").unwrap();
        for (a, b) in xs.iter().zip(&back) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn version_mismatch_rejected() {
        let mut ck = sample_ckpt();
        ck.format_version = 99;
        let err = Checkpoint::from_bytes(&ck.to_bytes()).unwrap_err();
        assert!(err.to_string().contains("version 99"));
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let mut ck = sample_ckpt();
        ck.arch = Architecture::ring(3, 4);
        assert!(ck.restore().is_err());
        let mut ck = sample_ckpt();
        ck.networks[0].layers[0].weight = encode_f64s(&[0.0; 3]);
        assert!(ck.restore().is_err());
    }
}
