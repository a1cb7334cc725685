use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::CliError;
use crate::data::{downscale, load_idx, LabeledImages, RingSpec};
use crate::model::{Architecture, DataSource, GeneratorLoss, NovelTerm, OptimConfig, TrainConfig};
use crate::transforms::TransformSpec;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    Ring,
    MnistLite,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    #[default]
    IveGan,
    Vanilla,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDims {
    pub z_dim: usize,
    pub zprime_dim: usize,
    /// Hidden width of `E` and `G` (128 for the ring, 512 for MNIST-lite).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hidden: Option<usize>,
    /// Hidden width of both discriminators (MNIST-lite only, default 512).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub disc_hidden: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    pub iterations: u64,
    pub batch_size: usize,
    #[serde(default)]
    pub generator_loss: GeneratorLoss,
    #[serde(default)]
    pub novel_term: NovelTerm,
    #[serde(default)]
    pub optim: OptimConfig,
    #[serde(default = "default_snapshot_every")]
    pub snapshot_every: u64,
    #[serde(default = "default_snapshot_size")]
    pub snapshot_size: usize,
    /// Defaults to a Gaussian shift with the ring covariance, or ±2 px / ±20°
    /// image affine for MNIST-lite.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transform: Option<TransformSpec>,
}

fn default_snapshot_every() -> u64 {
    10_000
}

fn default_snapshot_size() -> usize {
    10_000
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSection {
    pub images: PathBuf,
    pub labels: PathBuf,
    #[serde(default = "default_limit")]
    pub limit: usize,
    #[serde(default = "default_downscale")]
    pub downscale: usize,
}

fn default_limit() -> usize {
    10_000
}

fn default_downscale() -> usize {
    2
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalSection {
    #[serde(default = "default_capture_k")]
    pub capture_k: f64,
    #[serde(default = "default_min_share")]
    pub min_share: f64,
    #[serde(default = "default_n_samples")]
    pub n_samples: usize,
    #[serde(default = "default_knn_k")]
    pub knn_k: usize,
}

fn default_capture_k() -> f64 {
    3.0
}

fn default_min_share() -> f64 {
    0.02
}

fn default_n_samples() -> usize {
    10_000
}

fn default_knn_k() -> usize {
    5
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            capture_k: default_capture_k(),
            min_share: default_min_share(),
            n_samples: default_n_samples(),
            knn_k: default_knn_k(),
        }
    }
}

/// Everything a `train` or `eval` invocation needs, read from one JSON file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: Experiment,
    #[serde(default)]
    pub model: ModelKind,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub dims: ModelDims,
    pub train: TrainSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ring: Option<RingSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset: Option<DatasetSection>,
    /// Defaults to `train.snapshot_every`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoint_every: Option<u64>,
    #[serde(default)]
    pub eval: EvalSection,
}

fn invalid(path: &Path, msg: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{}: {msg}", path.display()))
}

impl RunConfig {
    /// Reads and fully validates a config. Any failure, including a missing
    /// file, is a configuration error.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| invalid(path, e))?;
        let cfg: Self = serde_json::from_str(&text).map_err(|e| invalid(path, e))?;
        cfg.validate().map_err(|e| invalid(path, e))?;
        Ok(cfg)
    }

    /// The standard ring setup for one seed.
    pub fn ring_defaults(seed: u64, output_dir: impl Into<PathBuf>) -> Self {
        Self {
            experiment: Experiment::Ring,
            model: ModelKind::IveGan,
            seed,
            output_dir: output_dir.into(),
            dims: ModelDims {
                z_dim: 2,
                zprime_dim: 4,
                hidden: None,
                disc_hidden: None,
            },
            train: TrainSection {
                iterations: 50_000,
                batch_size: 1024,
                generator_loss: GeneratorLoss::default(),
                novel_term: NovelTerm::default(),
                optim: OptimConfig::default(),
                snapshot_every: default_snapshot_every(),
                snapshot_size: default_snapshot_size(),
                transform: None,
            },
            ring: Some(RingSpec::default()),
            dataset: None,
            checkpoint_every: None,
            eval: EvalSection::default(),
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        match self.experiment {
            Experiment::Ring => {
                if self.dataset.is_some() {
                    return Err("ring experiments take no dataset section".into());
                }
                self.ring_spec().validate().map_err(|e| e.to_string())?;
                if self.dims.disc_hidden.is_some() {
                    return Err("disc_hidden applies to mnist_lite only".into());
                }
            }
            Experiment::MnistLite => {
                if self.ring.is_some() {
                    return Err("mnist_lite experiments take no ring section".into());
                }
                let Some(ds) = &self.dataset else {
                    return Err("mnist_lite requires a dataset section".into());
                };
                if ds.limit == 0 || ds.downscale == 0 {
                    return Err("dataset limit and downscale must be positive".into());
                }
            }
        }
        if self.dims.hidden == Some(0) || self.dims.disc_hidden == Some(0) {
            return Err("hidden widths must be positive".into());
        }
        if self.checkpoint_every == Some(0) {
            return Err("checkpoint_every must be positive".into());
        }
        let e = &self.eval;
        if !(e.capture_k > 0.0) || !(0.0..=1.0).contains(&e.min_share) || e.knn_k == 0 {
            return Err("eval settings out of range".into());
        }
        if self.experiment == Experiment::Ring && e.n_samples < crate::eval::COVERAGE_MIN_SAMPLES {
            return Err(format!("eval.n_samples must be at least {}", crate::eval::COVERAGE_MIN_SAMPLES));
        }
        self.train_config().validate().map_err(|e| e.to_string())?;
        self.architecture().validate().map_err(|e| e.to_string())?;
        if let TransformSpec::ImageAffine { height, width, .. } = self.transform() {
            if height * width != self.data_dim() {
                return Err(format!("image transform is {height}×{width} but samples have {} values", self.data_dim()));
            }
        }
        Ok(())
    }

    pub fn ring_spec(&self) -> RingSpec {
        self.ring.clone().unwrap_or_default()
    }

    /// Side length of the (square) images after downscaling.
    fn image_side(&self) -> usize {
        let factor = self.dataset.as_ref().map_or(2, |d| d.downscale.max(1));
        28 / factor
    }

    pub fn data_dim(&self) -> usize {
        match self.experiment {
            Experiment::Ring => 2,
            Experiment::MnistLite => self.image_side() * self.image_side(),
        }
    }

    pub fn transform(&self) -> TransformSpec {
        if let Some(t) = &self.train.transform {
            return t.clone();
        }
        match self.experiment {
            Experiment::Ring => TransformSpec::GaussianShift {
                sigma: self.ring_spec().covariance(),
            },
            Experiment::MnistLite => {
                let side = self.image_side();
                TransformSpec::ImageAffine {
                    height: side,
                    width: side,
                    max_shift_px: 2,
                    max_rot_deg: 20.0,
                }
            }
        }
    }

    pub fn architecture(&self) -> Architecture {
        let d = &self.dims;
        match self.experiment {
            Experiment::Ring => Architecture::ring_with_hidden(d.z_dim, d.zprime_dim, d.hidden.unwrap_or(128)),
            Experiment::MnistLite => Architecture::mnist_lite(
                self.data_dim(),
                d.z_dim,
                d.zprime_dim,
                d.hidden.unwrap_or(512),
                d.disc_hidden.unwrap_or(512),
            ),
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        let t = &self.train;
        TrainConfig {
            iterations: t.iterations,
            batch_size: t.batch_size,
            seed: self.seed,
            generator_loss: t.generator_loss,
            novel_term: t.novel_term,
            optim: t.optim,
            snapshot_every: t.snapshot_every,
            snapshot_size: t.snapshot_size,
            transform: self.transform(),
        }
    }

    pub fn checkpoint_every(&self) -> u64 {
        self.checkpoint_every.unwrap_or(self.train.snapshot_every)
    }

    /// SHA-256 over the settings that shape the training trajectory. The
    /// iteration budget, output location, cadences and evaluation settings
    /// are left out so a run can be resumed with a larger budget elsewhere.
    pub fn trajectory_hash(&self) -> String {
        let mut key = self.clone();
        key.output_dir = PathBuf::new();
        key.train.iterations = 0;
        key.train.snapshot_every = 0;
        key.train.snapshot_size = 0;
        key.checkpoint_every = None;
        key.eval = EvalSection::default();
        key.train.transform = Some(self.transform());
        key.ring = (self.experiment == Experiment::Ring).then(|| self.ring_spec());
        let bytes = serde_json::to_vec(&key).expect("config serializes");
        Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
    }

    /// The dataset this config trains on. Unreadable files are IO errors;
    /// malformed contents are configuration errors.
    pub fn load_images(&self) -> Result<Option<LabeledImages>, CliError> {
        let Some(ds) = &self.dataset else { return Ok(None) };
        for p in [&ds.images, &ds.labels] {
            std::fs::metadata(p).map_err(|source| CliError::Io { path: p.clone(), source })?;
        }
        let raw = load_idx(&ds.images, &ds.labels).map_err(|e| invalid(&ds.images, e))?;
        if raw.height != 28 || raw.width != 28 {
            return Err(invalid(&ds.images, format!("expected 28×28 images, found {}×{}", raw.height, raw.width)));
        }
        let images = downscale(&raw.take(ds.limit), ds.downscale).map_err(|e| invalid(&ds.images, e))?;
        Ok(Some(images))
    }

    pub fn data_source(&self, images: Option<&LabeledImages>) -> DataSource {
        match (self.experiment, images) {
            (Experiment::MnistLite, Some(imgs)) => DataSource::Rows(imgs.images.clone()),
            _ => DataSource::Ring(self.ring_spec()),
        }
    }
}
