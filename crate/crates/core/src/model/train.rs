use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Architecture, GeneratorLoss, IveGanModel, ModelError, NovelTerm, OptimConfig, StepReport, VanillaGan};
use crate::autodiff::Tensor;
use crate::data::{sample_ring, RingSpec};
use crate::transforms::TransformSpec;

const TRAIN_STREAM: u64 = 0;
const INIT_STREAM: u64 = 1;
const SNAPSHOT_STREAM: u64 = 2;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub iterations: u64,
    pub batch_size: usize,
    pub seed: u64,
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
    pub transform: TransformSpec,
}

fn default_snapshot_every() -> u64 {
    10_000
}

fn default_snapshot_size() -> usize {
    10_000
}

impl TrainConfig {
    /// Batch 1024, 50k iterations, Adam 2e-4 / 1e-4 with β₁ = 0.7, and a
    /// Gaussian shift transform with the ring's own covariance.
    pub fn ring_defaults(ring: &RingSpec, seed: u64) -> Self {
        Self {
            iterations: 50_000,
            batch_size: 1024,
            seed,
            generator_loss: GeneratorLoss::NonSaturating,
            novel_term: NovelTerm::Prior,
            optim: OptimConfig::default(),
            snapshot_every: default_snapshot_every(),
            snapshot_size: default_snapshot_size(),
            transform: TransformSpec::GaussianShift { sigma: ring.covariance() },
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: &str| Err(ModelError::Config(m.to_string()));
        if self.iterations < 1 {
            return bad("iterations must be at least 1");
        }
        if self.batch_size < 2 {
            return bad("batch_size must be at least 2");
        }
        if self.snapshot_every < 1 || self.snapshot_every > self.iterations {
            return bad("snapshot_every must lie in [1, iterations]");
        }
        let o = &self.optim;
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if !(ok(o.lr_ge) && ok(o.lr_d) && ok(o.eps) && (0.0..1.0).contains(&o.beta1) && (0.0..1.0).contains(&o.beta2)) {
            return bad("optimizer settings out of range");
        }
        self.transform.validate()?;
        Ok(())
    }
}

/// Iterations at which generator snapshots are taken: `0, every, 2·every, …`.
pub fn snapshot_schedule(iterations: u64, every: u64) -> Vec<u64> {
    (0..=iterations).step_by(every.max(1) as usize).collect()
}

/// Where training batches come from.
#[derive(Clone, Debug)]
pub enum DataSource {
    Ring(RingSpec),
    /// Rows of a fixed dataset, sampled uniformly with replacement.
    Rows(Tensor),
}

impl DataSource {
    pub fn data_dim(&self) -> usize {
        match self {
            DataSource::Ring(_) => 2,
            DataSource::Rows(t) => t.cols(),
        }
    }

    pub fn batch<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Tensor {
        match self {
            DataSource::Ring(spec) => sample_ring(spec, n, rng),
            DataSource::Rows(t) => {
                let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..t.rows())).collect();
                t.select_rows(&idx)
            }
        }
    }
}

/// Anything the training loop can drive.
pub trait GanModel: Clone {
    fn train_step(&mut self, x: &Tensor, iteration: u64, cfg: &TrainConfig, rng: &mut ChaCha8Rng) -> Result<StepReport, ModelError>;
    fn sample_novel(&self, n: usize, rng: &mut ChaCha8Rng) -> Result<Tensor, ModelError>;
    fn data_dim(&self) -> usize;
}

impl GanModel for IveGanModel {
    fn train_step(&mut self, x: &Tensor, iteration: u64, cfg: &TrainConfig, rng: &mut ChaCha8Rng) -> Result<StepReport, ModelError> {
        IveGanModel::train_step(self, x, iteration, cfg, rng)
    }

    fn sample_novel(&self, n: usize, rng: &mut ChaCha8Rng) -> Result<Tensor, ModelError> {
        IveGanModel::sample_novel(self, n, rng)
    }

    fn data_dim(&self) -> usize {
        IveGanModel::data_dim(self)
    }
}

impl GanModel for VanillaGan {
    fn train_step(&mut self, x: &Tensor, iteration: u64, cfg: &TrainConfig, rng: &mut ChaCha8Rng) -> Result<StepReport, ModelError> {
        VanillaGan::train_step(self, x, iteration, cfg, rng)
    }

    fn sample_novel(&self, n: usize, rng: &mut ChaCha8Rng) -> Result<Tensor, ModelError> {
        VanillaGan::sample_novel(self, n, rng)
    }

    fn data_dim(&self) -> usize {
        self.arch.data_dim
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub iteration: u64,
    pub samples: Tensor,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome<M> {
    pub model: M,
    pub history: Vec<StepReport>,
    pub snapshots: Vec<Snapshot>,
}

/// Resumable training loop.
///
/// All randomness of the steps comes from one ChaCha stream whose state is
/// part of the trainer, so stopping after `t` steps and continuing from the
/// saved `(model, rng, t)` reproduces an uninterrupted run exactly. Snapshot
/// samples use a separate stream keyed by the iteration.
#[derive(Clone, Debug)]
pub struct Trainer<M> {
    pub model: M,
    pub config: TrainConfig,
    pub data: DataSource,
    rng: ChaCha8Rng,
    iteration: u64,
}

/// Generator for model initialization.
pub fn init_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(INIT_STREAM);
    rng
}

/// Generator for the training steps.
pub fn train_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(TRAIN_STREAM);
    rng
}

fn snapshot_rng(seed: u64, iteration: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ iteration.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    rng.set_stream(SNAPSHOT_STREAM);
    rng
}

impl<M: GanModel> Trainer<M> {
    pub fn new(model: M, config: TrainConfig, data: DataSource) -> Result<Self, ModelError> {
        let rng = train_rng(config.seed);
        Self::resume(model, config, data, rng, 0)
    }

    /// Continues from a saved state after `iteration` completed steps.
    pub fn resume(model: M, config: TrainConfig, data: DataSource, rng: ChaCha8Rng, iteration: u64) -> Result<Self, ModelError> {
        config.validate()?;
        if data.data_dim() != model.data_dim() {
            return Err(ModelError::Width {
                what: "data source",
                expected: model.data_dim(),
                found: data.data_dim(),
            });
        }
        Ok(Self {
            model,
            config,
            data,
            rng,
            iteration,
        })
    }

    pub fn iteration(&self) -> u64 {
        self.iteration
    }

    pub fn rng(&self) -> &ChaCha8Rng {
        &self.rng
    }

    pub fn is_done(&self) -> bool {
        self.iteration >= self.config.iterations
    }

    /// Draws a batch and performs one update.
    pub fn step(&mut self) -> Result<StepReport, ModelError> {
        let x = self.data.batch(self.config.batch_size, &mut self.rng);
        let next = self.iteration + 1;
        let report = self.model.train_step(&x, next, &self.config, &mut self.rng)?;
        self.iteration = next;
        Ok(report)
    }

    /// Novel samples for the current iteration, drawn from a stream keyed by
    /// `(seed, iteration)`.
    pub fn snapshot(&self) -> Result<Snapshot, ModelError> {
        let mut rng = snapshot_rng(self.config.seed, self.iteration);
        Ok(Snapshot {
            iteration: self.iteration,
            samples: self.model.sample_novel(self.config.snapshot_size, &mut rng)?,
        })
    }

    fn snapshot_due(&self) -> bool {
        self.iteration % self.config.snapshot_every == 0
    }

    /// Runs until `until` steps are complete (capped at the configured
    /// total), calling `on_step` after each step and `on_snapshot` whenever
    /// the schedule asks for one. Iteration 0 is snapshotted when starting
    /// fresh.
    pub fn run_until(
        &mut self,
        until: u64,
        mut on_step: impl FnMut(&StepReport, &Self) -> Result<(), ModelError>,
        mut on_snapshot: impl FnMut(Snapshot) -> Result<(), ModelError>,
    ) -> Result<(), ModelError> {
        let until = until.min(self.config.iterations);
        if self.iteration == 0 && until > 0 {
            on_snapshot(self.snapshot()?)?;
        }
        while self.iteration < until {
            let report = self.step()?;
            on_step(&report, self)?;
            if self.snapshot_due() {
                on_snapshot(self.snapshot()?)?;
            }
        }
        Ok(())
    }

    pub fn into_state(self) -> (M, ChaCha8Rng, u64) {
        (self.model, self.rng, self.iteration)
    }
}

fn run_all<M: GanModel>(model: M, config: &TrainConfig, data: DataSource) -> Result<TrainOutcome<M>, ModelError> {
    let mut trainer = Trainer::new(model, config.clone(), data)?;
    let mut history = Vec::with_capacity(config.iterations as usize);
    let mut snapshots = Vec::new();
    trainer.run_until(
        config.iterations,
        |r, _| {
            history.push(r.clone());
            Ok(())
        },
        |s| {
            snapshots.push(s);
            Ok(())
        },
    )?;
    Ok(TrainOutcome {
        model: trainer.model,
        history,
        snapshots,
    })
}

/// Trains an invariant-encoding GAN from scratch.
pub fn train(arch: Architecture, config: &TrainConfig, data: DataSource) -> Result<TrainOutcome<IveGanModel>, ModelError> {
    config.validate()?;
    let model = IveGanModel::new(arch, &config.optim, &mut init_rng(config.seed))?;
    run_all(model, config, data)
}

/// Trains the classical two-network baseline on the same data and budget.
pub fn train_vanilla(arch: Architecture, config: &TrainConfig, data: DataSource) -> Result<TrainOutcome<VanillaGan>, ModelError> {
    config.validate()?;
    let model = VanillaGan::new(arch, &config.optim, &mut init_rng(config.seed))?;
    run_all(model, config, data)
}
