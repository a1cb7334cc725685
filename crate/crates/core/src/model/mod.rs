//! The invariant-encoding GAN: encoder `E`, generator `G`, pair
//! discriminator `D(x, ·)` and single-input discriminator `D′`, plus a
//! classical two-network GAN used as the mode-collapse baseline.

mod arch;
mod objective;
mod train;
mod vanilla;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::{AutodiffError, NodeId, Tape, Tensor};
use crate::nn::{AdamConfig, AdamState, BoundNetwork, Network, NnError};
use crate::transforms::{sample_transform, TransformError, TransformSpec};

pub use arch::{Architecture, LRELU_SLOPE};
pub use objective::{build_objective, build_vanilla_objective, mean_log_d, mean_log_one_minus_d, GeneratorLoss, NovelTerm, ObjectiveNodes, TermLogits};
pub use train::{init_rng, train_rng, snapshot_schedule, train, train_vanilla, DataSource, GanModel, Snapshot, TrainConfig, TrainOutcome, Trainer};
pub use vanilla::VanillaGan;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid architecture: {0}")]
    Architecture(String),
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error("{what}: expected width {expected}, got {found}")]
    Width {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("non-finite value at iteration {iteration} ({detail})")]
    NonFinite { iteration: u64, detail: String },
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
    #[error(transparent)]
    Transform(#[from] TransformError),
}

/// Optimizer settings for the three players.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimConfig {
    pub lr_ge: f64,
    pub lr_d: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for OptimConfig {
    fn default() -> Self {
        Self {
            lr_ge: 2e-4,
            lr_d: 1e-4,
            beta1: 0.7,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl OptimConfig {
    pub fn generator(&self) -> AdamConfig {
        AdamConfig {
            lr: self.lr_ge,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.eps,
        }
    }

    pub fn discriminator(&self) -> AdamConfig {
        AdamConfig {
            lr: self.lr_d,
            ..self.generator()
        }
    }
}

/// `z ~ U(−1, 1)^n`
pub fn sample_prior_z<R: Rng + ?Sized>(rows: usize, dim: usize, rng: &mut R) -> Tensor {
    let data = (0..rows * dim).map(|_| rng.random_range(-1.0..1.0)).collect();
    Tensor::matrix(rows, dim, data).expect("finite uniform draws")
}

/// `z′ ~ N(0, I)`
pub fn sample_prior_zprime<R: Rng + ?Sized>(rows: usize, dim: usize, rng: &mut R) -> Tensor {
    let data = (0..rows * dim).map(|_| StandardNormal.sample(rng)).collect();
    Tensor::matrix(rows, dim, data).expect("finite normal draws")
}

/// Losses and mean logits of one training step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    pub iteration: u64,
    /// Pair discriminator loss; absent for the classical baseline.
    pub loss_d: Option<f64>,
    /// Single-input discriminator loss (the only discriminator of the baseline).
    pub loss_dprime: f64,
    pub loss_ge: f64,
    pub logit_real_pair: Option<f64>,
    pub logit_fake_pair: Option<f64>,
    pub logit_real: f64,
    pub logit_novel: f64,
}

impl StepReport {
    pub fn is_finite(&self) -> bool {
        [
            self.loss_d.unwrap_or(0.0),
            self.loss_dprime,
            self.loss_ge,
            self.logit_real_pair.unwrap_or(0.0),
            self.logit_fake_pair.unwrap_or(0.0),
            self.logit_real,
            self.logit_novel,
        ]
        .iter()
        .all(|v| v.is_finite())
    }
}

/// All four expectation terms evaluated on one batch, without any update.
#[derive(Clone, Debug, PartialEq)]
pub struct ObjectiveValues {
    /// `[E log D(x,T(x)), E log D′(x), E log(1−D(x,G(z′,E(x)))), E log(1−D′(G(z′,z)))]`
    pub terms: [f64; 4],
    pub loss_d: f64,
    pub loss_dprime: f64,
    pub loss_ge: f64,
}

impl ObjectiveValues {
    pub fn value(&self) -> f64 {
        self.terms.iter().sum()
    }
}

/// Random draws consumed by one evaluation of the objective.
#[derive(Clone, Debug)]
struct Draws {
    transformed: Option<Tensor>,
    zprime_rec: Tensor,
    z_novel: Tensor,
    zprime_novel: Tensor,
}

#[derive(Clone, Debug, PartialEq)]
pub struct IveGanModel {
    pub arch: Architecture,
    pub encoder: Network,
    pub generator: Network,
    pub disc: Network,
    pub disc_prime: Network,
    /// One state over the encoder parameters followed by the generator's.
    pub adam_ge: AdamState,
    pub adam_d: AdamState,
    pub adam_dprime: AdamState,
}

fn check_width(what: &'static str, t: &Tensor, expected: usize) -> Result<(), ModelError> {
    if t.shape().len() != 2 || t.cols() != expected {
        return Err(ModelError::Width {
            what,
            expected,
            found: t.cols(),
        });
    }
    Ok(())
}

/// Maps numeric failures inside a step to `NonFinite` with the iteration.
fn non_finite(iteration: u64) -> impl Fn(ModelError) -> ModelError {
    move |e| match e {
        ModelError::Autodiff(a) => ModelError::NonFinite {
            iteration,
            detail: a.to_string(),
        },
        ModelError::Nn(n @ (NnError::NonFiniteGrad { .. } | NnError::NonFiniteParam { .. })) => ModelError::NonFinite {
            iteration,
            detail: n.to_string(),
        },
        other => other,
    }
}

struct Bound {
    encoder: BoundNetwork,
    generator: BoundNetwork,
    disc: BoundNetwork,
    disc_prime: BoundNetwork,
}

impl IveGanModel {
    pub fn new<R: Rng + ?Sized>(arch: Architecture, optim: &OptimConfig, rng: &mut R) -> Result<Self, ModelError> {
        arch.validate()?;
        let encoder = Network::init(&arch.encoder, rng)?;
        let generator = Network::init(&arch.generator, rng)?;
        let disc = Network::init(&arch.disc, rng)?;
        let disc_prime = Network::init(&arch.disc_prime, rng)?;
        let adam_ge = AdamState::new(optim.generator(), encoder.params().into_iter().chain(generator.params()));
        let adam_d = AdamState::new(optim.discriminator(), disc.params());
        let adam_dprime = AdamState::new(optim.discriminator(), disc_prime.params());
        Ok(Self {
            arch,
            encoder,
            generator,
            disc,
            disc_prime,
            adam_ge,
            adam_d,
            adam_dprime,
        })
    }

    pub fn data_dim(&self) -> usize {
        self.arch.data_dim
    }

    pub fn z_dim(&self) -> usize {
        self.arch.z_dim
    }

    pub fn zprime_dim(&self) -> usize {
        self.arch.zprime_dim
    }

    /// `E(x)`, each component in `(−1, 1)`.
    pub fn encode(&self, x: &Tensor) -> Result<Tensor, ModelError> {
        check_width("encode input", x, self.data_dim())?;
        Ok(self.encoder.predict(x)?)
    }

    /// `G(z′, z)`
    pub fn generate(&self, zprime: &Tensor, z: &Tensor) -> Result<Tensor, ModelError> {
        check_width("z′", zprime, self.zprime_dim())?;
        check_width("z", z, self.z_dim())?;
        let mut tape = Tape::new();
        let g = self.generator.bind(&mut tape, false);
        let zp = tape.constant(zprime.clone());
        let zz = tape.constant(z.clone());
        let input = tape.concat(zp, zz)?;
        let out = g.forward(&mut tape, input)?;
        Ok(tape.value(out).clone())
    }

    /// `G(z′, E(x))` with fresh `z′ ~ N(0, I)`.
    pub fn reconstruct<R: Rng + ?Sized>(&self, x: &Tensor, rng: &mut R) -> Result<Tensor, ModelError> {
        let z = self.encode(x)?;
        let zprime = sample_prior_zprime(x.rows(), self.zprime_dim(), rng);
        self.generate(&zprime, &z)
    }

    /// Novel samples `G(z′, z)`, `z ~ U(−1, 1)`, `z′ ~ N(0, I)`.
    pub fn sample_novel<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Tensor, ModelError> {
        if n == 0 {
            return Ok(Tensor::zeros(&[0, self.data_dim()]));
        }
        let zprime = sample_prior_zprime(n, self.zprime_dim(), rng);
        let z = sample_prior_z(n, self.z_dim(), rng);
        self.generate(&zprime, &z)
    }

    /// Decodes `steps` evenly spaced points on the segment from `E(x_a)` to
    /// `E(x_b)` with one shared `z′`. Returns `(latents, generated)`.
    pub fn interpolate<R: Rng + ?Sized>(&self, x_a: &[f64], x_b: &[f64], steps: usize, rng: &mut R) -> Result<(Tensor, Tensor), ModelError> {
        if steps < 2 {
            return Err(ModelError::Config("interpolation needs at least 2 steps".into()));
        }
        let pair = Tensor::matrix(2, x_a.len(), [x_a, x_b].concat())?;
        if x_a.len() != x_b.len() {
            return Err(ModelError::Width {
                what: "interpolation endpoint",
                expected: x_a.len(),
                found: x_b.len(),
            });
        }
        let ends = self.encode(&pair)?;
        let (za, zb) = (ends.row(0), ends.row(1));
        let mut lat = Vec::with_capacity(steps * za.len());
        for s in 0..steps {
            let lambda = s as f64 / (steps - 1) as f64;
            lat.extend(za.iter().zip(zb).map(|(a, b)| if s + 1 == steps { *b } else { a + lambda * (b - a) }));
        }
        let latents = Tensor::matrix(steps, za.len(), lat)?;
        let one = sample_prior_zprime(1, self.zprime_dim(), rng);
        let zprime = one.select_rows(&vec![0; steps]);
        let generated = self.generate(&zprime, &latents)?;
        Ok((latents, generated))
    }

    fn draw<R: Rng + ?Sized>(&self, x: &Tensor, transform: Option<&TransformSpec>, rng: &mut R) -> Result<Draws, ModelError> {
        let b = x.rows();
        let transformed = match transform {
            Some(t) => Some(sample_transform(t, x, rng)?),
            None => None,
        };
        Ok(Draws {
            transformed,
            zprime_rec: sample_prior_zprime(b, self.zprime_dim(), rng),
            z_novel: sample_prior_z(b, self.z_dim(), rng),
            zprime_novel: sample_prior_zprime(b, self.zprime_dim(), rng),
        })
    }

    fn bind(&self, tape: &mut Tape, train_generator: bool, train_disc: bool) -> Bound {
        Bound {
            encoder: self.encoder.bind(tape, train_generator),
            generator: self.generator.bind(tape, train_generator),
            disc: self.disc.bind(tape, train_disc),
            disc_prime: self.disc_prime.bind(tape, train_disc),
        }
    }

    /// Records every network application the objective needs and returns the
    /// four logit nodes. Without a transformed batch the `real_pair` logit is
    /// computed on `(x, x)`; it is unused by the generator phase.
    fn record(&self, tape: &mut Tape, nets: &Bound, x: &Tensor, draws: &Draws, novel_term: NovelTerm) -> Result<TermLogits, ModelError> {
        let xn = tape.constant(x.clone());
        let z_enc = nets.encoder.forward(tape, xn)?;
        let zp = tape.constant(draws.zprime_rec.clone());
        let g_in = tape.concat(zp, z_enc)?;
        let recon = nets.generator.forward(tape, g_in)?;

        let novel = match novel_term {
            NovelTerm::Prior => {
                let zpn = tape.constant(draws.zprime_novel.clone());
                let zn = tape.constant(draws.z_novel.clone());
                let g_in = tape.concat(zpn, zn)?;
                nets.generator.forward(tape, g_in)?
            }
            NovelTerm::Encoded => {
                let zpn = tape.constant(draws.zprime_novel.clone());
                let g_in = tape.concat(zpn, z_enc)?;
                nets.generator.forward(tape, g_in)?
            }
        };

        let other = match &draws.transformed {
            Some(t) => tape.constant(t.clone()),
            None => xn,
        };
        let real_pair_in = tape.concat(xn, other)?;
        let real_pair = nets.disc.forward(tape, real_pair_in)?;
        let fake_pair_in = tape.concat(xn, recon)?;
        let fake_pair = nets.disc.forward(tape, fake_pair_in)?;
        let real = nets.disc_prime.forward(tape, xn)?;
        let novel = nets.disc_prime.forward(tape, novel)?;
        Ok(TermLogits {
            real_pair,
            fake_pair,
            real,
            novel,
        })
    }

    /// Evaluates all four terms and the three losses on one batch.
    pub fn objective<R: Rng + ?Sized>(
        &self,
        x: &Tensor,
        transform: &TransformSpec,
        mode: GeneratorLoss,
        novel_term: NovelTerm,
        rng: &mut R,
    ) -> Result<ObjectiveValues, ModelError> {
        check_width("batch", x, self.data_dim())?;
        let draws = self.draw(x, Some(transform), rng)?;
        let mut tape = Tape::new();
        let nets = self.bind(&mut tape, false, false);
        let logits = self.record(&mut tape, &nets, x, &draws, novel_term)?;
        let o = build_objective(&mut tape, logits, mode)?;
        let v = |n: NodeId| tape.value(n).item();
        Ok(ObjectiveValues {
            terms: [v(o.terms[0])?, v(o.terms[1])?, v(o.terms[2])?, v(o.terms[3])?],
            loss_d: v(o.loss_d)?,
            loss_dprime: v(o.loss_dprime)?,
            loss_ge: v(o.loss_ge)?,
        })
    }

    /// `loss_GE` alone, with the same draws as [`Self::encoder_gradient`].
    pub fn generator_loss<R: Rng + ?Sized>(&self, x: &Tensor, mode: GeneratorLoss, novel_term: NovelTerm, rng: &mut R) -> Result<f64, ModelError> {
        check_width("batch", x, self.data_dim())?;
        let draws = self.draw(x, None, rng)?;
        let mut tape = Tape::new();
        let nets = self.bind(&mut tape, false, false);
        let logits = self.record(&mut tape, &nets, x, &draws, novel_term)?;
        let o = build_objective(&mut tape, logits, mode)?;
        Ok(tape.value(o.loss_ge).item()?)
    }

    /// Gradient of `loss_ge` with respect to the encoder parameters, for
    /// inspection. Uses the same draws as a training step would.
    pub fn encoder_gradient<R: Rng + ?Sized>(&self, x: &Tensor, mode: GeneratorLoss, novel_term: NovelTerm, rng: &mut R) -> Result<Vec<Tensor>, ModelError> {
        let draws = self.draw(x, None, rng)?;
        let mut tape = Tape::new();
        let nets = self.bind(&mut tape, true, false);
        let logits = self.record(&mut tape, &nets, x, &draws, novel_term)?;
        let o = build_objective(&mut tape, logits, mode)?;
        let grads = tape.backward(o.loss_ge)?;
        Ok(nets.encoder.collect_grads(&grads)?.into_iter().cloned().collect())
    }

    /// One Adam update of `D` and `D′` on their losses; `E` and `G` are
    /// untouched. Returns `(loss_D, loss_D′, mean logits of the four terms)`.
    pub fn discriminator_step<R: Rng + ?Sized>(
        &mut self,
        x: &Tensor,
        iteration: u64,
        cfg: &TrainConfig,
        rng: &mut R,
    ) -> Result<(f64, f64, [f64; 4]), ModelError> {
        check_width("batch", x, self.data_dim())?;
        let nf = non_finite(iteration);
        let draws = self.draw(x, Some(&cfg.transform), rng)?;
        let mut tape = Tape::new();
        let nets = self.bind(&mut tape, false, true);
        let logits = self.record(&mut tape, &nets, x, &draws, cfg.novel_term).map_err(&nf)?;
        let o = build_objective(&mut tape, logits, cfg.generator_loss).map_err(|e| nf(e.into()))?;
        let total = tape.add(o.loss_d, o.loss_dprime).map_err(|e| nf(e.into()))?;
        let grads = tape.backward(total).map_err(|e| nf(e.into()))?;
        let mean = |n: NodeId| tape.value(n).data().iter().sum::<f64>() / tape.value(n).len() as f64;
        let means = [mean(logits.real_pair), mean(logits.fake_pair), mean(logits.real), mean(logits.novel)];
        let loss_d = tape.value(o.loss_d).item()?;
        let loss_dprime = tape.value(o.loss_dprime).item()?;
        let g = nets.disc.collect_grads(&grads)?;
        self.adam_d.update(&mut self.disc.params_mut(), &g).map_err(|e| nf(e.into()))?;
        let g = nets.disc_prime.collect_grads(&grads)?;
        self.adam_dprime.update(&mut self.disc_prime.params_mut(), &g).map_err(|e| nf(e.into()))?;
        Ok((loss_d, loss_dprime, means))
    }

    /// One joint Adam update of `E` and `G` on `loss_GE`; both
    /// discriminators are untouched. Returns `loss_GE`.
    pub fn generator_step<R: Rng + ?Sized>(
        &mut self,
        x: &Tensor,
        iteration: u64,
        cfg: &TrainConfig,
        rng: &mut R,
    ) -> Result<f64, ModelError> {
        check_width("batch", x, self.data_dim())?;
        let nf = non_finite(iteration);
        let draws = self.draw(x, None, rng)?;
        let mut tape = Tape::new();
        let nets = self.bind(&mut tape, true, false);
        let logits = self.record(&mut tape, &nets, x, &draws, cfg.novel_term).map_err(&nf)?;
        let o = build_objective(&mut tape, logits, cfg.generator_loss).map_err(|e| nf(e.into()))?;
        let grads = tape.backward(o.loss_ge).map_err(|e| nf(e.into()))?;
        let loss_ge = tape.value(o.loss_ge).item()?;
        let mut g = nets.encoder.collect_grads(&grads)?;
        g.extend(nets.generator.collect_grads(&grads)?);
        let mut params = self.encoder.params_mut();
        params.extend(self.generator.params_mut());
        self.adam_ge.update(&mut params, &g).map_err(|e| nf(e.into()))?;
        Ok(loss_ge)
    }

    /// One discriminator update (both `D` and `D′`) followed by one joint
    /// encoder/generator update, each phase with fresh latent draws.
    pub fn train_step<R: Rng + ?Sized>(
        &mut self,
        x: &Tensor,
        iteration: u64,
        cfg: &TrainConfig,
        rng: &mut R,
    ) -> Result<StepReport, ModelError> {
        let (loss_d, loss_dprime, [lrp, lfp, lr, ln]) = self.discriminator_step(x, iteration, cfg, rng)?;
        let loss_ge = self.generator_step(x, iteration, cfg, rng)?;
        let report = StepReport {
            iteration,
            loss_d: Some(loss_d),
            loss_dprime,
            loss_ge,
            logit_real_pair: Some(lrp),
            logit_fake_pair: Some(lfp),
            logit_real: lr,
            logit_novel: ln,
        };
        if !report.is_finite() {
            return Err(ModelError::NonFinite {
                iteration,
                detail: format!("{report:?}"),
            });
        }
        Ok(report)
    }
}
