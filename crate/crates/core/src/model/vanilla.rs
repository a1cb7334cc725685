use rand::Rng;

use super::{build_vanilla_objective, check_width, sample_prior_z, sample_prior_zprime, Architecture, ModelError, OptimConfig, StepReport, TrainConfig};
use crate::autodiff::{Tape, Tensor};
use crate::nn::{AdamState, Network, NnError};

/// Classical GAN: one generator and one single-input discriminator.
///
/// The generator has the same input width and layers as the IVE-GAN
/// generator and is fed the same prior `(z′, z)`; the discriminator uses the
/// single-input discriminator layers. Only the objective differs.
#[derive(Clone, Debug, PartialEq)]
pub struct VanillaGan {
    pub arch: Architecture,
    pub generator: Network,
    pub disc: Network,
    pub adam_g: AdamState,
    pub adam_d: AdamState,
}

impl VanillaGan {
    pub fn new<R: Rng + ?Sized>(arch: Architecture, optim: &OptimConfig, rng: &mut R) -> Result<Self, ModelError> {
        arch.validate()?;
        let generator = Network::init(&arch.generator, rng)?;
        let disc = Network::init(&arch.disc_prime, rng)?;
        let adam_g = AdamState::new(optim.generator(), generator.params());
        let adam_d = AdamState::new(optim.discriminator(), disc.params());
        Ok(Self {
            arch,
            generator,
            disc,
            adam_g,
            adam_d,
        })
    }

    fn latent<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> (Tensor, Tensor) {
        (sample_prior_zprime(n, self.arch.zprime_dim, rng), sample_prior_z(n, self.arch.z_dim, rng))
    }

    pub fn sample_novel<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Tensor, ModelError> {
        if n == 0 {
            return Ok(Tensor::zeros(&[0, self.arch.data_dim]));
        }
        let (zp, z) = self.latent(n, rng);
        let mut tape = Tape::new();
        let g = self.generator.bind(&mut tape, false);
        let zp = tape.constant(zp);
        let z = tape.constant(z);
        let input = tape.concat(zp, z)?;
        let out = g.forward(&mut tape, input)?;
        Ok(tape.value(out).clone())
    }

    /// `E log D(x) + E log(1 − D(G(z)))` on one batch.
    pub fn value<R: Rng + ?Sized>(&self, x: &Tensor, rng: &mut R) -> Result<f64, ModelError> {
        check_width("batch", x, self.arch.data_dim)?;
        let (zp, z) = self.latent(x.rows(), rng);
        let mut tape = Tape::new();
        let g = self.generator.bind(&mut tape, false);
        let d = self.disc.bind(&mut tape, false);
        let xn = tape.constant(x.clone());
        let zp = tape.constant(zp);
        let z = tape.constant(z);
        let input = tape.concat(zp, z)?;
        let fake = g.forward(&mut tape, input)?;
        let lr = d.forward(&mut tape, xn)?;
        let lf = d.forward(&mut tape, fake)?;
        let [t1, t2, _, _] = build_vanilla_objective(&mut tape, lr, lf, Default::default())?;
        Ok(tape.value(t1).item()? + tape.value(t2).item()?)
    }

    fn phase(&self, x: &Tensor, train_g: bool, cfg: &TrainConfig, rng: &mut impl Rng) -> Result<(Tape, [crate::autodiff::NodeId; 6], crate::nn::BoundNetwork, crate::nn::BoundNetwork), ModelError> {
        let (zp, z) = self.latent(x.rows(), rng);
        let mut tape = Tape::new();
        let g = self.generator.bind(&mut tape, train_g);
        let d = self.disc.bind(&mut tape, !train_g);
        let xn = tape.constant(x.clone());
        let zp = tape.constant(zp);
        let z = tape.constant(z);
        let input = tape.concat(zp, z)?;
        let fake = g.forward(&mut tape, input)?;
        let lr = d.forward(&mut tape, xn)?;
        let lf = d.forward(&mut tape, fake)?;
        let [t1, t2, loss_d, loss_g] = build_vanilla_objective(&mut tape, lr, lf, cfg.generator_loss)?;
        Ok((tape, [t1, t2, loss_d, loss_g, lr, lf], g, d))
    }

    pub fn train_step<R: Rng + ?Sized>(&mut self, x: &Tensor, iteration: u64, cfg: &TrainConfig, rng: &mut R) -> Result<StepReport, ModelError> {
        check_width("batch", x, self.arch.data_dim)?;
        let nf = |detail: String| ModelError::NonFinite { iteration, detail };
        let mut rng = rng;

        let (tape, [_, _, loss_d, _, lr, lf], _, d) = self.phase(x, false, cfg, &mut rng).map_err(|e| nf(e.to_string()))?;
        let grads = tape.backward(loss_d).map_err(|e| nf(e.to_string()))?;
        let mean = |t: &Tape, n| {
            let v: &Tensor = t.value(n);
            v.data().iter().sum::<f64>() / v.len() as f64
        };
        let (logit_real, logit_novel) = (mean(&tape, lr), mean(&tape, lf));
        let loss_dprime = tape.value(loss_d).item()?;
        let g = d.collect_grads(&grads)?;
        self.adam_d.update(&mut self.disc.params_mut(), &g).map_err(|e: NnError| nf(e.to_string()))?;

        let (tape, [_, _, _, loss_g, _, _], gen, _) = self.phase(x, true, cfg, &mut rng).map_err(|e| nf(e.to_string()))?;
        let grads = tape.backward(loss_g).map_err(|e| nf(e.to_string()))?;
        let loss_ge = tape.value(loss_g).item()?;
        let g = gen.collect_grads(&grads)?;
        self.adam_g.update(&mut self.generator.params_mut(), &g).map_err(|e: NnError| nf(e.to_string()))?;

        Ok(StepReport {
            iteration,
            loss_d: None,
            loss_dprime,
            loss_ge,
            logit_real_pair: None,
            logit_fake_pair: None,
            logit_real,
            logit_novel,
        })
    }
}
