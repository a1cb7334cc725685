//! Trains on 14×14 MNIST digits with a 3-dimensional latent space and
//! reports reconstruction error and latent nearest-neighbor label agreement.
//!
//! ```text
//! cargo run --release --example mnist_lite -- <mnist-dir> [seed] [iterations] [batch]
//! ```
//!
//! `<mnist-dir>` must contain `train-images-idx3-ubyte` and
//! `train-labels-idx1-ubyte`. `EVAL_EVERY` sets the evaluation interval.

use std::path::PathBuf;
use std::time::Instant;

use ivegan::data::{downscale, load_idx};
use ivegan::eval::{latent_knn_agreement, reconstruction_error};
use ivegan::model::{init_rng, Architecture, DataSource, IveGanModel, TrainConfig, Trainer};
use ivegan::transforms::TransformSpec;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let dir = PathBuf::from(args.next().ok_or("usage: mnist_lite <mnist-dir> [seed] [iterations] [batch]")?);
    let seed: u64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(0);
    let iterations: u64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(2_000);
    let batch: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(128);

    let raw = load_idx(dir.join("train-images-idx3-ubyte"), dir.join("train-labels-idx1-ubyte"))?;
    let data = downscale(&raw.take(10_000), 2)?;
    println!("{} images at {}×{}", data.len(), data.height, data.width);

    let arch = Architecture::mnist_lite(data.height * data.width, 3, 4, 512, 512);
    let config = TrainConfig {
        iterations,
        batch_size: batch,
        snapshot_every: iterations,
        snapshot_size: 16,
        transform: TransformSpec::ImageAffine {
            height: data.height,
            width: data.width,
            max_shift_px: 2,
            max_rot_deg: 20.0,
        },
        ..TrainConfig::ring_defaults(&Default::default(), seed)
    };
    let model = IveGanModel::new(arch, &config.optim, &mut init_rng(seed))?;
    let mut trainer = Trainer::new(model, config, DataSource::Rows(data.images.clone()))?;

    let start = Instant::now();
    let every = std::env::var("EVAL_EVERY").ok().and_then(|v| v.parse().ok()).unwrap_or((iterations / 10).max(1));
    while !trainer.is_done() {
        let r = trainer.step()?;
        if r.iteration % every == 0 {
            let m = &trainer.model;
            let latents = m.encode(&data.images)?;
            let recon = m.reconstruct(&data.images, &mut ChaCha8Rng::seed_from_u64(seed))?;
            let rec = reconstruction_error(&data.images, &recon, seed)?;
            let knn = latent_knn_agreement(&latents, &data.labels, 5)?;
            println!(
                "iter {:>5}  loss_D {:.3}  loss_D′ {:.3}  loss_GE {:.3}  recon {:.3} vs shuffled {:.3} ({:.1}% lower)  5-NN {:.3}  ({:.0}s)",
                r.iteration,
                r.loss_d.unwrap_or(f64::NAN),
                r.loss_dprime,
                r.loss_ge,
                rec.mean,
                rec.mismatched_mean,
                100.0 * (1.0 - rec.mean / rec.mismatched_mean),
                knn,
                start.elapsed().as_secs_f64()
            );
        }
    }
    Ok(())
}
