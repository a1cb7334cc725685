//! Stops a ring run halfway, saves a checkpoint, reloads it and finishes the
//! run, then checks the result against an uninterrupted run.
//!
//! ```text
//! cargo run --release --example checkpoint_resume -- [iterations]
//! ```

use ivegan::cli::{AnyModel, Checkpoint, Experiment};
use ivegan::data::RingSpec;
use ivegan::model::{init_rng, Architecture, DataSource, IveGanModel, TrainConfig, Trainer};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let iterations: u64 = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(400);
    let ring = RingSpec::default();
    let mut config = TrainConfig::ring_defaults(&ring, 3);
    config.iterations = iterations;
    config.batch_size = 256;
    config.snapshot_every = iterations;
    let fresh = || IveGanModel::new(Architecture::ring(2, 4), &config.optim, &mut init_rng(3));

    let mut whole = Trainer::new(fresh()?, config.clone(), DataSource::Ring(ring.clone()))?;
    while !whole.is_done() {
        whole.step()?;
    }

    let mut first = Trainer::new(fresh()?, config.clone(), DataSource::Ring(ring.clone()))?;
    for _ in 0..iterations / 2 {
        first.step()?;
    }
    let (model, rng, at) = first.into_state();
    let path = std::env::temp_dir().join("ivegan_example_checkpoint.json");
    Checkpoint::capture(&AnyModel::Ive(model), Experiment::Ring, at, "example".into(), &rng).save(&path)?;
    println!("saved iteration {at} to {}", path.display());

    let loaded = Checkpoint::load(&path)?;
    let model = loaded.restore()?.ive()?.clone();
    let mut second = Trainer::resume(model, config, DataSource::Ring(ring), loaded.rng.clone(), loaded.iteration)?;
    while !second.is_done() {
        second.step()?;
    }
    println!(
        "resumed run matches the uninterrupted one bit for bit: {}",
        second.model == whole.model && second.rng() == whole.rng()
    );
    Ok(())
}
