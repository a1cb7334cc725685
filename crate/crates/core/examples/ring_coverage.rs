//! Trains an IVE-GAN on the ring of eight Gaussians and prints a coverage
//! report for each snapshot.
//!
//! ```text
//! cargo run --release --example ring_coverage -- [seed] [iterations]
//! ```

use std::time::Instant;

use ivegan::data::RingSpec;
use ivegan::eval::coverage;
use ivegan::model::{Architecture, DataSource, IveGanModel, TrainConfig, Trainer};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let seed: u64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(0);
    let iterations: u64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(50_000);

    let ring = RingSpec::default();
    let mut config = TrainConfig::ring_defaults(&ring, seed);
    config.iterations = iterations;
    config.snapshot_every = (iterations / 5).max(1);

    let model = IveGanModel::new(Architecture::ring(2, 4), &config.optim, &mut ivegan::model::init_rng(seed))?;
    let mut trainer = Trainer::new(model, config.clone(), DataSource::Ring(ring.clone()))?;
    let start = Instant::now();
    trainer.run_until(
        iterations,
        |_, _| Ok(()),
        |snap| {
            let r = coverage(&snap.samples, &ring, 3.0, 0.02).expect("enough samples");
            let shares: Vec<String> = r.per_mode_share().iter().map(|s| format!("{s:.3}")).collect();
            println!(
                "iter {:>6}  covered {}  assigned {:.3}  jsd {:.3}  shares [{}]  ({:.0}s)",
                snap.iteration,
                r.covered_modes,
                r.assigned_fraction,
                r.jsd,
                shares.join(" "),
                start.elapsed().as_secs_f64()
            );
            Ok(())
        },
    )?;
    Ok(())
}
